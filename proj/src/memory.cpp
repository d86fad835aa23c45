#include "wavefield/memory.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "wavefield/io.hpp"

namespace wavefield {
namespace {

bool touches(const InteractionOp& op, const SystemId& s) {
  return std::find(op.participants.begin(), op.participants.end(), s) != op.participants.end();
}

}  // namespace

BasisLabels ExternalMemory::full_labels(const SystemId& self) const {
  BasisLabels out = partner_labels;
  out[self] = own_basis_index;
  return out;
}

InternalMemory InternalMemory::fresh(const SystemId& system, Ket initial) {
  if (initial.labels().size() != 1 || initial.labels()[0] != system) {
    throw std::invalid_argument("fresh memory: initial state must be a single-system ket of '" + system.name() + "'");
  }
  InternalMemory mem;
  mem.initial_states_.emplace(system, std::move(initial));
  return mem;
}

InternalMemory InternalMemory::from_parts(std::map<SystemId, Ket> initial_states,
                                          std::map<std::string, InteractionOp> ops) {
  InternalMemory mem;
  mem.initial_states_ = std::move(initial_states);
  mem.ops_ = std::move(ops);
  return mem;
}

std::vector<SystemId> InternalMemory::systems() const {
  std::vector<SystemId> out;
  out.reserve(initial_states_.size());
  for (const auto& [id, ket] : initial_states_) out.push_back(id);
  return out;
}

bool InternalMemory::is_ancestor(const std::string& ancestor, const std::string& op_id) const {
  std::vector<std::string> stack{op_id};
  std::set<std::string> seen;
  while (!stack.empty()) {
    const std::string cur = stack.back();
    stack.pop_back();
    auto it = ops_.find(cur);
    if (it == ops_.end()) continue;
    for (const auto& parent : it->second.causal_parents) {
      if (parent == ancestor) return true;
      if (seen.insert(parent).second) stack.push_back(parent);
    }
  }
  return false;
}

std::set<std::string> InternalMemory::tips(const SystemId& system) const {
  std::vector<std::string> on_line;
  for (const auto& [id, op] : ops_) {
    if (touches(op, system)) on_line.push_back(id);
  }
  std::set<std::string> out;
  for (const auto& candidate : on_line) {
    const bool superseded = std::any_of(on_line.begin(), on_line.end(), [&](const std::string& other) {
      return other != candidate && is_ancestor(candidate, other);
    });
    if (!superseded) out.insert(candidate);
  }
  return out;
}

std::vector<std::string> InternalMemory::linearization() const {
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> children;
  for (const auto& [id, op] : ops_) {
    indegree.try_emplace(id, 0);
    for (const auto& parent : op.causal_parents) {
      if (!ops_.contains(parent)) {
        throw std::invalid_argument("op '" + id + "' references unknown parent '" + parent + "'");
      }
      ++indegree[id];
      children[parent].push_back(id);
    }
  }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [id, deg] : indegree) {
    if (deg == 0) ready.push(id);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string id = ready.top();
    ready.pop();
    for (const auto& child : children[id]) {
      if (--indegree[child] == 0) ready.push(child);
    }
    order.push_back(std::move(id));
  }
  if (order.size() != ops_.size()) throw std::invalid_argument("cyclic interaction DAG");
  return order;
}

void InternalMemory::add_op(InteractionOp op) {
  if (op.participants.empty() || op.participants.size() > 2) {
    throw std::invalid_argument("op '" + op.op_id + "' must have one or two participants");
  }
  if (op.participants.size() == 2 && op.participants[0] == op.participants[1]) {
    throw std::invalid_argument("op '" + op.op_id + "' lists the same participant twice");
  }
  if (ops_.contains(op.op_id)) throw std::invalid_argument("duplicate op_id '" + op.op_id + "'");
  std::vector<int> dims;
  for (const auto& p : op.participants) {
    auto it = initial_states_.find(p);
    if (it == initial_states_.end()) throw std::invalid_argument("op '" + op.op_id + "' acts on unknown system '" + p.name() + "'");
    dims.push_back(it->second.dims()[0]);
  }
  if (op.unitary.dims() != dims) throw std::invalid_argument("op '" + op.op_id + "': unitary dims do not match participants");
  for (const auto& parent : op.causal_parents) {
    if (!ops_.contains(parent)) throw std::invalid_argument("op '" + op.op_id + "' references unknown parent '" + parent + "'");
  }
  for (const auto& p : op.participants) {
    for (const auto& tip : tips(p)) {
      const bool in_past = op.causal_parents.contains(tip) ||
                           std::any_of(op.causal_parents.begin(), op.causal_parents.end(),
                                       [&](const std::string& parent) { return is_ancestor(tip, parent); });
      if (!in_past) {
        throw std::invalid_argument("op '" + op.op_id + "' is not ordered after '" + tip + "' on the world-line of '" +
                                    p.name() + "'");
      }
    }
  }
  ops_.emplace(op.op_id, std::move(op));
}

void InternalMemory::validate() const {
  for (const auto& [id, ket] : initial_states_) {
    if (ket.labels().size() != 1 || ket.labels()[0] != id) {
      throw std::invalid_argument("initial state of '" + id.name() + "' must be a single-system ket");
    }
  }
  const auto order = linearization();
  InternalMemory replay;
  replay.initial_states_ = initial_states_;
  for (const auto& id : order) replay.add_op(ops_.at(id));
}

Ket derive_state(const InternalMemory& mem) { return derive_state(mem, mem.linearization()); }

Ket derive_state(const InternalMemory& mem, const std::vector<std::string>& order) {
  if (mem.initial_states().empty()) throw std::invalid_argument("derive_state: empty memory");
  if (order.size() != mem.ops().size()) throw std::invalid_argument("derive_state: order does not cover every op");
  std::set<std::string> done;
  std::optional<Ket> state;
  for (const auto& [id, ket] : mem.initial_states()) {
    state = state ? tensor(*state, ket) : ket;
  }
  for (const auto& id : order) {
    auto it = mem.ops().find(id);
    if (it == mem.ops().end()) throw std::invalid_argument("derive_state: unknown op '" + id + "'");
    for (const auto& parent : it->second.causal_parents) {
      if (!done.contains(parent)) throw std::invalid_argument("derive_state: order violates causality at '" + id + "'");
    }
    state = apply(it->second.unitary, *state, it->second.participants);
    done.insert(id);
  }
  return state->canonical();
}

InternalMemory synchronize(const InternalMemory& a, const InternalMemory& b) {
  auto initial = a.initial_states();
  for (const auto& [id, ket] : b.initial_states()) {
    auto [it, inserted] = initial.emplace(id, ket);
    if (!inserted && !(it->second == ket)) {
      throw std::invalid_argument("synchronize: conflicting initial state for '" + id.name() + "'");
    }
  }
  auto ops = a.ops();
  for (const auto& [id, op] : b.ops()) {
    auto [it, inserted] = ops.emplace(id, op);
    if (!inserted && !(it->second == op)) throw std::invalid_argument("synchronize: conflicting entries for op '" + id + "'");
  }
  InternalMemory merged = InternalMemory::from_parts(std::move(initial), std::move(ops));
  merged.validate();
  return merged;
}

InternalMemory record_interaction(const InternalMemory& a, const InternalMemory& b, const Operator& u,
                                  const InteractionSpec& spec) {
  InternalMemory merged = synchronize(a, b);
  InteractionOp op{spec.op_id, u.with_labels(spec.participants), spec.participants, {}};
  for (const auto& p : spec.participants) {
    const auto t = merged.tips(p);
    op.causal_parents.insert(t.begin(), t.end());
  }
  merged.add_op(std::move(op));
  return merged;
}

std::vector<ExternalMemory> external_memories(const InternalMemory& mem, const SystemId& system, const BasisMap& bases) {
  if (!mem.contains_system(system)) throw std::invalid_argument("external_memories: unknown system '" + system.name() + "'");
  const Ket state = to_basis(derive_state(mem), bases);
  std::vector<ExternalMemory> out;
  for (auto& term : expand_product_terms(state)) {
    ExternalMemory em;
    em.own_basis_index = term.basis_labels.at(system);
    term.basis_labels.erase(system);
    em.partner_labels = std::move(term.basis_labels);
    em.coefficient = term.coefficient;
    out.push_back(std::move(em));
  }
  return out;
}

std::vector<BasisLabels> all_labels(const std::vector<SystemId>& systems, const std::vector<int>& dims) {
  std::vector<BasisLabels> out{BasisLabels{}};
  for (std::size_t i = 0; i < systems.size(); ++i) {
    std::vector<BasisLabels> next;
    next.reserve(out.size() * static_cast<std::size_t>(dims[i]));
    for (const auto& partial : out) {
      for (int v = 0; v < dims[i]; ++v) {
        BasisLabels l = partial;
        l[systems[i]] = v;
        next.push_back(std::move(l));
      }
    }
    out = std::move(next);
  }
  return out;
}

MemoryTransfer memory_transfer(const InternalMemory& before, const InternalMemory& after, const BasisMap& bases) {
  for (const auto& [id, ket] : before.initial_states()) {
    auto it = after.initial_states().find(id);
    if (it == after.initial_states().end() || !(it->second == ket)) {
      throw std::invalid_argument("memory_transfer: '" + id.name() + "' is missing or differs in the later memory");
    }
  }
  for (const auto& [id, op] : before.ops()) {
    auto it = after.ops().find(id);
    if (it == after.ops().end() || !(it->second == op)) {
      throw std::invalid_argument("memory_transfer: op '" + id + "' is missing or differs in the later memory");
    }
  }
  const auto in_systems = before.systems();
  const auto out_systems = after.systems();
  std::vector<int> in_dims, out_dims;
  std::optional<Ket> extra;
  for (const auto& s : in_systems) in_dims.push_back(after.initial_states().at(s).dims()[0]);
  for (const auto& s : out_systems) {
    const Ket& init = after.initial_states().at(s);
    out_dims.push_back(init.dims()[0]);
    if (!before.contains_system(s)) extra = extra ? tensor(*extra, init) : init;
  }
  std::vector<std::string> new_ops;
  for (const auto& id : after.linearization()) {
    if (!before.contains_op(id)) new_ops.push_back(id);
  }

  MemoryTransfer t;
  t.in_labels = all_labels(in_systems, in_dims);
  t.out_labels = all_labels(out_systems, out_dims);
  t.matrix = CMatrix::Zero(static_cast<Eigen::Index>(t.out_labels.size()), static_cast<Eigen::Index>(t.in_labels.size()));
  for (std::size_t col = 0; col < t.in_labels.size(); ++col) {
    CVector e = CVector::Zero(static_cast<Eigen::Index>(t.in_labels.size()));
    e(static_cast<Eigen::Index>(col)) = 1.0;
    Ket ket(std::move(e), in_dims, in_systems);
    for (const auto& [system, basis] : bases) {
      if (ket.contains(system)) ket = apply(basis, ket, {system});
    }
    if (extra) ket = tensor(ket, *extra);
    for (const auto& id : new_ops) {
      const auto& op = after.ops().at(id);
      ket = apply(op.unitary, ket, op.participants);
    }
    ket = to_basis(ket, bases).canonical();
    t.matrix.col(static_cast<Eigen::Index>(col)) = ket.amplitudes();
  }
  return t;
}

// ---------------------------------------------------------------- JSON

nlohmann::json to_json(const InternalMemory& mem) {
  nlohmann::json doc;
  doc["format"] = "wavefield.internal_memory/1";
  nlohmann::json initial = nlohmann::json::object();
  for (const auto& [id, ket] : mem.initial_states()) {
    const CMatrix column = ket.amplitudes();
    initial[id.name()] = {{"dim", ket.dims()[0]}, {"amplitudes", io::pack_matrix(column)}};
  }
  doc["initial_states"] = std::move(initial);
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& id : mem.linearization()) {
    const auto& op = mem.ops().at(id);
    nlohmann::json entry;
    entry["op_id"] = op.op_id;
    std::vector<std::string> participants;
    for (const auto& p : op.participants) participants.push_back(p.name());
    entry["participants"] = participants;
    entry["causal_parents"] = std::vector<std::string>(op.causal_parents.begin(), op.causal_parents.end());
    entry["dims"] = op.unitary.dims();
    entry["unitary"] = io::pack_matrix(op.unitary.matrix());
    ops.push_back(std::move(entry));
  }
  doc["ops"] = std::move(ops);
  return doc;
}

InternalMemory memory_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "wavefield.internal_memory/1") {
    throw std::invalid_argument("memory_from_json: unsupported format tag");
  }
  std::map<SystemId, Ket> initial;
  for (const auto& [name, entry] : doc.at("initial_states").items()) {
    const int dim = entry.at("dim").get<int>();
    const CMatrix amps = io::unpack_matrix(entry.at("amplitudes").get<std::string>(), dim, 1);
    initial.emplace(SystemId(name), Ket(amps.col(0), {dim}, {SystemId(name)}));
  }
  std::map<std::string, InteractionOp> ops;
  for (const auto& entry : doc.at("ops")) {
    InteractionOp op;
    op.op_id = entry.at("op_id").get<std::string>();
    for (const auto& p : entry.at("participants")) op.participants.emplace_back(p.get<std::string>());
    for (const auto& p : entry.at("causal_parents")) op.causal_parents.insert(p.get<std::string>());
    const auto dims = entry.at("dims").get<std::vector<int>>();
    Eigen::Index size = 1;
    for (int d : dims) size *= d;
    op.unitary = Operator(io::unpack_matrix(entry.at("unitary").get<std::string>(), size, size), dims, op.participants);
    ops.emplace(op.op_id, std::move(op));
  }
  InternalMemory mem = InternalMemory::from_parts(std::move(initial), std::move(ops));
  mem.validate();
  return mem;
}

}  // namespace wavefield
