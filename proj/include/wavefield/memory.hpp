#pragma once

// Internal memory of a system: the initial states of every system in its
// past interaction cone plus the causal DAG of interaction unitaries applied
// to them. External memories (packet indexes) are read off by expanding the
// derived state in a product basis.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wavefield/hilbert.hpp"

namespace wavefield {

struct InteractionOp {
  std::string op_id;
  /// Acts on `participants` in the listed order.
  Operator unitary;
  std::vector<SystemId> participants;
  std::set<std::string> causal_parents;

  bool operator==(const InteractionOp&) const = default;
};

/// Index of one packet as seen by `system`: its own basis index and the
/// basis indexes of every other system in its memory.
struct ExternalMemory {
  int own_basis_index = 0;
  BasisLabels partner_labels;
  cplx coefficient{0.0, 0.0};

  BasisLabels full_labels(const SystemId& self) const;
};

class InternalMemory {
 public:
  InternalMemory() = default;
  /// Fresh memory of a single system that has never interacted.
  static InternalMemory fresh(const SystemId& system, Ket initial);
  /// Unchecked assembly; ordering problems surface in derive_state / validate.
  static InternalMemory from_parts(std::map<SystemId, Ket> initial_states, std::map<std::string, InteractionOp> ops);

  const std::map<SystemId, Ket>& initial_states() const { return initial_states_; }
  const std::map<std::string, InteractionOp>& ops() const { return ops_; }
  bool contains_system(const SystemId& s) const { return initial_states_.contains(s); }
  bool contains_op(const std::string& op_id) const { return ops_.contains(op_id); }
  std::vector<SystemId> systems() const;

  /// Ops on `system`'s world-line that no later op on the same world-line
  /// lists as an ancestor. At most one for a valid memory.
  std::set<std::string> tips(const SystemId& system) const;

  /// Deterministic topological order (ties broken by op_id). Throws on cycles.
  std::vector<std::string> linearization() const;
  bool is_ancestor(const std::string& ancestor, const std::string& op_id) const;

  /// Appends an op; parents must already be present and every participant's
  /// world-line tip must be in the op's causal past.
  void add_op(InteractionOp op);

  /// Full structural check (DAG acyclic, referenced systems known, world-lines
  /// totally ordered). Throws std::invalid_argument.
  void validate() const;

  bool operator==(const InternalMemory&) const = default;

 private:
  std::map<SystemId, Ket> initial_states_;
  std::map<std::string, InteractionOp> ops_;
};

/// State obtained by applying the ops in a DAG-consistent order to the
/// product of initial states; labels are sorted.
Ket derive_state(const InternalMemory& mem);
/// Same, with an explicit linearization (must be consistent with the DAG).
Ket derive_state(const InternalMemory& mem, const std::vector<std::string>& order);

InternalMemory synchronize(const InternalMemory& a, const InternalMemory& b);

struct InteractionSpec {
  std::string op_id;
  std::vector<SystemId> participants;
};

/// Synchronizes both memories and appends `u` acting on spec.participants.
/// For a single-system op pass the same memory twice.
InternalMemory record_interaction(const InternalMemory& a, const InternalMemory& b, const Operator& u,
                                  const InteractionSpec& spec);

std::vector<ExternalMemory> external_memories(const InternalMemory& mem, const SystemId& system,
                                              const BasisMap& bases = {});

/// Expansion of a post-event memory onto its pre-event counterpart: the
/// isometry from the product basis over `before`'s systems into the product
/// basis over `after`'s systems. Rows/cols are listed by `out_labels`/`in_labels`
/// (all basis combinations, lexicographic).
struct MemoryTransfer {
  CMatrix matrix;
  std::vector<BasisLabels> in_labels;
  std::vector<BasisLabels> out_labels;
};
MemoryTransfer memory_transfer(const InternalMemory& before, const InternalMemory& after, const BasisMap& bases = {});

nlohmann::json to_json(const InternalMemory& mem);
InternalMemory memory_from_json(const nlohmann::json& doc);

/// Enumerates every basis-label combination over `systems` in lexicographic order.
std::vector<BasisLabels> all_labels(const std::vector<SystemId>& systems, const std::vector<int>& dims);

}  // namespace wavefield
