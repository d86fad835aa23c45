#include "wavefield/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "wavefield/io.hpp"

namespace wavefield {

struct ScenarioState::ActiveLink {
  BoundaryLink link;
  FluidSample left0;
  FluidSample right0;
  std::vector<SystemId> passive_modes;
  bool done = false;
};

struct ScenarioState::Tracker {
  StreamlineTracker tracker;
  int stride = 1;
  long long start_step = 0;
};

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

void require_no_overlap(const std::vector<SystemId>& ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      if (ids[i] == ids[j]) throw std::invalid_argument("interaction participants must be distinct");
    }
  }
}

/// Newton steps back onto F_left + F_right = 1; each step is capped at one
/// cell and skipped where the combined density is negligible.
double project_boundary(double x, const SpectralField& left, const SpectralField& right, const Grid& grid) {
  for (int it = 0; it < 4; ++it) {
    const double g = left.cumulative(x) + right.cumulative(x) - 1.0;
    const double slope = left.value(x) + right.value(x);
    if (!(slope > 1e-10)) break;
    const double dx = std::clamp(-g / slope, -grid.dx(), grid.dx());
    x += dx;
    if (std::abs(dx) < 1e-14) break;
  }
  return x;
}

}  // namespace

std::string index_label(const SystemId& system, const BasisLabels& labels) {
  std::ostringstream out;
  out << system.name() << ':' << labels.at(system) << '|';
  bool first = true;
  for (const auto& [id, v] : labels) {
    if (id == system) continue;
    if (!first) out << ',';
    first = false;
    out << id.name() << '=' << v;
  }
  return out.str();
}

// ---------------------------------------------------------------- construction

ScenarioState::ScenarioState(Grid grid) : grid_(grid) { grid_.validate(); }
ScenarioState::~ScenarioState() = default;
ScenarioState::ScenarioState(ScenarioState&&) noexcept = default;
ScenarioState& ScenarioState::operator=(ScenarioState&&) noexcept = default;

void ScenarioState::add_system(const SystemId& id, const Ket& initial, const GridFunction& shape,
                               std::vector<double> potential) {
  if (wavefields_.contains(id)) throw std::invalid_argument("duplicate system '" + id.name() + "'");
  if (initial.labels().size() != 1 || initial.labels()[0] != id) {
    throw std::invalid_argument("initial state of '" + id.name() + "' must be a single-system ket labelled by it");
  }
  if (shape.values.size() != grid_.n || std::abs(shape.norm_squared(grid_) - 1.0) > 1e-10) {
    throw std::invalid_argument("shape of '" + id.name() + "' must be a unit-norm grid function");
  }
  WaveField wf;
  wf.system = id;
  wf.memory = InternalMemory::fresh(id, initial);
  wf.reference = shape;
  wf.potential = potential;
  const auto terms = expand_product_terms(initial);
  Component c{CVector(static_cast<Eigen::Index>(terms.size())), shape};
  for (std::size_t k = 0; k < terms.size(); ++k) {
    wf.labels.push_back(terms[k].basis_labels);
    c.weights(static_cast<Eigen::Index>(k)) = terms[k].coefficient;
  }
  wf.components.push_back(std::move(c));
  propagators_.emplace(id, Propagator(grid_, std::move(potential)));
  wavefields_.emplace(id, std::move(wf));
}

void ScenarioState::add_passive_system(const SystemId& id, const Ket& initial, const SystemId& host) {
  if (wavefields_.contains(id)) throw std::invalid_argument("duplicate system '" + id.name() + "'");
  require_fluid(host);
  WaveField wf;
  wf.system = id;
  wf.memory = InternalMemory::fresh(id, initial);
  wf.passive = true;
  wf.host = host;
  wavefields_.emplace(id, std::move(wf));
}

const WaveField& ScenarioState::wavefield(const SystemId& id) const {
  auto it = wavefields_.find(id);
  if (it == wavefields_.end()) throw std::invalid_argument("unknown system '" + id.name() + "'");
  return it->second;
}

WaveField& ScenarioState::mutable_wavefield(const SystemId& id) {
  auto it = wavefields_.find(id);
  if (it == wavefields_.end()) throw std::invalid_argument("unknown system '" + id.name() + "'");
  return it->second;
}

void ScenarioState::require_fluid(const SystemId& id) const {
  if (wavefield(id).passive) throw std::invalid_argument("system '" + id.name() + "' has no fluid of its own");
}

void ScenarioState::require_idle(const SystemId& id) const {
  if (has_active_link(id)) throw std::invalid_argument("system '" + id.name() + "' is already crossing a boundary");
}

std::vector<BoundaryLink> ScenarioState::links() const {
  std::vector<BoundaryLink> out;
  for (const auto& a : active_) out.push_back(a.link);
  return out;
}

bool ScenarioState::has_active_link(const SystemId& id) const {
  return std::any_of(active_.begin(), active_.end(), [&](const ActiveLink& a) {
    if (a.link.left_system == id || a.link.right_system == id) return true;
    return std::find(a.passive_modes.begin(), a.passive_modes.end(), id) != a.passive_modes.end();
  });
}

bool ScenarioState::idle() const { return active_.empty(); }

ScenarioState::ActiveLink* ScenarioState::find_link(std::vector<ActiveLink>& links, const SystemId& id) {
  for (auto& a : links) {
    if (a.link.left_system == id || a.link.right_system == id) return &a;
  }
  return nullptr;
}

// ---------------------------------------------------------------- evolution

void ScenarioState::advance(long long steps) {
  if (steps < 0) throw std::invalid_argument("advance: negative step count");
  for (long long s = 0; s < steps; ++s) step_once();
}

void ScenarioState::advance_to(double t) {
  const auto n = std::llround((t - time_) / grid_.dt);
  if (n > 0) advance(n);
}

void ScenarioState::advance_until_idle(long long max_steps) {
  for (long long s = 0; !idle(); ++s) {
    if (s >= max_steps) throw std::runtime_error("crossing did not complete within the step budget");
    step_once();
  }
}

void ScenarioState::step_once() {
  for (auto& [id, wf] : wavefields_) {
    if (wf.passive) continue;
    const Propagator& prop = propagators_.at(id);
    for (auto& c : wf.components) prop.step(c.shape);
    prop.step(wf.reference);
  }
  ++steps_;
  time_ = static_cast<double>(steps_) * grid_.dt;

  for (auto& a : active_) update_link(a, true);
  std::erase_if(active_, [](const ActiveLink& a) { return a.done; });

  for (auto& [id, tr] : trackers_) {
    if ((steps_ - tr->start_step) % tr->stride == 0) tr->tracker.advance(time_, fluid(id));
  }
  if (observer_ && observer_every_ > 0 && steps_ % observer_every_ == 0) observer_(*this);
  if (snapshot_out_ != nullptr && snapshot_every_ > 0 && steps_ % snapshot_every_ == 0) {
    write_snapshot(*snapshot_out_, snapshot_stride_);
  }
}

void ScenarioState::update_link(ActiveLink& active, bool moved) {
  BoundaryLink& link = active.link;
  const WaveField& left = wavefield(link.left_system);
  const WaveField* right = link.right_system ? &wavefield(*link.right_system) : nullptr;

  FluidSample l1 = left.fluid(grid_);
  FluidSample r1 = right != nullptr ? right->fluid(grid_) : FluidSample{};
  if (link.moving && moved) {
    link.x12 = step_boundary(link.x12, active.left0, active.right0, l1, r1, grid_);
  }
  const SpectralField fl(l1.density, grid_);
  if (right != nullptr) {
    const SpectralField fr(r1.density, grid_);
    if (link.moving && moved) link.x12 = project_boundary(link.x12, fl, fr, grid_);
    link.crossed_fraction_right = clamp01(fr.cumulative(link.x12));
  } else {
    link.crossed_fraction_right = std::numeric_limits<double>::quiet_NaN();
  }
  link.crossed_fraction_left = clamp01(1.0 - fl.cumulative(link.x12));
  active.left0 = std::move(l1);
  active.right0 = std::move(r1);
  records_.push_back({time_, link.x12, link.crossed_fraction_left, link.crossed_fraction_right, link.op_id});

  const bool left_done = link.crossed_fraction_left >= kCrossingComplete;
  const bool right_done = right == nullptr || link.crossed_fraction_right >= kCrossingComplete;
  if (left_done && right_done) retire(active);
}

void ScenarioState::retire(ActiveLink& active) {
  BoundaryLink& link = active.link;
  mutable_wavefield(link.left_system).transform(link.t_left, link.after, grid_);
  if (link.right_system) mutable_wavefield(*link.right_system).transform(link.t_right, link.after, grid_);
  for (const auto& mode : active.passive_modes) mutable_wavefield(mode).memory = link.after;
  completed_.push_back(link);
  active.done = true;
}

// ---------------------------------------------------------------- interactions

void ScenarioState::meet(const SystemId& a, const SystemId& b, const Operator& u, const std::string& op_id) {
  require_no_overlap({a, b});
  require_fluid(a);
  require_fluid(b);
  require_idle(a);
  require_idle(b);
  const InternalMemory after =
      record_interaction(wavefield(a).memory, wavefield(b).memory, u, InteractionSpec{op_id, {a, b}});

  const bool a_left = density_centroid(a) <= density_centroid(b);
  const SystemId& left_id = a_left ? a : b;
  const SystemId& right_id = a_left ? b : a;
  const WaveField& left = wavefield(left_id);
  const WaveField& right = wavefield(right_id);

  ActiveLink active;
  BoundaryLink& link = active.link;
  link.op_id = op_id;
  link.left_system = left_id;
  link.right_system = right_id;
  link.unitary = u;
  link.after = after;
  link.t_left = restrict_transfer(memory_transfer(left.memory, after), left.labels);
  link.t_right = restrict_transfer(memory_transfer(right.memory, after), right.labels);
  link.moving = true;
  link.x12 = find_initial_boundary(left.fluid(grid_).density, right.fluid(grid_).density, grid_);
  active_.push_back(std::move(active));
  update_link(active_.back(), false);
  std::erase_if(active_, [](const ActiveLink& l) { return l.done; });
}

void ScenarioState::meet_device(const SystemId& fluid_id, const std::vector<DeviceEvent>& events, double x_device,
                                std::vector<Mirror> mirrors) {
  require_fluid(fluid_id);
  require_idle(fluid_id);
  if (events.empty()) throw std::invalid_argument("meet_device: no events");
  std::map<SystemId, InternalMemory> mems;
  std::vector<SystemId> modes;
  for (const auto& e : events) {
    require_no_overlap(e.participants);
    for (const auto& p : e.participants) {
      if (p != fluid_id) {
        if (!wavefield(p).passive) throw std::invalid_argument("meet_device: device partners must be passive modes");
        require_idle(p);
        if (std::find(modes.begin(), modes.end(), p) == modes.end()) modes.push_back(p);
      }
      mems.try_emplace(p, wavefield(p).memory);
    }
  }
  for (const auto& e : events) {
    const InternalMemory& first = mems.at(e.participants.front());
    const InternalMemory& second = mems.at(e.participants.back());
    const InternalMemory merged = record_interaction(first, second, e.unitary, InteractionSpec{e.op_id, e.participants});
    for (const auto& p : e.participants) mems[p] = merged;
  }
  InternalMemory after = mems.begin()->second;
  for (const auto& [id, m] : mems) after = synchronize(after, m);

  WaveField& wf = mutable_wavefield(fluid_id);
  ActiveLink active;
  BoundaryLink& link = active.link;
  link.op_id = events.front().op_id;
  for (std::size_t i = 1; i < events.size(); ++i) link.op_id += "+" + events[i].op_id;
  link.left_system = fluid_id;
  link.unitary = events.front().unitary;
  link.after = after;
  link.moving = false;
  link.x12 = x_device;
  link.t_left = restrict_transfer(memory_transfer(wf.memory, after), wf.labels);
  active.passive_modes = modes;
  for (const auto& m : mirrors) {
    wf.mirrors.push_back(m);
    for (const auto& mode : modes) mutable_wavefield(mode).mirrors.push_back(m);
  }
  active_.push_back(std::move(active));
  update_link(active_.back(), false);
  std::erase_if(active_, [](const ActiveLink& l) { return l.done; });
}

void ScenarioState::apply_local(const SystemId& id, const Operator& u, const std::string& op_id) {
  require_fluid(id);
  require_idle(id);
  WaveField& wf = mutable_wavefield(id);
  const InternalMemory after = record_interaction(wf.memory, wf.memory, u, InteractionSpec{op_id, {id}});
  const Transfer t = restrict_transfer(memory_transfer(wf.memory, after), wf.labels);
  const double before = wf.norm_squared(grid_);
  wf.transform(t, after, grid_);
  if (std::abs(wf.norm_squared(grid_) - before) > 1e-10) throw std::runtime_error("apply_local changed the norm");
}

// ---------------------------------------------------------------- observables

PiecewiseField ScenarioState::piecewise(const SystemId& id) const {
  const WaveField& wf = wavefield(id);
  for (const auto& a : active_) {
    if (a.link.left_system == id) {
      const LinkSide side{&a.link.t_left, a.link.x12, true};
      return render(wf, &side, grid_);
    }
    if (a.link.right_system == id) {
      const LinkSide side{&a.link.t_right, a.link.x12, false};
      return render(wf, &side, grid_);
    }
  }
  return render(wf, nullptr, grid_);
}

std::vector<Packet> ScenarioState::packets(const SystemId& id) const {
  const WaveField& wf = wavefield(id);
  if (!wf.passive) return make_packets(wf, piecewise(id), grid_);

  const WaveField& host = wavefield(wf.host);
  std::vector<Packet> host_packets;
  if (!has_active_link(wf.host)) host_packets = packets(wf.host);
  std::vector<Packet> out;
  for (const auto& em : external_memories(wf.memory, id)) {
    const BasisLabels full = em.full_labels(id);
    Packet p;
    p.index = em;
    p.coefficient = em.coefficient;
    p.shape = host.reference;
    for (const auto& hp : host_packets) {
      if (hp.index.full_labels(wf.host) == full) {
        p.coefficient = hp.coefficient;
        p.index.coefficient = hp.coefficient;
        p.shape = hp.shape;
        break;
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

FluidSample ScenarioState::fluid(const SystemId& id) const {
  require_fluid(id);
  return wavefield(id).fluid(grid_);
}

double ScenarioState::density_centroid(const SystemId& id) const {
  const auto rho = fluid(id).density;
  double m = 0.0;
  double mx = 0.0;
  for (std::size_t i = 0; i < grid_.n; ++i) {
    m += rho[i];
    mx += rho[i] * grid_.x(i);
  }
  return mx / m;
}

void ScenarioState::track_streamlines(const SystemId& id, int seeds, int stride) {
  require_fluid(id);
  if (seeds < 1 || stride < 1) throw std::invalid_argument("track_streamlines: seeds and stride must be positive");
  FluidSample sample = fluid(id);
  const SpectralField cdf(sample.density, grid_);
  const double total = cdf.total();
  std::vector<double> xs;
  for (int s = 0; s < seeds; ++s) {
    const double target = total * (static_cast<double>(s) + 0.5) / seeds;
    double lo = grid_.x_min;
    double hi = grid_.x_max - grid_.dx();
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf.cumulative(mid) < target ? lo : hi) = mid;
    }
    xs.push_back(0.5 * (lo + hi));
  }
  auto tracker = std::make_unique<Tracker>(Tracker{StreamlineTracker(grid_, xs, time_, std::move(sample)), stride, steps_});
  trackers_[id] = std::move(tracker);
}

std::vector<WorldLine> ScenarioState::streamlines(const SystemId& id) const {
  auto it = trackers_.find(id);
  if (it == trackers_.end()) throw std::invalid_argument("no streamlines tracked for '" + id.name() + "'");
  return it->second->tracker.lines();
}

std::vector<SystemId> ScenarioState::tracked_systems() const {
  std::vector<SystemId> out;
  for (const auto& [id, tr] : trackers_) out.push_back(id);
  return out;
}

void ScenarioState::set_observer(long long every, std::function<void(const ScenarioState&)> fn) {
  observer_every_ = every;
  observer_ = std::move(fn);
}

void ScenarioState::set_snapshot_sink(std::ostream* out, long long every, int x_stride) {
  if (x_stride < 1) throw std::invalid_argument("snapshot x stride must be positive");
  snapshot_out_ = out;
  snapshot_every_ = every;
  snapshot_stride_ = x_stride;
}

void ScenarioState::write_snapshot(std::ostream& out, int x_stride) const {
  const std::string t = io::format_double(time_);
  for (const auto& [id, wf] : wavefields_) {
    for (const auto& p : packets(id)) {
      std::string label = index_label(id, p.index.full_labels(id));
      if (p.region == Region::post && has_active_link(id)) label += ";post";
      for (std::size_t i = 0; i < grid_.n; i += static_cast<std::size_t>(x_stride)) {
        const cplx v = p.coefficient * p.shape.values[i];
        out << t << ',' << io::format_double(grid_.x(i)) << ',' << label << ',' << io::format_double(v.real()) << ','
            << io::format_double(v.imag()) << ',' << io::format_double(std::norm(v)) << '\n';
      }
    }
  }
}

std::map<BasisLabels, double> index_distribution(const ScenarioState& state, const SystemId& system) {
  std::map<BasisLabels, double> out;
  for (const auto& p : state.packets(system)) out[p.index.full_labels(system)] += std::norm(p.coefficient);
  return out;
}

std::map<std::pair<int, int>, double> correlation_table(const ScenarioState& state, const SystemId& a,
                                                        const SystemId& b) {
  const WaveField& wa = state.wavefield(a);
  const WaveField& wb = state.wavefield(b);
  if (!wa.memory.contains_system(b) || !wb.memory.contains_system(a)) {
    throw std::invalid_argument("correlation_table: '" + a.name() + "' and '" + b.name() + "' have not synchronized");
  }
  std::map<std::pair<int, int>, double> out;
  for (const auto& p : state.packets(a)) {
    const int ib = p.index.partner_labels.at(b);
    out[{p.index.own_basis_index, ib}] += std::norm(p.coefficient);
  }
  return out;
}

void write_boundary_csv(std::ostream& out, const std::vector<BoundaryRecord>& records) {
  out << "t,x12,crossed_fraction_left,crossed_fraction_right,link\n";
  for (const auto& r : records) {
    out << io::format_double(r.t) << ',' << io::format_double(r.x12) << ',' << io::format_double(r.crossed_left) << ','
        << io::format_double(r.crossed_right) << ',' << r.link << '\n';
  }
}

nlohmann::json summary_json(const ScenarioState& state) {
  nlohmann::json doc;
  doc["time"] = state.time();
  doc["steps"] = state.step_count();
  nlohmann::json systems = nlohmann::json::object();
  for (const auto& [id, wf] : state.wavefields()) {
    nlohmann::json sys;
    nlohmann::json dist = nlohmann::json::object();
    for (const auto& [labels, p] : index_distribution(state, id)) dist[index_label(id, labels)] = p;
    sys["distribution"] = dist;
    nlohmann::json coeffs = nlohmann::json::object();
    for (const auto& p : state.packets(id)) {
      coeffs[index_label(id, p.index.full_labels(id))] = {p.coefficient.real(), p.coefficient.imag()};
    }
    sys["coefficients"] = coeffs;
    sys["memory_ops"] = wf.memory.linearization();
    sys["norm"] = wf.passive ? 1.0 : wf.norm_squared(state.grid());
    systems[id.name()] = sys;
  }
  doc["systems"] = systems;

  nlohmann::json correlations = nlohmann::json::object();
  const auto& wfs = state.wavefields();
  for (auto it = wfs.begin(); it != wfs.end(); ++it) {
    for (auto jt = std::next(it); jt != wfs.end(); ++jt) {
      if (!it->second.memory.contains_system(jt->first) || !jt->second.memory.contains_system(it->first)) continue;
      nlohmann::json table = nlohmann::json::object();
      for (const auto& [key, p] : correlation_table(state, it->first, jt->first)) {
        table[std::to_string(key.first) + "," + std::to_string(key.second)] = p;
      }
      correlations[it->first.name() + "," + jt->first.name()] = table;
    }
  }
  doc["correlations"] = correlations;

  nlohmann::json boundaries = nlohmann::json::array();
  const auto describe = [](const BoundaryLink& l, bool complete) {
    nlohmann::json b;
    b["link"] = l.op_id;
    b["left"] = l.left_system.name();
    b["right"] = l.right_system ? nlohmann::json(l.right_system->name()) : nlohmann::json(nullptr);
    b["x12"] = l.x12;
    b["crossed_fraction_left"] = l.crossed_fraction_left;
    b["crossed_fraction_right"] = l.crossed_fraction_right;
    b["complete"] = complete;
    return b;
  };
  for (const auto& l : state.completed_links()) boundaries.push_back(describe(l, true));
  for (const auto& l : state.links()) boundaries.push_back(describe(l, false));
  doc["boundaries"] = boundaries;
  return doc;
}

}  // namespace wavefield
