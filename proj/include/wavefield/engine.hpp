#pragma once

// Scenario state: every system's wave-field on a shared grid, the active
// interaction boundaries, and the observable summaries.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavefield/boundary.hpp"
#include "wavefield/hilbert.hpp"
#include "wavefield/memory.hpp"
#include "wavefield/solver.hpp"

namespace wavefield {

/// Crossed fraction at or above which a link is complete.
inline constexpr double kCrossingComplete = 1.0 - 1e-9;

struct BoundaryRecord {
  double t = 0.0;
  double x12 = 0.0;
  double crossed_left = 0.0;
  /// NaN for device boundaries.
  double crossed_right = 0.0;
  std::string link;
};

/// One interaction of a device event (possibly several systems).
struct DeviceEvent {
  std::string op_id;
  Operator unitary;
  std::vector<SystemId> participants;
};

/// "A:0|1=0,2=1,B=1": own index, then every partner label.
std::string index_label(const SystemId& system, const BasisLabels& labels);

class ScenarioState {
 public:
  explicit ScenarioState(Grid grid);
  ~ScenarioState();
  ScenarioState(ScenarioState&&) noexcept;
  ScenarioState& operator=(ScenarioState&&) noexcept;

  const Grid& grid() const { return grid_; }
  double time() const { return time_; }
  long long step_count() const { return steps_; }

  /// Fluid system with internal state `initial` and unit-norm shape.
  void add_system(const SystemId& id, const Ket& initial, const GridFunction& shape,
                  std::vector<double> potential = {});
  /// Mode without fluid of its own; its packets borrow `host`'s shapes.
  void add_passive_system(const SystemId& id, const Ket& initial, const SystemId& host);

  bool contains(const SystemId& id) const { return wavefields_.contains(id); }
  const WaveField& wavefield(const SystemId& id) const;
  const std::map<SystemId, WaveField>& wavefields() const { return wavefields_; }
  /// Active links.
  std::vector<BoundaryLink> links() const;
  const std::vector<BoundaryLink>& completed_links() const { return completed_; }
  bool has_active_link(const SystemId& id) const;
  bool idle() const;

  /// Free evolution of every branch, then boundary motion and transfer.
  void advance(long long steps = 1);
  /// Advances to the step nearest `t` (never backwards).
  void advance_to(double t);
  /// Advances until no link is active; throws after `max_steps`.
  void advance_until_idle(long long max_steps);

  /// Interaction of two fluid systems through a moving boundary; `u` acts
  /// on (a, b) in that order.
  void meet(const SystemId& a, const SystemId& b, const Operator& u, const std::string& op_id);
  /// Static device boundary at `x_device` crossed by `fluid`; `events` are
  /// recorded in order and every participant ends with the same memory.
  void meet_device(const SystemId& fluid, const std::vector<DeviceEvent>& events, double x_device,
                   std::vector<Mirror> mirrors = {});
  /// Single-system unitary.
  void apply_local(const SystemId& id, const Operator& u, const std::string& op_id);

  std::vector<Packet> packets(const SystemId& id) const;
  /// Physical piecewise field of a fluid system at the current time.
  PiecewiseField piecewise(const SystemId& id) const;
  FluidSample fluid(const SystemId& id) const;
  double density_centroid(const SystemId& id) const;

  void track_streamlines(const SystemId& id, int seeds = 50, int stride = 4);
  std::vector<WorldLine> streamlines(const SystemId& id) const;
  std::vector<SystemId> tracked_systems() const;

  const std::vector<BoundaryRecord>& boundary_records() const { return records_; }

  /// Called after every `every`-th step.
  void set_observer(long long every, std::function<void(const ScenarioState&)> fn);
  /// Writes snapshot rows (t,x,index_label,re,im,density) every `every` steps.
  void set_snapshot_sink(std::ostream* out, long long every, int x_stride);
  void write_snapshot(std::ostream& out, int x_stride) const;

 private:
  struct ActiveLink;
  struct Tracker;

  WaveField& mutable_wavefield(const SystemId& id);
  void step_once();
  void update_link(ActiveLink& active, bool moved);
  void retire(ActiveLink& active);
  static ActiveLink* find_link(std::vector<ActiveLink>& links, const SystemId& id);
  void require_fluid(const SystemId& id) const;
  void require_idle(const SystemId& id) const;

  Grid grid_;
  double time_ = 0.0;
  long long steps_ = 0;
  std::map<SystemId, WaveField> wavefields_;
  std::map<SystemId, Propagator> propagators_;
  std::vector<ActiveLink> active_;
  std::vector<BoundaryLink> completed_;
  std::vector<BoundaryRecord> records_;
  std::map<SystemId, std::unique_ptr<Tracker>> trackers_;
  long long observer_every_ = 0;
  std::function<void(const ScenarioState&)> observer_;
  std::ostream* snapshot_out_ = nullptr;
  long long snapshot_every_ = 0;
  int snapshot_stride_ = 1;
};

/// |coefficient|^2 per full label set of the system's packets.
std::map<BasisLabels, double> index_distribution(const ScenarioState& state, const SystemId& system);
/// Joint probabilities of (index of a, index of b); requires both memories to
/// hold each other.
std::map<std::pair<int, int>, double> correlation_table(const ScenarioState& state, const SystemId& a,
                                                        const SystemId& b);

void write_boundary_csv(std::ostream& out, const std::vector<BoundaryRecord>& records);
/// {time, systems: {index distributions}, correlations, boundaries}.
nlohmann::json summary_json(const ScenarioState& state);

}  // namespace wavefield
