#pragma once

// Interaction boundaries between two systems: locating the boundary, moving
// it with the fluxes, building transfer matrices from interaction unitaries,
// and re-indexing fluid that crosses it.

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "wavefield/hilbert.hpp"
#include "wavefield/memory.hpp"
#include "wavefield/solver.hpp"

namespace wavefield {

enum class Region { pre, post };

/// One indexed packet: coefficient times a unit-norm spatial shape.
struct Packet {
  ExternalMemory index;
  cplx coefficient{0.0, 0.0};
  GridFunction shape;
  Region region = Region::pre;
};

/// A branch whose labels contain every entry of `when` is displayed reflected
/// about `about` (grid node).
struct Mirror {
  BasisLabels when;
  double about = 0.0;
};

/// Restriction of a memory transfer to the branches actually present.
struct Transfer {
  CMatrix matrix;
  std::vector<BasisLabels> in_labels;
  std::vector<BasisLabels> out_labels;
};

/// One term of a system's unfolded field: branch i carries weights[i] * shape.
struct Component {
  CVector weights;
  GridFunction shape;
};

/// Explicit piecewise field of one system: `pre` holds the not-yet-crossed
/// in-branch fields and `post` the crossed out-branch fields.
struct PiecewiseField {
  std::map<BasisLabels, GridFunction> pre;
  std::map<BasisLabels, GridFunction> post;

  double norm_squared(const Grid& grid) const;
};

/// Every indexed wavefunction of one system, stored unfolded: the smooth
/// in-branch fields sum_r weights_r[i] * shape_r over `labels`. While a link is
/// active, the physical piecewise field is recovered with render().
struct WaveField {
  SystemId system;
  InternalMemory memory;
  std::vector<BasisLabels> labels;
  std::vector<Component> components;
  /// Unit-norm initial shape evolved with the same propagator; fixes the phase
  /// convention of the coefficients.
  GridFunction reference;
  std::vector<double> potential;
  /// No fluid of its own; packet shapes are borrowed from `host`.
  bool passive = false;
  SystemId host;
  std::vector<Mirror> mirrors;

  GridFunction branch(std::size_t i) const;
  std::map<BasisLabels, GridFunction> branches() const;
  double norm_squared(const Grid& grid) const;
  /// Density and current of the whole system.
  FluidSample fluid(const Grid& grid) const;
  /// Replaces every branch by T times the branches, adopts the out labels and
  /// `after`, and drops branches whose coefficient is negligible.
  void transform(const Transfer& t, const InternalMemory& after, const Grid& grid);
};

/// Coefficient of a branch field relative to a reference shape.
cplx branch_coefficient(const GridFunction& branch, const GridFunction& reference, const Grid& grid);

struct BoundaryLink {
  std::string op_id;
  SystemId left_system;
  /// Empty for a static device boundary with a single fluid.
  std::optional<SystemId> right_system;
  double x12 = 0.0;
  Operator unitary;
  Transfer t_left;
  Transfer t_right;
  double crossed_fraction_left = 0.0;
  double crossed_fraction_right = 0.0;
  bool moving = true;
  InternalMemory after;

  bool is_device() const { return !right_system.has_value(); }
};

/// Root of F1(x) + F2(x) = 1 (equal mass of system 1 right of x and system 2
/// left of x).
double find_initial_boundary(std::span<const double> rho1, std::span<const double> rho2, const Grid& grid);

/// One RK2 midpoint step of dx/dt = (j1 + j2) / (rho1 + rho2) with the fields
/// held fixed.
double step_boundary(double x12, const GridFunction& psi1, const GridFunction& psi2, const Grid& grid);
/// Same with fields sampled at the start and end of the step.
double step_boundary(double x12, const FluidSample& left0, const FluidSample& right0, const FluidSample& left1,
                     const FluidSample& right1, const Grid& grid);

/// t_left = U (I (x) |right>) and t_right = U (|left> (x) I); rows index the
/// joint basis with the left system most significant.
std::pair<CMatrix, CMatrix> transfer_matrices(const Operator& u, const CVector& state_left,
                                              const CVector& state_right);

/// Full transfer matrices for an interaction of two systems whose memories may
/// carry different histories; columns follow each system's own memory.
std::pair<MemoryTransfer, MemoryTransfer> transfer_matrices_synced(const InternalMemory& left_mem,
                                                                   const InternalMemory& right_mem,
                                                                   const Operator& u, const SystemId& left,
                                                                   const SystemId& right, const std::string& op_id);

/// Keeps the columns of `full` for `labels` (in that order) and the rows
/// those columns reach.
Transfer restrict_transfer(const MemoryTransfer& full, const std::vector<BasisLabels>& labels);

/// One system's view of an active link.
struct LinkSide {
  const Transfer* transfer = nullptr;
  double x12 = 0.0;
  /// true when the crossed side is x > x12.
  bool crossed_right = true;
};

/// Physical piecewise field: in-branches on the uncrossed side, T times the
/// in-branches on the crossed side. Without a link every branch is `pre`.
PiecewiseField render(const WaveField& wf, const LinkSide* side, const Grid& grid);
/// Coefficient-times-shape packets of a rendered field.
std::vector<Packet> make_packets(const WaveField& wf, const PiecewiseField& field, const Grid& grid);

/// Smooth in-branch fields pre + T^dagger post.
std::map<BasisLabels, GridFunction> unfolded(const PiecewiseField& field, const Transfer& t, const Grid& grid);

/// Re-partitions every cell of both fields across link.x12: crossed cells
/// receive T times the in-branch values (pre cleared), uncrossed cells receive
/// T^dagger times the out-branch values (post cleared). The left system's
/// crossed side is x > x12, the right system's is x <= x12. Throws if either
/// norm changes by more than 1e-8.
void apply_boundary_transfer(PiecewiseField& left, PiecewiseField* right, const BoundaryLink& link, const Grid& grid);

}  // namespace wavefield
