#pragma once

// The eikonal equation d_t phi = a(t, xbar, d_xbar phi), phi(t0) = xbar . xibar,
// solved by characteristics, and the fold quantities of the canonical
// relation of the resulting oscillatory kernel.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qml/geometry.hpp"
#include "qml/reduced.hpp"

namespace qml {

/// Time levels t0 + k dt for k_min <= k <= k_max (k_min <= 0 <= k_max), and a
/// uniform grid over xbar = (x2..xn).
struct PhaseGridSpec {
  double t0 = 0.0;
  double dt = 0.05;
  int k_min = 0;
  int k_max = 1;
  std::vector<Interval> xbar;
  std::vector<int> xbar_samples;  // 1 allowed: a single node at lo
};

struct PhaseOptions {
  double tol = 1e-12;       // characteristic ODE tolerance
  double caustic = 1e-4;    // det d xbar / d xbar0 below this flags a node
  double fd_step = 1e-6;    // Jacobian finite-difference step
  int jobs = 1;
};

struct PhaseTable {
  int n = 0;
  std::vector<Eigen::VectorXd> params;  // xibar values, each of length n-1
  PhaseGridSpec grid;
  std::vector<double> phi;  // [param][level][node]
  std::vector<std::uint8_t> caustic;
  double min_jacobian = 0.0;  // min |det d xbar / d xbar0| encountered

  int levels() const { return grid.k_max - grid.k_min + 1; }
  int nodes() const;
  double time(int level) const { return grid.t0 + (grid.k_min + level) * grid.dt; }
  /// Level index of t0.
  int zero_level() const { return -grid.k_min; }
  Eigen::VectorXd node(int index) const;
  std::size_t index(int param, int level, int node) const {
    return (static_cast<std::size_t>(param) * static_cast<std::size_t>(levels()) + static_cast<std::size_t>(level)) *
               static_cast<std::size_t>(nodes()) +
           static_cast<std::size_t>(node);
  }
  double value(int param, int level, int node) const { return phi[index(param, level, node)]; }
  bool flagged(int param, int level, int node) const { return caustic[index(param, level, node)] != 0; }
  std::size_t flagged_count() const;
};

/// `center` plus offsets along the last component (nu).
std::vector<Eigen::VectorXd> nu_stencil(const Eigen::VectorXd& center, const std::vector<double>& offsets);

PhaseTable solve_phase(const ReducedSymbol& a, const std::vector<Eigen::VectorXd>& params, const PhaseGridSpec& grid,
                       const PhaseOptions& opt = {});

struct HJResidual {
  double max_residual = 0.0;
  std::size_t nodes_checked = 0;
};

/// |d_t phi - a(t, xbar, d_xbar phi)| with 5-point centred differences, over
/// non-caustic nodes whose whole stencil is available and unflagged.
HJResidual hj_residual(const PhaseTable& table, const ReducedSymbol& a);

void write_phase_csv(std::ostream& out, const PhaseTable& table);

struct FoldQuantities {
  double d3_tnn = 0.0;  // d^3 phi / dt dnu dnu
  double d3_ttn = 0.0;  // d^3 phi / dt dt dnu
};

/// Closed forms from the jets of a at w = (x, xibar). Throws DomainError when
/// |d_xibar a| > 1e-8 there (coordinates not adapted).
FoldQuantities phase_fold_quantities_closed(const ReducedSymbol& a, std::span<const double> w);

/// 5-point stencil products in (t, nu) around the zero level, single xbar node.
/// The table must come from `fold_stencil_table`-style inputs: params are a
/// symmetric 5-point nu stencil and the t grid holds levels -2..2.
FoldQuantities phase_fold_quantities_numeric(const PhaseTable& table);

/// Phase table on the fold stencil around w = (x, xibar): spacing `step` in
/// both t and nu.
PhaseTable fold_stencil_table(const ReducedSymbol& a, std::span<const double> w, double step = 1e-2,
                              const PhaseOptions& opt = {});

enum class FoldClass { Nondegenerate, Fold, Degenerate };

const char* to_string(FoldClass c);

struct MapClassification {
  FoldClass cls = FoldClass::Degenerate;
  double det = 0.0;
  double d_det = 0.0;  // derivative of det dF along the kernel direction
  int rank = 0;
  std::string reason;
};

/// Fold test for a map F: R^d -> R^d from dF and grad(det dF) at a point.
MapClassification classify_fold_map(const Eigen::MatrixXd& dF, const Eigen::VectorXd& grad_det,
                                    double threshold = 1e-6);

/// dpi_L, dpi_R and grad det at the base point, in the variables
/// (t, y', eta', nu) of the kernel restricted to r = 0. Uses jets of a.
struct ProjectionJets {
  Eigen::MatrixXd dpi_left;
  Eigen::MatrixXd dpi_right;
  Eigen::VectorXd grad_det_left;
  Eigen::VectorXd grad_det_right;
};

ProjectionJets projection_jets(const ReducedSymbol& a, std::span<const double> w);

struct FoldReport {
  PhasePoint base;
  double threshold = 1e-6;
  double e0 = 0.0;  // d_tau p at the base point
  FoldQuantities closed;
  std::optional<FoldQuantities> numeric;
  double rddot_from_phase = 0.0;  // -e0 * d3_ttn (closed form)
  std::optional<double> rddot_flow;
  FoldClass pi_left = FoldClass::Degenerate;
  FoldClass pi_right = FoldClass::Degenerate;
  std::optional<MapClassification> pi_left_map;
  std::optional<MapClassification> pi_right_map;
  double hj_residual = 0.0;
  double min_jacobian = 0.0;
};

/// pi_L from d3_tnn, pi_R from d3_ttn.
FoldReport classify_projections(const FoldQuantities& closed, const std::optional<FoldQuantities>& numeric,
                                double e0, double threshold = 1e-6);

struct FoldOptions {
  double threshold = 1e-6;
  bool numeric = true;
  double step = 1e-2;
  PhaseOptions phase;
};

/// Full analysis at a characteristic base point: closed-form and numeric fold
/// quantities, both classifications, and the rddot consistency data when a
/// defining function is given.
FoldReport analyze_fold(const SymbolFn& p, const std::optional<SymbolFn>& r, const PhasePoint& base,
                        const FoldOptions& opt = {});

}  // namespace qml
