#pragma once

// Sampled checks of the admissibility and curvature assumptions on a box in
// phase space: (A1) simple vanishing of p on fibres, (A2) curvature of the
// fibre varieties, (A3) simple tangency of bicharacteristics to {r = 0}.

#include <cstdint>
#include <string>
#include <vector>

#include "qml/flow.hpp"
#include "qml/symbol.hpp"

namespace qml {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct Region {
  std::vector<Interval> x;
  std::vector<Interval> xi;
  std::vector<int> x_samples;
  std::vector<int> xi_samples;
  /// Extra uniformly random seeds drawn with `seed`, on top of the grid.
  int random_seeds = 0;
  std::uint64_t seed = 0;

  /// Box [xlo, xhi]^n x [xilo, xihi]^n with `samples` nodes per axis.
  static Region box(int n, Interval x, Interval xi, int samples);

  int dimension() const { return static_cast<int>(x.size()); }
  /// Throws InvalidArgument unless the box is nonempty and counts are >= 2.
  void validate() const;
  bool contains(const PhasePoint& pt, double slack = 0.0) const;
};

enum class Verdict { Pass, Fail, Vacuous };

const char* to_string(Verdict v);

struct Thresholds {
  double a1 = 1e-6;
  double a2 = 1e-6;
  double a3 = 1e-6;
};

struct CharSample {
  std::vector<PhasePoint> points;
  std::size_t attempted = 0;
  std::size_t succeeded = 0;
};

/// Grid (plus optional random) seeds in the region, Newton-projected along
/// d_xi p onto p = 0 with x frozen. Keeps converged points (|p| <= 1e-10)
/// inside the region; at most `max_points`, thinned evenly.
CharSample sample_char_variety(const SymbolFn& p, const Region& region, std::size_t max_points);

struct A1Result {
  Verdict verdict = Verdict::Vacuous;
  double threshold = 0.0;
  double min_grad = 0.0;  // min |d_xi p|
  PhasePoint witness;
};

A1Result check_A1(const SymbolFn& p, const std::vector<PhasePoint>& pts, double threshold = 1e-6);

/// Second fundamental form of {xi : p(x, xi) = 0} at pt in an orthonormal
/// tangent basis: -B^T (d2_xi p) B / |d_xi p|.
Eigen::MatrixXd second_fundamental_form(const SymbolFn& p, const PhasePoint& pt);

struct A2Result {
  Verdict verdict = Verdict::Vacuous;
  double threshold = 0.0;
  int sign = 0;  // +1 positive definite, -1 negative definite, 0 neither
  double min_abs_eig = 0.0;
  PhasePoint witness;
  Eigen::MatrixXd witness_form;
  std::string reason;
};

A2Result check_A2(const SymbolFn& p, const std::vector<PhasePoint>& pts, double threshold = 1e-6);

struct Tangency {
  PhasePoint point;
  double rdot = 0.0;
  double rddot = 0.0;
  double grad_r = 0.0;  // |dr| at the point
  double rddot_normalized() const { return rddot / grad_r; }
};

struct A3Options {
  double threshold = 1e-6;
  /// Samples along each conormal curve.
  int curve_samples = 41;
  int jobs = 1;
};

struct A3Result {
  Verdict verdict = Verdict::Vacuous;
  double threshold = 0.0;
  std::vector<Tangency> tangencies;
  double min_abs_rddot = 0.0;  // normalized by |dr|
  PhasePoint witness;
  std::size_t base_points = 0;
  std::size_t curves = 0;
  std::string reason;
};

/// Locates tangencies {p = 0, r = 0, rdot = 0} in the region and tests
/// rddot there. Throws InvalidArgument when dr vanishes on {r = 0}.
A3Result check_A3(const SymbolFn& p, const SymbolFn& r, const Region& region, const A3Options& opt = {});

struct GeometryReport {
  CharSample sample;
  A1Result a1;
  A2Result a2;
  A3Result a3;
  bool passed() const;
  /// Machine-readable reason for the first failed check, empty on pass.
  std::string failure_reason() const;
};

GeometryReport check_geometry(const SymbolFn& p, const SymbolFn& r, const Region& region, std::size_t max_points,
                              const Thresholds& th = {}, int jobs = 1);

}  // namespace qml
