#pragma once

// Semiclassical Fourier transforms on grids, oscillatory integral operators
// T f(x) = int e^{i lambda psi(x,y)} beta(x,y) f(y) dy, operator norms and
// log-log scaling fits.

#include <complex>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qml/eikonal.hpp"
#include "qml/fft.hpp"

namespace qml {

using cplx = std::complex<double>;

struct GridAxis {
  std::string label;
  double origin = 0.0;
  double spacing = 1.0;
  int size = 1;
  bool frequency = false;
  /// Origin of the conjugate axis produced by a transform. Set by
  /// semiclassical_ft so that the inverse lands on the original grid.
  std::optional<double> conjugate_origin;
  /// Declared bound on |xi| carried along this (physical) axis. When set,
  /// semiclassical_ft checks it against the grid's Nyquist limit.
  std::optional<double> bandlimit;

  double node(int k) const { return origin + spacing * k; }
};

/// Complex samples on a uniform rectangular grid, row-major (last axis
/// fastest).
struct GridFn {
  std::vector<GridAxis> axes;
  std::vector<cplx> values;

  GridFn() = default;
  explicit GridFn(std::vector<GridAxis> ax);

  int dims() const { return static_cast<int>(axes.size()); }
  std::size_t size() const { return values.size(); }
  double cell_volume() const;
  /// (sum |f|^2 cell)^(1/2).
  double l2_norm() const;
  void validate() const;
};

enum class Direction { Forward, Inverse };

/// (2 pi h)^{-d/2} sum e^{-+ i x.xi/h} f dx with h-scaled frequency axes
/// d xi = 2 pi h / (N dx), centred at xi = 0. Exactly unitary in the
/// discrete L2 norms; forward followed by inverse is the identity.
GridFn semiclassical_ft(const GridFn& f, double h, Direction dir);

/// A linear map between discrete L2 spaces, presented as the matrix A with
/// ||A||_2 = operator norm (cell weights already folded in).
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual std::size_t rows() const = 0;
  virtual std::size_t cols() const = 0;
  virtual void apply(const std::vector<cplx>& v, std::vector<cplx>& out) = 0;
  virtual void apply_adjoint(const std::vector<cplx>& w, std::vector<cplx>& out) = 0;
};

struct Grid1 {
  double origin = 0.0;
  double spacing = 1.0;
  int size = 1;
  double node(int k) const { return origin + spacing * k; }
  /// Midpoint grid with `size` cells covering [lo, hi].
  static Grid1 cells(double lo, double hi, int size);
};

using PhaseFn = std::function<double(double, double)>;
using AmplitudeFn = std::function<double(double, double)>;

/// Dense T_lambda: M[i][j] = e^{i lambda psi(x_i, y_j)} beta(x_i, y_j) dy.
class DenseOperator : public LinearOperator {
 public:
  DenseOperator(Eigen::MatrixXcd m, double dx, double dy);
  std::size_t rows() const override { return static_cast<std::size_t>(m_.rows()); }
  std::size_t cols() const override { return static_cast<std::size_t>(m_.cols()); }
  void apply(const std::vector<cplx>& v, std::vector<cplx>& out) override;
  void apply_adjoint(const std::vector<cplx>& w, std::vector<cplx>& out) override;
  /// The quadrature matrix M (dy folded in, dx not).
  const Eigen::MatrixXcd& matrix() const { return m_; }
  /// sqrt(dx / dy) M, whose spectral norm is the operator norm.
  Eigen::MatrixXcd normalized() const { return std::sqrt(dx_ / dy_) * m_; }

 private:
  Eigen::MatrixXcd m_;
  double dx_, dy_;
};

struct PhaseGradient {
  std::function<double(double, double)> dx;
  std::function<double(double, double)> dy;
};

/// Builds the dense quadrature matrix. When `grad` is given, checks that
/// lambda |d psi| leaves >= 6 grid points per period wherever beta != 0 and
/// throws ResolutionError otherwise.
DenseOperator build_osc_operator(const PhaseFn& psi, const AmplitudeFn& beta, double lambda, const Grid1& x,
                                 const Grid1& y, const std::optional<PhaseGradient>& grad = std::nullopt);

/// Phase lambda [K(x + sigma y) + R(x) + C(y)] with product amplitude
/// bx(x) by(y) on grids of equal spacing. Applied through FFT-based
/// Hankel (sigma = +1) or Toeplitz (sigma = -1) products.
struct CorrelationPhase {
  std::function<double(double)> K;
  int sigma = -1;
  std::function<double(double)> R;  // empty: zero
  std::function<double(double)> C;  // empty: zero
};

class CorrelationOperator : public LinearOperator {
 public:
  CorrelationOperator(const CorrelationPhase& phase, const std::function<double(double)>& bx,
                      const std::function<double(double)>& by, double lambda, const Grid1& x, const Grid1& y);
  ~CorrelationOperator() override;
  std::size_t rows() const override { return static_cast<std::size_t>(x_.size); }
  std::size_t cols() const override { return static_cast<std::size_t>(y_.size); }
  void apply(const std::vector<cplx>& v, std::vector<cplx>& out) override;
  void apply_adjoint(const std::vector<cplx>& w, std::vector<cplx>& out) override;
  std::size_t fft_size() const { return L_; }
  /// Largest phase increment between neighbouring nodes (radians), bounded
  /// from the increments of lambda K, lambda R and lambda C separately.
  double max_phase_step() const { return max_step_; }
  /// Dense copy of the normalized matrix (small sizes only).
  Eigen::MatrixXcd dense() const;

 private:
  void convolve(const std::vector<cplx>& kernel_hat, const std::vector<cplx>& in, int n_in, bool reverse,
                int n_out, std::vector<cplx>& out);

  Grid1 x_, y_;
  int sigma_;
  std::size_t L_;
  std::vector<cplx> kernel_;      // k[q], q = 0 .. Nx + Ny - 2
  std::vector<cplx> a_, b_;       // row / column factors with weights
  std::vector<cplx> khat_, kadj_hat_;
  std::unique_ptr<FftPlan> fwd_, inv_;
  double max_step_ = 0.0;
};

/// Throws ResolutionError unless max_phase_step() <= 2 pi / points_per_period.
void require_resolution(const CorrelationOperator& op, double points_per_period = 6.0);

struct NormOptions {
  double tol = 1e-10;  // relative change of sigma^2 between iterations
  int max_iterations = 20000;
};

struct NormResult {
  double norm = 0.0;
  int iterations = 0;
};

/// Largest singular value by power iteration on A* A from a fixed start
/// vector. Throws ConvergenceError when max_iterations is exhausted.
NormResult operator_norm(LinearOperator& op, const NormOptions& opt = {});
double operator_norm(const Eigen::MatrixXcd& m, double tol = 1e-10);

struct ScalingSample {
  double parameter = 0.0;
  double value = 0.0;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

struct ScalingFit {
  std::vector<ScalingSample> samples;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double target = 0.0;
  double margin = 0.0;
  bool pass = false;
};

/// Least squares of log(value) on log(parameter). Needs >= 4 samples with
/// positive parameter and value.
ScalingFit scaling_fit(std::vector<ScalingSample> samples, double target, double margin);

/// CSV with columns lambda_or_h, norm, rows, cols.
void write_sweep_csv(std::ostream& out, const std::vector<ScalingSample>& samples);

// ---- Benchmark phases and sweeps ----

enum class BenchmarkPhase { Bilinear, Cubic };  // -x y, (x - y)^3 / 3

struct LambdaSweepOptions {
  double support = 0.75;  // beta = chi(|x|/s) chi(|y|/s)
  double points_per_period = 6.0;
  NormOptions norm{1e-9, 20000};
  int jobs = 1;
};

/// Structured operator for a benchmark phase, grids covering [-2s, 2s].
std::unique_ptr<CorrelationOperator> benchmark_operator(BenchmarkPhase phase, double lambda, double support,
                                                        double points_per_period = 6.0);
/// Dense version on n x n midpoint grids over [-2s, 2s] (oracle).
DenseOperator benchmark_dense(BenchmarkPhase phase, double lambda, double support, int n);

std::vector<ScalingSample> lambda_sweep(BenchmarkPhase phase, const std::vector<double>& lambdas,
                                        const LambdaSweepOptions& opt = {});

/// The phase phi(t, nu) = phi(t, r = 0; nu) of the n = 2 eikonal problem,
/// tabulated on a (t, nu) grid and split as K(t + nu) + C(nu) + const.
class ZPhase {
 public:
  /// Solves the eikonal equation for `a` at r = 0 on t in [-reach, reach]
  /// and nu in [-reach/2, reach/2] with spacing `step`, and verifies the
  /// correlation split on every node (tolerance 1e-8), else throws.
  ZPhase(const ReducedSymbol& a, double reach, double step, int jobs = 1);

  double phi(double t, double nu) const;  // 2-D interpolation of the table
  double K(double z) const;
  double C(double nu) const;
  double split_error() const { return split_error_; }
  double hj_residual() const { return hj_residual_; }
  const PhaseTable& table() const { return table_; }

 private:
  PhaseTable table_;
  double phi00_ = 0.0;
  double split_error_ = 0.0;
  double hj_residual_ = 0.0;
  std::vector<double> k_, c_;  // samples of K on t levels, C on nu params
  double t0_, dt_, nu0_, dnu_;
};

struct ZOptions {
  double support = 0.75;  // b = chi(|t|/s) chi(|nu|/s)
  double points_per_period = 6.0;
  NormOptions norm{1e-9, 20000};
  int jobs = 1;
};

/// (2 pi h)^{-1/2} e^{i phi(t, nu)/h} b(t, nu) as a structured operator.
std::unique_ptr<CorrelationOperator> build_z_operator(const ZPhase& phase, double h, const ZOptions& opt);
/// Dense Z on n x n grids from the 2-D interpolated table (oracle).
DenseOperator build_z_dense(const ZPhase& phase, double h, double support, int n);

/// Norm of Z, scaled by the (2 pi h)^{-1/2} prefactor, for each h.
std::vector<ScalingSample> z_sweep(const ZPhase& phase, const std::vector<double>& hs, const ZOptions& opt);

}  // namespace qml
