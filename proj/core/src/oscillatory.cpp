#include "qml/oscillatory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>

#include "qml/cutoff.hpp"
#include "qml/parallel.hpp"

namespace qml {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::size_t next_pow2(std::size_t v) {
  std::size_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

double norm2(const std::vector<cplx>& v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return s;
}

// Lagrange interpolation of degree 5 on uniform samples f[k] at x0 + k dx.
double lagrange6(const std::vector<double>& f, double x0, double dx, double x) {
  const int n = static_cast<int>(f.size());
  if (n < 6) throw InvalidArgument("interpolation needs >= 6 samples");
  const double u = (x - x0) / dx;
  if (u < -1e-9 || u > n - 1 + 1e-9) throw DomainError("interpolation point outside the tabulated range");
  int i0 = static_cast<int>(std::floor(u)) - 2;
  i0 = std::clamp(i0, 0, n - 6);
  double s = 0.0;
  for (int a = 0; a < 6; ++a) {
    double w = 1.0;
    for (int b = 0; b < 6; ++b)
      if (b != a) w *= (u - (i0 + b)) / static_cast<double>(a - b);
    s += w * f[static_cast<std::size_t>(i0 + a)];
  }
  return s;
}

}  // namespace

// ---- GridFn and the semiclassical Fourier transform ----

GridFn::GridFn(std::vector<GridAxis> ax) : axes(std::move(ax)) {
  std::size_t n = 1;
  for (const auto& a : axes) n *= static_cast<std::size_t>(std::max(a.size, 0));
  values.assign(n, cplx{});
}

double GridFn::cell_volume() const {
  double v = 1.0;
  for (const auto& a : axes) v *= a.spacing;
  return v;
}

double GridFn::l2_norm() const {
  double s = 0.0;
  for (const auto& z : values) s += std::norm(z);
  return std::sqrt(s * cell_volume());
}

void GridFn::validate() const {
  if (axes.empty()) throw InvalidArgument("grid function without axes");
  std::size_t n = 1;
  for (const auto& a : axes) {
    if (!(a.spacing > 0.0)) throw InvalidArgument("grid axis '" + a.label + "' has non-positive spacing");
    if (a.size < 1) throw InvalidArgument("grid axis '" + a.label + "' is empty");
    n *= static_cast<std::size_t>(a.size);
  }
  if (n != values.size()) throw DimensionError("grid function values do not match the axis shape");
}

GridFn semiclassical_ft(const GridFn& f, double h, Direction dir) {
  if (!(h > 0.0)) throw InvalidArgument("semiclassical_ft: h must be positive");
  f.validate();
  const int d = f.dims();
  const double sgn = dir == Direction::Forward ? -1.0 : 1.0;

  std::vector<GridAxis> out_axes;
  std::vector<int> shape;
  for (const auto& a : f.axes) {
    if (a.bandlimit) {
      const double nyquist = std::numbers::pi * h / a.spacing;
      if (std::abs(*a.bandlimit) > nyquist) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "Nyquist violation on axis '%s': bandlimit %.6g exceeds pi h / spacing = %.6g",
                      a.label.c_str(), std::abs(*a.bandlimit), nyquist);
        throw ResolutionError(buf);
      }
    }
    GridAxis b;
    b.label = a.label;
    b.size = a.size;
    b.spacing = kTwoPi * h / (a.size * a.spacing);
    b.origin = a.conjugate_origin.value_or(-(a.size / 2) * b.spacing);
    b.frequency = !a.frequency;
    b.conjugate_origin = a.origin;
    out_axes.push_back(b);
    shape.push_back(a.size);
  }

  FftPlan plan(shape, dir == Direction::Forward ? -1 : 1);
  cplx* buf = plan.data();
  std::copy(f.values.begin(), f.values.end(), buf);

  // Pre-factor e^{sgn i j dx c0 / h} per axis, with c0 the output origin.
  std::vector<std::size_t> stride(static_cast<std::size_t>(d), 1);
  for (int a = d - 2; a >= 0; --a) stride[a] = stride[a + 1] * static_cast<std::size_t>(f.axes[a + 1].size);
  auto apply_axis_phase = [&](auto&& factor) {
    for (int a = 0; a < d; ++a) {
      std::vector<cplx> ph(static_cast<std::size_t>(f.axes[a].size));
      for (int k = 0; k < f.axes[a].size; ++k) ph[k] = factor(a, k);
      const std::size_t n = plan.size();
      const std::size_t len = static_cast<std::size_t>(f.axes[a].size);
      for (std::size_t idx = 0; idx < n; ++idx) buf[idx] *= ph[(idx / stride[a]) % len];
    }
  };
  apply_axis_phase([&](int a, int j) {
    return std::polar(1.0, sgn * j * f.axes[a].spacing * out_axes[a].origin / h);
  });
  plan.execute();
  double scale = std::pow(kTwoPi * h, -0.5 * d) * f.cell_volume();
  double phase0 = 0.0;
  for (int a = 0; a < d; ++a) phase0 += f.axes[a].origin * out_axes[a].origin;
  const cplx global = std::polar(scale, sgn * phase0 / h);
  apply_axis_phase([&](int a, int k) {
    return std::polar(1.0, sgn * f.axes[a].origin * k * out_axes[a].spacing / h);
  });

  GridFn out(out_axes);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = global * buf[i];
  return out;
}

// ---- Operators ----

Grid1 Grid1::cells(double lo, double hi, int size) {
  if (size < 1 || !(hi > lo)) throw InvalidArgument("grid: need hi > lo and size >= 1");
  Grid1 g;
  g.spacing = (hi - lo) / size;
  g.origin = lo + 0.5 * g.spacing;
  g.size = size;
  return g;
}

DenseOperator::DenseOperator(Eigen::MatrixXcd m, double dx, double dy) : m_(std::move(m)), dx_(dx), dy_(dy) {
  if (!(dx > 0.0) || !(dy > 0.0)) throw InvalidArgument("dense operator: cell sizes must be positive");
}

void DenseOperator::apply(const std::vector<cplx>& v, std::vector<cplx>& out) {
  if (v.size() != cols()) throw DimensionError("dense operator: input length");
  const Eigen::Map<const Eigen::VectorXcd> vin(v.data(), static_cast<Eigen::Index>(v.size()));
  const Eigen::VectorXcd r = std::sqrt(dx_ / dy_) * (m_ * vin);
  out.assign(r.data(), r.data() + r.size());
}

void DenseOperator::apply_adjoint(const std::vector<cplx>& w, std::vector<cplx>& out) {
  if (w.size() != rows()) throw DimensionError("dense operator: input length");
  const Eigen::Map<const Eigen::VectorXcd> win(w.data(), static_cast<Eigen::Index>(w.size()));
  const Eigen::VectorXcd r = std::sqrt(dx_ / dy_) * (m_.adjoint() * win);
  out.assign(r.data(), r.data() + r.size());
}

DenseOperator build_osc_operator(const PhaseFn& psi, const AmplitudeFn& beta, double lambda, const Grid1& x,
                                 const Grid1& y, const std::optional<PhaseGradient>& grad) {
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
  Eigen::MatrixXcd m(x.size, y.size);
  const double limit = kTwoPi / 6.0;
  for (int i = 0; i < x.size; ++i) {
    const double xi = x.node(i);
    for (int j = 0; j < y.size; ++j) {
      const double yj = y.node(j);
      const double b = beta(xi, yj);
      if (b != 0.0 && grad) {
        if (lambda * std::abs(grad->dx(xi, yj)) * x.spacing > limit ||
            lambda * std::abs(grad->dy(xi, yj)) * y.spacing > limit) {
          char buf[160];
          std::snprintf(buf, sizeof buf, "grid under-resolves the phase at (%.6g, %.6g): need >= 6 points per period",
                        xi, yj);
          throw ResolutionError(buf);
        }
      }
      m(i, j) = b == 0.0 ? cplx{} : std::polar(b * y.spacing, lambda * psi(xi, yj));
    }
  }
  return DenseOperator(std::move(m), x.spacing, y.spacing);
}

CorrelationOperator::CorrelationOperator(const CorrelationPhase& phase, const std::function<double(double)>& bx,
                                         const std::function<double(double)>& by, double lambda, const Grid1& x,
                                         const Grid1& y)
    : x_(x), y_(y), sigma_(phase.sigma) {
  if (sigma_ != 1 && sigma_ != -1) throw InvalidArgument("correlation phase: sigma must be +1 or -1");
  if (!phase.K) throw InvalidArgument("correlation phase: K is required");
  if (std::abs(x.spacing - y.spacing) > 1e-12 * x.spacing)
    throw InvalidArgument("correlation operator: x and y grids must share the spacing");
  const int nx = x.size, ny = y.size;
  const std::size_t nk = static_cast<std::size_t>(nx + ny - 1);
  L_ = next_pow2(nk);

  kernel_.resize(nk);
  std::vector<double> kv(nk);
  for (std::size_t q = 0; q < nk; ++q) {
    const double z = sigma_ > 0 ? x.origin + y.origin + static_cast<double>(q) * x.spacing
                                : x.origin - y.origin + (static_cast<double>(q) - (ny - 1)) * x.spacing;
    kv[q] = lambda * phase.K(z);
    kernel_[q] = std::polar(1.0, kv[q]);
  }
  double dk = 0.0;
  for (std::size_t q = 1; q < nk; ++q) dk = std::max(dk, std::abs(kv[q] - kv[q - 1]));

  const double wx = std::sqrt(x.spacing), wy = std::sqrt(y.spacing);
  a_.resize(static_cast<std::size_t>(nx));
  b_.resize(static_cast<std::size_t>(ny));
  double dr = 0.0, dc = 0.0, prev = 0.0;
  for (int i = 0; i < nx; ++i) {
    const double r = phase.R ? lambda * phase.R(x.node(i)) : 0.0;
    if (i > 0) dr = std::max(dr, std::abs(r - prev));
    prev = r;
    a_[i] = std::polar(bx(x.node(i)) * wx, r);
  }
  for (int j = 0; j < ny; ++j) {
    const double c = phase.C ? lambda * phase.C(y.node(j)) : 0.0;
    if (j > 0) dc = std::max(dc, std::abs(c - prev));
    prev = c;
    b_[j] = std::polar(by(y.node(j)) * wy, c);
  }
  max_step_ = dk + std::max(dr, dc);

  fwd_ = std::make_unique<FftPlan>(std::vector<int>{static_cast<int>(L_)}, -1);
  inv_ = std::make_unique<FftPlan>(std::vector<int>{static_cast<int>(L_)}, 1);
  auto transform = [&](const std::vector<cplx>& k) {
    cplx* buf = fwd_->data();
    std::fill(buf, buf + L_, cplx{});
    std::copy(k.begin(), k.end(), buf);
    fwd_->execute();
    return std::vector<cplx>(buf, buf + L_);
  };
  khat_ = transform(kernel_);
  std::vector<cplx> kadj(nk);
  for (std::size_t q = 0; q < nk; ++q) kadj[q] = sigma_ > 0 ? std::conj(kernel_[q]) : std::conj(kernel_[nk - 1 - q]);
  kadj_hat_ = transform(kadj);
}

CorrelationOperator::~CorrelationOperator() = default;

void CorrelationOperator::convolve(const std::vector<cplx>& kernel_hat, const std::vector<cplx>& in, int n_in,
                                   bool reverse, int n_out, std::vector<cplx>& out) {
  cplx* buf = fwd_->data();
  std::fill(buf, buf + L_, cplx{});
  for (int j = 0; j < n_in; ++j) buf[reverse ? n_in - 1 - j : j] = in[static_cast<std::size_t>(j)];
  fwd_->execute();
  cplx* ib = inv_->data();
  for (std::size_t k = 0; k < L_; ++k) ib[k] = buf[k] * kernel_hat[k];
  inv_->execute();
  const double s = 1.0 / static_cast<double>(L_);
  out.resize(static_cast<std::size_t>(n_out));
  for (int i = 0; i < n_out; ++i) out[static_cast<std::size_t>(i)] = ib[i + n_in - 1] * s;
}

void CorrelationOperator::apply(const std::vector<cplx>& v, std::vector<cplx>& out) {
  if (v.size() != cols()) throw DimensionError("correlation operator: input length");
  std::vector<cplx> u(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) u[j] = b_[j] * v[j];
  convolve(khat_, u, y_.size, sigma_ > 0, x_.size, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= a_[i];
}

void CorrelationOperator::apply_adjoint(const std::vector<cplx>& w, std::vector<cplx>& out) {
  if (w.size() != rows()) throw DimensionError("correlation operator: input length");
  std::vector<cplx> u(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) u[i] = std::conj(a_[i]) * w[i];
  convolve(kadj_hat_, u, x_.size, sigma_ > 0, y_.size, out);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] *= std::conj(b_[j]);
}

Eigen::MatrixXcd CorrelationOperator::dense() const {
  const int nx = x_.size, ny = y_.size;
  Eigen::MatrixXcd m(nx, ny);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const int q = sigma_ > 0 ? i + j : i - j + ny - 1;
      m(i, j) = a_[i] * kernel_[static_cast<std::size_t>(q)] * b_[j];
    }
  return m;
}

void require_resolution(const CorrelationOperator& op, double points_per_period) {
  const double limit = kTwoPi / points_per_period;
  if (op.max_phase_step() > limit) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "grid under-resolves the phase: step %.4g rad exceeds 2 pi / %.3g", op.max_phase_step(),
                  points_per_period);
    throw ResolutionError(buf);
  }
}

NormResult operator_norm(LinearOperator& op, const NormOptions& opt) {
  const std::size_t n = op.cols();
  if (n == 0 || op.rows() == 0) return {};
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<cplx> v(n), w, z;
  for (auto& c : v) c = cplx(u(rng), u(rng));
  double nv = std::sqrt(norm2(v));
  for (auto& c : v) c /= nv;

  double prev = -1.0;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    op.apply(v, w);
    const double s2 = norm2(w);
    for (const auto& c : w)
      if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) throw DomainError("operator_norm: non-finite entries");
    if (s2 == 0.0) return {0.0, it};
    if (prev >= 0.0 && std::abs(s2 - prev) <= opt.tol * s2) return {std::sqrt(s2), it};
    prev = s2;
    op.apply_adjoint(w, z);
    nv = std::sqrt(norm2(z));
    if (nv == 0.0) return {0.0, it};
    for (std::size_t k = 0; k < n; ++k) v[k] = z[k] / nv;
  }
  throw ConvergenceError("operator_norm: power iteration did not converge in " + std::to_string(opt.max_iterations) +
                         " iterations");
}

double operator_norm(const Eigen::MatrixXcd& m, double tol) {
  DenseOperator op(m, 1.0, 1.0);
  NormOptions o;
  o.tol = tol;
  return operator_norm(op, o).norm;
}

ScalingFit scaling_fit(std::vector<ScalingSample> samples, double target, double margin) {
  if (samples.size() < 4) throw InvalidArgument("scaling_fit: need >= 4 samples");
  for (const auto& s : samples)
    if (!(s.parameter > 0.0) || !(s.value > 0.0)) throw InvalidArgument("scaling_fit: samples must be positive");
  const double n = static_cast<double>(samples.size());
  double mx = 0, my = 0;
  for (const auto& s : samples) {
    mx += std::log(s.parameter);
    my += std::log(s.value);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& s : samples) {
    const double dx = std::log(s.parameter) - mx, dy = std::log(s.value) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw InvalidArgument("scaling_fit: parameters must not all coincide");
  ScalingFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ssres = syy - fit.slope * sxy;
  fit.r2 = syy == 0.0 ? 1.0 : 1.0 - std::max(ssres, 0.0) / syy;
  fit.target = target;
  fit.margin = margin;
  fit.pass = std::abs(fit.slope - target) <= margin;
  fit.samples = std::move(samples);
  return fit;
}

void write_sweep_csv(std::ostream& out, const std::vector<ScalingSample>& samples) {
  out << "lambda_or_h,norm,rows,cols\n";
  char buf[96];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu,%zu\n", s.parameter, s.value, s.rows, s.cols);
    out << buf;
  }
}

// ---- Benchmarks ----

namespace {

CorrelationPhase benchmark_phase(BenchmarkPhase phase) {
  CorrelationPhase p;
  if (phase == BenchmarkPhase::Bilinear) {
    // -x y = -(x + y)^2 / 2 + x^2 / 2 + y^2 / 2
    p.K = [](double z) { return -0.5 * z * z; };
    p.sigma = 1;
    p.R = [](double x) { return 0.5 * x * x; };
    p.C = [](double y) { return 0.5 * y * y; };
  } else {
    p.K = [](double z) { return z * z * z / 3.0; };
    p.sigma = -1;
  }
  return p;
}

// Builds on [-2s, 2s] with a starting cell count, refining until resolved.
template <class Make>
std::unique_ptr<CorrelationOperator> resolved(double support, int n0, double ppp, Make&& make) {
  int n = std::max(n0, 256);
  for (int attempt = 0; attempt < 40; ++attempt) {
    const Grid1 g = Grid1::cells(-2 * support, 2 * support, n);
    auto op = make(g);
    if (op->max_phase_step() <= kTwoPi / ppp) return op;
    n = static_cast<int>(std::ceil(n * 1.15));
  }
  throw ResolutionError("could not resolve the phase within 40 refinements");
}

}  // namespace

std::unique_ptr<CorrelationOperator> benchmark_operator(BenchmarkPhase phase, double lambda, double support,
                                                        double points_per_period) {
  if (!(support > 0.0)) throw InvalidArgument("support must be positive");
  const double s = support;
  const double slope_bound = phase == BenchmarkPhase::Bilinear ? 6.0 * s : 16.0 * s * s;
  const int n0 = static_cast<int>(std::ceil(4.0 * s * points_per_period * lambda * slope_bound / kTwoPi));
  const CorrelationPhase ph = benchmark_phase(phase);
  auto bump = [s](double v) { return chi(v / s); };
  return resolved(s, n0, points_per_period,
                  [&](const Grid1& g) { return std::make_unique<CorrelationOperator>(ph, bump, bump, lambda, g, g); });
}

DenseOperator benchmark_dense(BenchmarkPhase phase, double lambda, double support, int n) {
  const Grid1 g = Grid1::cells(-2 * support, 2 * support, n);
  const double s = support;
  PhaseFn psi;
  PhaseGradient grad;
  if (phase == BenchmarkPhase::Bilinear) {
    psi = [](double x, double y) { return -x * y; };
    grad.dx = [](double, double y) { return -y; };
    grad.dy = [](double x, double) { return -x; };
  } else {
    psi = [](double x, double y) { return std::pow(x - y, 3) / 3.0; };
    grad.dx = [](double x, double y) { return (x - y) * (x - y); };
    grad.dy = [](double x, double y) { return -(x - y) * (x - y); };
  }
  return build_osc_operator(psi, [s](double x, double y) { return chi(x / s) * chi(y / s); }, lambda, g, g, grad);
}

std::vector<ScalingSample> lambda_sweep(BenchmarkPhase phase, const std::vector<double>& lambdas,
                                        const LambdaSweepOptions& opt) {
  std::vector<ScalingSample> out(lambdas.size());
  parallel_for(lambdas.size(), opt.jobs, [&](std::size_t k) {
    auto op = benchmark_operator(phase, lambdas[k], opt.support, opt.points_per_period);
    require_resolution(*op, opt.points_per_period);
    const NormResult nr = operator_norm(*op, opt.norm);
    out[k] = {lambdas[k], nr.norm, op->rows(), op->cols()};
  });
  return out;
}

// ---- Z operator from the eikonal phase ----

ZPhase::ZPhase(const ReducedSymbol& a, double reach, double step, int jobs) {
  if (a.dimension() != 2) throw DimensionError("the Z operator is built for n = 2");
  if (!(reach > 0.0) || !(step > 0.0)) throw InvalidArgument("Z phase: reach and step must be positive");
  const int kt = static_cast<int>(std::ceil(reach / step));
  const int kn = static_cast<int>(std::ceil(0.5 * reach / step));
  PhaseGridSpec g;
  g.t0 = 0.0;
  g.dt = step;
  g.k_min = -kt;
  g.k_max = kt;
  g.xbar = {{0.0, 0.0}};
  g.xbar_samples = {1};
  std::vector<double> offsets;
  for (int k = -kn; k <= kn; ++k) offsets.push_back(k * step);
  PhaseOptions po;
  po.jobs = jobs;
  table_ = solve_phase(a, nu_stencil(Eigen::VectorXd::Zero(1), offsets), g, po);
  if (table_.flagged_count() > 0) throw DomainError("Z phase: caustic inside the tabulated window");

  t0_ = table_.time(0);
  dt_ = step;
  nu0_ = -kn * step;
  dnu_ = step;
  const int z0 = table_.zero_level();
  const int p0 = kn;  // nu = 0
  phi00_ = table_.value(p0, z0, 0);
  k_.resize(static_cast<std::size_t>(table_.levels()));
  for (int lv = 0; lv < table_.levels(); ++lv) k_[lv] = table_.value(p0, lv, 0) - phi00_;
  c_.resize(offsets.size());
  for (int j = 0; j < static_cast<int>(offsets.size()); ++j) c_[j] = table_.value(j, z0, 0) - phi00_ - k_[z0 + j - kn];

  // Check phi(t, nu) - phi(0, 0) = K(t + nu) + C(nu) on all nodes with
  // t + nu inside the table.
  split_error_ = 0.0;
  for (int j = 0; j < static_cast<int>(offsets.size()); ++j) {
    for (int lv = 0; lv < table_.levels(); ++lv) {
      const int q = lv + j - kn;
      if (q < 0 || q >= table_.levels()) continue;
      const double e = std::abs(table_.value(j, lv, 0) - phi00_ - k_[q] - c_[j]);
      split_error_ = std::max(split_error_, e);
    }
  }
  if (split_error_ > 1e-8)
    throw DomainError("Z phase: phi(t, nu) is not of the form K(t + nu) + C(nu); split error " +
                      std::to_string(split_error_));

  // HJ residual of the r = 0 table along t, using d_r phi = nu + t from a
  // separate small table would need r-nodes; check the t-derivative
  // against a at the tabulated momentum instead on a 5 x 5 r-grid.
  PhaseGridSpec gr;
  gr.dt = step;
  gr.k_min = -4;
  gr.k_max = 4;
  gr.xbar = {{-2 * step, 2 * step}};
  gr.xbar_samples = {5};
  hj_residual_ = qml::hj_residual(solve_phase(a, nu_stencil(Eigen::VectorXd::Zero(1), {-step, 0.0, step}), gr, po), a)
                     .max_residual;
}

double ZPhase::K(double z) const { return lagrange6(k_, t0_, dt_, z); }
double ZPhase::C(double nu) const { return lagrange6(c_, nu0_, dnu_, nu); }

double ZPhase::phi(double t, double nu) const {
  // Tensor Lagrange interpolation in (t, nu).
  const int nl = table_.levels(), np = static_cast<int>(table_.params.size());
  std::vector<double> col(static_cast<std::size_t>(np));
  for (int j = 0; j < np; ++j) {
    std::vector<double> f(static_cast<std::size_t>(nl));
    for (int lv = 0; lv < nl; ++lv) f[lv] = table_.value(j, lv, 0);
    col[j] = lagrange6(f, t0_, dt_, t);
  }
  return lagrange6(col, nu0_, dnu_, nu);
}

std::unique_ptr<CorrelationOperator> build_z_operator(const ZPhase& phase, double h, const ZOptions& opt) {
  if (!(h > 0.0)) throw InvalidArgument("h must be positive");
  const double s = opt.support;
  // Bound on |K'| + |C'| over the window from the tabulated samples.
  const int m = 400;
  const double dz = 8 * s / m;
  double slope = 0.0, cs = 0.0;
  for (int k = 0; k < m; ++k) slope = std::max(slope, std::abs(phase.K(-4 * s + (k + 1) * dz) - phase.K(-4 * s + k * dz)) / dz);
  for (int k = 0; k < m / 2; ++k) cs = std::max(cs, std::abs(phase.C(-2 * s + (k + 1) * dz) - phase.C(-2 * s + k * dz)) / dz);
  const double lambda = 1.0 / h;
  const int n0 = static_cast<int>(std::ceil(4.0 * s * opt.points_per_period * lambda * (slope + cs) / kTwoPi));
  CorrelationPhase ph;
  ph.K = [&phase](double z) { return phase.K(z); };
  ph.sigma = 1;
  ph.C = [&phase](double v) { return phase.C(v); };
  auto bump = [s](double v) { return chi(v / s); };
  return resolved(s, n0, opt.points_per_period,
                  [&](const Grid1& g) { return std::make_unique<CorrelationOperator>(ph, bump, bump, lambda, g, g); });
}

DenseOperator build_z_dense(const ZPhase& phase, double h, double support, int n) {
  const Grid1 g = Grid1::cells(-2 * support, 2 * support, n);
  const double s = support;
  return build_osc_operator([&phase](double t, double nu) { return phase.phi(t, nu); },
                            [s](double t, double nu) { return chi(t / s) * chi(nu / s); }, 1.0 / h, g, g);
}

std::vector<ScalingSample> z_sweep(const ZPhase& phase, const std::vector<double>& hs, const ZOptions& opt) {
  std::vector<ScalingSample> out(hs.size());
  parallel_for(hs.size(), opt.jobs, [&](std::size_t k) {
    const double h = hs[k];
    auto op = build_z_operator(phase, h, opt);
    require_resolution(*op, opt.points_per_period);
    const NormResult nr = operator_norm(*op, opt.norm);
    out[k] = {h, std::pow(kTwoPi * h, -0.5) * nr.norm, op->rows(), op->cols()};
  });
  return out;
}

}  // namespace qml
