#include "qml/quasimode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

#include "qml/parallel.hpp"

namespace qml {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int pow2_at_least(double v) {
  if (!(v < 1e9)) throw ResourceError("grid size overflow");
  int p = 1;
  while (p < v) p <<= 1;
  return p;
}

GridAxis make_axis(const std::string& label, double origin, double spacing, int size) {
  GridAxis a;
  a.label = label;
  a.origin = origin;
  a.spacing = spacing;
  a.size = size;
  return a;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

}  // namespace

double critical_exponent(int n) {
  if (n < 2) throw InvalidArgument("exponents need n >= 2");
  return 2.0 * n / (n - 1.0);
}

Exponents exponents(int n, double p) {
  if (n < 2) throw InvalidArgument("exponents need n >= 2");
  if (!(p >= 2.0)) throw InvalidArgument("exponents need p >= 2");
  const double m = n - 1.0;
  const double pc = critical_exponent(n);
  const double inv = std::isinf(p) ? 0.0 : 1.0 / p;
  Exponents e;
  e.delta = p >= pc ? m / 2.0 - m * inv : m / 4.0 - (n - 2.0) * inv / 2.0;
  if (p <= pc) e.delta_tilde = m / 3.0 - (2.0 * n - 3.0) * inv / 3.0;
  return e;
}

double concentration_exponent(int n, double p) {
  if (n < 2) throw InvalidArgument("exponents need n >= 2");
  if (!(p >= 1.0)) throw InvalidArgument("p must be >= 1");
  const double inv = std::isinf(p) ? 0.0 : 1.0 / p;
  return (n - 1.0) / 3.0 - (2.0 * n - 3.0) * inv / 3.0;
}

// ---- Bundle ----

QuasimodeBundle build_model_quasimode(int n, double h, const QuasimodeOptions& opt) {
  if (n < 2) throw DimensionError("quasimode needs n >= 2");
  if (!(h > 0.0 && h < 1.0)) throw InvalidArgument("quasimode needs 0 < h < 1");
  if (!(opt.epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (!(opt.points_per_period > 0.0)) throw InvalidArgument("points_per_period must be positive");
  if (opt.region_t_points < 2 || opt.region_y_points < 2) throw InvalidArgument("region needs >= 2 points per axis");
  const int m = n - 2;
  const double h13 = std::cbrt(h), h23 = h13 * h13;
  const double ppp = opt.points_per_period;

  // Largest |d psi| along each axis over the support of the cutoffs.
  const double m_nu = 4.0 + 2.0 * h23 + (m > 0 ? 4.0 * h23 : 0.0);
  const double m_tau = 2.0;
  const double m_eta = 8.0 * h13;

  const int n_nu = pow2_at_least(4.0 / (kTwoPi * h / (ppp * m_nu)));
  const int n_tau = pow2_at_least(std::max<double>(opt.min_tau_points, 4.0 * h23 / (kTwoPi * h / (ppp * m_tau))));
  const int n_eta = m > 0 ? pow2_at_least(std::max<double>(opt.min_eta_points, 4.0 * h13 / (kTwoPi * h / (ppp * m_eta)))) : 1;

  double total = static_cast<double>(n_tau) * n_nu;
  for (int k = 0; k < m; ++k) total *= n_eta;
  if (total > static_cast<double>(opt.memory_budget))
    throw ResourceError(fmt("quasimode grid needs %.0f Fourier nodes at h = %.6g, over the budget of %.0f", total, h,
                            static_cast<double>(opt.memory_budget)));

  std::vector<GridAxis> axes;
  axes.push_back(make_axis("tau", -2.0 * h23, 4.0 * h23 / n_tau, n_tau));
  axes.back().bandlimit = m_tau;
  for (int k = 0; k < m; ++k) {
    axes.push_back(make_axis("eta" + std::to_string(k + 2), -2.0 * h13, 4.0 * h13 / n_eta, n_eta));
    axes.back().bandlimit = m_eta;
  }
  axes.push_back(make_axis("nu", -2.0, 4.0 / n_nu, n_nu));
  axes.back().bandlimit = m_nu;

  QuasimodeBundle b;
  b.n = n;
  b.h = h;
  b.epsilon = opt.epsilon;
  b.f = GridFn(axes);
  const double amp = std::pow(h, -m / 6.0 - 1.0 / 3.0);

  std::vector<double> chi_nu(static_cast<std::size_t>(n_nu)), nu(static_cast<std::size_t>(n_nu));
  for (int j = 0; j < n_nu; ++j) {
    nu[j] = axes.back().node(j);
    chi_nu[j] = chi(nu[j]);
  }
  const std::size_t rows = b.f.size() / static_cast<std::size_t>(n_nu);
  for (std::size_t row = 0; row < rows; ++row) {
    // Decode (tau, eta') from the row index; eta' axes are 1..m.
    std::size_t rest = row;
    double eta2 = 0.0, weight = 1.0;
    for (int k = m; k >= 1; --k) {
      const auto sz = static_cast<std::size_t>(axes[k].size);
      const double e = axes[k].node(static_cast<int>(rest % sz));
      rest /= sz;
      eta2 += e * e;
    }
    const double tau = axes[0].node(static_cast<int>(rest));
    weight = amp * chi(tau / h23) * (m > 0 ? chi(std::sqrt(eta2) / h13) : 1.0);
    cplx* out = b.f.values.data() + row * static_cast<std::size_t>(n_nu);
    if (weight == 0.0) continue;
    for (int j = 0; j < n_nu; ++j) {
      if (chi_nu[j] == 0.0) continue;
      const double v = nu[j];
      const double psi = v * v * v / 3.0 - v * (tau - eta2);
      out[j] = std::polar(weight * chi_nu[j], psi / h);
    }
  }
  b.f_l2 = b.f.l2_norm();

  // Physical side: chi(|x|) F_h^{-1} f on the conjugate grid.
  b.u = semiclassical_ft(b.f, h, Direction::Inverse);
  b.u.axes[0].label = "t";
  for (int k = 1; k <= m; ++k) b.u.axes[k].label = "y" + std::to_string(k + 1);
  b.u.axes.back().label = "r";
  {
    const int d = b.u.dims();
    std::vector<std::size_t> stride(static_cast<std::size_t>(d), 1);
    for (int a = d - 2; a >= 0; --a) stride[a] = stride[a + 1] * static_cast<std::size_t>(b.u.axes[a + 1].size);
    for (std::size_t i = 0; i < b.u.size(); ++i) {
      double x2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const double x = b.u.axes[a].node(static_cast<int>((i / stride[a]) % static_cast<std::size_t>(b.u.axes[a].size)));
        x2 += x * x;
      }
      b.u.values[i] *= chi(std::sqrt(x2));
    }
  }
  b.u_l2 = b.u.l2_norm();

  // R_H u by direct quadrature at region targets (r = 0 kills the nu phase).
  b.region = {0.0, opt.epsilon * h13, opt.epsilon * h23};
  std::vector<GridAxis> raxes;
  raxes.push_back(make_axis("t", 0.0, b.region.t_hi / (opt.region_t_points - 1), opt.region_t_points));
  for (int k = 0; k < m; ++k)
    raxes.push_back(make_axis("y" + std::to_string(k + 2), -b.region.y_radius,
                              2.0 * b.region.y_radius / (opt.region_y_points - 1), opt.region_y_points));
  raxes.push_back(make_axis("r", 0.0, 1.0, 1));
  b.restricted = GridFn(raxes);

  const double dnu = axes.back().spacing;
  std::vector<cplx> A(rows);
  for (std::size_t row = 0; row < rows; ++row) {
    const cplx* in = b.f.values.data() + row * static_cast<std::size_t>(n_nu);
    cplx s = 0.0;
    for (int j = 0; j < n_nu; ++j) s += in[j];
    A[row] = s * dnu;
  }
  double fourier_cell = axes[0].spacing;
  for (int k = 1; k <= m; ++k) fourier_cell *= axes[k].spacing;
  const double pre = std::pow(kTwoPi * h, -0.5 * n) * fourier_cell;
  const std::size_t targets = b.restricted.size();
  std::vector<std::size_t> rstride(static_cast<std::size_t>(m + 1), 1);
  for (int a = m - 1; a >= 0; --a) rstride[a] = rstride[a + 1] * static_cast<std::size_t>(raxes[a + 1].size);
  for (std::size_t q = 0; q < targets; ++q) {
    std::vector<double> y(static_cast<std::size_t>(m + 1));
    double y2 = 0.0;
    for (int a = 0; a <= m; ++a) {
      y[a] = raxes[a].node(static_cast<int>((q / rstride[a]) % static_cast<std::size_t>(raxes[a].size)));
      y2 += y[a] * y[a];
    }
    cplx s = 0.0;
    for (std::size_t row = 0; row < rows; ++row) {
      if (A[row] == cplx{}) continue;
      std::size_t rest = row;
      double ph = 0.0;
      for (int k = m; k >= 1; --k) {
        const auto sz = static_cast<std::size_t>(axes[k].size);
        ph += y[k] * axes[k].node(static_cast<int>(rest % sz));
        rest /= sz;
      }
      ph += y[0] * axes[0].node(static_cast<int>(rest));
      s += std::polar(1.0, ph / h) * A[row];
    }
    b.restricted.values[q] = chi(std::sqrt(y2)) * pre * s;
  }

  b.residual = fourier_residual(b.f, h, opt.residual);
  return b;
}

double fourier_residual(const GridFn& f, double h, ResidualMethod method) {
  f.validate();
  if (f.dims() < 2) throw DimensionError("fourier_residual needs axes (tau, eta'.., nu)");
  const GridAxis& nu_ax = f.axes.back();
  const int nn = nu_ax.size;
  const double dnu = nu_ax.spacing;
  if (nn < 5) throw ResolutionError("fourier_residual needs >= 5 nu nodes");
  const std::size_t rows = f.size() / static_cast<std::size_t>(nn);
  const int m = f.dims() - 2;

  std::unique_ptr<FftPlan> fwd, inv;
  std::vector<double> k;
  if (method == ResidualMethod::Spectral) {
    fwd = std::make_unique<FftPlan>(std::vector<int>{nn}, -1);
    inv = std::make_unique<FftPlan>(std::vector<int>{nn}, 1);
    k.resize(static_cast<std::size_t>(nn));
    for (int j = 0; j < nn; ++j) {
      const int jj = j < nn / 2 ? j : j - nn;
      k[j] = (2 * j == nn) ? 0.0 : kTwoPi * jj / (nn * dnu);
    }
  }

  double sum = 0.0;
  std::vector<cplx> hd(static_cast<std::size_t>(nn));
  for (std::size_t row = 0; row < rows; ++row) {
    std::size_t rest = row;
    double eta2 = 0.0;
    for (int a = m; a >= 1; --a) {
      const auto sz = static_cast<std::size_t>(f.axes[a].size);
      const double e = f.axes[a].node(static_cast<int>(rest % sz));
      rest /= sz;
      eta2 += e * e;
    }
    const double tau = f.axes[0].node(static_cast<int>(rest));
    const cplx* in = f.values.data() + row * static_cast<std::size_t>(nn);
    int j0 = 0, j1 = nn;
    if (method == ResidualMethod::Spectral) {
      std::copy(in, in + nn, fwd->data());
      fwd->execute();
      for (int j = 0; j < nn; ++j) inv->data()[j] = fwd->data()[j] * (h * k[j] / nn);
      inv->execute();
      std::copy(inv->data(), inv->data() + nn, hd.begin());
    } else {
      j0 = 2;
      j1 = nn - 2;
      for (int j = j0; j < j1; ++j) {
        const cplx d = (in[j - 2] - 8.0 * in[j - 1] + 8.0 * in[j + 1] - in[j + 2]) / (12.0 * dnu);
        hd[j] = cplx(0.0, -h) * d;
      }
    }
    for (int j = j0; j < j1; ++j) {
      const double v = nu_ax.node(j);
      const cplx r = (tau - v * v - eta2) * in[j] + hd[j];
      sum += std::norm(r);
    }
  }
  return std::sqrt(sum * f.cell_volume());
}

double fourier_residual(const QuasimodeBundle& b, ResidualMethod method) { return fourier_residual(b.f, b.h, method); }

double restrict_and_norm(const GridFn& u, const SliceRegion& region, double p) {
  u.validate();
  if (!(p >= 1.0)) throw InvalidArgument("restrict_and_norm needs p >= 1");
  const int d = u.dims();
  if (d < 2) throw DimensionError("restrict_and_norm needs axes (t, y'.., r)");
  if (!(region.t_hi >= region.t_lo) || region.y_radius < 0.0) throw InvalidArgument("malformed region");

  const GridAxis& r = u.axes.back();
  int r0 = -1;
  for (int k = 0; k < r.size; ++k)
    if (std::abs(r.node(k)) <= 1e-9 * r.spacing) r0 = k;
  if (r0 < 0) throw InvalidArgument("the slice r = 0 is not a node plane of the grid");

  // Trapezoid weights in t over the nodes inside [t_lo, t_hi].
  const GridAxis& t = u.axes[0];
  std::vector<double> wt(static_cast<std::size_t>(t.size), 0.0);
  int first = -1, last = -1;
  const double tol = 1e-9 * t.spacing;
  for (int i = 0; i < t.size; ++i) {
    const double x = t.node(i);
    if (x >= region.t_lo - tol && x <= region.t_hi + tol) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) throw InvalidArgument("region holds no grid nodes");
  for (int i = first; i <= last; ++i) wt[i] = (i == first || i == last) ? 0.5 * t.spacing : t.spacing;
  if (first == last) wt[first] = 0.0;

  std::vector<std::size_t> stride(static_cast<std::size_t>(d), 1);
  for (int a = d - 2; a >= 0; --a) stride[a] = stride[a + 1] * static_cast<std::size_t>(u.axes[a + 1].size);

  const bool inf = std::isinf(p);
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    auto idx = [&](int a) { return static_cast<int>((i / stride[a]) % static_cast<std::size_t>(u.axes[a].size)); };
    if (idx(d - 1) != r0) continue;
    const int it = idx(0);
    if (it < first || it > last) continue;
    double y2 = 0.0, w = wt[it];
    for (int a = 1; a < d - 1; ++a) {
      const double y = u.axes[a].node(idx(a));
      y2 += y * y;
      w *= u.axes[a].spacing;
    }
    if (y2 > region.y_radius * region.y_radius * (1.0 + 1e-9) + 1e-300) continue;
    ++used;
    const double a = std::abs(u.values[i]);
    if (inf)
      acc = std::max(acc, a);
    else
      acc += w * std::pow(a, p);
  }
  if (used == 0) throw InvalidArgument("region holds no grid nodes");
  return inf ? acc : std::pow(acc, 1.0 / p);
}

// ---- Experiment ----

bool QuasimodeExperiment::passed() const { return failure_reason().empty(); }

std::string QuasimodeExperiment::failure_reason() const {
  for (std::size_t k = 0; k < fits.size(); ++k)
    if (!fits[k].pass)
      return fmt("restricted L^%g norm slope %.4f misses target %.4f", ps[k], fits[k].slope, fits[k].target) +
             fmt(" +- %.3g", fits[k].margin);
  if (!residual_ok) return fmt("Fourier residual slope %.4f below %.2f", residual_fit.slope, residual_min_slope);
  if (!ceiling_ok) return fmt("restriction ceiling violated (C = %.4g, slope %.4f)", ceiling_constant, ceiling_slope);
  if (!f_bounded) return "||f||_2 left [0.1, 10]";
  if (!u_stable) return "||u||_2 varies by a factor >= 2 across the ladder";
  return {};
}

QuasimodeExperiment h_scaling_experiment(int n, const std::vector<double>& ps, const std::vector<double>& hs,
                                         const QuasimodeOptions& opt, double margin, int jobs) {
  if (hs.size() < 4) throw InvalidArgument("h ladder needs >= 4 values");
  if (ps.empty()) throw InvalidArgument("at least one p is required");
  for (double p : ps)
    if (!(p >= 2.0)) throw InvalidArgument("p must be >= 2");
  QuasimodeExperiment ex;
  ex.n = n;
  ex.epsilon = opt.epsilon;
  ex.ps = ps;
  ex.samples.resize(hs.size());
  parallel_for(hs.size(), jobs, [&](std::size_t k) {
    QuasimodeBundle b = build_model_quasimode(n, hs[k], opt);
    QuasimodeSample s;
    s.h = hs[k];
    s.f_l2 = b.f_l2;
    s.u_l2 = b.u_l2;
    s.residual = b.residual;
    s.fourier_nodes = b.f.size();
    s.l2_restricted = restrict_and_norm(b.restricted, b.region, 2.0);
    for (double p : ps) s.norms.push_back(restrict_and_norm(b.restricted, b.region, p));
    s.ceiling_ratio = s.l2_restricted * std::sqrt(s.h) / s.u_l2;
    ex.samples[k] = std::move(s);
  });

  const double pc = critical_exponent(n);
  for (std::size_t j = 0; j < ps.size(); ++j) {
    std::vector<ScalingSample> v;
    for (const auto& s : ex.samples) v.push_back({s.h, s.norms[j], s.fourier_nodes, 0});
    ex.fits.push_back(scaling_fit(v, -concentration_exponent(n, ps[j]), margin));
    ex.sharp.push_back(ps[j] <= pc + 1e-12);
  }
  std::vector<ScalingSample> res, ratio;
  for (const auto& s : ex.samples) {
    res.push_back({s.h, s.residual, s.fourier_nodes, 0});
    ratio.push_back({s.h, s.l2_restricted / s.u_l2, s.fourier_nodes, 0});
  }
  ex.residual_fit = scaling_fit(res, 1.0, 0.1);
  ex.residual_ok = ex.residual_fit.slope >= ex.residual_min_slope;

  const auto largest = std::max_element(ex.samples.begin(), ex.samples.end(),
                                        [](const auto& a, const auto& b) { return a.h < b.h; });
  ex.ceiling_constant = largest->ceiling_ratio;
  ex.ceiling_slope = scaling_fit(ratio, -0.5, 0.0).slope;
  ex.ceiling_ok = ex.ceiling_slope >= -0.5;
  for (const auto& s : ex.samples)
    if (s.ceiling_ratio > 1.05 * ex.ceiling_constant) ex.ceiling_ok = false;

  ex.f_bounded = true;
  double umin = std::numeric_limits<double>::infinity(), umax = 0.0;
  for (const auto& s : ex.samples) {
    if (s.f_l2 < 0.1 || s.f_l2 > 10.0) ex.f_bounded = false;
    umin = std::min(umin, s.u_l2);
    umax = std::max(umax, s.u_l2);
  }
  ex.u_stable = umax < 2.0 * umin;
  return ex;
}

void write_quasimode_csv(std::ostream& out, const QuasimodeExperiment& ex) {
  out << "h,p,restricted_norm,u_l2,f_l2,residual\n";
  char buf[200];
  for (const auto& s : ex.samples)
    for (std::size_t j = 0; j < ex.ps.size(); ++j) {
      char p[32];
      if (std::isinf(ex.ps[j]))
        std::snprintf(p, sizeof p, "inf");
      else
        std::snprintf(p, sizeof p, "%.17g", ex.ps[j]);
      std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g,%.17g,%.17g,%.17g\n", s.h, p, s.norms[j], s.u_l2, s.f_l2,
                    s.residual);
      out << buf;
    }
}

void write_plot_script(std::ostream& out, const std::string& csv_name, const QuasimodeExperiment& ex) {
  out << "import csv\nimport math\nimport matplotlib\nmatplotlib.use('Agg')\nimport matplotlib.pyplot as plt\n\n";
  out << "rows = list(csv.DictReader(open('" << csv_name << "')))\n";
  out << "targets = {";
  for (std::size_t j = 0; j < ex.ps.size(); ++j) {
    if (j) out << ", ";
    out << "'" << (std::isinf(ex.ps[j]) ? std::string("inf") : fmt("%.17g", ex.ps[j])) << "': "
        << fmt("%.17g", ex.fits[j].target);
  }
  out << "}\n";
  out << R"(fig, ax = plt.subplots()
for p, slope in targets.items():
    pts = [(float(r['h']), float(r['restricted_norm'])) for r in rows if r['p'] == p]
    if not pts:
        continue
    hs, ns = zip(*pts)
    ax.loglog(hs, ns, 'o-', label='p = %s' % p)
    h0, n0 = hs[0], ns[0]
    ax.loglog(hs, [n0 * (h / h0) ** slope for h in hs], '--', label='slope %.4f' % slope)
ax.set_xlabel('h')
ax.set_ylabel('restricted norm')
ax.legend()
fig.savefig('quasimode_scaling.png', dpi=150)
)";
}

}  // namespace qml
