#include "qml/eikonal.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "qml/ode.hpp"
#include "qml/parallel.hpp"

namespace qml {

namespace {

constexpr double kD1[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
constexpr double kD2[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};

struct CharEnd {
  Eigen::VectorXd xbar;
  double phi = 0.0;
};

// Characteristics of d_t phi = a(t, xbar, d_xbar phi):
//   xbar' = -d_xibar a,  pbar' = d_xbar a,  phi' = a - pbar . d_xibar a.
class Shooter {
 public:
  Shooter(const ReducedSymbol& a, double tol) : a_(a), n_(a.dimension()), m_(n_ - 1), tol_(tol) {
    w_.resize(static_cast<std::size_t>(2 * n_ - 1));
  }

  CharEnd shoot(double t0, double t1, const Eigen::VectorXd& xbar0, const Eigen::VectorXd& xibar) {
    Eigen::VectorXd y(2 * m_ + 1);
    y << xbar0, xibar, xbar0.dot(xibar);
    if (t1 != t0) {
      ode::Options o;
      o.tol = tol_;
      ode::Stats st;
      double t = t0, step = 0.0;
      auto rhs = [this](double tt, const Eigen::VectorXd& yy, Eigen::VectorXd& dy) { field(tt, yy, dy); };
      ode::advance(rhs, t, y, t1, o, st, step);
    }
    return {y.head(m_), y[2 * m_]};
  }

 private:
  void field(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    w_[0] = t;
    for (int k = 0; k < m_; ++k) {
      w_[static_cast<std::size_t>(1 + k)] = y[k];
      w_[static_cast<std::size_t>(n_ + k)] = y[m_ + k];
    }
    const double av = a_.value_gradient(w_, g_);
    double flux = av;
    for (int k = 0; k < m_; ++k) {
      const double a_xi = g_[n_ + k];
      dy[k] = -a_xi;
      dy[m_ + k] = g_[1 + k];
      flux -= y[m_ + k] * a_xi;
    }
    dy[2 * m_] = flux;
  }

  const ReducedSymbol& a_;
  int n_, m_;
  double tol_;
  std::vector<double> w_;
  Eigen::VectorXd g_;
};

void check_grid(const PhaseGridSpec& g, int m) {
  if (!(g.dt > 0.0)) throw InvalidArgument("phase grid: dt must be positive");
  if (g.k_min > 0 || g.k_max < 0) throw InvalidArgument("phase grid: levels must include t0");
  if (static_cast<int>(g.xbar.size()) != m || static_cast<int>(g.xbar_samples.size()) != m)
    throw DimensionError("phase grid: xbar axes must number n - 1");
  for (int k = 0; k < m; ++k) {
    if (g.xbar_samples[k] < 1) throw InvalidArgument("phase grid: xbar sample counts must be >= 1");
    if (!(g.xbar[k].lo <= g.xbar[k].hi)) throw InvalidArgument("phase grid: interval with lo > hi");
  }
}

double axis_step(const PhaseGridSpec& g, int k) {
  return g.xbar_samples[k] > 1 ? (g.xbar[k].hi - g.xbar[k].lo) / (g.xbar_samples[k] - 1) : 0.0;
}

}  // namespace

int PhaseTable::nodes() const {
  int c = 1;
  for (int s : grid.xbar_samples) c *= s;
  return c;
}

Eigen::VectorXd PhaseTable::node(int index) const {
  const auto m = grid.xbar.size();
  Eigen::VectorXd v(static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m; ++k) {
    const int c = grid.xbar_samples[k];
    const int i = index % c;
    index /= c;
    v[static_cast<Eigen::Index>(k)] = grid.xbar[k].lo + axis_step(grid, static_cast<int>(k)) * i;
  }
  return v;
}

std::size_t PhaseTable::flagged_count() const {
  std::size_t c = 0;
  for (auto f : caustic) c += f != 0;
  return c;
}

std::vector<Eigen::VectorXd> nu_stencil(const Eigen::VectorXd& center, const std::vector<double>& offsets) {
  std::vector<Eigen::VectorXd> out;
  for (double o : offsets) {
    Eigen::VectorXd v = center;
    v[v.size() - 1] += o;
    out.push_back(v);
  }
  return out;
}

PhaseTable solve_phase(const ReducedSymbol& a, const std::vector<Eigen::VectorXd>& params, const PhaseGridSpec& grid,
                       const PhaseOptions& opt) {
  const int n = a.dimension();
  const int m = n - 1;
  if (m < 1) throw DimensionError("solve_phase needs n >= 2");
  check_grid(grid, m);
  if (params.empty()) throw InvalidArgument("solve_phase: no parameters");
  for (const auto& p : params)
    if (p.size() != m) throw DimensionError("solve_phase: parameter length must be n - 1");

  PhaseTable tab;
  tab.n = n;
  tab.params = params;
  tab.grid = grid;
  const int levels = tab.levels(), nodes = tab.nodes();
  const std::size_t total = params.size() * static_cast<std::size_t>(levels) * static_cast<std::size_t>(nodes);
  tab.phi.assign(total, std::numeric_limits<double>::quiet_NaN());
  tab.caustic.assign(total, 0);

  const std::size_t tasks = params.size() * static_cast<std::size_t>(nodes);
  std::vector<double> min_det(tasks, std::numeric_limits<double>::infinity());
  parallel_for(tasks, opt.jobs, [&](std::size_t task) {
    const int ip = static_cast<int>(task / static_cast<std::size_t>(nodes));
    const int inode = static_cast<int>(task % static_cast<std::size_t>(nodes));
    const Eigen::VectorXd& xibar = params[static_cast<std::size_t>(ip)];
    const Eigen::VectorXd target = tab.node(inode);
    Shooter sh(a, opt.tol);
    const int z = tab.zero_level();
    tab.phi[tab.index(ip, z, inode)] = target.dot(xibar);
    double& md = min_det[task];
    md = std::min(md, 1.0);

    for (int dir : {1, -1}) {
      Eigen::VectorXd x0 = target;
      bool lost = false;
      for (int lv = z + dir; lv >= 0 && lv < levels; lv += dir) {
        const std::size_t idx = tab.index(ip, lv, inode);
        if (lost) {
          tab.caustic[idx] = 1;
          continue;
        }
        const double t1 = tab.time(lv);
        bool ok = false;
        double phi = 0.0;
        try {
          for (int it = 0; it < 20; ++it) {
            const CharEnd end = sh.shoot(grid.t0, t1, x0, xibar);
            const Eigen::VectorXd res = end.xbar - target;
            Eigen::MatrixXd jac(m, m);
            for (int k = 0; k < m; ++k) {
              Eigen::VectorXd xp = x0, xm = x0;
              xp[k] += opt.fd_step;
              xm[k] -= opt.fd_step;
              jac.col(k) = (sh.shoot(grid.t0, t1, xp, xibar).xbar - sh.shoot(grid.t0, t1, xm, xibar).xbar) /
                           (2 * opt.fd_step);
            }
            const double det = jac.determinant();
            md = std::min(md, std::abs(det));
            // det starts at 1 and changes sign only through a caustic.
            if (!(det >= opt.caustic)) break;
            if (res.lpNorm<Eigen::Infinity>() <= 1e-11 * (1.0 + target.lpNorm<Eigen::Infinity>())) {
              ok = true;
              phi = end.phi;
              break;
            }
            x0 -= jac.partialPivLu().solve(res);
            if (!x0.allFinite()) break;
          }
        } catch (const Error&) {
          ok = false;
        }
        if (ok) {
          tab.phi[idx] = phi;
        } else {
          // Beyond a caustic the inversion has no smooth continuation.
          tab.caustic[idx] = 1;
          lost = true;
        }
      }
    }
  });
  tab.min_jacobian = std::numeric_limits<double>::infinity();
  for (double d : min_det) tab.min_jacobian = std::min(tab.min_jacobian, d);
  return tab;
}

HJResidual hj_residual(const PhaseTable& table, const ReducedSymbol& a) {
  const int n = table.n, m = n - 1;
  const auto& g = table.grid;
  for (int k = 0; k < m; ++k)
    if (g.xbar_samples[k] < 5) throw InvalidArgument("hj_residual: every xbar axis needs >= 5 nodes");
  if (table.levels() < 5) throw InvalidArgument("hj_residual: need >= 5 time levels");

  std::vector<int> stride(static_cast<std::size_t>(m), 1);
  for (int k = 1; k < m; ++k) stride[k] = stride[k - 1] * g.xbar_samples[k - 1];

  HJResidual out;
  std::vector<double> w(static_cast<std::size_t>(2 * n - 1));
  for (std::size_t ip = 0; ip < table.params.size(); ++ip) {
    const int p = static_cast<int>(ip);
    for (int lv = 2; lv + 2 < table.levels(); ++lv) {
      for (int node = 0; node < table.nodes(); ++node) {
        bool interior = true;
        std::vector<int> coord(static_cast<std::size_t>(m));
        for (int k = 0, rest = node; k < m; ++k) {
          coord[k] = rest % g.xbar_samples[k];
          rest /= g.xbar_samples[k];
          if (coord[k] < 2 || coord[k] + 2 >= g.xbar_samples[k]) interior = false;
        }
        if (!interior) continue;
        bool clean = true;
        double dt = 0.0;
        for (int s = 0; s < 5; ++s) {
          if (table.flagged(p, lv + s - 2, node)) clean = false;
          dt += kD1[s] * table.value(p, lv + s - 2, node);
        }
        dt /= g.dt;
        Eigen::VectorXd grad(m);
        for (int k = 0; k < m; ++k) {
          double d = 0.0;
          for (int s = 0; s < 5; ++s) {
            const int nb = node + (s - 2) * stride[k];
            if (table.flagged(p, lv, nb)) clean = false;
            d += kD1[s] * table.value(p, lv, nb);
          }
          grad[k] = d / axis_step(g, k);
        }
        if (!clean) continue;
        const Eigen::VectorXd x = table.node(node);
        w[0] = table.time(lv);
        for (int k = 0; k < m; ++k) {
          w[static_cast<std::size_t>(1 + k)] = x[k];
          w[static_cast<std::size_t>(n + k)] = grad[k];
        }
        const double res = std::abs(dt - a(w));
        out.max_residual = std::max(out.max_residual, res);
        ++out.nodes_checked;
      }
    }
  }
  return out;
}

void write_phase_csv(std::ostream& out, const PhaseTable& table) {
  const int m = table.n - 1;
  out << "param";
  for (int k = 0; k < m; ++k) out << ",xibar" << k + 1;
  out << ",t";
  for (int k = 0; k < m; ++k) out << ",xbar" << k + 1;
  out << ",phi,caustic\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t ip = 0; ip < table.params.size(); ++ip) {
    for (int lv = 0; lv < table.levels(); ++lv) {
      for (int node = 0; node < table.nodes(); ++node) {
        out << ip;
        for (int k = 0; k < m; ++k) {
          out << ',';
          put(table.params[ip][k]);
        }
        out << ',';
        put(table.time(lv));
        const Eigen::VectorXd x = table.node(node);
        for (int k = 0; k < m; ++k) {
          out << ',';
          put(x[k]);
        }
        out << ',';
        put(table.value(static_cast<int>(ip), lv, node));
        out << ',' << (table.flagged(static_cast<int>(ip), lv, node) ? 1 : 0) << '\n';
      }
    }
  }
}

FoldQuantities phase_fold_quantities_closed(const ReducedSymbol& a, std::span<const double> w) {
  const int n = a.dimension(), m = n - 1;
  const Jet j = a.jet(w, 2);
  double norm = 0.0;
  for (int k = 0; k < m; ++k) norm = std::max(norm, std::abs(j.gradient[n + k]));
  if (norm > 1e-8)
    throw DomainError("fold quantities: d_xibar a = " + std::to_string(norm) +
                      " at the base point; coordinates are not adapted");
  const int nu = n + m - 1;
  FoldQuantities q;
  q.d3_tnn = j.hessian(nu, nu);
  q.d3_ttn = j.hessian(0, nu);
  for (int k = 0; k < m; ++k) q.d3_ttn += j.hessian(n + k, nu) * j.gradient[1 + k];
  return q;
}

PhaseTable fold_stencil_table(const ReducedSymbol& a, std::span<const double> w, double step,
                              const PhaseOptions& opt) {
  const int n = a.dimension(), m = n - 1;
  if (static_cast<int>(w.size()) != 2 * n - 1) throw DimensionError("fold stencil: base point has wrong length");
  if (!(step > 0.0)) throw InvalidArgument("fold stencil: step must be positive");
  PhaseGridSpec g;
  g.t0 = w[0];
  g.dt = step;
  g.k_min = -2;
  g.k_max = 2;
  for (int k = 0; k < m; ++k) {
    g.xbar.push_back({w[1 + k], w[1 + k]});
    g.xbar_samples.push_back(1);
  }
  Eigen::VectorXd center(m);
  for (int k = 0; k < m; ++k) center[k] = w[n + k];
  return solve_phase(a, nu_stencil(center, {-2 * step, -step, 0.0, step, 2 * step}), g, opt);
}

FoldQuantities phase_fold_quantities_numeric(const PhaseTable& table) {
  if (table.params.size() != 5 || table.levels() != 5 || table.nodes() != 1)
    throw InvalidArgument("fold quantities: table is not a 5x5 (t, nu) stencil");
  const double dnu = table.params[1][table.params[1].size() - 1] - table.params[0][table.params[0].size() - 1];
  if (!(dnu > 0.0)) throw InvalidArgument("fold quantities: nu stencil is not increasing");
  const double dt = table.grid.dt;
  FoldQuantities q;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      if (table.flagged(j, i, 0)) throw InvalidArgument("fold quantities: caustic inside the stencil");
      const double v = table.value(j, i, 0);
      q.d3_tnn += kD1[i] * kD2[j] * v;
      q.d3_ttn += kD2[i] * kD1[j] * v;
    }
  }
  q.d3_tnn /= dt * dnu * dnu;
  q.d3_ttn /= dt * dt * dnu;
  return q;
}

const char* to_string(FoldClass c) {
  switch (c) {
    case FoldClass::Nondegenerate:
      return "Nondegenerate";
    case FoldClass::Fold:
      return "Fold";
    case FoldClass::Degenerate:
      return "Degenerate";
  }
  return "?";
}

MapClassification classify_fold_map(const Eigen::MatrixXd& dF, const Eigen::VectorXd& grad_det, double threshold) {
  const auto d = dF.rows();
  if (d < 1 || dF.cols() != d || grad_det.size() != d) throw DimensionError("classify_fold_map: shapes do not match");
  MapClassification out;
  out.det = dF.determinant();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dF, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double scale = std::max(1.0, sv[0]);
  for (Eigen::Index k = 0; k < d; ++k) out.rank += sv[k] > threshold * scale;
  if (std::abs(out.det) > threshold) {
    out.cls = FoldClass::Nondegenerate;
    return out;
  }
  if (out.rank < d - 1) {
    out.cls = FoldClass::Degenerate;
    out.reason = "rank drops by more than one";
    return out;
  }
  const Eigen::VectorXd v = svd.matrixV().col(d - 1);
  out.d_det = grad_det.dot(v);
  if (std::abs(out.d_det) > threshold) {
    out.cls = FoldClass::Fold;
  } else {
    out.cls = FoldClass::Degenerate;
    out.reason = "det dF vanishes to second order along the kernel";
  }
  return out;
}

ProjectionJets projection_jets(const ReducedSymbol& a, std::span<const double> w) {
  const int n = a.dimension(), m = n - 1;
  const Jet j = a.jet(w, 2);
  // w = (t, xbar_1..xbar_m, xibar_1..xibar_m); xbar_m = r.
  auto ax = [&](int k) { return j.gradient[1 + k]; };
  auto axi = [&](int k) { return j.gradient[n + k]; };
  auto H = [&](int i, int k) { return j.hessian(i, k); };
  const int T = 0;
  auto X = [&](int k) { return 1 + k; };
  auto XI = [&](int k) { return n + k; };

  // Mixed Hessian B = d_X d_Xi phi at the base, X = (t, y').
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, m);
  for (int c = 0; c < m; ++c) B(0, c) = axi(c);
  for (int r = 1; r < m; ++r) B(r, r - 1) = 1.0;

  Eigen::MatrixXd phiXX = Eigen::MatrixXd::Zero(m, m);
  double att = j.gradient[T];
  for (int k = 0; k < m; ++k) att += axi(k) * ax(k);
  phiXX(0, 0) = att;
  for (int r = 1; r < m; ++r) phiXX(0, r) = phiXX(r, 0) = ax(r - 1);

  const int d = 2 * m;
  ProjectionJets out;
  out.dpi_left = Eigen::MatrixXd::Zero(d, d);
  out.dpi_left.topLeftCorner(m, m).setIdentity();
  out.dpi_left.bottomLeftCorner(m, m) = phiXX;
  out.dpi_left.bottomRightCorner(m, m) = B;
  out.dpi_right = Eigen::MatrixXd::Zero(d, d);
  out.dpi_right.topRightCorner(m, m).setIdentity();
  out.dpi_right.bottomLeftCorner(m, m) = -B.transpose();

  // Cofactor matrix of B (valid for singular B).
  Eigen::MatrixXd adj(m, m);
  if (m == 1) {
    adj(0, 0) = 1.0;
  } else {
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < m; ++c) {
        Eigen::MatrixXd minor(m - 1, m - 1);
        for (int i = 0, ii = 0; i < m; ++i) {
          if (i == r) continue;
          for (int k = 0, kk = 0; k < m; ++k) {
            if (k == c) continue;
            minor(ii, kk++) = B(i, k);
          }
          ++ii;
        }
        adj(c, r) = ((r + c) % 2 ? -1.0 : 1.0) * minor.determinant();
      }
    }
  }

  // d_z B for z in (t, y', eta', nu); only row 0 and the t-derivative of
  // the y' rows are nonzero at the initial time.
  Eigen::VectorXd grad(d);
  for (int z = 0; z < d; ++z) {
    Eigen::MatrixXd dB = Eigen::MatrixXd::Zero(m, m);
    for (int c = 0; c < m; ++c) {
      if (z == 0) {
        double v = H(T, XI(c));
        for (int k = 0; k < m; ++k) v += H(XI(k), XI(c)) * ax(k) + axi(k) * H(X(k), XI(c));
        dB(0, c) = v;
        for (int r = 1; r < m; ++r) dB(r, c) = H(X(r - 1), XI(c));
      } else if (z < m) {
        dB(0, c) = H(X(z - 1), XI(c));
      } else {
        dB(0, c) = H(XI(c), XI(z - m));
      }
    }
    grad[z] = (adj * dB).trace();
  }
  out.grad_det_left = grad;
  out.grad_det_right = grad;
  return out;
}

FoldReport classify_projections(const FoldQuantities& closed, const std::optional<FoldQuantities>& numeric, double e0,
                                double threshold) {
  FoldReport rep;
  rep.threshold = threshold;
  rep.closed = closed;
  rep.numeric = numeric;
  rep.e0 = e0;
  rep.rddot_from_phase = -e0 * closed.d3_ttn;
  rep.pi_left = std::abs(closed.d3_tnn) > threshold ? FoldClass::Fold : FoldClass::Degenerate;
  rep.pi_right = std::abs(closed.d3_ttn) > threshold ? FoldClass::Fold : FoldClass::Degenerate;
  return rep;
}

FoldReport analyze_fold(const SymbolFn& p, const std::optional<SymbolFn>& r, const PhasePoint& base,
                        const FoldOptions& opt) {
  const int n = p.dimension();
  if (n < 2) throw DimensionError("fold analysis needs n >= 2");
  if (base.dimension() != n) throw DimensionError("base point dimension does not match symbol");
  const double pv = p(base);
  if (!(std::abs(pv) < 1e-8)) throw InvalidArgument("base point is not characteristic: |p| = " + std::to_string(std::abs(pv)));

  const ReducedSymbol a(p, base.xi[0]);
  std::vector<double> w(static_cast<std::size_t>(2 * n - 1));
  for (int i = 0; i < n; ++i) w[i] = base.x[i];
  for (int k = 0; k < n - 1; ++k) w[static_cast<std::size_t>(n + k)] = base.xi[k + 1];

  const FoldQuantities closed = phase_fold_quantities_closed(a, w);
  const Jet pj = eval_jet(p, base, 1);
  std::optional<FoldQuantities> numeric;
  double min_jac = std::numeric_limits<double>::infinity();
  double residual = 0.0;
  if (opt.numeric) {
    const PhaseTable st = fold_stencil_table(a, w, opt.step, opt.phase);
    numeric = phase_fold_quantities_numeric(st);
    min_jac = st.min_jacobian;

    PhaseGridSpec g;
    g.t0 = w[0];
    g.dt = 0.05;
    g.k_min = -4;
    g.k_max = 4;
    for (int k = 0; k < n - 1; ++k) {
      g.xbar.push_back({w[1 + k] - 0.1, w[1 + k] + 0.1});
      g.xbar_samples.push_back(5);
    }
    Eigen::VectorXd center(n - 1);
    for (int k = 0; k < n - 1; ++k) center[k] = w[static_cast<std::size_t>(n + k)];
    const PhaseTable around = solve_phase(a, {center}, g, opt.phase);
    residual = hj_residual(around, a).max_residual;
    min_jac = std::min(min_jac, around.min_jacobian);
  }

  FoldReport rep = classify_projections(closed, numeric, pj.gradient[n], opt.threshold);
  rep.base = base;
  rep.hj_residual = residual;
  rep.min_jacobian = min_jac;
  const ProjectionJets pjets = projection_jets(a, w);
  rep.pi_left_map = classify_fold_map(pjets.dpi_left, pjets.grad_det_left, opt.threshold);
  rep.pi_right_map = classify_fold_map(pjets.dpi_right, pjets.grad_det_right, opt.threshold);
  if (r) rep.rddot_flow = r_derivatives(p, *r, base).rddot;
  return rep;
}

}  // namespace qml
