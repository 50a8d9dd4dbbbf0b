#include "qml/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "qml/parallel.hpp"

namespace qml {

namespace {

std::string describe(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os.precision(6);
  os << '(';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ')';
  return os.str();
}

double node(const Interval& iv, int k, int count) {
  return count == 1 ? iv.lo : iv.lo + (iv.hi - iv.lo) * k / (count - 1);
}

// Calls f(values) for every node of the tensor grid given by axes/counts.
template <class F>
void for_each_node(const std::vector<Interval>& axes, const std::vector<int>& counts, F&& f) {
  const std::size_t d = axes.size();
  std::vector<int> idx(d, 0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(d));
  for (;;) {
    for (std::size_t a = 0; a < d; ++a) v[static_cast<Eigen::Index>(a)] = node(axes[a], idx[a], counts[a]);
    f(v);
    std::size_t a = 0;
    while (a < d && ++idx[a] == counts[a]) idx[a++] = 0;
    if (a == d) return;
  }
}

struct Gradient {
  double value;
  Eigen::VectorXd gx, gxi;
};

Gradient gradient(const SymbolFn& f, const PhasePoint& pt) {
  const Jet j = eval_jet(f, pt, 1);
  const int n = f.dimension();
  return {j.value, j.gradient.head(n), j.gradient.tail(n)};
}

// Newton along d_xi p with x frozen.
bool project_to_fibre(const SymbolFn& p, PhasePoint& pt) {
  for (int it = 0; it < 50; ++it) {
    const Gradient g = gradient(p, pt);
    if (!std::isfinite(g.value)) return false;
    if (std::abs(g.value) <= 1e-14) return true;
    const double g2 = g.gxi.squaredNorm();
    if (!(g2 > 1e-24)) return false;
    pt.xi -= (g.value / g2) * g.gxi;
    if (!pt.xi.allFinite()) return false;
    if (std::abs(g.value) <= 1e-12 && it > 0) {
      return std::abs(p(pt)) <= 1e-10;
    }
  }
  return std::abs(p(pt)) <= 1e-10;
}

bool try_project_to_fibre(const SymbolFn& p, PhasePoint& pt) {
  try {
    return project_to_fibre(p, pt);
  } catch (const DomainError&) {
    return false;
  }
}

bool near(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double tol) {
  return (a - b).lpNorm<Eigen::Infinity>() <= tol * (1.0 + a.lpNorm<Eigen::Infinity>());
}

void push_unique(std::vector<Eigen::VectorXd>& set, const Eigen::VectorXd& v, double tol) {
  for (const auto& w : set)
    if (near(w, v, tol)) return;
  set.push_back(v);
}

}  // namespace

Region Region::box(int n, Interval x, Interval xi, int samples) {
  Region r;
  r.x.assign(static_cast<std::size_t>(n), x);
  r.xi.assign(static_cast<std::size_t>(n), xi);
  r.x_samples.assign(static_cast<std::size_t>(n), samples);
  r.xi_samples.assign(static_cast<std::size_t>(n), samples);
  return r;
}

void Region::validate() const {
  const std::size_t n = x.size();
  if (n == 0) throw InvalidArgument("region: empty box");
  if (xi.size() != n || x_samples.size() != n || xi_samples.size() != n)
    throw DimensionError("region: axis lists have different lengths");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i].lo <= x[i].hi) || !(xi[i].lo <= xi[i].hi)) throw InvalidArgument("region: interval with lo > hi");
    if (x_samples[i] < 2 || xi_samples[i] < 2) throw InvalidArgument("region: sample counts must be >= 2");
  }
  if (random_seeds < 0) throw InvalidArgument("region: random_seeds must be >= 0");
}

bool Region::contains(const PhasePoint& pt, double slack) const {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    if (pt.x[k] < x[i].lo - slack || pt.x[k] > x[i].hi + slack) return false;
    if (pt.xi[k] < xi[i].lo - slack || pt.xi[k] > xi[i].hi + slack) return false;
  }
  return true;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "pass";
    case Verdict::Fail:
      return "fail";
    case Verdict::Vacuous:
      return "vacuous";
  }
  return "?";
}

CharSample sample_char_variety(const SymbolFn& p, const Region& region, std::size_t max_points) {
  region.validate();
  const int n = p.dimension();
  if (region.dimension() != n) throw DimensionError("region dimension does not match symbol");
  if (max_points < 1) throw InvalidArgument("sample_char_variety: N must be >= 1");

  std::vector<Interval> axes = region.x;
  axes.insert(axes.end(), region.xi.begin(), region.xi.end());
  std::vector<int> counts = region.x_samples;
  counts.insert(counts.end(), region.xi_samples.begin(), region.xi_samples.end());

  std::vector<Eigen::VectorXd> seeds;
  for_each_node(axes, counts, [&](const Eigen::VectorXd& v) { seeds.push_back(v); });
  std::mt19937_64 rng(region.seed);
  for (int k = 0; k < region.random_seeds; ++k) {
    Eigen::VectorXd v(2 * n);
    for (int a = 0; a < 2 * n; ++a) {
      std::uniform_real_distribution<double> u(axes[a].lo, axes[a].hi);
      v[a] = u(rng);
    }
    seeds.push_back(v);
  }

  CharSample out;
  std::vector<PhasePoint> found;
  for (const auto& s : seeds) {
    ++out.attempted;
    PhasePoint pt(s.head(n), s.tail(n));
    if (!try_project_to_fibre(p, pt)) continue;
    if (!region.contains(pt)) continue;
    found.push_back(std::move(pt));
  }
  out.succeeded = found.size();
  if (found.size() <= max_points) {
    out.points = std::move(found);
  } else {
    for (std::size_t k = 0; k < max_points; ++k) out.points.push_back(found[k * found.size() / max_points]);
  }
  return out;
}

A1Result check_A1(const SymbolFn& p, const std::vector<PhasePoint>& pts, double threshold) {
  A1Result res;
  res.threshold = threshold;
  if (pts.empty()) return res;
  res.min_grad = std::numeric_limits<double>::infinity();
  for (const auto& pt : pts) {
    const double g = gradient(p, pt).gxi.norm();
    if (g < res.min_grad) {
      res.min_grad = g;
      res.witness = pt;
    }
  }
  res.verdict = res.min_grad > threshold ? Verdict::Pass : Verdict::Fail;
  return res;
}

Eigen::MatrixXd second_fundamental_form(const SymbolFn& p, const PhasePoint& pt) {
  const int n = p.dimension();
  if (n < 2) throw DimensionError("second fundamental form needs n >= 2");
  const Jet j = eval_jet(p, pt, 2);
  const Eigen::VectorXd g = j.gradient.tail(n);
  const double gn = g.norm();
  if (!(gn > 0.0)) throw DomainError("second fundamental form: d_xi p = 0 at " + describe(pt.xi));
  const Eigen::MatrixXd hess = j.hessian.bottomRightCorner(n, n);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd b = q.rightCols(n - 1);
  Eigen::MatrixXd form = -(b.transpose() * hess * b) / gn;
  return 0.5 * (form + form.transpose());
}

A2Result check_A2(const SymbolFn& p, const std::vector<PhasePoint>& pts, double threshold) {
  A2Result res;
  res.threshold = threshold;
  if (pts.empty()) return res;
  res.min_abs_eig = std::numeric_limits<double>::infinity();
  int common_sign = 0;
  bool consistent = true;
  for (const auto& pt : pts) {
    const Eigen::MatrixXd form = second_fundamental_form(p, pt);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(form, Eigen::EigenvaluesOnly).eigenvalues();
    const double lo = ev.minCoeff(), hi = ev.maxCoeff();
    const int sign = lo > 0.0 ? 1 : (hi < 0.0 ? -1 : 0);
    const double m = ev.cwiseAbs().minCoeff();
    const bool first = std::isinf(res.min_abs_eig);
    if (sign == 0 && consistent) {
      consistent = false;
      res.witness = pt;
      res.witness_form = form;
      res.reason = "second fundamental form is indefinite or singular at xi = " + describe(pt.xi);
    } else if (consistent) {
      if (first) common_sign = sign;
      if (sign != common_sign) {
        consistent = false;
        res.witness = pt;
        res.witness_form = form;
        res.reason = "definiteness sign changes at xi = " + describe(pt.xi);
      }
    }
    if (m < res.min_abs_eig) {
      res.min_abs_eig = m;
      if (consistent) {
        res.witness = pt;
        res.witness_form = form;
      }
    }
  }
  res.sign = consistent ? common_sign : 0;
  if (!consistent) {
    res.verdict = Verdict::Fail;
  } else if (res.min_abs_eig > threshold) {
    res.verdict = Verdict::Pass;
  } else {
    res.verdict = Verdict::Fail;
    res.reason = "smallest curvature eigenvalue below threshold";
  }
  return res;
}

A3Result check_A3(const SymbolFn& p, const SymbolFn& r, const Region& region, const A3Options& opt) {
  region.validate();
  const int n = p.dimension();
  if (r.dimension() != n || region.dimension() != n) throw DimensionError("check_A3: dimensions differ");
  if (r.arity() != Arity::BaseSpace) throw InvalidArgument("check_A3: r must be a function of x only");
  if (opt.curve_samples < 3) throw InvalidArgument("check_A3: curve_samples must be >= 3");

  A3Result res;
  res.threshold = opt.threshold;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);

  // Base points on H = {r = 0}.
  std::vector<Eigen::VectorXd> base;
  for_each_node(region.x, region.x_samples, [&](const Eigen::VectorXd& seed) {
    Eigen::VectorXd x = seed;
    for (int it = 0; it < 60; ++it) {
      const Gradient g = gradient(r, PhasePoint(x, zero));
      const double gn = g.gx.norm();
      if (gn < 1e-8) {
        if (std::abs(g.value) < 1e-6)
          throw InvalidArgument("invalid defining function: dr vanishes near {r = 0} at x = " + describe(x));
        return;
      }
      if (std::abs(g.value) <= 1e-14) break;
      x -= (g.value / (gn * gn)) * g.gx;
      if (!x.allFinite()) return;
    }
    if (std::abs(r(PhasePoint(x, zero))) > 1e-12) return;
    for (int i = 0; i < n; ++i)
      if (x[i] < region.x[i].lo - 1e-9 || x[i] > region.x[i].hi + 1e-9) return;
    push_unique(base, x, 1e-9);
  });
  res.base_points = base.size();

  std::vector<Eigen::VectorXd> xi_grid;
  for_each_node(region.xi, region.xi_samples, [&](const Eigen::VectorXd& v) { xi_grid.push_back(v); });
  double reach = 0.0;
  for (int i = 0; i < n; ++i) reach += std::pow(std::max(std::abs(region.xi[i].lo), std::abs(region.xi[i].hi)), 2);
  reach = std::sqrt(reach);

  const SymbolFn rdot_fn = poisson_bracket(p, r);
  const double sweep_tol = 1e-8;

  std::vector<std::vector<Tangency>> found(base.size());
  std::vector<std::size_t> curves(base.size(), 0);
  parallel_for(base.size(), opt.jobs, [&](std::size_t b) {
    const Eigen::VectorXd& x0 = base[b];
    const Gradient gr = gradient(r, PhasePoint(x0, zero));
    const double grn = gr.gx.norm();
    if (grn < 1e-8) throw InvalidArgument("invalid defining function: dr vanishes on {r = 0} at x = " + describe(x0));
    const Eigen::VectorXd d = gr.gx / grn;

    std::vector<Eigen::VectorXd> perp;
    for (const auto& xi : xi_grid) push_unique(perp, xi - xi.dot(d) * d, 1e-9);

    struct Sample {
      bool ok = false;
      PhasePoint pt;
      double rdot = 0.0;
    };
    auto sample_at = [&](const Eigen::VectorXd& xp, double sigma) {
      Sample s;
      PhasePoint pt(x0, xp + sigma * d);
      if (!try_project_to_fibre(p, pt)) return s;
      if (!region.contains(pt, 1e-9)) return s;
      try {
        s.rdot = rdot_fn(pt);
      } catch (const DomainError&) {
        return s;
      }
      s.ok = std::isfinite(s.rdot);
      s.pt = std::move(pt);
      return s;
    };

    auto& out = found[b];
    auto record = [&](const PhasePoint& pt) {
      const auto z = pt.stacked();
      for (const auto& t : out) {
        const auto w = t.point.stacked();
        double dist = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) dist = std::max(dist, std::abs(z[k] - w[k]));
        if (dist < 1e-6) return;
      }
      const RDerivatives rd = r_derivatives(p, r, pt);
      out.push_back({pt, rd.rdot, rd.rddot, grn});
    };

    const int m = opt.curve_samples;
    for (const auto& xp : perp) {
      ++curves[b];
      std::vector<double> sig(static_cast<std::size_t>(m));
      std::vector<Sample> smp(static_cast<std::size_t>(m));
      for (int k = 0; k < m; ++k) {
        sig[k] = -reach + 2.0 * reach * k / (m - 1);
        smp[k] = sample_at(xp, sig[k]);
      }
      for (int k = 0; k < m; ++k) {
        if (smp[k].ok && std::abs(smp[k].rdot) / grn < sweep_tol) record(smp[k].pt);
      }
      for (int k = 0; k + 1 < m; ++k) {
        const Sample& a0 = smp[k];
        const Sample& b0 = smp[k + 1];
        if (!a0.ok || !b0.ok) continue;
        if (!((a0.rdot < 0.0 && b0.rdot > 0.0) || (a0.rdot > 0.0 && b0.rdot < 0.0))) continue;
        double sa = sig[k], sb = sig[k + 1];
        double fa = a0.rdot;
        Sample best = std::abs(a0.rdot) < std::abs(b0.rdot) ? a0 : b0;
        bool broken = false;
        for (int it = 0; it < 200 && sb - sa > 1e-15 * (1.0 + std::abs(sa)); ++it) {
          const double sm = 0.5 * (sa + sb);
          const Sample mid = sample_at(xp, sm);
          if (!mid.ok) {
            broken = true;
            break;
          }
          if (std::abs(mid.rdot) < std::abs(best.rdot)) best = mid;
          if (mid.rdot == 0.0) break;
          if ((mid.rdot < 0.0) == (fa < 0.0)) {
            sa = sm;
            fa = mid.rdot;
          } else {
            sb = sm;
          }
        }
        if (!broken && std::abs(best.rdot) / grn < sweep_tol) record(best.pt);
      }
    }
  });

  for (std::size_t b = 0; b < base.size(); ++b) {
    res.curves += curves[b];
    for (auto& t : found[b]) {
      bool dup = false;
      for (const auto& u : res.tangencies) {
        if ((u.point.x - t.point.x).lpNorm<Eigen::Infinity>() < 1e-6 &&
            (u.point.xi - t.point.xi).lpNorm<Eigen::Infinity>() < 1e-6) {
          dup = true;
          break;
        }
      }
      if (!dup) res.tangencies.push_back(std::move(t));
    }
  }

  if (res.tangencies.empty()) {
    res.reason = "no tangencies found in the region";
    return res;
  }
  res.min_abs_rddot = std::numeric_limits<double>::infinity();
  for (const auto& t : res.tangencies) {
    const double v = std::abs(t.rddot_normalized());
    if (v < res.min_abs_rddot) {
      res.min_abs_rddot = v;
      res.witness = t.point;
    }
  }
  if (res.min_abs_rddot > opt.threshold) {
    res.verdict = Verdict::Pass;
  } else {
    res.verdict = Verdict::Fail;
    res.reason = "normal acceleration vanishes at a tangency: x = " + describe(res.witness.x) +
                 ", xi = " + describe(res.witness.xi);
  }
  return res;
}

bool GeometryReport::passed() const {
  return a1.verdict != Verdict::Fail && a2.verdict != Verdict::Fail && a3.verdict != Verdict::Fail;
}

std::string GeometryReport::failure_reason() const {
  if (a1.verdict == Verdict::Fail) return "A1: d_xi p vanishes on the characteristic set";
  if (a2.verdict == Verdict::Fail) return "A2: " + a2.reason;
  if (a3.verdict == Verdict::Fail) return "A3: " + a3.reason;
  return {};
}

GeometryReport check_geometry(const SymbolFn& p, const SymbolFn& r, const Region& region, std::size_t max_points,
                              const Thresholds& th, int jobs) {
  GeometryReport rep;
  rep.sample = sample_char_variety(p, region, max_points);
  rep.a1 = check_A1(p, rep.sample.points, th.a1);
  if (rep.a1.verdict == Verdict::Pass) {
    rep.a2 = check_A2(p, rep.sample.points, th.a2);
  } else {
    rep.a2.threshold = th.a2;
    rep.a2.reason = "not evaluated: A1 did not pass";
  }
  A3Options o;
  o.threshold = th.a3;
  o.jobs = jobs;
  rep.a3 = check_A3(p, r, region, o);
  return rep;
}

}  // namespace qml
