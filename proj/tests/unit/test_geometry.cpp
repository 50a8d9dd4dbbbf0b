#include <cmath>

#include "doctest.h"
#include "qml/geometry.hpp"
#include "qml/reduced.hpp"

using namespace qml;

namespace {

Region model_region(int n) { return Region::box(n, {-0.5, 0.5}, {-0.6, 0.6}, 5); }
Region sphere_region(int n) { return Region::box(n, {-0.5, 0.5}, {-1.2, 1.2}, 5); }

}  // namespace

TEST_CASE("characteristic sampling") {
  for (int n : {2, 3}) {
    const auto p = builtin_symbol("model-fold", n);
    const auto s = sample_char_variety(p, model_region(n), 500);
    REQUIRE(!s.points.empty());
    CHECK(s.points.size() <= 500);
    CHECK(s.attempted >= s.succeeded);
    for (const auto& pt : s.points) {
      double rhs = pt.x[n - 1];
      for (int i = 1; i < n; ++i) rhs += pt.xi[i] * pt.xi[i];
      CHECK(std::abs(pt.xi[0] - rhs) <= 1e-10);
    }
  }
  const auto fe = builtin_symbol("flat-elliptic", 2);
  for (const auto& pt : sample_char_variety(fe, sphere_region(2), 200).points)
    CHECK(std::abs(pt.xi.squaredNorm() - 1) <= 1e-10);
  CHECK(sample_char_variety(parse_symbol("xi1^2+1", 2), sphere_region(2), 100).points.empty());
}

TEST_CASE("random seeds are reproducible") {
  auto reg = sphere_region(2);
  reg.random_seeds = 50;
  reg.seed = 42;
  const auto fe = builtin_symbol("flat-elliptic", 2);
  const auto a = sample_char_variety(fe, reg, 1000);
  const auto b = sample_char_variety(fe, reg, 1000);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t k = 0; k < a.points.size(); ++k) CHECK(a.points[k].xi == b.points[k].xi);
}

TEST_CASE("region validation") {
  auto reg = model_region(2);
  reg.x_samples[0] = 1;
  CHECK_THROWS_AS(reg.validate(), InvalidArgument);
  CHECK_THROWS_AS(sample_char_variety(builtin_symbol("model-fold", 3), model_region(2), 10), DimensionError);
}

TEST_CASE("A1") {
  const auto model = builtin_symbol("model-fold", 2);
  auto a1 = check_A1(model, sample_char_variety(model, model_region(2), 200).points);
  CHECK(a1.verdict == Verdict::Pass);
  CHECK(a1.min_grad >= 1.0);

  const auto fe = builtin_symbol("flat-elliptic", 2);
  a1 = check_A1(fe, sample_char_variety(fe, sphere_region(2), 200).points);
  CHECK(a1.verdict == Verdict::Pass);
  CHECK(a1.min_grad == doctest::Approx(2.0).epsilon(1e-10));

  const auto sq = parse_symbol("xi1^2", 2);
  PhasePoint pt(Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0.3));
  a1 = check_A1(sq, {pt});
  CHECK(a1.verdict == Verdict::Fail);
  CHECK(a1.min_grad == 0.0);
  CHECK(check_A1(sq, {}).verdict == Verdict::Vacuous);
}

TEST_CASE("A2 forms") {
  const auto model = builtin_symbol("model-fold", 3);
  PhasePoint o(Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero());
  const auto form = second_fundamental_form(model, o);
  CHECK((form - 2 * Eigen::Matrix2d::Identity()).norm() < 1e-14);

  const auto fe = builtin_symbol("flat-elliptic", 2);
  PhasePoint e(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0));
  CHECK(second_fundamental_form(fe, e)(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));

  auto a2 = check_A2(model, sample_char_variety(model, model_region(3), 300).points);
  CHECK(a2.verdict == Verdict::Pass);
  CHECK(a2.sign == 1);
  a2 = check_A2(fe, sample_char_variety(fe, sphere_region(2), 300).points);
  CHECK(a2.verdict == Verdict::Pass);
  CHECK(a2.sign == -1);

  const auto flat = parse_symbol("xi1", 2);
  a2 = check_A2(flat, {PhasePoint(Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0.2))});
  CHECK(a2.verdict == Verdict::Fail);
  CHECK(a2.witness_form.norm() == 0.0);
}

TEST_CASE("A2 eigenvalues invariant under rotation of xibar") {
  // p = xi1 - x3 - xi2^2 - 3 xi3^2 and the same with (xi2, xi3) rotated.
  const double c = std::cos(0.7), s = std::sin(0.7);
  const auto p = parse_symbol("xi1 - x3 - xi2^2 - 3*xi3^2", 3);
  char buf[256];
  std::snprintf(buf, sizeof buf, "xi1 - x3 - (%.17g*xi2 + %.17g*xi3)^2 - 3*(%.17g*xi2 + %.17g*xi3)^2", c, s, -s, c);
  const auto q = parse_symbol(buf, 3);
  Eigen::Vector3d eta(0.0, 0.2, -0.1);
  Eigen::Vector3d rot(0.0, c * eta[1] - s * eta[2], s * eta[1] + c * eta[2]);
  PhasePoint a(Eigen::Vector3d(0.1, 0, 0.05), eta), b(Eigen::Vector3d(0.1, 0, 0.05), rot);
  a.xi[0] = 0.05 + eta[1] * eta[1] + 3 * eta[2] * eta[2];
  b.xi[0] = a.xi[0];
  REQUIRE(std::abs(p(a)) < 1e-14);
  REQUIRE(std::abs(q(b)) < 1e-14);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(second_fundamental_form(p, a)), eb(second_fundamental_form(q, b));
  CHECK((ea.eigenvalues() - eb.eigenvalues()).norm() < 1e-8);
}

TEST_CASE("A3 on the model symbol") {
  for (int n : {2, 3}) {
    const auto p = builtin_symbol("model-fold", n);
    const auto r = parse_symbol("x" + std::to_string(n), n);
    const auto a3 = check_A3(p, r, model_region(n));
    CHECK(a3.verdict == Verdict::Pass);
    REQUIRE(!a3.tangencies.empty());
    bool at_origin = false;
    for (const auto& t : a3.tangencies) {
      CHECK(std::abs(t.rdot) <= 1e-8);
      CHECK(std::abs(t.rddot + 2) <= 1e-8);
      if (t.point.x.norm() < 1e-12 && t.point.xi.norm() < 1e-12) at_origin = true;
    }
    CHECK(at_origin);
  }
}

TEST_CASE("A3 on flat-elliptic") {
  const auto fe = builtin_symbol("flat-elliptic", 2);
  auto a3 = check_A3(fe, parse_symbol("x2", 2), sphere_region(2));
  CHECK(a3.verdict == Verdict::Fail);
  REQUIRE(!a3.tangencies.empty());
  CHECK(std::abs(a3.witness.xi[1]) < 1e-8);
  CHECK(a3.min_abs_rddot == 0.0);

  a3 = check_A3(fe, parse_symbol("x2 - x1^2/2", 2), sphere_region(2));
  CHECK(a3.verdict == Verdict::Pass);
  REQUIRE(!a3.tangencies.empty());
  for (const auto& t : a3.tangencies) {
    const Eigen::Vector2d grad(-t.point.x[0], 1.0);
    const Eigen::Vector2d tangent(1.0, t.point.x[0]);
    // rdot = 2 xi . grad r = 0 and rddot = -4 (xi . tangent)^2 / |tangent|^2 ... at x = 0 exactly -4.
    CHECK(std::abs(t.point.xi.dot(grad)) < 1e-8);
    if (std::abs(t.point.x[0]) < 1e-12) CHECK(t.rddot == doctest::Approx(-4.0).epsilon(1e-10));
  }
}

TEST_CASE("A3 invariant under scaling of r") {
  const auto fe = builtin_symbol("flat-elliptic", 2);
  const auto a = check_A3(fe, parse_symbol("x2 - x1^2/2", 2), sphere_region(2));
  const auto b = check_A3(fe, parse_symbol("3.5 * (x2 - x1^2/2)", 2), sphere_region(2));
  REQUIRE(a.tangencies.size() == b.tangencies.size());
  CHECK(a.verdict == b.verdict);
  for (std::size_t k = 0; k < a.tangencies.size(); ++k) {
    CHECK((a.tangencies[k].point.xi - b.tangencies[k].point.xi).norm() < 1e-8);
    CHECK(b.tangencies[k].rddot == doctest::Approx(3.5 * a.tangencies[k].rddot).epsilon(1e-8));
  }
  CHECK(b.min_abs_rddot == doctest::Approx(a.min_abs_rddot).epsilon(1e-8));
}

TEST_CASE("A3 rejects degenerate defining functions") {
  const auto fe = builtin_symbol("flat-elliptic", 2);
  CHECK_THROWS_AS(check_A3(fe, parse_symbol("x2^2", 2), sphere_region(2)), InvalidArgument);
  CHECK_THROWS_AS(check_A3(fe, parse_symbol("x2 + xi1", 2), sphere_region(2)), InvalidArgument);
}

TEST_CASE("A3 vacuous without tangencies") {
  // H = {x1 = 0} is crossed transversally by every bicharacteristic of xi1 - xi2^2.
  const auto p = parse_symbol("xi1 - xi2^2", 2);
  const auto a3 = check_A3(p, parse_symbol("x1", 2), model_region(2));
  CHECK(a3.verdict == Verdict::Vacuous);
}

TEST_CASE("tangencies agree with the flow") {
  const auto fe = builtin_symbol("flat-elliptic", 2);
  const auto r = parse_symbol("x2 - x1^2/2", 2);
  const auto a3 = check_A3(fe, r, sphere_region(2));
  REQUIRE(!a3.tangencies.empty());
  for (const auto& t : a3.tangencies) {
    // Least-squares quadratic through r(s) on [-1e-2, 1e-2].
    const auto fwd = integrate_flow(fe, t.point, {0, 1e-2}, {1e-13, 6});
    const auto bwd = integrate_flow(fe, t.point, {0, -1e-2}, {1e-13, 6});
    Eigen::MatrixXd a(11, 3);
    Eigen::VectorXd y(11);
    int row = 0;
    for (int k = 5; k >= 1; --k, ++row) {
      const double s = bwd.samples[k].s;
      a.row(row) << 1, s, s * s;
      y[row] = r(bwd.samples[k].state);
    }
    for (int k = 0; k <= 5; ++k, ++row) {
      const double s = fwd.samples[k].s;
      a.row(row) << 1, s, s * s;
      y[row] = r(fwd.samples[k].state);
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(y);
    CHECK(std::abs(2 * c[2] - t.rddot) / std::abs(t.rddot) < 1e-3);
  }
}

TEST_CASE("solve_a") {
  const auto model = builtin_symbol("model-fold", 3);
  std::vector<double> x = {0.1, -0.3, 0.25}, xb = {0.4, -0.2};
  CHECK(std::abs(solve_a(model, x, xb, 0.0) - (0.25 + 0.16 + 0.04)) < 1e-12);

  const auto fe = builtin_symbol("flat-elliptic", 2);
  std::vector<double> x2 = {0.0, 0.0}, nu = {0.3};
  CHECK(std::abs(solve_a(fe, x2, nu, 1.0) - std::sqrt(1 - 0.09)) < 1e-12);
  CHECK(solve_a(parse_symbol("xi1", 2), x2, nu, 0.7) == 0.0);
  CHECK_THROWS_AS(solve_a(parse_symbol("xi1^2", 2), x2, nu, 0.0), DomainError);
  CHECK_THROWS_AS(solve_a(parse_symbol("xi1^2 + 1", 2), x2, nu, 0.3), Error);
}

TEST_CASE("reduced symbol jets are exact") {
  const ReducedSymbol a(builtin_symbol("flat-elliptic", 2), 1.0);
  // w = (t, r, nu); a = sqrt(1 - nu^2)
  const std::vector<double> w = {0.2, 0.1, 0.3};
  const Jet j = a.jet(w, 3);
  const double q = 1 - 0.09;
  CHECK(j.value == doctest::Approx(std::sqrt(q)).epsilon(1e-14));
  CHECK(j.gradient[2] == doctest::Approx(-0.3 / std::sqrt(q)).epsilon(1e-13));
  CHECK(j.hessian(2, 2) == doctest::Approx(-1 / std::pow(q, 1.5)).epsilon(1e-13));
  CHECK(j.third(2, 2, 2) == doctest::Approx(-3 * 0.3 / std::pow(q, 2.5)).epsilon(1e-12));
  CHECK(j.gradient[0] == 0.0);

  // Gauge: multiplying p by a nonvanishing factor leaves a unchanged.
  const ReducedSymbol m(builtin_symbol("model-fold", 2), 0.0);
  const ReducedSymbol g(parse_symbol("(2 + sin(x1) + xi2^2) * (xi1 - x2 - xi2^2)", 2), 0.0);
  const Jet jm = m.jet(w, 3), jg = g.jet(w, 3);
  CHECK(std::abs(jm.value - jg.value) < 1e-13);
  CHECK((jm.gradient - jg.gradient).norm() < 1e-12);
  CHECK((jm.hessian - jg.hessian).norm() < 1e-12);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l) CHECK(std::abs(jm.third(i, k, l) - jg.third(i, k, l)) < 1e-11);
}
