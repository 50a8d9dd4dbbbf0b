#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "qml/cutoff.hpp"
#include "qml/oscillatory.hpp"
#include "qml/symbol.hpp"

using namespace qml;

namespace {

constexpr double kPi = std::numbers::pi;

GridAxis axis(std::string label, double origin, double spacing, int size) {
  GridAxis a;
  a.label = std::move(label);
  a.origin = origin;
  a.spacing = spacing;
  a.size = size;
  return a;
}

GridFn random_fn(std::vector<GridAxis> axes, std::uint64_t seed) {
  GridFn f(std::move(axes));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (auto& v : f.values) v = cplx(g(rng), g(rng));
  return f;
}

std::vector<cplx> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<cplx> v(n);
  for (auto& c : v) c = cplx(g(rng), g(rng));
  return v;
}

Eigen::MatrixXcd random_matrix(int r, int c, std::uint64_t seed) {
  const auto v = random_vec(static_cast<std::size_t>(r * c), seed);
  Eigen::MatrixXcd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = v[static_cast<std::size_t>(i * c + j)];
  return m;
}

double svd_norm(const Eigen::MatrixXcd& m) {
  return Eigen::BDCSVD<Eigen::MatrixXcd>(m).singularValues()(0);
}

Eigen::VectorXcd as_eigen(const std::vector<cplx>& v) {
  return Eigen::Map<const Eigen::VectorXcd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TEST_CASE("cutoff is smooth and supported in [0, 2]") {
  CHECK(chi(0.0) == 1.0);
  CHECK(chi(1.0) == 1.0);
  CHECK(chi(-0.5) == 1.0);
  CHECK(chi(2.0) == 0.0);
  CHECK(chi(3.0) == 0.0);
  CHECK(chi(1.5) > 0.0);
  CHECK(chi(1.5) < 1.0);
  double prev = 1.0;
  for (double s = 1.0; s <= 2.0; s += 0.01) {
    CHECK(chi(s) <= prev + 1e-15);
    prev = chi(s);
  }
}

TEST_CASE("semiclassical transform of a gaussian") {
  // (2 pi h)^{-1/2} int e^{-i x xi / h} e^{-x^2/2} dx = h^{-1/2} e^{-xi^2 / (2 h^2)}
  for (double h : {1.0, 0.5, 0.25}) {
    GridFn f({axis("x", -12.0, 24.0 / 512, 512)});
    for (int j = 0; j < 512; ++j) {
      const double x = f.axes[0].node(j);
      f.values[j] = std::exp(-0.5 * x * x);
    }
    const GridFn F = semiclassical_ft(f, h, Direction::Forward);
    CHECK(F.axes[0].frequency);
    CHECK(F.axes[0].spacing == doctest::Approx(2 * kPi * h / 24.0).epsilon(1e-14));
    double err = 0.0;
    for (int k = 0; k < 512; ++k) {
      const double xi = F.axes[0].node(k);
      err = std::max(err, std::abs(F.values[k] - cplx(std::exp(-xi * xi / (2 * h * h)) / std::sqrt(h), 0.0)));
    }
    CHECK(err < 1e-10);
  }
}

TEST_CASE("transform of a shifted impulse is a pure phase") {
  const double h = 0.3;
  GridFn f({axis("x", -1.7, 0.05, 64)});
  const int j0 = 40;
  f.values[j0] = 1.0;
  const GridFn F = semiclassical_ft(f, h, Direction::Forward);
  const double x0 = f.axes[0].node(j0);
  for (int k = 0; k < 64; ++k) {
    const cplx want = std::polar(0.05 / std::sqrt(2 * kPi * h), -x0 * F.axes[0].node(k) / h);
    CHECK(std::abs(F.values[k] - want) < 1e-13);
  }
}

TEST_CASE("transform matches a brute-force sum in two dimensions") {
  const double h = 0.7;
  const GridFn f = random_fn({axis("x", -0.9, 0.11, 9), axis("y", 0.3, 0.07, 12)}, 11);
  const GridFn F = semiclassical_ft(f, h, Direction::Forward);
  double err = 0.0;
  for (int k = 0; k < 9; ++k)
    for (int l = 0; l < 12; ++l) {
      cplx s = 0.0;
      for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 12; ++j) {
          const double ph = f.axes[0].node(i) * F.axes[0].node(k) + f.axes[1].node(j) * F.axes[1].node(l);
          s += std::polar(1.0, -ph / h) * f.values[static_cast<std::size_t>(i * 12 + j)];
        }
      s *= f.cell_volume() / (2 * kPi * h);
      err = std::max(err, std::abs(s - F.values[static_cast<std::size_t>(k * 12 + l)]));
    }
  CHECK(err < 1e-12);
}

TEST_CASE("transform is unitary and inverts") {
  std::uint64_t seed = 100;
  for (double h : {1.0, 0.1, 1.0 / 64}) {
    for (auto axes : {std::vector<GridAxis>{axis("x", -3.0, 0.01, 601)},
                      std::vector<GridAxis>{axis("x", 0.5, 0.02, 64), axis("y", -1.0, 0.03, 33)},
                      std::vector<GridAxis>{axis("x", -0.2, 0.1, 8), axis("y", 0.0, 0.1, 5), axis("z", 1.0, 0.2, 6)}}) {
      const GridFn f = random_fn(axes, seed++);
      const GridFn F = semiclassical_ft(f, h, Direction::Forward);
      CHECK(std::abs(F.l2_norm() - f.l2_norm()) < 1e-10 * f.l2_norm());
      const GridFn g = semiclassical_ft(F, h, Direction::Inverse);
      REQUIRE(g.dims() == f.dims());
      for (int a = 0; a < f.dims(); ++a) {
        CHECK(g.axes[a].origin == doctest::Approx(f.axes[a].origin).epsilon(1e-14));
        CHECK(g.axes[a].spacing == doctest::Approx(f.axes[a].spacing).epsilon(1e-14));
        CHECK_FALSE(g.axes[a].frequency);
      }
      double err = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) err = std::max(err, std::abs(g.values[i] - f.values[i]));
      CHECK(err < 1e-10);
    }
  }
}

TEST_CASE("transform honours a declared bandlimit") {
  GridFn f({axis("x", -1.0, 0.01, 200)});
  f.values.assign(200, 1.0);
  f.axes[0].bandlimit = 0.9 * kPi * 0.1 / 0.01;
  CHECK_NOTHROW(semiclassical_ft(f, 0.1, Direction::Forward));
  f.axes[0].bandlimit = 1.1 * kPi * 0.1 / 0.01;
  CHECK_THROWS_AS(semiclassical_ft(f, 0.1, Direction::Forward), ResolutionError);
  CHECK_THROWS_AS(semiclassical_ft(f, 0.0, Direction::Forward), InvalidArgument);
  GridFn bad({axis("x", 0.0, 0.1, 4)});
  bad.values.resize(3);
  CHECK_THROWS_AS(semiclassical_ft(bad, 1.0, Direction::Forward), DimensionError);
}

TEST_CASE("operator_norm agrees with the SVD") {
  SUBCASE("identity") { CHECK(operator_norm(Eigen::MatrixXcd::Identity(20, 20)) == doctest::Approx(1.0).epsilon(1e-12)); }
  SUBCASE("diagonal") {
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(3, 3);
    d(0, 0) = 3.0;
    d(1, 1) = 1.0;
    d(2, 2) = 0.5;
    CHECK(operator_norm(d) == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("zero") { CHECK(operator_norm(Eigen::MatrixXcd::Zero(4, 6)) == 0.0); }
  SUBCASE("random") {
    for (auto [r, c] : {std::pair{64, 64}, std::pair{100, 37}, std::pair{512, 300}, std::pair{512, 512}}) {
      const Eigen::MatrixXcd m = random_matrix(r, c, static_cast<std::uint64_t>(r * 1000 + c));
      const double want = Eigen::BDCSVD<Eigen::MatrixXcd>(m).singularValues()(0);
      CHECK(std::abs(operator_norm(m, 1e-13) - want) < 1e-6 * want);
    }
  }
  SUBCASE("iteration cap") {
    DenseOperator op(random_matrix(50, 50, 3), 1.0, 1.0);
    CHECK_THROWS_AS(operator_norm(op, NormOptions{1e-15, 2}), ConvergenceError);
  }
}

TEST_CASE("dense operator norm includes the cell weights") {
  // psi = 0, beta = 1 on [0, 1]^2: rank one with norm |X|^{1/2} |Y|^{1/2} = 1.
  for (int n : {10, 37, 100}) {
    const auto op = build_osc_operator([](double, double) { return 0.0; }, [](double, double) { return 1.0; }, 5.0,
                                       Grid1::cells(0.0, 1.0, n), Grid1::cells(0.0, 1.0, 2 * n + 1));
    CHECK(svd_norm(op.normalized()) == doctest::Approx(1.0).epsilon(1e-12));
    DenseOperator copy = op;
    CHECK(operator_norm(copy).norm == doctest::Approx(1.0).epsilon(1e-9));
  }
  // On [0, 2] x [0, 0.5] the norm is 1 as well; on [0, 2]^2 it is 2.
  const auto op2 = build_osc_operator([](double, double) { return 0.0; }, [](double, double) { return 1.0; }, 1.0,
                                      Grid1::cells(0.0, 2.0, 40), Grid1::cells(0.0, 2.0, 30));
  CHECK(svd_norm(op2.normalized()) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("dense quadrature converges under refinement") {
  std::vector<double> norms;
  for (int n : {64, 128, 256, 512}) norms.push_back(svd_norm(benchmark_dense(BenchmarkPhase::Bilinear, 16.0, 0.5, n).normalized()));
  const double d1 = std::abs(norms[1] - norms[0]), d2 = std::abs(norms[2] - norms[1]), d3 = std::abs(norms[3] - norms[2]);
  CHECK(d2 < d1);
  CHECK(d3 < d2);
  CHECK(d3 < 1e-6);
}

TEST_CASE("dense builder rejects under-resolved grids") {
  PhaseGradient g{[](double, double y) { return -y; }, [](double x, double) { return -x; }};
  auto beta = [](double, double) { return 1.0; };
  auto psi = [](double x, double y) { return -x * y; };
  CHECK_THROWS_AS(build_osc_operator(psi, beta, 1000.0, Grid1::cells(-1, 1, 50), Grid1::cells(-1, 1, 50), g),
                  ResolutionError);
  CHECK_NOTHROW(build_osc_operator(psi, beta, 10.0, Grid1::cells(-1, 1, 50), Grid1::cells(-1, 1, 50), g));
  CHECK_THROWS_AS(build_osc_operator(psi, beta, -1.0, Grid1::cells(-1, 1, 5), Grid1::cells(-1, 1, 5)), InvalidArgument);
  CHECK_THROWS_AS(Grid1::cells(1.0, 0.0, 5), InvalidArgument);
}

TEST_CASE("structured operator equals the dense benchmark matrix") {
  for (auto phase : {BenchmarkPhase::Bilinear, BenchmarkPhase::Cubic}) {
    for (double lambda : {8.0, 40.0}) {
      const auto op = benchmark_operator(phase, lambda, 0.5);
      const int n = static_cast<int>(op->rows());
      const Eigen::MatrixXcd want = benchmark_dense(phase, lambda, 0.5, n).normalized();
      const Eigen::MatrixXcd got = op->dense();
      CHECK((got - want).cwiseAbs().maxCoeff() < 1e-11);

      const auto v = random_vec(op->cols(), 5);
      std::vector<cplx> av;
      op->apply(v, av);
      CHECK((as_eigen(av) - want * as_eigen(v)).norm() < 1e-10 * as_eigen(v).norm());
      const auto w = random_vec(op->rows(), 6);
      std::vector<cplx> atw;
      op->apply_adjoint(w, atw);
      CHECK((as_eigen(atw) - want.adjoint() * as_eigen(w)).norm() < 1e-10 * as_eigen(w).norm());

      NormOptions o;
      o.tol = 1e-11;
      o.max_iterations = 200000;
      CHECK(std::abs(operator_norm(*op, o).norm - svd_norm(want)) < 1e-6 * svd_norm(want));
    }
  }
}

TEST_CASE("structured operator with unequal grids and offsets") {
  CorrelationPhase ph;
  ph.K = [](double z) { return std::sin(3 * z) + z * z; };
  ph.R = [](double x) { return 0.2 * x; };
  ph.C = [](double y) { return std::cos(y); };
  auto bx = [](double x) { return 1.0 + 0.1 * x; };
  auto by = [](double y) { return std::exp(-y * y); };
  const Grid1 x{-0.3, 0.01, 70}, y{0.45, 0.01, 41};
  for (int sigma : {1, -1}) {
    ph.sigma = sigma;
    CorrelationOperator op(ph, bx, by, 7.0, x, y);
    Eigen::MatrixXcd m(70, 41);
    for (int i = 0; i < 70; ++i)
      for (int j = 0; j < 41; ++j) {
        const double xi = x.node(i), yj = y.node(j);
        const double phase = 7.0 * (ph.K(xi + sigma * yj) + ph.R(xi) + ph.C(yj));
        m(i, j) = std::polar(bx(xi) * by(yj) * 0.01, phase);
      }
    CHECK((op.dense() - m).cwiseAbs().maxCoeff() < 1e-12);
    const auto v = random_vec(41, 8);
    std::vector<cplx> av, atw;
    op.apply(v, av);
    CHECK((as_eigen(av) - m * as_eigen(v)).norm() < 1e-12);
    const auto w = random_vec(70, 9);
    op.apply_adjoint(w, atw);
    CHECK((as_eigen(atw) - m.adjoint() * as_eigen(w)).norm() < 1e-12);
  }
  CHECK_THROWS_AS(CorrelationOperator(ph, bx, by, 1.0, x, Grid1{0.0, 0.02, 10}), InvalidArgument);
  ph.sigma = 0;
  CHECK_THROWS_AS(CorrelationOperator(ph, bx, by, 1.0, x, y), InvalidArgument);
}

TEST_CASE("structured operator reports its phase resolution") {
  CorrelationPhase ph;
  ph.K = [](double z) { return z * z * z / 3.0; };
  auto one = [](double) { return 1.0; };
  const Grid1 g = Grid1::cells(-1.0, 1.0, 100);
  CorrelationOperator coarse(ph, one, one, 2000.0, g, g);
  CHECK_THROWS_AS(require_resolution(coarse), ResolutionError);
  CorrelationOperator fine(ph, one, one, 10.0, g, g);
  CHECK_NOTHROW(require_resolution(fine));
  // Largest K-increment is at z = -2 + dz / 2 .. -2 + 3 dz / 2.
  const double dz = g.spacing;
  const double z0 = 2 * g.origin;
  CHECK(fine.max_phase_step() == doctest::Approx(10.0 * std::abs(ph.K(z0 + dz) - ph.K(z0))).epsilon(1e-12));
  CHECK(benchmark_operator(BenchmarkPhase::Cubic, 512.0, 0.5)->max_phase_step() <= 2 * kPi / 6);
}

TEST_CASE("bilinear phase norm approaches sqrt(2 pi / lambda)") {
  // On the plateau of the cutoff the kernel is a rescaled Fourier transform.
  const auto op = benchmark_operator(BenchmarkPhase::Bilinear, 200.0, 0.5);
  const double want = std::sqrt(2 * kPi / 200.0);
  CHECK(std::abs(svd_norm(op->dense()) - want) < 1e-6 * want);
  CHECK(std::abs(operator_norm(*op, {1e-10, 100000}).norm - want) < 1e-5 * want);
}

TEST_CASE("operator norms decay with lambda") {
  const std::vector<double> lambdas{16, 32, 64, 128};
  const auto bil = lambda_sweep(BenchmarkPhase::Bilinear, lambdas, {0.5, 6.0, {1e-10, 50000}, 1});
  for (std::size_t k = 1; k < bil.size(); ++k) CHECK(bil[k].value < bil[k - 1].value);
  const auto again = lambda_sweep(BenchmarkPhase::Bilinear, lambdas, {0.5, 6.0, {1e-10, 50000}, 3});
  for (std::size_t k = 0; k < bil.size(); ++k) CHECK(again[k].value == bil[k].value);
}

TEST_CASE("scaling_fit recovers power laws") {
  std::vector<ScalingSample> s;
  for (int k = 0; k < 6; ++k) {
    const double lam = std::pow(2.0, 4 + k);
    s.push_back({lam, 3.0 * std::pow(lam, -0.5), 10, 10});
  }
  const auto fit = scaling_fit(s, -0.5, 0.01);
  CHECK(fit.slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0));
  CHECK(fit.pass);
  CHECK_FALSE(scaling_fit(s, -1.0 / 3, 0.03).pass);

  std::vector<ScalingSample> noisy = s;
  noisy[2].value *= 1.1;
  const auto f2 = scaling_fit(noisy, -0.5, 0.1);
  CHECK(f2.r2 < 1.0);
  CHECK(f2.r2 > 0.9);

  CHECK_THROWS_AS(scaling_fit({s.begin(), s.begin() + 3}, 0, 1), InvalidArgument);
  noisy[1].value = 0.0;
  CHECK_THROWS_AS(scaling_fit(noisy, 0, 1), InvalidArgument);

  std::ostringstream os;
  write_sweep_csv(os, s);
  CHECK(os.str().rfind("lambda_or_h,norm,rows,cols\n16,", 0) == 0);
}

TEST_CASE("Z phase of the model symbol") {
  const ReducedSymbol a(builtin_symbol("model-fold", 2), 0.0);
  const ZPhase z(a, 2.0, 0.1);
  CHECK(z.split_error() < 1e-8);
  CHECK(z.hj_residual() < 1e-6);
  auto exact = [](double t, double nu) { return (std::pow(nu + t, 3) - std::pow(nu, 3)) / 3.0; };
  for (double t : {-0.95, -0.3, 0.0, 0.41, 0.9})
    for (double nu : {-0.9, -0.05, 0.33, 0.9}) CHECK(std::abs(z.phi(t, nu) - exact(t, nu)) < 1e-9);
  for (double v : {-1.9, -0.7, 0.0, 1.23, 2.0}) CHECK(std::abs(z.K(v) - v * v * v / 3.0) < 1e-9);
  for (double v : {-1.0, 0.2, 0.77}) CHECK(std::abs(z.C(v) + v * v * v / 3.0) < 1e-9);
  CHECK_THROWS_AS(z.K(2.5), DomainError);

  ZOptions o;
  o.support = 0.5;
  const double h = 1.0 / 32;
  const auto op = build_z_operator(z, h, o);
  CHECK(op->max_phase_step() <= 2 * kPi / 6);
  const Eigen::MatrixXcd dense = build_z_dense(z, h, 0.5, static_cast<int>(op->rows())).normalized();
  CHECK((op->dense() - dense).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("Z phase rejects phases without the correlation split") {
  const ReducedSymbol a(parse_symbol("xi1 - x2 - xi2^2 - x1*xi2^2", 2), 0.0);
  CHECK_THROWS_AS(ZPhase(a, 1.0, 0.1), DomainError);
  const ReducedSymbol a3(builtin_symbol("model-fold", 3), 0.0);
  CHECK_THROWS_AS(ZPhase(a3, 1.0, 0.1), DimensionError);
}
