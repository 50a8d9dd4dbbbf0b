#pragma once

// Restriction exponents and the explicit Airy-type quasimode of the model
// operator hD_t - r - h^2 D_r^2 - h^2 D_y'^2, with restricted L^p norms on
// the hypersurface r = 0 and their scaling in h.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qml/cutoff.hpp"
#include "qml/oscillatory.hpp"

namespace qml {

struct Exponents {
  double delta = 0.0;
  std::optional<double> delta_tilde;  // absent past the critical exponent
};

/// 2n / (n - 1).
double critical_exponent(int n);

/// delta(n, p) and delta~(n, p). p may be +infinity. Throws InvalidArgument
/// for n < 2 or p < 2.
Exponents exponents(int n, double p);

/// (n - 1)/3 - (2n - 3)/(3p): the growth rate of the quasimode's restricted
/// L^p norm on its concentration region, defined for every p >= 2.
double concentration_exponent(int n, double p);

enum class ResidualMethod { Spectral, FourthOrder };

struct QuasimodeOptions {
  double epsilon = 0.1;
  double points_per_period = 6.0;
  int min_tau_points = 64;
  int min_eta_points = 32;
  int region_t_points = 33;
  int region_y_points = 17;
  std::size_t memory_budget = std::size_t{1} << 24;  // Fourier-grid nodes
  ResidualMethod residual = ResidualMethod::Spectral;
};

/// [t_lo, t_hi] x B(0, y_radius) inside r = 0.
struct SliceRegion {
  double t_lo = 0.0;
  double t_hi = 0.0;
  double y_radius = 0.0;
};

struct QuasimodeBundle {
  int n = 2;
  double h = 0.0;
  double epsilon = 0.1;
  GridFn f;           // axes tau, eta'_1..eta'_{n-2}, nu
  GridFn u;           // axes t, y'_1..y'_{n-2}, r: chi(|x|) F_h^{-1} f
  GridFn restricted;  // R_H u at region targets: axes t, y'.., r = {0}
  SliceRegion region;
  double f_l2 = 0.0;
  double u_l2 = 0.0;
  double residual = 0.0;
};

/// f = h^{-(n-2)/6 - 1/3} chi(|nu|) chi(h^{-2/3}|tau|) chi(h^{-1/3}|eta'|)
/// e^{i psi / h} with psi = nu^3/3 - nu (tau - |eta'|^2), which solves
/// (tau + h D_nu - nu^2 - |eta'|^2) g = 0 exactly. Throws ResourceError when
/// the Fourier grid exceeds the memory budget.
QuasimodeBundle build_model_quasimode(int n, double h, const QuasimodeOptions& opt = {});

/// || (tau + h D_nu - nu^2 - |eta'|^2) f ||_2 for f on axes (tau, eta'.., nu).
/// The fourth-order variant skips two nodes at each end of the nu axis.
double fourier_residual(const GridFn& f, double h, ResidualMethod method = ResidualMethod::Spectral);
double fourier_residual(const QuasimodeBundle& b, ResidualMethod method = ResidualMethod::Spectral);

/// L^p norm of u restricted to the r = 0 node plane (last axis) over the
/// region. Trapezoid weights in t, cell weights in y'. p = inf gives the
/// max modulus. Throws InvalidArgument when r = 0 is not a node or the
/// region holds no nodes.
double restrict_and_norm(const GridFn& u, const SliceRegion& region, double p);

struct QuasimodeSample {
  double h = 0.0;
  double f_l2 = 0.0;
  double u_l2 = 0.0;
  double residual = 0.0;
  double l2_restricted = 0.0;
  std::vector<double> norms;  // per requested p
  double ceiling_ratio = 0.0;  // ||R_H u||_2 h^{1/2} / ||u||_2
  std::size_t fourier_nodes = 0;
};

struct QuasimodeExperiment {
  int n = 2;
  double epsilon = 0.1;
  std::vector<double> ps;
  std::vector<QuasimodeSample> samples;
  std::vector<ScalingFit> fits;  // per p, target -concentration_exponent
  std::vector<bool> sharp;       // target equals -delta~ from the theorem
  ScalingFit residual_fit;
  double residual_min_slope = 0.9;
  bool residual_ok = false;
  double ceiling_constant = 0.0;
  double ceiling_slope = 0.0;
  bool ceiling_ok = false;
  bool f_bounded = false;
  bool u_stable = false;

  bool passed() const;
  /// Empty when passed.
  std::string failure_reason() const;
};

QuasimodeExperiment h_scaling_experiment(int n, const std::vector<double>& ps, const std::vector<double>& hs,
                                         const QuasimodeOptions& opt = {}, double margin = 0.05, int jobs = 1);

/// Columns h, p, restricted_norm, u_l2, f_l2, residual.
void write_quasimode_csv(std::ostream& out, const QuasimodeExperiment& ex);

/// Python/matplotlib script plotting norm against h on log axes with the
/// target slopes, reading `csv_name`.
void write_plot_script(std::ostream& out, const std::string& csv_name, const QuasimodeExperiment& ex);

}  // namespace qml
