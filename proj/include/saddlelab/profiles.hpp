#ifndef SADDLELAB_PROFILES_HPP
#define SADDLELAB_PROFILES_HPP

#include <string>
#include <vector>

#include "saddlelab/common.hpp"
#include "saddlelab/errors.hpp"

#include "json.hpp"

namespace saddlelab {

// Decreasing scalar profile beta with beta(0) = b, beta = 0 beyond
// support_end, and beta(t) = b - int_0^t psi. All values come from closed-form
// antiderivatives per piece; there is no quadrature in the evaluation path.
//
// Kinds:
//   trapezoid: psi is the piecewise-linear trapezoid bump with slope
//     b/(rho(rho+l)) on [0,rho], plateau b/(rho+l), symmetric descent; the
//     full mass int psi = b lands exactly at 2 rho + l. sup |beta'(t)| t = b.
//   plateau: beta == b on [0, delta], decays with |beta'(t)| t <= c for a
//     stored c, support [0, eps]. Feasible for small delta because the
//     c/t envelope has divergent integral.
//   generic: plateau machinery with the derivative bound tied to eps itself.
struct DecreasingProfile {
  enum class Kind { generic, trapezoid, plateau };

  Kind kind = Kind::trapezoid;
  double b = 0.0;
  double support_end = 0.0;
  double deriv_bound = 0.0;  // sup over t of |derivative(t)| * t
  double plateau_end = 0.0;  // value == b on [0, plateau_end]

  // trapezoid parameters
  double rho = 0.0, l = 0.0;
  // plateau-family parameters
  double ctilde = 0.0, eps = 0.0, delta = 0.0, t3 = 0.0;
  double lambda = 0.0, lambda1 = 0.0;
  int k = 0;

  double value(double t) const;
  double derivative(double t) const;  // beta' = -psi
  double bump(double t) const;        // psi
  std::vector<double> kink_radii() const;

  nlohmann::json to_json() const;
  static DecreasingProfile from_json(const nlohmann::json& j);
  static std::string kind_name(Kind k);
};

DecreasingProfile make_trapezoid_profile(double b, double rho, double l);

// Lemma-4.6 style profile: mass 1, flat on [0, delta], support [0, eps],
// |beta'(t)| t <= c with c strictly below (1-lambda)/(k(lambda-lambda1)) and
// below eps. Throws InfeasiblePlateau carrying the largest feasible delta.
DecreasingProfile make_plateau_profile(double lambda, double lambda1, int k,
                                       double eps, double delta);

// Same construction against an explicit cap on sup |beta'(t)| t.
DecreasingProfile make_plateau_profile_capped(double c_cap, double eps,
                                              double delta);

// Largest delta for which the capped plateau profile is feasible.
double plateau_feasible_delta(double c_cap, double eps);

// Lemma-4.1 style profile: value b at 0, support [0, eps], |beta'(t)| t <= eps.
DecreasingProfile make_generic_profile(double b, double eps);

// C^1 monotone cutoff, exactly 1 on [0, inner] and 0 on [outer, inf).
struct SmoothCutoff {
  double inner = 0.0, outer = 0.0;

  double value(double t) const;
  double derivative(double t) const;

  nlohmann::json to_json() const;
  static SmoothCutoff from_json(const nlohmann::json& j);
};

SmoothCutoff make_cutoff(double inner, double outer);

// Adaptive Simpson quadrature; test/self-check use only.
double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double tol);

}  // namespace saddlelab

#endif
