#include "saddlelab/profiles.hpp"

#include <algorithm>
#include <cmath>

namespace saddlelab {

namespace {

// Mass of the plateau-family bump with unit c: the ramp on [delta, 2 delta]
// contributes 1/4, the descent from 3 eps/4 contributes 1/6, the c/t stretch
// contributes log(3 eps / (8 delta)).
double plateau_mass_factor(double eps, double delta) {
  return 5.0 / 12.0 + std::log(3.0 * eps / (8.0 * delta));
}

DecreasingProfile make_plateau_family(DecreasingProfile::Kind kind, double b,
                                      double eps, double delta,
                                      double ctilde) {
  DecreasingProfile p;
  p.kind = kind;
  p.b = b;
  p.eps = eps;
  p.delta = delta;
  p.ctilde = ctilde;
  p.t3 = 0.75 * eps;
  p.support_end = eps;
  p.plateau_end = delta;
  p.deriv_bound = ctilde;
  return p;
}

}  // namespace

std::string DecreasingProfile::kind_name(Kind k) {
  switch (k) {
    case Kind::generic:
      return "generic";
    case Kind::trapezoid:
      return "trapezoid";
    case Kind::plateau:
      return "plateau";
  }
  return "?";
}

double DecreasingProfile::bump(double t) const {
  if (t < 0.0) return 0.0;
  if (kind == Kind::trapezoid) {
    double c = b / (rho * (rho + l));
    if (t <= rho) return c * t;
    if (t < rho + l) return b / (rho + l);
    double end = 2.0 * rho + l;
    if (t <= end) return c * (end - t);
    return 0.0;
  }
  // plateau family
  if (t <= delta || t >= eps) return 0.0;
  if (t <= 2.0 * delta) {
    double m = ctilde / (2.0 * delta * delta);
    return m * (t - delta);
  }
  if (t <= t3) return ctilde / t;
  double K = 16.0 * ctilde / (3.0 * eps * eps);
  return K * (eps - t);
}

double DecreasingProfile::value(double t) const {
  if (t <= 0.0) return b;
  if (kind == Kind::trapezoid) {
    double c = b / (rho * (rho + l));
    if (t <= rho) return b - c * t * t / 2.0;
    if (t <= rho + l) return b - (b / (rho + l)) * (t - rho / 2.0);
    double end = 2.0 * rho + l;
    if (t < end) return c * (end - t) * (end - t) / 2.0;
    return 0.0;
  }
  if (t <= delta) return b;
  if (t >= eps) return 0.0;
  if (t <= 2.0 * delta) {
    double m = ctilde / (2.0 * delta * delta);
    return b - m * (t - delta) * (t - delta) / 2.0;
  }
  if (t <= t3) return b - ctilde / 4.0 - ctilde * std::log(t / (2.0 * delta));
  double K = 16.0 * ctilde / (3.0 * eps * eps);
  return K * (eps - t) * (eps - t) / 2.0;
}

double DecreasingProfile::derivative(double t) const { return -bump(t); }

std::vector<double> DecreasingProfile::kink_radii() const {
  if (kind == Kind::trapezoid) return {0.0, rho, rho + l, 2.0 * rho + l};
  return {0.0, delta, 2.0 * delta, t3, eps};
}

nlohmann::json DecreasingProfile::to_json() const {
  nlohmann::json j;
  j["kind"] = kind_name(kind);
  if (kind == Kind::trapezoid) {
    j["b"] = format_double17(b);
    j["rho"] = format_double17(rho);
    j["l"] = format_double17(l);
  } else if (kind == Kind::plateau) {
    j["eps"] = format_double17(eps);
    j["delta"] = format_double17(delta);
    j["c"] = format_double17(ctilde);
    if (k > 0) {
      j["lambda"] = format_double17(lambda);
      j["lambda1"] = format_double17(lambda1);
      j["k"] = k;
    }
  } else {
    j["b"] = format_double17(b);
    j["eps"] = format_double17(eps);
  }
  return j;
}

DecreasingProfile DecreasingProfile::from_json(const nlohmann::json& j) {
  std::string kind = j.at("kind").get<std::string>();
  auto num = [&](const char* key) {
    return std::stod(j.at(key).get<std::string>());
  };
  if (kind == "trapezoid")
    return make_trapezoid_profile(num("b"), num("rho"), num("l"));
  if (kind == "plateau") {
    if (j.contains("k"))
      return make_plateau_profile(num("lambda"), num("lambda1"),
                                  j.at("k").get<int>(), num("eps"),
                                  num("delta"));
    double ctilde = num("c");
    return make_plateau_profile_capped(ctilde * (1.0 + 1e-12), num("eps"),
                                       num("delta"));
  }
  if (kind == "generic") return make_generic_profile(num("b"), num("eps"));
  throw BadGeometry("unknown profile kind: " + kind);
}

DecreasingProfile make_trapezoid_profile(double b, double rho, double l) {
  if (rho <= 0.0 || l <= 0.0) throw BadGeometry("trapezoid needs rho, l > 0");
  if (b <= 0.0) throw BadGeometry("trapezoid needs b > 0");
  DecreasingProfile p;
  p.kind = DecreasingProfile::Kind::trapezoid;
  p.b = b;
  p.rho = rho;
  p.l = l;
  p.support_end = 2.0 * rho + l;
  p.plateau_end = 0.0;
  p.deriv_bound = b;  // sup psi(t) t, attained at t = rho + l
  return p;
}

double plateau_feasible_delta(double c_cap, double eps) {
  double largest = (3.0 * eps / 8.0) * std::exp(5.0 / 12.0 - 1.0 / c_cap);
  return std::min(largest, 0.999 * 3.0 * eps / 8.0);
}

DecreasingProfile make_plateau_profile_capped(double c_cap, double eps,
                                              double delta) {
  if (!(c_cap > 0.0)) throw BadGeometry("derivative cap must be positive");
  if (!(0.0 < delta && delta < eps)) throw BadGeometry("need 0 < delta < eps");
  double largest = plateau_feasible_delta(c_cap, eps);
  if (delta >= 3.0 * eps / 8.0)
    throw InfeasiblePlateau("plateau end must stay below 3 eps / 8", largest);
  double ctilde = 1.0 / plateau_mass_factor(eps, delta);
  if (ctilde >= c_cap)
    throw InfeasiblePlateau(
        "requested plateau too wide for the derivative bound", largest);
  return make_plateau_family(DecreasingProfile::Kind::plateau, 1.0, eps, delta,
                             ctilde);
}

DecreasingProfile make_plateau_profile(double lambda, double lambda1, int k,
                                       double eps, double delta) {
  if (!(0.0 < lambda1 && lambda1 <= lambda && lambda < 1.0))
    throw BadGeometry("need 0 < lambda1 <= lambda < 1");
  if (k < 1) throw BadGeometry("k must be >= 1");

  double bound = (lambda > lambda1)
                     ? (1.0 - lambda) / (k * (lambda - lambda1))
                     : eps;  // lambda == lambda1 leaves only the c < eps cap
  double cmax = std::min(bound, eps) * (1.0 - 1e-9);
  auto p = make_plateau_profile_capped(cmax, eps, delta);
  p.lambda = lambda;
  p.lambda1 = lambda1;
  p.k = k;
  return p;
}

DecreasingProfile make_generic_profile(double b, double eps) {
  if (b <= 0.0 || eps <= 0.0) throw BadGeometry("need b, eps > 0");
  double ctilde = std::min(0.9 * eps, b / (5.0 / 12.0 + 1e-3));
  double delta = (3.0 * eps / 8.0) * std::exp(5.0 / 12.0 - b / ctilde);
  auto p = make_plateau_family(DecreasingProfile::Kind::generic, b, eps, delta,
                               ctilde);
  p.deriv_bound = eps;  // claimed Lemma-4.1 bound; actual sup is ctilde <= 0.9 eps
  return p;
}

double SmoothCutoff::value(double t) const {
  if (t <= inner) return 1.0;
  if (t >= outer) return 0.0;
  double u = (t - inner) / (outer - inner);
  return 1.0 - u * u * (3.0 - 2.0 * u);
}

double SmoothCutoff::derivative(double t) const {
  if (t <= inner || t >= outer) return 0.0;
  double u = (t - inner) / (outer - inner);
  return -6.0 * u * (1.0 - u) / (outer - inner);
}

nlohmann::json SmoothCutoff::to_json() const {
  nlohmann::json j;
  j["inner"] = format_double17(inner);
  j["outer"] = format_double17(outer);
  return j;
}

SmoothCutoff SmoothCutoff::from_json(const nlohmann::json& j) {
  return make_cutoff(std::stod(j.at("inner").get<std::string>()),
                     std::stod(j.at("outer").get<std::string>()));
}

SmoothCutoff make_cutoff(double inner, double outer) {
  if (!(0.0 < inner && inner < outer))
    throw BadGeometry("cutoff needs 0 < inner < outer");
  return SmoothCutoff{inner, outer};
}

namespace {
double simpson(const std::function<double(double)>& f, double a, double b,
               double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive(const std::function<double(double)>& f, double a, double b,
                double fa, double fm, double fb, double whole, double tol,
                int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson(f, a, m, fa, flm, fm);
  double right = simpson(f, m, b, fm, frm, fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}
}  // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double tol) {
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = simpson(f, a, b, fa, fm, fb);
  return adaptive(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace saddlelab
