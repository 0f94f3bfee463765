#ifndef SADDLELAB_DA_MAPS_HPP
#define SADDLELAB_DA_MAPS_HPP

#include <complex>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "saddlelab/profiles.hpp"
#include "saddlelab/torus_linear.hpp"

namespace saddlelab {

struct SupportBall {
  Vec center;  // torus point
  double radius = 0.0;
};

// An evaluatable torus diffeomorphism with lift evaluation and analytic
// Jacobian. Lift evaluation is equivariant: eval_lift(x + m) =
// eval_lift(x) + A m for integer m. Outside every support ball the map equals
// its linear part. Immutable and safe to call concurrently.
class TorusMap {
 public:
  virtual ~TorusMap() = default;

  virtual int n() const = 0;
  virtual Vec eval_lift(const Vec& x) const = 0;
  virtual Mat jacobian(const Vec& x) const = 0;
  virtual const Mat& linear_matrix() const = 0;
  virtual const std::vector<SupportBall>& supports() const = 0;
  // Integer lattice data when the map lives on the torus; nullptr for plain
  // R^n models.
  virtual const ToralAutomorphism* lattice() const { return nullptr; }

  Vec eval(const Vec& torus_pt) const {
    return project_point(eval_lift(torus_pt));
  }
};

using MapPtr = std::shared_ptr<const TorusMap>;

// Local displacement in model coordinates; value and jacobian vanish outside
// a ball of support_radius around the model origin.
class LocalField {
 public:
  virtual ~LocalField() = default;
  virtual int dim() const = 0;
  virtual Vec value(const Vec& u) const = 0;
  virtual Mat jacobian(const Vec& u) const = 0;
  virtual double support_radius() const = 0;
};

// Lemma 4.2 planar mix acting on model coordinates (i1, i2), optionally
// damped by a cutoff in the squared norm of the remaining coordinates
// (the Lemma 4.4 embedding trick).
class PlanarMixField : public LocalField {
 public:
  PlanarMixField(int dim, int i1, int i2, double lambda, double mu, double rho,
                 double l, double r1, std::optional<SmoothCutoff> w_cut);

  int dim() const override { return dim_; }
  Vec value(const Vec& u) const override;
  Mat jacobian(const Vec& u) const override;
  double support_radius() const override;

  double lambda() const { return lambda_; }
  double mu() const { return mu_; }
  double r1() const { return r1_; }
  const DecreasingProfile& beta1() const { return beta1_; }
  const DecreasingProfile& beta2() const { return beta2_; }
  std::vector<double> kink_radii() const;  // squared-distance kinks

 private:
  int dim_, i1_, i2_;
  double lambda_, mu_, r1_;
  DecreasingProfile beta1_, beta2_;
  std::optional<SmoothCutoff> w_cut_;
};

// Lemma 4.6 contracting (or mirrored expanding) center construction on a
// contiguous factor of the model coordinates, blended with the radial map
// inside the plateau and optionally damped over the complement.
class CenterFlattenField : public LocalField {
 public:
  // radial_sign +1: contracting factor, target in (max eigenvalue, 1), radial
  // map (1 - r) x. radial_sign -1: expanding factor, target in (1, min
  // eigenvalue), radial map (1 + r) x.
  CenterFlattenField(int dim, int c0, std::vector<double> eigs, double target,
                     double eps_r, double delta_r,
                     std::optional<SmoothCutoff> w_cut);

  int dim() const override { return dim_; }
  Vec value(const Vec& u) const override;
  Mat jacobian(const Vec& u) const override;
  double support_radius() const override;

  const DecreasingProfile& beta() const { return beta_; }
  const SmoothCutoff& blend() const { return blend_; }
  double target() const { return target_; }
  double radial_sign() const { return sign_; }
  // alpha(r) of the radial regime: g(x) = alpha(r) x for r <= delta/2 zone
  double alpha(double r) const;
  double delta_r() const { return delta_r_; }
  std::vector<double> kink_radii() const;

 private:
  int dim_, c0_, k_;
  std::vector<double> eigs_;
  double target_, sign_, eps_r_, delta_r_;
  DecreasingProfile beta_;
  SmoothCutoff blend_;
  std::optional<SmoothCutoff> w_cut_;
};

struct Patch {
  Vec center;  // torus point (or model origin for non-periodic maps)
  Mat Q;       // orthonormal model frame, columns = model axes in ambient
  std::shared_ptr<const LocalField> field;
};

// Linear part plus finitely many local patches; the general carrier for the
// derived-from-Anosov constructions.
class DerivedMap : public TorusMap {
 public:
  DerivedMap(Mat A, std::optional<ToralAutomorphism> lattice,
             std::vector<Patch> patches, bool periodic);

  int n() const override { return static_cast<int>(A_.rows()); }
  Vec eval_lift(const Vec& x) const override;
  Mat jacobian(const Vec& x) const override;
  const Mat& linear_matrix() const override { return A_; }
  const std::vector<SupportBall>& supports() const override {
    return supports_;
  }
  const ToralAutomorphism* lattice() const override {
    return lattice_ ? &*lattice_ : nullptr;
  }
  const std::vector<Patch>& patches() const { return patches_; }

 private:
  Mat A_;
  std::optional<ToralAutomorphism> lattice_;
  std::vector<Patch> patches_;
  std::vector<SupportBall> supports_;
  bool periodic_;
};

std::shared_ptr<const DerivedMap> make_linear_map(const ToralAutomorphism& A);

// Lemma 4.2 model on R^2 with linear part diag(lambda, mu).
std::shared_ptr<const DerivedMap> mane_mix_2d(double lambda, double mu,
                                              double rho, double l, double r1,
                                              double eps);

// Lemma 4.4 model on R^4 with linear part diag(lambda, mu, lambda_ss, mu_uu),
// planar mix on (x, y) damped by a cutoff in w = z^2 + t^2 supported in
// [0, delta_w]. Profile radii default to eps^2-scaled values; pass rho, l, r1
// to pin them (they must match a companion mane_mix_2d for restriction
// checks).
std::shared_ptr<const DerivedMap> embed_center_4d(
    double lambda_ss, double lambda, double mu, double mu_uu, double eps,
    double delta_w, double rho = -1.0, double l = -1.0, double r1 = -1.0);

// Lemma 4.6 model on R^k: plateau-flattened contraction blended with the
// radial map. eps is in distance units, delta in squared-distance units.
std::shared_ptr<const DerivedMap> contracting_center_kd(
    const std::vector<double>& eigenvalues, double lambda, double eps,
    double delta);

// Per-fixed-point construction choices for general_da.
struct PlanarMixChoice {
  Vec point;
  double rho = 0.0, l = 0.0, r1 = 0.0;
  double w_out = 0.0;  // cutoff outer threshold in squared distance; 0 = auto
};
struct CenterFlattenChoice {
  Vec point;
  enum class Factor { ws, wu } factor = Factor::ws;
  double target = 0.0;  // 0 = auto midpoint between extreme modulus and 1
  double eps_r = 0.0, delta_r = 0.0;  // squared-distance units; 0 = auto
  double w_out = 0.0;
};
using SurgeryChoice = std::variant<PlanarMixChoice, CenterFlattenChoice>;

std::shared_ptr<const DerivedMap> general_da(
    const ToralAutomorphism& A, const std::vector<SurgeryChoice>& choices);

// Franks-style local surgery: blends the base map toward the affine map with
// derivative B at the fixed point p. The C0/C1 deviation from the base is
// measured over the surgery ball and stored.
struct SurgerySpec {
  Vec point;     // fixed point of the base map (torus coordinates)
  Mat B;         // target jacobian at the point, ambient coordinates
  double radius = 0.0;
  double eta = 0.0;  // declared C1 deviation budget
};

class SurgeredMap : public TorusMap {
 public:
  SurgeredMap(MapPtr base, SurgerySpec spec);

  int n() const override { return base_->n(); }
  Vec eval_lift(const Vec& x) const override;
  Mat jacobian(const Vec& x) const override;
  const Mat& linear_matrix() const override { return base_->linear_matrix(); }
  const std::vector<SupportBall>& supports() const override {
    return supports_;
  }
  const ToralAutomorphism* lattice() const override {
    return base_->lattice();
  }

  double measured_c0() const { return measured_c0_; }
  double measured_c1() const { return measured_c1_; }
  const SurgerySpec& spec() const { return spec_; }

 private:
  MapPtr base_;
  SurgerySpec spec_;
  SmoothCutoff blend_;  // in squared distance from the point
  std::vector<SupportBall> supports_;
  double measured_c0_ = 0.0, measured_c1_ = 0.0;
};

std::shared_ptr<const SurgeredMap> franks_surgery(MapPtr base,
                                                  const SurgerySpec& spec);

// k-fold composition, for power-coherence checks.
class IteratedMap : public TorusMap {
 public:
  IteratedMap(MapPtr base, int k);
  int n() const override { return base_->n(); }
  Vec eval_lift(const Vec& x) const override;
  Mat jacobian(const Vec& x) const override;
  const Mat& linear_matrix() const override { return Ak_; }
  const std::vector<SupportBall>& supports() const override {
    return base_->supports();
  }
  const ToralAutomorphism* lattice() const override {
    return lattice_ ? &*lattice_ : nullptr;
  }
  int power() const { return k_; }

 private:
  MapPtr base_;
  int k_;
  Mat Ak_;
  std::optional<ToralAutomorphism> lattice_;
};

// Additive bump-field perturbation of a base map (perturbation sweeps).
struct BumpDisplacement {
  Vec center;     // torus point
  Vec direction;  // unit vector
  double amplitude = 0.0;
  SmoothCutoff cut;  // in squared distance
};

class PerturbedMap : public TorusMap {
 public:
  PerturbedMap(MapPtr base, std::vector<BumpDisplacement> bumps);
  int n() const override { return base_->n(); }
  Vec eval_lift(const Vec& x) const override;
  Mat jacobian(const Vec& x) const override;
  const Mat& linear_matrix() const override { return base_->linear_matrix(); }
  const std::vector<SupportBall>& supports() const override {
    return supports_;
  }
  const ToralAutomorphism* lattice() const override {
    return base_->lattice();
  }

 private:
  MapPtr base_;
  std::vector<BumpDisplacement> bumps_;
  std::vector<SupportBall> supports_;
};

// Inverse through Newton iteration on the lift, seeded by A^{-1} y.
Vec newton_inverse_lift(const TorusMap& f, const Vec& y, double tol = 1e-12,
                        int max_iter = 50);
Vec newton_inverse_torus(const TorusMap& f, const Vec& y_torus,
                         double tol = 1e-12, int max_iter = 50);

struct FixedPointIndex {
  int index = 0;  // eigenvalue moduli < 1
  bool warning = false;  // some modulus within 1e-6 of 1
  bool complex_center = false;
  std::vector<std::complex<double>> eigenvalues;
  double min_dist_to_unit = 0.0;
};

FixedPointIndex fixed_point_index(const TorusMap& map, const Vec& p,
                                  double fix_tol = 1e-9);

// lambda_s / lambda_u from the linear strong moduli; center interval measured
// over a grid of center-restricted jacobians.
PHBounds measure_ph_bounds(const TorusMap& map, int per_axis = 0);

// max over random samples of |jacobian - finite difference| / scale.
double jacobian_fd_error(const TorusMap& map, int samples, Rng& rng,
                         double step = 1e-6);

}  // namespace saddlelab

#endif
