#include "saddlelab/da_maps.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace saddlelab {

namespace {

double squared_norm_subset(const Vec& u, int skip0, int skip1) {
  double w = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j)
    if (j != skip0 && j != skip1) w += u[j] * u[j];
  return w;
}

}  // namespace

// ---------------------------------------------------------------------------
// PlanarMixField

PlanarMixField::PlanarMixField(int dim, int i1, int i2, double lambda,
                               double mu, double rho, double l, double r1,
                               std::optional<SmoothCutoff> w_cut)
    : dim_(dim),
      i1_(i1),
      i2_(i2),
      lambda_(lambda),
      mu_(mu),
      r1_(r1),
      beta1_([&] {
        if (!(0.0 < lambda && lambda < 1.0 && mu > 1.0))
          throw NotHyperbolicLinearPart("planar mix needs 0 < lambda < 1 < mu");
        if (!(2.0 * rho + l < r1))
          throw BadGeometry("planar mix needs 2 rho + l < r1");
        return make_trapezoid_profile(1.0 - lambda, rho, l);
      }()),
      beta2_(make_trapezoid_profile(mu - 1.0, rho, l)),
      w_cut_(std::move(w_cut)) {}

Vec PlanarMixField::value(const Vec& u) const {
  Vec out = Vec::Zero(dim_);
  double r = u[i1_] * u[i1_] + u[i2_] * u[i2_];
  if (r >= beta1_.support_end) return out;
  double rw = 1.0;
  if (w_cut_) {
    double w = squared_norm_subset(u, i1_, i2_);
    rw = w_cut_->value(w);
    if (rw == 0.0) return out;
  }
  out[i1_] = rw * beta1_.value(r) * u[i1_];
  out[i2_] = -rw * beta2_.value(r) * u[i2_];
  return out;
}

Mat PlanarMixField::jacobian(const Vec& u) const {
  Mat J = Mat::Zero(dim_, dim_);
  double x = u[i1_], y = u[i2_];
  double r = x * x + y * y;
  if (r >= beta1_.support_end) return J;
  double rw = 1.0, drw = 0.0, w = 0.0;
  if (w_cut_) {
    w = squared_norm_subset(u, i1_, i2_);
    rw = w_cut_->value(w);
    drw = w_cut_->derivative(w);
    if (rw == 0.0 && drw == 0.0) return J;
  }
  double b1 = beta1_.value(r), db1 = beta1_.derivative(r);
  double b2 = beta2_.value(r), db2 = beta2_.derivative(r);
  J(i1_, i1_) = rw * (b1 + 2.0 * x * x * db1);
  J(i1_, i2_) = rw * (2.0 * x * y * db1);
  J(i2_, i1_) = -rw * (2.0 * x * y * db2);
  J(i2_, i2_) = -rw * (b2 + 2.0 * y * y * db2);
  if (w_cut_) {
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      if (j == i1_ || j == i2_) continue;
      J(i1_, j) = b1 * x * drw * 2.0 * u[j];
      J(i2_, j) = -b2 * y * drw * 2.0 * u[j];
    }
  }
  return J;
}

double PlanarMixField::support_radius() const {
  double s = beta1_.support_end;
  if (w_cut_) s += w_cut_->outer;
  return std::sqrt(s);
}

std::vector<double> PlanarMixField::kink_radii() const {
  return beta1_.kink_radii();
}

// ---------------------------------------------------------------------------
// CenterFlattenField

CenterFlattenField::CenterFlattenField(int dim, int c0,
                                       std::vector<double> eigs, double target,
                                       double eps_r, double delta_r,
                                       std::optional<SmoothCutoff> w_cut)
    : dim_(dim),
      c0_(c0),
      k_(static_cast<int>(eigs.size())),
      eigs_(std::move(eigs)),
      target_(target),
      eps_r_(eps_r),
      delta_r_(delta_r),
      beta_([&] {
        bool contracting = target < 1.0;
        for (double e : eigs_) {
          if (contracting && !(0.0 < e && e < target))
            throw BadGeometry("contracting factor needs eigenvalues below target");
          if (!contracting && !(e > target))
            throw BadGeometry("expanding factor needs eigenvalues above target");
        }
        // Derivative bound, mirrored for the expanding case:
        // c < |1 - target| / (k max_i |target - eig_i|).
        double spread = 0.0;
        for (double e : eigs_) spread = std::max(spread, std::abs(target - e));
        double bound = std::abs(1.0 - target) /
                       (static_cast<double>(eigs_.size()) * spread);
        double cmax = std::min(bound, eps_r) * (1.0 - 1e-9);
        return make_plateau_profile_capped(cmax, eps_r, delta_r);
      }()),
      blend_(make_cutoff(delta_r / 2.0, delta_r)),
      w_cut_(std::move(w_cut)) {
  sign_ = (target_ < 1.0) ? 1.0 : -1.0;
}

double CenterFlattenField::alpha(double r) const {
  double rb = blend_.value(r);
  return rb * (1.0 - sign_ * r - target_) + target_;
}

Vec CenterFlattenField::value(const Vec& u) const {
  Vec out = Vec::Zero(dim_);
  double r = 0.0;
  for (int i = 0; i < k_; ++i) r += u[c0_ + i] * u[c0_ + i];
  if (r >= eps_r_) return out;
  double rw = 1.0;
  if (w_cut_) {
    double w = 0.0;
    for (Eigen::Index j = 0; j < u.size(); ++j)
      if (j < c0_ || j >= c0_ + k_) w += u[j] * u[j];
    rw = w_cut_->value(w);
    if (rw == 0.0) return out;
  }
  double b = beta_.value(r), rb = blend_.value(r);
  for (int i = 0; i < k_; ++i) {
    double gi = (1.0 - sign_ * r - eigs_[i]) - b * (target_ - eigs_[i]);
    double Ei = rb * gi + b * (target_ - eigs_[i]);
    out[c0_ + i] = rw * Ei * u[c0_ + i];
  }
  return out;
}

Mat CenterFlattenField::jacobian(const Vec& u) const {
  Mat J = Mat::Zero(dim_, dim_);
  double r = 0.0;
  for (int i = 0; i < k_; ++i) r += u[c0_ + i] * u[c0_ + i];
  if (r >= eps_r_) return J;
  double rw = 1.0, drw = 0.0;
  double wv = 0.0;
  if (w_cut_) {
    for (Eigen::Index j = 0; j < u.size(); ++j)
      if (j < c0_ || j >= c0_ + k_) wv += u[j] * u[j];
    rw = w_cut_->value(wv);
    drw = w_cut_->derivative(wv);
    if (rw == 0.0 && drw == 0.0) return J;
  }
  double b = beta_.value(r), db = beta_.derivative(r);
  double rb = blend_.value(r), drb = blend_.derivative(r);
  for (int i = 0; i < k_; ++i) {
    double ti = target_ - eigs_[i];
    double gi = (1.0 - sign_ * r - eigs_[i]) - b * ti;
    double dgi = -sign_ - db * ti;
    double Ei = rb * gi + b * ti;
    double dEi = drb * gi + rb * dgi + db * ti;
    for (int j = 0; j < k_; ++j) {
      double v = u[c0_ + i] * dEi * 2.0 * u[c0_ + j];
      if (i == j) v += Ei;
      J(c0_ + i, c0_ + j) = rw * v;
    }
    if (w_cut_) {
      for (Eigen::Index j = 0; j < u.size(); ++j) {
        if (j >= c0_ && j < c0_ + k_) continue;
        J(c0_ + i, j) = Ei * u[c0_ + i] * drw * 2.0 * u[j];
      }
    }
  }
  return J;
}

double CenterFlattenField::support_radius() const {
  double s = eps_r_;
  if (w_cut_) s += w_cut_->outer;
  return std::sqrt(s);
}

std::vector<double> CenterFlattenField::kink_radii() const {
  auto ks = beta_.kink_radii();
  ks.push_back(delta_r_ / 2.0);
  ks.push_back(delta_r_);
  return ks;
}

// ---------------------------------------------------------------------------
// DerivedMap

DerivedMap::DerivedMap(Mat A, std::optional<ToralAutomorphism> lattice,
                       std::vector<Patch> patches, bool periodic)
    : A_(std::move(A)),
      lattice_(std::move(lattice)),
      patches_(std::move(patches)),
      periodic_(periodic) {
  for (const auto& p : patches_)
    supports_.push_back({p.center, p.field->support_radius()});
}

Vec DerivedMap::eval_lift(const Vec& x) const {
  Vec out = A_ * x;
  for (const auto& p : patches_) {
    Vec off = periodic_ ? torus_offset(x, p.center)
                        : Vec(x - p.center);
    if (off.norm() >= p.field->support_radius()) continue;
    Vec u = p.Q.transpose() * off;
    out += p.Q * p.field->value(u);
  }
  return out;
}

Mat DerivedMap::jacobian(const Vec& x) const {
  Mat J = A_;
  for (const auto& p : patches_) {
    Vec off = periodic_ ? torus_offset(x, p.center)
                        : Vec(x - p.center);
    if (off.norm() >= p.field->support_radius()) continue;
    Vec u = p.Q.transpose() * off;
    J += p.Q * p.field->jacobian(u) * p.Q.transpose();
  }
  return J;
}

std::shared_ptr<const DerivedMap> make_linear_map(const ToralAutomorphism& A) {
  Mat Ad = A.Ad();
  return std::make_shared<DerivedMap>(Ad, A, std::vector<Patch>{}, true);
}

std::shared_ptr<const DerivedMap> mane_mix_2d(double lambda, double mu,
                                              double rho, double l, double r1,
                                              double eps) {
  if (!(r1 < eps)) throw BadGeometry("need r1 < eps");
  Mat A = Mat::Zero(2, 2);
  A(0, 0) = lambda;
  A(1, 1) = mu;
  Patch p;
  p.center = Vec::Zero(2);
  p.Q = Mat::Identity(2, 2);
  p.field = std::make_shared<PlanarMixField>(2, 0, 1, lambda, mu, rho, l, r1,
                                             std::nullopt);
  return std::make_shared<DerivedMap>(A, std::nullopt,
                                      std::vector<Patch>{p}, false);
}

std::shared_ptr<const DerivedMap> embed_center_4d(double lambda_ss,
                                                  double lambda, double mu,
                                                  double mu_uu, double eps,
                                                  double delta_w, double rho,
                                                  double l, double r1) {
  if (!(0.0 < lambda_ss && lambda_ss < lambda && lambda < 1.0 && 1.0 < mu &&
        mu < mu_uu))
    throw NotHyperbolicLinearPart(
        "need 0 < lambda_ss < lambda < 1 < mu < mu_uu");
  double s_r = eps * eps / 2.0;
  if (delta_w <= 0.0) delta_w = s_r;
  if (s_r + delta_w > eps * eps + 1e-15)
    throw BadGeometry("support exceeds the eps ball");
  if (rho <= 0.0) rho = s_r / 4.0;
  if (l <= 0.0) l = s_r / 4.0;
  if (r1 <= 0.0) r1 = s_r;
  Mat A = Mat::Zero(4, 4);
  A(0, 0) = lambda;
  A(1, 1) = mu;
  A(2, 2) = lambda_ss;
  A(3, 3) = mu_uu;
  Patch p;
  p.center = Vec::Zero(4);
  p.Q = Mat::Identity(4, 4);
  p.field = std::make_shared<PlanarMixField>(
      4, 0, 1, lambda, mu, rho, l, r1,
      make_cutoff(delta_w / 2.0, delta_w));
  return std::make_shared<DerivedMap>(A, std::nullopt,
                                      std::vector<Patch>{p}, false);
}

std::shared_ptr<const DerivedMap> contracting_center_kd(
    const std::vector<double>& eigenvalues, double lambda, double eps,
    double delta) {
  const int k = static_cast<int>(eigenvalues.size());
  if (k < 1) throw BadGeometry("need at least one eigenvalue");
  for (int i = 1; i < k; ++i)
    if (eigenvalues[i] < eigenvalues[i - 1])
      throw BadGeometry("eigenvalues must be sorted ascending");
  if (!(eigenvalues.back() < lambda && lambda < 1.0))
    throw BadGeometry("need lambda in (max eigenvalue, 1)");
  double eps_r = eps * eps;
  if (!(delta < eps_r)) throw BadGeometry("need delta < eps^2");
  Mat A = Mat::Zero(k, k);
  for (int i = 0; i < k; ++i) A(i, i) = eigenvalues[i];
  Patch p;
  p.center = Vec::Zero(k);
  p.Q = Mat::Identity(k, k);
  p.field = std::make_shared<CenterFlattenField>(k, 0, eigenvalues, lambda,
                                                 eps_r, delta, std::nullopt);
  return std::make_shared<DerivedMap>(A, std::nullopt,
                                      std::vector<Patch>{p}, false);
}

namespace {

const Vec& choice_point(const SurgeryChoice& c) {
  if (std::holds_alternative<PlanarMixChoice>(c))
    return std::get<PlanarMixChoice>(c).point;
  return std::get<CenterFlattenChoice>(c).point;
}

}  // namespace

std::shared_ptr<const DerivedMap> general_da(
    const ToralAutomorphism& A, const std::vector<SurgeryChoice>& choices) {
  const int n = A.n();
  if (n > kMaxMapDim) throw DimensionTooLarge("map dimension above 8");
  Eigen::MatrixXd Qfull = A.full_frame();
  if ((Qfull.transpose() * Qfull - Eigen::MatrixXd::Identity(n, n)).norm() >
      1e-9)
    throw FrameMismatch(
        "invariant frames are not orthonormal; local constructions need a "
        "symmetric linear part");
  Eigen::MatrixXd D = Qfull.transpose() * A.Ad() * Qfull;

  Mat Q(n, n);
  Q = Qfull;

  // verify fixed points and pairwise disjoint supports after building fields
  std::vector<Patch> patches;
  double max_radius = 0.0;
  for (const auto& c : choices) {
    const Vec& pt = choice_point(c);
    Vec img = project_point(Vec(A.Ad() * pt));
    if (torus_distance(img, pt) > 1e-9)
      throw NotAFixedPoint("construction point is not fixed by the linear part");

    Patch patch;
    patch.center = pt;
    patch.Q = Q;

    int dss = A.dims[0], dws = A.dims[1], dwu = A.dims[2];
    if (std::holds_alternative<PlanarMixChoice>(c)) {
      const auto& pm = std::get<PlanarMixChoice>(c);
      if (dws != 1 || dwu != 1)
        throw FrameMismatch("planar mix needs a (1,1) weak splitting");
      int iws = dss, iwu = dss + dws;
      double lam = std::abs(D(iws, iws));
      double mu = std::abs(D(iwu, iwu));
      double w_out = pm.w_out > 0.0 ? pm.w_out : pm.r1;
      std::optional<SmoothCutoff> cut;
      if (n > 2) cut = make_cutoff(w_out / 2.0, w_out);
      patch.field = std::make_shared<PlanarMixField>(
          n, iws, iwu, lam, mu, pm.rho, pm.l, pm.r1, cut);
    } else {
      const auto& cf = std::get<CenterFlattenChoice>(c);
      bool ws = cf.factor == CenterFlattenChoice::Factor::ws;
      int c0 = ws ? dss : dss + dws;
      int k = ws ? dws : dwu;
      if (k < 1) throw FrameMismatch("chosen weak factor is empty");
      std::vector<double> eigs(k);
      for (int i = 0; i < k; ++i) eigs[i] = std::abs(D(c0 + i, c0 + i));
      std::sort(eigs.begin(), eigs.end());
      double target = cf.target;
      if (target <= 0.0)
        target = ws ? 0.5 * (eigs.back() + 1.0) : 0.5 * (1.0 + eigs.front());
      double eps_r = cf.eps_r > 0.0 ? cf.eps_r : 0.01;
      double delta_r = cf.delta_r;
      if (delta_r <= 0.0) {
        double spread = 0.0;
        for (double e : eigs) spread = std::max(spread, std::abs(target - e));
        double bound = std::abs(1.0 - target) / (k * spread);
        double cmax = std::min(bound, eps_r) * (1.0 - 1e-9);
        delta_r = 0.5 * plateau_feasible_delta(cmax, eps_r);
      }
      double w_out = cf.w_out > 0.0 ? cf.w_out : eps_r;
      std::optional<SmoothCutoff> cut;
      if (k < n) cut = make_cutoff(w_out / 2.0, w_out);
      patch.field = std::make_shared<CenterFlattenField>(
          n, c0, eigs, target, eps_r, delta_r, cut);
    }
    max_radius = std::max(max_radius, patch.field->support_radius());
    patches.push_back(std::move(patch));
  }

  for (std::size_t i = 0; i < patches.size(); ++i)
    for (std::size_t j = i + 1; j < patches.size(); ++j)
      if (torus_distance(patches[i].center, patches[j].center) <=
          2.0 * max_radius)
        throw OverlappingSupports("surgery balls are not pairwise disjoint");

  return std::make_shared<DerivedMap>(Mat(A.Ad()), A, std::move(patches),
                                      true);
}

// ---------------------------------------------------------------------------
// SurgeredMap

SurgeredMap::SurgeredMap(MapPtr base, SurgerySpec spec)
    : base_(std::move(base)),
      spec_(std::move(spec)),
      blend_(make_cutoff(spec_.radius * spec_.radius / 4.0,
                         spec_.radius * spec_.radius)) {
  const int n = base_->n();
  Vec fp = base_->eval(spec_.point);
  if (torus_distance(fp, spec_.point) > 1e-9)
    throw NotAFixedPoint("surgery point is not fixed by the base map");
  if (std::abs(spec_.B.determinant()) < 1e-12)
    throw BadGeometry("target jacobian must be invertible");

  supports_ = base_->supports();
  supports_.push_back({spec_.point, spec_.radius});

  // measured deviation over the ball (deterministic sample)
  Rng rng = Rng::stream(0x5eedULL, 17);
  Mat Jp = base_->jacobian(spec_.point);
  double c0 = 0.0, c1 = 0.0;
  for (int s = 0; s < 512; ++s) {
    Vec off = rng.in_ball(n, spec_.radius);
    Vec x = project_point(Vec(spec_.point + off));
    Vec d = eval_lift(x) - base_->eval_lift(x);
    c0 = std::max(c0, d.norm());
    Mat dj = jacobian(x) - base_->jacobian(x);
    c1 = std::max(c1, dj.norm());
  }
  measured_c0_ = c0;
  measured_c1_ = std::max(c1, (spec_.B - Jp).norm());
  if (measured_c1_ > 1.1 * spec_.eta)
    throw SurgeryTooLarge("measured C1 deviation exceeds declared budget");
}

Vec SurgeredMap::eval_lift(const Vec& x) const {
  Vec fx = base_->eval_lift(x);
  Vec off = torus_offset(x, spec_.point);
  double s = off.squaredNorm();
  if (s >= blend_.outer) return fx;
  double bl = blend_.value(s);
  Vec p_lift = x - off;
  Vec target = base_->eval_lift(p_lift) + spec_.B * off;
  return fx + bl * (target - fx);
}

Mat SurgeredMap::jacobian(const Vec& x) const {
  Mat Jf = base_->jacobian(x);
  Vec off = torus_offset(x, spec_.point);
  double s = off.squaredNorm();
  if (s >= blend_.outer) return Jf;
  double bl = blend_.value(s);
  double dbl = blend_.derivative(s);
  Vec p_lift = x - off;
  Vec diff = base_->eval_lift(p_lift) + spec_.B * off - base_->eval_lift(x);
  Mat J = Jf + bl * (spec_.B - Jf);
  J += (2.0 * dbl) * (diff * off.transpose());
  return J;
}

std::shared_ptr<const SurgeredMap> franks_surgery(MapPtr base,
                                                  const SurgerySpec& spec) {
  return std::make_shared<SurgeredMap>(std::move(base), spec);
}

// ---------------------------------------------------------------------------
// IteratedMap

IteratedMap::IteratedMap(MapPtr base, int k) : base_(std::move(base)), k_(k) {
  if (k < 1) throw BadGeometry("power must be >= 1");
  Ak_ = Mat::Identity(base_->n(), base_->n());
  for (int i = 0; i < k; ++i) Ak_ = Mat(base_->linear_matrix() * Ak_);
  if (const ToralAutomorphism* lat = base_->lattice()) {
    IMat Mk = integer_power(lat->M, k);
    double lo = std::pow(lat->weak_low, k);
    double hi = std::pow(lat->weak_high, k);
    lattice_ = compute_splitting(Mk, lo, hi);
  }
}

Vec IteratedMap::eval_lift(const Vec& x) const {
  Vec y = x;
  for (int i = 0; i < k_; ++i) y = base_->eval_lift(y);
  return y;
}

Mat IteratedMap::jacobian(const Vec& x) const {
  Mat J = Mat::Identity(n(), n());
  Vec y = x;
  for (int i = 0; i < k_; ++i) {
    J = Mat(base_->jacobian(y) * J);
    y = base_->eval_lift(y);
  }
  return J;
}

// ---------------------------------------------------------------------------
// PerturbedMap

PerturbedMap::PerturbedMap(MapPtr base, std::vector<BumpDisplacement> bumps)
    : base_(std::move(base)), bumps_(std::move(bumps)) {
  supports_ = base_->supports();
  for (const auto& b : bumps_)
    supports_.push_back({b.center, std::sqrt(b.cut.outer)});
}

Vec PerturbedMap::eval_lift(const Vec& x) const {
  Vec out = base_->eval_lift(x);
  for (const auto& b : bumps_) {
    Vec off = torus_offset(x, b.center);
    double s = off.squaredNorm();
    if (s >= b.cut.outer) continue;
    out += (b.amplitude * b.cut.value(s)) * b.direction;
  }
  return out;
}

Mat PerturbedMap::jacobian(const Vec& x) const {
  Mat J = base_->jacobian(x);
  for (const auto& b : bumps_) {
    Vec off = torus_offset(x, b.center);
    double s = off.squaredNorm();
    if (s >= b.cut.outer) continue;
    J += (b.amplitude * b.cut.derivative(s) * 2.0) *
         (b.direction * off.transpose());
  }
  return J;
}

// ---------------------------------------------------------------------------

namespace {

// Damped Newton toward f(x) = y; returns the final residual.
double damped_newton(const TorusMap& f, const Vec& y, Vec& x, double tol,
                     int max_iter) {
  double rn = (f.eval_lift(x) - y).norm();
  for (int it = 0; it < max_iter; ++it) {
    if (rn <= tol) return rn;
    Vec r = f.eval_lift(x) - y;
    Vec dx = f.jacobian(x).partialPivLu().solve(r);
    double step = 1.0;
    bool moved = false;
    for (int h = 0; h < 40; ++h) {
      Vec cand = x - step * dx;
      double cn = (f.eval_lift(cand) - y).norm();
      if (cn < rn) {
        x = cand;
        rn = cn;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) return rn;  // at the floating-point floor
  }
  return rn;
}

}  // namespace

Vec newton_inverse_lift(const TorusMap& f, const Vec& y, double tol,
                        int max_iter) {
  Mat A = f.linear_matrix();
  Vec seed = A.partialPivLu().solve(y);
  Vec x = seed;
  int budget = std::max(max_iter, 200);
  double rn = damped_newton(f, y, x, tol, budget);
  if (rn <= 10.0 * tol) return x;
  // deterministic retry pattern around the linear seed; preimages are unique
  // for these diffeomorphisms but basins can be pinched near critical curves
  const int n = f.n();
  Vec best = x;
  double best_rn = rn;
  for (double scale : {0.05, 0.15, 0.3}) {
    for (int mask = 0; mask < (1 << n); ++mask) {
      Vec off(n);
      for (int i = 0; i < n; ++i) off[i] = (mask & (1 << i)) ? scale : -scale;
      x = seed + off;
      rn = damped_newton(f, y, x, tol, budget);
      if (rn <= tol) return x;
      if (rn < best_rn) {
        best_rn = rn;
        best = x;
      }
    }
  }
  if (best_rn <= 10.0 * tol) return best;
  throw InversionFailed("newton inversion did not converge");
}

Vec newton_inverse_torus(const TorusMap& f, const Vec& y_torus, double tol,
                         int max_iter) {
  return project_point(newton_inverse_lift(f, y_torus, tol, max_iter));
}

FixedPointIndex fixed_point_index(const TorusMap& map, const Vec& p,
                                  double fix_tol) {
  if (torus_distance(map.eval(p), p) > fix_tol)
    throw NotAFixedPoint("point is not fixed within tolerance");
  Mat J = map.jacobian(p);
  Eigen::MatrixXd Jd = J;
  Eigen::EigenSolver<Eigen::MatrixXd> es(Jd);
  FixedPointIndex out;
  out.min_dist_to_unit = 1e300;
  for (int i = 0; i < J.rows(); ++i) {
    std::complex<double> ev = es.eigenvalues()[i];
    out.eigenvalues.push_back(ev);
    double m = std::abs(ev);
    if (m < 1.0) ++out.index;
    out.min_dist_to_unit = std::min(out.min_dist_to_unit, std::abs(m - 1.0));
    if (std::abs(ev.imag()) > 1e-9) out.complex_center = true;
  }
  out.warning = out.min_dist_to_unit < 1e-6;
  return out;
}

PHBounds measure_ph_bounds(const TorusMap& map, int per_axis) {
  const ToralAutomorphism* lat = map.lattice();
  PHBounds b;
  if (!lat) return b;
  if (per_axis <= 0) {
    // keep the sampled grid near 64^n capped at 2^24 points
    per_axis = 64;
    while (std::pow(per_axis, lat->n()) > 16800000.0 && per_axis > 8)
      per_axis /= 2;
  }
  b.lambda_s = lat->dims[0] > 0 ? lat->moduli[lat->dims[0] - 1] : 0.0;
  b.lambda_u = lat->dims[3] > 0
                   ? lat->moduli[lat->n() - lat->dims[3]]
                   : std::numeric_limits<double>::infinity();

  Eigen::MatrixXd C = lat->center_frame();
  if (C.cols() == 0) {
    b.lambda_c_minus = b.lambda_c_plus = 1.0;
    return b;
  }
  const int n = lat->n();
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(per_axis);
  double cmin = 1e300, cmax = 0.0;
  Vec x(n);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t t = idx;
    for (int i = 0; i < n; ++i) {
      x[i] = static_cast<double>(t % per_axis) / per_axis;
      t /= per_axis;
    }
    Mat J = map.jacobian(x);
    Eigen::MatrixXd Jc = C.transpose() * J * C;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Jc);
    cmax = std::max(cmax, svd.singularValues()(0));
    cmin = std::min(cmin, svd.singularValues()(svd.singularValues().size() - 1));
  }
  b.lambda_c_minus = cmin;
  b.lambda_c_plus = cmax;
  return b;
}

double jacobian_fd_error(const TorusMap& map, int samples, Rng& rng,
                         double step) {
  const int n = map.n();
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.next_double();
    Mat J = map.jacobian(x);
    Mat F(n, n);
    for (int j = 0; j < n; ++j) {
      Vec xp = x, xm = x;
      xp[j] += step;
      xm[j] -= step;
      F.col(j) = (map.eval_lift(xp) - map.eval_lift(xm)) / (2.0 * step);
    }
    double scale = std::max(1.0, J.norm());
    worst = std::max(worst, (J - F).norm() / scale);
  }
  return worst;
}

}  // namespace saddlelab
