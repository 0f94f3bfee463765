#ifndef SADDLELAB_CONES_HPP
#define SADDLELAB_CONES_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "saddlelab/da_maps.hpp"

#include "json.hpp"

namespace saddlelab {

// Quadratic-form cone {v : ||v_E|| <= theta ||v_F||} for a decomposition
// spanned by the orthonormal column blocks E and F. The dimension of the cone
// is dim F. Membership and margins are computed in (E, F) coordinates; the
// norm used for expansion checks is the max-norm in those coordinates.
class ConeSpec {
 public:
  ConeSpec(Mat E, Mat F, double theta);

  const Mat& E() const { return E_; }
  const Mat& F() const { return F_; }
  double theta() const { return theta_; }
  int ambient_dim() const { return static_cast<int>(E_.rows()); }
  int dim() const { return static_cast<int>(F_.cols()); }

  // B(v) / |coords|^2; negative inside the cone.
  double quadratic_form(const Vec& v) const;
  // -B(v)/|coords|^2, positive inside.
  double margin(const Vec& v) const;
  bool contains(const Vec& v) const { return margin(v) >= 0.0; }
  // max-norm of the (E,F) coordinates of v.
  double cone_max_norm(const Vec& v) const;
  // unit-cone-norm sample with ||a|| = shell * theta * ||b||.
  Vec sample(Rng& rng, double shell) const;

 private:
  Mat E_, F_;
  double theta_;
  Mat solver_;  // pseudo-inverse of [E F], coordinates = solver_ * v
};

using ConeField = std::function<ConeSpec(const Vec& torus_point)>;

ConeField constant_cone_field(const ConeSpec& cone);

struct ConeWitness {
  int step = 0;
  Vec vector;
  double margin = 0.0;
  std::string what;  // "invariance" or "expansion"
};

// Finite-horizon certificate for Definition-1.1/1.2 style conditions along a
// single orbit. Invariance margins are of the successor cone membership;
// expansion margins compare cone-norm growth against C lambda0^n. A failure
// is a valid outcome, reported with witnesses.
struct OrbitConeCertificate {
  bool pass = false;
  bool forward = true;
  int horizon = 0;
  double lambda0 = 1.0, C = 1.0;
  double invariance_margin = 0.0;   // min over samples
  double expansion_margin = 0.0;    // min over (l, n) checks, ratio - 1
  double min_step_factor = 0.0;     // min per-step cone-norm growth factor
  std::vector<Vec> orbit;           // torus points
  std::vector<ConeWitness> witnesses;

  nlohmann::json to_json() const;
};

struct ConeCertifyOptions {
  int samples_per_step = 16;
  std::uint64_t seed = 1;
  bool exhaustive_pairs = false;  // check all (l, n), not only per-step
  double tol = 1e-12;
  int max_witnesses = 8;
};

OrbitConeCertificate certify_forward_cones(const TorusMap& map, const Vec& x0,
                                           const ConeField& field, int horizon,
                                           double lambda0, double C,
                                           const ConeCertifyOptions& opt = {});

OrbitConeCertificate certify_backward_cones(const TorusMap& map, const Vec& x0,
                                            const ConeField& field,
                                            int horizon, double lambda0,
                                            double C,
                                            const ConeCertifyOptions& opt = {});

// Polyline approximation of a strong-leaf segment. Nodes are lift
// coordinates in a chart where consecutive nodes are nearest representatives.
struct StrongSegment {
  int side = +1;  // +1 uu, -1 ss
  std::vector<Vec> polyline;
  int center_index = 0;  // node corresponding to the requested base point
  double arc_length = 0.0;
  double tangent_cone_margin = 0.0;

  Vec node_torus(std::size_t i) const { return project_point(polyline[i]); }
};

struct LeafOptions {
  double spacing = 0.0;   // node spacing; 0 picks length/200
  int settle_iterations = 10;
  double theta_strong = 1.0;
  double cone_tol = 1e-9;
  bool precheck_cones = true;
};

// Grow an approximate strong leaf of arc length L through x by iterating a
// seed segment along the strong eigendirection of the linear part (forward
// for uu, backward for ss). Tangents must stay in the strong cone of the
// linear part; ConeEscape otherwise.
StrongSegment grow_strong_leaf(const TorusMap& map, const Vec& x, int side,
                               double L, double tol,
                               const LeafOptions& opt = {});

struct AvoidanceOptions {
  double window_length = 0.25;
  double clearance_margin = 1e-3;  // required slack beyond the ball radius
  double lambda0 = 0.0;            // 0 picks the linear weak rate * 0.98
  double C = 1.0;
  int cone_samples = 8;
  std::uint64_t seed = 1;
  LeafOptions leaf;
};

// Outcome of the nested-disk search: a pseudo-orbit (per-step defect below
// defect_tol) through x's strong leaf whose forward (uu) or backward (ss)
// orbit clears every ball, plus the center-cone certificate along it.
struct AvoidanceResult {
  Vec point;               // on the leaf through x
  std::vector<Vec> orbit;  // torus points, orbit[0] = point
  double max_defect = 0.0;
  double min_clearance = 0.0;  // min over orbit of dist-to-ball - radius
  OrbitConeCertificate cone_cert;
  int iterate_normalization = 1;  // k with (strong rate)^k > 4

  nlohmann::json to_json() const;
};

AvoidanceResult avoidance_search(const TorusMap& map, const Vec& x, int side,
                                 double L, const std::vector<SupportBall>& avoid,
                                 int horizon,
                                 const AvoidanceOptions& opt = {});

// Independent re-verification of a stored avoidance orbit: re-applies the map
// step by step and checks defects and ball clearances.
bool verify_avoidance_orbit(const TorusMap& map, int side,
                            const std::vector<Vec>& orbit,
                            const std::vector<SupportBall>& avoid,
                            double defect_tol, double* max_defect = nullptr,
                            double* min_clearance = nullptr);

struct SaddlePointOutcome {
  bool ok = false;
  double clearance = 0.0;
  double cone_margin = 0.0;
  double defect = 0.0;
  std::string error;
};

struct SaddleReport {
  bool pass = false;
  int d1 = 0, d2 = 0;
  double L = 0.0, lambda0 = 0.0, C = 1.0, theta = 1.0;
  int horizon = 0;
  int grid_per_axis = 0;
  std::vector<SaddlePointOutcome> forward;   // indexed by grid point
  std::vector<SaddlePointOutcome> backward;
  double min_clearance = 0.0;
  double min_margin = 0.0;

  nlohmann::json to_json() const;
  std::string margins_csv() const;
};

// Definition-2.1 style aggregate: avoidance search on both sides from every
// grid base point, avoiding the map's support balls.
SaddleReport sh_saddle_certify(const TorusMap& map, int grid_per_axis,
                               double L, double lambda0, double C, int horizon,
                               int jobs = 1, const AvoidanceOptions& opt = {});

struct DiskGrowthReport {
  int steps = 0;           // first n with diameter >= 2 delta1
  double final_diameter = 0.0;
  double measured_rate = 0.0;
  int geometric_bound = 0;  // ceil(log(2 delta1 / diam0) / log lambda) + slack
};

// Corollary-2.7 style growth: iterate a d-dimensional sampled disk tangent to
// the given frame and report the first iterate whose intrinsic diameter
// reaches 2 delta1. Throws GrowthStalled if the diameter falls 2x behind the
// geometric lower bound.
struct GrowthStalled : Error {
  using Error::Error;
};

DiskGrowthReport disk_growth_check(const TorusMap& map, const Vec& x,
                                   const Mat& tangent_frame, double diam0,
                                   double delta1, int max_steps,
                                   double lambda_rate);

}  // namespace saddlelab

#endif
