#ifndef SADDLELAB_SEMICONJUGACY_HPP
#define SADDLELAB_SEMICONJUGACY_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "saddlelab/da_maps.hpp"

#include "json.hpp"

namespace saddlelab {

// Grid-sampled periodic displacement v with H = Id + v satisfying
// A o H = H o (f + lift_offset) up to the stored residuals. Node values come
// from the split geometric series
//   v_u(x) =  sum_{j>=0} A^{-(j+1)} P_u phi(f^j x)
//   v_s(x) = -sum_{j>=1} A^{j-1}  P_s phi(f^-j x)
// truncated by the geometric tail bound. residual_series is the defect of the
// series evaluator itself (the headline residual); residual_interp measures
// the multilinear interpolant in the loop and gates off-grid uses.
struct ConjugacyField {
  ToralAutomorphism aut;
  int G = 0;
  int N_u = 0, N_s = 0;
  std::vector<double> v;  // node-major, n doubles per node
  Eigen::VectorXd lift_offset;  // integer vector m; field solves A H = H (f~ + m)
  double residual_series = 0.0;
  double residual_interp = 0.0;
  double sup_norm = 0.0;  // d_C0(H, Id) over the grid
  double phi_sup = 0.0;
  double tol = 0.0;

  int n() const { return aut.n(); }
  std::size_t node_count() const;
  std::size_t node_index(const std::vector<int>& coords) const;
  Vec node_point(std::size_t idx) const;
  Vec node_value(std::size_t idx) const;

  // periodic multilinear interpolation of v
  Vec v_at(const Vec& torus_point) const;
  // lift map H(x) = x + v(x mod 1)
  Vec H(const Vec& lift_point) const;

  void write_binary(const std::string& path) const;
  static ConjugacyField read_binary(const std::string& path);
  nlohmann::json meta_json() const;
};

struct ComputeHOptions {
  int jobs = 1;
  int max_order = 200;
  int interp_check_samples = 2048;
  std::uint64_t seed = 2;
};

ConjugacyField compute_H(const TorusMap& map, int G, double tol,
                         const ComputeHOptions& opt = {});

// Shift the displacement by -(A - Id)^{-1} m, matching the lift f~ + m.
ConjugacyField normalize_lift(const ConjugacyField& field,
                              const Eigen::VectorXd& m);

struct FiberWitness {
  Vec a, b;
  double distance = 0.0;
  double image_distance = 0.0;
};

struct FiberReport {
  double lambda_lower = 0.0;  // max verified same-image pair distance
  double lambda_upper = 0.0;  // max component diameter (up to one grid cell)
  double grid_cell = 0.0;
  double bucket_cell = 0.0;
  double rho = 0.0;
  bool rho_light = false;
  std::size_t nodes = 0;
  std::size_t singleton_nodes = 0;
  std::size_t nontrivial_components = 0;
  std::vector<FiberWitness> witnesses;

  nlohmann::json to_json() const;
};

// Bucket nodes by H-image cells (cell = 4 x residual, with a half-cell offset
// second pass against aliasing), connect same-bucket grid neighbours
// (3^n - 1 adjacency), and report component diameters.
// cell_override pins the bucket cell (useful for cross-resolution
// comparisons); 0 uses the spec rule 4 x residual.
FiberReport fiber_analysis(const ConjugacyField& field, double rho,
                           int jobs = 1, double cell_override = 0.0);

struct ProbeRow {
  double c0_distance = 0.0;
  double lambda_g = 0.0;
  double delta_lambda = 0.0;
  bool violated = false;       // Lambda(g) >= Lambda(f) + eps
  bool informational = false;  // outside the fitted delta, no claim made
};

struct SemicontinuityReport {
  double lambda_f = 0.0;
  double eps = 0.0;
  double fitted_delta = 0.0;
  std::vector<ProbeRow> rows;
  bool any_violation_inside = false;

  nlohmann::json to_json() const;
};

SemicontinuityReport semicontinuity_probe(const TorusMap& f,
                                          const std::vector<MapPtr>& perturbations,
                                          double eps, int G, double tol,
                                          double rho, int jobs = 1);

enum class ProjectorSide { stable, unstable };

struct DegreeResult {
  int degree = 0;
  double min_boundary_distance = 0.0;
  bool attained = false;  // nonzero degree: y is in the image, with a ball
                          // around it by the translation argument
};

// Topological degree of Pi o H restricted to a disk at the target y, with Pi
// the orthogonal projection onto the stable or unstable frame pair of A.
// d = 1: `disk` is an ordered polyline (lift coords), endpoints form the
// boundary and the degree is the sign-change count. d = 2: `disk` is an
// ordered closed boundary loop and the degree is the winding number. The
// target y is given in the d projected coordinates.
DegreeResult degree_open_image(const ConjugacyField& field, ProjectorSide side,
                               const std::vector<Vec>& disk, int d,
                               const Eigen::VectorXd& y);

}  // namespace saddlelab

#endif
