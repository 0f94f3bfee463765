#ifndef SADDLELAB_COMMON_HPP
#define SADDLELAB_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace saddlelab {

// Dynamics code works on tori of dimension <= 8; capped Eigen types keep the
// hot loops free of heap traffic. The linear-algebra layer (splittings,
// frames) uses plain dynamic matrices, which also cover n up to 32.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 8, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 8, 8>;
using IMat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

constexpr int kMaxMapDim = 8;

inline double wrap01(double t) {
  double r = t - std::floor(t);
  return (r >= 1.0) ? r - 1.0 : r;
}

// Wrap to [-1/2, 1/2).
inline double wrap_centered(double t) {
  double r = wrap01(t);
  return (r >= 0.5) ? r - 1.0 : r;
}

inline Vec project_point(const Vec& x) {
  Vec r(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) r[i] = wrap01(x[i]);
  return r;
}

inline Vec lift_near(const Vec& x, const Vec& anchor) {
  Vec r(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    r[i] = x[i] + std::round(anchor[i] - x[i]);
  return r;
}

// Offset from b to a, shortest representative on the torus.
inline Vec torus_offset(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) r[i] = wrap_centered(a[i] - b[i]);
  return r;
}

inline double torus_distance(const Vec& a, const Vec& b) {
  return torus_offset(a, b).norm();
}

// Deterministic counter-based RNG (splitmix64 core). Streams derived from a
// single seed are independent of worker scheduling, and uniforms are built
// directly from the bits so results do not depend on the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    Rng mix(seed ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1)));
    mix.next_u64();
    mix.next_u64();
    return mix;
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double next_double() {  // in [0,1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * next_double(); }

  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  Vec unit_vector(int n) {
    Vec v(n);
    while (true) {
      for (int i = 0; i < n; ++i) v[i] = gaussian();
      double nrm = v.norm();
      if (nrm > 1e-12) return v / nrm;
    }
  }

  Vec in_ball(int n, double radius) {
    Vec v(n);
    while (true) {
      for (int i = 0; i < n; ++i) v[i] = uniform(-1.0, 1.0);
      if (v.squaredNorm() <= 1.0) return radius * v;
    }
  }

  double gaussian() {
    double u1 = next_double(), u2 = next_double();
    while (u1 <= 1e-300) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t state_;
};

// Static partition over [0, count); each index writes only its own slots, so
// output is identical for every jobs value.
inline void parallel_for(int jobs, std::size_t count,
                         const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) {
    std::size_t lo = count * t / nthreads;
    std::size_t hi = count * (t + 1) / nthreads;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Contiguous chunks [lo, hi) over [0, count); chunk outputs must live in
// caller-preallocated slots indexed by chunk so merges stay ordered.
inline void parallel_chunks(
    int jobs, std::size_t count,
    const std::function<void(int chunk, std::size_t lo, std::size_t hi)>& fn) {
  int chunks = std::max(1, jobs);
  if (chunks == 1 || count < 2) {
    fn(0, 0, count);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(chunks);
  for (int t = 0; t < chunks; ++t) {
    std::size_t lo = count * t / chunks;
    std::size_t hi = count * (t + 1) / chunks;
    pool.emplace_back([t, lo, hi, &fn] { fn(t, lo, hi); });
  }
  for (auto& th : pool) th.join();
}

int default_jobs();  // SADDLELAB_JOBS env var, else hardware concurrency

std::string format_double17(double v);

}  // namespace saddlelab

#endif
