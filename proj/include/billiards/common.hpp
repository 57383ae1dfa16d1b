#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace billiards {

// Bad arguments or configuration (CLI exit code 2).
struct invalid_input : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed to converge (CLI exit code 1).
struct non_convergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Point outside the image annulus handed to an inverse step.
struct out_of_image : std::domain_error {
  using std::domain_error::domain_error;
};

struct Vec2 {
  double x = 0.0, y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
  friend Vec2 operator*(Vec2 a, double k) { return {k * a.x, k * a.y}; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
// quarter turn counterclockwise; for a counterclockwise boundary this is the inward normal
inline Vec2 perp(Vec2 a) { return {-a.y, a.x}; }

// reduce to [0, period)
inline double wrap(double s, double period) {
  double r = std::fmod(s, period);
  if (r < 0) r += period;
  if (r >= period) r -= period;
  return r;
}

// representative of a - b in [-period/2, period/2)
inline double periodic_diff(double a, double b, double period) {
  double d = wrap(a - b + 0.5 * period, period) - 0.5 * period;
  return d;
}

struct Mat2 {
  double a = 0, b = 0, c = 0, d = 0;  // [[a, b], [c, d]]

  static Mat2 identity() { return {1, 0, 0, 1}; }
  double det() const { return a * d - b * c; }
  double trace() const { return a + d; }
  friend Mat2 operator*(const Mat2& m, const Mat2& n) {
    return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d, m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
  }
  friend Vec2 operator*(const Mat2& m, Vec2 v) { return {m.a * v.x + m.b * v.y, m.c * v.x + m.d * v.y}; }
};


inline int default_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : int(n);
}

// Runs f(begin, end, worker) over [0, n) split into contiguous chunks.
template <class F>
void parallel_for(long n, int threads, F&& f) {
  if (threads <= 1 || n < 2 * threads) {
    f(0L, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  const long chunk = (n + threads - 1) / threads;
  for (int w = 0; w < threads; ++w) {
    const long b = w * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&f, b, e, w] { f(b, e, w); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace billiards
