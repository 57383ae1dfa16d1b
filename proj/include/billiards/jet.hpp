// Truncated Taylor series in one variable, used to differentiate parametric
// boundary descriptions up to third order.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace billiards {

template <std::size_t N = 4>
struct Jet {
  // c[k] = f^(k)(t0) / k!
  std::array<double, N> c{};

  Jet() = default;
  Jet(double v) { c[0] = v; }

  static Jet variable(double t0) {
    Jet j(t0);
    if constexpr (N > 1) j.c[1] = 1.0;
    return j;
  }

  double value() const { return c[0]; }
  double derivative(std::size_t k) const {
    double f = 1.0;
    for (std::size_t i = 2; i <= k; ++i) f *= double(i);
    return c[k] * f;
  }

  friend Jet operator+(const Jet& a, const Jet& b) {
    Jet r;
    for (std::size_t i = 0; i < N; ++i) r.c[i] = a.c[i] + b.c[i];
    return r;
  }
  friend Jet operator-(const Jet& a, const Jet& b) {
    Jet r;
    for (std::size_t i = 0; i < N; ++i) r.c[i] = a.c[i] - b.c[i];
    return r;
  }
  friend Jet operator-(const Jet& a) {
    Jet r;
    for (std::size_t i = 0; i < N; ++i) r.c[i] = -a.c[i];
    return r;
  }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; i + j < N; ++j) r.c[i + j] += a.c[i] * b.c[j];
    return r;
  }
  friend Jet operator/(const Jet& a, const Jet& b) {
    Jet r;
    for (std::size_t k = 0; k < N; ++k) {
      double s = a.c[k];
      for (std::size_t j = 1; j <= k; ++j) s -= b.c[j] * r.c[k - j];
      r.c[k] = s / b.c[0];
    }
    return r;
  }
  Jet& operator+=(const Jet& o) { return *this = *this + o; }
  Jet& operator-=(const Jet& o) { return *this = *this - o; }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }
};

template <std::size_t N>
Jet<N> sqrt(const Jet<N>& a) {
  Jet<N> r;
  r.c[0] = std::sqrt(a.c[0]);
  for (std::size_t k = 1; k < N; ++k) {
    double s = a.c[k];
    for (std::size_t j = 1; j < k; ++j) s -= r.c[j] * r.c[k - j];
    r.c[k] = s / (2.0 * r.c[0]);
  }
  return r;
}

template <std::size_t N>
void sincos(const Jet<N>& a, Jet<N>& s, Jet<N>& c) {
  s = Jet<N>();
  c = Jet<N>();
  s.c[0] = std::sin(a.c[0]);
  c.c[0] = std::cos(a.c[0]);
  for (std::size_t k = 1; k < N; ++k) {
    double ss = 0.0, cc = 0.0;
    for (std::size_t j = 1; j <= k; ++j) {
      ss += double(j) * a.c[j] * c.c[k - j];
      cc -= double(j) * a.c[j] * s.c[k - j];
    }
    s.c[k] = ss / double(k);
    c.c[k] = cc / double(k);
  }
}

template <std::size_t N>
Jet<N> sin(const Jet<N>& a) {
  Jet<N> s, c;
  sincos(a, s, c);
  return s;
}

template <std::size_t N>
Jet<N> cos(const Jet<N>& a) {
  Jet<N> s, c;
  sincos(a, s, c);
  return c;
}

template <std::size_t N>
Jet<N> ipow(Jet<N> a, int m) {
  Jet<N> r(1.0);
  while (m > 0) {
    if (m & 1) r = r * a;
    a = a * a;
    m >>= 1;
  }
  return r;
}

}  // namespace billiards
