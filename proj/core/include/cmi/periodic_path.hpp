#pragma once

#include <array>
#include <functional>
#include <vector>

#include "cmi/common.hpp"

namespace cmi {

// A smooth 1-periodic map sampled at x_k = k/N, reconstructed by trigonometric
// interpolation. N must be a power of two, at least 64.
template <class V>
class BasicPath {
 public:
  using value_type = V;

  BasicPath() = default;
  explicit BasicPath(std::vector<V> samples);

  static BasicPath from_function(const std::function<V(double)>& f, int n);

  int size() const { return static_cast<int>(samples_.size()); }
  const std::vector<V>& samples() const { return samples_; }
  std::vector<V>& samples_mut() { return samples_; }
  const V& operator[](int k) const { return samples_[static_cast<size_t>(k)]; }
  double x(int k) const { return static_cast<double>(k) / size(); }

  // Trapezoid rule, i.e. the mean of the samples.
  V mean() const;
  // Band-limited interpolant at an arbitrary parameter.
  V eval(double x) const;
  BasicPath resample(int n) const;
  BasicPath derivative() const;
  // Zero-mean antiderivative of (this - mean).
  BasicPath antiderivative() const;
  // Largest Fourier coefficient with |k| >= N/4, relative to the largest one.
  double spectral_tail() const;

  // Fourier coefficients per component, index k in FFT order, normalized by 1/N.
  std::array<std::vector<cplx>, 3> coefficients() const;
  static BasicPath from_coefficients(const std::array<std::vector<cplx>, 3>& c);

  BasicPath& operator+=(const BasicPath& o);
  BasicPath& operator-=(const BasicPath& o);
  BasicPath& operator*=(double s);

 private:
  std::vector<V> samples_;
};

template <class V>
BasicPath<V> operator+(BasicPath<V> a, const BasicPath<V>& b) { return a += b; }
template <class V>
BasicPath<V> operator-(BasicPath<V> a, const BasicPath<V>& b) { return a -= b; }
template <class V>
BasicPath<V> operator*(double s, BasicPath<V> a) { return a *= s; }

using PeriodicPath = BasicPath<CVec3>;
using RealPath = BasicPath<Vec3>;

extern template class BasicPath<CVec3>;
extern template class BasicPath<Vec3>;

bool is_power_of_two(int n);

// Signed frequency of FFT index k for length n (Nyquist reported as +n/2).
inline int fft_frequency(int k, int n) { return k <= n / 2 ? k : k - n; }

PeriodicPath complexify(const RealPath& re, const RealPath& im);

}  // namespace cmi
