#include "cmi/periodic_path.hpp"

#include <cmath>

#include <unsupported/Eigen/FFT>

namespace cmi {

namespace {

template <class V>
cplx component(const V& v, int i) {
  return cplx(v(i));
}

template <class V>
V from_components(cplx a, cplx b, cplx c);

template <>
CVec3 from_components<CVec3>(cplx a, cplx b, cplx c) {
  return CVec3(a, b, c);
}

template <>
Vec3 from_components<Vec3>(cplx a, cplx b, cplx c) {
  return Vec3(a.real(), b.real(), c.real());
}

}  // namespace

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

template <class V>
BasicPath<V>::BasicPath(std::vector<V> samples) : samples_(std::move(samples)) {
  const int n = size();
  if (!is_power_of_two(n) || n < 64)
    throw Error(ErrorCode::InvalidArgument,
                "path sample count must be a power of two >= 64, got " + std::to_string(n));
}

template <class V>
BasicPath<V> BasicPath<V>::from_function(const std::function<V(double)>& f, int n) {
  std::vector<V> s(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) s[static_cast<size_t>(k)] = f(static_cast<double>(k) / n);
  return BasicPath(std::move(s));
}

template <class V>
V BasicPath<V>::mean() const {
  V acc = V::Zero();
  for (const auto& v : samples_) acc += v;
  return acc / static_cast<double>(size());
}

template <class V>
std::array<std::vector<cplx>, 3> BasicPath<V>::coefficients() const {
  const int n = size();
  Eigen::FFT<double> fft;
  std::array<std::vector<cplx>, 3> out;
  std::vector<cplx> in(static_cast<size_t>(n));
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < n; ++k) in[static_cast<size_t>(k)] = component(samples_[static_cast<size_t>(k)], i);
    fft.fwd(out[static_cast<size_t>(i)], in);
    for (auto& c : out[static_cast<size_t>(i)]) c /= static_cast<double>(n);
  }
  return out;
}

template <class V>
BasicPath<V> BasicPath<V>::from_coefficients(const std::array<std::vector<cplx>, 3>& c) {
  const int n = static_cast<int>(c[0].size());
  Eigen::FFT<double> fft;
  std::array<std::vector<cplx>, 3> vals;
  for (int i = 0; i < 3; ++i) {
    std::vector<cplx> tmp = c[static_cast<size_t>(i)];
    for (auto& z : tmp) z *= static_cast<double>(n);
    fft.inv(vals[static_cast<size_t>(i)], tmp);
  }
  std::vector<V> s(static_cast<size_t>(n));
  for (size_t k = 0; k < s.size(); ++k) s[k] = from_components<V>(vals[0][k], vals[1][k], vals[2][k]);
  return BasicPath(std::move(s));
}

template <class V>
V BasicPath<V>::eval(double x) const {
  const int n = size();
  const auto c = coefficients();
  cplx acc[3] = {0.0, 0.0, 0.0};
  for (int k = 0; k < n; ++k) {
    const int m = fft_frequency(k, n);
    cplx basis;
    if (m == n / 2)
      basis = std::cos(kTwoPi * m * x);
    else
      basis = std::polar(1.0, kTwoPi * m * x);
    for (int i = 0; i < 3; ++i) acc[i] += c[static_cast<size_t>(i)][static_cast<size_t>(k)] * basis;
  }
  return from_components<V>(acc[0], acc[1], acc[2]);
}

template <class V>
BasicPath<V> BasicPath<V>::resample(int n2) const {
  const int n = size();
  if (n2 == n) return *this;
  const auto c = coefficients();
  std::array<std::vector<cplx>, 3> d;
  for (auto& v : d) v.assign(static_cast<size_t>(n2), 0.0);
  const int half = std::min(n, n2) / 2;
  for (int k = 0; k < n; ++k) {
    const int m = fft_frequency(k, n);
    if (std::abs(m) > half) continue;
    for (int i = 0; i < 3; ++i) {
      const cplx v = c[static_cast<size_t>(i)][static_cast<size_t>(k)];
      if (std::abs(m) == half && n2 > n) {
        // old Nyquist mode is a cosine: split it between +-n/2
        d[static_cast<size_t>(i)][static_cast<size_t>(half)] += 0.5 * v;
        d[static_cast<size_t>(i)][static_cast<size_t>(n2 - half)] += 0.5 * v;
      } else if (std::abs(m) == half) {
        d[static_cast<size_t>(i)][static_cast<size_t>(half)] += v;
      } else {
        d[static_cast<size_t>(i)][static_cast<size_t>((m + n2) % n2)] += v;
      }
    }
  }
  return from_coefficients(d);
}

template <class V>
BasicPath<V> BasicPath<V>::derivative() const {
  const int n = size();
  auto c = coefficients();
  for (auto& comp : c) {
    for (int k = 0; k < n; ++k) {
      const int m = fft_frequency(k, n);
      comp[static_cast<size_t>(k)] *= (m == n / 2) ? cplx(0.0) : cplx(0.0, kTwoPi * m);
    }
  }
  return from_coefficients(c);
}

template <class V>
BasicPath<V> BasicPath<V>::antiderivative() const {
  const int n = size();
  auto c = coefficients();
  for (auto& comp : c) {
    for (int k = 0; k < n; ++k) {
      const int m = fft_frequency(k, n);
      if (m == 0 || m == n / 2)
        comp[static_cast<size_t>(k)] = 0.0;
      else
        comp[static_cast<size_t>(k)] /= cplx(0.0, kTwoPi * m);
    }
  }
  return from_coefficients(c);
}

template <class V>
double BasicPath<V>::spectral_tail() const {
  const int n = size();
  const auto c = coefficients();
  double top = 0.0, tail = 0.0;
  for (int k = 0; k < n; ++k) {
    const int m = std::abs(fft_frequency(k, n));
    double mag = 0.0;
    for (int i = 0; i < 3; ++i) mag = std::max(mag, std::abs(c[static_cast<size_t>(i)][static_cast<size_t>(k)]));
    top = std::max(top, mag);
    if (m >= n / 4) tail = std::max(tail, mag);
  }
  return top > 0.0 ? tail / top : 0.0;
}

template <class V>
BasicPath<V>& BasicPath<V>::operator+=(const BasicPath& o) {
  if (o.size() != size()) throw Error(ErrorCode::InvalidArgument, "path size mismatch");
  for (size_t k = 0; k < samples_.size(); ++k) samples_[k] += o.samples_[k];
  return *this;
}

template <class V>
BasicPath<V>& BasicPath<V>::operator-=(const BasicPath& o) {
  if (o.size() != size()) throw Error(ErrorCode::InvalidArgument, "path size mismatch");
  for (size_t k = 0; k < samples_.size(); ++k) samples_[k] -= o.samples_[k];
  return *this;
}

template <class V>
BasicPath<V>& BasicPath<V>::operator*=(double s) {
  for (auto& v : samples_) v *= s;
  return *this;
}

template class BasicPath<CVec3>;
template class BasicPath<Vec3>;

PeriodicPath complexify(const RealPath& re, const RealPath& im) {
  if (re.size() != im.size()) throw Error(ErrorCode::InvalidArgument, "path size mismatch");
  std::vector<CVec3> s(static_cast<size_t>(re.size()));
  for (int k = 0; k < re.size(); ++k) s[static_cast<size_t>(k)] = re[k].cast<cplx>() + kI * im[k].cast<cplx>();
  return PeriodicPath(std::move(s));
}

}  // namespace cmi
