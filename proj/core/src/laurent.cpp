#include "cmi/laurent.hpp"

#include <cmath>
#include <cstdlib>

namespace cmi {

cplx LaurentBlock::eval(cplx z) const {
  if (coeffs.empty()) return 0.0;
  const cplx w = (z - center) / scale;
  const int hi = max_exp();
  cplx pos = 0.0, neg = 0.0;
  // Horner in w for exponents >= 0, in 1/w for exponents < 0
  for (int k = hi; k >= std::max(0, min_exp); --k) pos = pos * w + coeffs[static_cast<size_t>(k - min_exp)];
  if (min_exp < 0) {
    const cplx iw = 1.0 / w;
    for (int k = min_exp; k <= std::min(-1, hi); ++k) neg = (neg + coeffs[static_cast<size_t>(k - min_exp)]) * iw;
    if (hi < -1) neg *= std::pow(iw, -1 - hi);
  }
  if (min_exp > 0) pos *= std::pow(w, min_exp);
  return pos + neg;
}

cplx LaurentBlock::derivative(cplx z) const {
  const cplx w = (z - center) / scale;
  cplx acc = 0.0;
  for (size_t i = 0; i < coeffs.size(); ++i) {
    const int k = min_exp + static_cast<int>(i);
    if (k != 0) acc += static_cast<double>(k) * coeffs[i] * std::pow(w, k - 1);
  }
  return acc / scale;
}

HoloFunction HoloFunction::constant(cplx c) { return monomial(c, 0); }

HoloFunction HoloFunction::monomial(cplx c, int k, cplx center) {
  return HoloFunction({LaurentBlock{center, 1.0, k, {c}}});
}

cplx HoloFunction::operator()(cplx z) const {
  cplx acc = 0.0;
  for (const auto& b : blocks_) acc += b.eval(z);
  return acc;
}

cplx HoloFunction::derivative(cplx z) const {
  cplx acc = 0.0;
  for (const auto& b : blocks_) acc += b.derivative(z);
  return acc;
}

int HoloFunction::degree() const {
  int d = 0;
  for (const auto& b : blocks_) d = std::max({d, std::abs(b.min_exp), std::abs(b.max_exp())});
  return d;
}

HoloFunction& HoloFunction::operator+=(const HoloFunction& o) {
  blocks_.insert(blocks_.end(), o.blocks_.begin(), o.blocks_.end());
  return *this;
}

HoloFunction& HoloFunction::operator*=(cplx s) {
  for (auto& b : blocks_)
    for (auto& c : b.coeffs) c *= s;
  return *this;
}

}  // namespace cmi
