#pragma once

#include <vector>

#include "cmi/common.hpp"

namespace cmi {

// sum_k c_k ((z - center) / scale)^k for k = min_exp, ..., min_exp + coeffs.size() - 1.
struct LaurentBlock {
  cplx center = 0.0;
  double scale = 1.0;
  int min_exp = 0;
  std::vector<cplx> coeffs;

  int max_exp() const { return min_exp + static_cast<int>(coeffs.size()) - 1; }
  cplx eval(cplx z) const;
  cplx derivative(cplx z) const;
};

// Holomorphic function on a circular domain: Taylor part at the outer center plus
// principal parts at the hole centers, each a LaurentBlock.
class HoloFunction {
 public:
  HoloFunction() = default;
  explicit HoloFunction(std::vector<LaurentBlock> blocks) : blocks_(std::move(blocks)) {}

  static HoloFunction constant(cplx c);
  // c (z - center)^k
  static HoloFunction monomial(cplx c, int k, cplx center = 0.0);

  cplx operator()(cplx z) const;
  cplx derivative(cplx z) const;

  const std::vector<LaurentBlock>& blocks() const { return blocks_; }
  void add_block(LaurentBlock b) { blocks_.push_back(std::move(b)); }
  // Largest |exponent| over all blocks.
  int degree() const;

  HoloFunction& operator+=(const HoloFunction& o);
  HoloFunction& operator*=(cplx s);

 private:
  std::vector<LaurentBlock> blocks_;
};

inline HoloFunction operator+(HoloFunction a, const HoloFunction& b) { return a += b; }
inline HoloFunction operator*(cplx s, HoloFunction a) { return a *= s; }

}  // namespace cmi
