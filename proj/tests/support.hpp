#pragma once

#include <complex>
#include <cstdint>

#include "cvps/ctensor.hpp"
#include "cvps/rng.hpp"

namespace cvps::testing {

/// Tensor with i.i.d. standard complex normal entries.
inline ComplexTensor random_tensor(Shape shape, Rng& rng) {
  ComplexTensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = {rng.normal(), rng.normal()};
  return t;
}

inline ComplexTensor vec(std::initializer_list<cplx> v) {
  return ComplexTensor(Shape{v.size()}, std::vector<cplx>(v));
}

}  // namespace cvps::testing
