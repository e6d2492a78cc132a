#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cvps {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>{});
}

std::string shape_string(const Shape& shape);

/**
 * Dense row-major N-dimensional array.
 *
 * Element type is left open so the same reindexing code (shifts, polyphase
 * components) serves plain complex samples and autodiff variables alike.
 * product(shape) == data.size() always holds.
 */
template <class T>
class NdArray {
 public:
  NdArray() = default;

  explicit NdArray(Shape shape, const T& fill = T{})
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  NdArray(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
      throw std::invalid_argument("NdArray: shape " + shape_string(shape_) +
                                  " does not match " +
                                  std::to_string(data_.size()) + " samples");
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t flat) { return data_[flat]; }
  const T& operator[](std::size_t flat) const { return data_[flat]; }

  std::size_t stride(std::size_t axis) const {
    std::size_t s = 1;
    for (std::size_t a = axis + 1; a < shape_.size(); ++a) s *= shape_[a];
    return s;
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    std::size_t flat = 0;
    std::size_t a = 0;
    for (auto i : idx) flat = flat * shape_[a++] + i;
    return flat;
  }

  T& at(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }
  const T& at(std::initializer_list<std::size_t> idx) const {
    return data_[offset(idx)];
  }

  /// Same data, new shape of equal element count.
  NdArray reshaped(Shape shape) const { return NdArray(std::move(shape), data_); }

  /// Sub-array at index `i` along axis 0.
  NdArray slice0(std::size_t i) const {
    Shape inner(shape_.begin() + 1, shape_.end());
    const std::size_t n = shape_size(inner);
    std::vector<T> out(data_.begin() + static_cast<std::ptrdiff_t>(i * n),
                       data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    return NdArray(std::move(inner), std::move(out));
  }

  friend bool operator==(const NdArray& a, const NdArray& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// Stacks equally shaped arrays along a new leading axis.
template <class T>
NdArray<T> stack(std::span<const NdArray<T>> parts) {
  if (parts.empty()) throw std::invalid_argument("stack: no arrays");
  Shape shape = parts.front().shape();
  std::vector<T> out;
  out.reserve(parts.size() * parts.front().size());
  for (const auto& p : parts) {
    if (p.shape() != shape) throw std::invalid_argument("stack: shape mismatch");
    out.insert(out.end(), p.storage().begin(), p.storage().end());
  }
  shape.insert(shape.begin(), parts.size());
  return NdArray<T>(std::move(shape), std::move(out));
}

/// Elementwise map into a new element type, shape preserved.
template <class T, class F>
auto map(const NdArray<T>& a, F&& f) {
  using U = std::invoke_result_t<F&, const T&>;
  std::vector<U> out;
  out.reserve(a.size());
  for (const auto& v : a.storage()) out.push_back(f(v));
  return NdArray<U>(a.shape(), std::move(out));
}

/**
 * Circular shift along one axis: out[.., n, ..] = t[.., (n + amount) mod N, ..].
 * A shift by 1 is one application of T_N; negative amounts shift the other way.
 */
template <class T>
NdArray<T> circular_shift(const NdArray<T>& t, std::size_t axis, long amount) {
  if (axis >= t.rank()) {
    throw std::out_of_range("circular_shift: axis " + std::to_string(axis) +
                            " out of range for rank " + std::to_string(t.rank()));
  }
  const std::size_t n = t.dim(axis);
  if (n == 0) return t;
  const auto len = static_cast<long>(n);
  const auto s = static_cast<std::size_t>(((amount % len) + len) % len);
  if (s == 0) return t;
  const std::size_t inner = t.stride(axis);
  const std::size_t outer = t.size() / (n * inner);
  std::vector<T> out(t.size());
  const auto& in = t.storage();
  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t base = o * n * inner;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t src = base + ((i + s) % n) * inner;
      const std::size_t dst = base + i * inner;
      for (std::size_t j = 0; j < inner; ++j) out[dst + j] = in[src + j];
    }
  }
  return NdArray<T>(t.shape(), std::move(out));
}

/// Shifts the trailing `amounts.size()` axes, amounts[0] applying to the first of them.
template <class T>
NdArray<T> shift_spatial(const NdArray<T>& t, std::span<const long> amounts) {
  if (amounts.size() > t.rank()) {
    throw std::out_of_range("shift_spatial: more shifts than axes");
  }
  NdArray<T> out = t;
  const std::size_t first = t.rank() - amounts.size();
  for (std::size_t i = 0; i < amounts.size(); ++i) {
    if (amounts[i] != 0) out = circular_shift(out, first + i, amounts[i]);
  }
  return out;
}

template <class T>
NdArray<T> shift_spatial(const NdArray<T>& t, std::initializer_list<long> amounts) {
  return shift_spatial(t, std::span<const long>(amounts.begin(), amounts.size()));
}

}  // namespace cvps
