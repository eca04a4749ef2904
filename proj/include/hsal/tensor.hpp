#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace hsal {

using Shape = std::vector<std::size_t>;

// Leaves doubles uninitialised on resize, so op outputs that are written in
// full skip a redundant zero fill.
template <typename T>
struct DefaultInitAllocator : std::allocator<T> {
  template <typename U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  using std::allocator<T>::allocator;
  template <typename U>
  void construct(U* p) noexcept(std::is_nothrow_default_constructible_v<U>) {
    ::new (static_cast<void*>(p)) U;
  }
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

using Buffer = std::vector<double, DefaultInitAllocator<double>>;

std::string shape_str(const Shape& shape);

/// Dense row-major float64 tensor of rank 1 or 2.
///
/// `grad` is empty until a tape or optimizer needs it; when present it has
/// the same length as `values`.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  /// Values are left unspecified; the caller must write every entry.
  static Tensor uninitialized(Shape shape);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  // rank-1 tensors behave as a single row
  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }

  bool has_grad() const { return !grad_.empty(); }
  std::span<const double> grad() const { return grad_; }
  /// Allocates a zeroed gradient buffer on first use.
  std::span<double> mutable_grad();
  void zero_grad();

  /// Reinterpret the same values with another shape of equal element count.
  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  Buffer values_;
  bool requires_grad_ = false;
  std::vector<double> grad_;
};

/// Ordered collection of named learnable tensors.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
  };

  /// Registers a parameter and returns its index; names must be unique.
  std::size_t add(std::string name, Tensor tensor);

  std::size_t size() const { return entries_.size(); }
  Entry& operator[](std::size_t i) { return entries_[i]; }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  Tensor& tensor(std::size_t i) { return entries_[i].tensor; }
  const Tensor& tensor(std::size_t i) const { return entries_[i].tensor; }
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t scalar_count() const;
  void zero_grad();

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<Entry> entries_;
};

/// Gradient storage laid out like a ParameterSet. Used as a private sink
/// when several tapes run concurrently against the same parameters.
class GradientBuffer {
 public:
  GradientBuffer() = default;
  explicit GradientBuffer(const ParameterSet& params);

  std::span<double> operator[](std::size_t i) { return grads_[i]; }
  std::span<const double> operator[](std::size_t i) const { return grads_[i]; }
  std::size_t size() const { return grads_.size(); }
  void zero();
  /// this += other, parameter by parameter.
  void accumulate(const GradientBuffer& other);

 private:
  std::vector<std::vector<double>> grads_;
};

}  // namespace hsal
