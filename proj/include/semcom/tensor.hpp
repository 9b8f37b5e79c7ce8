#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace semcom {

using Shape = std::vector<std::size_t>;

/// Random engine used everywhere a seeded stream is needed.
using Rng = std::mt19937_64;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// 64-byte aligned storage. Vectorized reductions split their work by the
/// buffer's alignment, so a fixed alignment keeps results bit-reproducible
/// from one allocation to the next.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) { ::operator delete(p, alignment); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using Storage = std::vector<double, AlignedAllocator<double>>;

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major array of doubles. Axis 0 is the batch axis for every
/// tensor that flows through a model.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor vector(std::initializer_list<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    /// Number of elements per batch row (product of all axes but the first).
    std::size_t row_size() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    std::span<double> row(std::size_t i);
    std::span<const double> row(std::size_t i) const;

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// Same data, new shape. Throws ShapeError if element counts differ.
    Tensor reshaped(Shape shape) const;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double scale);

    bool all_finite() const;
    double sum() const;
    double squared_norm() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    Storage data_;
};

/// Rows [begin, end) of a batched tensor.
Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end);

/// Gathers the given rows of a batched tensor, in order.
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows);

void fill_normal(Tensor& t, Rng& rng, double stddev = 1.0);

}  // namespace semcom
