#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <new>
#include <numeric>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "tsadv/errors.hpp"

namespace tsadv {

// 64-byte aligned storage for tensor buffers. Keeping every buffer on the
// same alignment makes Eigen's vectorized kernels take the same code path
// regardless of heap history, so repeated runs in one process stay bit-exact.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(alignment)));
    }
    void deallocate(T* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t(alignment));
    }
    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

template <typename T>
using AlignedVec = std::vector<T, AlignedAllocator<T>>;

template <typename T, typename A1, typename A2>
    requires(!std::is_same_v<A1, A2>)
bool operator==(const std::vector<T, A1>& a, const std::vector<T, A2>& b) {
    return std::equal(a.begin(), a.end(), b.begin(), b.end()) && a.size() == b.size();
}

// Dense row-major tensor of reals. Immutable by convention once handed to a
// GradientTape; the tape owns its intermediate values.
template <typename S>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, S fill = S(0))
        : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

    template <typename Alloc>
    Tensor(std::vector<int> shape, std::vector<S, Alloc> data) : shape_(std::move(shape)) {
        if constexpr (std::is_same_v<Alloc, AlignedAllocator<S>>)
            data_ = std::move(data);
        else
            data_.assign(data.begin(), data.end());
        if (checked_size(shape_) != data_.size())
            throw DimensionError("tensor data length does not match shape");
    }

    Tensor(std::vector<int> shape, std::initializer_list<S> data)
        : shape_(std::move(shape)), data_(data.begin(), data.end()) {
        if (checked_size(shape_) != data_.size())
            throw DimensionError("tensor data length does not match shape");
    }

    static Tensor scalar(S v) { return Tensor({1}, std::vector<S>{v}); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    int rank() const { return static_cast<int>(shape_.size()); }
    size_t size() const { return data_.size(); }

    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }
    AlignedVec<S>& vec() { return data_; }
    const AlignedVec<S>& vec() const { return data_; }
    std::vector<S> to_std() const { return std::vector<S>(data_.begin(), data_.end()); }

    S& operator[](size_t i) { return data_[i]; }
    S operator[](size_t i) const { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (S v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    void require_finite(const char* where) const {
        if (!all_finite()) throw NumericError(std::string("non-finite value in ") + where);
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
        os << ']';
        return os.str();
    }

private:
    static size_t checked_size(const std::vector<int>& shape) {
        size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw DimensionError("tensor dimensions must be positive");
            n *= static_cast<size_t>(d);
        }
        return shape.empty() ? 0 : n;
    }

    std::vector<int> shape_;
    AlignedVec<S> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace tsadv
