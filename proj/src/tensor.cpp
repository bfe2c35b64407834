#include "rpwno/tensor.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rpwno {

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    for (auto e : shape_)
        if (e == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(shape_));
    data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    for (auto e : shape_)
        if (e == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(shape_));
    if (shape_numel(shape_) != data_.size())
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_str(shape_));
}

double Tensor::item() const {
    if (data_.size() != 1) throw std::logic_error("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size())
        throw std::invalid_argument("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::size_t Tensor::sample_size() const {
    if (shape_.empty()) throw std::logic_error("rank-0 tensor has no leading axis");
    return data_.size() / shape_[0];
}

Tensor Tensor::slice(std::size_t begin, std::size_t count) const {
    if (shape_.empty() || begin + count > shape_[0] || count == 0)
        throw std::out_of_range("slice [" + std::to_string(begin) + ", +" + std::to_string(count) +
                                ") out of range for shape " + shape_str(shape_));
    Shape s = shape_;
    s[0] = count;
    const std::size_t stride = sample_size();
    std::vector<double> d(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                          data_.begin() + static_cast<std::ptrdiff_t>((begin + count) * stride));
    return Tensor(std::move(s), std::move(d));
}

Tensor Tensor::gather(std::span<const std::size_t> indices) const {
    if (shape_.empty() || indices.empty()) throw std::invalid_argument("gather needs a leading axis and indices");
    Shape s = shape_;
    s[0] = indices.size();
    Tensor out(s);
    const std::size_t stride = sample_size();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= shape_[0]) throw std::out_of_range("gather index out of range");
        std::memcpy(out.data() + i * stride, data_.data() + indices[i] * stride, stride * sizeof(double));
    }
    return out;
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank() || a.rank() == 0 ||
        !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin()))
        throw std::invalid_argument("concat_last: incompatible shapes " + shape_str(a.shape()) + " and " +
                                    shape_str(b.shape()));
    const std::size_t ca = a.shape().back(), cb = b.shape().back();
    Shape s = a.shape();
    s.back() = ca + cb;
    Tensor out(s);
    const std::size_t rows = a.numel() / ca;
    for (std::size_t r = 0; r < rows; ++r) {
        std::memcpy(out.data() + r * (ca + cb), a.data() + r * ca, ca * sizeof(double));
        std::memcpy(out.data() + r * (ca + cb) + ca, b.data() + r * cb, cb * sizeof(double));
    }
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.numel() != b.numel())
        throw std::invalid_argument("max_abs_diff: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

namespace {
constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv_bytes(std::uint64_t h, const void* p, std::size_t n) {
    auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= kFnvPrime;
    }
    return h;
}
}  // namespace

std::uint64_t checksum(const Tensor& t) {
    std::uint64_t h = kFnvOffset;
    for (auto e : t.shape()) {
        std::uint64_t v = e;
        h = fnv_bytes(h, &v, sizeof(v));
    }
    return fnv_bytes(h, t.data(), t.numel() * sizeof(double));
}

std::uint64_t checksum_combine(std::uint64_t seed, std::uint64_t value) {
    return fnv_bytes(seed == 0 ? kFnvOffset : seed, &value, sizeof(value));
}

void configure_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

}  // namespace rpwno
