#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rpwno {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major float64 array. A rank-0 tensor (empty shape) holds one value.
class Tensor {
public:
    Tensor() : data_(1, 0.0) {}
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double item() const;

    void fill(double v);
    Tensor reshaped(Shape shape) const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    // Leading-axis helpers.
    std::size_t sample_size() const;  // numel / extent(0)
    Tensor slice(std::size_t begin, std::size_t count) const;
    Tensor gather(std::span<const std::size_t> indices) const;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

// Appends `extra` along the last axis; leading extents must agree.
Tensor concat_last(const Tensor& a, const Tensor& b);

double max_abs_diff(const Tensor& a, const Tensor& b);

// FNV-1a over the raw bytes of the payload and the shape.
std::uint64_t checksum(const Tensor& t);
std::uint64_t checksum_combine(std::uint64_t seed, std::uint64_t value);

// Keeps freed tensor buffers in the heap instead of returning them to the OS on every
// training step (glibc only; no-op elsewhere). Call once at program start.
void configure_allocator();

}  // namespace rpwno
