#pragma once

// Internal GEMM helpers over row-major buffers. Every call works on one sample's rows so a
// sample's result never depends on what else shares its batch.

#include <Eigen/Core>

#include <cstddef>

namespace rpwno::kernels {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMat>;
using CMap = Eigen::Map<const RowMat>;

inline CMap cmat(const double* p, std::size_t rows, std::size_t cols) {
    return CMap(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
inline Map mat(double* p, std::size_t rows, std::size_t cols) {
    return Map(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

// y = x * w (+ b broadcast over rows)
inline void affine(const double* x, const double* w, const double* b, double* y, std::size_t rows, std::size_t k,
                   std::size_t o) {
    auto Y = mat(y, rows, o);
    Y.noalias() = cmat(x, rows, k) * cmat(w, k, o);
    if (b) Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b, static_cast<Eigen::Index>(o));
}

}  // namespace rpwno::kernels
