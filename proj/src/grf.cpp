#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "rpwno/pde_data.hpp"
#include "rpwno/random.hpp"

namespace rpwno {

namespace {

constexpr double kPi = std::numbers::pi;

void sample_periodic(const GrfSpec& spec, std::size_t index, double* out) {
    const std::size_t n = spec.grid;
    std::mt19937_64 rng(derive_seed(spec.seed, index));
    std::normal_distribution<double> normal;
    const double c0 = spec.mode_std(0.0) * normal(rng);
    for (std::size_t j = 0; j < n; ++j) out[j] = c0;
    // Real orthonormal basis: 1, sqrt2 cos(2 pi k x), sqrt2 sin(2 pi k x); Nyquist dropped.
    for (std::size_t k = 1; 2 * k < n; ++k) {
        const double w = 2.0 * kPi * static_cast<double>(k);
        const double sd = std::sqrt(2.0) * spec.mode_std(w * w);
        const double a = sd * normal(rng);
        const double b = sd * normal(rng);
        for (std::size_t j = 0; j < n; ++j) {
            const double phase = 2.0 * kPi * static_cast<double>((k * j) % n) / static_cast<double>(n);
            out[j] += a * std::cos(phase) + b * std::sin(phase);
        }
    }
}

// Cosine basis on cell centres: phi_0 = 1, phi_k = sqrt2 cos(pi k x).
Eigen::MatrixXd neumann_basis(std::size_t n) {
    Eigen::MatrixXd phi(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k)
            phi(i, k) = k == 0 ? 1.0 : std::sqrt(2.0) * std::cos(kPi * static_cast<double>(k) * x);
    }
    return phi;
}

}  // namespace

GrfSpec GrfSpec::burgers(std::size_t grid, std::uint64_t seed) {
    return {1, 625.0, 25.0, -2.0, GrfBasis::PeriodicFourier, grid, seed};
}

GrfSpec GrfSpec::darcy(std::size_t grid, std::uint64_t seed) {
    return {2, 1.0, 9.0, -2.0, GrfBasis::NeumannCosine, grid, seed};
}

void GrfSpec::validate() const {
    if (dims != 1 && dims != 2) throw std::invalid_argument("GRF dimension must be 1 or 2");
    if (!(shift > 0.0)) throw std::invalid_argument("GRF shift must be > 0");
    if (!(scale > 0.0)) throw std::invalid_argument("GRF scale must be > 0");
    if (grid < 4) throw std::invalid_argument("GRF grid must have at least 4 points");
    if (dims == 1 && basis != GrfBasis::PeriodicFourier) throw std::invalid_argument("1D GRF uses the periodic basis");
    if (dims == 2 && basis != GrfBasis::NeumannCosine) throw std::invalid_argument("2D GRF uses the cosine basis");
}

double GrfSpec::mode_std(double lambda) const { return std::sqrt(scale) * std::pow(lambda + shift, exponent / 2.0); }

std::vector<double> grf_coordinates(const GrfSpec& spec) {
    std::vector<double> x(spec.grid);
    const double off = spec.basis == GrfBasis::NeumannCosine ? 0.5 : 0.0;
    for (std::size_t j = 0; j < spec.grid; ++j) x[j] = (static_cast<double>(j) + off) / static_cast<double>(spec.grid);
    return x;
}

Tensor sample_grf(const GrfSpec& spec, std::size_t count) {
    spec.validate();
    const std::size_t n = spec.grid;
    if (spec.dims == 1) {
        Tensor out({count, n});
        for (std::size_t i = 0; i < count; ++i) sample_periodic(spec, i, out.data() + i * n);
        return out;
    }
    Tensor out({count, n, n});
    const Eigen::MatrixXd phi = neumann_basis(n);
    Eigen::MatrixXd sd(n, n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l)
            sd(k, l) = spec.mode_std(kPi * kPi * static_cast<double>(k * k + l * l));
    Eigen::MatrixXd coef(n, n);
    for (std::size_t i = 0; i < count; ++i) {
        std::mt19937_64 rng(derive_seed(spec.seed, i));
        std::normal_distribution<double> normal;
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t l = 0; l < n; ++l) coef(k, l) = sd(k, l) * normal(rng);
        const Eigen::MatrixXd field = phi * coef * phi.transpose();
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) out[(i * n + r) * n + c] = field(r, c);
    }
    return out;
}

double psi_threshold(double v) { return v < 0.0 ? 3.0 : 12.0; }

Tensor psi_threshold(const Tensor& raw) {
    Tensor out(raw.shape());
    for (std::size_t i = 0; i < raw.numel(); ++i) out[i] = psi_threshold(raw[i]);
    return out;
}

}  // namespace rpwno
