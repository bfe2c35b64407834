#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

#include "rpwno/pde_data.hpp"

namespace rpwno {

namespace {

constexpr double kPi = std::numbers::pi;

// Plan creation is not thread-safe in FFTW; execution on new arrays is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n), real_(n), spec_(n / 2 + 1) {
        std::lock_guard lock(planner_mutex());
        const int ni = static_cast<int>(n);
        auto* c = reinterpret_cast<fftw_complex*>(spec_.data());
        // FFTW_ESTIMATE keeps the chosen algorithm, and so the rounding, identical across runs.
        forward_ = fftw_plan_dft_r2c_1d(ni, real_.data(), c, FFTW_ESTIMATE);
        inverse_ = fftw_plan_dft_c2r_1d(ni, c, real_.data(), FFTW_ESTIMATE);
        if (!forward_ || !inverse_) throw std::runtime_error("FFTW planning failed");
    }
    ~RealFft() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    void forward(const std::vector<double>& x, std::vector<std::complex<double>>& out) {
        std::copy(x.begin(), x.end(), real_.begin());
        fftw_execute(forward_);
        out = spec_;
    }
    // Unnormalized inverse divided by n.
    void inverse(const std::vector<std::complex<double>>& in, std::vector<double>& out) {
        std::copy(in.begin(), in.end(), spec_.begin());
        fftw_execute(inverse_);
        out.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) out[j] = real_[j] / static_cast<double>(n_);
    }

private:
    std::size_t n_;
    std::vector<double> real_;
    std::vector<std::complex<double>> spec_;
    fftw_plan forward_ = nullptr;
    fftw_plan inverse_ = nullptr;
};

}  // namespace

void BurgersConfig::validate() const {
    if (!(viscosity > 0.0)) throw std::invalid_argument("Burgers viscosity must be > 0");
    if (grid < 8 || grid % 2) throw std::invalid_argument("Burgers grid must be even and >= 8");
    if (!(dt > 0.0) || !(final_time > 0.0)) throw std::invalid_argument("Burgers dt and final time must be > 0");
    const double steps = final_time / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * steps)
        throw std::invalid_argument("final time must be an integer number of steps");
    const double kmax = kPi * static_cast<double>(grid);
    if (dt * viscosity * kmax * kmax > 2.5)
        throw std::invalid_argument("dt violates the RK4 diffusive stability bound dt*nu*(pi n)^2 <= 2.5");
}

Tensor solve_burgers(const Tensor& ic, const BurgersConfig& config) {
    config.validate();
    const std::size_t n = config.grid;
    if (ic.numel() != n) throw std::invalid_argument("initial condition has " + std::to_string(ic.numel()) +
                                                     " points, grid is " + std::to_string(n));
    if (!ic.all_finite()) throw std::invalid_argument("initial condition is not finite");
    const std::size_t nk = n / 2 + 1;
    const double kmax = kPi * static_cast<double>(n);
    double umax = 0.0;
    for (double v : ic.values()) umax = std::max(umax, std::abs(v));
    if (config.dt * (config.viscosity * kmax * kmax + umax * kmax) > 2.5)
        throw std::invalid_argument("dt violates the RK4 stability bound for this initial condition");

    std::vector<double> k(nk), decay(nk), keep(nk);
    for (std::size_t j = 0; j < nk; ++j) {
        k[j] = 2.0 * kPi * static_cast<double>(j);
        decay[j] = config.viscosity * k[j] * k[j];
        keep[j] = 3 * j < n ? 1.0 : 0.0;  // 2/3 rule
    }

    RealFft fft(n);
    std::vector<double> u(ic.vec());
    std::vector<std::complex<double>> uh, wh, tmp(nk);
    fft.forward(u, uh);
    const std::complex<double> I(0.0, 1.0);

    auto rhs = [&](const std::vector<std::complex<double>>& in, std::vector<std::complex<double>>& out) {
        for (std::size_t j = 0; j < nk; ++j) tmp[j] = in[j] * keep[j];
        fft.inverse(tmp, u);
        for (auto& v : u) v = 0.5 * v * v;
        fft.forward(u, wh);
        out.resize(nk);
        for (std::size_t j = 0; j < nk; ++j) out[j] = -I * k[j] * keep[j] * wh[j] - decay[j] * in[j];
    };

    const auto steps = static_cast<std::size_t>(std::llround(config.final_time / config.dt));
    const double dt = config.dt;
    std::vector<std::complex<double>> k1, k2, k3, k4, stage(nk);
    for (std::size_t s = 0; s < steps; ++s) {
        rhs(uh, k1);
        for (std::size_t j = 0; j < nk; ++j) stage[j] = uh[j] + 0.5 * dt * k1[j];
        rhs(stage, k2);
        for (std::size_t j = 0; j < nk; ++j) stage[j] = uh[j] + 0.5 * dt * k2[j];
        rhs(stage, k3);
        for (std::size_t j = 0; j < nk; ++j) stage[j] = uh[j] + dt * k3[j];
        rhs(stage, k4);
        for (std::size_t j = 0; j < nk; ++j) uh[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        if (s % 100 == 99 || s + 1 == steps)
            for (const auto& c : uh)
                if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
                    throw std::runtime_error("Burgers solution became non-finite at step " + std::to_string(s + 1) +
                                             " (t = " + std::to_string((s + 1) * dt) + ")");
    }
    fft.inverse(uh, u);
    return Tensor({n}, u);
}

DarcyResult solve_darcy(const Tensor& a, const DarcyConfig& config) {
    const std::size_t n = config.grid;
    if (a.rank() != 2 || a.extent(0) != n || a.extent(1) != n)
        throw std::invalid_argument("permeability shape " + shape_str(a.shape()) + " does not match grid " +
                                    std::to_string(n));
    for (double v : a.values())
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("permeability must be strictly positive");

    const double h2 = 1.0 / static_cast<double>(n * n);
    auto harmonic = [](double x, double y) { return 2.0 * x * y / (x + y); };
    // Face transmissibilities: east[r][c] couples (r,c)-(r,c+1); south[r][c] couples (r,c)-(r+1,c).
    std::vector<double> east(n * n, 0.0), south(n * n, 0.0), diag(n * n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const std::size_t i = r * n + c;
            if (c + 1 < n) east[i] = harmonic(a[i], a[i + 1]) / h2;
            if (r + 1 < n) south[i] = harmonic(a[i], a[i + n]) / h2;
        }
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const std::size_t i = r * n + c;
            double d = 0.0;
            // Boundary faces sit half a cell away: transmissibility 2a/h^2.
            d += c + 1 < n ? east[i] : 2.0 * a[i] / h2;
            d += c > 0 ? east[i - 1] : 2.0 * a[i] / h2;
            d += r + 1 < n ? south[i] : 2.0 * a[i] / h2;
            d += r > 0 ? south[i - n] : 2.0 * a[i] / h2;
            diag[i] = d;
        }
    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) {
                const std::size_t i = r * n + c;
                double v = diag[i] * x[i];
                if (c + 1 < n) v -= east[i] * x[i + 1];
                if (c > 0) v -= east[i - 1] * x[i - 1];
                if (r + 1 < n) v -= south[i] * x[i + n];
                if (r > 0) v -= south[i - n] * x[i - n];
                y[i] = v;
            }
    };
    auto dot = [](const std::vector<double>& x, const std::vector<double>& y) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
        return s;
    };

    const std::size_t m = n * n;
    std::vector<double> x(m, 0.0), r(m, config.forcing), z(m), p(m), q(m);
    const double bnorm = std::sqrt(dot(r, r));
    DarcyResult result;
    if (bnorm == 0.0) {
        result.pressure = Tensor({n, n});
        return result;
    }
    for (std::size_t i = 0; i < m; ++i) z[i] = r[i] / diag[i];
    p = z;
    double rz = dot(r, z);
    const std::size_t cap = config.max_iterations ? config.max_iterations : 20 * m;
    std::size_t it = 0;
    double rel = 1.0;
    while (rel > config.tolerance) {
        if (it == cap)
            throw std::runtime_error("Darcy CG did not converge in " + std::to_string(cap) +
                                     " iterations (relative residual " + std::to_string(rel) + ")");
        apply(p, q);
        const double alpha = rz / dot(p, q);
        for (std::size_t i = 0; i < m; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rel = std::sqrt(dot(r, r)) / bnorm;
        for (std::size_t i = 0; i < m; ++i) z[i] = r[i] / diag[i];
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < m; ++i) p[i] = z[i] + beta * p[i];
        ++it;
    }
    result.pressure = Tensor({n, n}, std::move(x));
    result.iterations = it;
    result.relative_residual = rel;
    return result;
}

}  // namespace rpwno
