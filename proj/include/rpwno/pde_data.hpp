#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "rpwno/tensor.hpp"

namespace rpwno {

enum class GrfBasis { PeriodicFourier, NeumannCosine };

// Gaussian random field with covariance scale * (-Laplacian + shift)^exponent on [0,1]^d.
// A mode with Laplacian eigenvalue lambda has coefficient std sqrt(scale) * (lambda + shift)^(exponent/2).
struct GrfSpec {
    int dims = 1;
    double scale = 625.0;
    double shift = 25.0;
    double exponent = -2.0;
    GrfBasis basis = GrfBasis::PeriodicFourier;
    std::size_t grid = 128;
    std::uint64_t seed = 0;

    static GrfSpec burgers(std::size_t grid, std::uint64_t seed);
    static GrfSpec darcy(std::size_t grid, std::uint64_t seed);
    void validate() const;
    double mode_std(double lambda) const;
};

// Grid points: periodic x_j = j/n, Neumann cell centres (j + 0.5)/n.
std::vector<double> grf_coordinates(const GrfSpec& spec);

// [count, grid] or [count, grid, grid]. Draw i depends only on (seed, i).
Tensor sample_grf(const GrfSpec& spec, std::size_t count);

// > 0 -> 12, < 0 -> 3, exactly 0 -> 12.
double psi_threshold(double v);
Tensor psi_threshold(const Tensor& raw);

struct BurgersConfig {
    double viscosity = 0.01;
    std::size_t grid = 128;
    double final_time = 1.0;
    double dt = 1e-4;

    // RK4 on the stiffest retained mode: dt * (nu k^2 + max|u| k) must stay inside the
    // real-axis stability interval (2.78); 2.5 is enforced.
    void validate() const;
};

// Fourier pseudo-spectral with 2/3 dealiasing and classical RK4. Periodic on [0,1).
Tensor solve_burgers(const Tensor& ic, const BurgersConfig& config);

struct DarcyConfig {
    std::size_t grid = 32;
    double forcing = 1.0;
    double tolerance = 1e-10;  // relative residual
    std::size_t max_iterations = 0;  // 0: 20 * grid^2
};

struct DarcyResult {
    Tensor pressure;
    std::size_t iterations = 0;
    double relative_residual = 0.0;
};

// -div(a grad u) = f on the unit square, u = 0 on the boundary. Cell-centred finite volumes
// with harmonic-mean face permeabilities, solved with Jacobi-preconditioned CG.
DarcyResult solve_darcy(const Tensor& a, const DarcyConfig& config);

enum class Problem { Burgers, Darcy };
std::string to_string(Problem p);
Problem problem_from_string(const std::string& s);

struct Dataset {
    Problem problem = Problem::Burgers;
    Tensor inputs;   // [s, spatial..., 1]
    Tensor outputs;  // [s, spatial..., 1]
    std::vector<std::vector<double>> coords;  // per spatial axis, monotone in [0, 1]
    nlohmann::json metadata;

    std::size_t size() const { return inputs.rank() ? inputs.extent(0) : 0; }
    std::vector<std::size_t> grid() const;
    Dataset subset(std::size_t begin, std::size_t count) const;
    void validate() const;
};

struct GenerateOptions {
    BurgersConfig burgers;
    DarcyConfig darcy;
};

Dataset build_dataset(Problem problem, std::size_t count, std::size_t grid, std::uint64_t seed,
                      const GenerateOptions& options = {});

std::uint64_t dataset_checksum(const Dataset& d);

}  // namespace rpwno
