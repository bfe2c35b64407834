#include <stdexcept>
#include <string>

#include "rpwno/pde_data.hpp"
#include "rpwno/random.hpp"

namespace rpwno {

std::string to_string(Problem p) { return p == Problem::Burgers ? "burgers" : "darcy"; }

Problem problem_from_string(const std::string& s) {
    if (s == "burgers") return Problem::Burgers;
    if (s == "darcy") return Problem::Darcy;
    throw std::invalid_argument("unknown problem '" + s + "' (expected burgers or darcy)");
}

std::vector<std::size_t> Dataset::grid() const {
    if (inputs.rank() < 3) return {};
    return {inputs.shape().begin() + 1, inputs.shape().end() - 1};
}

Dataset Dataset::subset(std::size_t begin, std::size_t count) const {
    Dataset d;
    d.problem = problem;
    d.inputs = inputs.slice(begin, count);
    d.outputs = outputs.slice(begin, count);
    d.coords = coords;
    d.metadata = metadata;
    d.metadata["subset"] = {{"begin", begin}, {"count", count}};
    return d;
}

void Dataset::validate() const {
    const std::size_t dims = problem == Problem::Burgers ? 1 : 2;
    if (inputs.rank() != dims + 2 || inputs.shape().back() != 1)
        throw std::invalid_argument("dataset inputs have shape " + shape_str(inputs.shape()));
    if (inputs.shape() != outputs.shape())
        throw std::invalid_argument("dataset inputs " + shape_str(inputs.shape()) + " and outputs " +
                                    shape_str(outputs.shape()) + " disagree");
    if (coords.size() != dims) throw std::invalid_argument("dataset needs one coordinate vector per axis");
    for (std::size_t a = 0; a < dims; ++a) {
        const auto& c = coords[a];
        if (c.size() != inputs.extent(a + 1)) throw std::invalid_argument("coordinate count does not match grid");
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (c[j] < 0.0 || c[j] > 1.0) throw std::invalid_argument("coordinates must lie in [0, 1]");
            if (j && !(c[j] > c[j - 1])) throw std::invalid_argument("coordinates must be increasing");
        }
    }
    if (problem == Problem::Darcy)
        for (double v : inputs.values())
            if (v != 3.0 && v != 12.0) throw std::invalid_argument("darcy permeability outside {3, 12}");
}

Dataset build_dataset(Problem problem, std::size_t count, std::size_t grid, std::uint64_t seed,
                      const GenerateOptions& options) {
    if (count == 0) throw std::invalid_argument("dataset count must be >= 1");
    Dataset d;
    d.problem = problem;
    const std::uint64_t field_seed = derive_seed(seed, 0);
    nlohmann::json meta = {{"problem", to_string(problem)}, {"count", count}, {"grid", grid}, {"seed", seed}};

    if (problem == Problem::Burgers) {
        BurgersConfig cfg = options.burgers;
        cfg.grid = grid;
        const GrfSpec spec = GrfSpec::burgers(grid, field_seed);
        const Tensor ics = sample_grf(spec, count);
        d.inputs = Tensor({count, grid, 1});
        d.outputs = Tensor({count, grid, 1});
        for (std::size_t i = 0; i < count; ++i) {
            const Tensor ic = ics.slice(i, 1).reshaped({grid});
            Tensor u;
            try {
                u = solve_burgers(ic, cfg);
            } catch (const std::exception& e) {
                throw std::runtime_error("sample " + std::to_string(i) + ": " + e.what());
            }
            for (std::size_t j = 0; j < grid; ++j) {
                d.inputs[i * grid + j] = ic[j];
                d.outputs[i * grid + j] = u[j];
            }
        }
        d.coords = {grf_coordinates(spec)};
        meta["grf"] = {{"scale", spec.scale}, {"shift", spec.shift}, {"exponent", spec.exponent},
                       {"basis", "periodic-fourier"}, {"seed", spec.seed}};
        meta["solver"] = {{"scheme", "fourier pseudo-spectral, 2/3 dealiasing, RK4"},
                          {"viscosity", cfg.viscosity}, {"dt", cfg.dt}, {"final_time", cfg.final_time}};
    } else {
        DarcyConfig cfg = options.darcy;
        cfg.grid = grid;
        const GrfSpec spec = GrfSpec::darcy(grid, field_seed);
        const Tensor a = psi_threshold(sample_grf(spec, count));
        const std::size_t m = grid * grid;
        d.inputs = a.reshaped({count, grid, grid, 1});
        d.outputs = Tensor({count, grid, grid, 1});
        for (std::size_t i = 0; i < count; ++i) {
            DarcyResult r;
            try {
                r = solve_darcy(a.slice(i, 1).reshaped({grid, grid}), cfg);
            } catch (const std::exception& e) {
                throw std::runtime_error("sample " + std::to_string(i) + ": " + e.what());
            }
            std::copy(r.pressure.values().begin(), r.pressure.values().end(), d.outputs.data() + i * m);
        }
        const auto c = grf_coordinates(spec);
        d.coords = {c, c};
        meta["grf"] = {{"scale", spec.scale}, {"shift", spec.shift}, {"exponent", spec.exponent},
                       {"basis", "neumann-cosine"}, {"seed", spec.seed}, {"threshold", "psi: >=0 -> 12, <0 -> 3"}};
        meta["solver"] = {{"scheme", "cell-centred finite volume, harmonic faces, Jacobi-PCG"},
                          {"boundary", "u = 0"}, {"forcing", cfg.forcing}, {"tolerance", cfg.tolerance}};
    }
    d.metadata = std::move(meta);
    return d;
}

std::uint64_t dataset_checksum(const Dataset& d) {
    std::uint64_t h = checksum(d.inputs);
    h = checksum_combine(h, checksum(d.outputs));
    for (const auto& c : d.coords) h = checksum_combine(h, checksum(Tensor({c.size()}, c)));
    return h;
}

}  // namespace rpwno
