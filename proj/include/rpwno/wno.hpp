#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "rpwno/autodiff.hpp"
#include "rpwno/wavelet.hpp"

namespace rpwno {

// Final-level subbands a wavelet block may learn. 1D uses Approx/Detail, 2D the four
// separable bands (first letter = row axis, second = column axis).
enum class Subband { Approx, Detail, LL, LH, HL, HH };

std::string to_string(Subband s);
Subband subband_from_string(std::string_view name);

struct WnoConfig {
    int spatial_dims = 1;
    std::vector<std::size_t> grid;       // spatial extents, one per dimension
    std::size_t function_channels = 1;   // input functions; grid coordinates are appended
    std::size_t width = 64;              // lifted channel count p
    std::size_t num_blocks = 4;
    int wavelet_order = 6;
    std::size_t levels = 1;
    std::vector<Subband> learned_subbands;
    std::size_t proj_hidden = 128;
    std::size_t out_channels = 1;

    std::size_t in_channels() const { return function_channels + static_cast<std::size_t>(spatial_dims); }
    std::vector<std::size_t> coarse_extents() const;
    std::size_t coarse_size() const;

    friend bool operator==(const WnoConfig&, const WnoConfig&) = default;
};

// Throws std::invalid_argument describing the first violated constraint.
void validate(const WnoConfig& config);

// Reference-width defaults with levels clamped to the grid: 1D Burgers (all bands learned,
// 128 hidden projection nodes) and 2D Darcy (LL + HL learned, 192 hidden nodes).
WnoConfig burgers_config(std::size_t grid);
WnoConfig darcy_config(std::size_t grid);

// lift + num_blocks * (|bands| * width^2 * coarse_size + width^2 + width) + projection head.
std::size_t parameter_count(const WnoConfig& config);

// Per-axis final-level analysis operators for a grid; shared read-only by every block.
class WaveletBasis {
public:
    WaveletBasis(const WaveletFilter& filter, std::vector<std::size_t> grid, std::size_t levels);

    std::size_t dims() const { return grid_.size(); }
    const std::vector<std::size_t>& grid() const { return grid_; }
    std::size_t grid_size() const;
    std::size_t coarse_size() const;
    const Tensor& axis_operator(std::size_t axis, Band band) const;

    // Final-level coefficients of one sample's channel-last field [spatial..., p] in `band`.
    void analyze(const double* x, std::size_t p, Subband band, double* coef) const;
    // out += synthesis of coefficients [coarse..., p] placed in `band`, all other bands zero.
    void synthesize_add(const double* coef, std::size_t p, Subband band, double* out) const;

private:
    std::vector<std::size_t> grid_;
    std::size_t levels_;
    std::vector<Tensor> low_;   // per axis, [grid/2^levels, grid]
    std::vector<Tensor> high_;
};

struct WaveletBlock {
    std::vector<Parameter> subband_weights;  // [p, p, coarse...] per learned band, no bias
    Parameter conv_weight;                   // [p, p]
    Parameter conv_bias;                     // [p]
};

class WnoModel {
public:
    WnoModel(WnoConfig config, std::uint64_t seed);

    const WnoConfig& config() const { return config_; }
    const WaveletBasis& basis() const { return *basis_; }
    const std::shared_ptr<const WaveletBasis>& basis_ptr() const { return basis_; }
    std::uint64_t seed() const { return seed_; }

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    void zero_grad();

    Parameter lift_weight, lift_bias;
    std::vector<WaveletBlock> blocks;
    Parameter proj_hidden_weight, proj_hidden_bias;
    Parameter proj_out_weight, proj_out_bias;

private:
    WnoConfig config_;
    std::uint64_t seed_ = 0;
    std::shared_ptr<const WaveletBasis> basis_;
};

std::uint64_t parameter_checksum(const WnoModel& model);

// Forward pieces. A non-const model binds its parameters as trainable tape nodes; a const
// model binds them as frozen constants that never receive gradients.
template <class Model>
Var lift(Tape& tape, Var input, Model& model);
template <class Block>
Var wmc_forward(Tape& tape, Var x, Block& block, const WaveletBasis& basis, const std::vector<Subband>& bands);
template <class Block>
Var cmc_forward(Tape& tape, Var x, Block& block);
template <class Block>
Var block_forward(Tape& tape, Var x, Block& block, const WaveletBasis& basis, const std::vector<Subband>& bands,
                  bool apply_activation);
template <class Model>
Var project(Tape& tape, Var x, Model& model);
template <class Model>
Var wno_forward(Tape& tape, Var input, Model& model);

// Learned mixing of final-level coefficients with all other coefficients passed through:
// out = x + sum_b S_b(W_b . A_b x - A_b x), S_b = A_b^T by orthonormality.
// `basis` must outlive the tape.
Var wavelet_mix(Var x, const std::vector<Var>& weights, const WaveletBasis& basis,
                const std::vector<Subband>& bands);

// Inference without gradients, evaluated `chunk` samples at a time.
Tensor wno_predict(const WnoModel& model, const Tensor& input, std::size_t chunk = 16);

extern template Var lift<WnoModel>(Tape&, Var, WnoModel&);
extern template Var lift<const WnoModel>(Tape&, Var, const WnoModel&);
extern template Var wmc_forward<WaveletBlock>(Tape&, Var, WaveletBlock&, const WaveletBasis&,
                                              const std::vector<Subband>&);
extern template Var wmc_forward<const WaveletBlock>(Tape&, Var, const WaveletBlock&, const WaveletBasis&,
                                                    const std::vector<Subband>&);
extern template Var cmc_forward<WaveletBlock>(Tape&, Var, WaveletBlock&);
extern template Var cmc_forward<const WaveletBlock>(Tape&, Var, const WaveletBlock&);
extern template Var block_forward<WaveletBlock>(Tape&, Var, WaveletBlock&, const WaveletBasis&,
                                                const std::vector<Subband>&, bool);
extern template Var block_forward<const WaveletBlock>(Tape&, Var, const WaveletBlock&, const WaveletBasis&,
                                                      const std::vector<Subband>&, bool);
extern template Var project<WnoModel>(Tape&, Var, WnoModel&);
extern template Var project<const WnoModel>(Tape&, Var, const WnoModel&);
extern template Var wno_forward<WnoModel>(Tape&, Var, WnoModel&);
extern template Var wno_forward<const WnoModel>(Tape&, Var, const WnoModel&);

}  // namespace rpwno
