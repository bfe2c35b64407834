#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rpwno/adam.hpp"
#include "rpwno/wno.hpp"

namespace rpwno {

// Trainable network paired with a frozen, independently initialized prior of the same
// architecture. Output = trainable(x) + beta * prior(x).
struct RpWno {
    RpWno(const WnoConfig& config, std::uint64_t seed, double beta);

    WnoModel trainable;
    WnoModel prior;
    double beta;
    std::uint64_t seed;
    std::vector<double> loss_history;  // mean training loss per epoch
};

// Seed streams derived from a member seed.
std::uint64_t prior_seed(std::uint64_t member_seed);
std::uint64_t shuffle_seed(std::uint64_t member_seed);

// Pointwise standardization over the sample axis: (x - mean) / (std + eps).
struct Normalizer {
    Tensor mean;  // one sample's extents
    Tensor std;
    double eps = 1e-5;

    static Normalizer fit(const Tensor& data);
    bool empty() const { return mean.rank() == 0; }
    Tensor encode(const Tensor& x) const;
    Tensor decode(const Tensor& x) const;
};

struct Ensemble {
    WnoConfig config;
    double beta = 1.0;
    std::vector<RpWno> members;
    Normalizer input_norm;   // function channels only
    Normalizer output_norm;
    std::vector<std::vector<double>> coords;  // grid coordinates per spatial axis

    // Encoded function channels followed by the coordinate channels.
    Tensor model_input(const Tensor& functions) const;
};

// Throws on n_c < 2 or repeated seeds unless `allow_repeated_seeds` (validation mode).
Ensemble make_ensemble(const WnoConfig& config, double beta, std::span<const std::uint64_t> seeds,
                       std::vector<std::vector<double>> coords, bool allow_repeated_seeds = false);

struct TrainConfig {
    std::size_t epochs = 300;
    std::size_t batch_size = 20;
    AdamOptions adam;
    std::size_t lr_step = 50;  // multiply lr by lr_gamma every lr_step epochs
    double lr_gamma = 0.5;
    bool cache_prior = true;

    void validate() const;
};

// Mean over samples of ||pred_i - truth_i|| / ||truth_i||.
Var relative_l2_loss(Var pred, const Tensor& truth);
double relative_l2(const Tensor& pred, const Tensor& truth);

// Prior outputs in normalized space for every row of `inputs` (model-ready).
Tensor precompute_prior_outputs(const RpWno& member, const Tensor& inputs);

// Training forward: trainable output plus beta times the prior output. The prior is read
// as a constant, never a tape parameter. beta == 0 skips the prior entirely.
Var rp_forward(Tape& tape, Var input, RpWno& member);
Tensor rp_predict(const RpWno& member, const Tensor& inputs);

// Model-ready inputs and physical-space targets.
struct TrainingData {
    Tensor inputs;
    Tensor targets;
};

// Algorithm 1 inner loops for one member. Returns per-epoch mean training loss.
std::vector<double> train_member(RpWno& member, const TrainingData& data, const Normalizer& output_norm,
                                 const TrainConfig& config);

// The same loop on a bare network, no prior.
std::vector<double> train_wno(WnoModel& model, std::uint64_t shuffle, const TrainingData& data,
                              const Normalizer& output_norm, const TrainConfig& config);

enum class Execution { Serial, Parallel };

// Worker count for parallel training: min(members, hardware threads, RPWNO_THREADS).
std::size_t worker_count(std::size_t members);

// Fits the normalizers on this data, then trains every member independently.
void train_ensemble(Ensemble& ensemble, const Tensor& functions, const Tensor& outputs, const TrainConfig& config,
                    Execution mode = Execution::Parallel);

struct PredictionStats {
    Tensor mean;
    Tensor std;
    Tensor lower95;
    Tensor upper95;
};

// Physical-space prediction of each member.
std::vector<Tensor> member_predictions(const Ensemble& ensemble, const Tensor& functions);
// Elementwise mean and population standard deviation (divisor n_c).
PredictionStats ensemble_stats(std::span<const Tensor> predictions);
PredictionStats predict_stats(const Ensemble& ensemble, const Tensor& functions);

std::uint64_t prior_checksum(const Ensemble& ensemble);

}  // namespace rpwno
