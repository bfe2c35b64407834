#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "rpwno/rp_ensemble.hpp"

namespace rpwno {

// Flat mean of |pred - truth| over every entry.
double mae(const Tensor& pred, const Tensor& truth);
// Flat mean of the ensemble std field.
double mean_std(const PredictionStats& stats);
// 100 * sum (pred - truth)^2 / sum truth^2 over the whole tensor.
double nmse_percent(const Tensor& pred, const Tensor& truth);
// The same ratio per sample (leading axis).
std::vector<double> nmse_percent_per_sample(const Tensor& pred, const Tensor& truth);
// 100 * mean over samples of ||pred_i - truth_i|| / ||truth_i||.
double rel_l2_percent(const Tensor& pred, const Tensor& truth);
// Fraction of entries with lower95 <= truth <= upper95.
double ci_coverage(const PredictionStats& stats, const Tensor& truth);

struct PointPdf {
    std::vector<double> location;
    std::vector<double> abscissae;
    std::vector<double> density;
    double bandwidth = 0.0;
    // Zero-variance input: density is all zero and the whole mass sits at spike_value.
    bool degenerate = false;
    double spike_value = 0.0;
};

// Gaussian KDE with Silverman's bandwidth 1.06 * sigma * n^(-1/5). Needs >= 30 values.
PointPdf empirical_pdf(std::span<const double> values, std::span<const double> abscissae,
                       std::vector<double> location = {});

// Evenly spaced abscissae covering both samples with a margin of 3 bandwidths.
std::vector<double> pdf_abscissae(std::span<const double> a, std::span<const double> b, std::size_t count);

struct SampleMetrics {
    std::size_t index = 0;
    double mae = 0.0;
    double mean_std = 0.0;
    double rel_l2_percent = 0.0;
    double nmse_percent = 0.0;
    double coverage95 = 0.0;
};

struct EvalReport {
    double mae = 0.0;
    double mean_std = 0.0;
    double rel_l2_percent = 0.0;
    double nmse_percent = 0.0;
    double coverage95 = 0.0;
    std::vector<SampleMetrics> per_sample;

    nlohmann::json to_json() const;
};

EvalReport evaluate(const PredictionStats& stats, const Tensor& truth);

}  // namespace rpwno
