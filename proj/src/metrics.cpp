#include "rpwno/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rpwno {

namespace {

void require_match(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": extents " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    if (a.numel() == 0) throw std::invalid_argument(std::string(what) + ": empty tensor");
}

double flat_mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

double mae(const Tensor& pred, const Tensor& truth) {
    require_match(pred, truth, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i) s += std::abs(pred[i] - truth[i]);
    return s / static_cast<double>(pred.numel());
}

double mean_std(const PredictionStats& stats) { return flat_mean(stats.std.values()); }

double nmse_percent(const Tensor& pred, const Tensor& truth) {
    require_match(pred, truth, "nmse_percent");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double d = pred[i] - truth[i];
        num += d * d;
        den += truth[i] * truth[i];
    }
    if (den == 0.0) throw std::invalid_argument("nmse_percent: truth has zero norm");
    return 100.0 * num / den;
}

std::vector<double> nmse_percent_per_sample(const Tensor& pred, const Tensor& truth) {
    require_match(pred, truth, "nmse_percent_per_sample");
    const std::size_t s = pred.extent(0);
    std::vector<double> out(s);
    for (std::size_t i = 0; i < s; ++i) out[i] = nmse_percent(pred.slice(i, 1), truth.slice(i, 1));
    return out;
}

double rel_l2_percent(const Tensor& pred, const Tensor& truth) {
    require_match(pred, truth, "rel_l2_percent");
    return 100.0 * relative_l2(pred, truth);
}

double ci_coverage(const PredictionStats& stats, const Tensor& truth) {
    require_match(stats.mean, truth, "ci_coverage");
    require_match(stats.lower95, truth, "ci_coverage");
    std::size_t inside = 0;
    for (std::size_t i = 0; i < truth.numel(); ++i)
        if (stats.lower95[i] <= truth[i] && truth[i] <= stats.upper95[i]) ++inside;
    return static_cast<double>(inside) / static_cast<double>(truth.numel());
}

PointPdf empirical_pdf(std::span<const double> values, std::span<const double> abscissae,
                       std::vector<double> location) {
    const std::size_t n = values.size();
    if (n < 30) throw std::invalid_argument("empirical_pdf needs at least 30 values, got " + std::to_string(n));
    PointPdf pdf;
    pdf.location = std::move(location);
    pdf.abscissae.assign(abscissae.begin(), abscissae.end());
    pdf.density.assign(abscissae.size(), 0.0);
    const double mean = flat_mean(values);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sigma = std::sqrt(var / static_cast<double>(n - 1));
    if (sigma == 0.0 || sigma < 1e-14 * std::abs(mean)) {
        pdf.degenerate = true;
        pdf.spike_value = mean;
        return pdf;
    }
    const double h = 1.06 * sigma * std::pow(static_cast<double>(n), -0.2);
    pdf.bandwidth = h;
    const double norm = 1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t j = 0; j < abscissae.size(); ++j) {
        double s = 0.0;
        for (double v : values) {
            const double z = (abscissae[j] - v) / h;
            s += std::exp(-0.5 * z * z);
        }
        pdf.density[j] = s * norm;
    }
    return pdf;
}

std::vector<double> pdf_abscissae(std::span<const double> a, std::span<const double> b, std::size_t count) {
    if (count < 2) throw std::invalid_argument("pdf_abscissae: need at least 2 points");
    double lo = INFINITY, hi = -INFINITY, spread = 0.0;
    for (auto v : {a, b}) {
        if (v.empty()) continue;
        const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        lo = std::min(lo, *mn);
        hi = std::max(hi, *mx);
        const double m = flat_mean(v);
        double var = 0.0;
        for (double x : v) var += (x - m) * (x - m);
        spread = std::max(spread, std::sqrt(var / static_cast<double>(v.size())) *
                                      std::pow(static_cast<double>(v.size()), -0.2));
    }
    if (!std::isfinite(lo)) throw std::invalid_argument("pdf_abscissae: no values");
    const double margin = std::max(3.0 * 1.06 * spread, 1e-6 * std::max(1.0, std::abs(hi)));
    lo -= margin;
    hi += margin;
    std::vector<double> x(count);
    for (std::size_t i = 0; i < count; ++i) x[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return x;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j = {{"mae", mae},
                        {"mean_std", mean_std},
                        {"rel_l2_percent", rel_l2_percent},
                        {"nmse_percent", nmse_percent},
                        {"coverage95", coverage95}};
    auto rows = nlohmann::json::array();
    for (const auto& s : per_sample)
        rows.push_back({{"index", s.index},
                        {"mae", s.mae},
                        {"mean_std", s.mean_std},
                        {"rel_l2_percent", s.rel_l2_percent},
                        {"nmse_percent", s.nmse_percent},
                        {"coverage95", s.coverage95}});
    j["per_sample"] = std::move(rows);
    return j;
}

EvalReport evaluate(const PredictionStats& stats, const Tensor& truth) {
    require_match(stats.mean, truth, "evaluate");
    EvalReport r;
    r.mae = mae(stats.mean, truth);
    r.mean_std = mean_std(stats);
    r.rel_l2_percent = rel_l2_percent(stats.mean, truth);
    r.nmse_percent = nmse_percent(stats.mean, truth);
    r.coverage95 = ci_coverage(stats, truth);
    const auto per = nmse_percent_per_sample(stats.mean, truth);
    for (std::size_t i = 0; i < truth.extent(0); ++i) {
        PredictionStats one{stats.mean.slice(i, 1), stats.std.slice(i, 1), stats.lower95.slice(i, 1),
                            stats.upper95.slice(i, 1)};
        const Tensor t = truth.slice(i, 1);
        r.per_sample.push_back({i, mae(one.mean, t), mean_std(one), rel_l2_percent(one.mean, t), per[i],
                                ci_coverage(one, t)});
    }
    return r;
}

}  // namespace rpwno
