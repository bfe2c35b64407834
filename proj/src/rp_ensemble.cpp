#include "rpwno/rp_ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

#include "rpwno/random.hpp"

namespace rpwno {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}

Tensor scaled(double beta, const Tensor& t) {
    Tensor out(t.shape());
    for (std::size_t i = 0; i < t.numel(); ++i) out[i] = beta * t[i];
    return out;
}

// Output decoding on the tape: y * (std + eps) + mean, broadcast over samples.
Var decode_var(Var y, const Normalizer& norm) {
    const Tensor& yv = y.value();
    const std::size_t m = norm.mean.numel();
    if (yv.rank() == 0 || yv.sample_size() != m)
        throw std::invalid_argument("decode: prediction shape " + shape_str(yv.shape()) +
                                    " does not match normalizer " + shape_str(norm.mean.shape()));
    auto factor = std::make_shared<std::vector<double>>(m);
    for (std::size_t j = 0; j < m; ++j) (*factor)[j] = norm.std[j] + norm.eps;
    Tensor out(yv.shape());
    for (std::size_t i = 0; i < yv.numel(); ++i) out[i] = yv[i] * (*factor)[i % m] + norm.mean[i % m];
    const auto iy = y.id();
    return y.tape()->record(std::move(out), {y}, [iy, factor, m](Tape& t, const Tensor& g) {
        auto& d = t.grad_buffer(iy);
        for (std::size_t i = 0; i < d.numel(); ++i) d[i] += g[i] * (*factor)[i % m];
    });
}

using PriorTerm = std::function<Tensor(std::span<const std::size_t> batch, const Tensor& batch_inputs)>;

std::vector<double> train_loop(WnoModel& model, std::uint64_t shuffle, const TrainingData& data,
                               const Normalizer& output_norm, const TrainConfig& config, const PriorTerm& prior) {
    config.validate();
    const std::size_t n = data.inputs.rank() ? data.inputs.extent(0) : 0;
    if (n == 0) throw std::invalid_argument("train: empty dataset");
    if (data.targets.rank() == 0 || data.targets.extent(0) != n)
        throw std::invalid_argument("train: " + std::to_string(n) + " inputs but targets " +
                                    shape_str(data.targets.shape()));

    auto params = model.parameters();
    AdamState adam = adam_init(params, config.adam);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(shuffle);
    std::vector<double> history;
    history.reserve(config.epochs);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        adam.options.lr = config.adam.lr * std::pow(config.lr_gamma, static_cast<double>(epoch / config.lr_step));
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0, b = 0; start < n; start += config.batch_size, ++b) {
            const std::size_t count = std::min(config.batch_size, n - start);
            std::span<const std::size_t> batch(order.data() + start, count);
            const Tensor xb = data.inputs.gather(batch);
            const Tensor tb = data.targets.gather(batch);

            model.zero_grad();
            Tape tape;
            Var y = wno_forward(tape, tape.constant_ref(xb), model);
            if (prior) y = add(y, tape.constant(prior(batch, xb)));
            Var loss = relative_l2_loss(decode_var(y, output_norm), tb);
            const double value = loss.value().item();
            if (!std::isfinite(value))
                throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                         std::to_string(b));
            tape.backward(loss);
            adam_step(params, adam);
            total += value * static_cast<double>(count);
        }
        history.push_back(total / static_cast<double>(n));
    }
    return history;
}

}  // namespace

std::uint64_t prior_seed(std::uint64_t member_seed) { return splitmix64(member_seed ^ 0x5052494f52ULL); }
std::uint64_t shuffle_seed(std::uint64_t member_seed) { return splitmix64(member_seed ^ 0x5348554646ULL); }

RpWno::RpWno(const WnoConfig& config, std::uint64_t seed, double beta)
    : trainable(config, seed), prior(config, prior_seed(seed)), beta(beta), seed(seed) {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be finite and >= 0");
}

Normalizer Normalizer::fit(const Tensor& data) {
    if (data.rank() < 2 || data.extent(0) == 0) throw std::invalid_argument("Normalizer::fit: need [s, ...] data");
    const std::size_t s = data.extent(0), m = data.sample_size();
    Shape sample(data.shape().begin() + 1, data.shape().end());
    Normalizer n;
    n.mean = Tensor(sample);
    n.std = Tensor(sample);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < m; ++j) n.mean[j] += data[i * m + j];
    for (std::size_t j = 0; j < m; ++j) n.mean[j] /= static_cast<double>(s);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double d = data[i * m + j] - n.mean[j];
            n.std[j] += d * d;
        }
    for (std::size_t j = 0; j < m; ++j) n.std[j] = std::sqrt(n.std[j] / static_cast<double>(s));
    return n;
}

Tensor Normalizer::encode(const Tensor& x) const {
    if (x.rank() == 0 || x.sample_size() != mean.numel())
        throw std::invalid_argument("encode: shape " + shape_str(x.shape()) + " vs " + shape_str(mean.shape()));
    const std::size_t m = mean.numel();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = (x[i] - mean[i % m]) / (std[i % m] + eps);
    return out;
}

Tensor Normalizer::decode(const Tensor& x) const {
    if (x.rank() == 0 || x.sample_size() != mean.numel())
        throw std::invalid_argument("decode: shape " + shape_str(x.shape()) + " vs " + shape_str(mean.shape()));
    const std::size_t m = mean.numel();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double factor = std[i % m] + eps;
        out[i] = x[i] * factor + mean[i % m];
    }
    return out;
}

Tensor Ensemble::model_input(const Tensor& functions) const {
    const std::size_t dims = config.grid.size();
    if (functions.rank() != dims + 2 || functions.shape().back() != config.function_channels)
        throw std::invalid_argument("model_input: function tensor " + shape_str(functions.shape()) +
                                    " does not fit the configured grid");
    for (std::size_t a = 0; a < dims; ++a)
        if (functions.extent(a + 1) != config.grid[a] || coords.at(a).size() != config.grid[a])
            throw std::invalid_argument("model_input: grid extent mismatch on axis " + std::to_string(a));
    const Tensor enc = input_norm.empty() ? functions : input_norm.encode(functions);
    Shape cs = functions.shape();
    cs.back() = dims;
    Tensor grid(cs);
    const std::size_t s = functions.extent(0), pts = functions.sample_size() / config.function_channels;
    for (std::size_t b = 0; b < s; ++b)
        for (std::size_t i = 0; i < pts; ++i) {
            double* g = grid.data() + (b * pts + i) * dims;
            if (dims == 1) {
                g[0] = coords[0][i];
            } else {
                g[0] = coords[0][i / config.grid[1]];
                g[1] = coords[1][i % config.grid[1]];
            }
        }
    return concat_last(enc, grid);
}

Ensemble make_ensemble(const WnoConfig& config, double beta, std::span<const std::uint64_t> seeds,
                       std::vector<std::vector<double>> coords, bool allow_repeated_seeds) {
    validate(config);
    if (seeds.size() < 2) throw std::invalid_argument("ensemble needs at least 2 members");
    if (!allow_repeated_seeds)
        for (std::size_t i = 0; i < seeds.size(); ++i)
            for (std::size_t j = i + 1; j < seeds.size(); ++j)
                if (seeds[i] == seeds[j])
                    throw std::invalid_argument("member seeds must be distinct (members " + std::to_string(i) +
                                                " and " + std::to_string(j) + ")");
    if (coords.size() != config.grid.size()) throw std::invalid_argument("one coordinate vector per axis required");
    Ensemble e;
    e.config = config;
    e.beta = beta;
    e.coords = std::move(coords);
    e.members.reserve(seeds.size());
    for (auto s : seeds) e.members.emplace_back(config, s, beta);
    return e;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (lr_step < 1) throw std::invalid_argument("lr_step must be >= 1");
    if (!(adam.lr >= 0.0) || !(lr_gamma > 0.0)) throw std::invalid_argument("invalid learning-rate schedule");
}

Var relative_l2_loss(Var pred, const Tensor& truth) {
    const Tensor& p = pred.value();
    require_same_shape(p, truth, "relative_l2_loss");
    if (p.rank() == 0) throw std::invalid_argument("relative_l2_loss: need a sample axis");
    const std::size_t s = p.extent(0), m = p.sample_size();
    auto coef = std::make_shared<std::vector<double>>(s);
    double total = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
        double dn = 0.0, tn = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double d = p[i * m + j] - truth[i * m + j];
            dn += d * d;
            tn += truth[i * m + j] * truth[i * m + j];
        }
        if (tn == 0.0) throw std::invalid_argument("relative_l2_loss: truth sample " + std::to_string(i) + " has zero norm");
        dn = std::sqrt(dn);
        tn = std::sqrt(tn);
        total += dn / tn;
        (*coef)[i] = dn > 0.0 ? 1.0 / (dn * tn * static_cast<double>(s)) : 0.0;
    }
    const auto ip = pred.id();
    const Tensor* tr = &truth;
    return pred.tape()->record(Tensor::scalar(total / static_cast<double>(s)), {pred},
                               [ip, coef, tr, m](Tape& t, const Tensor& g) {
                                   const Tensor& pv = t.value(ip);
                                   auto& d = t.grad_buffer(ip);
                                   const double go = g.item();
                                   for (std::size_t i = 0; i < d.numel(); ++i)
                                       d[i] += go * (*coef)[i / m] * (pv[i] - (*tr)[i]);
                               });
}

double relative_l2(const Tensor& pred, const Tensor& truth) {
    Tape t;
    return relative_l2_loss(t.constant_ref(pred), truth).value().item();
}

Tensor precompute_prior_outputs(const RpWno& member, const Tensor& inputs) {
    return wno_predict(member.prior, inputs);
}

Var rp_forward(Tape& tape, Var input, RpWno& member) {
    Var y = wno_forward(tape, input, member.trainable);
    if (member.beta == 0.0) return y;
    const std::size_t chunk = input.value().rank() ? input.value().extent(0) : 1;
    return add(y, tape.constant(scaled(member.beta, wno_predict(member.prior, input.value(), chunk))));
}

Tensor rp_predict(const RpWno& member, const Tensor& inputs) {
    Tensor y = wno_predict(member.trainable, inputs);
    if (member.beta == 0.0) return y;
    const Tensor p = scaled(member.beta, wno_predict(member.prior, inputs));
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] = y[i] + p[i];
    return y;
}

std::vector<double> train_member(RpWno& member, const TrainingData& data, const Normalizer& output_norm,
                                 const TrainConfig& config) {
    const std::uint64_t before = parameter_checksum(member.prior);
    PriorTerm prior;
    Tensor cache;
    if (member.beta != 0.0) {
        if (config.cache_prior) {
            cache = precompute_prior_outputs(member, data.inputs);
            if (cache.extent(0) != data.inputs.extent(0))
                throw std::logic_error("prior cache size does not match the training set");
            prior = [&](std::span<const std::size_t> batch, const Tensor&) {
                return scaled(member.beta, cache.gather(batch));
            };
        } else {
            prior = [&](std::span<const std::size_t>, const Tensor& xb) {
                return scaled(member.beta, wno_predict(member.prior, xb, xb.extent(0)));
            };
        }
    }
    member.loss_history = train_loop(member.trainable, shuffle_seed(member.seed), data, output_norm, config, prior);
    if (parameter_checksum(member.prior) != before) throw std::logic_error("frozen prior was modified");
    return member.loss_history;
}

std::vector<double> train_wno(WnoModel& model, std::uint64_t shuffle, const TrainingData& data,
                              const Normalizer& output_norm, const TrainConfig& config) {
    return train_loop(model, shuffle, data, output_norm, config, {});
}

std::size_t worker_count(std::size_t members) {
    std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("RPWNO_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) n = std::min(n, static_cast<std::size_t>(v));
    }
    return std::max<std::size_t>(1, std::min(n, members));
}

void train_ensemble(Ensemble& ensemble, const Tensor& functions, const Tensor& outputs, const TrainConfig& config,
                    Execution mode) {
    config.validate();
    ensemble.input_norm = Normalizer::fit(functions);
    ensemble.output_norm = Normalizer::fit(outputs);
    const TrainingData data{ensemble.model_input(functions), outputs};

    const std::size_t n = ensemble.members.size();
    std::vector<std::string> errors(n);
    auto run = [&](std::size_t i) {
        try {
            train_member(ensemble.members[i], data, ensemble.output_norm, config);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };
    if (mode == Execution::Serial) {
        for (std::size_t i = 0; i < n; ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < worker_count(n); ++w)
            workers.emplace_back([&] {
                for (std::size_t i; (i = next.fetch_add(1)) < n;) run(i);
            });
        for (auto& w : workers) w.join();
    }
    std::string msg;
    for (std::size_t i = 0; i < n; ++i)
        if (!errors[i].empty()) msg += "member " + std::to_string(i) + ": " + errors[i] + "; ";
    if (!msg.empty()) throw std::runtime_error("ensemble training failed: " + msg);
}

std::vector<Tensor> member_predictions(const Ensemble& ensemble, const Tensor& functions) {
    const Tensor inputs = ensemble.model_input(functions);
    std::vector<Tensor> out;
    out.reserve(ensemble.members.size());
    for (const auto& m : ensemble.members) {
        Tensor y = rp_predict(m, inputs);
        out.push_back(ensemble.output_norm.empty() ? y : ensemble.output_norm.decode(y));
    }
    return out;
}

PredictionStats ensemble_stats(std::span<const Tensor> predictions) {
    const std::size_t n = predictions.size();
    if (n < 2) throw std::invalid_argument("ensemble statistics need at least 2 members");
    for (const auto& p : predictions) require_same_shape(p, predictions[0], "ensemble_stats");
    PredictionStats s;
    s.mean = Tensor(predictions[0].shape());
    s.std = Tensor(predictions[0].shape());
    const double nc = static_cast<double>(n);
    // Shifted by the first member so identical members give an exact mean and zero spread.
    const Tensor& base = predictions[0];
    for (const auto& p : predictions)
        for (std::size_t i = 0; i < p.numel(); ++i) s.mean[i] += p[i] - base[i];
    for (std::size_t i = 0; i < base.numel(); ++i) s.mean[i] = base[i] + s.mean[i] / nc;
    for (const auto& p : predictions)
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double d = p[i] - s.mean[i];
            s.std[i] += d * d;
        }
    for (auto& v : s.std.values()) v = std::sqrt(v / nc);
    s.lower95 = Tensor(s.mean.shape());
    s.upper95 = Tensor(s.mean.shape());
    for (std::size_t i = 0; i < s.mean.numel(); ++i) {
        s.lower95[i] = s.mean[i] - 1.96 * s.std[i];
        s.upper95[i] = s.mean[i] + 1.96 * s.std[i];
    }
    return s;
}

PredictionStats predict_stats(const Ensemble& ensemble, const Tensor& functions) {
    const auto preds = member_predictions(ensemble, functions);
    return ensemble_stats(preds);
}

std::uint64_t prior_checksum(const Ensemble& ensemble) {
    std::uint64_t h = 0;
    for (const auto& m : ensemble.members) h = checksum_combine(h, parameter_checksum(m.prior));
    return h;
}

}  // namespace rpwno
