#include "rpwno/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "rpwno/random.hpp"

namespace rpwno {

namespace {

using nlohmann::json;

template <class T>
void take(const json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

void write_json(const std::filesystem::path& path, const json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << j.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> row_of(const EvalReport& r) {
    return {r.mae, r.mean_std, r.rel_l2_percent, r.nmse_percent, r.coverage95};
}

Tensor functions_of(const Dataset& d) { return d.inputs; }

}  // namespace

RunConfig RunConfig::defaults(Problem problem, std::size_t grid) {
    RunConfig c;
    c.problem = problem;
    c.grid = grid;
    c.model = problem == Problem::Burgers ? burgers_config(grid) : darcy_config(grid);
    if (problem == Problem::Darcy) {
        c.train_count = 300;
        c.tds = {100, 300};
    }
    return c;
}

RunConfig RunConfig::from_json(const json& j) {
    const Problem problem = problem_from_string(j.value("problem", std::string("burgers")));
    const std::size_t grid = j.value("grid", problem == Problem::Burgers ? std::size_t{128} : std::size_t{32});
    RunConfig c = defaults(problem, grid);
    take(j, "dataset", c.dataset);
    take(j, "train_count", c.train_count);
    take(j, "test_count", c.test_count);
    take(j, "data_seed", c.data_seed);
    if (j.contains("burgers")) {
        const auto& b = j.at("burgers");
        take(b, "viscosity", c.generate.burgers.viscosity);
        take(b, "dt", c.generate.burgers.dt);
        take(b, "final_time", c.generate.burgers.final_time);
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        take(m, "width", c.model.width);
        take(m, "num_blocks", c.model.num_blocks);
        take(m, "wavelet_order", c.model.wavelet_order);
        take(m, "levels", c.model.levels);
        take(m, "proj_hidden", c.model.proj_hidden);
        if (m.contains("learned_subbands")) {
            c.model.learned_subbands.clear();
            for (const auto& b : m.at("learned_subbands"))
                c.model.learned_subbands.push_back(subband_from_string(b.get<std::string>()));
        }
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        take(t, "epochs", c.train.epochs);
        take(t, "batch_size", c.train.batch_size);
        take(t, "lr", c.train.adam.lr);
        take(t, "lr_step", c.train.lr_step);
        take(t, "lr_gamma", c.train.lr_gamma);
        take(t, "cache_prior", c.train.cache_prior);
    }
    take(j, "members", c.members);
    take(j, "beta", c.beta);
    take(j, "seed", c.seed);
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    take(j, "parallel", c.parallel);
    take(j, "checkpoint", c.checkpoint);
    take(j, "tds", c.tds);
    take(j, "betas", c.betas);
    take(j, "points", c.points);
    take(j, "pdf_points", c.pdf_points);
    c.validate();
    return c;
}

json RunConfig::to_json() const {
    std::vector<std::string> bands;
    for (auto b : model.learned_subbands) bands.push_back(rpwno::to_string(b));
    return {{"problem", rpwno::to_string(problem)},
            {"grid", grid},
            {"dataset", dataset},
            {"train_count", train_count},
            {"test_count", test_count},
            {"data_seed", data_seed},
            {"burgers",
             {{"viscosity", generate.burgers.viscosity},
              {"dt", generate.burgers.dt},
              {"final_time", generate.burgers.final_time}}},
            {"model",
             {{"width", model.width},
              {"num_blocks", model.num_blocks},
              {"wavelet_order", model.wavelet_order},
              {"levels", model.levels},
              {"proj_hidden", model.proj_hidden},
              {"learned_subbands", bands}}},
            {"train",
             {{"epochs", train.epochs},
              {"batch_size", train.batch_size},
              {"lr", train.adam.lr},
              {"lr_step", train.lr_step},
              {"lr_gamma", train.lr_gamma},
              {"cache_prior", train.cache_prior}}},
            {"members", members},
            {"beta", beta},
            {"seed", seed},
            {"out", out.string()},
            {"parallel", parallel},
            {"checkpoint", checkpoint},
            {"tds", tds},
            {"betas", betas},
            {"points", points},
            {"pdf_points", pdf_points}};
}

void RunConfig::validate() const {
    rpwno::validate(model);
    train.validate();
    const std::size_t dims = problem == Problem::Burgers ? 1 : 2;
    if (static_cast<std::size_t>(model.spatial_dims) != dims || model.grid != std::vector<std::size_t>(dims, grid))
        throw std::invalid_argument("model grid does not match the problem grid");
    if (members < 2) throw std::invalid_argument("members must be >= 2");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be finite and >= 0");
    for (double b : betas)
        if (!(b >= 0.0) || !std::isfinite(b)) throw std::invalid_argument("betas must be finite and >= 0");
    if (train_count == 0 || test_count == 0) throw std::invalid_argument("train_count and test_count must be >= 1");
    for (auto t : tds)
        if (t == 0 || t > train_count)
            throw std::invalid_argument("tds value " + std::to_string(t) + " outside [1, train_count=" +
                                        std::to_string(train_count) + "]");
    if (pdf_points < 2) throw std::invalid_argument("pdf_points must be >= 2");
}

std::vector<std::uint64_t> RunConfig::member_seeds() const {
    std::vector<std::uint64_t> s(members);
    for (std::size_t i = 0; i < members; ++i) s[i] = derive_seed(seed, i + 1);
    return s;
}

std::filesystem::path RunConfig::checkpoint_path() const {
    return checkpoint.empty() ? out / "checkpoint.rpwc" : std::filesystem::path(checkpoint);
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config " + path.string());
    return RunConfig::from_json(json::parse(is));
}

Dataset obtain_dataset(const RunConfig& config) {
    Dataset d = config.dataset.empty()
                    ? build_dataset(config.problem, config.train_count + config.test_count, config.grid,
                                    config.data_seed, config.generate)
                    : load_dataset(config.dataset);
    if (d.problem != config.problem) throw std::invalid_argument("dataset problem does not match config");
    if (d.grid() != config.model.grid) throw std::invalid_argument("dataset grid does not match config");
    if (d.size() < config.train_count + config.test_count)
        throw std::invalid_argument("dataset has " + std::to_string(d.size()) + " samples, config needs " +
                                    std::to_string(config.train_count + config.test_count));
    return d;
}

Dataset training_pool(const RunConfig& config, const Dataset& all, std::size_t tds) {
    if (tds > config.train_count) throw std::invalid_argument("tds exceeds the training pool");
    return all.subset(0, tds);
}

Dataset test_split(const RunConfig& config, const Dataset& all) {
    return all.subset(config.train_count, config.test_count);
}

Ensemble train_on(const RunConfig& config, const Dataset& train) {
    const auto seeds = config.member_seeds();
    Ensemble e = make_ensemble(config.model, config.beta, seeds, train.coords);
    train_ensemble(e, functions_of(train), train.outputs, config.train,
                   config.parallel ? Execution::Parallel : Execution::Serial);
    return e;
}

std::vector<ProbePoint> parse_points(const std::string& spec, int dims) {
    std::vector<ProbePoint> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.empty()) continue;
        ProbePoint p;
        p.label = item;
        p.coords.assign(static_cast<std::size_t>(dims), 0.5);
        std::vector<bool> seen(static_cast<std::size_t>(dims), false);
        std::stringstream parts(item);
        std::string kv;
        while (std::getline(parts, kv, ',')) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("bad probe '" + kv + "' (expected x=0.14)");
            const std::string key = kv.substr(0, eq);
            std::size_t axis = key == "x" ? 0 : key == "y" ? 1 : 99;
            if (axis >= static_cast<std::size_t>(dims)) throw std::invalid_argument("probe axis '" + key + "' not valid");
            std::size_t used = 0;
            const double v = std::stod(kv.substr(eq + 1), &used);
            if (used != kv.size() - eq - 1 || v < 0.0 || v > 1.0)
                throw std::invalid_argument("probe coordinate must be a number in [0, 1]: '" + kv + "'");
            p.coords[axis] = v;
            seen[axis] = true;
        }
        for (bool s : seen)
            if (!s) throw std::invalid_argument("probe '" + item + "' must give every axis");
        out.push_back(std::move(p));
    }
    return out;
}

std::size_t nearest_index(const ProbePoint& p, const std::vector<std::vector<double>>& coords) {
    std::size_t flat = 0;
    for (std::size_t a = 0; a < coords.size(); ++a) {
        const auto& c = coords[a];
        std::size_t best = 0;
        for (std::size_t j = 1; j < c.size(); ++j)
            if (std::abs(c[j] - p.coords[a]) < std::abs(c[best] - p.coords[a])) best = j;
        flat = flat * c.size() + best;
    }
    return flat;
}

EvalOutput evaluate_ensemble(const RunConfig& config, const Ensemble& ensemble, const Dataset& test) {
    if (test.grid() != ensemble.config.grid)
        throw std::invalid_argument("test grid does not match the checkpoint grid");
    EvalOutput out;
    out.stats = predict_stats(ensemble, functions_of(test));
    out.report = evaluate(out.stats, test.outputs);
    const std::size_t s = test.size(), pts = test.outputs.sample_size();
    for (const auto& p : parse_points(config.points, ensemble.config.spatial_dims)) {
        const std::size_t idx = nearest_index(p, test.coords);
        std::vector<double> pred(s), truth(s);
        for (std::size_t i = 0; i < s; ++i) {
            pred[i] = out.stats.mean[i * pts + idx];
            truth[i] = test.outputs[i * pts + idx];
        }
        const auto xs = pdf_abscissae(pred, truth, config.pdf_points);
        out.predicted_pdfs.push_back(empirical_pdf(pred, xs, p.coords));
        out.truth_pdfs.push_back(empirical_pdf(truth, xs, p.coords));
    }
    return out;
}

std::vector<TdsRow> sweep_tds(const RunConfig& config, const Dataset& all) {
    const Dataset test = test_split(config, all);
    std::vector<TdsRow> rows;
    for (auto tds : config.tds) {
        const auto t0 = std::chrono::steady_clock::now();
        const Ensemble e = train_on(config, training_pool(config, all, tds));
        rows.push_back({tds, evaluate(predict_stats(e, functions_of(test)), test.outputs)});
        std::cerr << "tds " << tds << ": mae " << rows.back().report.mae << ", mean std "
                  << rows.back().report.mean_std << ", rel-L2 " << rows.back().report.rel_l2_percent << "% ("
                  << seconds_since(t0) << " s)\n";
    }
    return rows;
}

std::vector<BetaRow> sweep_beta(const RunConfig& config, const Dataset& all) {
    const Dataset test = test_split(config, all);
    const Dataset train = training_pool(config, all, config.train_count);
    std::vector<BetaRow> rows;
    for (double beta : config.betas) {
        const auto t0 = std::chrono::steady_clock::now();
        RunConfig c = config;
        c.beta = beta;
        const Ensemble e = train_on(c, train);
        const auto preds = member_predictions(e, functions_of(test));
        double loss = 0.0;
        for (const auto& p : preds) loss += rel_l2_percent(p, test.outputs);
        BetaRow row;
        row.beta = beta;
        row.test_loss_percent = loss / static_cast<double>(preds.size());
        row.report = evaluate(ensemble_stats(preds), test.outputs);
        std::cerr << "beta " << beta << ": member test loss " << row.test_loss_percent << "%, ensemble rel-L2 "
                  << row.report.rel_l2_percent << "% (" << seconds_since(t0) << " s)\n";
        rows.push_back(std::move(row));
    }
    return rows;
}

int cmd_generate(const RunConfig& config, std::size_t count) {
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset d = build_dataset(config.problem, count, config.grid, config.data_seed, config.generate);
    const auto path = config.out / "dataset.rpwd";
    save_dataset(path, d);
    std::cout << "wrote " << path.string() << ": " << rpwno::to_string(d.problem) << ", inputs "
              << shape_str(d.inputs.shape()) << ", outputs " << shape_str(d.outputs.shape()) << ", seed "
              << config.data_seed << ", checksum " << std::hex << dataset_checksum(d) << std::dec << " ("
              << seconds_since(t0) << " s)\n";
    return 0;
}

int cmd_train(const RunConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset all = obtain_dataset(config);
    const Ensemble e = train_on(config, training_pool(config, all, config.train_count));
    save_checkpoint(config.checkpoint_path(), e, config.to_json());
    std::vector<std::vector<double>> rows;
    for (std::size_t m = 0; m < e.members.size(); ++m)
        for (std::size_t ep = 0; ep < e.members[m].loss_history.size(); ++ep)
            rows.push_back({static_cast<double>(m), static_cast<double>(ep), e.members[m].loss_history[ep]});
    write_csv(config.out / "losses.csv", {"member", "epoch", "train_loss"}, rows);
    write_json(config.out / "train_config.json", config.to_json());
    std::cout << "trained " << e.members.size() << " members on " << config.train_count << " samples; wrote "
              << config.checkpoint_path().string() << " (" << seconds_since(t0) << " s)\n";
    return 0;
}

int cmd_eval(const RunConfig& config) {
    nlohmann::json meta;
    const Ensemble e = load_checkpoint(config.checkpoint_path(), &meta);
    RunConfig c = config;
    c.model = e.config;
    const Dataset all = obtain_dataset(c);
    const Dataset test = test_split(c, all);
    const EvalOutput r = evaluate_ensemble(c, e, test);

    json report = r.report.to_json();
    report["checkpoint"] = c.checkpoint_path().string();
    report["test_samples"] = test.size();
    report["members"] = e.members.size();
    report["beta"] = e.beta;
    write_json(c.out / "report.json", report);

    std::vector<std::vector<double>> per;
    for (const auto& s : r.report.per_sample)
        per.push_back({static_cast<double>(s.index), s.mae, s.mean_std, s.rel_l2_percent, s.nmse_percent, s.coverage95});
    write_csv(c.out / "per_sample.csv", {"sample", "mae", "mean_std", "rel_l2_percent", "nmse_percent", "coverage95"}, per);

    const std::size_t dims = test.coords.size(), pts = test.outputs.sample_size();
    std::vector<std::string> header{"sample", "point"};
    const char* axes[] = {"x", "y"};
    for (std::size_t a = 0; a < dims; ++a) header.push_back(axes[a]);
    for (const char* h : {"truth", "mean", "std", "lower95", "upper95"}) header.push_back(h);
    std::vector<std::vector<double>> fields;
    fields.reserve(test.size() * pts);
    for (std::size_t i = 0; i < test.size(); ++i)
        for (std::size_t j = 0; j < pts; ++j) {
            const std::size_t k = i * pts + j;
            std::vector<double> row{static_cast<double>(i), static_cast<double>(j)};
            if (dims == 1) {
                row.push_back(test.coords[0][j]);
            } else {
                row.push_back(test.coords[0][j / test.coords[1].size()]);
                row.push_back(test.coords[1][j % test.coords[1].size()]);
            }
            for (double v : {test.outputs[k], r.stats.mean[k], r.stats.std[k], r.stats.lower95[k], r.stats.upper95[k]})
                row.push_back(v);
            fields.push_back(std::move(row));
        }
    write_csv(c.out / "fields.csv", header, fields);

    const auto probes = parse_points(c.points, e.config.spatial_dims);
    for (std::size_t p = 0; p < probes.size(); ++p) {
        std::vector<std::vector<double>> rows;
        const auto& pp = r.predicted_pdfs[p];
        const auto& tp = r.truth_pdfs[p];
        for (std::size_t k = 0; k < pp.abscissae.size(); ++k) rows.push_back({pp.abscissae[k], pp.density[k], tp.density[k]});
        std::string name = probes[p].label;
        for (auto& ch : name)
            if (ch == '=' || ch == ',') ch = '_';
        write_csv(c.out / ("pdf_" + name + ".csv"), {"abscissa", "predicted_density", "truth_density"}, rows);
    }
    std::cout << "mae " << r.report.mae << ", mean std " << r.report.mean_std << ", rel-L2 "
              << r.report.rel_l2_percent << "%, nmse " << r.report.nmse_percent << "%, coverage95 "
              << r.report.coverage95 << "\n";
    return 0;
}

int cmd_sweep_tds(const RunConfig& config) {
    const Dataset all = obtain_dataset(config);
    const auto rows = sweep_tds(config, all);
    std::vector<std::vector<double>> out;
    for (const auto& r : rows) {
        auto v = row_of(r.report);
        v.insert(v.begin(), static_cast<double>(r.tds));
        out.push_back(std::move(v));
    }
    write_csv(config.out / "tds_sweep.csv", {"tds", "mae", "mean_std", "rel_l2_percent", "nmse_percent", "coverage95"}, out);
    write_json(config.out / "sweep_config.json", config.to_json());
    return 0;
}

int cmd_sweep_beta(const RunConfig& config) {
    const Dataset all = obtain_dataset(config);
    const auto rows = sweep_beta(config, all);
    std::vector<std::vector<double>> out;
    for (const auto& r : rows) {
        auto v = row_of(r.report);
        v.insert(v.begin(), {r.beta, r.test_loss_percent});
        out.push_back(std::move(v));
    }
    write_csv(config.out / "beta_sweep.csv",
              {"beta", "test_loss_percent", "mae", "mean_std", "rel_l2_percent", "nmse_percent", "coverage95"}, out);
    write_json(config.out / "sweep_config.json", config.to_json());
    return 0;
}

}  // namespace rpwno
