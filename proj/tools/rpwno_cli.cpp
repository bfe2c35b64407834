#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rpwno/experiment.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool parallel = false;
    bool serial = false;
    std::optional<std::string> points;
    std::optional<std::string> problem;
    std::optional<std::size_t> grid;
    std::optional<std::string> dataset;
    std::optional<std::string> checkpoint;
    std::optional<std::size_t> members;
    std::optional<double> beta;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> train_count;
    std::optional<std::size_t> test_count;
    std::optional<std::size_t> width;
    std::optional<std::string> tds;
    std::optional<std::string> betas;
    std::optional<std::size_t> count;
};

template <class T>
std::vector<T> split_list(const std::string& s) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::stringstream v(item);
        T x{};
        if (!(v >> x)) throw std::invalid_argument("bad list entry '" + item + "'");
        out.push_back(x);
    }
    return out;
}

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--seed", f.seed, "Seed (data seed for generate, member seed base otherwise)");
    app->add_option("--out", f.out, "Output directory");
    auto* par = app->add_flag("--parallel", f.parallel, "Train members concurrently");
    auto* ser = app->add_flag("--serial", f.serial, "Train members one after another");
    par->excludes(ser);
    app->add_option("--points", f.points, "PDF probe locations, e.g. \"x=0.14;x=0.92\"");
    app->add_option("--problem", f.problem, "burgers or darcy")->check(CLI::IsMember({"burgers", "darcy"}));
    app->add_option("--grid", f.grid, "Grid points per axis");
    app->add_option("--dataset", f.dataset, "RPWD dataset file");
    app->add_option("--checkpoint", f.checkpoint, "RPWC checkpoint file");
    app->add_option("--members", f.members, "Ensemble size");
    app->add_option("--beta", f.beta, "Prior scale");
    app->add_option("--epochs", f.epochs, "Training epochs");
    app->add_option("--train-count", f.train_count, "Training pool size");
    app->add_option("--test-count", f.test_count, "Test set size");
    app->add_option("--width", f.width, "Lifted channel count");
    app->add_option("--tds", f.tds, "Comma-separated training-set sizes (sweep-tds)");
    app->add_option("--betas", f.betas, "Comma-separated beta values (sweep-beta)");
}

rpwno::RunConfig resolve(const Flags& f, bool seed_is_data_seed) {
    nlohmann::json j = nlohmann::json::object();
    if (!f.config.empty()) {
        std::ifstream is(f.config);
        j = nlohmann::json::parse(is);
    }
    if (f.problem) j["problem"] = *f.problem;
    if (f.grid) j["grid"] = *f.grid;
    if (f.seed) j[seed_is_data_seed ? "data_seed" : "seed"] = *f.seed;
    if (f.out) j["out"] = *f.out;
    if (f.parallel) j["parallel"] = true;
    if (f.serial) j["parallel"] = false;
    if (f.points) j["points"] = *f.points;
    if (f.dataset) j["dataset"] = *f.dataset;
    if (f.checkpoint) j["checkpoint"] = *f.checkpoint;
    if (f.members) j["members"] = *f.members;
    if (f.beta) j["beta"] = *f.beta;
    if (f.epochs) j["train"]["epochs"] = *f.epochs;
    if (f.train_count) j["train_count"] = *f.train_count;
    if (f.test_count) j["test_count"] = *f.test_count;
    if (f.width) j["model"]["width"] = *f.width;
    if (f.tds) j["tds"] = split_list<std::size_t>(*f.tds);
    if (f.betas) j["betas"] = split_list<double>(*f.betas);
    return rpwno::RunConfig::from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
    rpwno::configure_allocator();
    CLI::App app{"Randomized-prior wavelet neural operator ensembles"};
    app.require_subcommand(1);
    Flags f;

    auto* gen = app.add_subcommand("generate", "Generate a Burgers or Darcy dataset (RPWD)");
    add_common(gen, f);
    gen->add_option("--count", f.count, "Number of samples (default train-count + test-count)");
    auto* train = app.add_subcommand("train", "Train an ensemble and write a checkpoint (RPWC)");
    add_common(train, f);
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
    add_common(eval, f);
    auto* tds = app.add_subcommand("sweep-tds", "Train one ensemble per training-set size");
    add_common(tds, f);
    auto* beta = app.add_subcommand("sweep-beta", "Train one ensemble per prior scale");
    add_common(beta, f);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const auto cfg = resolve(f, true);
            return rpwno::cmd_generate(cfg, f.count.value_or(cfg.train_count + cfg.test_count));
        }
        const auto cfg = resolve(f, false);
        if (train->parsed()) return rpwno::cmd_train(cfg);
        if (eval->parsed()) return rpwno::cmd_eval(cfg);
        if (tds->parsed()) return rpwno::cmd_sweep_tds(cfg);
        if (beta->parsed()) return rpwno::cmd_sweep_beta(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
