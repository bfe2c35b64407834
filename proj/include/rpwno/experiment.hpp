#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "rpwno/container.hpp"
#include "rpwno/metrics.hpp"
#include "rpwno/pde_data.hpp"
#include "rpwno/rp_ensemble.hpp"

namespace rpwno {

// Everything a command needs. Serialized as JSON; CLI flags override individual fields.
// Samples [0, train_count) of the dataset are the training pool (TDS subsets are its
// leading rows) and [train_count, train_count + test_count) the test set.
struct RunConfig {
    Problem problem = Problem::Burgers;
    std::size_t grid = 128;
    std::string dataset;  // RPWD file; empty = generate in memory from data_seed
    std::size_t train_count = 400;
    std::size_t test_count = 100;
    std::uint64_t data_seed = 1;
    GenerateOptions generate;

    WnoConfig model;
    TrainConfig train;
    std::size_t members = 5;
    double beta = 1.0;
    std::uint64_t seed = 0;  // member seeds derive from this

    std::filesystem::path out = "run";
    bool parallel = true;
    std::string checkpoint;  // eval input; empty = <out>/checkpoint.rpwc
    std::vector<std::size_t> tds{100, 400};
    std::vector<double> betas{0.5, 1.0, 2.0, 100.0};
    std::string points;  // "x=0.14;x=0.92" or "x=0.5,y=0.25"
    std::size_t pdf_points = 200;

    static RunConfig defaults(Problem problem, std::size_t grid);
    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
    std::vector<std::uint64_t> member_seeds() const;
    std::filesystem::path checkpoint_path() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

// Loads config.dataset or generates train_count + test_count samples.
Dataset obtain_dataset(const RunConfig& config);
Dataset training_pool(const RunConfig& config, const Dataset& all, std::size_t tds);
Dataset test_split(const RunConfig& config, const Dataset& all);

Ensemble train_on(const RunConfig& config, const Dataset& train);

struct ProbePoint {
    std::string label;
    std::vector<double> coords;
};
std::vector<ProbePoint> parse_points(const std::string& spec, int dims);
// Flat grid index nearest to the probe.
std::size_t nearest_index(const ProbePoint& p, const std::vector<std::vector<double>>& coords);

struct EvalOutput {
    EvalReport report;
    PredictionStats stats;
    std::vector<PointPdf> predicted_pdfs;
    std::vector<PointPdf> truth_pdfs;
};
EvalOutput evaluate_ensemble(const RunConfig& config, const Ensemble& ensemble, const Dataset& test);

struct TdsRow {
    std::size_t tds = 0;
    EvalReport report;
};
struct BetaRow {
    double beta = 0.0;
    double test_loss_percent = 0.0;  // mean over members of each member's test relative L2
    EvalReport report;               // ensemble-mean metrics
};

std::vector<TdsRow> sweep_tds(const RunConfig& config, const Dataset& all);
std::vector<BetaRow> sweep_beta(const RunConfig& config, const Dataset& all);

// CLI commands. Each writes its artifacts under config.out and returns 0 on success.
int cmd_generate(const RunConfig& config, std::size_t count);
int cmd_train(const RunConfig& config);
int cmd_eval(const RunConfig& config);
int cmd_sweep_tds(const RunConfig& config);
int cmd_sweep_beta(const RunConfig& config);

}  // namespace rpwno
