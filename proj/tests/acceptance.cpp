// Runs the project's acceptance criteria and prints one PASS/FAIL line per criterion.
// Usage: rpwno_acceptance [criterion ...]   (no arguments: all criteria)

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rpwno/experiment.hpp"
#include "rpwno/wavelet.hpp"
#include "test_util.hpp"

using namespace rpwno;
using rpwno::test::numeric_gradient;
using rpwno::test::random_tensor;
using rpwno::test::relative_error;
using rpwno::test::weighted_sum;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path config_dir() { return fs::path(RPWNO_SOURCE_DIR) / "configs"; }
fs::path work_dir(const std::string& name) {
    const fs::path p = fs::path(RPWNO_BINARY_DIR) / "acceptance" / name;
    fs::create_directories(p);
    return p;
}

// ---- wavelet ------------------------------------------------------------------

double sum_squares(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v * v;
    return s;
}

void wavelet(Outcome& o) {
    std::mt19937_64 rng(11);
    double worst_rec = 0.0, worst_energy = 0.0;
    std::size_t cases = 0;
    for (int order = 1; order <= 6; ++order) {
        const auto f = daubechies_filters(order);
        for (std::size_t n = 32; n <= 1024; n *= 2)
            for (std::size_t lv = 1; lv <= max_levels(n); ++lv) {
                const Tensor x = random_tensor({3, n}, rng);
                const auto c = dwt1d(x, f, lv);
                const Tensor r = idwt1d(c, f);
                worst_rec = std::max(worst_rec, max_abs_diff(r, x));
                double e = sum_squares(c.approx);
                for (const auto& d : c.details) e += sum_squares(d);
                worst_energy = std::max(worst_energy, std::abs(e - sum_squares(x)) / sum_squares(x));
                ++cases;
            }
        for (std::size_t n = 16; n <= 64; n *= 2)
            for (std::size_t lv = 1; lv <= max_levels(n); ++lv) {
                const Tensor x = random_tensor({2, n, n}, rng);
                const auto c = dwt2d(x, f, lv);
                const Tensor r = idwt2d(c, f);
                worst_rec = std::max(worst_rec, max_abs_diff(r, x));
                double e = sum_squares(c.approx);
                for (const auto& d : c.details) e += sum_squares(d.lh) + sum_squares(d.hl) + sum_squares(d.hh);
                worst_energy = std::max(worst_energy, std::abs(e - sum_squares(x)) / sum_squares(x));
                ++cases;
            }
    }
    o.detail << cases << " transforms, max reconstruction error " << worst_rec << ", max relative energy error "
             << worst_energy << ". ";
    o.require(worst_rec <= 1e-8, "reconstruction <= 1e-8");
    o.require(worst_energy <= 1e-10, "energy <= 1e-10");
}

// ---- autodiff -----------------------------------------------------------------

// Gradient of sum(w * op(inputs)) w.r.t. every input, checked at `points` random draws.
double op_check(const std::vector<Shape>& shapes, const std::function<Var(Tape&, std::vector<Var>&)>& op,
                std::mt19937_64& rng, int points = 10, double lo = -1.0, double hi = 1.0) {
    double worst = 0.0;
    for (int pt = 0; pt < points; ++pt) {
        std::vector<Tensor> xs;
        for (const auto& s : shapes) xs.push_back(random_tensor(s, rng, lo, hi));
        Tensor w;
        {
            Tape probe;
            std::vector<Var> vs;
            for (auto& x : xs) vs.push_back(probe.constant_ref(x));
            w = random_tensor(op(probe, vs).value().shape(), rng);
        }
        Tape t;
        std::vector<Var> leaves;
        for (auto& x : xs) leaves.push_back(t.leaf(x));
        t.backward(weighted_sum(t, op(t, leaves), w));
        for (std::size_t i = 0; i < xs.size(); ++i) {
            rpwno::test::LossFn f = [&](Tape& tt) {
                std::vector<Var> vs;
                for (auto& x : xs) vs.push_back(tt.constant_ref(x));
                return weighted_sum(tt, op(tt, vs), w);
            };
            worst = std::max(worst, relative_error(t.grad(leaves[i]), numeric_gradient(f, xs[i])));
        }
    }
    return worst;
}

void autodiff(Outcome& o) {
    std::mt19937_64 rng(12);
    std::vector<std::pair<std::string, double>> errs;
    errs.emplace_back("add", op_check({{2, 5}, {2, 5}}, [](Tape&, auto& v) { return add(v[0], v[1]); }, rng));
    errs.emplace_back("mul", op_check({{2, 5}, {2, 5}}, [](Tape&, auto& v) { return mul(v[0], v[1]); }, rng));
    errs.emplace_back("scale", op_check({{7}}, [](Tape&, auto& v) { return scale(v[0], -1.7); }, rng));
    errs.emplace_back("sum", op_check({{3, 4}}, [](Tape&, auto& v) { return sum(v[0]); }, rng));
    errs.emplace_back("gelu", op_check({{20}}, [](Tape&, auto& v) { return gelu(v[0]); }, rng, 10, -3.0, 3.0));
    errs.emplace_back("dense",
                      op_check({{2, 5, 3}, {3, 4}, {4}}, [](Tape&, auto& v) { return dense(v[0], v[1], v[2]); }, rng));
    errs.emplace_back("conv1x1", op_check({{2, 4, 4, 3}, {3, 4}, {4}},
                                          [](Tape&, auto& v) { return conv1x1(v[0], v[1], v[2]); }, rng));
    const WaveletBasis b1(daubechies_filters(2), {16}, 2), b2(daubechies_filters(2), {8, 8}, 1);
    errs.emplace_back("wavelet_mix 1D", op_check({{2, 16, 3}, {3, 3, 4}, {3, 3, 4}}, [&](Tape&, auto& v) {
                          return wavelet_mix(v[0], {v[1], v[2]}, b1, {Subband::Approx, Subband::Detail});
                      }, rng, 3));
    errs.emplace_back("wavelet_mix 2D", op_check({{1, 8, 8, 2}, {2, 2, 4, 4}, {2, 2, 4, 4}}, [&](Tape&, auto& v) {
                          return wavelet_mix(v[0], {v[1], v[2]}, b2, {Subband::LL, Subband::HL});
                      }, rng, 3));
    const Tensor truth = random_tensor({3, 6, 1}, rng);
    errs.emplace_back("relative_l2_loss", op_check({{3, 6, 1}}, [&](Tape&, auto& v) {
                          return relative_l2_loss(v[0], truth);
                      }, rng));

    // Full tiny model: p = 4, one block, grid 16.
    WnoConfig cfg = burgers_config(16);
    cfg.width = 4;
    cfg.num_blocks = 1;
    cfg.proj_hidden = 6;
    cfg.wavelet_order = 2;
    WnoModel m(cfg, 3);
    const Tensor x = random_tensor({2, 16, 2}, rng);
    const Tensor w = random_tensor({2, 16, 1}, rng);
    rpwno::test::LossFn f = [&](Tape& t) { return weighted_sum(t, wno_forward(t, t.constant_ref(x), m), w); };
    errs.emplace_back("tiny WNO", rpwno::test::parameter_gradcheck(f, m.parameters()));

    double worst = 0.0;
    for (const auto& [name, e] : errs) {
        o.detail << name << " " << e << "; ";
        worst = std::max(worst, e);
        o.require(e <= 1e-4, name + " gradient error <= 1e-4");
    }
    o.detail << "worst " << worst << ". ";
}

// ---- RP invariants ------------------------------------------------------------

WnoConfig small_model(std::size_t grid) {
    WnoConfig c = burgers_config(grid);
    c.width = 6;
    c.num_blocks = 2;
    c.proj_hidden = 8;
    c.wavelet_order = 2;
    c.levels = 2;
    return c;
}

bool same_members(const Ensemble& a, const Ensemble& b) {
    for (std::size_t i = 0; i < a.members.size(); ++i) {
        const auto pa = a.members[i].trainable.parameters(), pb = b.members[i].trainable.parameters();
        for (std::size_t k = 0; k < pa.size(); ++k)
            if (!(pa[k]->value == pb[k]->value)) return false;
        if (a.members[i].loss_history != b.members[i].loss_history) return false;
    }
    return true;
}

void rp_invariants(Outcome& o) {
    const Dataset d = build_dataset(Problem::Burgers, 24, 32, 5);
    const auto cfg = small_model(32);
    const std::vector<std::uint64_t> seeds{101, 102, 103};
    TrainConfig t;
    t.epochs = 4;
    t.batch_size = 5;

    Ensemble serial = make_ensemble(cfg, 1.0, seeds, d.coords);
    const auto prior_before = prior_checksum(serial);
    train_ensemble(serial, d.inputs, d.outputs, t, Execution::Serial);
    o.require(prior_checksum(serial) == prior_before, "frozen prior checksum unchanged by training");

    Ensemble parallel = make_ensemble(cfg, 1.0, seeds, d.coords);
    train_ensemble(parallel, d.inputs, d.outputs, t, Execution::Parallel);
    o.require(same_members(serial, parallel), "serial == parallel bitwise");

    Ensemble uncached = make_ensemble(cfg, 1.0, seeds, d.coords);
    TrainConfig tu = t;
    tu.cache_prior = false;
    train_ensemble(uncached, d.inputs, d.outputs, tu, Execution::Serial);
    o.require(same_members(serial, uncached), "cached prior == uncached bitwise");

    Ensemble zero = make_ensemble(cfg, 0.0, seeds, d.coords);
    train_ensemble(zero, d.inputs, d.outputs, t, Execution::Serial);
    const TrainingData td{zero.model_input(d.inputs), d.outputs};
    bool vanilla_equal = true;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        WnoModel w(cfg, seeds[i]);
        const auto h = train_wno(w, shuffle_seed(seeds[i]), td, zero.output_norm, t);
        vanilla_equal = vanilla_equal && h == zero.members[i].loss_history &&
                        parameter_checksum(w) == parameter_checksum(zero.members[i].trainable) &&
                        wno_predict(w, td.inputs) == rp_predict(zero.members[i], td.inputs);
    }
    o.require(vanilla_equal, "beta = 0 equals vanilla WNO bitwise");
    o.detail << "3 members, prior checksum " << std::hex << prior_before << std::dec
             << "; serial/parallel, cached/uncached and beta=0/vanilla compared bitwise. ";
}

// ---- ensemble statistics ------------------------------------------------------

void ensemble_statistics(Outcome& o) {
    const std::vector<Tensor> two{Tensor({1}, 1.0), Tensor({1}, 3.0)};
    const auto s = ensemble_stats(two);
    o.require(s.mean[0] == 2.0 && s.std[0] == 1.0, "(1,3) -> mean 2, std 1 exactly");
    o.detail << "(1,3): mean " << s.mean[0] << ", std " << s.std[0] << ", CI [" << s.lower95[0] << ", "
             << s.upper95[0] << "]. ";

    std::mt19937_64 rng(13);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t nc = 2 + trial % 9;
        std::vector<Tensor> p;
        for (std::size_t k = 0; k < nc; ++k) p.push_back(random_tensor({4, 7}, rng, -5.0, 5.0));
        const auto st = ensemble_stats(p);
        for (std::size_t i = 0; i < 28; ++i) {
            double mean = 0.0;
            for (std::size_t k = 0; k < nc; ++k) mean += p[k][i];
            mean /= static_cast<double>(nc);
            double var = 0.0;
            for (std::size_t k = 0; k < nc; ++k) var += (p[k][i] - mean) * (p[k][i] - mean);
            const double sd = std::sqrt(var / static_cast<double>(nc));
            worst = std::max({worst, std::abs(st.mean[i] - mean), std::abs(st.std[i] - sd),
                              std::abs(st.lower95[i] - (mean - 1.96 * sd)), std::abs(st.upper95[i] - (mean + 1.96 * sd))});
        }
    }
    o.detail << "50 random ensembles vs naive two-pass: max deviation " << worst << ". ";
    o.require(worst <= 1e-12, "naive recomputation within 1e-12");
}

// ---- solver oracles -----------------------------------------------------------

double centre_of(const Tensor& u) {
    const std::size_t n = u.extent(0), h = n / 2;
    return 0.25 * (u[(h - 1) * n + h - 1] + u[(h - 1) * n + h] + u[h * n + h - 1] + u[h * n + h]);
}

void solver_oracles(Outcome& o) {
    constexpr double pi = std::numbers::pi;
    DarcyConfig fine;
    fine.grid = 512;
    const double ref = centre_of(solve_darcy(Tensor({512, 512}, 3.0), fine).pressure);
    const double coarse = centre_of(solve_darcy(Tensor({32, 32}, 3.0), DarcyConfig{}).pressure);
    const double derr = std::abs(coarse / ref - 1.0);
    o.detail << "Darcy centre 32^2 " << coarse << " vs 512^2 " << ref << " (rel " << derr << "); ";
    o.require(derr < 0.01, "Darcy centre within 1% of 512^2");

    BurgersConfig bc;
    const Tensor ics = sample_grf(GrfSpec::burgers(128, 21), 5);
    double drift = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        Tensor u0({128});
        for (std::size_t j = 0; j < 128; ++j) u0[j] = ics[i * 128 + j];
        const Tensor u1 = solve_burgers(u0, bc);
        double m0 = 0.0, m1 = 0.0;
        for (std::size_t j = 0; j < 128; ++j) {
            m0 += u0[j] / 128.0;
            m1 += u1[j] / 128.0;
        }
        drift = std::max(drift, std::abs(m1 - m0));
    }
    o.detail << "Burgers mean drift " << drift << "; ";
    o.require(drift <= 1e-8, "Burgers mean conserved to 1e-8");

    auto smooth = [&](std::size_t n) {
        Tensor u({n});
        for (std::size_t j = 0; j < n; ++j) {
            const double x = static_cast<double>(j) / static_cast<double>(n);
            u[j] = 0.5 * std::sin(2 * pi * x) + 0.2 * std::cos(4 * pi * x) + 0.1;
        }
        auto c = bc;
        c.grid = n;
        return solve_burgers(u, c);
    };
    const Tensor u32 = smooth(32), u64 = smooth(64), u128 = smooth(128);
    double e1 = 0.0, e2 = 0.0;
    for (std::size_t j = 0; j < 32; ++j) e1 = std::max(e1, std::abs(u32[j] - u64[2 * j]));
    for (std::size_t j = 0; j < 64; ++j) e2 = std::max(e2, std::abs(u64[j] - u128[2 * j]));
    o.detail << "self-convergence factor " << e1 / e2 << "; ";
    o.require(e1 >= 4.0 * e2, "Burgers self-convergence factor >= 4");

    // Per-mode variances of 10k draws against the analytic spectrum.
    double worst = 0.0;
    {
        const std::size_t n = 64, draws = 10000;
        const auto spec = GrfSpec::burgers(n, 31);
        const Tensor f = sample_grf(spec, draws);
        for (int k = 0; k <= 4; ++k)
            for (int phase = 0; phase < (k ? 2 : 1); ++phase) {
                double var = 0.0;
                for (std::size_t i = 0; i < draws; ++i) {
                    double c = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double x = static_cast<double>(j) / static_cast<double>(n);
                        const double basis = k == 0 ? 1.0
                                                    : std::sqrt(2.0) * (phase ? std::sin(2 * pi * k * x)
                                                                              : std::cos(2 * pi * k * x));
                        c += f[i * n + j] * basis / static_cast<double>(n);
                    }
                    var += c * c / static_cast<double>(draws);
                }
                const double sd = spec.mode_std(4 * pi * pi * k * k);
                worst = std::max(worst, std::abs(var / (sd * sd) - 1.0));
            }
    }
    {
        const std::size_t n = 16, draws = 10000;
        const auto spec = GrfSpec::darcy(n, 32);
        const Tensor f = sample_grf(spec, draws);
        const auto x = grf_coordinates(spec);
        auto phi = [&](int k, std::size_t j) { return k == 0 ? 1.0 : std::sqrt(2.0) * std::cos(pi * k * x[j]); };
        for (int k = 0; k <= 2; ++k)
            for (int l = 0; l <= 2; ++l) {
                double var = 0.0;
                for (std::size_t i = 0; i < draws; ++i) {
                    double c = 0.0;
                    for (std::size_t a = 0; a < n; ++a)
                        for (std::size_t b = 0; b < n; ++b) c += f[(i * n + a) * n + b] * phi(k, a) * phi(l, b);
                    c /= static_cast<double>(n * n);
                    var += c * c / static_cast<double>(draws);
                }
                const double sd = spec.mode_std(pi * pi * (k * k + l * l));
                worst = std::max(worst, std::abs(var / (sd * sd) - 1.0));
            }
    }
    o.detail << "GRF worst per-mode variance deviation " << 100.0 * worst << "%. ";
    o.require(worst < 0.1, "GRF per-mode variances within 10%");
}

// ---- metrics ------------------------------------------------------------------

void metric_oracles(Outcome& o) {
    std::mt19937_64 rng(14);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t s = 1 + trial % 4, p = 5 + trial % 13;
        const Tensor y = random_tensor({s, p}, rng, -2.0, 2.0), q = random_tensor({s, p}, rng, -2.0, 2.0);
        const Tensor sd = random_tensor({s, p}, rng, 0.0, 1.0);
        PredictionStats st{q, sd, q, q};
        for (std::size_t i = 0; i < q.numel(); ++i) {
            st.lower95[i] = q[i] - 1.96 * sd[i];
            st.upper95[i] = q[i] + 1.96 * sd[i];
        }
        double abs_sum = 0.0, num = 0.0, den = 0.0, std_sum = 0.0, inside = 0.0;
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t j = 0; j < p; ++j) {
                const std::size_t k = i * p + j;
                abs_sum += std::abs(q[k] - y[k]);
                num += (q[k] - y[k]) * (q[k] - y[k]);
                den += y[k] * y[k];
                std_sum += sd[k];
                inside += (st.lower95[k] <= y[k] && y[k] <= st.upper95[k]) ? 1.0 : 0.0;
            }
        const double cnt = static_cast<double>(s * p);
        worst = std::max({worst, std::abs(mae(q, y) - abs_sum / cnt),
                          std::abs(nmse_percent(q, y) - 100.0 * num / den) / std::max(1.0, 100.0 * num / den),
                          std::abs(mean_std(st) - std_sum / cnt), std::abs(ci_coverage(st, y) - inside / cnt)});
    }
    o.detail << "50 random tensor sets vs double loops: max deviation " << worst << "; ";
    o.require(worst <= 1e-12, "double-loop equivalence within 1e-12");

    Tensor y({4, 8});
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] = 10.0 * static_cast<double>(1 + i % 5);
    Tensor p = y;
    for (auto& v : p.values()) v *= 1.1;
    const double exact = nmse_percent(p, y);
    o.detail << "nmse_percent(1.1*y, y) = " << std::setprecision(17) << exact << std::setprecision(6);
    Tensor r = random_tensor({4, 8}, rng);
    Tensor rp = r;
    for (auto& v : rp.values()) v *= 1.1;
    const double rounding = std::abs(nmse_percent(rp, r) - 1.0);
    o.detail << " (random y: |nmse - 1| = " << rounding << "). ";
    o.require(std::abs(exact - 1.0) <= 1e-12, "nmse_percent(1.1*y, y) == 1.0 to rounding");
    o.require(rounding <= 1e-12, "nmse_percent(1.1*y, y) == 1.0 to rounding for random y");
}

// ---- reproducibility ----------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return files;
}

void reproducibility(Outcome& o) {
    const fs::path root = work_dir("reproducibility");
    std::map<std::string, std::string> first;
    for (int pass = 0; pass < 2; ++pass) {
        fs::remove_all(root / "run");
        for (Problem prob : {Problem::Burgers, Problem::Darcy}) {
            const std::size_t grid = prob == Problem::Burgers ? 32 : 16;
            RunConfig c = RunConfig::defaults(prob, grid);
            c.train_count = 10;
            c.test_count = 30;
            c.tds = {5, 10};
            c.betas = {0.5, 100.0};
            c.members = 2;
            c.model.width = 6;
            c.model.proj_hidden = 8;
            c.model.num_blocks = 2;
            c.train.epochs = 3;
            c.train.batch_size = 4;
            c.points = prob == Problem::Burgers ? "x=0.14;x=0.92" : "x=0.5,y=0.25";
            const fs::path base = root / "run" / rpwno::to_string(prob);
            c.out = base / "data";
            cmd_generate(c, 40);
            c.dataset = (base / "data" / "dataset.rpwd").string();
            c.out = base / "train";
            cmd_train(c);
            cmd_eval(c);
            c.out = base / "tds";
            cmd_sweep_tds(c);
            c.out = base / "beta";
            cmd_sweep_beta(c);
        }
        const auto files = snapshot(root / "run");
        if (pass == 0) {
            first = files;
            continue;
        }
        std::size_t same = 0;
        for (const auto& [name, bytes] : files) {
            const auto it = first.find(name);
            if (it != first.end() && it->second == bytes)
                ++same;
            else
                o.require(false, name + " identical on rerun");
        }
        o.require(files.size() == first.size(), "same file set on rerun");
        o.detail << same << "/" << files.size()
                 << " artifacts (datasets, checkpoints, losses, reports, fields, PDFs, sweeps) byte-identical. ";
    }
}

// ---- desk-scale experiments -----------------------------------------------------

RunConfig desk_config(const std::string& file, const std::string& out) {
    RunConfig c = load_run_config(config_dir() / file);
    c.out = work_dir(out);
    return c;
}

void write_rows(const fs::path& path, const std::vector<TdsRow>& rows) {
    std::vector<std::vector<double>> out;
    for (const auto& r : rows)
        out.push_back({static_cast<double>(r.tds), r.report.mae, r.report.mean_std, r.report.rel_l2_percent,
                       r.report.nmse_percent, r.report.coverage95});
    write_csv(path, {"tds", "mae", "mean_std", "rel_l2_percent", "nmse_percent", "coverage95"}, out);
}

void tds_trend(Outcome& o, const std::string& file, const std::string& name, double limit_s) {
    const auto t0 = Clock::now();
    const RunConfig c = desk_config(file, name);
    const Dataset all = obtain_dataset(c);
    const auto rows = sweep_tds(c, all);
    const double secs = since(t0);
    write_rows(c.out / "tds_sweep.csv", rows);
    for (const auto& r : rows)
        o.detail << "TDS " << r.tds << ": MAE " << r.report.mae << ", mean std " << r.report.mean_std << ", rel-L2 "
                 << r.report.rel_l2_percent << "%; ";
    o.detail << "runtime " << secs << " s. ";
    for (std::size_t i = 1; i < rows.size(); ++i) {
        o.require(rows[i].report.mae < rows[i - 1].report.mae, "MAE decreases with TDS");
        o.require(rows[i].report.mean_std < rows[i - 1].report.mean_std, "mean std decreases with TDS");
    }
    o.require(rows.back().report.rel_l2_percent < 15.0, "test relative L2 < 15% at the largest TDS");
    o.require(secs < limit_s, "runtime < " + std::to_string(static_cast<int>(limit_s / 60)) + " min");
}

void beta_trend(Outcome& o) {
    const auto t0 = Clock::now();
    const RunConfig c = desk_config("beta_study.json", "beta_study");
    const Dataset all = obtain_dataset(c);
    const auto rows = sweep_beta(c, all);
    const double secs = since(t0);
    std::vector<std::vector<double>> out;
    for (const auto& r : rows)
        out.push_back({r.beta, r.test_loss_percent, r.report.mae, r.report.mean_std, r.report.rel_l2_percent,
                       r.report.nmse_percent, r.report.coverage95});
    write_csv(c.out / "beta_sweep.csv",
              {"beta", "test_loss_percent", "mae", "mean_std", "rel_l2_percent", "nmse_percent", "coverage95"}, out);
    double at100 = -1.0;
    for (const auto& r : rows) {
        o.detail << "beta " << r.beta << ": test loss " << r.test_loss_percent << "%; ";
        if (r.beta == 100.0) at100 = r.test_loss_percent;
    }
    o.detail << "runtime " << secs << " s. ";
    o.require(at100 >= 0.0, "beta = 100 present");
    for (const auto& r : rows)
        if (r.beta == 0.5 || r.beta == 1.0 || r.beta == 2.0)
            o.require(r.test_loss_percent <= at100, "loss(beta=" + std::to_string(r.beta) + ") <= loss(100)");
    o.require(secs < 40 * 60, "runtime < 40 min");
}

struct Criterion {
    std::string name;
    std::string title;
    std::function<void(Outcome&)> run;
    double limit_s;  // for criteria whose runtime bound is checked here
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all{
        {"wavelet", "Wavelet correctness", wavelet, 60},
        {"autodiff", "Autodiff correctness", autodiff, 120},
        {"rp_invariants", "RP invariants", rp_invariants, 0},
        {"ensemble_stats", "Ensemble statistics", ensemble_statistics, 0},
        {"solver_oracles", "Solver oracles", solver_oracles, 0},
        {"cs1_burgers", "Burgers desk-scale trend", [](Outcome& o) { tds_trend(o, "cs1_burgers.json", "cs1_burgers", 20 * 60); }, 0},
        {"cs2_darcy", "Darcy desk-scale trend", [](Outcome& o) { tds_trend(o, "cs2_darcy.json", "cs2_darcy", 30 * 60); }, 0},
        {"beta_study", "Beta study trend", beta_trend, 0},
        {"metric_oracles", "Metric oracle equivalence", metric_oracles, 0},
        {"reproducibility", "Reproducibility", reproducibility, 0},
    };
    return all;
}

}  // namespace

int main(int argc, char** argv) {
    configure_allocator();
    std::vector<std::string> wanted(argv + 1, argv + argc);
    int failures = 0;
    std::size_t ran = 0;
    for (const auto& c : criteria()) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.name) == wanted.end()) continue;
        ++ran;
        Outcome o;
        const auto t0 = Clock::now();
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "[exception: " << e.what() << "] ";
        }
        const double secs = since(t0);
        if (c.limit_s > 0 && secs >= c.limit_s) {
            o.pass = false;
            o.detail << "[failed: runtime < " << c.limit_s << " s] ";
        }
        std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << " (" << c.title << ", " << secs << " s): "
                  << o.detail.str() << std::endl;
        failures += o.pass ? 0 : 1;
    }
    if (ran == 0) {
        std::cerr << "unknown criterion; available:";
        for (const auto& c : criteria()) std::cerr << " " << c.name;
        std::cerr << "\n";
        return 2;
    }
    return failures == 0 ? 0 : 1;
}
