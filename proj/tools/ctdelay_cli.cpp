#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "ctdelay/campaign.hpp"
#include "ctdelay/dataset_io.hpp"
#include "ctdelay/experiment.hpp"
#include "ctdelay/filter_design.hpp"

using namespace ctdelay;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kValidation = 1, kEstimation = 2, kIo = 3 };

struct Globals {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int workers = 1;
    std::optional<int> runs;
};

ExperimentConfig load(const Globals& g) {
    if (g.config.empty()) throw std::invalid_argument("--config is required");
    ExperimentConfig cfg = load_experiment(g.config);
    if (g.seed) cfg.master_seed = *g.seed;
    if (g.runs) cfg.runs = *g.runs;
    cfg.validate();
    return cfg;
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw IoError("cannot open " + out + " for writing");
    f << text;
    if (!f) throw IoError("write failed for " + out);
}

const SchemeSpec& find_scheme(const ExperimentConfig& cfg, const std::string& name) {
    if (name.empty()) return cfg.schemes.front();
    for (const auto& s : cfg.schemes)
        if (s.name == name) return s;
    throw std::invalid_argument("unknown scheme '" + name + "'");
}

std::optional<double> parse_snr(const ExperimentConfig& cfg, const std::string& text) {
    if (text.empty()) return cfg.snr_db.front();
    if (text == "inf" || text == "none") return std::nullopt;
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument("--snr: expected a number or 'inf'");
    return v;
}

/// "lo:step:hi"
std::vector<double> parse_grid(const std::string& spec) {
    double lo = 0, step = 0, hi = 0;
    char tail = 0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%lf%c", &lo, &step, &hi, &tail) != 3)
        throw std::invalid_argument("--grid: expected lo:step:hi, got '" + spec + "'");
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(step > 0.0) || hi < lo)
        throw std::invalid_argument("--grid: need finite lo <= hi and step > 0");
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    if (count > 1000000) throw std::invalid_argument("--grid: more than 1e6 points");
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i) g[i] = lo + static_cast<double>(i) * step;
    return g;
}

json model_json(const CtModel& m) { return {{"num", m.num()}, {"den", m.den()}, {"delay", m.delay()}}; }

int cmd_generate(const Globals& g, const std::string& scheme_name, const std::string& snr_text, int run) {
    const ExperimentConfig cfg = load(g);
    if (g.out.empty()) throw std::invalid_argument("--out is required");
    const SchemeSpec& scheme = find_scheme(cfg, scheme_name);
    const auto snr = parse_snr(cfg, snr_text);
    const RunSeeds seeds = run_seeds(cfg.master_seed, scheme.name, snr, run);
    SamplingSpec samp = scheme.sampling;
    samp.seed = seeds.sampling;
    auto gen = make_dataset(cfg.system, scheme.excitation, samp, snr, seeds.noise);
    DatasetMeta meta{cfg.system, snr, gen.empirical_snr_db, seeds.sampling, seeds.noise};
    write_dataset(g.out, gen.data, meta);
    std::printf("wrote %zu samples to %s (empirical SNR %.3g dB)\n", gen.data.size(), g.out.c_str(), gen.empirical_snr_db);
    return kOk;
}

int cmd_estimate(const Globals& g, const std::string& data_path, const std::string& method, std::optional<double> tau0,
                 int filter, std::optional<double> j0_threshold) {
    ExperimentConfig cfg = load(g);
    cfg.method = parse_method(method);
    if (filter > 0) cfg.filter_index = filter;
    if (cfg.method == Method::SingleFilter && filter == 0) cfg.filter_index = static_cast<int>(cfg.make_bank().size());
    cfg.validate();
    DatasetMeta meta;
    const SampledDataset data = read_dataset(data_path, &meta);
    const double start = tau0 ? *tau0 : cfg.gn.tau_min;

    const RedundantEstimator est(data, cfg.redundancy());
    const EstimationResult res = run_method(cfg, est, start);

    json rec;
    rec["method"] = method_name(cfg.method);
    if (cfg.method == Method::SingleFilter) rec["filter"] = cfg.filter_index;
    rec["tau0"] = start;
    rec["tau"] = res.model.delay();
    rec["model"] = model_json(res.model);
    rec["j0"] = res.j0;
    rec["converged"] = res.converged;
    rec["iterations"] = res.iterations;
    json trace = json::array();
    for (const auto& t : res.trace)
        trace.push_back({{"outer", t.outer}, {"filter", t.filter}, {"tau", t.tau}, {"j0", t.j0}, {"selected", t.selected}});
    rec["trace"] = trace;

    bool global = true;
    if (meta.true_system) {
        const double err = relative_error_percent(res.model.delay(), meta.true_system->delay());
        rec["rel_error_percent"] = err;
        global = err < cfg.success_percent;
    }
    if (j0_threshold && res.j0 > *j0_threshold) global = false;
    rec["global"] = global;
    const std::string text = rec.dump(2) + "\n";
    std::cout << text;
    if (!g.out.empty()) emit(g.out, text);
    if (!res.converged) {
        std::cerr << "estimate: did not converge\n";
        return kEstimation;
    }
    if (!global) {
        std::cerr << "estimate: not-global (local minimum suspected)\n";
        return kEstimation;
    }
    return kOk;
}

int cmd_sweep(const Globals& g, const std::string& data_path, const std::string& grid, bool ideal) {
    const ExperimentConfig cfg = load(g);
    const auto taus = parse_grid(grid);
    const FilterBank bank = cfg.make_bank();
    std::vector<SweepRow> rows;
    if (ideal) {
        rows = ideal_sweep(bank, taus);
    } else {
        if (data_path.empty()) throw std::invalid_argument("--data is required unless --ideal is given");
        const RedundantEstimator est(read_dataset(data_path), cfg.redundancy());
        rows = sweep_cost(est, taus);
    }
    emit(g.out, sweep_csv(rows, bank.size()));
    return kOk;
}

int cmd_bench(const Globals& g, const std::string& method) {
    ExperimentConfig cfg = load(g);
    if (!method.empty()) cfg.method = parse_method(method);
    cfg.validate();
    if (g.out.empty()) throw std::invalid_argument("--out is required");
    const CampaignReport rep = run_campaign(cfg, g.workers, [](std::size_t done, std::size_t total) {
        std::fprintf(stderr, "\r%zu/%zu datasets", done, total);
        if (done == total) std::fputc('\n', stderr);
    });
    write_campaign(rep, g.out);
    std::cout << table_text(rep);
    return kOk;
}

int cmd_analyze(const Globals& g, double tau_range) {
    const ExperimentConfig cfg = load(g);
    const FilterBank bank = cfg.make_bank();
    const double bw = cfg.system_bandwidth();
    const double range = tau_range > 0.0 ? tau_range : cfg.gn.tau_max - cfg.gn.tau_min;
    std::printf("system %s\n", describe(cfg.system).c_str());
    std::printf("bandwidth %.6g rad/s\n", bw);
    std::printf("beta %.6g (lower bound %.5f)\n", bank.beta, beta_lower_bound());
    double widest = 0.0;
    for (double T : bank.periods) widest = std::max(widest, T);
    const int i0 = i0_for_delay(widest, range);
    std::printf("delay range %.6g s, i0 %d, filters needed %d, filters used %zu\n", range, i0,
                i0 >= 2 ? min_filter_count(bank.beta, i0) : 1, bank.size());
    std::printf("%3s %12s %12s %12s %12s %12s\n", "k", "cutoff", "period", "radius", "max_1", "min_1");
    for (std::size_t k = 0; k < bank.size(); ++k) {
        const double T = bank.periods[k];
        std::printf("%3zu %12.6g %12.6g %12.6g %12.6g %12.6g\n", k + 1, bank.cutoffs[k], T,
                    convergence_radius(bank.cutoffs[k]), basin_max(1, T), basin_min(1, T));
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time-delay estimation of continuous-time systems with a redundant filter bank"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "experiment JSON");
    app.add_option("--out", g.out, "output file or directory");
    app.add_option("--seed", g.seed, "override master seed");
    app.add_option("--workers", g.workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--runs", g.runs, "override Monte Carlo runs")->check(CLI::PositiveNumber);

    auto* gen = app.add_subcommand("generate", "simulate one dataset (CSV plus JSON sidecar)");
    std::string scheme, snr;
    int run = 0;
    gen->add_option("--scheme", scheme, "scheme name (default: first)");
    gen->add_option("--snr", snr, "SNR in dB or 'inf' (default: first in config)");
    gen->add_option("--run", run, "run index for seed derivation")->check(CLI::NonNegativeNumber);

    auto* est = app.add_subcommand("estimate", "estimate delay and parameters from a dataset");
    std::string data, method = "redundant";
    std::optional<double> tau0, j0_threshold;
    int filter = 0;
    est->add_option("--data", data, "dataset CSV")->required();
    est->add_option("--method", method, "redundant, single-filter or baseline-alg2");
    est->add_option("--tau0", tau0, "initial delay (default: tau_min)");
    est->add_option("--filter", filter, "bank index for single-filter (default: narrowest)");
    est->add_option("--j0-threshold", j0_threshold, "flag results whose final j0 exceeds this as not global");

    auto* sweep = app.add_subcommand("sweep-cost", "cost curves over a delay grid");
    std::string sweep_data, grid = "0:0.05:15";
    bool ideal = false;
    sweep->add_option("--data", sweep_data, "dataset CSV");
    sweep->add_option("--grid", grid, "lo:step:hi");
    sweep->add_flag("--ideal", ideal, "closed-form ideal-filter curves over delay error, no data");

    auto* bench = app.add_subcommand("bench", "Monte Carlo campaign");
    std::string bench_method;
    bench->add_option("--method", bench_method, "override method");

    auto* analyze = app.add_subcommand("analyze-bank", "bank analytics: periods, basins, filter count");
    double tau_range = 0.0;
    analyze->add_option("--tau-range", tau_range, "delay range to cover (default: tau_max - tau_min)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*gen) return cmd_generate(g, scheme, snr, run);
        if (*est) return cmd_estimate(g, data, method, tau0, filter, j0_threshold);
        if (*sweep) return cmd_sweep(g, sweep_data, grid, ideal);
        if (*bench) return cmd_bench(g, bench_method);
        if (*analyze) return cmd_analyze(g, tau_range);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "estimation failed: " << e.what() << '\n';
        return kEstimation;
    }
    return kValidation;
}
