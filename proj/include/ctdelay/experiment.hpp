#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctdelay/excitation.hpp"
#include "ctdelay/redundancy.hpp"

namespace ctdelay {

/// One sampling scheme of an experiment with its own PRBS clock.
struct SchemeSpec {
    std::string name;
    SamplingSpec sampling;
    ExcitationSpec excitation;
};

/// Column of a result table: a fixed initial delay, or one drawn per run from U[lo, hi].
struct DelayCell {
    std::string label;
    std::optional<double> fixed;
    double lo = 0.0;
    double hi = 0.0;
};

struct BankSpec {
    double beta = 10.0;
    int n_f = 10;
    int order = 10;
    std::vector<double> cutoffs;     // explicit cut-offs (rad/s) override beta/n_f
    std::optional<double> bandwidth;  // rad/s; default: -3 dB bandwidth of the system
    bool theorem_mode = false;
};

enum class Method { Redundant, SingleFilter, BaselineAlg2 };

std::string method_name(Method m);
/// "redundant", "single-filter" or "baseline-alg2"; throws std::invalid_argument otherwise.
Method parse_method(std::string_view name);

struct ExperimentConfig {
    std::string name = "experiment";
    CtModel system{{1.0}, {1.0, 1.0}, 0.0};
    int n = 1;
    int m = 0;
    std::vector<SchemeSpec> schemes;
    std::vector<std::optional<double>> snr_db;  // empty optional: noise-free
    std::vector<DelayCell> initial_delays;
    BankSpec bank;
    GnConfig gn;
    double omega_svf = 1.0;
    double eps_outer = 1e-3;
    int max_outer = 20;
    Method method = Method::Redundant;
    int filter_index = 1;          // 1-based bank index for Method::SingleFilter
    double baseline_fraction = 0.1;  // baseline cut-off as a fraction of the bandwidth
    double success_percent = 1.0;  // a run converges when |tau - tau0| / tau0 * 100 is below this
    int runs = 20;
    std::uint64_t master_seed = 1;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;

    double system_bandwidth() const;
    FilterBank make_bank() const;
    RedundancyConfig redundancy() const;
};

/// Parses the JSON experiment description (see README). Throws std::invalid_argument.
ExperimentConfig parse_experiment(std::string_view json_text);
/// Throws IoError when the file cannot be read.
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);
/// Folds the words into the master seed one at a time: h <- splitmix64(h ^ splitmix64(w)).
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> words);
/// FNV-1a 64-bit hash of a label.
std::uint64_t label_hash(std::string_view s);

struct RunSeeds {
    std::uint64_t sampling = 0;
    std::uint64_t noise = 0;
    std::uint64_t delay = 0;
};

/// Seeds of run `run` for the dataset of (scheme, snr). They hash the scheme
/// name and the SNR value rather than their positions, so a sub-campaign that
/// keeps only some cells reproduces the same datasets.
RunSeeds run_seeds(std::uint64_t master, std::string_view scheme, std::optional<double> snr_db, int run);

/// Initial delay of a cell for one run; random cells draw from a stream keyed by their label.
double initial_delay(const DelayCell& cell, std::uint64_t delay_seed);

}  // namespace ctdelay
