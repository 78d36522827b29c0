#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctdelay/experiment.hpp"

namespace ctdelay {

/// 100 |tau_hat - tau0| / tau0
double relative_error_percent(double tau_hat, double tau_true);

/// Runs the configured method on one estimator. Baseline: one Gauss-Newton path
/// with a Butterworth filter at baseline_fraction * bandwidth, then the
/// unfiltered pass. Single filter: the same with bank filter filter_index.
EstimationResult run_method(const ExperimentConfig& cfg, const RedundantEstimator& est, double tau0);

struct RunRecord {
    std::string scheme;
    std::optional<double> snr_db;
    std::string delay_cell;
    int run = 0;
    std::uint64_t sampling_seed = 0;
    std::uint64_t noise_seed = 0;
    double tau0 = 0.0;
    double tau_hat = 0.0;
    std::vector<double> theta;
    double rel_error = 0.0;  // percent
    double j0 = 0.0;
    bool success = false;     // rel_error below the configured threshold
    bool converged = false;   // estimator's own stopping flag
    std::string error;        // non-empty when the run threw
    double wall_seconds = 0.0;
};

struct CellSummary {
    std::string scheme;
    std::optional<double> snr_db;
    std::string delay_cell;
    int runs = 0;
    int successes = 0;
    double percent = 0.0;
};

struct CampaignReport {
    std::string name;
    std::string method;
    std::vector<CellSummary> cells;  // scheme-major, then SNR, then delay cell
    std::vector<RunRecord> records;  // same order, runs innermost
};

/// Called after each finished dataset with (finished, total).
using ProgressFn = std::function<void(std::size_t, std::size_t)>;

/// Every (scheme, SNR, run) dataset is generated once and estimated from every
/// initial-delay cell. Datasets are spread over `workers` threads; the report
/// is assembled in a fixed order, so it does not depend on scheduling. A run
/// that throws counts as not converged.
CampaignReport run_campaign(const ExperimentConfig& cfg, int workers = 1, const ProgressFn& progress = {});

/// Percentages recomputed from the per-run records.
std::vector<CellSummary> summarize(const ExperimentConfig& cfg, std::span<const RunRecord> records);

std::string table_csv(const CampaignReport& r);
std::string table_text(const CampaignReport& r);
std::string runs_csv(const CampaignReport& r);    // no timings, deterministic
std::string timing_csv(const CampaignReport& r);  // wall time per run

/// Writes table.csv, table.txt, runs.csv and timing.csv into dir (created if needed).
void write_campaign(const CampaignReport& r, const std::filesystem::path& dir);

struct SweepRow {
    double tau = 0.0;
    std::vector<double> fits;  // normalized_fit per bank filter, percent
    double j0 = 0.0;
    bool ok = false;
};

/// Costs over a delay grid with theta re-estimated at every delay (least
/// squares start, then unfiltered SRIVC). Rows whose estimate fails have ok = false.
std::vector<SweepRow> sweep_cost(const RedundantEstimator& est, std::span<const double> taus);

/// Ideal-filter curves of the bank: column k is the closed-form cost of
/// filter k with noise term 0, j0 their mean.
std::vector<SweepRow> ideal_sweep(const FilterBank& bank, std::span<const double> dtaus);

std::string sweep_csv(std::span<const SweepRow> rows, std::size_t n_filters);

}  // namespace ctdelay
