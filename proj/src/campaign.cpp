#include "ctdelay/campaign.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "ctdelay/dataset_io.hpp"
#include "ctdelay/filter_design.hpp"
#include "ctdelay/srivc.hpp"

namespace ctdelay {

namespace {

std::string fmt(double v, const char* spec = "%.10g") {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

// RFC 4180 quoting for text fields
std::string csv_field(const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) return v;
    std::string q = "\"";
    for (char ch : v) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + '"';
}

std::string snr_label(const std::optional<double>& snr) { return snr ? fmt(*snr, "%g") : std::string("inf"); }

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot open " + p.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + p.string());
}

struct DataJob {
    std::size_t scheme;
    std::size_t snr;
    int run;
};

}  // namespace

double relative_error_percent(double tau_hat, double tau_true) { return 100.0 * std::abs(tau_hat - tau_true) / tau_true; }

EstimationResult run_method(const ExperimentConfig& cfg, const RedundantEstimator& est, double tau0) {
    switch (cfg.method) {
        case Method::Redundant:
            return est.estimate(tau0);
        case Method::SingleFilter:
            return est.estimate_single(est.channels().at(static_cast<std::size_t>(cfg.filter_index - 1)), tau0);
        case Method::BaselineAlg2: {
            const double wc = cfg.baseline_fraction * cfg.system_bandwidth();
            const FilterChannel ch(est.context(), butterworth_ss(cfg.bank.order, wc), 2.0 * std::numbers::pi / wc);
            return est.estimate_single(ch, tau0);
        }
    }
    throw std::logic_error("run_method: unknown method");
}

CampaignReport run_campaign(const ExperimentConfig& cfg, int workers, const ProgressFn& progress) {
    cfg.validate();
    if (workers < 1) throw std::invalid_argument("run_campaign: workers must be >= 1");
    const RedundancyConfig rcfg = cfg.redundancy();
    const std::size_t n_cells = cfg.initial_delays.size();

    std::vector<DataJob> jobs;
    for (std::size_t s = 0; s < cfg.schemes.size(); ++s)
        for (std::size_t q = 0; q < cfg.snr_db.size(); ++q)
            for (int r = 0; r < cfg.runs; ++r) jobs.push_back({s, q, r});

    // records[job][cell]
    std::vector<std::vector<RunRecord>> results(jobs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;

    auto work = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const DataJob& job = jobs[i];
            const SchemeSpec& scheme = cfg.schemes[job.scheme];
            const auto snr = cfg.snr_db[job.snr];
            const RunSeeds seeds = run_seeds(cfg.master_seed, scheme.name, snr, job.run);

            std::vector<RunRecord> recs(n_cells);
            for (std::size_t c = 0; c < n_cells; ++c) {
                RunRecord& rec = recs[c];
                rec.scheme = scheme.name;
                rec.snr_db = snr;
                rec.delay_cell = cfg.initial_delays[c].label;
                rec.run = job.run;
                rec.sampling_seed = seeds.sampling;
                rec.noise_seed = seeds.noise;
                rec.tau0 = initial_delay(cfg.initial_delays[c], seeds.delay);
                rec.tau_hat = std::numeric_limits<double>::quiet_NaN();
                rec.rel_error = std::numeric_limits<double>::quiet_NaN();
                rec.j0 = std::numeric_limits<double>::quiet_NaN();
            }
            std::optional<RedundantEstimator> est;
            try {
                SamplingSpec samp = scheme.sampling;
                samp.seed = seeds.sampling;
                auto gen = make_dataset(cfg.system, scheme.excitation, samp, snr, seeds.noise);
                est.emplace(std::move(gen.data), rcfg);
            } catch (const std::exception& e) {
                for (auto& rec : recs) rec.error = std::string("dataset: ") + e.what();
            }
            if (est) {
                for (auto& rec : recs) {
                    const auto t0 = std::chrono::steady_clock::now();
                    try {
                        const EstimationResult res = run_method(cfg, *est, rec.tau0);
                        rec.tau_hat = res.model.delay();
                        const ParamVector theta = ParamVector::from_model(res.model);
                        rec.theta.assign(theta.theta().data(), theta.theta().data() + theta.theta().size());
                        rec.rel_error = relative_error_percent(rec.tau_hat, cfg.system.delay());
                        rec.j0 = res.j0;
                        rec.converged = res.converged;
                        rec.success = rec.rel_error < cfg.success_percent;
                    } catch (const std::exception& e) {
                        rec.error = e.what();
                    }
                    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                }
            }
            results[i] = std::move(recs);
            const std::size_t finished = ++done;
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(finished, jobs.size());
            }
        }
    };

    const int n_threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), jobs.size()));
    if (n_threads <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
    }

    CampaignReport report;
    report.name = cfg.name;
    report.method = method_name(cfg.method);
    // jobs are (scheme, snr, run) ordered; emit (scheme, snr, cell, run)
    for (std::size_t s = 0; s < cfg.schemes.size(); ++s)
        for (std::size_t q = 0; q < cfg.snr_db.size(); ++q)
            for (std::size_t c = 0; c < n_cells; ++c)
                for (int r = 0; r < cfg.runs; ++r) {
                    const std::size_t i = (s * cfg.snr_db.size() + q) * static_cast<std::size_t>(cfg.runs) + static_cast<std::size_t>(r);
                    report.records.push_back(results[i][c]);
                }
    report.cells = summarize(cfg, report.records);
    return report;
}

std::vector<CellSummary> summarize(const ExperimentConfig& cfg, std::span<const RunRecord> records) {
    std::vector<CellSummary> cells;
    for (const auto& scheme : cfg.schemes)
        for (const auto& snr : cfg.snr_db)
            for (const auto& cell : cfg.initial_delays) {
                CellSummary c{scheme.name, snr, cell.label};
                for (const auto& r : records)
                    if (r.scheme == c.scheme && r.snr_db == c.snr_db && r.delay_cell == c.delay_cell) {
                        ++c.runs;
                        if (r.success) ++c.successes;
                    }
                c.percent = c.runs > 0 ? 100.0 * c.successes / c.runs : 0.0;
                cells.push_back(std::move(c));
            }
    return cells;
}

std::string table_csv(const CampaignReport& r) {
    std::string out = "scheme,snr_db,initial_delay,runs,converged,percent\n";
    for (const auto& c : r.cells)
        out += csv_field(c.scheme) + ',' + snr_label(c.snr_db) + ',' + csv_field(c.delay_cell) + ',' + std::to_string(c.runs) + ',' +
               std::to_string(c.successes) + ',' + fmt(c.percent, "%.1f") + '\n';
    return out;
}

std::string table_text(const CampaignReport& r) {
    // one row per (scheme, snr), one column per delay cell
    std::vector<std::string> columns;
    for (const auto& c : r.cells)
        if (std::find(columns.begin(), columns.end(), c.delay_cell) == columns.end()) columns.push_back(c.delay_cell);
    std::vector<std::pair<std::string, std::vector<std::string>>> rows;
    for (const auto& c : r.cells) {
        const std::string key = c.scheme + "  SNR " + (c.snr_db ? snr_label(c.snr_db) + " dB" : std::string("noise-free"));
        if (rows.empty() || rows.back().first != key) rows.push_back({key, {}});
        rows.back().second.push_back(fmt(c.percent, "%.0f") + "%");
    }
    std::size_t w0 = std::string("scheme / initial delay").size();
    for (const auto& row : rows) w0 = std::max(w0, row.first.size());
    std::size_t w = 6;
    for (const auto& c : columns) w = std::max(w, c.size());

    std::ostringstream os;
    os << r.name << " (" << r.method << "), global convergence over runs\n";
    os << std::left << std::setw(static_cast<int>(w0)) << "scheme / initial delay";
    for (const auto& c : columns) os << "  " << std::right << std::setw(static_cast<int>(w)) << c;
    os << '\n';
    for (const auto& row : rows) {
        os << std::left << std::setw(static_cast<int>(w0)) << row.first;
        for (const auto& v : row.second) os << "  " << std::right << std::setw(static_cast<int>(w)) << v;
        os << '\n';
    }
    return os.str();
}

std::string runs_csv(const CampaignReport& r) {
    std::string out = "scheme,snr_db,initial_delay,run,sampling_seed,noise_seed,tau0,tau_hat,rel_error_percent,j0,success,converged,theta,error\n";
    for (const auto& x : r.records) {
        std::string theta;
        for (std::size_t i = 0; i < x.theta.size(); ++i) theta += (i ? " " : "") + fmt(x.theta[i], "%.10g");
        out += csv_field(x.scheme) + ',' + snr_label(x.snr_db) + ',' + csv_field(x.delay_cell) + ',' + std::to_string(x.run) + ',' +
               std::to_string(x.sampling_seed) + ',' + std::to_string(x.noise_seed) + ',' + fmt(x.tau0) + ',' +
               fmt(x.tau_hat) + ',' + fmt(x.rel_error, "%.6g") + ',' + fmt(x.j0, "%.8g") + ',' + (x.success ? "1" : "0") +
               ',' + (x.converged ? "1" : "0") + ',' + theta + ',' + csv_field(x.error) + '\n';
    }
    return out;
}

std::string timing_csv(const CampaignReport& r) {
    std::string out = "scheme,snr_db,initial_delay,run,wall_seconds\n";
    for (const auto& x : r.records)
        out += csv_field(x.scheme) + ',' + snr_label(x.snr_db) + ',' + csv_field(x.delay_cell) + ',' + std::to_string(x.run) + ',' +
               fmt(x.wall_seconds, "%.3f") + '\n';
    return out;
}

void write_campaign(const CampaignReport& r, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    write_file(dir / "table.csv", table_csv(r));
    write_file(dir / "table.txt", table_text(r));
    write_file(dir / "runs.csv", runs_csv(r));
    write_file(dir / "timing.csv", timing_csv(r));
}

std::vector<SweepRow> sweep_cost(const RedundantEstimator& est, std::span<const double> taus) {
    std::vector<SweepRow> rows;
    const auto& channels = est.channels();
    for (double tau : taus) {
        SweepRow row;
        row.tau = tau;
        try {
            const ParamVector start = ls_init(est.context(), tau);
            const ParamVector theta = srivc_estimate(est.identity_channel(), tau, start).theta;
            double sum = 0.0;
            for (const auto& ch : channels) {
                row.fits.push_back(normalized_fit(ch, theta, tau));
                sum += row.fits.back();
            }
            row.j0 = sum / static_cast<double>(channels.size());
            row.ok = std::isfinite(row.j0);
        } catch (const std::exception&) {
            row.fits.assign(channels.size(), std::numeric_limits<double>::quiet_NaN());
            row.j0 = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<SweepRow> ideal_sweep(const FilterBank& bank, std::span<const double> dtaus) {
    std::vector<SweepRow> rows;
    for (double d : dtaus) {
        SweepRow row{d, {}, 0.0, true};
        for (double wc : bank.cutoffs) row.fits.push_back(ideal_cost(wc, 0.0, d));
        double sum = 0.0;
        for (double v : row.fits) sum += v;
        row.j0 = sum / static_cast<double>(row.fits.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows, std::size_t n_filters) {
    std::string out = "tau";
    for (std::size_t k = 1; k <= n_filters; ++k) out += ",J" + std::to_string(k);
    out += ",J0\n";
    for (const auto& r : rows) {
        out += fmt(r.tau, "%.6g");
        for (double v : r.fits) out += ',' + fmt(v, "%.8g");
        out += ',' + fmt(r.j0, "%.8g") + '\n';
    }
    return out;
}

}  // namespace ctdelay
