#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ctdelay/channel.hpp"
#include "ctdelay/delay_gn.hpp"
#include "ctdelay/filter_design.hpp"

namespace ctdelay {

/// 100 ||L (y - G u(. - tau))|| / ||L y - mean(L y)|| over the retained samples.
/// Throws std::invalid_argument when the filtered output has no spread.
double normalized_fit(const FilterChannel& ch, const ParamVector& theta, double tau);

/// Mean of normalized_fit over the channels.
double j0(std::span<const FilterChannel> channels, const ParamVector& theta, double tau);

struct SwitchLogEntry {
    int round = 0;
    int path = 0;
    double j0 = 0.0;
    bool accepted = false;
};

template <class Rho>
struct GenericResult {
    Rho rho;
    double j0 = 0.0;
    int rounds = 0;
    std::vector<SwitchLogEntry> log;
};

/// Switching loop over solver paths sharing one reference cost: from the
/// current point try path i; a result that does not lower j0 by the factor
/// (1 - eps) is a failure and moves to the next path, a success restarts from
/// path 0. Stops after a full cycle of failures or max_rounds attempts.
template <class Rho, class Path, class Cost>
GenericResult<Rho> redundant_minimize_generic(const std::vector<Path>& paths, Cost j0_eval, Rho rho0, double eps,
                                              int max_rounds) {
    if (paths.empty()) throw std::invalid_argument("redundant_minimize_generic: no paths");
    GenericResult<Rho> res{rho0, j0_eval(rho0), 0, {}};
    const int M = static_cast<int>(paths.size());
    int i = 0;
    int failures = 0;
    while (res.rounds < max_rounds) {
        ++res.rounds;
        Rho xi = paths[static_cast<std::size_t>(i)](res.rho);
        const double jx = j0_eval(xi);
        const bool failure = !(jx <= (1.0 - eps) * res.j0);
        res.log.push_back({res.rounds, i, jx, !failure});
        if (failure) {
            if (++failures >= M) break;
            i = (i + 1) % M;
        } else {
            res.rho = std::move(xi);
            res.j0 = jx;
            failures = 0;
            i = 0;
        }
    }
    return res;
}

struct RedundancyConfig {
    FilterBank bank;
    GnConfig gn;
    int n = 2;
    int m = 0;
    double omega_svf = 1.0;
    double eps_outer = 1e-3;
    int max_outer = 20;
    bool refine = true;  // final unfiltered pass
    // Candidates are scored at their delay with theta re-estimated by unfiltered
    // SRIVC (warm-started from the path's theta) up to this tolerance and count.
    double scoring_eps = 1e-3;
    int scoring_iters = 50;

    void validate() const;
};

/// Owns the estimation context and one channel per bank filter for a dataset,
/// so several starting delays can reuse the filtered output.
class RedundantEstimator {
public:
    RedundantEstimator(SampledDataset data, RedundancyConfig cfg);

    const RedundancyConfig& config() const { return cfg_; }
    const EstimationContext& context() const { return *ctx_; }
    const std::vector<FilterChannel>& channels() const { return channels_; }
    const FilterChannel& identity_channel() const { return identity_; }

    double j0(const ParamVector& theta, double tau) const;

    /// Multi-filter estimate: every outer round runs one Gauss-Newton path per
    /// bank filter from the current point, re-estimates theta unfiltered at each
    /// candidate delay, keeps the candidate with the lowest j0 and stops when the relative delay change falls below eps_outer, no
    /// candidate improves j0, or max_outer rounds pass. Throws
    /// std::runtime_error when every path of the first round fails.
    EstimationResult estimate(double tau0) const;

    /// One Gauss-Newton path with the given channel, then the unfiltered pass.
    EstimationResult estimate_single(const FilterChannel& ch, double tau0) const;

private:
    /// Unfiltered SRIVC at tau from theta; theta itself when that fails.
    ParamVector concentrate(const ParamVector& theta, double tau) const;
    /// Unfiltered pass; reverted when it raises the unfiltered normalized fit by more than 1e-9.
    void refine(ParamVector& theta, double& tau, std::vector<TraceEntry>& trace, int outer) const;

    RedundancyConfig cfg_;
    std::unique_ptr<EstimationContext> ctx_;
    std::vector<FilterChannel> channels_;
    FilterChannel identity_;
};

EstimationResult estimate(const SampledDataset& data, double tau0, const RedundancyConfig& cfg);

}  // namespace ctdelay
