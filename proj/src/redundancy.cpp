#include "ctdelay/redundancy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ctdelay/srivc.hpp"

namespace ctdelay {

double normalized_fit(const FilterChannel& ch, const ParamVector& theta, double tau) {
    if (!(ch.y_spread() > 0.0)) throw std::invalid_argument("normalized_fit: filtered output has zero variance");
    const ModelSystem g(theta.numerator(), theta.denominator(), ch.context().t());
    const Vector eps = ch.residual(g, ch.delayed(tau));
    const double fit = 100.0 * std::sqrt(retained_sq_norm(ch.context(), eps)) / ch.y_spread();
    return std::isfinite(fit) ? fit : std::numeric_limits<double>::infinity();
}

double j0(std::span<const FilterChannel> channels, const ParamVector& theta, double tau) {
    if (channels.empty()) throw std::invalid_argument("j0: empty filter bank");
    double sum = 0.0;
    for (const auto& ch : channels) sum += normalized_fit(ch, theta, tau);
    return sum / static_cast<double>(channels.size());
}

void RedundancyConfig::validate() const {
    if (bank.size() == 0) throw std::invalid_argument("redundancy: filter bank is empty");
    if (!(eps_outer > 0.0)) throw std::invalid_argument("redundancy: eps_outer must be > 0");
    if (max_outer < 1) throw std::invalid_argument("redundancy: max_outer must be >= 1");
    if (!(scoring_eps > 0.0) || scoring_iters < 1) throw std::invalid_argument("redundancy: bad scoring settings");
    gn.validate();
}

RedundantEstimator::RedundantEstimator(SampledDataset data, RedundancyConfig cfg)
    : cfg_((cfg.validate(), std::move(cfg))),
      ctx_(std::make_unique<EstimationContext>(std::move(data), cfg_.n, cfg_.m, cfg_.omega_svf, cfg_.gn.tau_max)),
      identity_(*ctx_) {
    channels_.reserve(cfg_.bank.size());
    for (std::size_t k = 0; k < cfg_.bank.size(); ++k)
        channels_.emplace_back(*ctx_, cfg_.bank.realizations[k], cfg_.bank.periods[k]);
}

double RedundantEstimator::j0(const ParamVector& theta, double tau) const { return ctdelay::j0(channels_, theta, tau); }

ParamVector RedundantEstimator::concentrate(const ParamVector& theta, double tau) const {
    try {
        return srivc_estimate(identity_, tau, theta, cfg_.scoring_eps, cfg_.scoring_iters).theta;
    } catch (const std::runtime_error&) {
        return theta;
    }
}

void RedundantEstimator::refine(ParamVector& theta, double& tau, std::vector<TraceEntry>& trace, int outer) const {
    GnConfig gn = cfg_.gn;
    if (gn.dtau_max == 0.0) gn.dtau_max = *std::min_element(cfg_.bank.periods.begin(), cfg_.bank.periods.end()) / 4.0;
    try {
        const double before = normalized_fit(identity_, theta, tau);
        const PathResult p = estimate_with_filter(identity_, tau, theta, gn);
        const double after = normalized_fit(identity_, p.theta, p.tau);
        if (after <= before + 1e-9) {
            theta = p.theta;
            tau = p.tau;
        }
        trace.push_back({outer, 0, tau, j0(theta, tau), true});
    } catch (const std::runtime_error&) {
    }
}

EstimationResult RedundantEstimator::estimate(double tau0) const {
    const auto& gn = cfg_.gn;
    if (tau0 < gn.tau_min || tau0 > gn.tau_max) throw std::invalid_argument("estimate: tau0 outside bounds");
    ParamVector theta = ls_init(*ctx_, tau0);
    double tau = tau0;
    double best_j0 = std::numeric_limits<double>::infinity();
    std::vector<TraceEntry> trace;
    bool converged = false;
    int outer = 0;
    std::string failures;

    while (outer < cfg_.max_outer) {
        ++outer;
        int best = -1;
        std::size_t best_entry = 0;
        double round_best = std::numeric_limits<double>::infinity();
        ParamVector round_theta = theta;
        double round_tau = tau;
        for (std::size_t k = 0; k < channels_.size(); ++k) {
            try {
                const PathResult p = estimate_with_filter(channels_[k], tau, theta, gn);
                const ParamVector th = concentrate(p.theta, p.tau);
                const double score = j0(th, p.tau);
                trace.push_back({outer, static_cast<int>(k + 1), p.tau, score, false});
                if (score < round_best) {
                    round_best = score;
                    best = static_cast<int>(k);
                    best_entry = trace.size() - 1;
                    round_theta = th;
                    round_tau = p.tau;
                }
            } catch (const std::exception& e) {
                if (outer == 1) failures += "filter " + std::to_string(k + 1) + ": " + e.what() + "; ";
            }
        }
        if (best < 0) {
            if (outer == 1) throw std::runtime_error("estimate: every solver path failed: " + failures);
            converged = true;
            break;
        }
        if (!(round_best < best_j0)) {
            converged = true;
            break;
        }
        trace[best_entry].selected = true;
        const double change = std::abs(round_tau - tau) / std::max(std::abs(round_tau), 1e-12);
        theta = round_theta;
        tau = round_tau;
        best_j0 = round_best;
        if (change < cfg_.eps_outer) {
            converged = true;
            break;
        }
    }
    if (cfg_.refine) refine(theta, tau, trace, outer);
    return EstimationResult{theta.to_model(tau), j0(theta, tau), std::move(trace), converged, outer};
}

EstimationResult RedundantEstimator::estimate_single(const FilterChannel& ch, double tau0) const {
    ParamVector theta = ls_init(*ctx_, tau0);
    const PathResult p = estimate_with_filter(ch, tau0, theta, cfg_.gn);
    theta = p.theta;
    double tau = p.tau;
    std::vector<TraceEntry> trace{{1, 1, tau, j0(theta, tau), true}};
    if (cfg_.refine) refine(theta, tau, trace, 1);
    const bool converged = p.stop_reason != "max_iter";
    return EstimationResult{theta.to_model(tau), j0(theta, tau), std::move(trace), converged, p.iterations};
}

EstimationResult estimate(const SampledDataset& data, double tau0, const RedundancyConfig& cfg) {
    return RedundantEstimator(data, cfg).estimate(tau0);
}

}  // namespace ctdelay
