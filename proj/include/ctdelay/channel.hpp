#pragma once

#include <optional>
#include <span>

#include "ctdelay/ct_sim.hpp"
#include "ctdelay/model.hpp"

namespace ctdelay {

/// Dataset plus the settings every estimator on it shares: model orders,
/// SVF cut-off, the delay upper bound and the resulting number of skipped
/// leading samples.
class EstimationContext {
public:
    /// Rows with t_k - t_1 < tau_max + 5 n / omega_svf are excluded from every
    /// regression and cost. Throws std::invalid_argument when fewer than
    /// 2 (n + m + 1) rows remain.
    EstimationContext(SampledDataset data, int n, int m, double omega_svf, double tau_max);

    const SampledDataset& data() const { return data_; }
    const PiecewiseInput& input() const { return input_; }
    std::span<const double> t() const { return data_.t; }
    std::size_t size() const { return data_.size(); }
    std::size_t skip() const { return skip_; }
    std::size_t retained() const { return data_.size() - skip_; }
    int n() const { return n_; }
    int m() const { return m_; }
    double omega_svf() const { return omega_svf_; }
    double tau_max() const { return tau_max_; }

private:
    SampledDataset data_;
    PiecewiseInput input_;
    int n_;
    int m_;
    double omega_svf_;
    double tau_max_;
    std::size_t skip_ = 0;
};

/// num/den driven either by a sample sequence (cubic hold) or by the exact
/// delayed input. Bound to one sample grid.
class ModelSystem {
public:
    ModelSystem(std::span<const double> num, std::span<const double> den, std::span<const double> t);

    Vector filter(std::span<const double> v) const;
    Vector filter(const Vector& v) const { return filter(std::span<const double>(v.data(), v.size())); }
    /// (G u(t_k - tau), p G u(t_k - tau))
    std::pair<Vector, Vector> delayed(const PiecewiseInput& input, double tau) const;

private:
    StateSpace ss_;
    DiscretizationCache cache_;
    GridSteps grid_;
};

/// Samples of L u(t_k - tau) and p L u(t_k - tau). Empty vectors for the
/// identity channel, where the input stays piecewise constant.
struct DelayedInput {
    double tau = 0.0;
    Vector w;
    Vector dw;
};

/// One prefilter L applied to the dataset of a context: L y is computed once,
/// L u(. - tau) on demand. The identity channel (L = 1) leaves y untouched.
class FilterChannel {
public:
    explicit FilterChannel(const EstimationContext& ctx);
    FilterChannel(const EstimationContext& ctx, StateSpace filter, double period);

    const EstimationContext& context() const { return *ctx_; }
    bool identity() const { return !filter_.has_value(); }
    /// Cut-off period of L; 0 for the identity channel.
    double period() const { return period_; }
    const Vector& y() const { return y_; }
    /// || L y - mean(L y) || over the retained samples.
    double y_spread() const { return y_spread_; }

    DelayedInput delayed(double tau) const;

    /// L (y - G u(. - tau)) at all samples; optionally its derivative in tau,
    /// L p G u(. - tau).
    Vector residual(const ModelSystem& g, const DelayedInput& d, Vector* eps_tau = nullptr) const;

private:
    const EstimationContext* ctx_;
    std::optional<StateSpace> filter_;
    StateSpace derivative_;  // p L
    std::optional<DiscretizationCache> cache_;
    std::optional<GridSteps> grid_;
    double period_ = 0.0;
    Vector y_;
    double y_spread_ = 0.0;
};

/// Sum of squares of v over the retained samples.
double retained_sq_norm(const EstimationContext& ctx, const Vector& v);

}  // namespace ctdelay
