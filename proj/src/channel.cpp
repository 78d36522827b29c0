#include "ctdelay/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace ctdelay {

EstimationContext::EstimationContext(SampledDataset data, int n, int m, double omega_svf, double tau_max)
    : data_(std::move(data)),
      input_((data_.validate(), PiecewiseInput::from_dataset(data_))),
      n_(n),
      m_(m),
      omega_svf_(omega_svf),
      tau_max_(tau_max) {
    if (n < 1 || m < 0 || m >= n) throw std::invalid_argument("estimation: orders must satisfy 0 <= m < n");
    if (!(omega_svf > 0.0)) throw std::invalid_argument("estimation: omega_svf must be > 0");
    if (!(tau_max >= 0.0)) throw std::invalid_argument("estimation: tau_max must be >= 0");
    const double threshold = tau_max + 5.0 * n / omega_svf;
    while (skip_ < data_.size() && data_.t[skip_] - data_.t.front() < threshold) ++skip_;
    if (retained() < static_cast<std::size_t>(2 * (n + m + 1)))
        throw std::invalid_argument("estimation: record too short for tau_max and the SVF settling time");
}

double retained_sq_norm(const EstimationContext& ctx, const Vector& v) {
    const auto s = static_cast<Eigen::Index>(ctx.skip());
    return v.tail(v.size() - s).squaredNorm();
}

ModelSystem::ModelSystem(std::span<const double> num, std::span<const double> den, std::span<const double> t)
    : ss_(proper_ss(num, den)), cache_(DiscretizationCache::for_grid(ss_, t, 3)), grid_(cache_, t) {}

Vector ModelSystem::filter(std::span<const double> v) const { return filter_samples(ss_, grid_, v, Hold::Cubic); }

std::pair<Vector, Vector> ModelSystem::delayed(const PiecewiseInput& input, double tau) const {
    const auto r = simulate_delayed(cache_, input, grid_.times(), tau, &grid_);
    Vector x = r.states.transpose() * ss_.H.transpose();
    x += ss_.D * r.input;
    // p (H z + D u) = H F z + H G u away from input jumps; D = 0 for strictly proper G.
    const Vector hf = ss_.F.transpose() * ss_.H.transpose();
    Vector dx = r.states.transpose() * hf;
    dx += ss_.H.dot(ss_.G) * r.input;
    return {std::move(x), std::move(dx)};
}

FilterChannel::FilterChannel(const EstimationContext& ctx) : ctx_(&ctx), y_(Eigen::Map<const Vector>(ctx.data().y.data(), static_cast<Eigen::Index>(ctx.size()))) {
    const auto s = static_cast<Eigen::Index>(ctx.skip());
    const Vector tail = y_.tail(y_.size() - s);
    y_spread_ = (tail.array() - tail.mean()).matrix().norm();
}

FilterChannel::FilterChannel(const EstimationContext& ctx, StateSpace filter, double period)
    : ctx_(&ctx), filter_(std::move(filter)), period_(period) {
    if (std::abs(filter_->D) > 0.0) throw std::invalid_argument("FilterChannel: prefilter must be strictly proper");
    derivative_ = *filter_;
    derivative_.H = filter_->H * filter_->F;
    derivative_.D = (filter_->H * filter_->G)(0);
    cache_.emplace(DiscretizationCache::for_grid(*filter_, ctx.t(), 3));
    grid_.emplace(*cache_, ctx.t());
    y_ = filter_samples(*filter_, *grid_, ctx.data().y, Hold::Cubic);
    const auto s = static_cast<Eigen::Index>(ctx.skip());
    const Vector tail = y_.tail(y_.size() - s);
    y_spread_ = (tail.array() - tail.mean()).matrix().norm();
}

DelayedInput FilterChannel::delayed(double tau) const {
    DelayedInput d;
    d.tau = tau;
    if (identity()) return d;
    const auto r = simulate_delayed(*cache_, ctx_->input(), ctx_->t(), tau, &*grid_);
    d.w = r.states.transpose() * filter_->H.transpose();
    d.dw = r.states.transpose() * derivative_.H.transpose();
    d.dw += derivative_.D * r.input;
    return d;
}

Vector FilterChannel::residual(const ModelSystem& g, const DelayedInput& d, Vector* eps_tau) const {
    if (identity()) {
        auto [x, dx] = g.delayed(ctx_->input(), d.tau);
        if (eps_tau) *eps_tau = std::move(dx);
        return y_ - x;
    }
    if (eps_tau) *eps_tau = g.filter(d.dw);
    return y_ - g.filter(d.w);
}

}  // namespace ctdelay
