#include "ctdelay/delay_gn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctdelay {

namespace {

double cost_of(const FilterChannel& ch, const ModelSystem& g, double tau, Vector* eps_tau = nullptr,
               Vector* eps_out = nullptr) {
    const auto& ctx = ch.context();
    Vector eps = ch.residual(g, ch.delayed(tau), eps_tau);
    const double c = retained_sq_norm(ctx, eps) / (2.0 * static_cast<double>(ctx.retained()));
    if (eps_out) *eps_out = std::move(eps);
    return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
}

ModelSystem system_of(const FilterChannel& ch, const ParamVector& theta) {
    return ModelSystem(theta.numerator(), theta.denominator(), ch.context().t());
}

}  // namespace

void GnConfig::validate() const {
    if (!(tau_min >= 0.0) || !(tau_max > tau_min)) throw std::invalid_argument("gn: need 0 <= tau_min < tau_max");
    if (!(dtau_min > 0.0)) throw std::invalid_argument("gn: dtau_min must be > 0");
    if (dtau_max != 0.0 && !(dtau_max > dtau_min)) throw std::invalid_argument("gn: need dtau_min < dtau_max");
    if (mu_halvings_max < 0 || max_iter < 1 || srivc_iters < 1) throw std::invalid_argument("gn: invalid iteration limits");
    if (!(eps >= 0.0)) throw std::invalid_argument("gn: eps must be >= 0");
}

double filtered_cost(const FilterChannel& ch, const ParamVector& theta, double tau) {
    return cost_of(ch, system_of(ch, theta), tau);
}

GradHess gn_gradient_hessian(const FilterChannel& ch, const ParamVector& theta, double tau) {
    const auto& ctx = ch.context();
    const auto s = static_cast<Eigen::Index>(ctx.skip());
    const double count = static_cast<double>(ctx.retained());
    Vector eps;
    Vector eps_tau;
    GradHess out;
    out.cost = cost_of(ch, system_of(ch, theta), tau, &eps_tau, &eps);
    const Vector e = eps.tail(eps.size() - s);
    const Vector et = eps_tau.tail(eps_tau.size() - s);
    out.grad = et.dot(e) / count;

    const auto reg = build_regression(ch, ch.delayed(tau), theta);
    Eigen::HouseholderQR<Matrix> qr(reg.Psi);
    const Eigen::Index p = reg.Psi.cols();
    const Matrix R = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    if (!(R.diagonal().cwiseAbs().minCoeff() > 1e-12 * R.diagonal().cwiseAbs().maxCoeff()))
        throw std::runtime_error("gn_gradient_hessian: parameter sensitivity matrix is singular");
    Vector proj = qr.householderQ().transpose() * et;
    out.hess = proj.tail(proj.size() - p).squaredNorm() / count;
    return out;
}

PathResult estimate_with_filter(const FilterChannel& ch, double tau0, const ParamVector& theta0, const GnConfig& cfg) {
    cfg.validate();
    if (tau0 < cfg.tau_min || tau0 > cfg.tau_max) throw std::invalid_argument("estimate_with_filter: tau0 outside bounds");
    double dtau_max = cfg.dtau_max;
    if (dtau_max == 0.0) dtau_max = ch.period() / 4.0;
    if (!(dtau_max > cfg.dtau_min)) throw std::invalid_argument("estimate_with_filter: no usable dtau_max");

    PathResult res{srivc_estimate(ch, tau0, theta0, cfg.eps, cfg.srivc_iters).theta, tau0, 0.0, 0, {}, {}};
    res.cost = filtered_cost(ch, res.theta, res.tau);
    res.trace.push_back({res.tau, res.cost});
    res.stop_reason = "max_iter";

    for (int it = 1; it <= cfg.max_iter; ++it) {
        res.iterations = it;
        const GradHess gh = gn_gradient_hessian(ch, res.theta, res.tau);
        double step = gh.hess > 0.0 ? -gh.grad / gh.hess : (gh.grad > 0.0 ? -dtau_max : dtau_max);
        if (!std::isfinite(step)) step = gh.grad > 0.0 ? -dtau_max : dtau_max;
        step = std::clamp(step, -dtau_max, dtau_max);

        // Trial delays are scored on the concentrated cost J(theta(tau), tau),
        // theta(tau) from warm-started IV updates at the trial delay.
        bool accepted = false;
        ParamVector theta_trial = res.theta;
        double cost_trial = 0.0;
        for (int halvings = 0; halvings <= cfg.mu_halvings_max; ++halvings, step /= 2.0) {
            if (std::abs(step) <= cfg.dtau_min) break;
            const double trial = res.tau + step;
            if (trial < cfg.tau_min || trial > cfg.tau_max) continue;
            try {
                theta_trial = srivc_estimate(ch, trial, res.theta, cfg.eps, cfg.srivc_iters).theta;
            } catch (const std::runtime_error&) {
                continue;
            }
            cost_trial = filtered_cost(ch, theta_trial, trial);
            if (cost_trial < res.cost) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            res.stop_reason = std::abs(step) <= cfg.dtau_min ? "step_below_min" : "halving_exhausted";
            break;
        }

        const double previous = res.cost;
        res.tau += step;
        res.theta = theta_trial;
        res.cost = cost_trial;
        res.trace.push_back({res.tau, res.cost});
        if (previous - res.cost < cfg.eps * previous) {
            res.stop_reason = "cost_decrease_below_eps";
            break;
        }
    }
    return res;
}

}  // namespace ctdelay
