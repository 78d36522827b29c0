#pragma once

#include <string>
#include <vector>

#include "ctdelay/channel.hpp"
#include "ctdelay/srivc.hpp"

namespace ctdelay {

struct GnConfig {
    double tau_min = 0.0;
    double tau_max = 15.0;
    double dtau_min = 1e-3;
    double dtau_max = 0.0;  // 0: a quarter of the active filter period
    int mu_halvings_max = 20;
    int max_iter = 10;
    double eps = 1e-3;   // relative cost decrease that still counts as progress
    int srivc_iters = 3;  // warm-started IV updates per accepted delay

    void validate() const;
};

/// sum eps_f^2 / (2 (N - s)) with eps_f = L (y - G(theta) u(. - tau)) over the retained samples.
double filtered_cost(const FilterChannel& ch, const ParamVector& theta, double tau);

struct GradHess {
    double cost = 0.0;
    double grad = 0.0;
    double hess = 0.0;
};

/// Gradient eps_tau^T eps / (N - s) with eps_tau = L p G u(. - tau), and the
/// Gauss-Newton curvature of eps_tau after projecting out the span of the
/// parameter sensitivities eps_theta = -Psi.
GradHess gn_gradient_hessian(const FilterChannel& ch, const ParamVector& theta, double tau);

struct PathStep {
    double tau = 0.0;
    double cost = 0.0;
};

struct PathResult {
    ParamVector theta;
    double tau = 0.0;
    double cost = 0.0;
    int iterations = 0;
    std::vector<PathStep> trace;  // accepted iterates, starting point first
    std::string stop_reason;
};

/// Gauss-Newton delay refinement on one channel with interleaved IV updates of theta.
/// Throws when the starting IV estimate fails.
PathResult estimate_with_filter(const FilterChannel& ch, double tau0, const ParamVector& theta0, const GnConfig& cfg);

}  // namespace ctdelay
