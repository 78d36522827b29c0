#pragma once

#include "ctdelay/channel.hpp"
#include "ctdelay/model.hpp"

namespace ctdelay {

/// Retained rows only. Columns follow theta = [a1..an, b0..bm].
struct RegressionMatrices {
    Matrix Phi;  // [-p^(n-1) y_f .. -y_f, p^m u_f .. u_f]
    Matrix Psi;  // same with the instrument x_hat in place of y
    Vector Y;    // p^n y_f
};

/// Denominator roots with Re > 0 mirrored into the left half plane.
ParamVector stabilized(const ParamVector& theta);

/// Regression of the channel's data at delay d.tau, prefiltered by 1/A_prev
/// after stabilizing theta_prev, with instruments x_hat = B_prev/A_prev u(. - tau).
RegressionMatrices build_regression(const FilterChannel& ch, const DelayedInput& d, const ParamVector& theta_prev);

/// theta solving Psi^T Phi theta = Psi^T Y through a QR factorization of Psi.
/// Throws std::runtime_error when the system is singular.
Vector iv_solve(const RegressionMatrices& r);

/// Least squares on state-variable-filter derivatives, F(p) = 1/(p + omega_svf)^n.
/// Throws std::runtime_error on rank deficiency (insufficient excitation).
ParamVector ls_init(const EstimationContext& ctx, double tau);
ParamVector ls_init(const SampledDataset& data, double tau, int n, int m, double omega_svf);

/// One instrumental-variable update.
ParamVector srivc_iterate(const FilterChannel& ch, const DelayedInput& d, const ParamVector& theta_prev);

struct SrivcResult {
    ParamVector theta;  // stabilized
    int iterations = 0;
    bool converged = false;
    double last_change = 0.0;
};

/// Iterates until the largest relative parameter change drops below eps or max_iter is reached.
SrivcResult srivc_estimate(const FilterChannel& ch, double tau, const ParamVector& start, double eps = 1e-3,
                           int max_iter = 50);

/// Standalone form: LS start, optional strictly proper prefilter.
SrivcResult srivc_estimate(const SampledDataset& data, double tau, int n, int m, double omega_svf,
                           const StateSpace* prefilter = nullptr, double eps = 1e-3, int max_iter = 50);

}  // namespace ctdelay
