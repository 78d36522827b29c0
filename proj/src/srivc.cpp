#include "ctdelay/srivc.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ctdelay/polynomial.hpp"

namespace ctdelay {

namespace {

Matrix retained_rows(const Matrix& rows, std::size_t skip) {
    const auto s = static_cast<Eigen::Index>(skip);
    return rows.rightCols(rows.cols() - s).transpose();
}

// Columns [-p^(n-1) .. -p^0 of ysig, p^m .. p^0 of usig] from (order+1) x N derivative rows.
Matrix regressor(const Matrix& yrows, const Matrix& urows, int n, int m, std::size_t skip) {
    const Matrix yr = retained_rows(yrows, skip);
    const Matrix ur = retained_rows(urows, skip);
    Matrix out(yr.rows(), n + m + 1);
    for (int i = 0; i < n; ++i) out.col(i) = -yr.col(n - 1 - i);
    for (int j = 0; j <= m; ++j) out.col(n + j) = ur.col(m - j);
    return out;
}

// rows i = 0..n of p^i B / A^2 v from rows of p^k / A^2 v
Matrix instrument_rows(const Matrix& rows2, std::span<const double> b, int n) {
    const int m = static_cast<int>(b.size()) - 1;
    Matrix out = Matrix::Zero(n + 1, rows2.cols());
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= m; ++j) out.row(i) += b[static_cast<std::size_t>(j)] * rows2.row(i + m - j);
    return out;
}

}  // namespace

ParamVector stabilized(const ParamVector& theta) {
    const auto den = reflect_unstable(theta.denominator());
    Vector v = theta.theta();
    for (int i = 0; i < theta.n(); ++i) v(i) = den[static_cast<std::size_t>(i + 1)];
    return ParamVector(theta.n(), theta.m(), std::move(v));
}

RegressionMatrices build_regression(const FilterChannel& ch, const DelayedInput& d, const ParamVector& theta_prev) {
    const auto& ctx = ch.context();
    const int n = ctx.n();
    const int m = ctx.m();
    if (theta_prev.n() != n || theta_prev.m() != m) throw std::invalid_argument("build_regression: order mismatch");
    const ParamVector th = stabilized(theta_prev);
    const auto a = th.denominator();
    const auto b = th.numerator();
    const DerivativeFilter f1(a, ctx.t());
    const DerivativeFilter f2(poly_mul(a, a), ctx.t());

    const auto y = ch.y();
    const Matrix yrows = f1.of_samples(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
    Matrix urows;
    Matrix rows2;
    if (ch.identity()) {
        urows = f1.of_delayed_input(ctx.input(), d.tau);
        rows2 = f2.of_delayed_input(ctx.input(), d.tau);
    } else {
        const std::span<const double> w(d.w.data(), static_cast<std::size_t>(d.w.size()));
        urows = f1.of_samples(w);
        rows2 = f2.of_samples(w);
    }
    const Matrix xrows = instrument_rows(rows2, b, n);

    RegressionMatrices r;
    r.Phi = regressor(yrows, urows, n, m, ctx.skip());
    r.Psi = regressor(xrows, urows, n, m, ctx.skip());
    r.Y = retained_rows(yrows.row(n), ctx.skip());
    return r;
}

Vector iv_solve(const RegressionMatrices& r) {
    const Eigen::Index p = r.Phi.cols();
    // Column scaling keeps derivative orders of very different size comparable.
    Vector scale(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double s = r.Psi.col(j).norm();
        if (!(s > 0.0) || !std::isfinite(s)) throw std::runtime_error("iv_solve: instrument column is zero or non-finite");
        scale(j) = 1.0 / s;
    }
    const Matrix psi = r.Psi * scale.asDiagonal();
    const Matrix phi = r.Phi * scale.asDiagonal();
    Eigen::HouseholderQR<Matrix> qr(psi);
    const Matrix R = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const double rmax = R.diagonal().cwiseAbs().maxCoeff();
    if (!(R.diagonal().cwiseAbs().minCoeff() > 1e-12 * rmax))
        throw std::runtime_error("iv_solve: instrument matrix is rank deficient");
    const Matrix qphi = (qr.householderQ().transpose() * phi).topRows(p);
    const Vector qy = (qr.householderQ().transpose() * r.Y).head(p);
    Eigen::ColPivHouseholderQR<Matrix> solver(qphi);
    solver.setThreshold(1e-12);
    if (solver.rank() < p) throw std::runtime_error("iv_solve: Psi^T Phi is singular");
    const Vector z = solver.solve(qy);
    const Vector theta = scale.asDiagonal() * z;
    if (!theta.allFinite()) throw std::runtime_error("iv_solve: non-finite solution");
    return theta;
}

ParamVector ls_init(const EstimationContext& ctx, double tau) {
    const int n = ctx.n();
    const int m = ctx.m();
    const DerivativeFilter svf(poly_binomial(ctx.omega_svf(), n), ctx.t());
    const Matrix yrows = svf.of_samples(ctx.data().y);
    const Matrix urows = svf.of_delayed_input(ctx.input(), tau);
    Matrix phi = regressor(yrows, urows, n, m, ctx.skip());
    const Vector Y = retained_rows(yrows.row(n), ctx.skip());
    Vector scale(phi.cols());
    for (Eigen::Index j = 0; j < phi.cols(); ++j) {
        const double s = phi.col(j).norm();
        if (!(s > 0.0) || !std::isfinite(s)) throw std::runtime_error("ls_init: regressor is rank deficient (insufficient excitation)");
        scale(j) = 1.0 / s;
    }
    phi = phi * scale.asDiagonal();
    Eigen::ColPivHouseholderQR<Matrix> qr(phi);
    qr.setThreshold(1e-10);
    if (qr.rank() < phi.cols()) throw std::runtime_error("ls_init: regressor is rank deficient (insufficient excitation)");
    const Vector theta = scale.asDiagonal() * qr.solve(Y);
    if (!theta.allFinite()) throw std::runtime_error("ls_init: non-finite solution");
    return ParamVector(n, m, theta);
}

ParamVector ls_init(const SampledDataset& data, double tau, int n, int m, double omega_svf) {
    const EstimationContext ctx(data, n, m, omega_svf, tau);
    return ls_init(ctx, tau);
}

ParamVector srivc_iterate(const FilterChannel& ch, const DelayedInput& d, const ParamVector& theta_prev) {
    const auto r = build_regression(ch, d, theta_prev);
    return ParamVector(theta_prev.n(), theta_prev.m(), iv_solve(r));
}

SrivcResult srivc_estimate(const FilterChannel& ch, double tau, const ParamVector& start, double eps, int max_iter) {
    if (max_iter < 1) throw std::invalid_argument("srivc_estimate: max_iter must be >= 1");
    const DelayedInput d = ch.delayed(tau);
    SrivcResult res{.theta = stabilized(start)};
    for (int j = 1; j <= max_iter; ++j) {
        const ParamVector next = stabilized(srivc_iterate(ch, d, res.theta));
        res.last_change = next.relative_change(res.theta);
        res.theta = next;
        res.iterations = j;
        if (res.last_change < eps) {
            res.converged = true;
            break;
        }
    }
    return res;
}

SrivcResult srivc_estimate(const SampledDataset& data, double tau, int n, int m, double omega_svf,
                           const StateSpace* prefilter, double eps, int max_iter) {
    const EstimationContext ctx(data, n, m, omega_svf, tau);
    const ParamVector start = ls_init(ctx, tau);
    if (prefilter) {
        const FilterChannel ch(ctx, *prefilter, 0.0);
        return srivc_estimate(ch, tau, start, eps, max_iter);
    }
    const FilterChannel ch(ctx);
    return srivc_estimate(ch, tau, start, eps, max_iter);
}

}  // namespace ctdelay
