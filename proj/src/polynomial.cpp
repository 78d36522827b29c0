#include "ctdelay/polynomial.hpp"

#include <Eigen/Dense>
#include <stdexcept>

namespace ctdelay {

Complex poly_eval(std::span<const double> coeffs, Complex s) {
    Complex acc{0.0, 0.0};
    for (double c : coeffs) acc = acc * s + c;
    return acc;
}

std::vector<double> poly_mul(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) return {};
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

std::vector<double> poly_trim(std::span<const double> coeffs) {
    std::size_t first = 0;
    while (first + 1 < coeffs.size() && coeffs[first] == 0.0) ++first;
    return {coeffs.begin() + static_cast<std::ptrdiff_t>(first), coeffs.end()};
}

std::vector<Complex> poly_roots(std::span<const double> coeffs) {
    auto p = poly_trim(coeffs);
    if (p.empty() || p[0] == 0.0) throw std::invalid_argument("poly_roots: zero polynomial");
    const int n = static_cast<int>(p.size()) - 1;
    if (n == 0) return {};

    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) companion(0, j) = -p[j + 1] / p[0];
    for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;

    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("poly_roots: companion eigenvalue iteration did not converge");
    std::vector<Complex> roots(n);
    for (int i = 0; i < n; ++i) roots[i] = solver.eigenvalues()(i);
    return roots;
}

std::vector<double> poly_from_roots(std::span<const Complex> roots) {
    std::vector<Complex> acc{Complex{1.0, 0.0}};
    for (const Complex& r : roots) {
        std::vector<Complex> next(acc.size() + 1, Complex{0.0, 0.0});
        for (std::size_t i = 0; i < acc.size(); ++i) {
            next[i] += acc[i];
            next[i + 1] -= acc[i] * r;
        }
        acc = std::move(next);
    }
    std::vector<double> out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = acc[i].real();
    return out;
}

std::vector<double> poly_binomial(double a, int n) {
    std::vector<double> out{1.0};
    const std::vector<double> factor{1.0, a};
    for (int i = 0; i < n; ++i) out = poly_mul(out, factor);
    return out;
}

}  // namespace ctdelay
