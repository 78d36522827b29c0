#include "ctdelay/filter_design.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "ctdelay/polynomial.hpp"

namespace ctdelay {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPi2 = kPi * kPi;

void check_cutoff(int order, double omega_c) {
    if (order < 1) throw std::invalid_argument("butterworth: order must be >= 1");
    if (!(omega_c > 0.0) || !std::isfinite(omega_c)) throw std::invalid_argument("butterworth: omega_c must be > 0");
}

}  // namespace

CtModel butterworth(int order, double omega_c) {
    check_cutoff(order, omega_c);
    std::vector<Complex> poles;
    for (int k = 1; k <= order; ++k) {
        const double angle = kPi / 2.0 + (2.0 * k - 1.0) * kPi / (2.0 * order);
        poles.push_back(std::polar(omega_c, angle));
    }
    auto den = poly_from_roots(poles);
    return CtModel({den.back()}, den);
}

StateSpace series(const StateSpace& a, const StateSpace& b) {
    const int na = a.order();
    const int nb = b.order();
    StateSpace s;
    s.F = Matrix::Zero(na + nb, na + nb);
    s.F.topLeftCorner(na, na) = a.F;
    s.F.bottomLeftCorner(nb, na) = b.G * a.H;
    s.F.bottomRightCorner(nb, nb) = b.F;
    s.G = Vector(na + nb);
    s.G << a.G, b.G * a.D;
    s.H = RowVector(na + nb);
    s.H << b.D * a.H, b.H;
    s.D = b.D * a.D;
    return s;
}

StateSpace butterworth_ss(int order, double omega_c) {
    check_cutoff(order, omega_c);
    const double w = omega_c;
    StateSpace out;
    bool first = true;
    auto append = [&](const StateSpace& sec) {
        out = first ? sec : series(out, sec);
        first = false;
    };
    if (order % 2 == 1) {
        StateSpace sec;
        sec.F = Matrix::Constant(1, 1, -w);
        sec.G = Vector::Constant(1, 1.0);
        sec.H = RowVector::Constant(1, w);
        append(sec);
    }
    for (int k = 1; k <= order / 2; ++k) {
        // w^2 / (s^2 + 2 zeta w s + w^2)
        const double zeta = std::sin((2.0 * k - 1.0) * kPi / (2.0 * order));
        StateSpace sec;
        sec.F.resize(2, 2);
        sec.F << 0.0, w, -w, -2.0 * zeta * w;
        sec.G = Vector::Zero(2);
        sec.G(1) = 1.0;
        sec.H = RowVector::Zero(2);
        sec.H(0) = w;
        append(sec);
    }
    return out;
}

FilterBank bank_from_cutoffs(std::span<const double> cutoffs, int order) {
    if (cutoffs.empty()) throw std::invalid_argument("filter bank: at least one cut-off is required");
    FilterBank bank;
    bank.order = order;
    for (double wc : cutoffs) {
        bank.filters.push_back(butterworth(order, wc));
        bank.realizations.push_back(butterworth_ss(order, wc));
        bank.cutoffs.push_back(wc);
        bank.periods.push_back(2.0 * kPi / wc);
    }
    bank.beta = bank.periods.front() / bank.periods.back();
    return bank;
}

FilterBank design_bank(double bw, double beta, int n_f, int order, bool theorem_mode) {
    if (!(bw > 0.0)) throw std::invalid_argument("design_bank: bandwidth must be > 0");
    if (!(beta > 1.0) || beta > 10.0) throw std::invalid_argument("design_bank: beta must be in (1, 10]");
    if (n_f < 2) throw std::invalid_argument("design_bank: n_f must be >= 2");
    if (theorem_mode && beta < beta_lower_bound())
        throw std::invalid_argument("design_bank: beta " + std::to_string(beta) + " is below the lower bound " +
                                    std::to_string(beta_lower_bound()));
    const double t_bw = 2.0 * kPi / bw;
    std::vector<double> cutoffs;
    for (int k = 1; k <= n_f; ++k) {
        const double period = beta * t_bw - (k - 1) * (beta - 1.0) * t_bw / (n_f - 1);
        cutoffs.push_back(2.0 * kPi / period);
    }
    auto bank = bank_from_cutoffs(cutoffs, order);
    bank.beta = beta;
    for (int k = 0; k < n_f; ++k)
        bank.periods[static_cast<std::size_t>(k)] = beta * t_bw - k * (beta - 1.0) * t_bw / (n_f - 1);
    return bank;
}

double beta_lower_bound() { return (1.25 - 1.0 / (5.0 * kPi2)) / (0.75 - 1.0 / (3.0 * kPi2)); }

double period_ratio(int i0) {
    if (i0 < 2) throw std::invalid_argument("period_ratio: i0 must be >= 2");
    const double a = 4.0 * i0 - 3.0;
    const double b = 4.0 * i0 - 1.0;
    return (a - 4.0 / (a * kPi2)) / (b - 4.0 / (b * kPi2));
}

int min_filter_count(double beta, int i0) {
    const double M = period_ratio(i0);
    const double denom = 1.0 / M - 1.0;
    if (!(denom > 0.0)) throw std::logic_error("min_filter_count: degenerate period ratio");
    const double bound = (1.0 / M + beta - 2.0) / denom;
    return std::max(2, static_cast<int>(std::ceil(bound - 1e-12)));
}

double extremum_position(double period, int i) {
    const double q = 2.0 * i + 1.0;
    return q / 4.0 * period - period / (q * kPi2);
}

std::vector<Extremum> extrema_locations(double omega_c, int i_max) {
    if (!(omega_c > 0.0)) throw std::invalid_argument("extrema_locations: omega_c must be > 0");
    const double period = 2.0 * kPi / omega_c;
    std::vector<Extremum> out;
    for (int i = 1; i <= i_max; ++i)
        out.push_back({i, extremum_position(period, i), i % 2 == 1 ? ExtremumKind::Max : ExtremumKind::Min});
    return out;
}

double convergence_radius(double omega_c) {
    if (!(omega_c > 0.0)) throw std::invalid_argument("convergence_radius: omega_c must be > 0");
    return 3.0 * kPi / (2.0 * omega_c) - 2.0 / (3.0 * kPi * omega_c);
}

double ideal_cost(double omega_c, double noise_term, double dtau) {
    const double x = omega_c * dtau;
    const double sinc = std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
    return 2.0 * omega_c / kPi - 2.0 * omega_c * sinc / kPi + noise_term;
}

std::vector<double> ideal_cost_curve(double omega_c, double noise_term, std::span<const double> dtau_grid) {
    std::vector<double> out;
    out.reserve(dtau_grid.size());
    for (double d : dtau_grid) out.push_back(ideal_cost(omega_c, noise_term, d));
    return out;
}

double basin_min(int i, double period) {
    const double q = 4.0 * i + 1.0;
    return (q / 4.0 - 1.0 / (q * kPi2)) * period;
}

double basin_max(int i, double period) {
    const double q = 4.0 * i - 1.0;
    return (q / 4.0 - 1.0 / (q * kPi2)) * period;
}

double nearest_basin_minimum(double period, double dtau0) {
    const double d = std::abs(dtau0);
    if (d <= basin_max(1, period)) return 0.0;
    int i = 1;
    while (d > basin_max(i + 1, period)) ++i;
    return basin_min(i, period);
}

int i0_for_delay(double widest_period, double tau_max) {
    int i = 1;
    while (basin_max(i, widest_period) < tau_max) ++i;
    return i;
}

bool chain_conditions_hold(std::span<const double> periods, int i0) {
    const std::size_t nf = periods.size();
    for (int i = 1; i < i0; ++i)
        for (std::size_t k = 0; k + 1 < nf; ++k)
            if (basin_max(i + 1, periods[k + 1]) < basin_min(i, periods[k])) return false;
    for (int i = 1; i <= i0; ++i)
        if (basin_max(i, periods.front()) < basin_min(i, periods.back())) return false;
    return true;
}

}  // namespace ctdelay
