#pragma once

#include <span>
#include <vector>

#include "ctdelay/model.hpp"

namespace ctdelay {

/// Butterworth low-pass of the given order: poles on the circle of radius
/// omega_c, unit DC gain.
CtModel butterworth(int order, double omega_c);

/// Realization of butterworth(order, omega_c) as a cascade of second-order
/// sections (plus one first-order section for odd orders), each with entries
/// of size omega_c. Same transfer function, far better conditioned than the
/// companion form at high order.
StateSpace butterworth_ss(int order, double omega_c);

/// Realization of `second` driven by the output of `first`.
StateSpace series(const StateSpace& first, const StateSpace& second);

struct FilterBank {
    std::vector<CtModel> filters;
    std::vector<StateSpace> realizations;
    std::vector<double> cutoffs;  // rad/s
    std::vector<double> periods;  // s
    double beta = 1.0;
    int order = 10;

    std::size_t size() const { return filters.size(); }
};

/// Periods T_k = beta T_bw - (k-1)(beta-1) T_bw / (n_f-1), T_bw = 2 pi / bw.
/// In theorem mode beta below beta_lower_bound() is rejected.
FilterBank design_bank(double bw, double beta, int n_f, int order = 10, bool theorem_mode = false);

/// Bank from explicit cut-off frequencies, kept in the given order.
FilterBank bank_from_cutoffs(std::span<const double> cutoffs, int order = 10);

/// (5/4 - 1/(5 pi^2)) / (3/4 - 1/(3 pi^2))
double beta_lower_bound();

/// Period ratio M of consecutive minima/maxima used by min_filter_count.
double period_ratio(int i0);

/// Smallest n_f with n_f >= (1/M + beta - 2) / (1/M - 1). Throws for i0 < 2.
int min_filter_count(double beta, int i0);

enum class ExtremumKind { Min, Max };

struct Extremum {
    int index = 0;
    double dtau = 0.0;  // s
    ExtremumKind kind = ExtremumKind::Max;
};

/// Approximate position of the i-th extremum of the ideal-filter cost,
/// (2i+1)/4 T - T/((2i+1) pi^2). Odd i are maxima, even i minima.
double extremum_position(double period, int i);
std::vector<Extremum> extrema_locations(double omega_c, int i_max);

/// 3 pi / (2 omega_c) - 2 / (3 pi omega_c)
double convergence_radius(double omega_c);

/// 2 omega_c / pi - 2 sin(omega_c dtau) / (pi dtau) + C, with the dtau -> 0 limit C.
double ideal_cost(double omega_c, double noise_term, double dtau);
std::vector<double> ideal_cost_curve(double omega_c, double noise_term, std::span<const double> dtau_grid);

/// i-th local minimum / maximum (i >= 1) of a filter with period T:
/// min_i = ((4i+1)/4 - 1/((4i+1) pi^2)) T,  max_i = ((4i-1)/4 - 1/((4i-1) pi^2)) T.
double basin_min(int i, double period);
double basin_max(int i, double period);

/// Minimum that descent from |dtau0| reaches: 0 inside the first maximum,
/// min_i when max_i < |dtau0| <= max_{i+1}.
double nearest_basin_minimum(double period, double dtau0);

/// Smallest i0 with basin_max(i0, widest_period) >= tau_max.
int i0_for_delay(double widest_period, double tau_max);

/// max_{i+1,k+1} >= min_{i,k} for i < i0, k < n_f and max_{i,1} >= min_{i,n_f} for i <= i0,
/// with periods ordered widest first.
bool chain_conditions_hold(std::span<const double> periods, int i0);

}  // namespace ctdelay
