#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ctdelay/model.hpp"

namespace ctdelay {

// Discretization of x' = F x + G u over a step of length h.
//
// Every step is the exponential of an augmented generator that appends a
// chain of integrators of length d + 1 to the input,
//
//     A = [ F  G  0 ... 0 ]
//         [ 0  J          ]      J = nilpotent shift, (d+1) x (d+1)
//
// whose top n rows hold [F(h) | R_0(h) | ... | R_d(h)], with R_j(h) the state
// response to the input s^j / j!. With d = 1 this is [F(h) | G(h) | ramp].
// An input u(t0 + s) = sum_j c_j s^j / j! then advances the state as
// z(t0 + h) = F(h) z(t0) + sum_j R_j(h) c_j.

/// How a sample sequence is continued between sample instants when it is fed
/// through a continuous-time system.
enum class Hold { Zero, Linear, Cubic };

/// F(h) = exp(F_c h), G(h) = int_0^h exp(F_c s) ds G_c. Throws std::invalid_argument for h < 0.
std::pair<Matrix, Vector> expm_pair(const StateSpace& ss, double h);

/// One classical RK4 step of the matrix ODE X' = A X from X(0) = I, returned as (F(delta), G(delta)).
std::pair<Matrix, Vector> rk4_pair(const StateSpace& ss, double delta);

Matrix augmented_generator(const StateSpace& ss, int degree = 1);
Matrix augmented_expm(const StateSpace& ss, double h, int degree = 1);
Matrix augmented_rk4(const StateSpace& ss, double delta, int degree = 1);

/// Precomputed exp(A m Delta) for m = 0..m_max; any step h = m Delta + delta is
/// formed as table[m] * RK4(delta).
class DiscretizationCache {
public:
    DiscretizationCache(StateSpace ss, double delta, int m_max, int degree = 1);

    /// Base period Delta = min(h_min / 2, 0.02 / ||A||_inf) and a table covering h_max.
    /// Fast systems that would need more than 4096 entries get a coarser Delta;
    /// their residual steps then use the exact exponential.
    static DiscretizationCache for_steps(StateSpace ss, double h_min, double h_max, int degree = 1);
    static DiscretizationCache for_grid(StateSpace ss, std::span<const double> t, int degree = 1);

    const StateSpace& ss() const { return ss_; }
    double delta() const { return delta_; }
    int m_max() const { return static_cast<int>(table_.size()) - 1; }
    int order() const { return ss_.order(); }
    int degree() const { return degree_; }

    Matrix F_table(int m) const;
    Vector G_table(int m) const;
    const Matrix& augmented(int m) const { return table_.at(static_cast<std::size_t>(m)); }

    /// (F(h), G(h)). Throws std::out_of_range when h is beyond the table.
    std::pair<Matrix, Vector> hybrid_step(double h) const;

    /// Top n rows of the augmented step, n x (n + degree + 1).
    Matrix step_block(double h) const;
    /// Same block written column-major into out (n * (n + degree + 1) values).
    void step_block_into(double h, double* out) const;

private:
    StateSpace ss_;
    double delta_;
    int degree_;
    std::vector<Matrix> table_;
    Matrix generator_;
    double norm_ = 0.0;
    // top rows of table[m] * A^j / j!, j = 0..4; RK4 on a linear system is
    // its fourth-order Taylor polynomial, so table[m] * RK4(delta) is
    // sum_j delta^j terms_[m][j].
    std::vector<std::array<Matrix, 5>> terms_;
};

/// Input signal on the input time axis: zero before the first knot, then on
/// [knot_j, knot_{j+1}) equal to value_j + slope_j (t - knot_j). The last segment extends to +inf.
class PiecewiseInput {
public:
    PiecewiseInput(std::vector<double> knots, std::vector<double> values, std::vector<double> slopes);

    /// ZOH datasets use the clock edges when present, else every sample instant;
    /// FOH datasets interpolate linearly between samples.
    static PiecewiseInput from_dataset(const SampledDataset& data);
    static PiecewiseInput zoh(std::span<const double> t, std::span<const double> v);

    double value_at(double t) const;
    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }
    const std::vector<double>& slopes() const { return slopes_; }

    PiecewiseInput scaled(double a) const;
    PiecewiseInput plus(const PiecewiseInput& other, double a = 1.0) const;

private:
    std::vector<double> knots_;
    std::vector<double> values_;
    std::vector<double> slopes_;
};

/// Step blocks of one system for every interval of a fixed sample grid.
/// A grid whose intervals agree to 1e-9 relative stores a single block.
class GridSteps {
public:
    GridSteps(const DiscretizationCache& cache, std::span<const double> t);

    bool regular() const { return regular_; }
    int order() const { return n_; }
    int degree() const { return degree_; }
    std::size_t intervals() const { return t_.size() - 1; }
    const std::vector<double>& times() const { return t_; }
    double step(std::size_t k) const { return t_[k + 1] - t_[k]; }
    Eigen::Map<const Matrix> block(std::size_t k) const;

private:
    int n_ = 0;
    int degree_ = 1;
    bool regular_ = false;
    std::vector<double> t_;
    std::vector<double> storage_;
};

struct DelayedResponse {
    Matrix states;  // n x N, z(t_k - tau)
    Vector input;   // u(t_k - tau)
};

/// State trajectory of cache.ss() driven by input(t - tau), sampled at t_k.
/// The state is zero until the first knot. Intervals that no knot splits use
/// `grid` blocks when supplied. Throws std::invalid_argument for tau < 0 or when
/// t_N - tau precedes the first input knot.
DelayedResponse simulate_delayed(const DiscretizationCache& cache, const PiecewiseInput& input,
                                 std::span<const double> t, double tau, const GridSteps* grid = nullptr);

/// Output H z + D u of the delayed simulation.
Vector filter_signal_delayed(const StateSpace& ss, const SampledDataset& data, double tau,
                             const DiscretizationCache& cache);

/// States (n x N) of a system driven by the sample sequence v continued by
/// `hold` between samples, starting from zero state at t_1. Cubic hold
/// interpolates four neighbouring samples and needs a grid of degree >= 3.
Matrix filter_sample_states(const GridSteps& grid, std::span<const double> v, Hold hold);
Vector filter_samples(const StateSpace& ss, const GridSteps& grid, std::span<const double> v, Hold hold);

/// Signals p^i / D(p) x for i = 0..n, for a monic D of degree n, computed from
/// the states of one realization (no numerical differentiation).
class DerivativeFilter {
public:
    DerivativeFilter(std::vector<double> den, std::span<const double> t);

    int order() const { return static_cast<int>(den_.size()) - 1; }
    const std::vector<double>& den() const { return den_; }

    /// (n+1) x N, row i = p^i / D applied to the sampled signal.
    Matrix of_samples(std::span<const double> v, Hold hold = Hold::Cubic) const;
    /// (n+1) x N, row i = p^i / D applied to input(t - tau), exact for piecewise-linear inputs.
    Matrix of_delayed_input(const PiecewiseInput& input, double tau) const;

private:
    Matrix rows_from_states(const Matrix& states, const Vector& input) const;

    std::vector<double> den_;
    double scale_;
    DiscretizationCache cache_;
    GridSteps grid_;
};

/// State-variable-filter derivatives: rows i = 0..n of p^i / (p + omega_svf)^n
/// applied to input(t - tau).
Matrix svf_derivatives(std::span<const double> t, const PiecewiseInput& input, int order, double omega_svf,
                       double tau);

}  // namespace ctdelay
