#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctdelay {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// Rational transfer function B(p)/A(p) with a dead time.
///
/// The denominator is stored monic; any other leading coefficient is divided
/// out on construction. The model must be strictly proper (deg B < deg A).
class CtModel {
public:
    /// Throws std::invalid_argument if the model is not strictly proper, has
    /// a zero denominator, non-finite coefficients, or a negative delay.
    CtModel(std::vector<double> num, std::vector<double> den, double delay = 0.0);

    const std::vector<double>& num() const { return num_; }
    const std::vector<double>& den() const { return den_; }
    double delay() const { return delay_; }

    int order() const { return static_cast<int>(den_.size()) - 1; }
    int num_order() const { return static_cast<int>(num_.size()) - 1; }

    /// Frequency response of the rational part at s = j*omega.
    std::complex<double> frequency_response(double omega) const;
    double dc_gain() const;
    bool is_stable() const;

    CtModel with_delay(double delay) const { return CtModel(num_, den_, delay); }

private:
    std::vector<double> num_;
    std::vector<double> den_;
    double delay_;
};

/// Checks Assumptions on the true system: asymptotic stability and coprime
/// numerator/denominator (no common root within 1e-9). Throws
/// std::invalid_argument describing the violation.
void validate_true_system(const CtModel& model);

struct StateSpace {
    Matrix F;
    Vector G;
    RowVector H;
    double D = 0.0;

    int order() const { return static_cast<int>(F.rows()); }
    std::complex<double> frequency_response(double omega) const;
};

/// Controllable canonical form: states are w, w', ..., w^(n-1) with w = u/A(p).
StateSpace tf_to_ss(const CtModel& model);

/// Controllable canonical form with the states rescaled by powers of
/// r = |a_n|^(1/n), which keeps the entries of F comparable to the pole
/// magnitudes. Same transfer function as tf_to_ss.
StateSpace scaled_ss(const CtModel& model);

/// Proper (not necessarily strictly proper) realization of num/den, den monic.
/// Used for p*G(p), whose numerator may reach the denominator degree.
StateSpace proper_ss(std::span<const double> num, std::span<const double> den);

/// Transfer function coefficients of a single-output state space, via the
/// characteristic polynomial and H adj(sI-F) G. Used to check realizations.
std::pair<std::vector<double>, std::vector<double>> ss_to_tf(const StateSpace& ss);

/// Mirrors every root with positive real part into the left half plane.
/// Throws std::runtime_error if root finding fails.
std::vector<double> reflect_unstable(std::span<const double> den);

/// Smallest omega at which |G(j omega)| falls to |G(0)|/sqrt(2), in rad/s.
/// Throws std::runtime_error if the level is never reached in [1e-4, 1e6].
double bandwidth(const CtModel& model);

enum class Intersample { Zoh, Foh };

struct SampledDataset {
    std::vector<double> t;
    std::vector<double> u;
    std::vector<double> y;
    Intersample intersample = Intersample::Zoh;
    std::optional<std::vector<double>> u_clock_edges;

    std::size_t size() const { return t.size(); }
    /// Throws std::invalid_argument on length mismatch, N < 2, non-increasing
    /// timestamps, or clock edges that are unsorted or do not cover [t1, tN].
    void validate() const;
};

/// theta = [a1..an, b0..bm]
class ParamVector {
public:
    ParamVector(int n, int m, Vector theta);
    static ParamVector from_model(const CtModel& model);

    int n() const { return n_; }
    int m() const { return m_; }
    const Vector& theta() const { return theta_; }

    std::vector<double> denominator() const;  // monic [1, a1..an]
    std::vector<double> numerator() const;    // [b0..bm]
    CtModel to_model(double delay) const;

    /// max_i |theta_i - other_i| / max(|other_i|, floor)
    double relative_change(const ParamVector& other, double floor = 1e-12) const;

private:
    int n_;
    int m_;
    Vector theta_;
};

struct TraceEntry {
    int outer = 0;
    int filter = 0;  // 1-based bank index; 0 for the unfiltered refinement
    double tau = 0.0;
    double j0 = 0.0;
    bool selected = false;
};

struct EstimationResult {
    CtModel model;
    double j0 = 0.0;
    std::vector<TraceEntry> trace;
    bool converged = false;
    int iterations = 0;
};

std::string describe(const CtModel& model);

}  // namespace ctdelay
