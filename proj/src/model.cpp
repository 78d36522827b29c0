#include "ctdelay/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ctdelay/polynomial.hpp"

namespace ctdelay {

namespace {

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

CtModel::CtModel(std::vector<double> num, std::vector<double> den, double delay)
    : delay_(delay) {
    if (!all_finite(num) || !all_finite(den) || !std::isfinite(delay))
        throw std::invalid_argument("CtModel: non-finite coefficient or delay");
    if (delay < 0.0) throw std::invalid_argument("CtModel: delay must be >= 0");
    den_ = poly_trim(den);
    num_ = poly_trim(num);
    if (den_.empty() || den_[0] == 0.0) throw std::invalid_argument("CtModel: zero denominator");
    if (num_.empty()) num_ = {0.0};
    if (den_.size() < 2) throw std::invalid_argument("CtModel: denominator degree must be >= 1");
    if (num_.size() >= den_.size())
        throw std::invalid_argument("CtModel: model must be strictly proper (deg num < deg den)");
    const double lead = den_[0];
    for (double& c : den_) c /= lead;
    for (double& c : num_) c /= lead;
    den_[0] = 1.0;
}

std::complex<double> CtModel::frequency_response(double omega) const {
    const Complex s{0.0, omega};
    return poly_eval(num_, s) / poly_eval(den_, s);
}

double CtModel::dc_gain() const { return num_.back() / den_.back(); }

bool CtModel::is_stable() const {
    for (const auto& r : poly_roots(den_))
        if (r.real() >= 0.0) return false;
    return true;
}

void validate_true_system(const CtModel& model) {
    if (!model.is_stable()) throw std::invalid_argument("true system is not asymptotically stable");
    if (model.num_order() == 0) return;
    const auto zeros = poly_roots(model.num());
    const auto poles = poly_roots(model.den());
    for (const auto& z : zeros)
        for (const auto& p : poles)
            if (std::abs(z - p) < 1e-9)
                throw std::invalid_argument("true system numerator and denominator share a root");
}

std::complex<double> StateSpace::frequency_response(double omega) const {
    const int n = order();
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(n, n) * Complex{0.0, omega} - F.cast<Complex>();
    Eigen::VectorXcd x = A.partialPivLu().solve(G.cast<Complex>());
    return (H.cast<Complex>() * x)(0) + D;
}

StateSpace tf_to_ss(const CtModel& model) {
    const int n = model.order();
    const auto& a = model.den();
    const auto& b = model.num();
    StateSpace ss;
    ss.F = Matrix::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) ss.F(i, i + 1) = 1.0;
    for (int j = 0; j < n; ++j) ss.F(n - 1, j) = -a[n - j];
    ss.G = Vector::Zero(n);
    ss.G(n - 1) = 1.0;
    ss.H = RowVector::Zero(n);
    const int m = model.num_order();
    for (int j = 0; j <= m; ++j) ss.H(j) = b[m - j];
    return ss;
}

StateSpace proper_ss(std::span<const double> num_in, std::span<const double> den) {
    const int n = static_cast<int>(den.size()) - 1;
    if (n < 1 || den[0] != 1.0) throw std::invalid_argument("proper_ss: denominator must be monic with degree >= 1");
    auto num = poly_trim(num_in);
    if (static_cast<int>(num.size()) - 1 > n) throw std::invalid_argument("proper_ss: improper transfer function");
    double d = 0.0;
    std::vector<double> rem(n, 0.0);  // strictly proper remainder, descending, degree n-1
    if (static_cast<int>(num.size()) == n + 1) {
        d = num[0];
        for (int i = 1; i <= n; ++i) rem[i - 1] = num[i] - d * den[i];
    } else {
        std::copy(num.begin(), num.end(), rem.end() - static_cast<std::ptrdiff_t>(num.size()));
    }

    double r = std::pow(std::abs(den[n]), 1.0 / n);
    if (!(r > 0.0) || !std::isfinite(r)) r = 1.0;
    StateSpace ss;
    ss.F = Matrix::Zero(n, n);
    ss.G = Vector::Zero(n);
    ss.H = RowVector::Zero(n);
    // z~_i = p^(i-1) w / r^(i-1)
    for (int i = 0; i + 1 < n; ++i) ss.F(i, i + 1) = r;
    for (int j = 0; j < n; ++j) ss.F(n - 1, j) = -den[n - j] * std::pow(r, j - (n - 1));
    ss.G(n - 1) = std::pow(r, -(n - 1));
    for (int j = 0; j < n; ++j) ss.H(j) = rem[n - 1 - j] * std::pow(r, j);
    ss.D = d;
    return ss;
}

StateSpace scaled_ss(const CtModel& model) { return proper_ss(model.num(), model.den()); }

std::pair<std::vector<double>, std::vector<double>> ss_to_tf(const StateSpace& ss) {
    // Faddeev-LeVerrier: adj(sI - F) = sum_k M_k s^(n-k), det = sum c_k s^(n-k)
    const int n = ss.order();
    std::vector<double> den(n + 1, 0.0);
    std::vector<double> num(n + 1, 0.0);
    den[0] = 1.0;
    Matrix M = Matrix::Zero(n, n);
    Matrix I = Matrix::Identity(n, n);
    for (int k = 1; k <= n; ++k) {
        M = ss.F * M + den[k - 1] * I;
        num[k] = (ss.H * M * ss.G)(0);
        den[k] = -(ss.F * M).trace() / k;
    }
    for (int k = 0; k <= n; ++k) num[k] += ss.D * den[k];
    return {num, den};
}

std::vector<double> reflect_unstable(std::span<const double> den) {
    if (den.size() < 2 || den[0] != 1.0) throw std::invalid_argument("reflect_unstable: expected monic polynomial of degree >= 1");
    std::vector<Complex> roots;
    try {
        roots = poly_roots(den);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("reflect_unstable: root finding failed: ") + e.what());
    }
    bool changed = false;
    for (auto& r : roots) {
        if (!std::isfinite(r.real()) || !std::isfinite(r.imag()))
            throw std::runtime_error("reflect_unstable: non-finite root");
        if (r.real() > 1e-9) {
            r = Complex{-r.real(), r.imag()};
            changed = true;
        }
    }
    if (!changed) return {den.begin(), den.end()};
    return poly_from_roots(roots);
}

double bandwidth(const CtModel& model) {
    const double g0 = std::abs(model.dc_gain());
    if (!(g0 > 0.0) || !std::isfinite(g0)) throw std::runtime_error("bandwidth: zero or undefined DC gain");
    const double level = g0 / std::sqrt(2.0);
    auto mag = [&](double w) { return std::abs(model.frequency_response(w)); };

    constexpr int per_decade = 200;
    double lo = 0.0;
    double hi = -1.0;
    double prev = 0.0;
    for (int i = 0; i <= 10 * per_decade; ++i) {
        const double w = std::pow(10.0, -4.0 + static_cast<double>(i) / per_decade);
        if (mag(w) <= level) {
            lo = prev;
            hi = w;
            break;
        }
        prev = w;
    }
    if (hi < 0.0) throw std::runtime_error("bandwidth: response never falls to -3 dB in [1e-4, 1e6] rad/s");
    while (hi - lo > 1e-8) {
        const double mid = 0.5 * (lo + hi);
        if (mag(mid) <= level)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

void SampledDataset::validate() const {
    const std::size_t n = t.size();
    if (u.size() != n || y.size() != n) throw std::invalid_argument("dataset: t, u, y lengths differ");
    if (n < 2) throw std::invalid_argument("dataset: at least two samples required");
    for (std::size_t k = 0; k < n; ++k)
        if (!std::isfinite(t[k]) || !std::isfinite(u[k]) || !std::isfinite(y[k]))
            throw std::invalid_argument("dataset: non-finite value at row " + std::to_string(k + 1));
    for (std::size_t k = 0; k + 1 < n; ++k)
        if (!(t[k + 1] > t[k]))
            throw std::invalid_argument("dataset: timestamps not strictly increasing at row " + std::to_string(k + 2));
    if (u_clock_edges) {
        const auto& e = *u_clock_edges;
        if (e.empty()) throw std::invalid_argument("dataset: empty clock edge list");
        for (std::size_t j = 0; j + 1 < e.size(); ++j)
            if (!(e[j + 1] > e[j])) throw std::invalid_argument("dataset: clock edges not strictly increasing");
        if (e.front() > t.front()) throw std::invalid_argument("dataset: clock edges do not cover the first sample");
    }
}

ParamVector::ParamVector(int n, int m, Vector theta) : n_(n), m_(m), theta_(std::move(theta)) {
    if (n < 1 || m < 0 || m >= n) throw std::invalid_argument("ParamVector: orders must satisfy 0 <= m < n");
    if (theta_.size() != n + m + 1) throw std::invalid_argument("ParamVector: length does not match orders");
}

ParamVector ParamVector::from_model(const CtModel& model) {
    const int n = model.order();
    const int m = model.num_order();
    Vector theta(n + m + 1);
    for (int i = 0; i < n; ++i) theta(i) = model.den()[i + 1];
    for (int i = 0; i <= m; ++i) theta(n + i) = model.num()[i];
    return ParamVector(n, m, std::move(theta));
}

std::vector<double> ParamVector::denominator() const {
    std::vector<double> a(n_ + 1);
    a[0] = 1.0;
    for (int i = 0; i < n_; ++i) a[i + 1] = theta_(i);
    return a;
}

std::vector<double> ParamVector::numerator() const {
    std::vector<double> b(m_ + 1);
    for (int i = 0; i <= m_; ++i) b[i] = theta_(n_ + i);
    return b;
}

CtModel ParamVector::to_model(double delay) const { return CtModel(numerator(), denominator(), delay); }

double ParamVector::relative_change(const ParamVector& other, double floor) const {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < theta_.size(); ++i) {
        const double scale = std::max(std::abs(other.theta_(i)), floor);
        worst = std::max(worst, std::abs(theta_(i) - other.theta_(i)) / scale);
    }
    return worst;
}

std::string describe(const CtModel& model) {
    std::ostringstream os;
    os.precision(10);
    auto list = [&](const std::vector<double>& v) {
        os << '[';
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
        os << ']';
    };
    os << "num=";
    list(model.num());
    os << " den=";
    list(model.den());
    os << " delay=" << model.delay();
    return os.str();
}

}  // namespace ctdelay
