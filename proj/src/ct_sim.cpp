#include "ctdelay/ct_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iterator>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unsupported/Eigen/MatrixFunctions>

#include "ctdelay/polynomial.hpp"

namespace ctdelay {

namespace {

constexpr double kTinyPiece = 1e-12;
constexpr double kKeyScale = 1e11;
constexpr std::size_t kMemoCap = 256;
constexpr int kMaxTable = 4096;
constexpr double kTaylorReach = 0.05;  // delta * ||A||_inf up to which the Taylor step is kept

std::pair<Matrix, Vector> split_pair(const Matrix& aug, int n) {
    return {aug.topLeftCorner(n, n), aug.block(0, n, n, 1)};
}

// z <- B [z; c_0..c_{q-1}], B column-major n x (n + q); tmp holds n values.
void step_raw(const double* B, int n, int q, double* z, const double* c, double* tmp) {
    for (int i = 0; i < n; ++i) tmp[i] = 0.0;
    for (int j = 0; j < n; ++j) {
        const double zj = z[j];
        const double* col = B + static_cast<std::ptrdiff_t>(j) * n;
        for (int i = 0; i < n; ++i) tmp[i] += col[i] * zj;
    }
    for (int j = 0; j < q; ++j) {
        const double cj = c[j];
        if (cj == 0.0) continue;
        const double* col = B + static_cast<std::ptrdiff_t>(n + j) * n;
        for (int i = 0; i < n; ++i) tmp[i] += col[i] * cj;
    }
    for (int i = 0; i < n; ++i) z[i] = tmp[i];
}

// Derivatives at s = 0 of the cubic through (s_i, v_i), i = 0..3.
std::array<double, 4> cubic_derivatives(const std::array<double, 4>& s, const std::array<double, 4>& v) {
    // Newton divided differences
    std::array<double, 4> d = v;
    for (int j = 1; j < 4; ++j)
        for (int i = 3; i >= j; --i) d[i] = (d[i] - d[i - 1]) / (s[i] - s[i - j]);
    // Expand sum_j d_j prod_{i<j}(x - s_i) into ascending monomials.
    std::array<double, 4> c{d[3], 0.0, 0.0, 0.0};
    for (int j = 2; j >= 0; --j) {
        for (int i = 3; i >= 1; --i) c[i] = c[i - 1] - s[j] * c[i];
        c[0] = d[j] - s[j] * c[0];
    }
    return {c[0], c[1], 2.0 * c[2], 6.0 * c[3]};
}

}  // namespace

Matrix augmented_generator(const StateSpace& ss, int degree) {
    if (degree < 0) throw std::invalid_argument("augmented_generator: degree must be >= 0");
    const int n = ss.order();
    const int size = n + degree + 1;
    Matrix A = Matrix::Zero(size, size);
    A.topLeftCorner(n, n) = ss.F;
    A.block(0, n, n, 1) = ss.G;
    for (int j = 0; j < degree; ++j) A(n + j, n + j + 1) = 1.0;
    return A;
}

Matrix augmented_expm(const StateSpace& ss, double h, int degree) {
    if (!(h >= 0.0)) throw std::invalid_argument("expm: step must be >= 0");
    const Matrix A = augmented_generator(ss, degree) * h;
    return A.exp();
}

Matrix augmented_rk4(const StateSpace& ss, double delta, int degree) {
    if (!(delta >= 0.0)) throw std::invalid_argument("rk4: step must be >= 0");
    const Matrix A = augmented_generator(ss, degree);
    const Matrix I = Matrix::Identity(A.rows(), A.cols());
    // X' = A X, X(0) = I
    const Matrix k1 = A;
    const Matrix k2 = A * (I + 0.5 * delta * k1);
    const Matrix k3 = A * (I + 0.5 * delta * k2);
    const Matrix k4 = A * (I + delta * k3);
    return I + (delta / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::pair<Matrix, Vector> expm_pair(const StateSpace& ss, double h) {
    return split_pair(augmented_expm(ss, h), ss.order());
}

std::pair<Matrix, Vector> rk4_pair(const StateSpace& ss, double delta) {
    return split_pair(augmented_rk4(ss, delta), ss.order());
}

DiscretizationCache::DiscretizationCache(StateSpace ss, double delta, int m_max, int degree)
    : ss_(std::move(ss)), delta_(delta), degree_(degree) {
    if (!(delta > 0.0)) throw std::invalid_argument("DiscretizationCache: base period must be > 0");
    if (m_max < 1) throw std::invalid_argument("DiscretizationCache: m_max must be >= 1");
    if (degree < 1) throw std::invalid_argument("DiscretizationCache: degree must be >= 1");
    generator_ = augmented_generator(ss_, degree_);
    const Matrix& A = generator_;
    norm_ = A.cwiseAbs().rowwise().sum().maxCoeff();
    table_.reserve(static_cast<std::size_t>(m_max) + 1);
    const Matrix base = augmented_expm(ss_, delta_, degree_);
    table_.push_back(Matrix::Identity(base.rows(), base.cols()));
    for (int m = 1; m <= m_max; ++m) table_.push_back(base * table_.back());
    const int n = order();
    terms_.resize(table_.size());
    for (std::size_t m = 0; m < table_.size(); ++m) {
        terms_[m][0] = table_[m].topRows(n);
        for (int j = 1; j < 5; ++j) terms_[m][static_cast<std::size_t>(j)] = terms_[m][static_cast<std::size_t>(j - 1)] * A / j;
    }
}

DiscretizationCache DiscretizationCache::for_steps(StateSpace ss, double h_min, double h_max, int degree) {
    if (!(h_min > 0.0) || h_max < h_min) throw std::invalid_argument("DiscretizationCache: invalid step range");
    const double norm = augmented_generator(ss, degree).cwiseAbs().rowwise().sum().maxCoeff();
    double delta = 0.5 * h_min;
    if (norm > 0.0) delta = std::min(delta, 0.02 / norm);
    if (h_max / delta > kMaxTable) delta = h_max / kMaxTable;
    const int m_max = static_cast<int>(std::ceil(h_max / delta)) + 1;
    return DiscretizationCache(std::move(ss), delta, m_max, degree);
}

DiscretizationCache DiscretizationCache::for_grid(StateSpace ss, std::span<const double> t, int degree) {
    if (t.size() < 2) throw std::invalid_argument("DiscretizationCache: grid needs two samples");
    double h_min = std::numeric_limits<double>::infinity();
    double h_max = 0.0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        const double h = t[k + 1] - t[k];
        h_min = std::min(h_min, h);
        h_max = std::max(h_max, h);
    }
    return for_steps(std::move(ss), h_min, h_max, degree);
}

Matrix DiscretizationCache::F_table(int m) const { return split_pair(augmented(m), order()).first; }
Vector DiscretizationCache::G_table(int m) const { return split_pair(augmented(m), order()).second; }

void DiscretizationCache::step_block_into(double h, double* out) const {
    if (!(h >= 0.0)) throw std::invalid_argument("hybrid_step: step must be >= 0");
    const auto m = static_cast<long long>(std::floor(h / delta_));
    if (m > m_max())
        throw std::out_of_range("hybrid_step: step " + std::to_string(h) +
                                " exceeds table coverage; rebuild the cache with a larger m_max");
    const double d = std::max(0.0, h - static_cast<double>(m) * delta_);
    const auto& terms = terms_[static_cast<std::size_t>(m)];
    if (d * norm_ > kTaylorReach) {
        const Matrix e = (generator_ * d).exp();
        Eigen::Map<Matrix>(out, terms[0].rows(), terms[0].cols()).noalias() = terms[0] * e;
        return;
    }
    const Eigen::Index size = terms[0].size();
    const double* t0 = terms[0].data();
    const double* t1 = terms[1].data();
    const double* t2 = terms[2].data();
    const double* t3 = terms[3].data();
    const double* t4 = terms[4].data();
    for (Eigen::Index i = 0; i < size; ++i) out[i] = t0[i] + d * (t1[i] + d * (t2[i] + d * (t3[i] + d * t4[i])));
}

Matrix DiscretizationCache::step_block(double h) const {
    Matrix b(order(), order() + degree_ + 1);
    step_block_into(h, b.data());
    return b;
}

std::pair<Matrix, Vector> DiscretizationCache::hybrid_step(double h) const {
    const Matrix b = step_block(h);
    return {b.leftCols(order()), b.col(order())};
}

PiecewiseInput::PiecewiseInput(std::vector<double> knots, std::vector<double> values, std::vector<double> slopes)
    : knots_(std::move(knots)), values_(std::move(values)), slopes_(std::move(slopes)) {
    if (knots_.empty() || values_.size() != knots_.size() || slopes_.size() != knots_.size())
        throw std::invalid_argument("PiecewiseInput: knots, values and slopes must be non-empty and equal length");
    for (std::size_t j = 0; j + 1 < knots_.size(); ++j)
        if (!(knots_[j + 1] > knots_[j])) throw std::invalid_argument("PiecewiseInput: knots must increase");
}

PiecewiseInput PiecewiseInput::zoh(std::span<const double> t, std::span<const double> v) {
    return PiecewiseInput({t.begin(), t.end()}, {v.begin(), v.end()}, std::vector<double>(t.size(), 0.0));
}

PiecewiseInput PiecewiseInput::from_dataset(const SampledDataset& data) {
    const std::size_t n = data.size();
    if (data.intersample == Intersample::Foh) {
        std::vector<double> slopes(n, 0.0);
        for (std::size_t k = 0; k + 1 < n; ++k) slopes[k] = (data.u[k + 1] - data.u[k]) / (data.t[k + 1] - data.t[k]);
        return PiecewiseInput(data.t, data.u, std::move(slopes));
    }
    if (!data.u_clock_edges) return zoh(data.t, data.u);

    // Level on [e_j, e_{j+1}) is the first sample inside it; edges that hold
    // no sample keep the previous level. Edges without a level change are dropped.
    const auto& edges = *data.u_clock_edges;
    std::vector<double> knots;
    std::vector<double> values;
    std::size_t k = 0;
    double level = data.u.front();
    for (std::size_t j = 0; j < edges.size(); ++j) {
        if (edges[j] > data.t.back()) break;
        const double next = j + 1 < edges.size() ? edges[j + 1] : std::numeric_limits<double>::infinity();
        while (k < n && data.t[k] < edges[j]) ++k;
        if (k < n && data.t[k] < next) level = data.u[k];
        if (!values.empty() && values.back() == level) continue;
        knots.push_back(edges[j]);
        values.push_back(level);
    }
    std::vector<double> slopes(knots.size(), 0.0);
    return PiecewiseInput(std::move(knots), std::move(values), std::move(slopes));
}

double PiecewiseInput::value_at(double t) const {
    if (t < knots_.front()) return 0.0;
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    const auto j = static_cast<std::size_t>(std::distance(knots_.begin(), it)) - 1;
    return values_[j] + slopes_[j] * (t - knots_[j]);
}

PiecewiseInput PiecewiseInput::scaled(double a) const {
    auto v = values_;
    auto s = slopes_;
    for (auto& x : v) x *= a;
    for (auto& x : s) x *= a;
    return PiecewiseInput(knots_, std::move(v), std::move(s));
}

PiecewiseInput PiecewiseInput::plus(const PiecewiseInput& other, double a) const {
    std::vector<double> knots;
    std::set_union(knots_.begin(), knots_.end(), other.knots_.begin(), other.knots_.end(), std::back_inserter(knots));
    auto slope_at = [](const PiecewiseInput& p, double t) {
        if (t < p.knots_.front()) return 0.0;
        const auto it = std::upper_bound(p.knots_.begin(), p.knots_.end(), t);
        return p.slopes_[static_cast<std::size_t>(std::distance(p.knots_.begin(), it)) - 1];
    };
    std::vector<double> values(knots.size());
    std::vector<double> slopes(knots.size());
    for (std::size_t j = 0; j < knots.size(); ++j) {
        values[j] = value_at(knots[j]) + a * other.value_at(knots[j]);
        slopes[j] = slope_at(*this, knots[j]) + a * slope_at(other, knots[j]);
    }
    return PiecewiseInput(std::move(knots), std::move(values), std::move(slopes));
}

GridSteps::GridSteps(const DiscretizationCache& cache, std::span<const double> t)
    : n_(cache.order()), degree_(cache.degree()), t_(t.begin(), t.end()) {
    if (t_.size() < 2) throw std::invalid_argument("GridSteps: grid needs two samples");
    const std::size_t K = t_.size() - 1;
    const double h0 = t_[1] - t_[0];
    regular_ = true;
    for (std::size_t k = 0; k < K && regular_; ++k)
        if (std::abs((t_[k + 1] - t_[k]) - h0) > 1e-9 * h0) regular_ = false;
    const auto block_size = static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_ + degree_ + 1);
    if (regular_) {
        storage_.resize(block_size);
        cache.step_block_into((t_.back() - t_.front()) / static_cast<double>(K), storage_.data());
        return;
    }
    storage_.resize(block_size * K);
    for (std::size_t k = 0; k < K; ++k) cache.step_block_into(t_[k + 1] - t_[k], storage_.data() + k * block_size);
}

Eigen::Map<const Matrix> GridSteps::block(std::size_t k) const {
    const auto block_size = static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_ + degree_ + 1);
    const std::size_t offset = regular_ ? 0 : k * block_size;
    return Eigen::Map<const Matrix>(storage_.data() + offset, n_, n_ + degree_ + 1);
}

DelayedResponse simulate_delayed(const DiscretizationCache& cache, const PiecewiseInput& input,
                                 std::span<const double> t, double tau, const GridSteps* grid) {
    if (!(tau >= 0.0)) throw std::invalid_argument("simulate_delayed: delay must be >= 0");
    const std::size_t N = t.size();
    if (N == 0) return {};
    const auto& knots = input.knots();
    const auto& values = input.values();
    const auto& slopes = input.slopes();
    if (t.back() - tau < knots.front())
        throw std::invalid_argument("simulate_delayed: delay places the whole record before the input starts");

    const int n = cache.order();
    const int width = n + cache.degree() + 1;
    const auto block_size = static_cast<std::size_t>(n) * static_cast<std::size_t>(width);
    DelayedResponse out{Matrix::Zero(n, static_cast<Eigen::Index>(N)), Vector::Zero(static_cast<Eigen::Index>(N))};
    std::vector<double> z(static_cast<std::size_t>(n), 0.0);
    std::vector<double> tmp(static_cast<std::size_t>(n));
    std::vector<double> scratch(block_size);

    std::unordered_map<std::int64_t, std::vector<double>> memo;
    auto piece_block = [&](double len) -> const double* {
        const auto key = static_cast<std::int64_t>(std::llround(len * kKeyScale));
        if (auto it = memo.find(key); it != memo.end()) return it->second.data();
        cache.step_block_into(static_cast<double>(key) / kKeyScale, scratch.data());
        if (memo.size() < kMemoCap) return memo.emplace(key, scratch).first->second.data();
        return scratch.data();
    };
    auto apply = [&](const double* block, double v, double slope) {
        const double c[2] = {v, slope};
        step_raw(block, n, 2, z.data(), c, tmp.data());
    };

    const std::size_t K = knots.size();
    std::size_t j = 0;
    auto integrate = [&](double from, double to) {
        while (j + 1 < K && knots[j + 1] <= from) ++j;
        double cur = from;
        while (cur < to) {
            const double end = j + 1 < K ? std::min(to, knots[j + 1]) : to;
            const double len = end - cur;
            if (len > kTinyPiece) apply(piece_block(len), values[j] + slopes[j] * (cur - knots[j]), slopes[j]);
            cur = end;
            if (j + 1 < K && cur >= knots[j + 1]) ++j;
        }
    };

    for (std::size_t k = 0; k < N; ++k) {
        const double to = t[k] - tau;
        if (to > knots.front()) {
            const double from = k == 0 ? knots.front() : t[k - 1] - tau;
            if (from < knots.front()) {
                integrate(knots.front(), to);
            } else {
                while (j + 1 < K && knots[j + 1] <= from) ++j;
                if (grid && k > 0 && (j + 1 == K || to <= knots[j + 1]))
                    apply(grid->block(k - 1).data(), values[j] + slopes[j] * (from - knots[j]), slopes[j]);
                else
                    integrate(from, to);
            }
        }
        std::copy(z.begin(), z.end(), out.states.col(static_cast<Eigen::Index>(k)).data());
        out.input(static_cast<Eigen::Index>(k)) = input.value_at(to);
    }
    return out;
}

Vector filter_signal_delayed(const StateSpace& ss, const SampledDataset& data, double tau,
                             const DiscretizationCache& cache) {
    const auto input = PiecewiseInput::from_dataset(data);
    const auto r = simulate_delayed(cache, input, data.t, tau);
    Vector y = r.states.transpose() * ss.H.transpose();
    y += ss.D * r.input;
    return y;
}

Matrix filter_sample_states(const GridSteps& grid, std::span<const double> v, Hold hold) {
    const std::size_t N = v.size();
    if (N != grid.intervals() + 1) throw std::invalid_argument("filter_sample_states: signal length does not match grid");
    if (hold == Hold::Cubic && N < 4) hold = Hold::Linear;
    if (hold == Hold::Cubic && grid.degree() < 3)
        throw std::invalid_argument("filter_sample_states: cubic hold needs a grid of degree >= 3");
    const int n = grid.order();
    const auto& t = grid.times();
    Matrix states = Matrix::Zero(n, static_cast<Eigen::Index>(N));
    std::vector<double> z(static_cast<std::size_t>(n), 0.0);
    std::vector<double> tmp(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k + 1 < N; ++k) {
        const double* b = grid.block(k).data();
        switch (hold) {
            case Hold::Zero: {
                const double c[1] = {v[k]};
                step_raw(b, n, 1, z.data(), c, tmp.data());
                break;
            }
            case Hold::Linear: {
                const double c[2] = {v[k], (v[k + 1] - v[k]) / grid.step(k)};
                step_raw(b, n, 2, z.data(), c, tmp.data());
                break;
            }
            case Hold::Cubic: {
                const std::size_t i0 = std::min(k > 0 ? k - 1 : 0, N - 4);
                std::array<double, 4> s{};
                std::array<double, 4> w{};
                for (std::size_t i = 0; i < 4; ++i) {
                    s[i] = t[i0 + i] - t[k];
                    w[i] = v[i0 + i];
                }
                const auto d = cubic_derivatives(s, w);
                step_raw(b, n, 4, z.data(), d.data(), tmp.data());
                break;
            }
        }
        std::copy(z.begin(), z.end(), states.col(static_cast<Eigen::Index>(k + 1)).data());
    }
    return states;
}

Vector filter_samples(const StateSpace& ss, const GridSteps& grid, std::span<const double> v, Hold hold) {
    const Matrix states = filter_sample_states(grid, v, hold);
    Vector y = states.transpose() * ss.H.transpose();
    for (std::size_t k = 0; k < v.size(); ++k) y(static_cast<Eigen::Index>(k)) += ss.D * v[k];
    return y;
}

namespace {

double realization_scale(std::span<const double> den) {
    const int n = static_cast<int>(den.size()) - 1;
    double r = std::pow(std::abs(den[static_cast<std::size_t>(n)]), 1.0 / n);
    if (!(r > 0.0) || !std::isfinite(r)) r = 1.0;
    return r;
}

std::vector<double> checked_den(std::vector<double> den) {
    if (den.size() < 2 || den.front() != 1.0)
        throw std::invalid_argument("DerivativeFilter: denominator must be monic of degree >= 1");
    return den;
}

}  // namespace

DerivativeFilter::DerivativeFilter(std::vector<double> den, std::span<const double> t)
    : den_(checked_den(std::move(den))),
      scale_(realization_scale(den_)),
      cache_(DiscretizationCache::for_grid(proper_ss(std::vector<double>{1.0}, den_), t, 3)),
      grid_(cache_, t) {}

Matrix DerivativeFilter::rows_from_states(const Matrix& states, const Vector& input) const {
    const int n = order();
    Matrix rows(n + 1, states.cols());
    double power = 1.0;
    for (int i = 0; i < n; ++i) {
        rows.row(i) = power * states.row(i);
        power *= scale_;
    }
    // p^n x = v - sum_{i<n} a_{n-i} p^i x
    rows.row(n) = input.transpose();
    for (int i = 0; i < n; ++i) rows.row(n) -= den_[static_cast<std::size_t>(n - i)] * rows.row(i);
    return rows;
}

Matrix DerivativeFilter::of_samples(std::span<const double> v, Hold hold) const {
    const Matrix states = filter_sample_states(grid_, v, hold);
    return rows_from_states(states, Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
}

Matrix DerivativeFilter::of_delayed_input(const PiecewiseInput& input, double tau) const {
    const auto r = simulate_delayed(cache_, input, grid_.times(), tau, &grid_);
    return rows_from_states(r.states, r.input);
}

Matrix svf_derivatives(std::span<const double> t, const PiecewiseInput& input, int order, double omega_svf,
                       double tau) {
    if (order < 1) throw std::invalid_argument("svf_derivatives: order must be >= 1");
    if (!(omega_svf > 0.0)) throw std::invalid_argument("svf_derivatives: omega_svf must be > 0");
    const DerivativeFilter f(poly_binomial(omega_svf, order), t);
    return f.of_delayed_input(input, tau);
}

}  // namespace ctdelay
