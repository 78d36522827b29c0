#include "ctdelay/excitation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "ctdelay/ct_sim.hpp"

namespace ctdelay {

namespace {

// Maximum-length feedback taps, Xilinx XAPP052 table.
const std::vector<std::vector<int>>& tap_table() {
    static const std::vector<std::vector<int>> table = {
        {2, 1},          {3, 2},           {4, 3},          {5, 3},         {6, 5},          {7, 6},
        {8, 6, 5, 4},    {9, 5},           {10, 7},         {11, 9},        {12, 6, 4, 1},   {13, 4, 3, 1},
        {14, 5, 3, 1},   {15, 14},         {16, 15, 13, 4}, {17, 14},       {18, 11},        {19, 6, 2, 1},
        {20, 17},        {21, 19},         {22, 21},        {23, 18},       {24, 23, 22, 17}, {25, 22},
        {26, 6, 2, 1},   {27, 5, 2, 1},    {28, 25},        {29, 27},       {30, 6, 4, 1},   {31, 28},
        {32, 22, 2, 1},
    };
    return table;
}

double mean_removed_power(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double p = 0.0;
    for (double x : v) p += (x - mean) * (x - mean);
    return p / static_cast<double>(v.size());
}

}  // namespace

void ExcitationSpec::validate() const {
    if (stages < 2 || stages > 32) throw std::invalid_argument("excitation: stages must be in [2, 32]");
    if (!(clock_period > 0.0) || !std::isfinite(clock_period))
        throw std::invalid_argument("excitation: clock_period must be > 0");
    if (!std::isfinite(amplitude)) throw std::invalid_argument("excitation: amplitude must be finite");
}

void SamplingSpec::validate() const {
    if (n_samples < 2) throw std::invalid_argument("sampling: n_samples must be >= 2");
    if (kind == Kind::Regular) {
        if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("sampling: h must be > 0");
    } else if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi)) {
        throw std::invalid_argument("sampling: need 0 < lo < hi");
    }
}

std::vector<int> prbs_taps(int stages) {
    if (stages < 2 || stages > 32)
        throw std::invalid_argument("prbs: no maximum-length tap set for " + std::to_string(stages) + " stages");
    return tap_table()[static_cast<std::size_t>(stages - 2)];
}

std::vector<int> prbs_sequence(int stages) {
    const auto taps = prbs_taps(stages);
    const std::uint64_t period = (std::uint64_t{1} << stages) - 1;
    std::uint64_t reg = (std::uint64_t{1} << stages) - 1;
    std::vector<int> out;
    out.reserve(period);
    for (std::uint64_t k = 0; k < period; ++k) {
        const int bit = static_cast<int>((reg >> (stages - 1)) & 1u);
        out.push_back(bit ? 1 : -1);
        std::uint64_t fb = 0;
        for (int tap : taps) fb ^= (reg >> (tap - 1)) & 1u;
        reg = ((reg << 1) | fb) & period;
    }
    return out;
}

double PrbsSignal::value_at(double t) const {
    if (edges.empty() || t < edges.front()) return 0.0;
    const auto it = std::upper_bound(edges.begin(), edges.end(), t);
    return levels[static_cast<std::size_t>(std::distance(edges.begin(), it)) - 1];
}

PrbsSignal prbs(const ExcitationSpec& spec, double duration) {
    spec.validate();
    if (!(duration >= 0.0)) throw std::invalid_argument("prbs: duration must be >= 0");
    const auto seq = prbs_sequence(spec.stages);
    const auto ticks = static_cast<std::size_t>(std::floor(duration / spec.clock_period)) + 1;
    PrbsSignal s;
    s.edges.reserve(ticks);
    s.levels.reserve(ticks);
    for (std::size_t j = 0; j < ticks; ++j) {
        s.edges.push_back(static_cast<double>(j) * spec.clock_period);
        s.levels.push_back(spec.amplitude * seq[j % seq.size()]);
    }
    return s;
}

std::vector<double> sample_schedule(const SamplingSpec& spec) {
    spec.validate();
    std::vector<double> t(spec.n_samples);
    if (spec.kind == SamplingSpec::Kind::Regular) {
        for (std::size_t k = 0; k < t.size(); ++k) t[k] = static_cast<double>(k) * spec.h;
        return t;
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> step(spec.lo, spec.hi);
    t[0] = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k) t[k] = t[k - 1] + step(rng);
    return t;
}

double snr_db_of(const std::vector<double>& x, const std::vector<double>& e) {
    const double pe = mean_removed_power(e);
    if (pe == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(mean_removed_power(x) / pe);
}

GeneratedData make_dataset(const CtModel& model, const ExcitationSpec& exc, const SamplingSpec& samp,
                           std::optional<double> snr_db, std::uint64_t noise_seed) {
    exc.validate();
    const auto t = sample_schedule(samp);
    const auto sig = prbs(exc, t.back());

    GeneratedData g;
    g.data.t = t;
    g.data.intersample = Intersample::Zoh;
    g.data.u.resize(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) g.data.u[k] = sig.value_at(t[k]);
    g.data.u_clock_edges = sig.edges;

    const StateSpace ss = scaled_ss(model);
    const auto cache = DiscretizationCache::for_grid(ss, t);
    const PiecewiseInput input(sig.edges, sig.levels, std::vector<double>(sig.edges.size(), 0.0));
    const GridSteps grid(cache, t);
    const auto r = simulate_delayed(cache, input, t, model.delay(), &grid);
    const Vector x = r.states.transpose() * ss.H.transpose();
    g.x.assign(x.data(), x.data() + x.size());

    std::vector<double> e(t.size(), 0.0);
    if (snr_db && std::isfinite(*snr_db)) {
        g.noise_variance = mean_removed_power(g.x) / std::pow(10.0, *snr_db / 10.0);
        std::mt19937_64 rng(noise_seed);
        std::normal_distribution<double> noise(0.0, std::sqrt(g.noise_variance));
        for (auto& v : e) v = noise(rng);
    }
    g.data.y.resize(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) g.data.y[k] = g.x[k] + e[k];
    g.empirical_snr_db = snr_db_of(g.x, e);
    g.data.validate();
    return g;
}

}  // namespace ctdelay
