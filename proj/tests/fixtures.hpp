#pragma once

#include <optional>

#include "ctdelay/excitation.hpp"
#include "ctdelay/filter_design.hpp"
#include "ctdelay/redundancy.hpp"

namespace fixture {

using namespace ctdelay;

inline CtModel case1() { return CtModel({2.0}, {0.25, 0.7, 1.0}, 8.0); }
inline CtModel case2() { return CtModel({-6400.0, 1600.0}, {1.0, 5.0, 408.0, 416.0, 1600.0}, 8.0); }

inline GeneratedData regular(const CtModel& sys, double h, std::size_t n, std::optional<double> snr,
                             std::uint64_t seed = 1) {
    ExcitationSpec e;
    e.clock_period = h;
    SamplingSpec s;
    s.h = h;
    s.n_samples = n;
    return make_dataset(sys, e, s, snr, seed);
}

inline GeneratedData irregular(const CtModel& sys, double lo, double hi, std::size_t n, double clock,
                               std::optional<double> snr, std::uint64_t seed = 1) {
    ExcitationSpec e;
    e.clock_period = clock;
    SamplingSpec s;
    s.kind = SamplingSpec::Kind::IrregularUniform;
    s.lo = lo;
    s.hi = hi;
    s.n_samples = n;
    s.seed = seed + 1000;
    return make_dataset(sys, e, s, snr, seed);
}

inline GeneratedData case1_regular(std::optional<double> snr, std::uint64_t seed = 1) {
    return regular(case1(), 0.05, 4000, snr, seed);
}
inline GeneratedData case1_irregular(std::optional<double> snr, std::uint64_t seed = 1) {
    return irregular(case1(), 0.01, 0.09, 4000, 0.5, snr, seed);
}

inline RedundancyConfig case1_config() {
    RedundancyConfig c;
    c.bank = design_bank(bandwidth(case1()), 10.0, 10);
    c.n = 2;
    c.m = 0;
    c.omega_svf = 1.0;
    return c;
}

inline RedundancyConfig case2_config() {
    RedundancyConfig c;
    c.bank = design_bank(bandwidth(case2()), 10.0, 15);
    c.n = 4;
    c.m = 1;
    c.omega_svf = 25.0;
    return c;
}

inline double max_rel_error(const ParamVector& est, const CtModel& truth) {
    const auto t = ParamVector::from_model(truth).theta();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < t.size(); ++i)
        worst = std::max(worst, std::abs(est.theta()(i) - t(i)) / std::abs(t(i)));
    return worst;
}

}  // namespace fixture
