#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ctdelay/model.hpp"

namespace ctdelay {

struct ExcitationSpec {
    int stages = 10;
    double clock_period = 1.0;  // s
    double amplitude = 1.0;

    void validate() const;
};

struct SamplingSpec {
    enum class Kind { Regular, IrregularUniform };
    Kind kind = Kind::Regular;
    double h = 0.05;   // Regular
    double lo = 0.01;  // IrregularUniform
    double hi = 0.09;
    std::size_t n_samples = 4000;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Feedback taps (1-based register positions) of a maximum-length LFSR.
/// Throws std::invalid_argument outside 2..32 stages.
std::vector<int> prbs_taps(int stages);

/// One period (2^stages - 1 ticks) of the +-1 maximum-length sequence.
std::vector<int> prbs_sequence(int stages);

/// Piecewise-constant signal: level[j] holds on [edge[j], edge[j+1]).
struct PrbsSignal {
    std::vector<double> edges;
    std::vector<double> levels;

    double value_at(double t) const;
};

/// PRBS levels +-amplitude with edges at multiples of clock_period covering [0, duration].
PrbsSignal prbs(const ExcitationSpec& spec, double duration);

std::vector<double> sample_schedule(const SamplingSpec& spec);

struct GeneratedData {
    SampledDataset data;
    std::vector<double> x;  // noise-free output at t_k
    double noise_variance = 0.0;
    double empirical_snr_db = 0.0;  // +inf without noise
};

/// Simulates the model (with its delay) under PRBS excitation on the sampling
/// grid and adds white Gaussian noise at snr_db (nullopt: no noise).
GeneratedData make_dataset(const CtModel& model, const ExcitationSpec& exc, const SamplingSpec& samp,
                           std::optional<double> snr_db, std::uint64_t noise_seed);

/// 10 log10 of mean-removed power ratio.
double snr_db_of(const std::vector<double>& x, const std::vector<double>& e);

}  // namespace ctdelay
