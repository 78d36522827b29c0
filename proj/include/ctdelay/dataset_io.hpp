#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "ctdelay/model.hpp"

namespace ctdelay {

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sidecar record stored next to a dataset CSV.
struct DatasetMeta {
    std::optional<CtModel> true_system;
    std::optional<double> snr_db;  // requested; empty for noise-free data
    double empirical_snr_db = 0.0;
    std::uint64_t sampling_seed = 0;
    std::uint64_t noise_seed = 0;
};

/// "data.csv" -> "data.json"
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

/// Header `t,u,y`, one row per sample, values printed with 17 significant digits
/// so they read back bit-identical. The sidecar carries the intersample mode,
/// clock edges and `meta`.
void write_dataset(const std::filesystem::path& csv, const SampledDataset& data, const DatasetMeta& meta = {});

/// Reads the CSV and, when present, its sidecar. Throws IoError when a file
/// cannot be opened and std::invalid_argument naming the line for malformed
/// content or a dataset that fails validation.
SampledDataset read_dataset(const std::filesystem::path& csv, DatasetMeta* meta = nullptr);

}  // namespace ctdelay
