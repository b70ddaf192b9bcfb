#pragma once

#include <cstdint>
#include <filesystem>

namespace logsieve {

/// Parameters of the generated end-to-end fixture. Normal and abnormal
/// events draw from disjoint vocabularies.
struct SyntheticSpec {
    std::size_t sl_samples = 1000;  // retained log instructions in the source tree
    std::size_t target_logs = 5000;
    double anomaly_rate = 0.02;
    std::size_t logs_per_block = 10;
    double train_frac = 0.8;
    std::uint64_t seed = 7;
};

/// Writes a self-contained fixture under `dir`:
///   src/            python/java/c++ files with log calls (plus excluded levels)
///   target.log      BGL-style target logs carrying block ids
///   target_train.log, target_test.log   chronological split of target.log
///   dataset.json    adapter config for target.log (block-id grouping)
///   test_dataset.json  adapter config for target_test.log alone
/// Returns the number of injected anomalies.
std::size_t write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticSpec& spec);

}  // namespace logsieve
