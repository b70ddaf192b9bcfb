#pragma once

#include <filesystem>
#include <optional>

#include "logsieve/detector.hpp"
#include "logsieve/model.hpp"

namespace logsieve {

inline constexpr int kArtifactFormatVersion = 1;

/// A persisted model: configuration, vocabulary, parameters and, once
/// finetuned, the decision threshold.
///
/// Directory layout:
///   config.json      format_version, stage, model config, threshold (or null)
///   vocab.json       token -> index
///   params.manifest  JSON list of {name, shape, offset} (offsets in bytes)
///   params.bin       concatenated row-major little-endian float32 tensors
struct ModelArtifact {
    TrainedModel model;
    std::optional<DecisionThreshold> threshold;

    bool finetuned() const { return threshold.has_value(); }

    void save(const std::filesystem::path& dir) const;
    static ModelArtifact load(const std::filesystem::path& dir);
};

/// Raw params.bin payload for the given parameters.
std::string serialize_params(const Parameters& params);

}  // namespace logsieve
