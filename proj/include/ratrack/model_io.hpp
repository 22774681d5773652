#pragma once

#include <filesystem>

#include "ratrack/contrastive.hpp"
#include "ratrack/ram.hpp"

namespace ratrack {

inline constexpr const char* kModelFormat = "ratrack-model-v1";

// Text-based model file: format tag, alignment kind, per-encoder dims and
// tensors (shortest-round-trip decimal doubles, so load(save(m)) is
// bit-exact), plus the training config and seed for provenance.
void save_model(const TrainedRam& model, const TrainConfig& cfg,
                const std::filesystem::path& path);

TrainedRam load_model(const std::filesystem::path& path,
                      TrainConfig* cfg_out = nullptr);

}  // namespace ratrack
