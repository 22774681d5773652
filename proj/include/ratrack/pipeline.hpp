#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

#include "ratrack/contrastive.hpp"
#include "ratrack/evaluation.hpp"
#include "ratrack/scenario.hpp"
#include "ratrack/tracking.hpp"

namespace ratrack {

// Command bodies behind the CLI, reusable from tests. Progress and summary
// lines go to `log`; all results go to files.

struct SynthPaths {
    std::filesystem::path gt;
    std::filesystem::path det;
};

// Writes out_dir/gt.txt (trajectory rows) and out_dir/det.txt (detection
// rows with confidences), creating out_dir if needed.
SynthPaths cmd_synth(const ScenarioSpec& spec, const std::filesystem::path& out_dir,
                     std::ostream& log);

// Trains on the trajectory rows of data_path (ground truth and tracker
// output read identically) and writes the model plus a per-epoch loss CSV.
void cmd_train(const std::filesystem::path& data_path, RamKind kind,
               const TrainConfig& cfg, const FrameSize& frame,
               const std::filesystem::path& model_path,
               const std::filesystem::path& loss_csv_path, std::ostream& log);

// Tracks each detection file into the matching output path. When a model is
// given and cfg.ram_kind is none, the model's kind is used. jobs > 1 runs
// sequences on parallel threads; outputs and log order stay deterministic.
void cmd_track(const std::vector<std::filesystem::path>& det_paths,
               const std::vector<std::filesystem::path>& out_paths,
               const std::optional<std::filesystem::path>& model_path,
               TrackerConfig cfg, int jobs, std::ostream& log);

// Prints the metrics table to `log`; optionally writes the CSV form.
MetricsReport cmd_eval(const std::filesystem::path& gt_path,
                       const std::filesystem::path& results_path, double gate,
                       const std::optional<std::filesystem::path>& csv_path,
                       std::ostream& log);

}  // namespace ratrack
