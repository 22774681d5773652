#include "ratrack/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "ratrack/common.hpp"
#include "ratrack/model_io.hpp"
#include "ratrack/mot_io.hpp"

namespace ratrack {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

SynthPaths cmd_synth(const ScenarioSpec& spec, const std::filesystem::path& out_dir,
                     std::ostream& log) {
    Scenario sc = generate_scenario(spec);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create directory: " + out_dir.string());
    SynthPaths paths{out_dir / "gt.txt", out_dir / "det.txt"};
    write_mot(sc.gt, paths.gt);
    write_mot_detections(sc.detections, paths.det);

    std::size_t gt_boxes = 0;
    for (const auto& t : sc.gt) gt_boxes += t.points.size();
    std::size_t det_boxes = 0;
    for (const auto& [frame, dets] : sc.detections) det_boxes += dets.size();
    log << "gt: " << sc.gt.size() << " trajectories, " << gt_boxes << " boxes -> "
        << paths.gt.string() << "\n";
    log << "detections: " << det_boxes << " boxes over " << spec.n_frames
        << " frames -> " << paths.det.string() << "\n";
    return paths;
}

void cmd_train(const std::filesystem::path& data_path, RamKind kind,
               const TrainConfig& cfg, const FrameSize& frame,
               const std::filesystem::path& model_path,
               const std::filesystem::path& loss_csv_path, std::ostream& log) {
    MotData data = read_mot(data_path);
    if (data.trajectories.empty())
        throw ValidationError("no trajectory rows in " + data_path.string());
    BoxFrames boxes = boxes_by_frame(data.trajectories);

    auto t0 = std::chrono::steady_clock::now();
    LossReport history;
    TrainedRam model = train_ram(boxes.frames, kind, cfg, frame, &history);
    save_model(model, cfg, model_path);
    write_text(loss_csv_path, loss_report_csv(history));

    log << "trained " << to_string(kind) << " on " << boxes.frames.size()
        << " frames, " << cfg.epochs << " epochs in " << seconds_since(t0) << "s\n";
    if (!history.epochs.empty()) {
        const EpochLoss& last = history.epochs.back();
        log << "final losses: L_T=" << last.l_t << " L_S=" << last.l_s
            << " L_ST=" << last.l_st << "\n";
    }
    log << "model -> " << model_path.string() << "\n";
    log << "loss csv -> " << loss_csv_path.string() << "\n";
}

void cmd_track(const std::vector<std::filesystem::path>& det_paths,
               const std::vector<std::filesystem::path>& out_paths,
               const std::optional<std::filesystem::path>& model_path,
               TrackerConfig cfg, int jobs, std::ostream& log) {
    if (det_paths.size() != out_paths.size())
        throw ValidationError("need one output path per detection file");
    if (det_paths.empty()) throw ValidationError("no detection files given");
    if (jobs < 1) throw ValidationError("jobs must be >= 1");

    TrainedRam model;
    const TrainedRam* ram = nullptr;
    if (model_path) {
        model = load_model(*model_path);
        if (cfg.ram_kind == RamKind::none) cfg.ram_kind = model.kind;
        ram = &model;
    }
    cfg.validate();

    const std::size_t n = det_paths.size();
    std::vector<std::string> summaries(n);
    std::vector<std::exception_ptr> errors(n);
    auto run_one = [&](std::size_t i) {
        try {
            auto t0 = std::chrono::steady_clock::now();
            DetectionFrames seq = detection_frames(read_mot(det_paths[i]));
            std::vector<Trajectory> tracks =
                track_sequence(seq.frames, cfg, ram, seq.first_frame);
            write_mot(tracks, out_paths[i]);
            std::ostringstream line;
            line << det_paths[i].string() << ": " << seq.frames.size() << " frames -> "
                 << tracks.size() << " trajectories in " << seconds_since(t0) << "s -> "
                 << out_paths[i].string();
            summaries[i] = line.str();
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    auto t_all = std::chrono::steady_clock::now();
    if (jobs == 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        std::size_t worker_count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
        for (std::size_t w = 0; w < worker_count; ++w)
            workers.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
                    run_one(i);
            });
        for (auto& w : workers) w.join();
    }
    for (std::size_t i = 0; i < n; ++i)
        if (errors[i]) std::rethrow_exception(errors[i]);
    for (const auto& s : summaries) log << s << "\n";
    if (n > 1) log << "total: " << seconds_since(t_all) << "s\n";
}

MetricsReport cmd_eval(const std::filesystem::path& gt_path,
                       const std::filesystem::path& results_path, double gate,
                       const std::optional<std::filesystem::path>& csv_path,
                       std::ostream& log) {
    MotData gt = read_mot(gt_path);
    MotData hyp = read_mot(results_path);
    MetricsReport report = evaluate(gt.trajectories, hyp.trajectories, gate);
    log << metrics_table(report);
    if (csv_path) write_text(*csv_path, metrics_csv(report));
    return report;
}

}  // namespace ratrack
