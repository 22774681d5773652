#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ratrack/config.hpp"
#include "ratrack/pipeline.hpp"

namespace {

using namespace ratrack;

Settings load_settings(const std::string& config_path,
                       const std::vector<std::string>& sets) {
    Settings s;
    if (!config_path.empty()) s = Settings::from_file(config_path);
    for (const auto& kv : sets) s.set_assignment(kv);
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ratrack: multi-object tracking with learned box-feature alignment"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    auto add_settings_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key=value config file");
        cmd->add_option("--set", sets, "override one config key, e.g. --set lr=0.001");
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic scenario");
    add_settings_flags(synth);
    std::uint64_t synth_seed = 0;
    std::string synth_out_dir = ".";
    synth->add_option("--seed", synth_seed, "scenario seed")->required();
    synth->add_option("--out-dir", synth_out_dir, "directory for gt.txt and det.txt");
    synth->callback([&] {
        Settings s = load_settings(config_path, sets);
        ScenarioSpec spec = scenario_spec_from(s);
        s.require_all_consumed();
        spec.seed = synth_seed;
        cmd_synth(spec, synth_out_dir, std::cout);
    });

    auto* train = app.add_subcommand("train", "train an alignment model on trajectories");
    add_settings_flags(train);
    std::string train_data, train_kind, train_model = "model.json";
    std::string train_loss_csv = "losses.csv";
    std::uint64_t train_seed = 0;
    bool unsupervised = false;
    train->add_option("data", train_data, "MOT file with trajectory rows (gt or tracker output)")
        ->required();
    train->add_option("--kind", train_kind, "tram, sram, or stram")->required();
    train->add_option("--seed", train_seed, "initialization and shuffle seed")->required();
    train->add_option("--out", train_model, "model output path");
    train->add_option("--loss-csv", train_loss_csv, "per-epoch loss CSV path");
    train->add_flag("--unsupervised", unsupervised,
                    "note that the input is prior tracker output (same training path)");
    train->callback([&] {
        Settings s = load_settings(config_path, sets);
        TrainConfig cfg = train_config_from(s);
        FrameSize frame = frame_size_from(s);
        s.require_all_consumed();
        cfg.seed = train_seed;
        RamKind kind = ram_kind_from_string(train_kind);
        if (kind == RamKind::none)
            throw ValidationError("--kind must be tram, sram, or stram");
        if (unsupervised)
            std::cout << "treating trajectory rows as prior tracking output\n";
        cmd_train(train_data, kind, cfg, frame, train_model, train_loss_csv, std::cout);
    });

    auto* track = app.add_subcommand("track", "run the tracker over detection files");
    add_settings_flags(track);
    std::vector<std::string> track_dets;
    std::string track_model, track_out, track_out_dir;
    int jobs = 1;
    track->add_option("detections", track_dets, "MOT detection files")
        ->required();
    track->add_option("--model", track_model, "trained alignment model");
    track->add_option("--out", track_out, "output path (single input only)");
    track->add_option("--out-dir", track_out_dir,
                      "output directory, files named <input>_tracks.txt");
    track->add_option("--jobs", jobs, "parallel sequences")->check(CLI::PositiveNumber);
    track->callback([&] {
        Settings s = load_settings(config_path, sets);
        TrackerConfig cfg = tracker_config_from(s);
        s.require_all_consumed();

        std::vector<std::filesystem::path> dets(track_dets.begin(), track_dets.end());
        std::vector<std::filesystem::path> outs;
        if (!track_out.empty()) {
            if (dets.size() != 1)
                throw ValidationError("--out works with one input; use --out-dir");
            outs.push_back(track_out);
        } else if (!track_out_dir.empty()) {
            std::error_code ec;
            std::filesystem::create_directories(track_out_dir, ec);
            if (ec) throw IoError("cannot create directory: " + track_out_dir);
            for (const auto& d : dets)
                outs.push_back(std::filesystem::path(track_out_dir) /
                               (d.stem().string() + "_tracks.txt"));
        } else if (dets.size() == 1) {
            outs.push_back("tracks.txt");
        } else {
            throw ValidationError("multiple inputs need --out-dir");
        }
        std::optional<std::filesystem::path> model;
        if (!track_model.empty()) model = track_model;
        cmd_track(dets, outs, model, cfg, jobs, std::cout);
    });

    auto* eval = app.add_subcommand("eval", "score tracking output against ground truth");
    add_settings_flags(eval);
    std::string eval_gt, eval_results, eval_csv;
    double gate = 0.5;
    eval->add_option("gt", eval_gt, "ground-truth MOT file")->required();
    eval->add_option("results", eval_results, "tracker output MOT file")
        ->required();
    eval->add_option("--gate", gate, "IoU gate for correspondences");
    eval->add_option("--csv", eval_csv, "also write metrics as CSV");
    eval->callback([&] {
        Settings s = load_settings(config_path, sets);
        s.require_all_consumed();
        std::optional<std::filesystem::path> csv;
        if (!eval_csv.empty()) csv = eval_csv;
        cmd_eval(eval_gt, eval_results, gate, csv, std::cout);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
