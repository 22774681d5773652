#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string output;  // stdout + stderr
};

fs::path scratch_root() {
    fs::path dir = fs::temp_directory_path() / "ratrack_cli_tests";
    fs::create_directories(dir);
    return dir;
}

fs::path fresh_dir(const std::string& name) {
    fs::path d = scratch_root() / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

RunResult run_cli(const std::string& args) {
    const char* bin = RATRACK_CLI_PATH;  // baked in by the build
    static int counter = 0;
    fs::path log = scratch_root() / ("run_" + std::to_string(counter++) + ".log");
    std::string cmd =
        std::string(bin) + " " + args + " > " + log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    r.output.assign(std::istreambuf_iterator<char>(in), {});
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string tiny_scene_flags() {
    return "--set frame_width=800 --set frame_height=600 --set n_objects=3 "
           "--set n_frames=12";
}

std::string tiny_train_flags() {
    return "--set frame_width=800 --set frame_height=600 --set dim=8 "
           "--set heads=2 --set ffn_dim=16 --set pad_length=8 "
           "--set epochs=2 --set eps_iou=0.5";
}

// numeric field from the metrics CSV written by eval
double csv_field(const fs::path& csv, const std::string& column) {
    std::ifstream in(csv);
    std::string header, values;
    std::getline(in, header);
    std::getline(in, values);
    std::istringstream hs(header), vs(values);
    std::string h, v;
    while (std::getline(hs, h, ',') && std::getline(vs, v, ','))
        if (h == column) return std::stod(v);
    FAIL("column not found: ", column);
    return 0.0;
}

}  // namespace

TEST_CASE("help and argument errors use parse-level exit codes") {
    CHECK(run_cli("--help").code == 0);
    CHECK(run_cli("synth --help").code == 0);
    CHECK(run_cli("").code == 1);              // a subcommand is required
    CHECK(run_cli("frobnicate").code == 1);    // unknown subcommand
    CHECK(run_cli("synth").code == 1);         // --seed is mandatory
    CHECK(run_cli("train x.txt --seed 1").code == 1);  // --kind is mandatory
    CHECK(run_cli("track --jobs 0 x.txt").code == 1);
}

TEST_CASE("missing files are io errors, bad values are validation errors") {
    fs::path d = fresh_dir("codes");
    RunResult io = run_cli("eval " + (d / "no_gt.txt").string() + " " +
                           (d / "no_res.txt").string());
    CHECK(io.code == 2);
    CHECK(io.output.find("io error") != std::string::npos);

    CHECK(run_cli("train " + (d / "missing.txt").string() +
                  " --kind stram --seed 1").code == 2);
    CHECK(run_cli("track " + (d / "missing.txt").string()).code == 2);
    CHECK(run_cli("synth --seed 1 --config " + (d / "missing.cfg").string())
              .code == 2);

    RunResult bad_key = run_cli("synth --seed 1 " + tiny_scene_flags() +
                                " --set bogus_key=1 --out-dir " + d.string());
    CHECK(bad_key.code == 1);
    CHECK(bad_key.output.find("bogus_key") != std::string::npos);

    RunResult bad_value = run_cli("synth --seed 1 " + tiny_scene_flags() +
                                  " --set dropout=1.5 --out-dir " + d.string());
    CHECK(bad_value.code == 1);

    // unwritable output directory: a file stands where the directory should go
    std::ofstream(d / "blocker") << "x";
    CHECK(run_cli("synth --seed 1 " + tiny_scene_flags() + " --out-dir " +
                  (d / "blocker" / "sub").string()).code == 2);
}

TEST_CASE("synth writes deterministic scenario files") {
    fs::path a = fresh_dir("synth_a"), b = fresh_dir("synth_b");
    RunResult r = run_cli("synth --seed 5 " + tiny_scene_flags() +
                          " --out-dir " + a.string());
    REQUIRE(r.code == 0);
    CHECK(r.output.find("gt") != std::string::npos);
    REQUIRE(fs::exists(a / "gt.txt"));
    REQUIRE(fs::exists(a / "det.txt"));

    REQUIRE(run_cli("synth --seed 5 " + tiny_scene_flags() + " --out-dir " +
                    b.string()).code == 0);
    CHECK(slurp(a / "gt.txt") == slurp(b / "gt.txt"));
    CHECK(slurp(a / "det.txt") == slurp(b / "det.txt"));

    fs::path c = fresh_dir("synth_c");
    REQUIRE(run_cli("synth --seed 6 " + tiny_scene_flags() + " --out-dir " +
                    c.string()).code == 0);
    CHECK(slurp(a / "gt.txt") != slurp(c / "gt.txt"));
}

TEST_CASE("a noiseless scene tracks back to its own ground truth") {
    fs::path d = fresh_dir("noiseless");
    // slow, large box: every step keeps IoU above the strict stage-1 gate
    REQUIRE(run_cli("synth --seed 3 --out-dir " + d.string() +
                    " --set frame_width=800 --set frame_height=600"
                    " --set n_objects=1 --set n_frames=15 --set dropout=0"
                    " --set coord_noise=0 --set clutter_rate=0"
                    " --set speed_min=0.5 --set speed_max=1.5 --set size_min=80")
                .code == 0);
    REQUIRE(run_cli("track " + (d / "det.txt").string() + " --out " +
                    (d / "tracks.txt").string() +
                    " --set frame_width=800 --set frame_height=600").code == 0);

    std::istringstream rows(slurp(d / "tracks.txt"));
    std::string line;
    int n_rows = 0;
    while (std::getline(rows, line)) {
        CHECK(line.find(",1,") != std::string::npos);  // a single identity
        ++n_rows;
    }
    CHECK(n_rows == 15);

    fs::path csv = d / "metrics.csv";
    RunResult ev = run_cli("eval " + (d / "gt.txt").string() + " " +
                           (d / "tracks.txt").string() + " --csv " + csv.string());
    REQUIRE(ev.code == 0);
    CHECK(ev.output.find("MOTA") != std::string::npos);
    CHECK(csv_field(csv, "MOTA") == 1.0);
    CHECK(csv_field(csv, "IDF1") == 1.0);
    CHECK(csv_field(csv, "IDS") == 0.0);
}

TEST_CASE("training is reproducible and zero epochs saves the initialization") {
    fs::path d = fresh_dir("train");
    REQUIRE(run_cli("synth --seed 8 " + tiny_scene_flags() + " --out-dir " +
                    d.string()).code == 0);
    std::string data = (d / "gt.txt").string();

    std::string zero = tiny_train_flags() + " --set epochs=0";
    REQUIRE(run_cli("train " + data + " --kind stram --seed 4 " + zero +
                    " --out " + (d / "m0a.json").string() + " --loss-csv " +
                    (d / "l0a.csv").string()).code == 0);
    REQUIRE(run_cli("train " + data + " --kind stram --seed 4 " + zero +
                    " --out " + (d / "m0b.json").string() + " --loss-csv " +
                    (d / "l0b.csv").string()).code == 0);
    CHECK(slurp(d / "m0a.json") == slurp(d / "m0b.json"));
    CHECK(slurp(d / "l0a.csv") == "epoch,L_T,L_S,L_ST\n");

    REQUIRE(run_cli("train " + data + " --kind stram --seed 5 " + zero +
                    " --out " + (d / "m0c.json").string()).code == 0);
    CHECK(slurp(d / "m0a.json") != slurp(d / "m0c.json"));

    RunResult tr = run_cli("train " + data + " --kind stram --seed 4 " +
                           tiny_train_flags() + " --out " +
                           (d / "m2.json").string() + " --loss-csv " +
                           (d / "l2.csv").string());
    REQUIRE(tr.code == 0);
    CHECK(tr.output.find("L_ST") != std::string::npos);
    std::string csv = slurp(d / "l2.csv");
    CHECK(csv.rfind("epoch,L_T,L_S,L_ST\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 epochs

    // training reads trajectories; a detections-only file cannot train
    CHECK(run_cli("train " + (d / "det.txt").string() +
                  " --kind stram --seed 4 " + tiny_train_flags()).code == 1);
}

TEST_CASE("the unsupervised flag only relabels the input") {
    fs::path d = fresh_dir("unsup");
    REQUIRE(run_cli("synth --seed 9 " + tiny_scene_flags() + " --out-dir " +
                    d.string()).code == 0);
    REQUIRE(run_cli("track " + (d / "det.txt").string() + " --out " +
                    (d / "self_tracks.txt").string() +
                    " --set frame_width=800 --set frame_height=600").code == 0);

    std::string base = "train " + (d / "self_tracks.txt").string() +
                       " --kind tram --seed 6 " + tiny_train_flags();
    REQUIRE(run_cli(base + " --out " + (d / "sup.json").string()).code == 0);
    RunResult un = run_cli(base + " --unsupervised --out " +
                           (d / "unsup.json").string());
    REQUIRE(un.code == 0);
    CHECK(slurp(d / "sup.json") == slurp(d / "unsup.json"));
}

TEST_CASE("alpha = 1 tracking matches the baseline byte for byte") {
    fs::path d = fresh_dir("endpoint");
    REQUIRE(run_cli("synth --seed 12 " + tiny_scene_flags() + " --out-dir " +
                    d.string()).code == 0);
    REQUIRE(run_cli("train " + (d / "gt.txt").string() +
                    " --kind stram --seed 2 " + tiny_train_flags() + " --out " +
                    (d / "model.json").string()).code == 0);

    std::string frame_flags = " --set frame_width=800 --set frame_height=600";
    REQUIRE(run_cli("track " + (d / "det.txt").string() + " --out " +
                    (d / "baseline.txt").string() + frame_flags).code == 0);
    std::string ones =
        " --set stage1_alpha_t=1 --set stage1_alpha_s=1"
        " --set stage2_alpha_t=1 --set stage2_alpha_s=1";
    REQUIRE(run_cli("track " + (d / "det.txt").string() + " --model " +
                    (d / "model.json").string() + " --out " +
                    (d / "fused.txt").string() + frame_flags + ones).code == 0);
    CHECK(slurp(d / "baseline.txt") == slurp(d / "fused.txt"));

    // away from the endpoint the model must be allowed to disagree
    REQUIRE(run_cli("track " + (d / "det.txt").string() + " --model " +
                    (d / "model.json").string() + " --out " +
                    (d / "blend.txt").string() + frame_flags).code == 0);
    CHECK(!slurp(d / "blend.txt").empty());

    // an explicit kind that contradicts the model file is a validation error
    CHECK(run_cli("track " + (d / "det.txt").string() + " --model " +
                  (d / "model.json").string() + " --out " +
                  (d / "bad.txt").string() + frame_flags +
                  " --set ram_kind=tram").code == 1);
}

TEST_CASE("parallel tracking equals serial tracking") {
    fs::path d = fresh_dir("jobs");
    REQUIRE(run_cli("synth --seed 21 " + tiny_scene_flags() + " --out-dir " +
                    d.string()).code == 0);
    fs::copy_file(d / "det.txt", d / "det_b.txt");
    fs::copy_file(d / "det.txt", d / "det_c.txt");

    std::string inputs = (d / "det.txt").string() + " " +
                         (d / "det_b.txt").string() + " " +
                         (d / "det_c.txt").string();
    std::string frame_flags = " --set frame_width=800 --set frame_height=600";
    REQUIRE(run_cli("track " + inputs + " --out-dir " + (d / "serial").string() +
                    " --jobs 1" + frame_flags).code == 0);
    REQUIRE(run_cli("track " + inputs + " --out-dir " + (d / "par").string() +
                    " --jobs 3" + frame_flags).code == 0);
    for (const char* name : {"det_tracks.txt", "det_b_tracks.txt", "det_c_tracks.txt"}) {
        CHECK(fs::exists(d / "serial" / name));
        CHECK(slurp(d / "serial" / name) == slurp(d / "par" / name));
    }
    CHECK(slurp(d / "serial" / "det_tracks.txt") ==
          slurp(d / "serial" / "det_b_tracks.txt"));

    CHECK(run_cli("track " + inputs + " --out single.txt" + frame_flags).code == 1);
}

TEST_CASE("eval scores the crafted swap scene as expected") {
    fs::path d = fresh_dir("swap");
    std::ofstream(d / "gt.txt")
        << "1,1,0,0,10,10,1,-1,-1,-1\n2,1,0,0,10,10,1,-1,-1,-1\n3,1,0,0,10,10,1,-1,-1,-1\n"
        << "1,2,100,0,10,10,1,-1,-1,-1\n2,2,100,0,10,10,1,-1,-1,-1\n3,2,100,0,10,10,1,-1,-1,-1\n";
    std::ofstream(d / "hyp.txt")
        << "1,1,0,0,10,10,1,-1,-1,-1\n2,1,100,0,10,10,1,-1,-1,-1\n3,1,0,0,10,10,1,-1,-1,-1\n"
        << "1,2,100,0,10,10,1,-1,-1,-1\n2,2,0,0,10,10,1,-1,-1,-1\n3,2,100,0,10,10,1,-1,-1,-1\n";
    fs::path csv = d / "m.csv";
    REQUIRE(run_cli("eval " + (d / "gt.txt").string() + " " +
                    (d / "hyp.txt").string() + " --csv " + csv.string()).code == 0);
    CHECK(csv_field(csv, "IDS") == 4.0);
    CHECK(csv_field(csv, "MOTA") == doctest::Approx(1.0 - 4.0 / 6.0).epsilon(1e-12));
    CHECK(csv_field(csv, "IDF1") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    std::ofstream(d / "empty.txt").close();
    fs::path csv2 = d / "m2.csv";
    REQUIRE(run_cli("eval " + (d / "gt.txt").string() + " " +
                    (d / "empty.txt").string() + " --csv " + csv2.string()).code == 0);
    CHECK(csv_field(csv2, "MOTA") == 0.0);
    CHECK(csv_field(csv2, "IDF1") == 0.0);

    CHECK(run_cli("eval " + (d / "gt.txt").string() + " " +
                  (d / "hyp.txt").string() + " --gate 0").code == 1);
}
