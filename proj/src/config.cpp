#include "ratrack/config.hpp"

#include <climits>
#include <fstream>

#include "ratrack/common.hpp"

namespace ratrack {

namespace {

std::string trimmed(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

Settings Settings::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    Settings out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trimmed(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": expected key=value");
        std::string key = trimmed(t.substr(0, eq));
        if (key.empty())
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": empty key");
        out.set(key, trimmed(t.substr(eq + 1)));
    }
    return out;
}

void Settings::set(const std::string& key, const std::string& value) {
    values_[key] = value;
}

void Settings::set_assignment(const std::string& kv) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos || trimmed(kv.substr(0, eq)).empty())
        throw ValidationError("--set expects key=value, got: " + kv);
    set(trimmed(kv.substr(0, eq)), trimmed(kv.substr(eq + 1)));
}

bool Settings::has(const std::string& key) const {
    return values_.count(key) != 0;
}

std::string Settings::get_string(const std::string& key,
                                 const std::string& fallback) const {
    consumed_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Settings::get_double(const std::string& key, double fallback) const {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return parse_double(it->second);
    } catch (const ValidationError& e) {
        throw ValidationError("config key '" + key + "': " + e.what());
    }
}

int Settings::get_int(const std::string& key, int fallback) const {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        long long v = parse_int(it->second);
        if (v < INT_MIN || v > INT_MAX)
            throw ValidationError("out of range: " + it->second);
        return static_cast<int>(v);
    } catch (const ValidationError& e) {
        throw ValidationError("config key '" + key + "': " + e.what());
    }
}

bool Settings::get_bool(const std::string& key, bool fallback) const {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ValidationError("config key '" + key + "': expected true/false, got: " + v);
}

void Settings::require_all_consumed() const {
    std::string extra;
    for (const auto& [key, value] : values_)
        if (!consumed_.count(key)) extra += (extra.empty() ? "" : ", ") + key;
    if (!extra.empty()) throw ValidationError("unknown config keys: " + extra);
}

FrameSize frame_size_from(const Settings& s) {
    FrameSize f;
    f.width = s.get_double("frame_width", f.width);
    f.height = s.get_double("frame_height", f.height);
    return f;
}

ScenarioSpec scenario_spec_from(const Settings& s) {
    ScenarioSpec spec;
    spec.n_objects = s.get_int("n_objects", spec.n_objects);
    spec.n_frames = s.get_int("n_frames", spec.n_frames);
    spec.frame = frame_size_from(s);
    spec.speed_min = s.get_double("speed_min", spec.speed_min);
    spec.speed_max = s.get_double("speed_max", spec.speed_max);
    spec.direction_change_prob =
        s.get_double("direction_change_prob", spec.direction_change_prob);
    spec.size_min = s.get_double("size_min", spec.size_min);
    spec.size_max = s.get_double("size_max", spec.size_max);
    spec.dropout = s.get_double("dropout", spec.dropout);
    spec.coord_noise = s.get_double("coord_noise", spec.coord_noise);
    spec.clutter_rate = s.get_double("clutter_rate", spec.clutter_rate);
    spec.matched_score_min = s.get_double("matched_score_min", spec.matched_score_min);
    spec.matched_score_max = s.get_double("matched_score_max", spec.matched_score_max);
    spec.clutter_score_min = s.get_double("clutter_score_min", spec.clutter_score_min);
    spec.clutter_score_max = s.get_double("clutter_score_max", spec.clutter_score_max);
    spec.occlusion_iou = s.get_double("occlusion_iou", spec.occlusion_iou);
    spec.occlusion_factor = s.get_double("occlusion_factor", spec.occlusion_factor);
    return spec;
}

TrainConfig train_config_from(const Settings& s) {
    TrainConfig cfg;
    cfg.epochs = s.get_int("epochs", cfg.epochs);
    cfg.batch_size = s.get_int("batch_size", cfg.batch_size);
    cfg.lr = s.get_double("lr", cfg.lr);
    cfg.lr_decay_epochs = s.get_int("lr_decay_epochs", cfg.lr_decay_epochs);
    cfg.lr_decay = s.get_double("lr_decay", cfg.lr_decay);
    cfg.tau = s.get_double("tau", cfg.tau);
    cfg.eps_iou = s.get_double("eps_iou", cfg.eps_iou);
    cfg.eps_ir = s.get_double("eps_ir", cfg.eps_ir);
    cfg.pad_length = s.get_int("pad_length", cfg.pad_length);
    cfg.input_dim = s.get_int("input_dim", cfg.input_dim);
    cfg.dim = s.get_int("dim", cfg.dim);
    cfg.heads = s.get_int("heads", cfg.heads);
    cfg.ffn_dim = s.get_int("ffn_dim", cfg.ffn_dim);
    cfg.mark_area_fraction = s.get_double("mark_area_fraction", cfg.mark_area_fraction);
    cfg.corrupt_positive_rate =
        s.get_double("corrupt_positive_rate", cfg.corrupt_positive_rate);
    return cfg;
}

namespace {

StageConfig stage_from(const Settings& s, const std::string& prefix,
                       const StageConfig& defaults) {
    StageConfig st = defaults;
    st.fusion.alpha_t = s.get_double(prefix + "alpha_t", st.fusion.alpha_t);
    st.fusion.alpha_s = s.get_double(prefix + "alpha_s", st.fusion.alpha_s);
    st.fusion.lambda = s.get_double(prefix + "lambda", st.fusion.lambda);
    st.eps_iou = s.get_double(prefix + "eps_iou", st.eps_iou);
    st.use_ram = s.get_bool(prefix + "use_ram", st.use_ram);
    return st;
}

}  // namespace

TrackerConfig tracker_config_from(const Settings& s) {
    TrackerConfig cfg;
    cfg.tau_high = s.get_double("tau_high", cfg.tau_high);
    cfg.tau_low = s.get_double("tau_low", cfg.tau_low);
    cfg.stage1 = stage_from(s, "stage1_", cfg.stage1);
    cfg.stage2 = stage_from(s, "stage2_", cfg.stage2);
    cfg.two_stage = s.get_bool("two_stage", cfg.two_stage);
    cfg.single_stage = stage_from(s, "single_", cfg.single_stage);
    cfg.max_age = s.get_int("max_age", cfg.max_age);
    cfg.min_score_new_track = s.get_double("min_score_new_track", cfg.min_score_new_track);
    std::string kind = s.get_string("ram_kind", "");
    if (!kind.empty()) cfg.ram_kind = ram_kind_from_string(kind);
    cfg.mark_area_fraction = s.get_double("mark_area_fraction", cfg.mark_area_fraction);
    cfg.frame = frame_size_from(s);
    cfg.kalman.pos_weight = s.get_double("kalman_pos_weight", cfg.kalman.pos_weight);
    cfg.kalman.vel_weight = s.get_double("kalman_vel_weight", cfg.kalman.vel_weight);
    cfg.kalman.init_pos_factor =
        s.get_double("kalman_init_pos_factor", cfg.kalman.init_pos_factor);
    cfg.kalman.init_vel_factor =
        s.get_double("kalman_init_vel_factor", cfg.kalman.init_vel_factor);
    cfg.use_appearance = s.get_bool("use_appearance", cfg.use_appearance);
    return cfg;
}

}  // namespace ratrack
