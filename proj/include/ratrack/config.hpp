#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "ratrack/contrastive.hpp"
#include "ratrack/scenario.hpp"
#include "ratrack/tracking.hpp"

namespace ratrack {

// Flat key=value settings: one pair per line, '#' lines and blank lines
// skipped, later assignments win. Typed getters record which keys were read
// so require_all_consumed() can reject typos instead of ignoring them.
class Settings {
public:
    Settings() = default;
    static Settings from_file(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    // "key=value" as passed on the command line.
    void set_assignment(const std::string& kv);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Throws ValidationError naming every key no getter asked for.
    void require_all_consumed() const;

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> consumed_;
};

// Per-command key namespaces. Each reader consumes exactly the keys its
// config understands; frame_width/frame_height are shared.
FrameSize frame_size_from(const Settings& s);
ScenarioSpec scenario_spec_from(const Settings& s);
TrainConfig train_config_from(const Settings& s);
TrackerConfig tracker_config_from(const Settings& s);

}  // namespace ratrack
