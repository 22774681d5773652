#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "ratrack/tracking.hpp"

namespace ratrack {

// Parsed MOT-format file. Rows with id -1 (or any id < 0) are detections;
// rows with id >= 1 are trajectory points.
struct MotData {
    std::map<int, std::vector<Detection>> detections;  // keyed by frame
    std::vector<Trajectory> trajectories;              // ascending id
};

// Comma-separated rows `frame,id,left,top,width,height,conf,x,y,z` (the
// trailing world coordinates are ignored; at least 7 fields required).
// Rows may be in any order; output is sorted by frame.
MotData read_mot(const std::filesystem::path& path);

// Inverse of read_mot for trajectories: conf written as 1.0, world
// coordinates as -1, rows sorted by frame then id, shortest-round-trip
// decimal floats so read_mot(write_mot(t)) reproduces t exactly.
void write_mot(std::span<const Trajectory> trajectories,
               const std::filesystem::path& path);

// Detection rows with id -1 and their scores in the conf column.
void write_mot_detections(const std::map<int, std::vector<Detection>>& frames,
                          const std::filesystem::path& path);

// Dense per-frame detection lists covering [first_frame, last_frame] of the
// data (empty frames included), for feeding track_sequence.
struct DetectionFrames {
    int first_frame = 1;
    std::vector<std::vector<Detection>> frames;
};
DetectionFrames detection_frames(const MotData& data);

// Dense per-frame box lists from trajectories (training input); frames
// without boxes are empty entries.
struct BoxFrames {
    int first_frame = 1;
    std::vector<std::vector<BBox>> frames;
};
BoxFrames boxes_by_frame(std::span<const Trajectory> trajectories);

}  // namespace ratrack
