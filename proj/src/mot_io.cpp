#include "ratrack/mot_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace ratrack {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trimmed(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

}  // namespace

MotData read_mot(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    MotData data;
    std::map<int, std::vector<TrajectoryPoint>> traj_points;  // keyed by id

    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trimmed(line).empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() < 7)
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": expected at least 7 comma-separated fields");
        try {
            int frame = int(parse_int(trimmed(fields[0])));
            long long id = parse_int(trimmed(fields[1]));
            BBox box{parse_double(trimmed(fields[2])), parse_double(trimmed(fields[3])),
                     parse_double(trimmed(fields[4])), parse_double(trimmed(fields[5]))};
            double conf = parse_double(trimmed(fields[6]));
            if (frame < 1) throw ValidationError("frame index must be >= 1");
            if (id == 0) throw ValidationError("id 0 is neither detection nor trajectory");
            if (id < 0) {
                Detection d;
                d.frame = frame;
                d.box = box;
                d.score = conf;
                data.detections[frame].push_back(d);
            } else {
                traj_points[int(id)].push_back({frame, box});
            }
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": " + e.what());
        }
    }

    for (auto& [id, points] : traj_points) {
        std::stable_sort(points.begin(), points.end(),
                         [](const TrajectoryPoint& a, const TrajectoryPoint& b) {
                             return a.frame < b.frame;
                         });
        Trajectory t;
        t.id = id;
        t.points = std::move(points);
        data.trajectories.push_back(std::move(t));
    }
    return data;
}

void write_mot(std::span<const Trajectory> trajectories,
               const std::filesystem::path& path) {
    struct Row {
        int frame;
        int id;
        const BBox* box;
    };
    std::vector<Row> rows;
    for (const Trajectory& t : trajectories)
        for (const TrajectoryPoint& p : t.points) rows.push_back({p.frame, t.id, &p.box});
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
    });

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const Row& r : rows) {
        out << r.frame << ',' << r.id << ',' << format_double(r.box->x) << ','
            << format_double(r.box->y) << ',' << format_double(r.box->w) << ','
            << format_double(r.box->h) << ",1,-1,-1,-1\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void write_mot_detections(const std::map<int, std::vector<Detection>>& frames,
                          const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& [frame, dets] : frames) {
        for (const Detection& d : dets) {
            out << frame << ",-1," << format_double(d.box.x) << ','
                << format_double(d.box.y) << ',' << format_double(d.box.w) << ','
                << format_double(d.box.h) << ',' << format_double(d.score)
                << ",-1,-1,-1\n";
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

DetectionFrames detection_frames(const MotData& data) {
    DetectionFrames out;
    if (data.detections.empty()) return out;
    out.first_frame = data.detections.begin()->first;
    int last = data.detections.rbegin()->first;
    out.frames.resize(std::size_t(last - out.first_frame + 1));
    for (const auto& [frame, dets] : data.detections)
        out.frames[std::size_t(frame - out.first_frame)] = dets;
    return out;
}

BoxFrames boxes_by_frame(std::span<const Trajectory> trajectories) {
    BoxFrames out;
    int first = 0, last = 0;
    bool any = false;
    for (const Trajectory& t : trajectories) {
        for (const TrajectoryPoint& p : t.points) {
            if (!any) {
                first = last = p.frame;
                any = true;
            } else {
                first = std::min(first, p.frame);
                last = std::max(last, p.frame);
            }
        }
    }
    if (!any) return out;
    out.first_frame = first;
    out.frames.resize(std::size_t(last - first + 1));
    for (const Trajectory& t : trajectories)
        for (const TrajectoryPoint& p : t.points)
            out.frames[std::size_t(p.frame - first)].push_back(p.box);
    return out;
}

}  // namespace ratrack
