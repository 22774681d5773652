#include "ratrack/model_io.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace ratrack {

namespace {

using Json = nlohmann::ordered_json;

Json config_to_json(const TrainConfig& c) {
    Json j;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["lr"] = c.lr;
    j["lr_decay_epochs"] = c.lr_decay_epochs;
    j["lr_decay"] = c.lr_decay;
    j["tau"] = c.tau;
    j["eps_iou"] = c.eps_iou;
    j["eps_ir"] = c.eps_ir;
    j["pad_length"] = c.pad_length;
    j["seed"] = c.seed;
    j["input_dim"] = c.input_dim;
    j["dim"] = c.dim;
    j["heads"] = c.heads;
    j["ffn_dim"] = c.ffn_dim;
    j["mark_area_fraction"] = c.mark_area_fraction;
    j["corrupt_positive_rate"] = c.corrupt_positive_rate;
    return j;
}

TrainConfig config_from_json(const Json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.lr = j.at("lr").get<double>();
    c.lr_decay_epochs = j.at("lr_decay_epochs").get<int>();
    c.lr_decay = j.at("lr_decay").get<double>();
    c.tau = j.at("tau").get<double>();
    c.eps_iou = j.at("eps_iou").get<double>();
    c.eps_ir = j.at("eps_ir").get<double>();
    c.pad_length = j.at("pad_length").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.input_dim = j.at("input_dim").get<int>();
    c.dim = j.at("dim").get<int>();
    c.heads = j.at("heads").get<int>();
    c.ffn_dim = j.at("ffn_dim").get<int>();
    c.mark_area_fraction = j.at("mark_area_fraction").get<double>();
    c.corrupt_positive_rate = j.at("corrupt_positive_rate").get<double>();
    return c;
}

Json params_to_json(const RamParams& p) {
    Json j;
    j["input_dim"] = p.input_dim;
    j["dim"] = p.dim;
    j["heads"] = p.heads;
    j["ffn_dim"] = p.ffn_dim;
    Json tensors;
    for (const auto& f : RamParams::fields()) {
        const Mat& t = p.*(f.member);
        Json tj;
        tj["rows"] = t.rows();
        tj["cols"] = t.cols();
        std::vector<double> flat;
        flat.reserve(std::size_t(t.size()));
        for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c) {
                if (!std::isfinite(t(r, c)))
                    throw ValidationError("refusing to save non-finite parameter");
                flat.push_back(t(r, c));
            }
        tj["data"] = flat;
        tensors[f.name] = std::move(tj);
    }
    j["tensors"] = std::move(tensors);
    return j;
}

RamParams params_from_json(const Json& j) {
    RamParams p;
    try {
        p = RamParams::zeros(j.at("input_dim").get<int>(), j.at("dim").get<int>(),
                             j.at("heads").get<int>(), j.at("ffn_dim").get<int>());
    } catch (const ValidationError&) {
        throw ValidationError("model file declares invalid dimensions");
    }
    const Json& tensors = j.at("tensors");
    for (const auto& f : RamParams::fields()) {
        if (!tensors.contains(f.name))
            throw ValidationError(std::string("model file missing tensor ") + f.name);
        const Json& tj = tensors.at(f.name);
        Mat& t = p.*(f.member);
        if (tj.at("rows").get<Eigen::Index>() != t.rows() ||
            tj.at("cols").get<Eigen::Index>() != t.cols())
            throw ValidationError(std::string("tensor ") + f.name +
                                  " shape disagrees with declared dimensions");
        const auto& data = tj.at("data");
        if (Eigen::Index(data.size()) != t.size())
            throw ValidationError(std::string("tensor ") + f.name +
                                  " length disagrees with its shape");
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c) {
                double v = data[k++].get<double>();
                if (!std::isfinite(v))
                    throw ValidationError("non-finite parameter in model file");
                t(r, c) = v;
            }
    }
    return p;
}

}  // namespace

void save_model(const TrainedRam& model, const TrainConfig& cfg,
                const std::filesystem::path& path) {
    model.validate();
    Json j;
    j["format"] = kModelFormat;
    j["kind"] = to_string(model.kind);
    j["seed"] = cfg.seed;
    j["train_config"] = config_to_json(cfg);
    Json encoders;
    if (model.temporal) encoders["temporal"] = params_to_json(*model.temporal);
    if (model.spatial) encoders["spatial"] = params_to_json(*model.spatial);
    j["encoders"] = std::move(encoders);

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(1) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

TrainedRam load_model(const std::filesystem::path& path, TrainConfig* cfg_out) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const std::exception& e) {
        throw ValidationError("model file " + path.string() +
                              " is not valid JSON: " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kModelFormat)
            throw ValidationError("unsupported model format (expected " +
                                  std::string(kModelFormat) + ")");
        TrainedRam model;
        model.kind = ram_kind_from_string(j.at("kind").get<std::string>());
        const Json& encoders = j.at("encoders");
        if (encoders.contains("temporal"))
            model.temporal = params_from_json(encoders.at("temporal"));
        if (encoders.contains("spatial"))
            model.spatial = params_from_json(encoders.at("spatial"));
        model.validate();
        if (model.temporal && model.spatial &&
            model.temporal->input_dim != model.spatial->input_dim)
            throw ValidationError("encoders disagree on input feature width");
        if (cfg_out) *cfg_out = config_from_json(j.at("train_config"));
        return model;
    } catch (const Json::exception& e) {
        throw ValidationError("model file " + path.string() +
                              " is malformed: " + e.what());
    }
}

}  // namespace ratrack
