#include "cowpose/sequence_io.hpp"

#include "cowpose/error.hpp"
#include "cowpose/json_util.hpp"

#include <string>

namespace cowpose {

const SequenceFrame* Sequence::find(std::int64_t frame) const {
    for (const auto& f : frames) {
        if (f.frame == frame) {
            return &f;
        }
    }
    return nullptr;
}

nlohmann::json cow_to_json(const CowSkeleton& cow) {
    nlohmann::json joints = nlohmann::json::object();
    for (std::size_t j = 0; j < kJointCount; ++j) {
        const auto& js = cow.joints[j];
        if (!js.present()) {
            continue;
        }
        joints[std::string(joint_name(joint_at(j)))] = {
            {"x", js.position.x},
            {"y", js.position.y},
            {"conf", js.confidence},
            {"status", std::string(status_name(js.status))},
        };
    }
    nlohmann::json out;
    out["track_id"] = cow.track_id ? nlohmann::json(*cow.track_id) : nlohmann::json(nullptr);
    out["joints"] = std::move(joints);
    return out;
}

CowSkeleton cow_from_json(const nlohmann::json& doc, std::int64_t frame) {
    CowSkeleton cow;
    cow.frame_index = frame;
    if (doc.contains("track_id") && !doc.at("track_id").is_null()) {
        cow.track_id = doc.at("track_id").get<int>();
    }
    for (const auto& [name, entry] : doc.at("joints").items()) {
        const auto joint = joint_from_name(name);
        if (!joint) {
            throw FormatError("unknown joint name '" + name + "'");
        }
        JointState js;
        js.position = {entry.at("x").get<double>(), entry.at("y").get<double>()};
        js.confidence = entry.contains("conf") ? entry.at("conf").get<double>() : 1.0;
        const auto status_text = entry.contains("status") ? entry.at("status").get<std::string>() : "detected";
        const auto status = status_from_name(status_text);
        if (!status) {
            throw FormatError("unknown joint status '" + status_text + "'");
        }
        js.status = *status;
        cow[*joint] = js;
    }
    cow.recompute_center();
    return cow;
}

nlohmann::json sequence_to_json(const Sequence& seq) {
    nlohmann::json out = seq.extra.is_object() ? seq.extra : nlohmann::json::object();
    out["width"] = seq.width;
    out["height"] = seq.height;
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : seq.frames) {
        nlohmann::json cows = nlohmann::json::array();
        for (const auto& c : f.cows) {
            cows.push_back(cow_to_json(c));
        }
        frames.push_back({{"frame", f.frame}, {"cows", std::move(cows)}});
    }
    out["frames"] = std::move(frames);
    return out;
}

Sequence sequence_from_json(const nlohmann::json& doc) {
    try {
        Sequence seq;
        seq.width = doc.value("width", 0u);
        seq.height = doc.value("height", 0u);
        for (const auto& f : doc.at("frames")) {
            SequenceFrame frame;
            frame.frame = f.at("frame").get<std::int64_t>();
            for (const auto& c : f.at("cows")) {
                frame.cows.push_back(cow_from_json(c, frame.frame));
            }
            seq.frames.push_back(std::move(frame));
        }
        for (const auto& [key, value] : doc.items()) {
            if (key != "width" && key != "height" && key != "frames") {
                seq.extra[key] = value;
            }
        }
        return seq;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed sequence document: ") + e.what());
    }
}

void save_sequence(const Sequence& seq, const std::filesystem::path& path) {
    write_json_file(sequence_to_json(seq), path);
}

Sequence load_sequence(const std::filesystem::path& path) {
    try {
        return sequence_from_json(read_json_file(path));
    } catch (const FormatError& e) {
        const std::string what = e.what();
        if (what.rfind(path.string(), 0) == 0) {
            throw;
        }
        throw FormatError(path.string() + ": " + what);
    }
}

} // namespace cowpose
