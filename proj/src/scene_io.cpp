#include "assembloid/scene_io.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "assembloid/errors.hpp"
#include "assembloid/metrics.hpp"
#include "assembloid/ply_io.hpp"

namespace assembloid {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json pose_to_json(const Pose& pose) {
    return json{{"quat", {pose.rotation.w, pose.rotation.x, pose.rotation.y, pose.rotation.z}},
                {"trans", {pose.translation.x, pose.translation.y, pose.translation.z}}};
}

Pose pose_from_json(const json& j) {
    const auto& q = j.at("quat");
    const auto& t = j.at("trans");
    if (!q.is_array() || q.size() != 4 || !t.is_array() || t.size() != 3)
        throw IoError("pose: quat must have 4 entries and trans 3");
    Pose pose;
    pose.rotation = {q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                     q[3].get<double>()};
    pose.translation = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
    return pose;
}

}  // namespace

void save_scene(const std::string& dir, const Scene& scene,
                const std::vector<std::string>& part_names, std::uint64_t seed) {
    if (scene.parts.empty()) throw InvalidInput("save_scene: scene has no parts");
    if (!part_names.empty() && part_names.size() != scene.parts.size())
        throw InvalidInput("save_scene: part name count differs from part count");

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("save_scene: cannot create " + dir + ": " + ec.message());

    json manifest;
    manifest["label"] = scene.label;
    manifest["seed"] = seed;
    manifest["parts"] = json::array();
    for (std::size_t i = 0; i < scene.parts.size(); ++i) {
        const std::string cloud_file = "part_" + std::to_string(i) + ".ply";
        write_ply((fs::path(dir) / cloud_file).string(), scene.parts[i].canonical);
        json entry;
        entry["name"] = part_names.empty() ? ("part_" + std::to_string(i)) : part_names[i];
        entry["cloud"] = cloud_file;
        entry["pose"] = pose_to_json(scene.parts[i].pose);
        manifest["parts"].push_back(entry);
    }

    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw IoError("save_scene: cannot write manifest in " + dir);
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("save_scene: manifest write failed in " + dir);
}

LoadedScene load_scene(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw IoError("load_scene: cannot open manifest in " + dir);
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw IoError("load_scene: invalid manifest JSON in " + dir + ": " + e.what());
    }

    LoadedScene out;
    try {
        out.scene.label = manifest.at("label").get<std::string>();
        out.seed = manifest.at("seed").get<std::uint64_t>();
        for (const json& entry : manifest.at("parts")) {
            Part part;
            part.canonical = read_ply((fs::path(dir) / entry.at("cloud").get<std::string>()).string());
            part.pose = pose_from_json(entry.at("pose"));
            out.scene.parts.push_back(std::move(part));
            out.part_names.push_back(entry.at("name").get<std::string>());
        }
    } catch (const json::exception& e) {
        throw IoError("load_scene: malformed manifest in " + dir + ": " + e.what());
    }
    if (out.scene.parts.empty()) throw IoError("load_scene: manifest lists no parts in " + dir);
    return out;
}

void write_trace_jsonl(const std::string& path, const IterationTrace& trace,
                       const Scene& subject, const Scene* reference) {
    if (trace.initial_poses.size() != subject.parts.size())
        throw InvalidInput("write_trace_jsonl: pose count differs from scene part count");

    std::ofstream out(path);
    if (!out) throw IoError("write_trace_jsonl: cannot open " + path);

    Scene working = subject;
    auto with_poses = [&](const std::vector<Pose>& poses) -> const Scene& {
        for (std::size_t i = 0; i < poses.size(); ++i) working.parts[i].pose = poses[i];
        return working;
    };

    auto emit = [&](int iteration, const std::vector<Pose>& poses, const StepRecord* step) {
        json row;
        row["iteration"] = iteration;
        row["poses"] = json::array();
        for (const Pose& pose : poses) row["poses"].push_back(pose_to_json(pose));
        if (step) {
            row["chamfer_to_estimate"] = step->chamfer_to_estimate;
            row["residuals"] = json::array();
            row["fallbacks"] = json::array();
            for (const PartStepRecord& pr : step->parts) {
                row["residuals"].push_back(pr.residual);
                row["fallbacks"].push_back(pr.translation_fallback);
            }
            row["collisions"] = json::array();
            for (const CollisionEvent& ev : step->collisions) {
                row["collisions"].push_back(
                    {{"part_a", ev.part_a},
                     {"part_b", ev.part_b},
                     {"count", ev.count},
                     {"displacement", {ev.displacement.x, ev.displacement.y, ev.displacement.z}}});
            }
        }
        if (reference) {
            const Scene& staged = with_poses(poses);
            row["scd"] = scene_chamfer(staged, *reference);
            row["pa"] = part_accuracy(staged, *reference);
        }
        out << row.dump() << "\n";
    };

    emit(0, trace.initial_poses, nullptr);
    for (const StepRecord& step : trace.steps) {
        if (step.poses.size() != subject.parts.size())
            throw InvalidInput("write_trace_jsonl: step pose count differs from part count");
        emit(step.iteration, step.poses, &step);
    }
    if (!out) throw IoError("write_trace_jsonl: write failed for " + path);
}

std::vector<TraceRow> read_trace_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_trace_jsonl: cannot open " + path);
    std::vector<TraceRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError("read_trace_jsonl: invalid line in " + path + ": " + e.what());
        }
        TraceRow row;
        try {
            row.iteration = j.at("iteration").get<int>();
            for (const json& pj : j.at("poses")) row.poses.push_back(pose_from_json(pj));
            if (j.contains("chamfer_to_estimate"))
                row.chamfer_to_estimate = j["chamfer_to_estimate"].get<double>();
            if (j.contains("scd")) row.scd_vs_reference = j["scd"].get<double>();
            if (j.contains("pa")) row.pa_vs_reference = j["pa"].get<double>();
            if (j.contains("collisions"))
                row.collision_count = static_cast<int>(j["collisions"].size());
        } catch (const json::exception& e) {
            throw IoError("read_trace_jsonl: malformed row in " + path + ": " + e.what());
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError("read_trace_jsonl: no rows in " + path);
    return rows;
}

}  // namespace assembloid
