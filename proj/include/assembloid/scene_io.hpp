#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "assembloid/assembler.hpp"
#include "assembloid/geometry.hpp"

namespace assembloid {

// On-disk scene layout: <dir>/manifest.json plus one binary PLY per part.
// Poses are stored as {"quat": [w, x, y, z], "trans": [x, y, z]} with full
// double precision, so save/load round-trips exactly.
void save_scene(const std::string& dir, const Scene& scene,
                const std::vector<std::string>& part_names, std::uint64_t seed);

struct LoadedScene {
    Scene scene;
    std::vector<std::string> part_names;
    std::uint64_t seed = 0;
};

LoadedScene load_scene(const std::string& dir);

// One JSON object per line: the initial pose set (iteration 0) followed by
// every executed iteration. When reference is non-null each line also carries
// the scene chamfer and part accuracy against it, computed from the recorded
// poses.
void write_trace_jsonl(const std::string& path, const IterationTrace& trace,
                       const Scene& subject, const Scene* reference);

struct TraceRow {
    int iteration = 0;
    std::vector<Pose> poses;
    double chamfer_to_estimate = -1.0;  // absent on the initial row
    double scd_vs_reference = -1.0;     // absent when written without a reference
    double pa_vs_reference = -1.0;
    int collision_count = 0;
};

std::vector<TraceRow> read_trace_jsonl(const std::string& path);

}  // namespace assembloid
