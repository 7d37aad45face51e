#pragma once

#include <vector>

#include "assembloid/geometry.hpp"

namespace assembloid {

// How per-part rotation error is measured: geodesic angle in degrees, or
// root-mean-square over wrapped ZYX Euler angle differences.
enum class RotationErrorMode { geodesic, euler };

struct PartMetrics {
    double chamfer_identity = 0.0;   // against the same-index reference part
    double chamfer_best = 0.0;       // against the best-matching reference part
    int best_match = -1;             // index of that reference part
    double translation_error = 0.0;
    double rotation_error_deg = 0.0;
};

struct SceneMetrics {
    double scd = 0.0;        // chamfer between full scene renders
    double pa = 0.0;         // fraction of parts with index-matched chamfer < threshold
    double fpa = 0.0;        // same, but each part may claim its best reference part
    double rmse_translation = 0.0;
    double rmse_rotation_deg = 0.0;
    std::vector<PartMetrics> parts;
};

inline constexpr double kPartAccuracyThreshold = 0.01;

double scene_chamfer(const Scene& predicted, const Scene& reference);
double part_accuracy(const Scene& predicted, const Scene& reference,
                     double threshold = kPartAccuracyThreshold);
// Best-match variant: parts are matched with replacement (several predicted
// parts may claim the same reference part), so this is never below
// part_accuracy for the same scenes.
double fair_part_accuracy(const Scene& predicted, const Scene& reference,
                          double threshold = kPartAccuracyThreshold);
double rmse_translation(const Scene& predicted, const Scene& reference);
double rmse_rotation_deg(const Scene& predicted, const Scene& reference,
                         RotationErrorMode mode = RotationErrorMode::geodesic);

SceneMetrics evaluate_scene(const Scene& predicted, const Scene& reference,
                            double threshold = kPartAccuracyThreshold,
                            RotationErrorMode mode = RotationErrorMode::geodesic);

}  // namespace assembloid
