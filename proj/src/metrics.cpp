#include "assembloid/metrics.hpp"

#include <cmath>
#include <limits>

#include "assembloid/errors.hpp"

namespace assembloid {

namespace {

void check_pairing(const Scene& predicted, const Scene& reference) {
    if (predicted.parts.empty() || reference.parts.empty())
        throw InvalidInput("scene metrics: empty scene");
    if (predicted.parts.size() != reference.parts.size())
        throw CorrespondenceError("scene metrics: part counts differ");
}

double euler_rmse_deg(const Quat& a, const Quat& b) {
    // ZYX (yaw-pitch-roll) angles of each rotation; differences wrapped to
    // [-180, 180] before the RMS.
    auto zyx = [](const Quat& q) {
        const Mat3 r = rotation_matrix(normalized(q));
        const double sy = -r(2, 0);
        const double cy = std::sqrt(std::max(0.0, 1.0 - sy * sy));
        double yaw, pitch, roll;
        pitch = std::asin(std::clamp(sy, -1.0, 1.0));
        if (cy > 1e-9) {
            yaw = std::atan2(r(1, 0), r(0, 0));
            roll = std::atan2(r(2, 1), r(2, 2));
        } else {
            yaw = std::atan2(-r(0, 1), r(1, 1));
            roll = 0.0;
        }
        return Vec3{roll, pitch, yaw};
    };
    const Vec3 ea = zyx(a), eb = zyx(b);
    auto wrap = [](double d) {
        const double deg = d * 180.0 / 3.14159265358979323846;
        double w = std::fmod(deg + 180.0, 360.0);
        if (w < 0.0) w += 360.0;
        return w - 180.0;
    };
    const double dx = wrap(ea.x - eb.x), dy = wrap(ea.y - eb.y), dz = wrap(ea.z - eb.z);
    return std::sqrt((dx * dx + dy * dy + dz * dz) / 3.0);
}

}  // namespace

double scene_chamfer(const Scene& predicted, const Scene& reference) {
    if (predicted.parts.empty() || reference.parts.empty())
        throw InvalidInput("scene_chamfer: empty scene");
    return chamfer_distance(render_scene(predicted), render_scene(reference));
}

double part_accuracy(const Scene& predicted, const Scene& reference, double threshold) {
    check_pairing(predicted, reference);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.parts.size(); ++i) {
        const double cd =
            chamfer_distance(render_part(predicted.parts[i]), render_part(reference.parts[i]));
        if (cd < threshold) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(predicted.parts.size());
}

double fair_part_accuracy(const Scene& predicted, const Scene& reference, double threshold) {
    check_pairing(predicted, reference);
    std::size_t hits = 0;
    for (const Part& p : predicted.parts) {
        const PointCloud placed = render_part(p);
        double best = std::numeric_limits<double>::max();
        for (const Part& r : reference.parts)
            best = std::min(best, chamfer_distance(placed, render_part(r)));
        if (best < threshold) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(predicted.parts.size());
}

double rmse_translation(const Scene& predicted, const Scene& reference) {
    check_pairing(predicted, reference);
    double ss = 0.0;
    for (std::size_t i = 0; i < predicted.parts.size(); ++i)
        ss += squared_distance(predicted.parts[i].pose.translation,
                               reference.parts[i].pose.translation);
    return std::sqrt(ss / static_cast<double>(predicted.parts.size()));
}

double rmse_rotation_deg(const Scene& predicted, const Scene& reference, RotationErrorMode mode) {
    check_pairing(predicted, reference);
    double ss = 0.0;
    for (std::size_t i = 0; i < predicted.parts.size(); ++i) {
        const double e = mode == RotationErrorMode::geodesic
                             ? quat_angle_deg(predicted.parts[i].pose.rotation,
                                              reference.parts[i].pose.rotation)
                             : euler_rmse_deg(predicted.parts[i].pose.rotation,
                                              reference.parts[i].pose.rotation);
        ss += e * e;
    }
    return std::sqrt(ss / static_cast<double>(predicted.parts.size()));
}

SceneMetrics evaluate_scene(const Scene& predicted, const Scene& reference, double threshold,
                            RotationErrorMode mode) {
    check_pairing(predicted, reference);
    SceneMetrics out;
    out.scd = scene_chamfer(predicted, reference);
    out.rmse_translation = rmse_translation(predicted, reference);
    out.rmse_rotation_deg = rmse_rotation_deg(predicted, reference, mode);

    std::vector<PointCloud> ref_placed;
    ref_placed.reserve(reference.parts.size());
    for (const Part& r : reference.parts) ref_placed.push_back(render_part(r));

    std::size_t hits = 0, fair_hits = 0;
    for (std::size_t i = 0; i < predicted.parts.size(); ++i) {
        const PointCloud placed = render_part(predicted.parts[i]);
        PartMetrics pm;
        pm.chamfer_identity = chamfer_distance(placed, ref_placed[i]);
        pm.chamfer_best = std::numeric_limits<double>::max();
        for (std::size_t j = 0; j < ref_placed.size(); ++j) {
            const double cd = j == i ? pm.chamfer_identity : chamfer_distance(placed, ref_placed[j]);
            if (cd < pm.chamfer_best) {
                pm.chamfer_best = cd;
                pm.best_match = static_cast<int>(j);
            }
        }
        pm.translation_error = std::sqrt(squared_distance(predicted.parts[i].pose.translation,
                                                          reference.parts[i].pose.translation));
        pm.rotation_error_deg =
            mode == RotationErrorMode::geodesic
                ? quat_angle_deg(predicted.parts[i].pose.rotation, reference.parts[i].pose.rotation)
                : euler_rmse_deg(predicted.parts[i].pose.rotation, reference.parts[i].pose.rotation);
        if (pm.chamfer_identity < threshold) ++hits;
        if (pm.chamfer_best < threshold) ++fair_hits;
        out.parts.push_back(pm);
    }
    out.pa = static_cast<double>(hits) / static_cast<double>(predicted.parts.size());
    out.fpa = static_cast<double>(fair_hits) / static_cast<double>(predicted.parts.size());
    return out;
}

}  // namespace assembloid
