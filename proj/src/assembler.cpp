#include "assembloid/assembler.hpp"

#include <cmath>

#include "assembloid/errors.hpp"
#include "assembloid/kdtree.hpp"

namespace assembloid {

AlignMode align_mode_from_string(const std::string& s) {
    if (s == "kabsch") return AlignMode::kabsch;
    if (s == "icp") return AlignMode::icp;
    throw InvalidInput("unknown align mode: " + s);
}

std::string to_string(AlignMode mode) { return mode == AlignMode::kabsch ? "kabsch" : "icp"; }

PushTrigger push_trigger_from_string(const std::string& s) {
    if (s == "above") return PushTrigger::above;
    if (s == "below") return PushTrigger::below;
    throw InvalidInput("unknown push trigger: " + s);
}

std::string to_string(PushTrigger trigger) {
    return trigger == PushTrigger::above ? "above" : "below";
}

int coincident_count(const PointCloud& a, const PointCloud& b, double radius) {
    if (a.empty() || b.empty()) throw InvalidInput("coincident_count: empty cloud");
    if (radius < 0.0) throw InvalidInput("coincident_count: negative radius");
    const KdTree tree(b.points);
    int count = 0;
    for (const Vec3& p : a.points) {
        if (tree.any_within(p, radius)) ++count;
    }
    return count;
}

Scene push_away(const Scene& scene, const CollisionConfig& config,
                std::vector<CollisionEvent>* events) {
    if (scene.parts.size() < 2) return scene;
    if (config.radius < 0.0) throw InvalidInput("push_away: negative radius");

    std::vector<PointCloud> placed;
    placed.reserve(scene.parts.size());
    for (const Part& part : scene.parts) placed.push_back(render_part(part));

    std::vector<KdTree> trees;
    trees.reserve(placed.size());
    for (const PointCloud& cloud : placed) trees.emplace_back(cloud.points);

    // All displacements are computed from the input configuration, then
    // applied at once.
    std::vector<Vec3> displacement(scene.parts.size());
    for (std::size_t i = 0; i < scene.parts.size(); ++i) {
        const Vec3 center = centroid(placed[i]);
        for (std::size_t j = 0; j < scene.parts.size(); ++j) {
            if (i == j) continue;
            PointCloud coincident;
            for (const Vec3& p : placed[i].points) {
                if (trees[j].any_within(p, config.radius)) coincident.points.push_back(p);
            }
            const int count = static_cast<int>(coincident.size());
            const bool fires = config.trigger == PushTrigger::above
                                   ? count >= config.count_threshold
                                   : count < config.count_threshold;
            if (!fires || coincident.empty()) continue;
            const Vec3 delta = (center - centroid(coincident)) * config.scale;
            displacement[i] += delta;
            if (events) {
                events->push_back({static_cast<int>(i), static_cast<int>(j), count, delta});
            }
        }
    }

    Scene out = scene;
    for (std::size_t i = 0; i < out.parts.size(); ++i)
        out.parts[i].pose.translation += displacement[i];
    return out;
}

StepRecord assemble_step(Scene& scene, const Denoiser& denoiser, const NoiseSchedule& schedule,
                         const AssemblyConfig& config, Rng& rng, int iteration) {
    if (scene.parts.empty()) throw InvalidInput("assemble_step: scene has no parts");
    for (const Part& part : scene.parts) {
        if (part.canonical.empty()) throw InvalidInput("assemble_step: part with empty cloud");
    }
    if (config.diffusion_step < 1) throw StepError("assemble_step: diffusion step must be >= 1");
    check_step(schedule, config.diffusion_step);

    const PointCloud rendered = render_scene(scene);
    const auto ranges = part_ranges(scene);

    const NoisedCloud noised = forward_noise(rendered, schedule, config.diffusion_step, rng);
    const PointCloud estimate = denoise_estimate(noised.noisy, denoiser, scene.label,
                                                 config.diffusion_step, config.denoise_mode,
                                                 schedule);

    StepRecord record;
    record.iteration = iteration;
    record.parts.reserve(scene.parts.size());

    for (std::size_t i = 0; i < scene.parts.size(); ++i) {
        PointCloud src, dst;
        src.points.assign(rendered.points.begin() + static_cast<std::ptrdiff_t>(ranges[i].first),
                          rendered.points.begin() + static_cast<std::ptrdiff_t>(ranges[i].second));
        dst.points.assign(estimate.points.begin() + static_cast<std::ptrdiff_t>(ranges[i].first),
                          estimate.points.begin() + static_cast<std::ptrdiff_t>(ranges[i].second));

        PartStepRecord part_record;
        Pose delta;
        try {
            const RigidAlignment a = config.align_mode == AlignMode::kabsch
                                         ? kabsch_align(src, dst)
                                         : icp_align(src, dst, config.icp_max_iterations,
                                                     config.icp_tol);
            delta.rotation = a.rotation;
            delta.translation = a.translation;
            part_record.residual = a.residual;
        } catch (const DegenerateGeometry&) {
            delta.translation = centroid(dst) - centroid(src);
            double ss = 0.0;
            for (std::size_t p = 0; p < src.size(); ++p)
                ss += squared_distance(src.points[p] + delta.translation, dst.points[p]);
            part_record.residual = std::sqrt(ss / static_cast<double>(src.size()));
            part_record.translation_fallback = true;
        }
        scene.parts[i].pose = compose(delta, scene.parts[i].pose);
        record.parts.push_back(part_record);
    }

    if (config.collision.enabled && config.collision.every > 0 &&
        iteration % config.collision.every == 0) {
        scene = push_away(scene, config.collision, &record.collisions);
    }

    record.chamfer_to_estimate = chamfer_distance(render_scene(scene), estimate);
    for (const Part& part : scene.parts) record.poses.push_back(part.pose);
    return record;
}

AssemblyResult assemble(const Scene& initial, const Denoiser& denoiser,
                        const NoiseSchedule& schedule, const AssemblyConfig& config, Rng& rng) {
    if (config.iterations < 0) throw InvalidInput("assemble: negative iteration count");
    AssemblyResult result;
    result.scene = initial;
    for (const Part& part : initial.parts) {
        if (!is_unit(part.pose.rotation)) throw InvalidInput("assemble: non-unit pose rotation");
        result.trace.initial_poses.push_back(part.pose);
    }
    result.trace.steps.reserve(static_cast<std::size_t>(config.iterations));
    for (int t = 1; t <= config.iterations; ++t) {
        result.trace.steps.push_back(
            assemble_step(result.scene, denoiser, schedule, config, rng, t));
    }
    return result;
}

SdsGradients sds_gradient(const Scene& scene, const Denoiser& denoiser,
                          const NoiseSchedule& schedule, int z, double weight, Rng& rng) {
    if (scene.parts.empty()) throw InvalidInput("sds_gradient: scene has no parts");
    if (z < 1) throw StepError("sds_gradient: diffusion step must be >= 1");
    check_step(schedule, z);

    const PointCloud rendered = render_scene(scene);
    const auto ranges = part_ranges(scene);
    const NoisedCloud noised = forward_noise(rendered, schedule, z, rng);
    const PointCloud prediction = denoiser.predict_noise(noised.noisy, scene.label, z);
    if (prediction.size() != rendered.size())
        throw InterfaceViolation("sds_gradient: denoiser changed the point count");

    SdsGradients out;
    out.rendered = rendered;
    out.estimate.points.reserve(rendered.size());
    for (std::size_t i = 0; i < rendered.size(); ++i)
        out.estimate.points.push_back(noised.noisy.points[i] - prediction.points[i]);

    out.from_residual.resize(scene.parts.size());
    out.from_noise.resize(scene.parts.size());

    for (std::size_t part = 0; part < scene.parts.size(); ++part) {
        PartGradient& gr = out.from_residual[part];
        PartGradient& gn = out.from_noise[part];
        for (std::size_t i = ranges[part].first; i < ranges[part].second; ++i) {
            const Vec3& x = rendered.points[i];
            // Residual route: P_t - P*.
            const Vec3 r = (rendered.points[i] - out.estimate.points[i]) * weight;
            // Noise route: prediction - eps, with eps = noisy - P_t.
            const Vec3 eps = noised.noisy.points[i] - rendered.points[i];
            const Vec3 n = (prediction.points[i] - eps) * weight;
            for (int a = 0; a < 3; ++a) {
                const double ra = a == 0 ? r.x : (a == 1 ? r.y : r.z);
                const double na = a == 0 ? n.x : (a == 1 ? n.y : n.z);
                gr.linear(a, 0) += ra * x.x;
                gr.linear(a, 1) += ra * x.y;
                gr.linear(a, 2) += ra * x.z;
                gn.linear(a, 0) += na * x.x;
                gn.linear(a, 1) += na * x.y;
                gn.linear(a, 2) += na * x.z;
            }
            gr.translation += r;
            gn.translation += n;
        }
    }
    return out;
}

}  // namespace assembloid
