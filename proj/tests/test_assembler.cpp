#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "assembloid/assembler.hpp"
#include "assembloid/datagen.hpp"
#include "assembloid/errors.hpp"
#include "assembloid/metrics.hpp"

using namespace assembloid;

namespace {

PointCloud box_cloud(const Vec3& center, const Vec3& half, int per_axis) {
    // Regular grid filling the box; dense enough for stable overlap counts.
    PointCloud cloud;
    for (int ix = 0; ix < per_axis; ++ix)
        for (int iy = 0; iy < per_axis; ++iy)
            for (int iz = 0; iz < per_axis; ++iz) {
                const double fx = per_axis == 1 ? 0.5 : static_cast<double>(ix) / (per_axis - 1);
                const double fy = per_axis == 1 ? 0.5 : static_cast<double>(iy) / (per_axis - 1);
                const double fz = per_axis == 1 ? 0.5 : static_cast<double>(iz) / (per_axis - 1);
                cloud.points.push_back({center.x + (2.0 * fx - 1.0) * half.x,
                                        center.y + (2.0 * fy - 1.0) * half.y,
                                        center.z + (2.0 * fz - 1.0) * half.z});
            }
    return cloud;
}

int brute_coincident(const PointCloud& a, const PointCloud& b, double radius) {
    int count = 0;
    for (const Vec3& p : a.points) {
        for (const Vec3& q : b.points) {
            if (squared_distance(p, q) <= radius * radius) {
                ++count;
                break;
            }
        }
    }
    return count;
}

Scene slight_chair(std::uint64_t seed, Scene* ground_truth = nullptr) {
    ShapeSpec spec;
    spec.family = ShapeFamily::chair;
    spec.points_per_part = 60;
    spec.seed = seed;
    const Scene gt = generate_scene(spec).scene;
    if (ground_truth) *ground_truth = gt;
    Rng rng(derive_seed(seed, 99));
    return perturb(gt, perturbation_level("slight"), rng);
}

}  // namespace

TEST_CASE("coincident_count matches the quadratic oracle") {
    Rng rng(101);
    for (int c = 0; c < 120; ++c) {
        PointCloud a, b;
        const std::size_t na = 1 + rng.uniform_index(24), nb = 1 + rng.uniform_index(24);
        for (std::size_t i = 0; i < na; ++i)
            a.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        for (std::size_t i = 0; i < nb; ++i)
            b.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        const double radius = rng.uniform(0.0, 0.8);
        CHECK(coincident_count(a, b, radius) == brute_coincident(a, b, radius));
    }
}

TEST_CASE("coincident_count is directional") {
    PointCloud a, b;
    a.points = {{0.0, 0.0, 0.0}, {5.0, 0.0, 0.0}, {6.0, 0.0, 0.0}};
    b.points = {{0.0, 0.0, 0.0}};
    CHECK(coincident_count(a, b, 0.1) == 1);
    CHECK(coincident_count(b, a, 0.1) == 1);
    b.points.push_back({5.0, 0.0, 0.1});
    CHECK(coincident_count(a, b, 0.2) == 2);

    CHECK_THROWS_AS(coincident_count(PointCloud{}, a, 0.1), InvalidInput);
    CHECK_THROWS_AS(coincident_count(a, b, -0.5), InvalidInput);
}

TEST_CASE("push_away separates overlapping parts and reduces the overlap") {
    // Two same-size boxes offset along x so their overlap region is off-center.
    Scene scene;
    scene.parts.push_back({box_cloud({0.0, 0.0, 0.0}, {0.3, 0.2, 0.2}, 6), Pose{}});
    scene.parts.push_back({box_cloud({0.25, 0.0, 0.0}, {0.3, 0.2, 0.2}, 6), Pose{}});

    CollisionConfig config;
    config.enabled = true;
    config.radius = 0.05;
    config.count_threshold = 5;
    config.scale = 0.5;

    const int before = coincident_count(render_part(scene.parts[0]),
                                        render_part(scene.parts[1]), config.radius);
    REQUIRE(before >= config.count_threshold);

    std::vector<CollisionEvent> events;
    const Scene pushed = push_away(scene, config, &events);
    const int after = coincident_count(render_part(pushed.parts[0]),
                                       render_part(pushed.parts[1]), config.radius);
    CHECK(after < before);
    CHECK(events.size() == 2);  // both ordered pairs fire

    // Parts move in opposite directions along the offset axis.
    CHECK(pushed.parts[0].pose.translation.x < -1e-6);
    CHECK(pushed.parts[1].pose.translation.x > 1e-6);
}

TEST_CASE("push_away displacements come from the pre-push configuration") {
    Scene scene;
    scene.parts.push_back({box_cloud({0.0, 0.0, 0.0}, {0.3, 0.2, 0.2}, 5), Pose{}});
    scene.parts.push_back({box_cloud({0.2, 0.05, 0.0}, {0.3, 0.2, 0.2}, 5), Pose{}});

    CollisionConfig config;
    config.enabled = true;
    config.radius = 0.08;
    config.count_threshold = 1;
    config.scale = 0.4;

    // Independent computation of both displacements from the input scene.
    std::vector<Vec3> expected(2);
    for (int i = 0; i < 2; ++i) {
        const int j = 1 - i;
        const PointCloud pi = render_part(scene.parts[static_cast<std::size_t>(i)]);
        const PointCloud pj = render_part(scene.parts[static_cast<std::size_t>(j)]);
        PointCloud coincident;
        for (const Vec3& p : pi.points) {
            for (const Vec3& q : pj.points) {
                if (squared_distance(p, q) <= config.radius * config.radius) {
                    coincident.points.push_back(p);
                    break;
                }
            }
        }
        REQUIRE_FALSE(coincident.empty());
        expected[static_cast<std::size_t>(i)] =
            (centroid(pi) - centroid(coincident)) * config.scale;
    }

    const Scene pushed = push_away(scene, config);
    for (int i = 0; i < 2; ++i)
        CHECK(norm(pushed.parts[static_cast<std::size_t>(i)].pose.translation -
                   expected[static_cast<std::size_t>(i)]) < 1e-12);
}

TEST_CASE("push_away trigger modes") {
    Scene scene;
    scene.parts.push_back({box_cloud({0.0, 0.0, 0.0}, {0.2, 0.2, 0.2}, 4), Pose{}});
    scene.parts.push_back({box_cloud({0.38, 0.0, 0.0}, {0.2, 0.2, 0.2}, 4), Pose{}});

    CollisionConfig config;
    config.enabled = true;
    config.radius = 0.03;
    config.scale = 0.5;

    const int count = coincident_count(render_part(scene.parts[0]),
                                       render_part(scene.parts[1]), config.radius);
    REQUIRE(count > 0);

    // Above a threshold larger than the overlap: no move.
    config.trigger = PushTrigger::above;
    config.count_threshold = count + 1;
    Scene unchanged = push_away(scene, config);
    CHECK(norm(unchanged.parts[0].pose.translation) == 0.0);

    // Below the same threshold: fires.
    config.trigger = PushTrigger::below;
    std::vector<CollisionEvent> events;
    Scene pushed = push_away(scene, config, &events);
    CHECK_FALSE(events.empty());
    CHECK(norm(pushed.parts[0].pose.translation) > 0.0);

    // Zero overlap never moves anything, whatever the trigger says.
    Scene apart;
    apart.parts.push_back({box_cloud({0.0, 0.0, 0.0}, {0.1, 0.1, 0.1}, 3), Pose{}});
    apart.parts.push_back({box_cloud({5.0, 0.0, 0.0}, {0.1, 0.1, 0.1}, 3), Pose{}});
    Scene still = push_away(apart, config);
    CHECK(norm(still.parts[0].pose.translation) == 0.0);
    CHECK(norm(still.parts[1].pose.translation) == 0.0);
}

TEST_CASE("single part scenes pass through push_away") {
    Scene scene;
    scene.parts.push_back({box_cloud({0.0, 0.0, 0.0}, {0.1, 0.1, 0.1}, 3), Pose{}});
    CollisionConfig config;
    config.enabled = true;
    const Scene out = push_away(scene, config);
    CHECK(norm(out.parts[0].pose.translation) == 0.0);
}

TEST_CASE("one oracle step snaps a slightly perturbed scene home") {
    Scene gt;
    Scene scene = slight_chair(301, &gt);
    const MemorizedShapeDenoiser oracle(render_scene(gt));
    const NoiseSchedule schedule = linear_schedule(200, 0.99);
    AssemblyConfig config;
    config.diffusion_step = 2;

    Rng rng(302);
    const StepRecord record = assemble_step(scene, oracle, schedule, config, rng, 1);
    REQUIRE(record.parts.size() == scene.parts.size());
    CHECK(record.chamfer_to_estimate < 1e-12);
    CHECK(scene_chamfer(scene, gt) < 1e-12);
    for (const PartStepRecord& pr : record.parts) CHECK_FALSE(pr.translation_fallback);
}

TEST_CASE("icp alignment also assembles the slight case") {
    Scene gt;
    Scene scene = slight_chair(303, &gt);
    const MemorizedShapeDenoiser oracle(render_scene(gt));
    const NoiseSchedule schedule = linear_schedule(200, 0.99);
    AssemblyConfig config;
    config.align_mode = AlignMode::icp;
    config.iterations = 10;

    Rng rng(304);
    const AssemblyResult result = assemble(scene, oracle, schedule, config, rng);
    CHECK(scene_chamfer(result.scene, gt) < 1e-6);
}

TEST_CASE("degenerate part slices fall back to a centroid move") {
    Scene gt;
    PointCloud pair;
    pair.points = {{0.0, 0.0, 0.0}, {0.1, 0.0, 0.0}};
    gt.parts.push_back({box_cloud({0.0, 0.0, 0.3}, {0.2, 0.2, 0.1}, 4), Pose{}});
    gt.parts.push_back({pair, Pose{}});

    Scene scene = gt;
    scene.parts[1].pose.translation = {0.05, -0.02, 0.03};

    const MemorizedShapeDenoiser oracle(render_scene(gt));
    const NoiseSchedule schedule = linear_schedule(200, 0.99);
    AssemblyConfig config;

    Rng rng(305);
    const Quat rotation_before = scene.parts[1].pose.rotation;
    const StepRecord record = assemble_step(scene, oracle, schedule, config, rng, 1);
    CHECK_FALSE(record.parts[0].translation_fallback);
    CHECK(record.parts[1].translation_fallback);
    // The fallback translates only; the part keeps its orientation.
    CHECK(quat_angle_deg(scene.parts[1].pose.rotation, rotation_before) < 1e-12);
    CHECK(norm(scene.parts[1].pose.translation) < 1e-9);
}

TEST_CASE("assemble records one step per iteration") {
    Scene gt;
    const Scene scene = slight_chair(306, &gt);
    const MemorizedShapeDenoiser oracle(render_scene(gt));
    const NoiseSchedule schedule = linear_schedule(200, 0.99);
    AssemblyConfig config;
    config.iterations = 7;

    Rng rng(307);
    const AssemblyResult result = assemble(scene, oracle, schedule, config, rng);
    REQUIRE(result.trace.steps.size() == 7);
    REQUIRE(result.trace.initial_poses.size() == scene.parts.size());
    for (int t = 0; t < 7; ++t)
        CHECK(result.trace.steps[static_cast<std::size_t>(t)].iteration == t + 1);
    for (std::size_t i = 0; i < scene.parts.size(); ++i) {
        CHECK(quat_angle_deg(result.trace.initial_poses[i].rotation,
                             scene.parts[i].pose.rotation) < 1e-12);
        CHECK(norm(result.trace.steps.back().poses[i].translation -
                   result.scene.parts[i].pose.translation) < 1e-15);
    }

    config.iterations = 0;
    Rng rng2(308);
    const AssemblyResult empty = assemble(scene, oracle, schedule, config, rng2);
    CHECK(empty.trace.steps.empty());
    CHECK(scene_chamfer(empty.scene, scene) == 0.0);
}

TEST_CASE("assemble validates its inputs") {
    Scene gt;
    Scene scene = slight_chair(309, &gt);
    const MemorizedShapeDenoiser oracle(render_scene(gt));
    const NoiseSchedule schedule = linear_schedule(200, 0.99);
    AssemblyConfig config;

    Rng rng(310);
    scene.parts[0].pose.rotation = {2.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(assemble(scene, oracle, schedule, config, rng), InvalidInput);

    Scene empty;
    CHECK_THROWS_AS(assemble_step(empty, oracle, schedule, config, rng, 1), InvalidInput);

    Scene ok = slight_chair(311);
    config.diffusion_step = 0;
    CHECK_THROWS_AS(assemble_step(ok, oracle, schedule, config, rng, 1), StepError);
    config.diffusion_step = 201;
    CHECK_THROWS_AS(assemble_step(ok, oracle, schedule, config, rng, 1), StepError);
}

TEST_CASE("collision stride applies the push only on matching iterations") {
    // Two boxes that start overlapping and a denoiser that memorizes the
    // overlapped state, so only push_away can move them.
    Scene frozen;
    frozen.parts.push_back({box_cloud({0.0, 0.0, 0.0}, {0.3, 0.2, 0.2}, 5), Pose{}});
    frozen.parts.push_back({box_cloud({0.2, 0.0, 0.0}, {0.3, 0.2, 0.2}, 5), Pose{}});
    const MemorizedShapeDenoiser oracle(render_scene(frozen));
    const NoiseSchedule schedule = linear_schedule(200, 0.99);

    AssemblyConfig config;
    config.iterations = 4;
    config.collision.enabled = true;
    config.collision.radius = 0.05;
    config.collision.count_threshold = 1;
    config.collision.every = 2;

    Rng rng(312);
    const AssemblyResult result = assemble(frozen, oracle, schedule, config, rng);
    REQUIRE(result.trace.steps.size() == 4);
    CHECK(result.trace.steps[0].collisions.empty());       // iteration 1
    CHECK_FALSE(result.trace.steps[1].collisions.empty()); // iteration 2
    CHECK(result.trace.steps[2].collisions.empty());
    CHECK_FALSE(result.trace.steps[3].collisions.empty());

    config.collision.enabled = false;
    Rng rng2(313);
    const AssemblyResult off = assemble(frozen, oracle, schedule, config, rng2);
    for (const StepRecord& step : off.trace.steps) CHECK(step.collisions.empty());
}

TEST_CASE("the two distillation gradient routes agree") {
    const NoiseSchedule schedule = linear_schedule(200, 0.99);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ShapeSpec spec;
        spec.family = seed % 2 ? ShapeFamily::table : ShapeFamily::airplane;
        spec.points_per_part = 40;
        spec.seed = 400 + seed;
        const Scene gt = generate_scene(spec).scene;
        Rng prng(derive_seed(seed, 7));
        const Scene scene = perturb(gt, perturbation_level("moderate"), prng);
        const MemorizedShapeDenoiser oracle(render_scene(gt));

        Rng rng(derive_seed(seed, 8));
        const SdsGradients grads = sds_gradient(scene, oracle, schedule, 2, 1.7, rng);
        REQUIRE(grads.from_residual.size() == scene.parts.size());
        for (std::size_t p = 0; p < scene.parts.size(); ++p) {
            const PartGradient& a = grads.from_residual[p];
            const PartGradient& b = grads.from_noise[p];
            CHECK(norm(a.translation - b.translation) < 1e-8);
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    CHECK(std::abs(a.linear(r, c) - b.linear(r, c)) < 1e-8);
        }
    }
}

TEST_CASE("translation gradient matches finite differences of the frozen objective") {
    const NoiseSchedule schedule = linear_schedule(200, 0.99);
    ShapeSpec spec;
    spec.family = ShapeFamily::chair;
    spec.points_per_part = 50;
    spec.seed = 500;
    const Scene gt = generate_scene(spec).scene;
    Rng prng(501);
    const Scene scene = perturb(gt, perturbation_level("moderate"), prng);
    const MemorizedShapeDenoiser oracle(render_scene(gt));

    const double weight = 0.8;
    Rng rng(502);
    const SdsGradients grads = sds_gradient(scene, oracle, schedule, 2, weight, rng);
    const auto ranges = part_ranges(scene);

    // Objective with the estimate frozen: L = w/2 sum |x_i + delta - est_i|^2.
    const double h = 1e-6;
    for (std::size_t p = 0; p < scene.parts.size(); ++p) {
        auto objective = [&](const Vec3& delta) {
            double acc = 0.0;
            for (std::size_t i = ranges[p].first; i < ranges[p].second; ++i)
                acc += squared_norm(grads.rendered.points[i] + delta - grads.estimate.points[i]);
            return 0.5 * weight * acc;
        };
        const Vec3 g = grads.from_residual[p].translation;
        const Vec3 fd{
            (objective({h, 0, 0}) - objective({-h, 0, 0})) / (2 * h),
            (objective({0, h, 0}) - objective({0, -h, 0})) / (2 * h),
            (objective({0, 0, h}) - objective({0, 0, -h})) / (2 * h)};
        const double rel = norm(g - fd) / std::max(norm(fd), 1e-8);
        CHECK(rel < 1e-4);
    }
}

TEST_CASE("sds_gradient validates the step") {
    const NoiseSchedule schedule = linear_schedule(200, 0.99);
    ShapeSpec spec;
    spec.family = ShapeFamily::chair;
    spec.seed = 510;
    const Scene gt = generate_scene(spec).scene;
    const MemorizedShapeDenoiser oracle(render_scene(gt));
    Rng rng(511);
    CHECK_THROWS_AS(sds_gradient(gt, oracle, schedule, 0, 1.0, rng), StepError);
    CHECK_THROWS_AS(sds_gradient(Scene{}, oracle, schedule, 2, 1.0, rng), InvalidInput);
}
