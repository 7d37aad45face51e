#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "assembloid/datagen.hpp"
#include "assembloid/errors.hpp"

using namespace assembloid;

namespace {

bool same_cloud(const PointCloud& a, const PointCloud& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.points[i].x != b.points[i].x || a.points[i].y != b.points[i].y ||
            a.points[i].z != b.points[i].z)
            return false;
    }
    return true;
}

std::size_t find_part(const GeneratedScene& g, const std::string& name) {
    for (std::size_t i = 0; i < g.part_names.size(); ++i)
        if (g.part_names[i] == name) return i;
    REQUIRE(false);
    return 0;
}

}  // namespace

TEST_CASE("family names round trip") {
    CHECK(family_from_string("chair") == ShapeFamily::chair);
    CHECK(family_from_string("table") == ShapeFamily::table);
    CHECK(family_from_string("airplane") == ShapeFamily::airplane);
    CHECK(to_string(ShapeFamily::table) == "table");
    CHECK_THROWS_AS(family_from_string("boat"), InvalidInput);
}

TEST_CASE("part counts stay in the documented ranges and both variants occur") {
    const struct {
        ShapeFamily family;
        std::size_t lo, hi;
    } expected[] = {{ShapeFamily::chair, 4, 6},
                    {ShapeFamily::table, 5, 6},
                    {ShapeFamily::airplane, 4, 5}};
    for (const auto& e : expected) {
        std::set<std::size_t> seen;
        for (std::uint64_t seed = 0; seed < 60; ++seed) {
            ShapeSpec spec;
            spec.family = e.family;
            spec.points_per_part = 20;
            spec.seed = seed;
            const GeneratedScene g = generate_scene(spec);
            REQUIRE(g.scene.parts.size() == g.part_names.size());
            CHECK(g.scene.parts.size() >= e.lo);
            CHECK(g.scene.parts.size() <= e.hi);
            seen.insert(g.scene.parts.size());
            for (const Part& part : g.scene.parts)
                CHECK(part.canonical.size() == 20);
        }
        CHECK(seen.size() >= 2);  // optional parts actually toggle
    }
}

TEST_CASE("canonical clouds are centered and scenes stay near the unit cube") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ShapeSpec spec;
        spec.family = static_cast<ShapeFamily>(seed % 3);
        spec.points_per_part = 400;
        spec.seed = 1000 + seed;
        const GeneratedScene g = generate_scene(spec);
        // Surface samples of an origin-centered box: the sample mean is only
        // statistically zero, so the bound is a sampling-noise bound.
        for (const Part& part : g.scene.parts)
            CHECK(norm(centroid(part.canonical)) < 0.08);
        for (const Vec3& p : render_scene(g.scene).points) {
            CHECK(std::abs(p.x) < 0.75);
            CHECK(std::abs(p.y) < 0.75);
            CHECK(std::abs(p.z) < 0.75);
        }
    }
}

TEST_CASE("repeated parts share one cloud") {
    ShapeSpec spec;
    spec.family = ShapeFamily::chair;
    spec.seed = 3;
    spec.points_per_part = 40;
    const GeneratedScene chair = generate_scene(spec);
    const std::size_t leg0 = find_part(chair, "leg_0");
    const std::size_t leg1 = find_part(chair, "leg_1");
    const std::size_t leg2 = find_part(chair, "leg_2");
    CHECK(same_cloud(chair.scene.parts[leg0].canonical, chair.scene.parts[leg1].canonical));
    CHECK(same_cloud(chair.scene.parts[leg0].canonical, chair.scene.parts[leg2].canonical));
    const std::size_t seat = find_part(chair, "seat");
    CHECK_FALSE(same_cloud(chair.scene.parts[leg0].canonical, chair.scene.parts[seat].canonical));

    spec.family = ShapeFamily::airplane;
    const GeneratedScene plane = generate_scene(spec);
    const std::size_t right = find_part(plane, "wing_right");
    const std::size_t left = find_part(plane, "wing_left");
    CHECK(same_cloud(plane.scene.parts[right].canonical, plane.scene.parts[left].canonical));
    // The left wing is that cloud spun half a turn about z.
    const Quat lq = plane.scene.parts[left].pose.rotation;
    CHECK(quat_angle_deg(lq, Quat{}) == doctest::Approx(180.0).epsilon(1e-9));
    CHECK(std::abs(lq.x) < 1e-12);
    CHECK(std::abs(lq.y) < 1e-12);
}

TEST_CASE("generation is deterministic in the seed") {
    ShapeSpec spec;
    spec.family = ShapeFamily::table;
    spec.points_per_part = 30;
    spec.seed = 12;
    const GeneratedScene a = generate_scene(spec);
    const GeneratedScene b = generate_scene(spec);
    REQUIRE(a.scene.parts.size() == b.scene.parts.size());
    for (std::size_t i = 0; i < a.scene.parts.size(); ++i) {
        CHECK(same_cloud(a.scene.parts[i].canonical, b.scene.parts[i].canonical));
        CHECK(norm(a.scene.parts[i].pose.translation - b.scene.parts[i].pose.translation) == 0.0);
    }

    spec.seed = 13;
    const GeneratedScene c = generate_scene(spec);
    bool any_difference = a.scene.parts.size() != c.scene.parts.size();
    if (!any_difference)
        any_difference = !same_cloud(a.scene.parts[0].canonical, c.scene.parts[0].canonical);
    CHECK(any_difference);
}

TEST_CASE("generate_scene validates its inputs") {
    ShapeSpec spec;
    spec.points_per_part = 0;
    CHECK_THROWS_AS(generate_scene(spec), InvalidInput);
    spec.points_per_part = -5;
    CHECK_THROWS_AS(generate_scene(spec), InvalidInput);
}

TEST_CASE("perturbation levels are the documented four") {
    const auto& levels = all_perturbation_levels();
    REQUIRE(levels.size() == 4);
    CHECK(levels[0].name == "slight");
    CHECK(levels[1].name == "moderate");
    CHECK(levels[2].name == "substantial");
    CHECK(levels[3].name == "excessive");
    CHECK(perturbation_level("moderate").max_rotation_deg == 45.0);
    CHECK(perturbation_level("substantial").translation_sigma == 0.30);
    CHECK(perturbation_level("excessive").reset_uniform);
    CHECK_THROWS_AS(perturbation_level("mild"), InvalidInput);
}

TEST_CASE("bounded perturbation respects the rotation cap") {
    ShapeSpec spec;
    spec.family = ShapeFamily::chair;
    spec.points_per_part = 25;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        spec.seed = 2000 + seed;
        const GeneratedScene g = generate_scene(spec);
        Rng rng(derive_seed(seed, 11));
        const Scene pert = perturb(g.scene, perturbation_level("slight"), rng);
        REQUIRE(pert.parts.size() == g.scene.parts.size());
        for (std::size_t i = 0; i < pert.parts.size(); ++i) {
            CHECK(quat_angle_deg(pert.parts[i].pose.rotation, g.scene.parts[i].pose.rotation) <=
                  15.0 + 1e-9);
        }
    }
}

TEST_CASE("rotation pivots on the part centroid") {
    ShapeSpec spec;
    spec.family = ShapeFamily::table;
    spec.points_per_part = 40;
    spec.seed = 21;
    const GeneratedScene g = generate_scene(spec);
    const PerturbationLevel rotation_only{"probe", 60.0, 0.0, false};
    Rng rng(301);
    const Scene pert = perturb(g.scene, rotation_only, rng);
    for (std::size_t i = 0; i < pert.parts.size(); ++i) {
        const Vec3 before = centroid(render_part(g.scene.parts[i]));
        const Vec3 after = centroid(render_part(pert.parts[i]));
        CHECK(norm(after - before) < 1e-12);
    }
}

TEST_CASE("excessive reset is uniform over rotations") {
    // Geodesic angle of a uniform rotation has CDF (theta - sin theta) / pi.
    std::vector<double> angles;
    ShapeSpec spec;
    spec.family = ShapeFamily::chair;
    spec.points_per_part = 10;
    for (std::uint64_t seed = 0; angles.size() < 600; ++seed) {
        spec.seed = 3000 + seed;
        const GeneratedScene g = generate_scene(spec);
        Rng rng(derive_seed(seed, 12));
        const Scene pert = perturb(g.scene, perturbation_level("excessive"), rng);
        for (const Part& part : pert.parts) {
            angles.push_back(quat_angle_deg(part.pose.rotation, Quat{}) * M_PI / 180.0);
            CHECK(std::abs(part.pose.translation.x) <= 0.5);
            CHECK(std::abs(part.pose.translation.y) <= 0.5);
            CHECK(std::abs(part.pose.translation.z) <= 0.5);
        }
    }
    std::sort(angles.begin(), angles.end());
    const double n = static_cast<double>(angles.size());
    double d_stat = 0.0;
    for (std::size_t i = 0; i < angles.size(); ++i) {
        const double cdf = (angles[i] - std::sin(angles[i])) / M_PI;
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d_stat = std::max({d_stat, std::abs(cdf - lo), std::abs(cdf - hi)});
    }
    // 1% critical value of the Kolmogorov distribution.
    CHECK(d_stat * std::sqrt(n) < 1.628);
}

TEST_CASE("perturb is deterministic in the rng seed") {
    ShapeSpec spec;
    spec.family = ShapeFamily::airplane;
    spec.points_per_part = 20;
    spec.seed = 31;
    const GeneratedScene g = generate_scene(spec);
    Rng rng_a(777), rng_b(777);
    const Scene a = perturb(g.scene, perturbation_level("moderate"), rng_a);
    const Scene b = perturb(g.scene, perturbation_level("moderate"), rng_b);
    for (std::size_t i = 0; i < a.parts.size(); ++i) {
        CHECK(norm(a.parts[i].pose.translation - b.parts[i].pose.translation) == 0.0);
        const Quat qa = a.parts[i].pose.rotation;
        const Quat qb = b.parts[i].pose.rotation;
        CHECK(qa.w == qb.w);
        CHECK(qa.x == qb.x);
        CHECK(qa.y == qb.y);
        CHECK(qa.z == qb.z);
    }
}
