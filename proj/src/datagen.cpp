#include "assembloid/datagen.hpp"

#include <cmath>

#include "assembloid/errors.hpp"

namespace assembloid {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Uniform sample on the surface of an axis-aligned box centred at the
// origin, faces weighted by area.
PointCloud sample_box(Rng& rng, double sx, double sy, double sz, int count) {
    const double ax = sy * sz, ay = sx * sz, az = sx * sy;
    const double total = 2.0 * (ax + ay + az);
    PointCloud cloud;
    cloud.points.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double pick = rng.uniform(0.0, total);
        const double u = rng.uniform(), v = rng.uniform();
        Vec3 p;
        if (pick < 2.0 * ax) {
            p = {pick < ax ? -sx / 2 : sx / 2, (u - 0.5) * sy, (v - 0.5) * sz};
        } else if (pick < 2.0 * (ax + ay)) {
            p = {(u - 0.5) * sx, pick < 2.0 * ax + ay ? -sy / 2 : sy / 2, (v - 0.5) * sz};
        } else {
            p = {(u - 0.5) * sx, (v - 0.5) * sy, pick < 2.0 * (ax + ay) + az ? -sz / 2 : sz / 2};
        }
        cloud.points.push_back(p);
    }
    return cloud;
}

void add_part(GeneratedScene& out, const std::string& name, PointCloud canonical,
              const Pose& pose) {
    Part part;
    part.canonical = std::move(canonical);
    part.pose = pose;
    out.scene.parts.push_back(std::move(part));
    out.part_names.push_back(name);
}

Pose at(double x, double y, double z) {
    Pose p;
    p.translation = {x, y, z};
    return p;
}

GeneratedScene make_chair(Rng& rng, const ShapeSpec& spec) {
    GeneratedScene out;
    out.scene.label = "chair";

    const int legs = rng.uniform() < 0.5 ? 3 : 4;
    const double leg_w = rng.uniform(0.04, 0.07);
    const double leg_h = rng.uniform(0.35, 0.5);
    const double seat_w = rng.uniform(0.35, 0.5);
    const double seat_d = rng.uniform(0.35, 0.5);
    const double seat_t = rng.uniform(0.05, 0.09);
    const bool back = rng.uniform() < 0.8;
    const double back_h = rng.uniform(0.3, 0.45);
    const double back_t = rng.uniform(0.04, 0.07);

    const PointCloud leg_cloud = sample_box(rng, leg_w, leg_w, leg_h, spec.points_per_part);
    const double base = -0.5;  // floor
    const double lx = seat_w / 2 - leg_w / 2, ly = seat_d / 2 - leg_w / 2;
    const double leg_z = base + leg_h / 2;
    add_part(out, "leg_0", leg_cloud, at(lx, ly, leg_z));
    add_part(out, "leg_1", leg_cloud, at(-lx, ly, leg_z));
    add_part(out, "leg_2", leg_cloud, at(-lx, -ly, leg_z));
    if (legs == 4) add_part(out, "leg_3", leg_cloud, at(lx, -ly, leg_z));

    const double seat_z = base + leg_h + seat_t / 2;
    add_part(out, "seat", sample_box(rng, seat_w, seat_d, seat_t, spec.points_per_part),
             at(0.0, 0.0, seat_z));
    if (back) {
        add_part(out, "back", sample_box(rng, seat_w, back_t, back_h, spec.points_per_part),
                 at(0.0, seat_d / 2 - back_t / 2, seat_z + seat_t / 2 + back_h / 2));
    }
    return out;
}

GeneratedScene make_table(Rng& rng, const ShapeSpec& spec) {
    GeneratedScene out;
    out.scene.label = "table";

    const double leg_w = rng.uniform(0.04, 0.08);
    const double leg_h = rng.uniform(0.4, 0.55);
    const double top_w = rng.uniform(0.55, 0.8);
    const double top_d = rng.uniform(0.4, 0.7);
    const double top_t = rng.uniform(0.04, 0.08);
    const bool shelf = rng.uniform() < 0.5;

    const PointCloud leg_cloud = sample_box(rng, leg_w, leg_w, leg_h, spec.points_per_part);
    const double base = -0.5;
    const double lx = top_w / 2 - leg_w, ly = top_d / 2 - leg_w;
    const double leg_z = base + leg_h / 2;
    add_part(out, "leg_0", leg_cloud, at(lx, ly, leg_z));
    add_part(out, "leg_1", leg_cloud, at(-lx, ly, leg_z));
    add_part(out, "leg_2", leg_cloud, at(-lx, -ly, leg_z));
    add_part(out, "leg_3", leg_cloud, at(lx, -ly, leg_z));

    add_part(out, "top", sample_box(rng, top_w, top_d, top_t, spec.points_per_part),
             at(0.0, 0.0, base + leg_h + top_t / 2));
    if (shelf) {
        add_part(out, "shelf",
                 sample_box(rng, top_w * 0.8, top_d * 0.8, top_t * 0.8, spec.points_per_part),
                 at(0.0, 0.0, base + leg_h * 0.4));
    }
    return out;
}

GeneratedScene make_airplane(Rng& rng, const ShapeSpec& spec) {
    GeneratedScene out;
    out.scene.label = "airplane";

    const double fus_l = rng.uniform(0.7, 0.95);
    const double fus_w = rng.uniform(0.08, 0.14);
    const double wing_span = rng.uniform(0.3, 0.45);  // per side
    const double wing_chord = rng.uniform(0.12, 0.2);
    const double wing_t = rng.uniform(0.02, 0.04);
    const double fin_h = rng.uniform(0.12, 0.2);
    const bool tailplane = rng.uniform() < 0.5;

    add_part(out, "fuselage", sample_box(rng, fus_w, fus_l, fus_w, spec.points_per_part),
             at(0.0, 0.0, 0.0));

    // One wing cloud; the left wing is the same part rotated half a turn.
    const PointCloud wing_cloud = sample_box(rng, wing_span, wing_chord, wing_t, spec.points_per_part);
    const double wing_x = fus_w / 2 + wing_span / 2;
    add_part(out, "wing_right", wing_cloud, at(wing_x, 0.05, 0.0));
    Pose left = at(-wing_x, 0.05, 0.0);
    left.rotation = quat_from_axis_angle({0.0, 0.0, 1.0}, kPi);
    add_part(out, "wing_left", wing_cloud, left);

    add_part(out, "fin", sample_box(rng, wing_t, fin_h * 0.8, fin_h, spec.points_per_part),
             at(0.0, -fus_l / 2 + fin_h * 0.4, fus_w / 2 + fin_h / 2));
    if (tailplane) {
        add_part(out, "tailplane",
                 sample_box(rng, wing_span * 0.8, wing_chord * 0.7, wing_t, spec.points_per_part),
                 at(0.0, -fus_l / 2 + wing_chord * 0.35, 0.0));
    }
    return out;
}

}  // namespace

ShapeFamily family_from_string(const std::string& s) {
    if (s == "chair") return ShapeFamily::chair;
    if (s == "table") return ShapeFamily::table;
    if (s == "airplane") return ShapeFamily::airplane;
    throw InvalidInput("unknown shape family: " + s);
}

std::string to_string(ShapeFamily family) {
    switch (family) {
        case ShapeFamily::chair: return "chair";
        case ShapeFamily::table: return "table";
        case ShapeFamily::airplane: return "airplane";
    }
    throw InvalidInput("unknown shape family value");
}

GeneratedScene generate_scene(const ShapeSpec& spec) {
    if (spec.points_per_part < 1)
        throw InvalidInput("generate_scene: points_per_part must be >= 1");
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(spec.family)));
    GeneratedScene out;
    switch (spec.family) {
        case ShapeFamily::chair: out = make_chair(rng, spec); break;
        case ShapeFamily::table: out = make_table(rng, spec); break;
        case ShapeFamily::airplane: out = make_airplane(rng, spec); break;
    }
    out.seed = spec.seed;
    if (out.scene.parts.size() < 2 || out.scene.parts.size() > 20)
        throw InvalidInput("generate_scene: part count outside [2, 20]");
    return out;
}

const std::vector<PerturbationLevel>& all_perturbation_levels() {
    static const std::vector<PerturbationLevel> levels = {
        {"slight", 15.0, 0.05, false},
        {"moderate", 45.0, 0.15, false},
        {"substantial", 90.0, 0.30, false},
        {"excessive", 0.0, 0.0, true},
    };
    return levels;
}

const PerturbationLevel& perturbation_level(const std::string& name) {
    for (const PerturbationLevel& level : all_perturbation_levels()) {
        if (level.name == name) return level;
    }
    throw InvalidInput("unknown perturbation level: " + name);
}

Scene perturb(const Scene& scene, const PerturbationLevel& level, Rng& rng) {
    if (scene.parts.empty()) throw InvalidInput("perturb: scene has no parts");
    Scene out = scene;
    for (Part& part : out.parts) {
        if (part.canonical.empty()) throw InvalidInput("perturb: part with empty cloud");
        if (level.reset_uniform) {
            part.pose.rotation = random_rotation(rng);
            part.pose.translation = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                                     rng.uniform(-0.5, 0.5)};
            continue;
        }
        const Vec3 center = centroid(render_part(part));
        const Quat dq = random_rotation_bounded(rng, level.max_rotation_deg * kPi / 180.0);
        const Vec3 offset{rng.normal() * level.translation_sigma,
                          rng.normal() * level.translation_sigma,
                          rng.normal() * level.translation_sigma};
        Pose p;
        p.rotation = normalized(hamilton(dq, part.pose.rotation));
        p.translation = rotate(dq, part.pose.translation - center) + center + offset;
        part.pose = p;
    }
    return out;
}

}  // namespace assembloid
