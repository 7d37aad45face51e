#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "assembloid/geometry.hpp"
#include "assembloid/rng.hpp"

namespace assembloid {

enum class ShapeFamily { chair, table, airplane };
ShapeFamily family_from_string(const std::string& s);
std::string to_string(ShapeFamily family);

struct ShapeSpec {
    ShapeFamily family = ShapeFamily::chair;
    int points_per_part = 100;
    std::uint64_t seed = 0;
};

struct GeneratedScene {
    Scene scene;  // parts at ground-truth poses
    std::vector<std::string> part_names;
    std::uint64_t seed = 0;
};

// Procedural part-based shapes, built inside the unit cube centred at the
// origin. Canonical clouds are centred; ground-truth poses place them.
// Repeated parts (chair and table legs, airplane wings) share one sampled
// cloud, so scenes contain genuinely interchangeable parts.
GeneratedScene generate_scene(const ShapeSpec& spec);

struct PerturbationLevel {
    std::string name;
    double max_rotation_deg = 0.0;   // axis uniform on the sphere, angle uniform
    double translation_sigma = 0.0;  // isotropic normal offset
    bool reset_uniform = false;      // replace poses with uniform draws instead
};

// slight 15deg/0.05, moderate 45deg/0.15, substantial 90deg/0.30, excessive
// uniform over rotations and the unit cube.
const PerturbationLevel& perturbation_level(const std::string& name);
const std::vector<PerturbationLevel>& all_perturbation_levels();

// Rotations are applied about each part's own centroid, so a pure rotation
// leaves the part in place rather than swinging it around the origin.
Scene perturb(const Scene& scene, const PerturbationLevel& level, Rng& rng);

}  // namespace assembloid
