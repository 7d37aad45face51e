#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "assembloid/diffusion.hpp"
#include "assembloid/geometry.hpp"

namespace assembloid {

enum class AlignMode { kabsch, icp };
AlignMode align_mode_from_string(const std::string& s);
std::string to_string(AlignMode mode);

enum class PushTrigger { above, below };
PushTrigger push_trigger_from_string(const std::string& s);
std::string to_string(PushTrigger trigger);

// Collision handling between part pairs. A pair "collides" when the number of
// coincident points (within radius) compares against count_threshold per the
// trigger: above fires on count >= threshold, below fires on count < threshold.
struct CollisionConfig {
    bool enabled = false;
    double radius = 0.02;
    int count_threshold = 10;
    double scale = 0.5;          // step size of the separating move
    PushTrigger trigger = PushTrigger::above;
    int every = 1;               // apply on iterations where iteration % every == 0
};

struct AssemblyConfig {
    int iterations = 50;            // outer refinement steps T
    int diffusion_step = 2;         // forward-noise step z for each iteration
    DenoiseMode denoise_mode = DenoiseMode::literal;
    AlignMode align_mode = AlignMode::kabsch;
    CollisionConfig collision;
    int icp_max_iterations = 30;
    double icp_tol = 1e-10;
};

struct PartStepRecord {
    double residual = 0.0;           // alignment RMS for this part's slice
    bool translation_fallback = false;  // degenerate slice, centroid move only
};

struct CollisionEvent {
    int part_a = 0, part_b = 0;  // ordered pair that fired
    int count = 0;               // coincident count from part_a's side
    Vec3 displacement;           // translation added to part_a
};

struct StepRecord {
    int iteration = 0;
    std::vector<Pose> poses;               // poses after this iteration
    std::vector<PartStepRecord> parts;
    double chamfer_to_estimate = 0.0;      // scene render vs the denoised target
    std::vector<CollisionEvent> collisions;
};

struct IterationTrace {
    std::vector<Pose> initial_poses;
    std::vector<StepRecord> steps;  // one record per executed iteration
};

struct AssemblyResult {
    Scene scene;
    IterationTrace trace;
};

// Number of points of a with at least one point of b within radius.
// Not symmetric in general.
int coincident_count(const PointCloud& a, const PointCloud& b, double radius);

// One separating move: every colliding ordered pair (i, j) contributes
//   (centroid of part i - centroid of its coincident subset) * scale
// to part i's translation. All counts and centroids come from the input
// configuration; the moves apply simultaneously. Pairs whose coincident
// subset is empty are skipped.
Scene push_away(const Scene& scene, const CollisionConfig& config,
                std::vector<CollisionEvent>* events = nullptr);

// One refinement iteration: render, forward-noise at diffusion_step, form the
// denoised estimate, rigidly align each part's slice to its index-matched
// slice of the estimate, compose the alignment onto the part pose, then
// optionally push colliding parts apart.
StepRecord assemble_step(Scene& scene, const Denoiser& denoiser, const NoiseSchedule& schedule,
                         const AssemblyConfig& config, Rng& rng, int iteration = 0);

AssemblyResult assemble(const Scene& initial, const Denoiser& denoiser,
                        const NoiseSchedule& schedule, const AssemblyConfig& config, Rng& rng);

// Per-part gradient of the distillation loss with respect to an affine pose
// parameterisation A: linear(r, c) accumulates d/dA_rc and translation
// accumulates the raw residual sum.
struct PartGradient {
    Mat3 linear = Mat3::zero();
    Vec3 translation;
};

struct SdsGradients {
    std::vector<PartGradient> from_residual;   // weight * (P_t - P*) route
    std::vector<PartGradient> from_noise;      // weight * (prediction - eps) route
    PointCloud rendered;                       // P_t
    PointCloud estimate;                       // P*
};

// Both routes are algebraically identical: with the literal estimate
// P* = noisy - prediction and eps = noisy - P_t, the residual P_t - P* equals
// prediction - eps. They are computed independently so the identity can be
// checked numerically.
SdsGradients sds_gradient(const Scene& scene, const Denoiser& denoiser,
                          const NoiseSchedule& schedule, int z, double weight, Rng& rng);

}  // namespace assembloid
