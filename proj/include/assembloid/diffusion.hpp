#pragma once

#include <memory>
#include <string>
#include <vector>

#include "assembloid/geometry.hpp"
#include "assembloid/rng.hpp"

namespace assembloid {

// Variance-preserving noise schedule: sigma is strictly increasing with
// sigma[0] = 0, and alpha[z]^2 + sigma[z]^2 = 1 at every step.
struct NoiseSchedule {
    int steps = 0;               // largest step index Z
    std::vector<double> sigma;   // size steps + 1
    std::vector<double> alpha;   // size steps + 1
};

// sigma_z^2 = sigma_max^2 * z / steps. Requires steps >= 1 and
// 0 < sigma_max <= 1.
NoiseSchedule linear_schedule(int steps, double sigma_max);

// Throws StepError unless 0 <= z <= schedule.steps. Step 0 is the identity
// (no noise); callers that need an actual diffusion step pass z >= 1.
void check_step(const NoiseSchedule& schedule, int z);

struct NoisedCloud {
    PointCloud noisy;  // alpha_z * x + sigma_z * eps
    PointCloud eps;    // the standard-normal draw, one sample per point
};

NoisedCloud forward_noise(const PointCloud& cloud, const NoiseSchedule& schedule, int z,
                          Rng& rng);

// Predicts the noise content of a noisy cloud at step z, conditioned on a
// shape label.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual PointCloud predict_noise(const PointCloud& noisy, const std::string& label,
                                     int z) const = 0;
};

// How a noise prediction is turned into a clean-cloud estimate:
//   literal: noisy - prediction (treats the prediction as a displacement)
//   ddpm:    (noisy - sigma_z * prediction) / alpha_z (treats it as unit noise)
enum class DenoiseMode { literal, ddpm };

DenoiseMode denoise_mode_from_string(const std::string& s);
std::string to_string(DenoiseMode mode);

PointCloud denoise_estimate(const PointCloud& noisy, const Denoiser& denoiser,
                            const std::string& label, int z, DenoiseMode mode,
                            const NoiseSchedule& schedule);

// Oracle that always steers toward one fixed cloud: prediction = noisy - target,
// so a literal-mode estimate returns the target exactly. Sizes must match.
class MemorizedShapeDenoiser : public Denoiser {
public:
    explicit MemorizedShapeDenoiser(PointCloud target);
    PointCloud predict_noise(const PointCloud& noisy, const std::string& label,
                             int z) const override;
    const PointCloud& target() const { return target_; }

private:
    PointCloud target_;
};

// One mode of an isotropic Gaussian mixture over whole clouds: mean cloud M,
// per-coordinate variance, mixture weight.
struct MixtureComponent {
    PointCloud mean;
    double variance = 0.0;
    double weight = 1.0;
};

// Closed-form optimal denoiser for a Gaussian-mixture data distribution:
//   prediction = sum_k r_k(x) * (x - alpha_z M_k) * sigma_z / (alpha_z^2 v_k + sigma_z^2)
// with responsibilities r_k computed over the whole flattened cloud.
class GaussianMixtureDenoiser : public Denoiser {
public:
    GaussianMixtureDenoiser(std::vector<MixtureComponent> components, NoiseSchedule schedule);
    PointCloud predict_noise(const PointCloud& noisy, const std::string& label,
                             int z) const override;

private:
    std::vector<MixtureComponent> components_;
    NoiseSchedule schedule_;
};

// Ancestral sampling from pure noise: Z reverse steps, each forming a clean
// estimate in the given mode and re-noising to step z-1 with variance
// sigma_{z-1}^2 I. Requires alpha_z > 0 for every step in ddpm mode.
PointCloud sample(const Denoiser& denoiser, const NoiseSchedule& schedule,
                  const std::string& label, std::size_t n_points, Rng& rng,
                  DenoiseMode mode = DenoiseMode::literal);

}  // namespace assembloid
