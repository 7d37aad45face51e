#pragma once

#include <string>
#include <vector>

#include "assembloid/diffusion.hpp"
#include "assembloid/geometry.hpp"
#include "assembloid/rng.hpp"

namespace assembloid {

struct TinyDenoiserConfig {
    int hidden1 = 32;
    int hidden2 = 32;
    int step_embed = 8;  // sinusoidal embedding width, must be even
};

// Small permutation-equivariant noise predictor:
//   per point: tanh(W1 [x; emb(z)] + b1) -> h1
//   context:   mean over points of h1 (summed in sorted order per dimension,
//              so the pooled value is bit-identical under any input ordering)
//   per point: tanh(W2 [h1; context] + b2) -> h2, then W3 h2 + b3
// Weights live in one flat vector so finite-difference checks, SGD and
// checkpointing all address the same storage.
class TinyDenoiser : public Denoiser {
public:
    TinyDenoiser(TinyDenoiserConfig config, std::string label, int schedule_steps,
                 double sigma_max, Rng& rng);
    // Restores a net from existing weights (checkpoint loading).
    TinyDenoiser(TinyDenoiserConfig config, std::string label, int schedule_steps,
                 double sigma_max, std::vector<double> weights);

    PointCloud predict_noise(const PointCloud& noisy, const std::string& label,
                             int z) const override;

    std::vector<double>& weights() { return weights_; }
    const std::vector<double>& weights() const { return weights_; }
    std::size_t parameter_count() const { return weights_.size(); }
    const TinyDenoiserConfig& config() const { return config_; }
    const std::string& label() const { return label_; }
    int schedule_steps() const { return schedule_steps_; }
    double sigma_max() const { return sigma_max_; }

private:
    friend double tiny_loss_and_gradient(const TinyDenoiser&, const PointCloud&,
                                         const PointCloud&, int, std::vector<double>&);
    friend double tiny_loss(const TinyDenoiser&, const PointCloud&, const PointCloud&, int);

    void forward(const PointCloud& noisy, int z, std::vector<double>& h1,
                 std::vector<double>& ctx, std::vector<double>& h2, PointCloud& out) const;
    std::vector<double> step_embedding(int z) const;

    TinyDenoiserConfig config_;
    std::string label_;
    int schedule_steps_ = 0;
    double sigma_max_ = 0.0;
    std::vector<double> weights_;

    // offsets into weights_
    std::size_t w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0, w3_ = 0, b3_ = 0;
};

// Mean squared error per coordinate between the prediction and target noise.
double tiny_loss(const TinyDenoiser& net, const PointCloud& noisy, const PointCloud& target_eps,
                 int z);

// Same loss, plus the analytic gradient with respect to every weight.
// grad is resized to parameter_count().
double tiny_loss_and_gradient(const TinyDenoiser& net, const PointCloud& noisy,
                              const PointCloud& target_eps, int z, std::vector<double>& grad);

struct TrainingConfig {
    int steps = 3000;
    double learning_rate = 0.02;
    double momentum = 0.9;
};

struct TrainingResult {
    TinyDenoiser denoiser;
    std::vector<double> loss_curve;  // one entry per step
    bool diverged = false;
};

// SGD over random (scene, step) draws: render a scene, noise it at a uniform
// step in [1, Z], regress the predicted noise onto the true draw. On a
// non-finite loss the last finite weights are restored and training stops.
TrainingResult train_tiny_denoiser(const std::vector<Scene>& dataset,
                                   const NoiseSchedule& schedule, const TinyDenoiserConfig& arch,
                                   const TrainingConfig& training, Rng& rng);

// Versioned container: 8-byte magic, u32 version, u32 header length, JSON
// header (architecture, schedule, label, weight count), float32 weight blob.
void save_checkpoint(const std::string& path, const TinyDenoiser& net);
TinyDenoiser load_checkpoint(const std::string& path);

}  // namespace assembloid
