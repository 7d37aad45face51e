#pragma once

#include <vector>

#include "assembloid/geometry.hpp"

namespace assembloid {

// Direct pose optimization: each part carries seven free parameters (an
// unnormalised quaternion and a translation) and plain gradient descent
// minimises the chamfer distance between the assembled scene and a fixed
// reference cloud.
struct SimpleBaselineConfig {
    PointCloud reference;
    int iterations = 300;
    double learning_rate = 0.05;
    double momentum = 0.9;
};

struct SimpleBaselineResult {
    Scene scene;                      // poses of the best iterate seen
    std::vector<double> loss_curve;   // best-so-far envelope, non-increasing
    std::vector<double> raw_losses;   // actual per-iteration loss
    bool diverged = false;
};

SimpleBaselineResult simple_optimize(const Scene& initial, const SimpleBaselineConfig& config);

// Chamfer distance of the rendered scene against the reference, with the
// nearest-neighbour matching held fixed while the pose gradient is taken.
// Exposed for gradient checks.
double simple_loss(const Scene& scene, const PointCloud& reference);
// Gradient of simple_loss with respect to the 7 raw parameters per part,
// laid out [qw qx qy qz tx ty tz] in part order. raw_quats supplies the
// unnormalised quaternions the poses came from. loss_out, when given,
// receives the loss of the same evaluation.
std::vector<double> simple_loss_gradient(const Scene& scene, const std::vector<Quat>& raw_quats,
                                         const PointCloud& reference,
                                         double* loss_out = nullptr);

struct SupervisedLossWeights {
    double translation = 1.0;
    double rotation = 10.0;
    double shape = 1.0;
};

struct SupervisedLosses {
    double translation = 0.0;  // sum of squared translation offsets
    double rotation = 0.0;     // summed squared distance between rotated part clouds
    double shape = 0.0;        // summed (unaveraged) two-way chamfer per part
    double total = 0.0;
};

// Training-style losses against reference poses. The rotation and shape terms
// are plain sums over points, not means, so their scale grows with point
// count.
SupervisedLosses supervised_losses(const Scene& predicted, const Scene& reference,
                                   const SupervisedLossWeights& weights = {});

}  // namespace assembloid
