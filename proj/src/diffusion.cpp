#include "assembloid/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "assembloid/errors.hpp"

namespace assembloid {

NoiseSchedule linear_schedule(int steps, double sigma_max) {
    if (steps < 1) throw InvalidSchedule("linear_schedule: steps must be >= 1");
    if (!(sigma_max > 0.0) || sigma_max > 1.0)
        throw InvalidSchedule("linear_schedule: sigma_max must be in (0, 1]");
    NoiseSchedule s;
    s.steps = steps;
    s.sigma.resize(static_cast<std::size_t>(steps) + 1);
    s.alpha.resize(static_cast<std::size_t>(steps) + 1);
    for (int z = 0; z <= steps; ++z) {
        const double var = sigma_max * sigma_max * static_cast<double>(z) / static_cast<double>(steps);
        s.sigma[static_cast<std::size_t>(z)] = std::sqrt(var);
        s.alpha[static_cast<std::size_t>(z)] = std::sqrt(1.0 - var);
    }
    return s;
}

void check_step(const NoiseSchedule& schedule, int z) {
    if (schedule.steps < 1 || schedule.sigma.size() != static_cast<std::size_t>(schedule.steps) + 1)
        throw InvalidSchedule("check_step: malformed schedule");
    if (z < 0 || z > schedule.steps) throw StepError("step index outside [0, steps]");
}

NoisedCloud forward_noise(const PointCloud& cloud, const NoiseSchedule& schedule, int z,
                          Rng& rng) {
    check_step(schedule, z);
    if (cloud.empty()) throw InvalidInput("forward_noise: empty cloud");
    if (!finite(cloud)) throw InvalidInput("forward_noise: non-finite coordinates");
    const double alpha = schedule.alpha[static_cast<std::size_t>(z)];
    const double sigma = schedule.sigma[static_cast<std::size_t>(z)];
    NoisedCloud out;
    out.noisy.points.reserve(cloud.size());
    out.eps.points.reserve(cloud.size());
    for (const Vec3& p : cloud.points) {
        const Vec3 e{rng.normal(), rng.normal(), rng.normal()};
        out.eps.points.push_back(e);
        out.noisy.points.push_back(p * alpha + e * sigma);
    }
    return out;
}

DenoiseMode denoise_mode_from_string(const std::string& s) {
    if (s == "literal") return DenoiseMode::literal;
    if (s == "ddpm") return DenoiseMode::ddpm;
    throw InvalidInput("unknown denoise mode: " + s);
}

std::string to_string(DenoiseMode mode) {
    return mode == DenoiseMode::literal ? "literal" : "ddpm";
}

PointCloud denoise_estimate(const PointCloud& noisy, const Denoiser& denoiser,
                            const std::string& label, int z, DenoiseMode mode,
                            const NoiseSchedule& schedule) {
    check_step(schedule, z);
    if (noisy.empty()) throw InvalidInput("denoise_estimate: empty cloud");
    const PointCloud pred = denoiser.predict_noise(noisy, label, z);
    if (pred.size() != noisy.size())
        throw InterfaceViolation("denoise_estimate: denoiser changed the point count");
    PointCloud out;
    out.points.reserve(noisy.size());
    if (mode == DenoiseMode::literal) {
        for (std::size_t i = 0; i < noisy.size(); ++i)
            out.points.push_back(noisy.points[i] - pred.points[i]);
    } else {
        const double alpha = schedule.alpha[static_cast<std::size_t>(z)];
        const double sigma = schedule.sigma[static_cast<std::size_t>(z)];
        if (!(alpha > 0.0))
            throw InvalidSchedule("denoise_estimate: alpha is zero at this step, ddpm mode undefined");
        for (std::size_t i = 0; i < noisy.size(); ++i)
            out.points.push_back((noisy.points[i] - pred.points[i] * sigma) / alpha);
    }
    return out;
}

MemorizedShapeDenoiser::MemorizedShapeDenoiser(PointCloud target) : target_(std::move(target)) {
    if (target_.empty()) throw InvalidInput("MemorizedShapeDenoiser: empty target");
    if (!finite(target_)) throw InvalidInput("MemorizedShapeDenoiser: non-finite target");
}

PointCloud MemorizedShapeDenoiser::predict_noise(const PointCloud& noisy,
                                                 const std::string& /*label*/, int /*z*/) const {
    if (noisy.size() != target_.size())
        throw InterfaceViolation("MemorizedShapeDenoiser: cloud size differs from memorized target");
    PointCloud out;
    out.points.reserve(noisy.size());
    for (std::size_t i = 0; i < noisy.size(); ++i)
        out.points.push_back(noisy.points[i] - target_.points[i]);
    return out;
}

GaussianMixtureDenoiser::GaussianMixtureDenoiser(std::vector<MixtureComponent> components,
                                                 NoiseSchedule schedule)
    : components_(std::move(components)), schedule_(std::move(schedule)) {
    if (components_.empty()) throw InvalidInput("GaussianMixtureDenoiser: no components");
    const std::size_t n = components_.front().mean.size();
    double wsum = 0.0;
    for (const MixtureComponent& c : components_) {
        if (c.mean.size() != n)
            throw InvalidInput("GaussianMixtureDenoiser: component means differ in size");
        if (c.mean.empty()) throw InvalidInput("GaussianMixtureDenoiser: empty component mean");
        if (!(c.variance >= 0.0)) throw InvalidInput("GaussianMixtureDenoiser: negative variance");
        if (!(c.weight > 0.0)) throw InvalidInput("GaussianMixtureDenoiser: non-positive weight");
        wsum += c.weight;
    }
    if (!(wsum > 0.0)) throw InvalidInput("GaussianMixtureDenoiser: weights sum to zero");
}

PointCloud GaussianMixtureDenoiser::predict_noise(const PointCloud& noisy,
                                                  const std::string& /*label*/, int z) const {
    check_step(schedule_, z);
    if (noisy.size() != components_.front().mean.size())
        throw InterfaceViolation("GaussianMixtureDenoiser: cloud size differs from component means");
    const double alpha = schedule_.alpha[static_cast<std::size_t>(z)];
    const double sigma = schedule_.sigma[static_cast<std::size_t>(z)];

    // Marginal at step z for component k is N(alpha M_k, (alpha^2 v_k + sigma^2) I)
    // over the flattened cloud. Responsibilities in log space.
    const std::size_t n = noisy.size();
    const double dim = 3.0 * static_cast<double>(n);
    std::vector<double> logp(components_.size());
    std::vector<double> scale(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const MixtureComponent& c = components_[k];
        const double s = alpha * alpha * c.variance + sigma * sigma;
        if (!(s > 0.0))
            throw InvalidSchedule("GaussianMixtureDenoiser: zero marginal variance (step 0 with v = 0)");
        scale[k] = s;
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            sq += squared_distance(noisy.points[i], c.mean.points[i] * alpha);
        logp[k] = std::log(c.weight) - 0.5 * (dim * std::log(s) + sq / s);
    }
    const double m = *std::max_element(logp.begin(), logp.end());
    double denom = 0.0;
    for (double& lp : logp) {
        lp = std::exp(lp - m);
        denom += lp;
    }

    PointCloud out;
    out.points.assign(n, Vec3{});
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const double r = logp[k] / denom;
        if (r == 0.0) continue;
        const double coeff = r * sigma / scale[k];
        const MixtureComponent& c = components_[k];
        for (std::size_t i = 0; i < n; ++i)
            out.points[i] += (noisy.points[i] - c.mean.points[i] * alpha) * coeff;
    }
    return out;
}

PointCloud sample(const Denoiser& denoiser, const NoiseSchedule& schedule,
                  const std::string& label, std::size_t n_points, Rng& rng, DenoiseMode mode) {
    if (n_points == 0) throw InvalidInput("sample: n_points must be positive");
    check_step(schedule, schedule.steps);

    PointCloud x;
    x.points.reserve(n_points);
    for (std::size_t i = 0; i < n_points; ++i)
        x.points.push_back({rng.normal(), rng.normal(), rng.normal()});

    for (int z = schedule.steps; z >= 1; --z) {
        const PointCloud x0 = denoise_estimate(x, denoiser, label, z, mode, schedule);
        const double alpha_prev = schedule.alpha[static_cast<std::size_t>(z) - 1];
        const double sigma_prev = schedule.sigma[static_cast<std::size_t>(z) - 1];
        PointCloud next;
        next.points.reserve(n_points);
        if (sigma_prev > 0.0) {
            for (const Vec3& p : x0.points) {
                const Vec3 xi{rng.normal(), rng.normal(), rng.normal()};
                next.points.push_back(p * alpha_prev + xi * sigma_prev);
            }
        } else {
            for (const Vec3& p : x0.points) next.points.push_back(p * alpha_prev);
        }
        x = std::move(next);
    }
    return x;
}

}  // namespace assembloid
