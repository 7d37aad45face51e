#include "assembloid/baselines.hpp"

#include <cmath>
#include <limits>

#include "assembloid/errors.hpp"
#include "assembloid/kdtree.hpp"

namespace assembloid {

namespace {

// Derivatives of the unit-quaternion rotation matrix with respect to each
// quaternion component, for q = (w, x, y, z) on the unit sphere.
void quat_matrix_derivatives(const Quat& q, Mat3 d[4]) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    d[0] = Mat3::zero();
    d[0](0, 1) = -2 * z; d[0](0, 2) = 2 * y;
    d[0](1, 0) = 2 * z;  d[0](1, 2) = -2 * x;
    d[0](2, 0) = -2 * y; d[0](2, 1) = 2 * x;

    d[1] = Mat3::zero();
    d[1](0, 1) = 2 * y;  d[1](0, 2) = 2 * z;
    d[1](1, 0) = 2 * y;  d[1](1, 1) = -4 * x; d[1](1, 2) = -2 * w;
    d[1](2, 0) = 2 * z;  d[1](2, 1) = 2 * w;  d[1](2, 2) = -4 * x;

    d[2] = Mat3::zero();
    d[2](0, 0) = -4 * y; d[2](0, 1) = 2 * x;  d[2](0, 2) = 2 * w;
    d[2](1, 0) = 2 * x;  d[2](1, 2) = 2 * z;
    d[2](2, 0) = -2 * w; d[2](2, 1) = 2 * z;  d[2](2, 2) = -4 * y;

    d[3] = Mat3::zero();
    d[3](0, 0) = -4 * z; d[3](0, 1) = -2 * w; d[3](0, 2) = 2 * x;
    d[3](1, 0) = 2 * w;  d[3](1, 1) = -4 * z; d[3](1, 2) = 2 * y;
    d[3](2, 0) = 2 * x;  d[3](2, 1) = 2 * y;
}

// Per-point gradient of the symmetric chamfer distance with the
// nearest-neighbour assignments frozen.
std::vector<Vec3> chamfer_point_gradients(const PointCloud& rendered,
                                          const PointCloud& reference, double& loss_out) {
    const KdTree ref_tree(reference.points);
    const KdTree out_tree(rendered.points);
    const double inv_a = 1.0 / static_cast<double>(rendered.size());
    const double inv_b = 1.0 / static_cast<double>(reference.size());

    std::vector<Vec3> grads(rendered.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        const KdTree::Hit hit = ref_tree.nearest(rendered.points[i]);
        loss += hit.squared_distance * inv_a;
        grads[i] += (rendered.points[i] - reference.points[hit.index]) * (2.0 * inv_a);
    }
    for (const Vec3& b : reference.points) {
        const KdTree::Hit hit = out_tree.nearest(b);
        loss += hit.squared_distance * inv_b;
        grads[hit.index] += (rendered.points[hit.index] - b) * (2.0 * inv_b);
    }
    loss_out = loss;
    return grads;
}

void check_simple_inputs(const Scene& scene, const PointCloud& reference) {
    if (scene.parts.empty()) throw InvalidInput("simple baseline: scene has no parts");
    if (reference.empty()) throw InvalidInput("simple baseline: empty reference cloud");
    for (const Part& part : scene.parts) {
        if (part.canonical.empty()) throw InvalidInput("simple baseline: part with empty cloud");
    }
}

}  // namespace

double simple_loss(const Scene& scene, const PointCloud& reference) {
    check_simple_inputs(scene, reference);
    return chamfer_distance(render_scene(scene), reference);
}

std::vector<double> simple_loss_gradient(const Scene& scene, const std::vector<Quat>& raw_quats,
                                         const PointCloud& reference, double* loss_out) {
    check_simple_inputs(scene, reference);
    if (raw_quats.size() != scene.parts.size())
        throw InvalidInput("simple_loss_gradient: one raw quaternion per part required");

    const PointCloud rendered = render_scene(scene);
    const auto ranges = part_ranges(scene);
    double loss = 0.0;
    const std::vector<Vec3> point_grads = chamfer_point_gradients(rendered, reference, loss);
    if (loss_out) *loss_out = loss;

    std::vector<double> grad(7 * scene.parts.size(), 0.0);
    for (std::size_t i = 0; i < scene.parts.size(); ++i) {
        const Quat& raw = raw_quats[i];
        const double raw_norm =
            std::sqrt(raw.w * raw.w + raw.x * raw.x + raw.y * raw.y + raw.z * raw.z);
        if (!(raw_norm > 0.0)) throw InvalidInput("simple_loss_gradient: zero quaternion");
        const Quat unit = normalized(raw);

        // dL/dR and dL/dt accumulated over the part's points.
        Mat3 dR = Mat3::zero();
        Vec3 dt;
        const Part& part = scene.parts[i];
        for (std::size_t p = ranges[i].first; p < ranges[i].second; ++p) {
            const Vec3& g = point_grads[p];
            const Vec3& c = part.canonical.points[p - ranges[i].first];
            dt += g;
            for (int r = 0; r < 3; ++r) {
                const double gr = r == 0 ? g.x : (r == 1 ? g.y : g.z);
                dR(r, 0) += gr * c.x;
                dR(r, 1) += gr * c.y;
                dR(r, 2) += gr * c.z;
            }
        }

        Mat3 dmats[4];
        quat_matrix_derivatives(unit, dmats);
        double dunit[4];
        for (int k = 0; k < 4; ++k) {
            double acc = 0.0;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) acc += dR(r, c) * dmats[k](r, c);
            dunit[k] = acc;
        }
        // Chain through normalisation: dq = (I - u u^T) / |raw| * dunit.
        const double u[4] = {unit.w, unit.x, unit.y, unit.z};
        double proj = 0.0;
        for (int k = 0; k < 4; ++k) proj += dunit[k] * u[k];
        for (int k = 0; k < 4; ++k)
            grad[7 * i + static_cast<std::size_t>(k)] = (dunit[k] - proj * u[k]) / raw_norm;
        grad[7 * i + 4] = dt.x;
        grad[7 * i + 5] = dt.y;
        grad[7 * i + 6] = dt.z;
    }
    return grad;
}

SimpleBaselineResult simple_optimize(const Scene& initial, const SimpleBaselineConfig& config) {
    check_simple_inputs(initial, config.reference);
    if (config.iterations < 1) throw InvalidInput("simple_optimize: iterations must be >= 1");
    if (!(config.learning_rate > 0.0))
        throw InvalidInput("simple_optimize: learning rate must be positive");

    const std::size_t n_parts = initial.parts.size();
    std::vector<double> params(7 * n_parts);
    for (std::size_t i = 0; i < n_parts; ++i) {
        const Pose& pose = initial.parts[i].pose;
        const Quat q = normalized(pose.rotation);
        params[7 * i + 0] = q.w;
        params[7 * i + 1] = q.x;
        params[7 * i + 2] = q.y;
        params[7 * i + 3] = q.z;
        params[7 * i + 4] = pose.translation.x;
        params[7 * i + 5] = pose.translation.y;
        params[7 * i + 6] = pose.translation.z;
    }

    auto scene_from_params = [&](const std::vector<double>& p) {
        Scene s = initial;
        for (std::size_t i = 0; i < n_parts; ++i) {
            s.parts[i].pose.rotation =
                normalized(Quat{p[7 * i], p[7 * i + 1], p[7 * i + 2], p[7 * i + 3]});
            s.parts[i].pose.translation = {p[7 * i + 4], p[7 * i + 5], p[7 * i + 6]};
        }
        return s;
    };
    auto raw_quats_from_params = [&](const std::vector<double>& p) {
        std::vector<Quat> qs(n_parts);
        for (std::size_t i = 0; i < n_parts; ++i)
            qs[i] = {p[7 * i], p[7 * i + 1], p[7 * i + 2], p[7 * i + 3]};
        return qs;
    };

    SimpleBaselineResult result;
    result.scene = scene_from_params(params);
    double best = simple_loss(result.scene, config.reference);
    std::vector<double> best_params = params;

    std::vector<double> velocity(params.size(), 0.0);
    result.raw_losses.reserve(static_cast<std::size_t>(config.iterations));
    result.loss_curve.reserve(static_cast<std::size_t>(config.iterations));

    for (int iter = 0; iter < config.iterations; ++iter) {
        const Scene current = scene_from_params(params);
        double loss = 0.0;
        std::vector<double> grad;
        try {
            grad = simple_loss_gradient(current, raw_quats_from_params(params), config.reference,
                                        &loss);
        } catch (const InvalidInput&) {
            // A quaternion collapsed to zero; stop at the best iterate.
            result.diverged = true;
            break;
        }
        if (!std::isfinite(loss)) {
            result.diverged = true;
            break;
        }
        result.raw_losses.push_back(loss);
        if (loss < best) {
            best = loss;
            best_params = params;
        }
        result.loss_curve.push_back(best);
        for (std::size_t i = 0; i < params.size(); ++i) {
            velocity[i] = config.momentum * velocity[i] - config.learning_rate * grad[i];
            params[i] += velocity[i];
        }
    }

    result.scene = scene_from_params(best_params);
    return result;
}

SupervisedLosses supervised_losses(const Scene& predicted, const Scene& reference,
                                   const SupervisedLossWeights& weights) {
    if (predicted.parts.empty() || reference.parts.empty())
        throw InvalidInput("supervised_losses: empty scene");
    if (predicted.parts.size() != reference.parts.size())
        throw CorrespondenceError("supervised_losses: part counts differ");

    SupervisedLosses out;
    for (std::size_t i = 0; i < predicted.parts.size(); ++i) {
        const Part& p = predicted.parts[i];
        const Part& r = reference.parts[i];
        if (p.canonical.size() != r.canonical.size())
            throw CorrespondenceError("supervised_losses: canonical clouds differ in size");
        if (p.canonical.empty()) throw InvalidInput("supervised_losses: part with empty cloud");

        out.translation += squared_distance(p.pose.translation, r.pose.translation);

        // Rotation term compares rotated canonical points directly, summed.
        for (std::size_t k = 0; k < p.canonical.size(); ++k) {
            const Vec3 a = rotate(p.pose.rotation, p.canonical.points[k]);
            const Vec3 b = rotate(r.pose.rotation, r.canonical.points[k]);
            out.rotation += squared_distance(a, b);
        }

        // Shape term: two-way nearest-neighbour sum between the placed parts.
        const PointCloud pa = render_part(p), pb = render_part(r);
        const KdTree ta(pa.points), tb(pb.points);
        for (const Vec3& q : pa.points) out.shape += tb.nearest(q).squared_distance;
        for (const Vec3& q : pb.points) out.shape += ta.nearest(q).squared_distance;
    }
    out.total = weights.translation * out.translation + weights.rotation * out.rotation +
                weights.shape * out.shape;
    return out;
}

}  // namespace assembloid
