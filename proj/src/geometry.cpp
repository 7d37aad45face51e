#include "assembloid/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <limits>

#include "assembloid/errors.hpp"
#include "assembloid/kdtree.hpp"

namespace assembloid {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

bool finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

bool finite(const PointCloud& cloud) {
    for (const Vec3& p : cloud.points) {
        if (!finite(p)) return false;
    }
    return true;
}

Mat3 Mat3::zero() {
    Mat3 a;
    a.m.fill(0.0);
    return a;
}

Mat3 transpose(const Mat3& a) {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) t(r, c) = a(c, r);
    return t;
}

Mat3 matmul(const Mat3& a, const Mat3& b) {
    Mat3 out = Mat3::zero();
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k)
            for (int c = 0; c < 3; ++c) out(r, c) += a(r, k) * b(k, c);
    return out;
}

Vec3 apply(const Mat3& a, const Vec3& v) {
    return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
            a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
            a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
}

double determinant(const Mat3& a) {
    return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
           a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
           a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

Quat normalized(const Quat& q) {
    const double n = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
    if (!(n > 0.0) || !std::isfinite(n)) throw InvalidInput("normalized: zero or non-finite quaternion");
    return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Quat conjugate(const Quat& q) { return {q.w, -q.x, -q.y, -q.z}; }

Quat hamilton(const Quat& a, const Quat& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Vec3 rotate(const Quat& q, const Vec3& v) {
    // q v q* expanded: v + 2 u x (u x v + w v), u = (x, y, z).
    const Vec3 u{q.x, q.y, q.z};
    const Vec3 t = cross(u, v) * 2.0;
    return v + t * q.w + cross(u, t);
}

Mat3 rotation_matrix(const Quat& q) {
    const double ww = q.w * q.w, xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
    const double wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
    const double xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
    Mat3 r;
    r(0, 0) = ww + xx - yy - zz;
    r(0, 1) = 2.0 * (xy - wz);
    r(0, 2) = 2.0 * (xz + wy);
    r(1, 0) = 2.0 * (xy + wz);
    r(1, 1) = ww - xx + yy - zz;
    r(1, 2) = 2.0 * (yz - wx);
    r(2, 0) = 2.0 * (xz - wy);
    r(2, 1) = 2.0 * (yz + wx);
    r(2, 2) = ww - xx - yy + zz;
    return r;
}

Quat quat_from_matrix(const Mat3& r) {
    // Shepperd's method: pick the largest diagonal combination for stability.
    const double t = r(0, 0) + r(1, 1) + r(2, 2);
    Quat q;
    if (t > 0.0) {
        const double s = std::sqrt(t + 1.0) * 2.0;
        q.w = 0.25 * s;
        q.x = (r(2, 1) - r(1, 2)) / s;
        q.y = (r(0, 2) - r(2, 0)) / s;
        q.z = (r(1, 0) - r(0, 1)) / s;
    } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
        const double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
        q.w = (r(2, 1) - r(1, 2)) / s;
        q.x = 0.25 * s;
        q.y = (r(0, 1) + r(1, 0)) / s;
        q.z = (r(0, 2) + r(2, 0)) / s;
    } else if (r(1, 1) > r(2, 2)) {
        const double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
        q.w = (r(0, 2) - r(2, 0)) / s;
        q.x = (r(0, 1) + r(1, 0)) / s;
        q.y = 0.25 * s;
        q.z = (r(1, 2) + r(2, 1)) / s;
    } else {
        const double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
        q.w = (r(1, 0) - r(0, 1)) / s;
        q.x = (r(0, 2) + r(2, 0)) / s;
        q.y = (r(1, 2) + r(2, 1)) / s;
        q.z = 0.25 * s;
    }
    return normalized(q);
}

Quat quat_from_axis_angle(const Vec3& axis, double radians) {
    const double n = norm(axis);
    if (!(n > 0.0)) throw InvalidInput("quat_from_axis_angle: zero axis");
    const double half = 0.5 * radians;
    const double s = std::sin(half) / n;
    return {std::cos(half), axis.x * s, axis.y * s, axis.z * s};
}

double quat_angle_deg(const Quat& a, const Quat& b) {
    // atan2 form: acos(|dot|) loses ~1e-6 deg of precision near zero angle.
    const Quat r = hamilton(conjugate(normalized(a)), normalized(b));
    const double s = std::sqrt(r.x * r.x + r.y * r.y + r.z * r.z);
    return 2.0 * std::atan2(s, std::abs(r.w)) * 180.0 / kPi;
}

Vec3 random_unit_vector(Rng& rng) {
    // Marsaglia: z uniform in [-1, 1], azimuth uniform.
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

Quat random_rotation(Rng& rng) {
    // Shoemake's subgroup algorithm: uniform over SO(3).
    const double u1 = rng.uniform();
    const double u2 = rng.uniform(0.0, 2.0 * kPi);
    const double u3 = rng.uniform(0.0, 2.0 * kPi);
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    return {a * std::sin(u2), a * std::cos(u2), b * std::sin(u3), b * std::cos(u3)};
}

Quat random_rotation_bounded(Rng& rng, double max_angle_rad) {
    if (max_angle_rad < 0.0) throw InvalidInput("random_rotation_bounded: negative angle bound");
    const Vec3 axis = random_unit_vector(rng);
    const double angle = rng.uniform(0.0, max_angle_rad);
    return quat_from_axis_angle(axis, angle);
}

bool is_unit(const Quat& q, double tol) {
    const double n2 = q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z;
    return std::isfinite(n2) && std::abs(n2 - 1.0) <= tol;
}

Pose compose(const Pose& outer, const Pose& inner) {
    Pose out;
    out.rotation = normalized(hamilton(outer.rotation, inner.rotation));
    out.translation = rotate(outer.rotation, inner.translation) + outer.translation;
    return out;
}

Pose inverse(const Pose& p) {
    Pose out;
    out.rotation = conjugate(normalized(p.rotation));
    out.translation = -rotate(out.rotation, p.translation);
    return out;
}

Vec3 apply(const Pose& p, const Vec3& v) { return rotate(p.rotation, v) + p.translation; }

Vec3 centroid(const PointCloud& cloud) {
    if (cloud.empty()) throw InvalidInput("centroid: empty cloud");
    Vec3 c;
    for (const Vec3& p : cloud.points) c += p;
    return c / static_cast<double>(cloud.size());
}

PointCloud apply_pose(const Pose& p, const PointCloud& cloud) {
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const Vec3& q : cloud.points) out.points.push_back(apply(p, q));
    return out;
}

PointCloud render_part(const Part& part) { return apply_pose(part.pose, part.canonical); }

PointCloud render_scene(const Scene& scene) {
    PointCloud out;
    std::size_t total = 0;
    for (const Part& part : scene.parts) total += part.canonical.size();
    out.points.reserve(total);
    for (const Part& part : scene.parts) {
        for (const Vec3& p : part.canonical.points) out.points.push_back(apply(part.pose, p));
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> part_ranges(const Scene& scene) {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    ranges.reserve(scene.parts.size());
    std::size_t offset = 0;
    for (const Part& part : scene.parts) {
        ranges.emplace_back(offset, offset + part.canonical.size());
        offset += part.canonical.size();
    }
    return ranges;
}

RigidAlignment kabsch_align(const PointCloud& source, const PointCloud& target) {
    const std::size_t n = source.size();
    if (n != target.size()) throw CorrespondenceError("kabsch_align: clouds differ in size");
    if (n < 3) throw DegenerateGeometry("kabsch_align: need at least 3 points");
    if (!finite(source) || !finite(target)) throw InvalidInput("kabsch_align: non-finite coordinates");

    const Vec3 cs = centroid(source), ct = centroid(target);

    // Cross-covariance H = sum s_c t_c^T and source scatter for the
    // degeneracy check.
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 s = source.points[i] - cs;
        const Vec3 t = target.points[i] - ct;
        const Eigen::Vector3d se(s.x, s.y, s.z), te(t.x, t.y, t.z);
        h += se * te.transpose();
        scatter += se * se.transpose();
    }

    // Collinear (or coincident) source: second eigenvalue of the scatter
    // vanishes and the rotation about the line is unconstrained.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
    const Eigen::Vector3d ev = eig.eigenvalues();  // ascending
    if (ev(1) <= ev(2) * 1e-14) throw DegenerateGeometry("kabsch_align: source points are collinear");

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d u = svd.matrixU();
    Eigen::Matrix3d v = svd.matrixV();
    Eigen::Matrix3d r = v * u.transpose();
    if (r.determinant() < 0.0) {
        v.col(2) *= -1.0;
        r = v * u.transpose();
    }

    Mat3 rm;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) rm(a, b) = r(a, b);

    RigidAlignment out;
    out.rotation = quat_from_matrix(rm);
    out.translation = ct - rotate(out.rotation, cs);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 moved = rotate(out.rotation, source.points[i]) + out.translation;
        ss += squared_distance(moved, target.points[i]);
    }
    out.residual = std::sqrt(ss / static_cast<double>(n));
    return out;
}

RigidAlignment icp_align(const PointCloud& source, const PointCloud& target,
                         int max_iterations, double tol) {
    if (source.empty() || target.empty()) throw InvalidInput("icp_align: empty cloud");
    if (max_iterations < 1) throw InvalidInput("icp_align: max_iterations must be >= 1");
    if (!finite(source) || !finite(target)) throw InvalidInput("icp_align: non-finite coordinates");

    const KdTree tree(target.points);
    Pose accum;  // identity

    auto matched_rms = [&](const PointCloud& moved) {
        double ss = 0.0;
        for (const Vec3& p : moved.points) ss += tree.nearest(p).squared_distance;
        return std::sqrt(ss / static_cast<double>(moved.size()));
    };

    PointCloud moved = source;
    double prev = std::numeric_limits<double>::max();
    double current = matched_rms(moved);

    for (int iter = 0; iter < max_iterations && prev - current > tol; ++iter) {
        PointCloud matches;
        matches.points.reserve(moved.size());
        for (const Vec3& p : moved.points) matches.points.push_back(target.points[tree.nearest(p).index]);

        Pose delta;
        try {
            const RigidAlignment step = kabsch_align(moved, matches);
            delta.rotation = step.rotation;
            delta.translation = step.translation;
        } catch (const DegenerateGeometry&) {
            // Fall back to matching centroids; still a non-increasing step.
            delta.translation = centroid(matches) - centroid(moved);
        }
        accum = compose(delta, accum);
        moved = apply_pose(delta, moved);
        prev = current;
        current = matched_rms(moved);
    }

    RigidAlignment out;
    out.rotation = accum.rotation;
    out.translation = accum.translation;
    out.residual = current;
    return out;
}

double chamfer_distance(const PointCloud& a, const PointCloud& b) {
    if (a.empty() || b.empty()) throw InvalidInput("chamfer_distance: empty cloud");
    if (!finite(a) || !finite(b)) throw InvalidInput("chamfer_distance: non-finite coordinates");
    const KdTree ta(a.points), tb(b.points);
    double ab = 0.0;
    for (const Vec3& p : a.points) ab += tb.nearest(p).squared_distance;
    double ba = 0.0;
    for (const Vec3& p : b.points) ba += ta.nearest(p).squared_distance;
    return ab / static_cast<double>(a.size()) + ba / static_cast<double>(b.size());
}

}  // namespace assembloid
