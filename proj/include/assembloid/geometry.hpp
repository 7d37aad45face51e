#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "assembloid/rng.hpp"

namespace assembloid {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3 operator-() const { return {-x, -y, -z}; }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double squared_norm(const Vec3& v) { return dot(v, v); }
double norm(const Vec3& v);
inline double squared_distance(const Vec3& a, const Vec3& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}
bool finite(const Vec3& v);

// Row-major 3x3 matrix. Only the handful of operations the library needs.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    double& operator()(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }
    double operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }
    static Mat3 zero();
};

Mat3 transpose(const Mat3& a);
Mat3 matmul(const Mat3& a, const Mat3& b);
Vec3 apply(const Mat3& a, const Vec3& v);
double determinant(const Mat3& a);

// Unit quaternion, scalar-first (w, x, y, z). Identity by default.
struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    Quat() = default;
    Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}
};

Quat normalized(const Quat& q);
Quat conjugate(const Quat& q);
Quat hamilton(const Quat& a, const Quat& b);
Vec3 rotate(const Quat& q, const Vec3& v);
Mat3 rotation_matrix(const Quat& q);
Quat quat_from_matrix(const Mat3& r);
Quat quat_from_axis_angle(const Vec3& axis, double radians);

// Angle between two rotations along the shortest geodesic, in degrees.
// Sign-invariant: q and -q are the same rotation.
double quat_angle_deg(const Quat& a, const Quat& b);

// Uniform random rotation (Shoemake's method).
Quat random_rotation(Rng& rng);
// Random rotation with axis uniform on the sphere and angle uniform in
// [0, max_angle_rad].
Quat random_rotation_bounded(Rng& rng, double max_angle_rad);
Vec3 random_unit_vector(Rng& rng);

// Rigid transform p -> rotate(rotation, p) + translation.
struct Pose {
    Quat rotation;
    Vec3 translation;
};

// compose(outer, inner): apply inner first, then outer.
Pose compose(const Pose& outer, const Pose& inner);
Pose inverse(const Pose& p);
Vec3 apply(const Pose& p, const Vec3& v);
bool is_unit(const Quat& q, double tol = 1e-9);

struct PointCloud {
    std::vector<Vec3> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

Vec3 centroid(const PointCloud& cloud);
PointCloud apply_pose(const Pose& p, const PointCloud& cloud);
bool finite(const PointCloud& cloud);

// A rigid part: a canonical-frame cloud plus its current pose in the scene.
struct Part {
    PointCloud canonical;
    Pose pose;
};

struct Scene {
    std::vector<Part> parts;
    std::string label;
};

PointCloud render_part(const Part& part);
// Concatenation of all placed parts, in part order.
PointCloud render_scene(const Scene& scene);
// Half-open [begin, end) index ranges of each part inside render_scene output.
std::vector<std::pair<std::size_t, std::size_t>> part_ranges(const Scene& scene);

struct RigidAlignment {
    Quat rotation;
    Vec3 translation;
    double residual = 0.0;  // RMS point distance under the final correspondence
};

// Least-squares rigid alignment of index-paired clouds (SVD orthogonal
// Procrustes, det +1). Throws CorrespondenceError on size mismatch and
// DegenerateGeometry when source has < 3 points or is collinear.
RigidAlignment kabsch_align(const PointCloud& source, const PointCloud& target);

// Iterative closest point: nearest-neighbour matching + kabsch_align per
// round, restarted from the accumulated transform. Residuals are
// non-increasing; stops when the improvement drops below tol.
RigidAlignment icp_align(const PointCloud& source, const PointCloud& target,
                         int max_iterations = 30, double tol = 1e-10);

// Symmetric chamfer distance with squared point distances, each direction
// averaged over its own cloud.
double chamfer_distance(const PointCloud& a, const PointCloud& b);

}  // namespace assembloid
