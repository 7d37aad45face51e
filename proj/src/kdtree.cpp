#include "assembloid/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "assembloid/errors.hpp"

namespace assembloid {

namespace {

constexpr std::size_t kLeafSize = 16;

double component(const Vec3& v, int axis) {
    return axis == 0 ? v.x : (axis == 1 ? v.y : v.z);
}

}  // namespace

KdTree::KdTree(const std::vector<Vec3>& points) : points_(points) {
    if (points_.empty()) throw InvalidInput("KdTree: empty point set");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    nodes_.push_back({});
    build(0, points_.size(), 0);
}

void KdTree::build(std::size_t begin, std::size_t end, int node) {
    if (end - begin <= kLeafSize) {
        nodes_[static_cast<std::size_t>(node)].begin = begin;
        nodes_[static_cast<std::size_t>(node)].end = end;
        return;
    }
    Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max()};
    Vec3 hi{-std::numeric_limits<double>::max(), -std::numeric_limits<double>::max(),
            -std::numeric_limits<double>::max()};
    for (std::size_t i = begin; i < end; ++i) {
        const Vec3& p = points_[order_[i]];
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    const Vec3 extent = hi - lo;
    int axis = 0;
    if (extent.y > component(extent, axis)) axis = 1;
    if (extent.z > component(extent, axis)) axis = 2;

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                         return component(points_[a], axis) < component(points_[b], axis);
                     });

    const int left = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    const int right = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    Node& n = nodes_[static_cast<std::size_t>(node)];
    n.axis = axis;
    n.split = component(points_[order_[mid]], axis);
    n.left = left;
    n.right = right;
    build(begin, mid, left);
    build(mid, end, right);
}

KdTree::Hit KdTree::nearest(const Vec3& query) const {
    Hit best;
    best.squared_distance = std::numeric_limits<double>::max();
    search(0, query, best);
    return best;
}

void KdTree::search(int node, const Vec3& query, Hit& best) const {
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    if (n.axis < 0) {
        for (std::size_t i = n.begin; i < n.end; ++i) {
            const double d2 = squared_distance(query, points_[order_[i]]);
            if (d2 < best.squared_distance) {
                best.squared_distance = d2;
                best.index = order_[i];
            }
        }
        return;
    }
    const double delta = component(query, n.axis) - n.split;
    const int near = delta < 0 ? n.left : n.right;
    const int far = delta < 0 ? n.right : n.left;
    search(near, query, best);
    if (delta * delta < best.squared_distance) search(far, query, best);
}

bool KdTree::any_within(const Vec3& query, double radius) const {
    if (radius < 0) throw InvalidInput("KdTree::any_within: negative radius");
    return search_within(0, query, radius * radius);
}

bool KdTree::search_within(int node, const Vec3& query, double r2) const {
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    if (n.axis < 0) {
        for (std::size_t i = n.begin; i < n.end; ++i) {
            if (squared_distance(query, points_[order_[i]]) <= r2) return true;
        }
        return false;
    }
    const double delta = component(query, n.axis) - n.split;
    const int near = delta < 0 ? n.left : n.right;
    const int far = delta < 0 ? n.right : n.left;
    if (search_within(near, query, r2)) return true;
    if (delta * delta <= r2) return search_within(far, query, r2);
    return false;
}

}  // namespace assembloid
