#pragma once

#include <cstddef>
#include <vector>

#include "assembloid/geometry.hpp"

namespace assembloid {

// Static 3-d tree over a point set. Median split on the widest axis.
class KdTree {
public:
    explicit KdTree(const std::vector<Vec3>& points);

    struct Hit {
        std::size_t index = 0;
        double squared_distance = 0.0;
    };

    // Nearest point to the query. The tree must be non-empty.
    Hit nearest(const Vec3& query) const;

    // True when any point lies within radius of the query (inclusive).
    bool any_within(const Vec3& query, double radius) const;

    std::size_t size() const { return points_.size(); }

private:
    struct Node {
        int axis = -1;              // -1 marks a leaf
        double split = 0.0;
        std::size_t begin = 0, end = 0;  // leaf payload range in order_
        int left = -1, right = -1;
    };

    void build(std::size_t begin, std::size_t end, int node);
    void search(int node, const Vec3& query, Hit& best) const;
    bool search_within(int node, const Vec3& query, double r2) const;

    std::vector<Vec3> points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
};

}  // namespace assembloid
