#pragma once

#include "splatgrasp/geometry.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace splatgrasp {

struct Neighbor {
    std::size_t index = 0;
    double distance2 = 0.0;

    bool operator<(const Neighbor &o) const {
        return distance2 < o.distance2 || (distance2 == o.distance2 && index < o.index);
    }
};

/// Static 3D k-d tree. Equal distances are ordered by point index so every
/// query has a unique answer.
class KdTree {
public:
    explicit KdTree(std::span<const Point3> points);

    std::size_t size() const { return mPoints.size(); }

    /// Requires a nonempty tree.
    Neighbor nearest(const Point3 &q) const;
    /// Up to k neighbors sorted by (distance, index).
    std::vector<Neighbor> knn(const Point3 &q, std::size_t k) const;
    /// All points with distance <= radius, sorted by (distance, index).
    std::vector<Neighbor> radius(const Point3 &q, double radius) const;

private:
    struct Node {
        std::size_t begin = 0, end = 0; // range into mOrder
        int axis = -1;                  // -1 for leaves
        double split = 0.0;
        std::size_t left = 0, right = 0;
    };

    std::size_t build(std::size_t begin, std::size_t end);
    void knnSearch(std::size_t node, const Point3 &q, std::size_t k,
                   std::vector<Neighbor> &heap) const;
    void radiusSearch(std::size_t node, const Point3 &q, double r2,
                      std::vector<Neighbor> &out) const;

    std::vector<Point3> mPoints;
    std::vector<std::size_t> mOrder;
    std::vector<Node> mNodes;
};

} // namespace splatgrasp
