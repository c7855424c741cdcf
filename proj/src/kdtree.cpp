#include "splatgrasp/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace splatgrasp {

namespace {
constexpr std::size_t kLeafSize = 8;
}

KdTree::KdTree(std::span<const Point3> points) : mPoints(points.begin(), points.end()) {
    mOrder.resize(mPoints.size());
    std::iota(mOrder.begin(), mOrder.end(), std::size_t{0});
    if (!mPoints.empty()) {
        mNodes.reserve(2 * mPoints.size() / kLeafSize + 1);
        build(0, mPoints.size());
    }
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
    const std::size_t id = mNodes.size();
    mNodes.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    Point3 lo = mPoints[mOrder[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
        lo = lo.cwiseMin(mPoints[mOrder[i]]);
        hi = hi.cwiseMax(mPoints[mOrder[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) return id; // all coincident: keep as a leaf

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(mOrder.begin() + begin, mOrder.begin() + mid, mOrder.begin() + end,
                     [&](std::size_t a, std::size_t b) {
                         return mPoints[a][axis] < mPoints[b][axis] ||
                                (mPoints[a][axis] == mPoints[b][axis] && a < b);
                     });
    const double split = mPoints[mOrder[mid]][axis];
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    Node &node = mNodes[id];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
}

Neighbor KdTree::nearest(const Point3 &q) const {
    if (mPoints.empty()) throw std::invalid_argument("nearest() on an empty k-d tree");
    return knn(q, 1).front();
}

std::vector<Neighbor> KdTree::knn(const Point3 &q, std::size_t k) const {
    std::vector<Neighbor> heap;
    if (k == 0 || mPoints.empty()) return heap;
    heap.reserve(k + 1);
    knnSearch(0, q, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
}

void KdTree::knnSearch(std::size_t nodeId, const Point3 &q, std::size_t k,
                       std::vector<Neighbor> &heap) const {
    const Node &node = mNodes[nodeId];
    if (node.axis < 0) {
        for (std::size_t i = node.begin; i < node.end; ++i) {
            const std::size_t idx = mOrder[i];
            const Neighbor cand{idx, (mPoints[idx] - q).squaredNorm()};
            if (heap.size() < k) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end());
            } else if (cand < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end());
            }
        }
        return;
    }
    const double diff = q[node.axis] - node.split;
    const std::size_t nearSide = diff < 0.0 ? node.left : node.right;
    const std::size_t farSide = diff < 0.0 ? node.right : node.left;
    knnSearch(nearSide, q, k, heap);
    // <= keeps equal-distance candidates reachable for the index tie-break.
    if (heap.size() < k || diff * diff <= heap.front().distance2) knnSearch(farSide, q, k, heap);
}

std::vector<Neighbor> KdTree::radius(const Point3 &q, double r) const {
    std::vector<Neighbor> out;
    if (mPoints.empty() || r < 0.0) return out;
    radiusSearch(0, q, r * r, out);
    std::sort(out.begin(), out.end());
    return out;
}

void KdTree::radiusSearch(std::size_t nodeId, const Point3 &q, double r2,
                          std::vector<Neighbor> &out) const {
    const Node &node = mNodes[nodeId];
    if (node.axis < 0) {
        for (std::size_t i = node.begin; i < node.end; ++i) {
            const std::size_t idx = mOrder[i];
            const double d2 = (mPoints[idx] - q).squaredNorm();
            if (d2 <= r2) out.push_back({idx, d2});
        }
        return;
    }
    const double diff = q[node.axis] - node.split;
    if (diff <= 0.0 || diff * diff <= r2) radiusSearch(node.left, q, r2, out);
    if (diff >= 0.0 || diff * diff <= r2) radiusSearch(node.right, q, r2, out);
}

} // namespace splatgrasp
