#pragma once

#include "scv2/types.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace scv2 {

// Median-split kd-tree over 3D points. Queries return exact nearest
// neighbors; distances are computed with the same expression as a linear
// scan, so results match brute force bit for bit.
class KdTree {
public:
    explicit KdTree(const MatX3& pts) : pts_(pts) {
        idx_.resize(size_t(pts.rows()));
        std::iota(idx_.begin(), idx_.end(), 0);
        nodes_.reserve(idx_.size() * 2 + 1);
        root_ = build(0, int(idx_.size()), 0);
    }

    Eigen::Index size() const { return pts_.rows(); }

    struct Result {
        int index = -1;
        double sq_dist = std::numeric_limits<double>::infinity();
    };

    // Nearest neighbor; `skip` excludes one point (for self queries).
    Result nearest(const Vector3d& q, int skip = -1) const {
        Result best;
        if (root_ >= 0) search(root_, q, skip, best);
        return best;
    }

    // Indices of the k nearest neighbors (ascending distance).
    std::vector<Result> knn(const Vector3d& q, int k, int skip = -1) const {
        std::vector<Result> heap; // max-heap by sq_dist
        if (root_ >= 0) search_k(root_, q, skip, size_t(k), heap);
        std::sort(heap.begin(), heap.end(),
                  [](const Result& a, const Result& b) { return a.sq_dist < b.sq_dist; });
        return heap;
    }

private:
    struct Node {
        int point = -1;
        int left = -1, right = -1;
        int axis = 0;
    };

    int build(int lo, int hi, int depth) {
        if (lo >= hi) return -1;
        int axis = depth % 3;
        int mid = (lo + hi) / 2;
        std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                         [&](int a, int b) {
                             if (pts_(a, axis) != pts_(b, axis))
                                 return pts_(a, axis) < pts_(b, axis);
                             return a < b;
                         });
        int node = int(nodes_.size());
        nodes_.push_back({idx_[size_t(mid)], -1, -1, axis});
        int l = build(lo, mid, depth + 1);
        int r = build(mid + 1, hi, depth + 1);
        nodes_[size_t(node)].left = l;
        nodes_[size_t(node)].right = r;
        return node;
    }

    void search(int node, const Vector3d& q, int skip, Result& best) const {
        const Node& n = nodes_[size_t(node)];
        if (n.point != skip) {
            double d = (pts_.row(n.point).transpose() - q).squaredNorm();
            if (d < best.sq_dist || (d == best.sq_dist && n.point < best.index)) {
                best.sq_dist = d;
                best.index = n.point;
            }
        }
        double delta = q[n.axis] - pts_(n.point, n.axis);
        int first = delta < 0 ? n.left : n.right;
        int second = delta < 0 ? n.right : n.left;
        if (first >= 0) search(first, q, skip, best);
        if (second >= 0 && delta * delta <= best.sq_dist) search(second, q, skip, best);
    }

    void search_k(int node, const Vector3d& q, int skip, size_t k,
                  std::vector<Result>& heap) const {
        const Node& n = nodes_[size_t(node)];
        auto cmp = [](const Result& a, const Result& b) { return a.sq_dist < b.sq_dist; };
        if (n.point != skip) {
            double d = (pts_.row(n.point).transpose() - q).squaredNorm();
            if (heap.size() < k) {
                heap.push_back({n.point, d});
                std::push_heap(heap.begin(), heap.end(), cmp);
            } else if (d < heap.front().sq_dist) {
                std::pop_heap(heap.begin(), heap.end(), cmp);
                heap.back() = {n.point, d};
                std::push_heap(heap.begin(), heap.end(), cmp);
            }
        }
        double delta = q[n.axis] - pts_(n.point, n.axis);
        int first = delta < 0 ? n.left : n.right;
        int second = delta < 0 ? n.right : n.left;
        if (first >= 0) search_k(first, q, skip, k, heap);
        double bound = heap.size() < k ? std::numeric_limits<double>::infinity()
                                       : heap.front().sq_dist;
        if (second >= 0 && delta * delta <= bound) search_k(second, q, skip, k, heap);
    }

    const MatX3 pts_;
    std::vector<int> idx_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

// Median over each point's distance to its nearest other point.
inline double median_nn_distance(const MatX3& pts) {
    if (pts.rows() < 2) return 0.0;
    KdTree tree(pts);
    std::vector<double> d(size_t(pts.rows()));
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
        d[size_t(i)] = std::sqrt(tree.nearest(pts.row(i), int(i)).sq_dist);
    size_t mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + mid, d.end());
    return d[mid];
}

} // namespace scv2
