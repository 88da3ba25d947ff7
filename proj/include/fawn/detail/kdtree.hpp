#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace fawn::detail {

// Static 3D KD-tree for exact nearest-neighbor distances. Results equal
// a brute-force scan: pruning only discards boxes strictly farther than
// the current best squared distance.
class KdTree {
public:
    explicit KdTree(std::span<const Eigen::Vector3d> points) : points_(points) {
        order_.resize(points.size());
        for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
        nodes_.reserve(points.size() * 2);
        if (!points_.empty()) root_ = build(0, static_cast<std::uint32_t>(points.size()));
    }

    // squared distance to the closest stored point
    double nearest_sq(const Eigen::Vector3d& q) const {
        double best = std::numeric_limits<double>::infinity();
        if (root_ >= 0) search(root_, q, best);
        return best;
    }

private:
    struct Node {
        Eigen::Vector3d lo, hi;  // bounding box
        std::uint32_t begin, end;
        int left = -1, right = -1;
    };

    int build(std::uint32_t begin, std::uint32_t end) {
        Node node;
        node.begin = begin;
        node.end = end;
        node.lo = node.hi = points_[order_[begin]];
        for (std::uint32_t i = begin + 1; i < end; ++i) {
            node.lo = node.lo.cwiseMin(points_[order_[i]]);
            node.hi = node.hi.cwiseMax(points_[order_[i]]);
        }
        int id = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        if (end - begin > kLeafSize) {
            int axis;
            (node.hi - node.lo).maxCoeff(&axis);
            std::uint32_t mid = (begin + end) / 2;
            std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                             [&](std::uint32_t a, std::uint32_t b) {
                                 return points_[a][axis] < points_[b][axis];
                             });
            int l = build(begin, mid);
            int r = build(mid, end);
            nodes_[id].left = l;
            nodes_[id].right = r;
        }
        return id;
    }

    static double box_dist_sq(const Node& n, const Eigen::Vector3d& q) {
        double d = 0.0;
        for (int a = 0; a < 3; ++a) {
            double e = std::max({n.lo[a] - q[a], 0.0, q[a] - n.hi[a]});
            d += e * e;
        }
        return d;
    }

    void search(int id, const Eigen::Vector3d& q, double& best) const {
        const Node& n = nodes_[id];
        if (n.left < 0) {
            for (std::uint32_t i = n.begin; i < n.end; ++i) {
                best = std::min(best, (points_[order_[i]] - q).squaredNorm());
            }
            return;
        }
        double dl = box_dist_sq(nodes_[n.left], q);
        double dr = box_dist_sq(nodes_[n.right], q);
        int first = n.left, second = n.right;
        if (dr < dl) {
            std::swap(first, second);
            std::swap(dl, dr);
        }
        if (dl < best) search(first, q, best);
        if (dr < best) search(second, q, best);
    }

    static constexpr std::uint32_t kLeafSize = 16;

    std::span<const Eigen::Vector3d> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace fawn::detail
