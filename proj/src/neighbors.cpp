#include "knnsampler/neighbors.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <queue>

#include "knnsampler/errors.hpp"

namespace knnsampler {

namespace {

constexpr std::size_t kLeafSize = 16;

// Relative slack applied when pruning subtrees by the gap to a splitting
// plane.  The canonical distance and the gap are rounded independently, so a
// strict comparison could discard a boundary point; the final membership
// test always re-checks the canonical value.
constexpr double kPruneSlack = 1.0 + 4.0 * DBL_EPSILON;

} // namespace

std::vector<std::size_t> pick_uniform_subset(std::vector<std::size_t> candidates,
                                             std::size_t need, RngStream& rng) {
    if (need >= candidates.size()) {
        return candidates;
    }
    for (std::size_t t = 0; t < need; ++t) {
        const std::size_t j = t + static_cast<std::size_t>(rng.below(candidates.size() - t));
        std::swap(candidates[t], candidates[j]);
    }
    candidates.resize(need);
    std::sort(candidates.begin(), candidates.end());
    return candidates;
}

NeighborIndex::NeighborIndex(const std::vector<std::vector<double>>& points, Acceleration acceleration)
    : accel_(acceleration) {
    if (points.empty()) {
        throw ConsistencyError("neighbor index requires at least one point");
    }
    n_ = points.size();
    dim_ = points[0].size();
    if (dim_ == 0) {
        throw ConsistencyError("neighbor index requires dimension >= 1");
    }
    points_.resize(n_ * dim_);
    for (std::size_t i = 0; i < n_; ++i) {
        if (points[i].size() != dim_) {
            throw ConsistencyError("point dimension mismatch at index " + std::to_string(i));
        }
        std::copy(points[i].begin(), points[i].end(), points_.begin() + i * dim_);
    }
    if (accel_ == Acceleration::spatial_tree) {
        order_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            order_[i] = static_cast<std::uint32_t>(i);
        }
        nodes_.reserve(2 * n_ / kLeafSize + 2);
        build_node(0, static_cast<std::uint32_t>(n_));
    }
}

std::int32_t NeighborIndex::build_node(std::uint32_t begin, std::uint32_t end) {
    const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{0.0, 0, begin, end, -1, -1});

    const std::uint32_t count = end - begin;
    if (count <= kLeafSize) {
        return id;
    }

    // Split on the axis of widest spread, at the median coordinate.
    std::uint32_t best_axis = 0;
    double best_spread = -1.0;
    for (std::size_t a = 0; a < dim_; ++a) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::uint32_t i = begin; i < end; ++i) {
            const double v = points_[order_[i] * dim_ + a];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double spread = hi - lo;
        if (spread > best_spread) {
            best_spread = spread;
            best_axis = static_cast<std::uint32_t>(a);
        }
    }
    if (best_spread <= 0.0) {
        return id; // all points identical: keep as leaf
    }

    const std::uint32_t mid = begin + count / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t lhs, std::uint32_t rhs) {
                         return points_[lhs * dim_ + best_axis] < points_[rhs * dim_ + best_axis];
                     });
    const double split = points_[order_[mid] * dim_ + best_axis];

    nodes_[id].axis = best_axis;
    nodes_[id].split = split;
    const std::int32_t left = build_node(begin, mid);
    const std::int32_t right = build_node(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

double NeighborIndex::distance(std::span<const double> query, std::size_t i) const {
    const double* p = points_.data() + i * dim_;
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
        const double t = query[j] - p[j];
        s += t * t;
    }
    return std::sqrt(s);
}

double NeighborIndex::kth_distance_tree(std::span<const double> query, std::size_t k) const {
    // Max-heap of the k smallest canonical distances seen so far.
    std::priority_queue<double> heap;

    // Manual depth-first traversal, near child before the far child's gap
    // test.  Frames are addressed by position: pushing may reallocate.
    struct Frame {
        std::int32_t node;
        int stage;
    };
    std::vector<Frame> frames;
    frames.reserve(64);
    frames.push_back({0, 0});

    while (!frames.empty()) {
        const std::size_t fi = frames.size() - 1;
        const Node& node = nodes_[static_cast<std::size_t>(frames[fi].node)];
        if (node.leaf()) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const double d = distance(query, order_[i]);
                if (heap.size() < k) {
                    heap.push(d);
                } else if (d < heap.top()) {
                    heap.pop();
                    heap.push(d);
                }
            }
            frames.pop_back();
            continue;
        }
        const double gap = std::abs(query[node.axis] - node.split);
        const bool go_left_first = query[node.axis] <= node.split;
        const int stage = frames[fi].stage;
        if (stage == 0) {
            frames[fi].stage = 1;
            frames.push_back({go_left_first ? node.left : node.right, 0});
        } else if (stage == 1) {
            frames[fi].stage = 2;
            if (heap.size() < k || gap <= heap.top() * kPruneSlack) {
                frames.push_back({go_left_first ? node.right : node.left, 0});
            }
        } else {
            frames.pop_back();
        }
    }
    return heap.top();
}

void NeighborIndex::collect_within(std::span<const double> query, double radius,
                                   std::vector<std::pair<double, std::size_t>>& out) const {
    std::vector<std::int32_t> stack;
    stack.reserve(64);
    stack.push_back(0);
    while (!stack.empty()) {
        const Node& node = nodes_[static_cast<std::size_t>(stack.back())];
        stack.pop_back();
        if (node.leaf()) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const std::size_t idx = order_[i];
                const double d = distance(query, idx);
                if (d <= radius) {
                    out.emplace_back(d, idx);
                }
            }
            continue;
        }
        const double gap = std::abs(query[node.axis] - node.split);
        if (gap <= radius * kPruneSlack) {
            stack.push_back(node.left);
            stack.push_back(node.right);
        } else if (query[node.axis] <= node.split) {
            stack.push_back(node.left);
        } else {
            stack.push_back(node.right);
        }
    }
}

NeighborList NeighborIndex::query(std::span<const double> query, std::size_t k, RngStream& rng) const {
    if (query.size() != dim_) {
        throw ConsistencyError("query dimension does not match index");
    }
    if (k == 0 || k > n_) {
        throw BoundsError("k must satisfy 1 <= k <= n (k=" + std::to_string(k) +
                          ", n=" + std::to_string(n_) + ")");
    }

    // Step 1: the exact k-th smallest canonical distance.
    double dstar = 0.0;
    std::vector<std::pair<double, std::size_t>> candidates;
    if (accel_ == Acceleration::brute_force) {
        std::vector<double> dist_values(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            dist_values[i] = distance(query, i);
        }
        std::vector<double> work = dist_values;
        std::nth_element(work.begin(), work.begin() + (k - 1), work.end());
        dstar = work[k - 1];
        candidates.reserve(k + 8);
        for (std::size_t i = 0; i < n_; ++i) {
            if (dist_values[i] <= dstar) {
                candidates.emplace_back(dist_values[i], i);
            }
        }
    } else {
        dstar = kth_distance_tree(query, k);
        candidates.reserve(k + 8);
        collect_within(query, dstar, candidates);
    }

    // Step 2: members strictly inside the boundary are definite; boundary
    // ties fill the remaining slots uniformly at random.
    std::sort(candidates.begin(), candidates.end());
    std::size_t definite = 0;
    while (definite < candidates.size() && candidates[definite].first < dstar) {
        ++definite;
    }

    NeighborList out;
    out.indices.reserve(k);
    out.distances.reserve(k);
    for (std::size_t i = 0; i < definite; ++i) {
        out.indices.push_back(candidates[i].second);
        out.distances.push_back(candidates[i].first);
    }

    const std::size_t need = k - definite;
    std::vector<std::size_t> ties;
    ties.reserve(candidates.size() - definite);
    for (std::size_t i = definite; i < candidates.size(); ++i) {
        ties.push_back(candidates[i].second);
    }
    const std::vector<std::size_t> chosen = pick_uniform_subset(std::move(ties), need, rng);
    for (std::size_t idx : chosen) {
        out.indices.push_back(idx);
        out.distances.push_back(dstar);
    }
    return out;
}

} // namespace knnsampler
