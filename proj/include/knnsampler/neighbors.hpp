#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "knnsampler/rng.hpp"

namespace knnsampler {

enum class Acceleration { brute_force, spatial_tree };

// The k nearest indices in query order: distances are non-decreasing, and
// every non-member point lies at distance >= distances.back().
struct NeighborList {
    std::vector<std::size_t> indices;
    std::vector<double> distances;
};

// Uniformly random size-`need` subset of `candidates` (assumed sorted by
// index), returned sorted.  Consumes no draws when need >= candidates.size().
// This is the canonical boundary-tie selection used by every query path.
std::vector<std::size_t> pick_uniform_subset(std::vector<std::size_t> candidates,
                                             std::size_t need, RngStream& rng);

// Exact k-nearest-neighbour queries over a fixed point set under the
// Euclidean metric.  Both backends return identical results for equal RNG
// state: points strictly inside the k-th distance are always members, and
// points tied at the boundary distance are chosen uniformly at random.
// Immutable after construction; queries are concurrent-safe.
class NeighborIndex {
public:
    NeighborIndex(const std::vector<std::vector<double>>& points,
                  Acceleration acceleration = Acceleration::spatial_tree);

    std::size_t size() const { return n_; }
    std::size_t dim() const { return dim_; }
    Acceleration acceleration() const { return accel_; }

    std::span<const double> point(std::size_t i) const {
        return {points_.data() + i * dim_, dim_};
    }

    // Canonical query-to-point distance; all membership decisions use this
    // exact value, so backends cannot disagree.
    double distance(std::span<const double> query, std::size_t i) const;

    NeighborList query(std::span<const double> query, std::size_t k, RngStream& rng) const;

private:
    struct Node {
        double split = 0.0;
        std::uint32_t axis = 0;
        std::uint32_t begin = 0;
        std::uint32_t end = 0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        bool leaf() const { return left < 0; }
    };

    std::size_t n_ = 0;
    std::size_t dim_ = 0;
    Acceleration accel_;
    std::vector<double> points_; // n * dim, row-major
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> order_;

    std::int32_t build_node(std::uint32_t begin, std::uint32_t end);
    double kth_distance_tree(std::span<const double> query, std::size_t k) const;
    void collect_within(std::span<const double> query, double radius,
                        std::vector<std::pair<double, std::size_t>>& out) const;
};

} // namespace knnsampler
