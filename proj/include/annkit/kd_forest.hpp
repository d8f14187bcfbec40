#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "annkit/dataset.hpp"

namespace annkit {

constexpr std::uint32_t kLeafMarker = 0xffffffffu;

/// One tree node. Internal nodes carry a split; leaves own the contiguous
/// range [left, right) of point_index. even_split marks the degenerate-split
/// fallback (see build_forest), after which descent may drift off the owning
/// leaf for points tied at the boundary.
struct KdNode {
    std::uint32_t split_dim = kLeafMarker;  // kLeafMarker => leaf
    float split_val = 0.0f;
    std::uint32_t left = 0;   // internal: left child; leaf: range start
    std::uint32_t right = 0;  // internal: right child; leaf: range end
    std::uint32_t depth = 0;  // root = 0
    bool even_split = false;

    bool is_leaf() const { return split_dim == kLeafMarker; }
};

struct KdTree {
    std::vector<KdNode> nodes;
    std::uint32_t root = 0;
    std::uint32_t leaf_cap = 0;  // S_leaf: max points per leaf
    std::uint32_t n = 0;
    std::uint32_t dim = 0;
    std::vector<std::uint32_t> point_index;  // permutation; leaf ranges partition it
    std::uint32_t leaf_count = 0;

    std::span<const std::uint32_t> leaf_points(std::uint32_t node) const {
        const KdNode& nd = nodes[node];
        return {point_index.data() + nd.left, nd.right - nd.left};
    }
};

/// T randomized truncated KD-trees over one VectorSet. Trees share the leaf
/// capacity and differ only through per-tree random split-dimension streams,
/// so a forest is reproducible from (data, n_trees, leaf_cap, seed) alone.
struct KdForest {
    std::vector<KdTree> trees;
    std::uint64_t seed = 0;
    std::uint32_t n = 0;
    std::uint32_t dim = 0;
    std::uint32_t leaf_cap = 0;
};

// Builds the forest. Each node picks a uniformly random dimension and splits
// by comparison against the mean on it ("<= mean" goes left). When a side
// would come out empty or the imbalance exceeds 4:1, the node falls back to
// an even split at the median position, ordered by (value, id).
KdForest build_forest(const VectorSet& vs, std::uint32_t n_trees, std::uint32_t leaf_cap,
                      std::uint64_t seed, std::uint32_t workers = 1);

// Best-bin-first enumeration: descend to the first leaf, queueing every
// off-path sibling keyed by the detour cost accumulated along the path
// (sum of |q[split_dim] - split_val| at the branch points), then repeatedly
// pop the cheapest subtree and descend it. Emits up to n_leaves distinct
// leaves; the first is always the pure-descent leaf. n_leaves clamps to the
// tree's leaf count.
std::vector<std::uint32_t> search_leaves(const KdTree& tree, std::span<const float> q,
                                         std::uint32_t n_leaves);

// Pure descent from `node` by the split rule (q[split_dim] <= split_val goes
// left); returns the single leaf reached. A leaf input returns itself.
std::uint32_t descend_from(const KdTree& tree, std::span<const float> q, std::uint32_t node);

// Binary forest index file; load validates every structural invariant.
void save_forest(const KdForest& forest, const std::string& path);
KdForest load_forest(const std::string& path);

}  // namespace annkit
