#pragma once

#include <cstdint>
#include <vector>

#include "annkit/dataset.hpp"
#include "annkit/kd_forest.hpp"
#include "annkit/knn_graph.hpp"
#include "annkit/neighbor_pool.hpp"

namespace annkit {

/// Working state of graph construction: one candidate pool per point plus the
/// forward (g_new/g_old, split by the new flag) and reverse (g_rnew/g_rold)
/// adjacency lists the local-join rounds consume. Reverse lists are rebuilt
/// from scratch every iteration.
struct RefineState {
    std::uint32_t k = 0;
    std::uint32_t pool_cap = 0;    // P: per-point candidate pool capacity
    std::uint32_t sample_cap = 0;  // L: per-list sampling bound
    std::uint64_t seed = 0;
    std::uint32_t iteration = 0;
    std::uint64_t dist_comps = 0;
    std::uint64_t last_changes = 0;  // accepted pool inserts in the latest iteration

    std::vector<NeighborPool> pools;
    std::vector<std::vector<std::uint32_t>> g_new, g_old, g_rnew, g_rold;

    std::uint32_t n() const { return static_cast<std::uint32_t>(pools.size()); }
};

// Hierarchical divide-and-conquer initialization. For every point and every
// tree the candidate set holds the point's own leaf plus, walking up from the
// leaf parent to conquer_depth, one leaf per level picked by descending the
// off-path sibling subtree with the point itself as classifier input. Pools
// keep the closest pool_cap candidates, all flagged new and unchecked.
RefineState init_graph(const VectorSet& vs, const KdForest& forest, std::uint32_t k,
                       std::uint32_t conquer_depth, std::uint32_t pool_cap,
                       std::uint32_t sample_cap, std::uint64_t seed, std::uint32_t workers = 1);

// Random-initialization baseline: each pool is filled with pool_cap distinct
// random points.
RefineState init_random(const VectorSet& vs, std::uint32_t k, std::uint32_t pool_cap,
                        std::uint32_t sample_cap, std::uint64_t seed, std::uint32_t workers = 1);

// Local-join refinement: every pair within a point's new list, and every
// new x old pair, is evaluated and offered symmetrically to both endpoint
// pools; accepted offers feed the reverse lists. After each round pools keep
// the closest P, the scan of each pool moves up to L new-flagged entries into
// g_new (clearing their flag) and the old prefix into g_old, and the reverse
// lists (sampled down to L) are unioned in. Stops early when an iteration
// changes fewer than min_change_rate of all pool slots.
void refine_nn_descent(RefineState& state, const VectorSet& vs, std::uint32_t max_iters,
                       std::uint32_t workers = 1, double min_change_rate = 0.001);

// Neighbor-of-neighbor refinement baseline: per iteration each point expands
// its unchecked pool entries, computing the distance to every point in their
// pools and merging into its own.
void refine_nn_expansion(RefineState& state, const VectorSet& vs, std::uint32_t max_iters,
                         std::uint32_t workers = 1, double min_change_rate = 0.001);

// Closest k per pool, sorted ascending. Requires n-1 >= k and k <= pool_cap.
KnnGraph finalize(RefineState& state, const VectorSet& vs, std::uint32_t k);

enum class BuildStrategy {
    efanna,          // forest init + nn-descent
    random_descent,  // random init + nn-descent
    nn_expansion,    // random init + nn-expansion
    brute_force,     // exact graph, no refinement
    init_only,       // forest init, no refinement
};

const char* to_string(BuildStrategy s);
BuildStrategy strategy_from_string(const std::string& s);

struct BuildParams {
    std::uint32_t k = 10;
    std::uint32_t conquer_depth = 4;  // Dep
    std::uint32_t pool_cap = 30;      // P
    std::uint32_t sample_cap = 20;    // L
    std::uint32_t max_iters = 8;
    BuildStrategy strategy = BuildStrategy::efanna;
    std::uint64_t seed = 1;
    std::uint32_t workers = 1;
    double min_change_rate = 0.001;
};

struct IterationLog {
    std::uint32_t iteration = 0;     // 0 = state after initialization
    double seconds = 0.0;            // cumulative algorithmic time
    std::uint64_t dist_comps = 0;    // cumulative
    std::uint64_t changes = 0;       // accepted pool inserts in this step
    double accuracy = -1.0;          // vs supplied ground truth; -1 when absent
};

struct BuildStats {
    double init_seconds = 0.0;
    double refine_seconds = 0.0;
    std::uint64_t dist_comps = 0;
    bool early_stopped = false;
    std::vector<IterationLog> iterations;

    double total_seconds() const { return init_seconds + refine_seconds; }
};

struct BuildResult {
    KnnGraph graph;
    BuildStats stats;
};

// init -> refine -> finalize per the chosen strategy. When gt is given, each
// IterationLog row carries the graph accuracy of the current pools; the time
// spent measuring it is not charged to the build.
BuildResult build_graph(const VectorSet& vs, const KdForest* forest, const BuildParams& params,
                        const GroundTruth* gt = nullptr);

namespace detail {

// One refinement round; returns the number of accepted pool inserts.
std::uint64_t nn_descent_iteration(RefineState& state, const VectorSet& vs, std::uint32_t workers);
std::uint64_t nn_expansion_iteration(RefineState& state, const VectorSet& vs,
                                     std::uint32_t workers);

// Pool scan: up to L new-flagged entries into g_new (flags cleared), the old
// prefix into g_old.
void rebuild_sample_lists(RefineState& state);
// Union the (sampled, deduplicated) reverse lists into the forward lists.
void union_reverse_lists(RefineState& state);

// Mean per-point share of pool top-k ids inside the ground-truth rows.
double pool_topk_accuracy(const RefineState& state, const GroundTruth& gt);

}  // namespace detail

}  // namespace annkit
