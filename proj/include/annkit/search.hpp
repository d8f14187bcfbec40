#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "annkit/dataset.hpp"
#include "annkit/kd_forest.hpp"
#include "annkit/knn_graph.hpp"

namespace annkit {

struct SearchParams {
    std::uint32_t k_return = 10;   // K: results returned
    std::uint32_t pool_size = 100; // P: candidate pool kept between iterations
    std::uint32_t expansion = 100; // E: tree-seeded candidates kept before the loop
    std::uint32_t iters = 4;       // I
    std::uint32_t n_trees_used = 0;       // 0 = every tree in the forest
    std::uint32_t random_seed_count = 0;  // random init: candidates drawn; 0 = expansion
    std::uint64_t seed = 1;               // random init draws
};

struct SearchStats {
    std::uint64_t dist_comps = 0;
    std::uint32_t leaves_visited = 0;
    std::uint32_t graph_hops = 0;   // candidates expanded through the graph
    std::uint32_t seed_points = 0;  // distinct points examined while seeding
};

/// ids ascending by (dist, id); dists match dist_sq_q recomputation exactly.
struct SearchResult {
    std::vector<std::uint32_t> ids;
    std::vector<float> dists;
    SearchStats stats;
};

/// Online ANN search over a forest + graph index. Seeds a candidate set from
/// the top-N_node leaves of each tree (N_node = P / S_leaf / N_tree + 1,
/// truncating), keeps the E closest, then runs I rounds of graph expansion:
/// every unchecked candidate, in ascending distance order, offers its
/// not-yet-visited graph neighbors; the pool then keeps the closest P.
///
/// A per-query epoch-stamped visit table guarantees no distance is computed
/// twice within one call; already-computed points may re-enter the pool for
/// free. Holds per-query scratch, so one instance serves one thread at a
/// time; the index structures themselves are shared and read-only.
class GraphSearcher {
  public:
    GraphSearcher(const VectorSet& base, const KdForest* forest, const KnnGraph& graph);

    SearchResult search(std::span<const float> q, const SearchParams& params);

    // Baseline that replaces tree seeding with seeded-random candidates
    // (random_seed_count of them, expansion by default); the expansion loop is
    // identical.
    SearchResult search_random_init(std::span<const float> q, const SearchParams& params);

  private:
    struct Candidate {
        std::uint32_t id;
        float dist;
    };

    void begin_query(const SearchParams& params, std::size_t q_len);
    float visit(std::span<const float> q, std::uint32_t id, SearchStats& stats);
    SearchResult expand(std::span<const float> q, const SearchParams& params, SearchStats stats);

    const VectorSet& base_;
    const KdForest* forest_;
    const KnnGraph& graph_;
    std::vector<std::uint32_t> visit_stamp_, checked_stamp_;
    std::vector<float> visit_dist_;
    std::uint32_t epoch_ = 0;
    std::vector<Candidate> cand_, buffer_;
};

struct SweepPoint {
    std::uint32_t expansion = 0;  // E
    std::uint32_t pool_size = 0;  // P
};

struct SweepRow {
    std::uint32_t expansion = 0;
    std::uint32_t pool_size = 0;
    double mean_time_us = 0.0;
    double avg_recall = 0.0;
    double avg_dist_comps = 0.0;
    double avg_seed_points = 0.0;
};

// One row per sweep point, averaged over all queries; recall against the
// first k_return ids of each truth row. random_init switches to the
// random-seeded baseline, drawing per-query seeds from params.seed.
std::vector<SweepRow> recall_curve(const VectorSet& base, const KdForest* forest,
                                   const KnnGraph& graph, const VectorSet& queries,
                                   const GroundTruth& gt, std::span<const SweepPoint> sweep,
                                   const SearchParams& params, bool random_init = false,
                                   std::uint32_t workers = 1);

}  // namespace annkit
