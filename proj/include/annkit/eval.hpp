#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "annkit/dataset.hpp"
#include "annkit/knn_graph.hpp"

namespace annkit {

/// One measured metric with its per-point/per-query breakdown; value is the
/// mean of the breakdown.
struct EvalReport {
    std::string metric;
    double value = 0.0;
    std::vector<double> breakdown;
    double seconds = 0.0;
    std::uint64_t dist_comps = 0;
};

// Exact top-k by (dist, id). queries == nullptr selects self mode: each base
// point is its own query and self-matches are excluded (needs k <= n-1;
// query mode needs k <= n).
GroundTruth brute_force_knn(const VectorSet& base, const VectorSet* queries, std::uint32_t k,
                            std::uint32_t workers = 1, std::uint64_t* dist_comps = nullptr);

// Self-mode exact graph with distances kept, for use as a search index.
KnnGraph brute_force_graph(const VectorSet& base, std::uint32_t k, std::uint32_t workers = 1,
                           std::uint64_t* dist_comps = nullptr);

/// |result ∩ truth| / |truth|; both sides must have equal size.
double recall(std::span<const std::uint32_t> result_ids, std::span<const std::uint32_t> gt_row);

/// Mean per-point |row ∩ truth row| / k over all rows; order-free.
double graph_accuracy(const KnnGraph& graph, const GroundTruth& gt);
EvalReport graph_accuracy_report(const KnnGraph& graph, const GroundTruth& gt);

// For each k' in k_list: the fraction of graph edges whose target lies within
// the true k'-NN of the source. Non-decreasing in k'.
std::vector<std::pair<std::uint32_t, double>> accuracy_vs_k(const KnnGraph& graph,
                                                            const VectorSet& vs,
                                                            std::span<const std::uint32_t> k_list,
                                                            std::uint32_t workers = 1);

}  // namespace annkit
