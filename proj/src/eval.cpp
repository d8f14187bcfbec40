#include "annkit/eval.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>

#include "annkit/neighbor_pool.hpp"
#include "annkit/parallel.hpp"
#include "annkit/util.hpp"

namespace annkit {

namespace {

// Fills one output row with the exact top-k for `q`; self_id excludes a base
// point from its own row in self mode.
void exact_row(const VectorSet& base, std::span<const float> q, std::uint32_t self_id,
               std::uint32_t k, std::uint32_t* out_ids, float* out_dists) {
    NeighborPool pool(k);
    for (std::uint32_t j = 0; j < base.n; ++j) {
        if (j == self_id) continue;
        pool.insert(j, l2_sq(q.data(), base.row_ptr(j), base.dim), false);
    }
    const auto entries = pool.entries();
    for (std::uint32_t j = 0; j < k; ++j) {
        out_ids[j] = entries[j].id;
        if (out_dists) out_dists[j] = entries[j].dist;
    }
}

}  // namespace

GroundTruth brute_force_knn(const VectorSet& base, const VectorSet* queries, std::uint32_t k,
                            std::uint32_t workers, std::uint64_t* dist_comps) {
    const bool self_mode = queries == nullptr;
    if (base.n == 0) throw std::invalid_argument("brute_force_knn: empty base set");
    if (!self_mode && queries->dim != base.dim) {
        throw std::invalid_argument("brute_force_knn: query dim mismatch");
    }
    const std::uint32_t limit = self_mode ? base.n - 1 : base.n;
    if (k < 1 || k > limit) {
        throw std::invalid_argument("brute_force_knn: k=" + std::to_string(k) +
                                    " out of range (max " + std::to_string(limit) + ")");
    }
    const std::uint32_t nq = self_mode ? base.n : queries->n;
    GroundTruth gt;
    gt.n = nq;
    gt.k = k;
    gt.ids.resize(std::size_t(nq) * k);
    parallel_for(nq, workers, [&](std::uint32_t begin, std::uint32_t end) {
        for (std::uint32_t i = begin; i < end; ++i) {
            const auto q = self_mode ? base.row(i) : queries->row(i);
            exact_row(base, q, self_mode ? i : kInvalidId, k, gt.ids.data() + std::size_t(i) * k,
                      nullptr);
        }
    });
    if (dist_comps) {
        *dist_comps += std::uint64_t(nq) * (self_mode ? base.n - 1 : base.n);
    }
    return gt;
}

KnnGraph brute_force_graph(const VectorSet& base, std::uint32_t k, std::uint32_t workers,
                           std::uint64_t* dist_comps) {
    if (base.n == 0) throw std::invalid_argument("brute_force_graph: empty base set");
    if (k < 1 || k > base.n - 1) throw std::invalid_argument("brute_force_graph: k out of range");
    KnnGraph g;
    g.n = base.n;
    g.k = k;
    g.ids.resize(std::size_t(base.n) * k);
    g.dists.resize(std::size_t(base.n) * k);
    parallel_for(base.n, workers, [&](std::uint32_t begin, std::uint32_t end) {
        for (std::uint32_t i = begin; i < end; ++i) {
            exact_row(base, base.row(i), i, k, g.ids.data() + std::size_t(i) * k,
                      g.dists.data() + std::size_t(i) * k);
        }
    });
    if (dist_comps) *dist_comps += std::uint64_t(base.n) * (base.n - 1);
    return g;
}

double recall(std::span<const std::uint32_t> result_ids, std::span<const std::uint32_t> gt_row) {
    if (result_ids.size() != gt_row.size()) {
        throw std::invalid_argument("recall: result and truth sizes differ");
    }
    if (gt_row.empty()) throw std::invalid_argument("recall: empty truth row");
    std::vector<std::uint32_t> a(result_ids.begin(), result_ids.end());
    std::vector<std::uint32_t> b(gt_row.begin(), gt_row.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t hits = 0, i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            ++i;
        } else if (b[j] < a[i]) {
            ++j;
        } else {
            ++hits;
            ++i;
            ++j;
        }
    }
    return double(hits) / double(gt_row.size());
}

EvalReport graph_accuracy_report(const KnnGraph& graph, const GroundTruth& gt) {
    if (graph.n != gt.n || graph.k != gt.k) {
        throw std::invalid_argument("graph_accuracy: graph and truth shapes differ");
    }
    if (graph.n == 0) throw std::invalid_argument("graph_accuracy: empty graph");
    StopWatch watch;
    EvalReport report;
    report.metric = "graph_accuracy";
    report.breakdown.resize(graph.n);
    double sum = 0.0;
    for (std::uint32_t i = 0; i < graph.n; ++i) {
        report.breakdown[i] = recall(graph.row(i), gt.row(i));
        sum += report.breakdown[i];
    }
    report.value = sum / graph.n;
    report.seconds = watch.seconds();
    return report;
}

double graph_accuracy(const KnnGraph& graph, const GroundTruth& gt) {
    return graph_accuracy_report(graph, gt).value;
}

std::vector<std::pair<std::uint32_t, double>> accuracy_vs_k(const KnnGraph& graph,
                                                            const VectorSet& vs,
                                                            std::span<const std::uint32_t> k_list,
                                                            std::uint32_t workers) {
    if (graph.n != vs.n) throw std::invalid_argument("accuracy_vs_k: graph does not match data");
    if (k_list.empty()) throw std::invalid_argument("accuracy_vs_k: empty k list");
    std::uint32_t k_max = 0;
    for (const auto k : k_list) k_max = std::max(k_max, k);
    if (k_max > vs.n - 1) throw std::invalid_argument("accuracy_vs_k: k exceeds n-1");

    const GroundTruth deep_gt = brute_force_knn(vs, nullptr, k_max, workers);
    std::vector<std::pair<std::uint32_t, double>> table;
    table.reserve(k_list.size());
    for (const auto kp : k_list) {
        std::uint64_t hits = 0;
        for (std::uint32_t i = 0; i < graph.n; ++i) {
            const auto truth = deep_gt.row(i).subspan(0, kp);
            std::vector<std::uint32_t> sorted(truth.begin(), truth.end());
            std::sort(sorted.begin(), sorted.end());
            for (const auto id : graph.row(i)) {
                hits += std::binary_search(sorted.begin(), sorted.end(), id) ? 1 : 0;
            }
        }
        table.emplace_back(kp, double(hits) / (double(graph.n) * graph.k));
    }
    return table;
}

}  // namespace annkit
