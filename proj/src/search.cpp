#include "annkit/search.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "annkit/eval.hpp"
#include "annkit/parallel.hpp"
#include "annkit/util.hpp"

namespace annkit {

namespace {

inline bool cand_less(const std::uint32_t id_a, const float dist_a, const std::uint32_t id_b,
                      const float dist_b) {
    if (dist_a != dist_b) return dist_a < dist_b;
    return id_a < id_b;
}

}  // namespace

GraphSearcher::GraphSearcher(const VectorSet& base, const KdForest* forest, const KnnGraph& graph)
    : base_(base), forest_(forest), graph_(graph) {
    if (graph.n != base.n) throw std::invalid_argument("searcher: graph does not match base set");
    for (const auto id : graph.ids) {
        if (id >= base.n) throw std::invalid_argument("searcher: graph id out of range");
    }
    if (forest && (forest->n != base.n || forest->dim != base.dim)) {
        throw std::invalid_argument("searcher: forest does not match base set");
    }
    visit_stamp_.assign(base.n, 0);
    checked_stamp_.assign(base.n, 0);
    visit_dist_.assign(base.n, 0.0f);
}

void GraphSearcher::begin_query(const SearchParams& params, std::size_t q_len) {
    if (q_len != base_.dim) throw std::invalid_argument("search: query length mismatch");
    if (params.k_return < 1 || params.k_return > params.pool_size) {
        throw std::invalid_argument("search: need 1 <= k_return <= pool_size");
    }
    if (params.expansion > params.pool_size) {
        throw std::invalid_argument("search: need expansion <= pool_size");
    }
    if (params.k_return > base_.n) throw std::invalid_argument("search: k_return exceeds n");
    ++epoch_;
    if (epoch_ == 0) {  // stamp wrap-around
        std::fill(visit_stamp_.begin(), visit_stamp_.end(), 0u);
        std::fill(checked_stamp_.begin(), checked_stamp_.end(), 0u);
        epoch_ = 1;
    }
    cand_.clear();
    buffer_.clear();
}

float GraphSearcher::visit(std::span<const float> q, std::uint32_t id, SearchStats& stats) {
    if (visit_stamp_[id] != epoch_) {
        visit_stamp_[id] = epoch_;
        visit_dist_[id] = l2_sq(q.data(), base_.row_ptr(id), base_.dim);
        ++stats.dist_comps;
    }
    return visit_dist_[id];
}

SearchResult GraphSearcher::expand(std::span<const float> q, const SearchParams& params,
                                   SearchStats stats) {
    auto by_dist = [](const Candidate& a, const Candidate& b) {
        return cand_less(a.id, a.dist, b.id, b.dist);
    };

    for (std::uint32_t iter = 0; iter < params.iters; ++iter) {
        buffer_.clear();
        bool expanded_any = false;
        for (const auto& c : cand_) {
            if (checked_stamp_[c.id] == epoch_) continue;
            checked_stamp_[c.id] = epoch_;
            ++stats.graph_hops;
            expanded_any = true;
            for (const auto nb : graph_.row(c.id)) {
                const float d = visit(q, nb, stats);
                buffer_.push_back({nb, d});
            }
        }
        if (!expanded_any) break;
        // Merge, dedup by id (same id always carries the same distance), keep
        // the closest P.
        cand_.insert(cand_.end(), buffer_.begin(), buffer_.end());
        std::sort(cand_.begin(), cand_.end(), by_dist);
        cand_.erase(std::unique(cand_.begin(), cand_.end(),
                                [](const Candidate& a, const Candidate& b) { return a.id == b.id; }),
                    cand_.end());
        if (cand_.size() > params.pool_size) cand_.resize(params.pool_size);
    }

    if (cand_.size() < params.k_return) {
        // Degenerate index (disconnected graph on tiny data): fall back to a
        // scan so the contract of exactly k_return results holds.
        for (std::uint32_t id = 0; id < base_.n; ++id) {
            const float d = visit(q, id, stats);
            cand_.push_back({id, d});
        }
        std::sort(cand_.begin(), cand_.end(), by_dist);
        cand_.erase(std::unique(cand_.begin(), cand_.end(),
                                [](const Candidate& a, const Candidate& b) { return a.id == b.id; }),
                    cand_.end());
    }

    SearchResult result;
    result.stats = stats;
    const std::uint32_t out = std::min<std::uint32_t>(params.k_return,
                                                      static_cast<std::uint32_t>(cand_.size()));
    result.ids.reserve(out);
    result.dists.reserve(out);
    for (std::uint32_t i = 0; i < out; ++i) {
        result.ids.push_back(cand_[i].id);
        result.dists.push_back(cand_[i].dist);
    }
    return result;
}

SearchResult GraphSearcher::search(std::span<const float> q, const SearchParams& params) {
    if (!forest_) throw std::invalid_argument("search: tree-seeded search needs a forest");
    begin_query(params, q.size());
    SearchStats stats;

    const std::uint32_t n_trees =
        params.n_trees_used == 0
            ? static_cast<std::uint32_t>(forest_->trees.size())
            : std::min<std::uint32_t>(params.n_trees_used,
                                      static_cast<std::uint32_t>(forest_->trees.size()));
    // Algorithm-given budget: truncating division, clamped per tree.
    const std::uint32_t n_node =
        params.pool_size / std::max(1u, forest_->leaf_cap) / std::max(1u, n_trees) + 1;

    for (std::uint32_t t = 0; t < n_trees; ++t) {
        const KdTree& tree = forest_->trees[t];
        const auto leaves = search_leaves(tree, q, n_node);
        stats.leaves_visited += static_cast<std::uint32_t>(leaves.size());
        for (const auto leaf : leaves) {
            for (const auto p : tree.leaf_points(leaf)) {
                const bool fresh = visit_stamp_[p] != epoch_;
                const float d = visit(q, p, stats);
                if (fresh) cand_.push_back({p, d});
            }
        }
    }
    stats.seed_points = static_cast<std::uint32_t>(cand_.size());
    std::sort(cand_.begin(), cand_.end(), [](const Candidate& a, const Candidate& b) {
        return cand_less(a.id, a.dist, b.id, b.dist);
    });
    if (cand_.size() > params.expansion) cand_.resize(params.expansion);

    return expand(q, params, stats);
}

SearchResult GraphSearcher::search_random_init(std::span<const float> q,
                                               const SearchParams& params) {
    begin_query(params, q.size());
    SearchStats stats;

    const std::uint32_t want =
        std::min(params.random_seed_count == 0 ? params.expansion : params.random_seed_count,
                 base_.n);
    std::mt19937_64 rng(params.seed);
    std::uint32_t have = 0;
    while (have < want) {
        const auto id = static_cast<std::uint32_t>(rng() % base_.n);
        if (visit_stamp_[id] == epoch_) continue;
        const float d = visit(q, id, stats);
        cand_.push_back({id, d});
        ++have;
    }
    stats.seed_points = have;
    std::sort(cand_.begin(), cand_.end(), [](const Candidate& a, const Candidate& b) {
        return cand_less(a.id, a.dist, b.id, b.dist);
    });
    if (cand_.size() > params.expansion) cand_.resize(params.expansion);

    return expand(q, params, stats);
}

std::vector<SweepRow> recall_curve(const VectorSet& base, const KdForest* forest,
                                   const KnnGraph& graph, const VectorSet& queries,
                                   const GroundTruth& gt, std::span<const SweepPoint> sweep,
                                   const SearchParams& params, bool random_init,
                                   std::uint32_t workers) {
    if (queries.n == 0) throw std::invalid_argument("recall_curve: empty query set");
    if (queries.dim != base.dim) throw std::invalid_argument("recall_curve: query dim mismatch");
    if (gt.n != queries.n) throw std::invalid_argument("recall_curve: ground truth shape");
    if (gt.k < params.k_return) {
        throw std::invalid_argument("recall_curve: ground truth narrower than k_return");
    }

    std::vector<SweepRow> table;
    table.reserve(sweep.size());
    for (const auto& point : sweep) {
        SearchParams p = params;
        p.expansion = point.expansion;
        p.pool_size = point.pool_size;

        std::vector<double> recalls(queries.n, 0.0), times(queries.n, 0.0);
        std::vector<std::uint64_t> comps(queries.n, 0);
        std::vector<std::uint32_t> seeds(queries.n, 0);
        parallel_for(queries.n, workers, [&](std::uint32_t begin, std::uint32_t end) {
            GraphSearcher searcher(base, forest, graph);
            for (std::uint32_t qi = begin; qi < end; ++qi) {
                SearchParams pq = p;
                pq.seed = substream(p.seed, qi);
                StopWatch watch;
                const SearchResult r = random_init
                                           ? searcher.search_random_init(queries.row(qi), pq)
                                           : searcher.search(queries.row(qi), pq);
                times[qi] = watch.seconds() * 1e6;
                recalls[qi] = recall(r.ids, gt.row(qi).subspan(0, p.k_return));
                comps[qi] = r.stats.dist_comps;
                seeds[qi] = r.stats.seed_points;
            }
        });

        SweepRow row;
        row.expansion = point.expansion;
        row.pool_size = point.pool_size;
        for (std::uint32_t qi = 0; qi < queries.n; ++qi) {
            row.mean_time_us += times[qi];
            row.avg_recall += recalls[qi];
            row.avg_dist_comps += double(comps[qi]);
            row.avg_seed_points += double(seeds[qi]);
        }
        row.mean_time_us /= queries.n;
        row.avg_recall /= queries.n;
        row.avg_dist_comps /= queries.n;
        row.avg_seed_points /= queries.n;
        table.push_back(row);
    }
    return table;
}

}  // namespace annkit
