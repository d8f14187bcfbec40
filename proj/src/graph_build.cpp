#include "annkit/graph_build.hpp"

#include <algorithm>
#include <atomic>
#include <memory>
#include <mutex>
#include <random>
#include <stdexcept>

#include "annkit/eval.hpp"
#include "annkit/parallel.hpp"
#include "annkit/util.hpp"

namespace annkit {

namespace {

RefineState make_state(std::uint32_t n, std::uint32_t k, std::uint32_t pool_cap,
                       std::uint32_t sample_cap, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("graph build: need at least 2 points");
    if (k < 1) throw std::invalid_argument("graph build: k must be >= 1");
    if (pool_cap < k) throw std::invalid_argument("graph build: pool_cap must be >= k");
    if (sample_cap < 1) throw std::invalid_argument("graph build: sample_cap must be >= 1");
    RefineState state;
    state.k = k;
    state.pool_cap = pool_cap;
    state.sample_cap = sample_cap;
    state.seed = seed;
    state.pools.assign(n, NeighborPool(pool_cap));
    state.g_new.resize(n);
    state.g_old.resize(n);
    state.g_rnew.resize(n);
    state.g_rold.resize(n);
    return state;
}

// Canonical content, then a seeded partial shuffle down to cap.
void sample_down(std::vector<std::uint32_t>& ids, std::uint32_t cap, std::uint64_t seed) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() <= cap) return;
    std::mt19937_64 rng(seed);
    for (std::uint32_t i = 0; i < cap; ++i) {
        const auto j = i + static_cast<std::uint32_t>(rng() % (ids.size() - i));
        std::swap(ids[i], ids[j]);
    }
    ids.resize(cap);
}

void dedup(std::vector<std::uint32_t>& ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
}

}  // namespace

namespace detail {

void rebuild_sample_lists(RefineState& state) {
    const std::uint32_t n = state.n();
    for (std::uint32_t i = 0; i < n; ++i) {
        state.g_new[i].clear();
        state.g_old[i].clear();
        state.g_rnew[i].clear();
        state.g_rold[i].clear();
    }
    // Ascending pool scan, stopping once L new entries are taken: forward
    // lists take the entry, the entry's owner becomes one of its reverse
    // neighbors. Early rounds stop after roughly L positions (everything is
    // new); converged rounds scan deep into the pool before finding news.
    for (std::uint32_t i = 0; i < n; ++i) {
        std::uint32_t taken_new = 0;
        for (auto& e : state.pools[i].entries()) {
            if (taken_new >= state.sample_cap) break;
            if (e.flag_new) {
                state.g_new[i].push_back(e.id);
                state.g_rnew[e.id].push_back(i);
                e.flag_new = false;
                ++taken_new;
            } else {
                state.g_old[i].push_back(e.id);
                state.g_rold[e.id].push_back(i);
            }
        }
    }
}

void union_reverse_lists(RefineState& state) {
    const std::uint32_t n = state.n();
    const std::uint64_t round_seed = substream(state.seed, state.iteration);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto rnew = state.g_rnew[i];
        auto rold = state.g_rold[i];
        sample_down(rnew, state.sample_cap, substream(round_seed, 2 * std::uint64_t(i)));
        sample_down(rold, state.sample_cap, substream(round_seed, 2 * std::uint64_t(i) + 1));
        auto& fwd_new = state.g_new[i];
        auto& fwd_old = state.g_old[i];
        fwd_new.insert(fwd_new.end(), rnew.begin(), rnew.end());
        fwd_old.insert(fwd_old.end(), rold.begin(), rold.end());
        dedup(fwd_new);
        dedup(fwd_old);
    }
}

std::uint64_t nn_descent_iteration(RefineState& state, const VectorSet& vs,
                                   std::uint32_t workers) {
    const std::uint32_t n = state.n();
    // Sample forward and reverse lists from the current pools, then fold the
    // (L-capped) reverse lists into the forward ones.
    rebuild_sample_lists(state);
    union_reverse_lists(state);

    std::unique_ptr<std::mutex[]> locks;
    if (workers > 1) locks = std::make_unique<std::mutex[]>(n);
    std::atomic<std::uint64_t> changes{0};
    std::atomic<std::uint64_t> comps{0};

    // Offers candidate `cand` to `owner`'s pool. Accepted entries are flagged
    // new so they join again next round.
    auto offer = [&](std::uint32_t owner, std::uint32_t cand, float dist) -> bool {
        if (owner == cand) return false;
        if (locks) {
            std::lock_guard<std::mutex> guard(locks[owner]);
            return state.pools[owner].insert(cand, dist, /*flag_new=*/true);
        }
        return state.pools[owner].insert(cand, dist, /*flag_new=*/true);
    };

    parallel_for(n, workers, [&](std::uint32_t begin, std::uint32_t end) {
        std::uint64_t local_changes = 0;
        std::uint64_t local_comps = 0;
        for (std::uint32_t i = begin; i < end; ++i) {
            const auto& nn_new = state.g_new[i];
            const auto& nn_old = state.g_old[i];
            for (std::size_t a = 0; a < nn_new.size(); ++a) {
                const std::uint32_t j = nn_new[a];
                const float* j_row = vs.row_ptr(j);
                for (std::size_t b = a + 1; b < nn_new.size(); ++b) {
                    const std::uint32_t k2 = nn_new[b];
                    const float d = l2_sq(j_row, vs.row_ptr(k2), vs.dim);
                    ++local_comps;
                    local_changes += offer(j, k2, d) ? 1 : 0;
                    local_changes += offer(k2, j, d) ? 1 : 0;
                }
                for (const std::uint32_t l : nn_old) {
                    if (l == j) continue;
                    const float d = l2_sq(j_row, vs.row_ptr(l), vs.dim);
                    ++local_comps;
                    local_changes += offer(j, l, d) ? 1 : 0;
                    local_changes += offer(l, j, d) ? 1 : 0;
                }
            }
        }
        changes.fetch_add(local_changes, std::memory_order_relaxed);
        comps.fetch_add(local_comps, std::memory_order_relaxed);
    });

    state.dist_comps += comps.load();
    ++state.iteration;
    state.last_changes = changes.load();
    return state.last_changes;
}

std::uint64_t nn_expansion_iteration(RefineState& state, const VectorSet& vs,
                                     std::uint32_t workers) {
    const std::uint32_t n = state.n();
    // Neighbor lists are read from an iteration-start snapshot so updates made
    // while the round runs do not leak across points.
    std::vector<std::vector<std::uint32_t>> rows(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        rows[i].reserve(state.pools[i].size());
        for (const auto& e : state.pools[i].entries()) rows[i].push_back(e.id);
    }

    std::atomic<std::uint64_t> changes{0};
    std::atomic<std::uint64_t> comps{0};
    parallel_for(n, workers, [&](std::uint32_t begin, std::uint32_t end) {
        std::uint64_t local_changes = 0;
        std::uint64_t local_comps = 0;
        std::vector<std::uint32_t> to_expand;
        for (std::uint32_t i = begin; i < end; ++i) {
            to_expand.clear();
            for (auto& e : state.pools[i].entries()) {
                if (!e.checked) {
                    e.checked = true;
                    to_expand.push_back(e.id);
                }
            }
            const float* i_row = vs.row_ptr(i);
            for (const std::uint32_t j : to_expand) {
                for (const std::uint32_t l : rows[j]) {
                    if (l == i || state.pools[i].contains(l)) continue;
                    const float d = l2_sq(i_row, vs.row_ptr(l), vs.dim);
                    ++local_comps;
                    local_changes += state.pools[i].insert(l, d, true) ? 1 : 0;
                }
            }
        }
        changes.fetch_add(local_changes, std::memory_order_relaxed);
        comps.fetch_add(local_comps, std::memory_order_relaxed);
    });

    state.dist_comps += comps.load();
    ++state.iteration;
    state.last_changes = changes.load();
    return state.last_changes;
}

double pool_topk_accuracy(const RefineState& state, const GroundTruth& gt) {
    if (gt.n != state.n()) throw std::invalid_argument("accuracy hook: ground truth shape");
    double sum = 0.0;
    std::vector<std::uint32_t> truth;
    for (std::uint32_t i = 0; i < gt.n; ++i) {
        const auto row = gt.row(i);
        truth.assign(row.begin(), row.end());
        std::sort(truth.begin(), truth.end());
        const auto entries = state.pools[i].entries();
        const std::uint32_t m = std::min<std::uint32_t>(state.k, state.pools[i].size());
        std::uint32_t hits = 0;
        for (std::uint32_t j = 0; j < m; ++j) {
            hits += std::binary_search(truth.begin(), truth.end(), entries[j].id) ? 1 : 0;
        }
        sum += double(hits) / double(gt.k);
    }
    return sum / gt.n;
}

}  // namespace detail

RefineState init_graph(const VectorSet& vs, const KdForest& forest, std::uint32_t k,
                       std::uint32_t conquer_depth, std::uint32_t pool_cap,
                       std::uint32_t sample_cap, std::uint64_t seed, std::uint32_t workers) {
    if (forest.n != vs.n || forest.dim != vs.dim) {
        throw std::invalid_argument("init_graph: forest was built over different data");
    }
    RefineState state = make_state(vs.n, k, pool_cap, sample_cap, seed);

    // Per tree: the leaf owning each point, and parent links for the upward
    // conquer walk.
    const std::size_t n_trees = forest.trees.size();
    std::vector<std::vector<std::uint32_t>> owner(n_trees), parent(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) {
        const KdTree& tree = forest.trees[t];
        owner[t].assign(vs.n, kInvalidId);
        parent[t].assign(tree.nodes.size(), kInvalidId);
        for (std::uint32_t id = 0; id < tree.nodes.size(); ++id) {
            const KdNode& nd = tree.nodes[id];
            if (nd.is_leaf()) {
                for (std::uint32_t pos = nd.left; pos < nd.right; ++pos) {
                    owner[t][tree.point_index[pos]] = id;
                }
            } else {
                parent[t][nd.left] = id;
                parent[t][nd.right] = id;
            }
        }
    }

    std::atomic<std::uint64_t> comps{0};
    parallel_for(vs.n, workers, [&](std::uint32_t begin, std::uint32_t end) {
        std::uint64_t local_comps = 0;
        std::vector<std::uint32_t> cand;
        for (std::uint32_t i = begin; i < end; ++i) {
            cand.clear();
            const auto q = vs.row(i);
            for (std::size_t t = 0; t < n_trees; ++t) {
                const KdTree& tree = forest.trees[t];
                const std::uint32_t leaf = owner[t][i];
                for (const auto p : tree.leaf_points(leaf)) cand.push_back(p);
                std::uint32_t node = leaf;
                for (;;) {
                    const std::uint32_t par = parent[t][node];
                    if (par == kInvalidId || tree.nodes[par].depth < conquer_depth) break;
                    const KdNode& pn = tree.nodes[par];
                    const std::uint32_t sibling = pn.left == node ? pn.right : pn.left;
                    const std::uint32_t sib_leaf = descend_from(tree, q, sibling);
                    for (const auto p : tree.leaf_points(sib_leaf)) cand.push_back(p);
                    node = par;
                }
            }
            dedup(cand);
            for (const auto c : cand) {
                if (c == i) continue;
                state.pools[i].insert(c, l2_sq(q.data(), vs.row_ptr(c), vs.dim), true);
                ++local_comps;
            }
        }
        comps.fetch_add(local_comps, std::memory_order_relaxed);
    });
    state.dist_comps += comps.load();
    return state;
}

RefineState init_random(const VectorSet& vs, std::uint32_t k, std::uint32_t pool_cap,
                        std::uint32_t sample_cap, std::uint64_t seed, std::uint32_t workers) {
    RefineState state = make_state(vs.n, k, pool_cap, sample_cap, seed);
    const std::uint32_t n = vs.n;
    std::atomic<std::uint64_t> comps{0};
    parallel_for(n, workers, [&](std::uint32_t begin, std::uint32_t end) {
        std::uint64_t local_comps = 0;
        for (std::uint32_t i = begin; i < end; ++i) {
            const float* i_row = vs.row_ptr(i);
            const std::uint32_t want = std::min(state.pool_cap, n - 1);
            if (want == n - 1) {
                for (std::uint32_t j = 0; j < n; ++j) {
                    if (j == i) continue;
                    state.pools[i].insert(j, l2_sq(i_row, vs.row_ptr(j), vs.dim), true);
                    ++local_comps;
                }
                continue;
            }
            std::mt19937_64 rng(substream(seed, i));
            std::uint32_t have = 0;
            while (have < want) {
                const auto j = static_cast<std::uint32_t>(rng() % n);
                if (j == i || state.pools[i].contains(j)) continue;
                state.pools[i].insert(j, l2_sq(i_row, vs.row_ptr(j), vs.dim), true);
                ++local_comps;
                ++have;
            }
        }
        comps.fetch_add(local_comps, std::memory_order_relaxed);
    });
    state.dist_comps += comps.load();
    return state;
}

void refine_nn_descent(RefineState& state, const VectorSet& vs, std::uint32_t max_iters,
                       std::uint32_t workers, double min_change_rate) {
    const double threshold = min_change_rate * double(state.n()) * double(state.pool_cap);
    for (std::uint32_t it = 0; it < max_iters; ++it) {
        const std::uint64_t changes = detail::nn_descent_iteration(state, vs, workers);
        if (double(changes) < threshold) break;
    }
}

void refine_nn_expansion(RefineState& state, const VectorSet& vs, std::uint32_t max_iters,
                         std::uint32_t workers, double min_change_rate) {
    const double threshold = min_change_rate * double(state.n()) * double(state.pool_cap);
    for (std::uint32_t it = 0; it < max_iters; ++it) {
        const std::uint64_t changes = detail::nn_expansion_iteration(state, vs, workers);
        if (double(changes) < threshold) break;
    }
}

KnnGraph finalize(RefineState& state, const VectorSet& vs, std::uint32_t k) {
    const std::uint32_t n = state.n();
    if (n < 2 || n - 1 < k) throw std::invalid_argument("finalize: need n-1 >= k");
    if (k > state.pool_cap) throw std::invalid_argument("finalize: k exceeds pool capacity");
    KnnGraph graph;
    graph.n = n;
    graph.k = k;
    graph.ids.resize(std::size_t(n) * k);
    graph.dists.resize(std::size_t(n) * k);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto& pool = state.pools[i];
        if (pool.size() < k) {
            // Sparse pool (possible only on tiny or adversarial inputs): fill
            // with scanned candidates so every row ends up with exactly k.
            for (std::uint32_t j = 0; j < n && pool.size() < k; ++j) {
                if (j == i || pool.contains(j)) continue;
                pool.insert(j, l2_sq(vs.row_ptr(i), vs.row_ptr(j), vs.dim), false);
                ++state.dist_comps;
            }
        }
        const auto entries = pool.entries();
        for (std::uint32_t j = 0; j < k; ++j) {
            graph.ids[std::size_t(i) * k + j] = entries[j].id;
            graph.dists[std::size_t(i) * k + j] = entries[j].dist;
        }
    }
    return graph;
}

const char* to_string(BuildStrategy s) {
    switch (s) {
        case BuildStrategy::efanna: return "efanna";
        case BuildStrategy::random_descent: return "random-descent";
        case BuildStrategy::nn_expansion: return "nn-expansion";
        case BuildStrategy::brute_force: return "brute-force";
        case BuildStrategy::init_only: return "init-only";
    }
    return "unknown";
}

BuildStrategy strategy_from_string(const std::string& s) {
    if (s == "efanna") return BuildStrategy::efanna;
    if (s == "random-descent") return BuildStrategy::random_descent;
    if (s == "nn-expansion") return BuildStrategy::nn_expansion;
    if (s == "brute-force") return BuildStrategy::brute_force;
    if (s == "init-only") return BuildStrategy::init_only;
    throw std::invalid_argument("unknown build strategy: " + s);
}

BuildResult build_graph(const VectorSet& vs, const KdForest* forest, const BuildParams& params,
                        const GroundTruth* gt) {
    BuildResult result;
    BuildStats& stats = result.stats;

    if (params.strategy == BuildStrategy::brute_force) {
        StopWatch watch;
        std::uint64_t comps = 0;
        result.graph = brute_force_graph(vs, params.k, params.workers, &comps);
        stats.init_seconds = watch.seconds();
        stats.dist_comps = comps;
        IterationLog row;
        row.iteration = 0;
        row.seconds = stats.init_seconds;
        row.dist_comps = comps;
        if (gt) row.accuracy = graph_accuracy(result.graph, *gt);
        stats.iterations.push_back(row);
        return result;
    }

    const bool tree_init = params.strategy == BuildStrategy::efanna ||
                           params.strategy == BuildStrategy::init_only;
    if (tree_init && forest == nullptr) {
        throw std::invalid_argument("build_graph: strategy needs a forest");
    }

    StopWatch watch;
    RefineState state =
        tree_init ? init_graph(vs, *forest, params.k, params.conquer_depth, params.pool_cap,
                               params.sample_cap, params.seed, params.workers)
                  : init_random(vs, params.k, params.pool_cap, params.sample_cap, params.seed,
                                params.workers);
    stats.init_seconds = watch.seconds();

    auto log_row = [&](std::uint64_t changes) {
        IterationLog row;
        row.iteration = state.iteration;
        row.seconds = stats.init_seconds + stats.refine_seconds;
        row.dist_comps = state.dist_comps;
        row.changes = changes;
        if (gt) row.accuracy = detail::pool_topk_accuracy(state, *gt);
        stats.iterations.push_back(row);
    };
    log_row(0);

    const std::uint32_t iters =
        params.strategy == BuildStrategy::init_only ? 0 : params.max_iters;
    const double threshold =
        params.min_change_rate * double(state.n()) * double(state.pool_cap);
    for (std::uint32_t it = 0; it < iters; ++it) {
        StopWatch step;
        const std::uint64_t changes =
            params.strategy == BuildStrategy::nn_expansion
                ? detail::nn_expansion_iteration(state, vs, params.workers)
                : detail::nn_descent_iteration(state, vs, params.workers);
        stats.refine_seconds += step.seconds();
        log_row(changes);
        if (double(changes) < threshold) {
            stats.early_stopped = true;
            break;
        }
    }

    result.graph = finalize(state, vs, params.k);
    stats.dist_comps = state.dist_comps;
    return result;
}

}  // namespace annkit
