#include <doctest.h>

#include <random>
#include <set>

#include "annkit/dataset.hpp"
#include "annkit/kd_forest.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace annkit;

namespace {

// Structural check used across cases: leaf ranges partition {0..n-1}, sizes
// stay within 1..leaf_cap, depths are consistent.
void check_tree_structure(const KdTree& tree, std::uint32_t n, std::uint32_t leaf_cap) {
    std::vector<std::uint32_t> sorted(tree.point_index);
    std::sort(sorted.begin(), sorted.end());
    for (std::uint32_t i = 0; i < n; ++i) REQUIRE(sorted[i] == i);

    std::vector<std::pair<std::uint32_t, std::uint32_t>> ranges;
    std::uint32_t leaves = 0;
    for (std::uint32_t id = 0; id < tree.nodes.size(); ++id) {
        const KdNode& nd = tree.nodes[id];
        if (nd.is_leaf()) {
            REQUIRE(nd.left < nd.right);
            REQUIRE(nd.right - nd.left <= leaf_cap);
            ranges.emplace_back(nd.left, nd.right);
            ++leaves;
        } else {
            REQUIRE(tree.nodes[nd.left].depth == nd.depth + 1);
            REQUIRE(tree.nodes[nd.right].depth == nd.depth + 1);
        }
    }
    REQUIRE(leaves == tree.leaf_count);
    std::sort(ranges.begin(), ranges.end());
    std::uint32_t cursor = 0;
    for (const auto& [a, b] : ranges) {
        REQUIRE(a == cursor);
        cursor = b;
    }
    REQUIRE(cursor == n);
}

}  // namespace

TEST_CASE("single-point dataset builds single-leaf trees") {
    const VectorSet vs = gen_synthetic(1, 4, 1);
    const KdForest forest = build_forest(vs, 3, 10, 5);
    for (const auto& tree : forest.trees) {
        REQUIRE(tree.nodes.size() == 1);
        CHECK(tree.nodes[0].is_leaf());
        const auto pts = tree.leaf_points(tree.root);
        REQUIRE(pts.size() == 1);
        CHECK(pts[0] == 0);
    }
}

TEST_CASE("n <= leaf_cap gives one leaf holding every id") {
    const VectorSet vs = gen_synthetic(7, 4, 2);
    const KdForest forest = build_forest(vs, 2, 10, 5);
    for (const auto& tree : forest.trees) {
        REQUIRE(tree.leaf_count == 1);
        const auto pts = tree.leaf_points(tree.root);
        std::set<std::uint32_t> ids(pts.begin(), pts.end());
        CHECK(ids.size() == 7);
    }
}

TEST_CASE("10k x 128 forest satisfies the leaf partition invariants") {
    const VectorSet vs = gen_synthetic(10000, 128, 1);
    const KdForest forest = build_forest(vs, 8, 10, 1);
    REQUIRE(forest.trees.size() == 8);
    for (const auto& tree : forest.trees) check_tree_structure(tree, vs.n, 10);
}

TEST_CASE("forest build is deterministic for a fixed seed") {
    const VectorSet vs = gen_synthetic(500, 12, 9);
    const KdForest a = build_forest(vs, 4, 10, 1234);
    const KdForest b = build_forest(vs, 4, 10, 1234);
    REQUIRE(a.trees.size() == b.trees.size());
    for (std::size_t t = 0; t < a.trees.size(); ++t) {
        CHECK(a.trees[t].point_index == b.trees[t].point_index);
        REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
        for (std::size_t i = 0; i < a.trees[t].nodes.size(); ++i) {
            CHECK(a.trees[t].nodes[i].split_dim == b.trees[t].nodes[i].split_dim);
            CHECK(a.trees[t].nodes[i].split_val == b.trees[t].nodes[i].split_val);
        }
    }
    // A parallel build is bit-identical to the sequential one.
    const KdForest c = build_forest(vs, 4, 10, 1234, /*workers=*/3);
    for (std::size_t t = 0; t < a.trees.size(); ++t) {
        CHECK(a.trees[t].point_index == c.trees[t].point_index);
    }
}

TEST_CASE("build_forest rejects bad arguments") {
    CHECK_THROWS_AS(build_forest(VectorSet{}, 1, 10, 0), std::invalid_argument);
    const VectorSet vs = gen_synthetic(4, 2, 1);
    CHECK_THROWS_AS(build_forest(vs, 0, 10, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_forest(vs, 1, 0, 0), std::invalid_argument);
}

TEST_CASE("search_leaves on a single-leaf tree returns that leaf") {
    const VectorSet vs = gen_synthetic(5, 4, 3);
    const KdForest forest = build_forest(vs, 1, 10, 7);
    const auto leaves = search_leaves(forest.trees[0], vs.row(0), 3);
    REQUIRE(leaves.size() == 1);
    CHECK(leaves[0] == forest.trees[0].root);
}

TEST_CASE("search_leaves on a depth-1 tree orders near leaf first") {
    // Two separated clusters on dimension 0 force a single clean split.
    VectorSet vs;
    vs.n = 8;
    vs.dim = 1;
    vs.data = {0.0f, 0.1f, 0.2f, 0.3f, 10.0f, 10.1f, 10.2f, 10.3f};
    const KdForest forest = build_forest(vs, 1, 4, 1);
    const KdTree& tree = forest.trees[0];
    REQUIRE(tree.leaf_count == 2);
    const KdNode& root = tree.nodes[tree.root];
    REQUIRE_FALSE(root.is_leaf());

    const std::vector<float> q = {0.05f};
    const auto leaves = search_leaves(tree, q, 2);
    REQUIRE(leaves.size() == 2);
    CHECK(leaves[0] == root.left);
    CHECK(leaves[1] == root.right);
}

TEST_CASE("search_leaves matches the exhaustive detour-cost ranking") {
    const VectorSet vs = gen_synthetic(1000, 8, 17);
    const KdForest forest = build_forest(vs, 1, 10, 99);
    const KdTree& tree = forest.trees[0];
    const VectorSet queries = gen_synthetic(20, 8, 18);

    for (std::uint32_t qi = 0; qi < queries.n; ++qi) {
        const auto q = queries.row(qi);
        const auto ranked = oracle::leaf_detour_costs(tree, q);
        const auto got = search_leaves(tree, q, 4);
        REQUIRE(got.size() == 4);
        // First leaf is the pure descent target.
        CHECK(got[0] == descend_from(tree, q, tree.root));
        // Emitted leaves carry exactly the 4 smallest detour costs.
        std::set<std::uint32_t> emitted(got.begin(), got.end());
        CHECK(emitted.size() == 4);
        std::vector<double> got_costs;
        for (const auto& [cost, leaf] : ranked) {
            if (emitted.count(leaf)) got_costs.push_back(cost);
        }
        REQUIRE(got_costs.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(got_costs[i] == doctest::Approx(ranked[i].first).epsilon(1e-12));
        }
    }
}

TEST_CASE("search_leaves with n_leaves = leaf count enumerates every leaf once") {
    const VectorSet vs = gen_synthetic(300, 6, 21);
    const KdForest forest = build_forest(vs, 2, 5, 4);
    for (const auto& tree : forest.trees) {
        const auto leaves = search_leaves(tree, vs.row(0), tree.leaf_count + 50);
        CHECK(leaves.size() == tree.leaf_count);
        std::set<std::uint32_t> unique(leaves.begin(), leaves.end());
        CHECK(unique.size() == tree.leaf_count);
    }
}

TEST_CASE("descend_from") {
    const VectorSet vs = gen_synthetic(400, 6, 31);
    const KdForest forest = build_forest(vs, 1, 8, 13);
    const KdTree& tree = forest.trees[0];

    SUBCASE("a leaf maps to itself") {
        for (std::uint32_t id = 0; id < tree.nodes.size(); ++id) {
            if (tree.nodes[id].is_leaf()) {
                CHECK(descend_from(tree, vs.row(0), id) == id);
            }
        }
    }

    SUBCASE("descent from root equals search_leaves' first emission") {
        for (std::uint32_t i = 0; i < 30; ++i) {
            const auto q = vs.row(i);
            CHECK(descend_from(tree, q, tree.root) == search_leaves(tree, q, 1)[0]);
        }
    }

    SUBCASE("descent from a random node replays hop by hop") {
        std::mt19937_64 rng(5);
        for (int t = 0; t < 50; ++t) {
            const auto node = static_cast<std::uint32_t>(rng() % tree.nodes.size());
            const auto q = vs.row(static_cast<std::uint32_t>(rng() % vs.n));
            const auto path = oracle::replay_descent(tree, q, node);
            CHECK(descend_from(tree, q, node) == path.back());
        }
    }
}

TEST_CASE("descent agrees with leaf ownership away from degenerate splits") {
    const VectorSet vs = gen_synthetic(2000, 8, 77);
    const KdForest forest = build_forest(vs, 2, 10, 55);
    for (const auto& tree : forest.trees) {
        // Owning leaf per point, from the ranges.
        std::vector<std::uint32_t> owner(vs.n, kInvalidId);
        std::vector<std::uint32_t> parent(tree.nodes.size(), kInvalidId);
        for (std::uint32_t id = 0; id < tree.nodes.size(); ++id) {
            const KdNode& nd = tree.nodes[id];
            if (nd.is_leaf()) {
                for (std::uint32_t pos = nd.left; pos < nd.right; ++pos) {
                    owner[tree.point_index[pos]] = id;
                }
            } else {
                parent[nd.left] = id;
                parent[nd.right] = id;
            }
        }
        for (std::uint32_t p = 0; p < vs.n; ++p) {
            const std::uint32_t landed = descend_from(tree, vs.row(p), tree.root);
            if (landed == owner[p]) continue;
            // Any disagreement must be explained by an even-split fallback on
            // the owning path.
            bool fallback_on_path = false;
            for (std::uint32_t node = owner[p]; node != kInvalidId; node = parent[node]) {
                if (tree.nodes[node].even_split) fallback_on_path = true;
            }
            CHECK(fallback_on_path);
        }
    }
}

TEST_CASE("forest persistence round-trips and validates") {
    TempDir dir;
    const VectorSet vs = gen_synthetic(600, 10, 8);
    const KdForest forest = build_forest(vs, 3, 10, 42);
    const auto path = dir.file("forest.bin");
    save_forest(forest, path);

    const KdForest back = load_forest(path);
    CHECK(back.n == forest.n);
    CHECK(back.dim == forest.dim);
    CHECK(back.leaf_cap == forest.leaf_cap);
    CHECK(back.seed == forest.seed);
    REQUIRE(back.trees.size() == forest.trees.size());
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        CHECK(back.trees[t].point_index == forest.trees[t].point_index);
        CHECK(back.trees[t].leaf_count == forest.trees[t].leaf_count);
        REQUIRE(back.trees[t].nodes.size() == forest.trees[t].nodes.size());
    }

    // Saving the loaded forest reproduces the file byte for byte.
    const auto path2 = dir.file("forest2.bin");
    save_forest(back, path2);
    CHECK(read_bytes(path) == read_bytes(path2));

    SUBCASE("corrupted magic is rejected") {
        auto bytes = read_bytes(path);
        bytes[0] = 'X';
        const auto bad = dir.file("bad.bin");
        write_bytes(bad, bytes);
        CHECK_THROWS_AS(load_forest(bad), format_error);
    }

    SUBCASE("corrupted point_index is rejected") {
        auto bytes = read_bytes(path);
        // The last 4 bytes are the final point_index entry of the last tree.
        bytes[bytes.size() - 4] = 0xEE;
        bytes[bytes.size() - 3] = 0xFF;
        bytes[bytes.size() - 2] = 0xFF;
        bytes[bytes.size() - 1] = 0xFF;
        const auto bad = dir.file("bad_idx.bin");
        write_bytes(bad, bytes);
        CHECK_THROWS_AS(load_forest(bad), format_error);
    }

    SUBCASE("truncated file is rejected") {
        auto bytes = read_bytes(path);
        bytes.resize(bytes.size() / 2);
        const auto bad = dir.file("bad_trunc.bin");
        write_bytes(bad, bytes);
        CHECK_THROWS_AS(load_forest(bad), format_error);
    }
}
