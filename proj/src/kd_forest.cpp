#include "annkit/kd_forest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <queue>
#include <random>

#include "annkit/parallel.hpp"
#include "annkit/util.hpp"

namespace annkit {

namespace {

constexpr char kMagic[4] = {'A', 'K', 'F', '1'};
constexpr std::uint32_t kFormatVersion = 1;

inline std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return __builtin_bswap32(v);
    }
    return v;
}

class TreeBuilder {
  public:
    TreeBuilder(const VectorSet& vs, std::uint32_t leaf_cap, std::uint64_t seed)
        : vs_(vs), rng_(seed) {
        tree_.leaf_cap = leaf_cap;
        tree_.n = vs.n;
        tree_.dim = vs.dim;
        tree_.point_index.resize(vs.n);
        std::iota(tree_.point_index.begin(), tree_.point_index.end(), 0u);
    }

    KdTree build() {
        tree_.root = build_node(0, vs_.n, 0);
        return std::move(tree_);
    }

  private:
    std::uint32_t build_node(std::uint32_t start, std::uint32_t end, std::uint32_t depth) {
        const std::uint32_t size = end - start;
        if (size <= tree_.leaf_cap) {
            tree_.nodes.push_back({kLeafMarker, 0.0f, start, end, depth, false});
            ++tree_.leaf_count;
            return static_cast<std::uint32_t>(tree_.nodes.size() - 1);
        }
        const std::uint32_t d = static_cast<std::uint32_t>(rng_() % vs_.dim);

        double sum = 0.0;
        for (std::uint32_t p = start; p < end; ++p) {
            sum += vs_.row_ptr(tree_.point_index[p])[d];
        }
        float split_val = static_cast<float>(sum / size);

        auto* idx = tree_.point_index.data();
        auto mid_it = std::stable_partition(
            idx + start, idx + end,
            [&](std::uint32_t p) { return vs_.row_ptr(p)[d] <= split_val; });
        std::uint32_t mid = static_cast<std::uint32_t>(mid_it - idx);

        std::uint32_t left_sz = mid - start;
        std::uint32_t right_sz = end - mid;
        bool even = false;
        if (left_sz == 0 || right_sz == 0 ||
            std::max(left_sz, right_sz) > 4u * std::min(left_sz, right_sz)) {
            // Degenerate mean split: fall back to an even split at the median
            // position so depth stays bounded on pathological data.
            std::sort(idx + start, idx + end, [&](std::uint32_t a, std::uint32_t b) {
                const float va = vs_.row_ptr(a)[d];
                const float vb = vs_.row_ptr(b)[d];
                if (va != vb) return va < vb;
                return a < b;
            });
            mid = start + size / 2;
            split_val = std::midpoint(vs_.row_ptr(idx[mid - 1])[d], vs_.row_ptr(idx[mid])[d]);
            even = true;
        }

        const auto node_id = static_cast<std::uint32_t>(tree_.nodes.size());
        tree_.nodes.push_back({d, split_val, 0, 0, depth, even});
        const std::uint32_t left_id = build_node(start, mid, depth + 1);
        const std::uint32_t right_id = build_node(mid, end, depth + 1);
        tree_.nodes[node_id].left = left_id;
        tree_.nodes[node_id].right = right_id;
        return node_id;
    }

    const VectorSet& vs_;
    KdTree tree_;
    std::mt19937_64 rng_;
};

class Writer {
  public:
    explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_.is_open()) throw format_error("cannot open file for writing: " + path);
    }
    void u32(std::uint32_t v) {
        v = to_le(v);
        out_.write(reinterpret_cast<const char*>(&v), 4);
    }
    void u64(std::uint64_t v) {
        u32(static_cast<std::uint32_t>(v));
        u32(static_cast<std::uint32_t>(v >> 32));
    }
    void f32(float f) {
        std::uint32_t raw;
        std::memcpy(&raw, &f, 4);
        u32(raw);
    }
    void u8(std::uint8_t v) { out_.write(reinterpret_cast<const char*>(&v), 1); }
    void bytes(const char* p, std::size_t len) { out_.write(p, len); }
    void close() {
        out_.flush();
        if (!out_) throw format_error("write failure on " + path_);
        out_.close();
    }

  private:
    std::string path_;
    std::ofstream out_;
};

class Reader {
  public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_.is_open()) throw format_error("cannot open file: " + path);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        in_.read(reinterpret_cast<char*>(&v), 4);
        if (in_.gcount() != 4) throw format_error("truncated forest file: " + path_);
        return to_le(v);
    }
    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        const std::uint64_t hi = u32();
        return lo | (hi << 32);
    }
    float f32() {
        const std::uint32_t raw = u32();
        float f;
        std::memcpy(&f, &raw, 4);
        return f;
    }
    std::uint8_t u8() {
        char c = 0;
        in_.read(&c, 1);
        if (in_.gcount() != 1) throw format_error("truncated forest file: " + path_);
        return static_cast<std::uint8_t>(c);
    }
    void bytes(char* p, std::size_t len) {
        in_.read(p, len);
        if (static_cast<std::size_t>(in_.gcount()) != len) {
            throw format_error("truncated forest file: " + path_);
        }
    }
    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

  private:
    std::string path_;
    std::ifstream in_;
};

// Recomputes leaf_count and checks every structural invariant.
void validate_tree(KdTree& tree, std::uint32_t n, std::uint32_t dim, std::uint32_t leaf_cap) {
    if (tree.nodes.empty() || tree.root >= tree.nodes.size()) {
        throw format_error("forest file: bad tree root");
    }
    if (tree.point_index.size() != n) {
        throw format_error("forest file: point_index size mismatch");
    }
    std::vector<std::uint32_t> count(n, 0);
    for (const auto p : tree.point_index) {
        if (p >= n) throw format_error("forest file: point id out of range");
        ++count[p];
    }
    for (const auto c : count) {
        if (c != 1) throw format_error("forest file: point_index is not a permutation");
    }

    // Recursive walk: every node visited once, child depths consistent, and
    // each internal node's left subtree covers a range that immediately
    // precedes its right subtree's (so leaf ranges partition {0..n-1} and the
    // left-before-right point_index ordering holds).
    std::vector<bool> seen(tree.nodes.size(), false);
    std::uint32_t visited = 0;
    std::uint32_t leaves = 0;
    if (tree.nodes[tree.root].depth != 0) throw format_error("forest file: root depth not 0");
    // The 4:1 imbalance cap bounds valid trees to ~3.1*log2(n) levels.
    std::uint32_t max_depth = 16;
    for (std::uint32_t m = n; m > 1; m /= 2) max_depth += 4;

    auto walk = [&](auto&& self, std::uint32_t id) -> std::pair<std::uint32_t, std::uint32_t> {
        if (id >= tree.nodes.size() || seen[id]) {
            throw format_error("forest file: malformed tree topology");
        }
        seen[id] = true;
        ++visited;
        const KdNode& nd = tree.nodes[id];
        if (nd.depth > max_depth) throw format_error("forest file: implausible tree depth");
        if (nd.is_leaf()) {
            if (nd.left >= nd.right || nd.right > n || nd.right - nd.left > leaf_cap) {
                throw format_error("forest file: leaf range violates 1..leaf_cap");
            }
            ++leaves;
            return {nd.left, nd.right};
        }
        if (nd.split_dim >= dim) throw format_error("forest file: split dimension out of range");
        if (nd.left >= tree.nodes.size() || nd.right >= tree.nodes.size()) {
            throw format_error("forest file: child id out of range");
        }
        if (tree.nodes[nd.left].depth != nd.depth + 1 ||
            tree.nodes[nd.right].depth != nd.depth + 1) {
            throw format_error("forest file: child depth mismatch");
        }
        const auto left = self(self, nd.left);
        const auto right = self(self, nd.right);
        if (left.second != right.first) {
            throw format_error("forest file: left subtree does not precede right subtree");
        }
        return {left.first, right.second};
    };
    const auto covered = walk(walk, tree.root);
    if (covered.first != 0 || covered.second != n) {
        throw format_error("forest file: leaf ranges do not cover all points");
    }
    if (visited != tree.nodes.size()) {
        throw format_error("forest file: unreachable nodes present");
    }
    tree.leaf_count = leaves;
}

}  // namespace

KdForest build_forest(const VectorSet& vs, std::uint32_t n_trees, std::uint32_t leaf_cap,
                      std::uint64_t seed, std::uint32_t workers) {
    if (vs.n < 1) throw std::invalid_argument("build_forest: empty dataset");
    if (n_trees < 1) throw std::invalid_argument("build_forest: n_trees must be >= 1");
    if (leaf_cap < 1) throw std::invalid_argument("build_forest: leaf_cap must be >= 1");
    KdForest forest;
    forest.seed = seed;
    forest.n = vs.n;
    forest.dim = vs.dim;
    forest.leaf_cap = leaf_cap;
    forest.trees.resize(n_trees);
    // Per-tree RNG streams: a parallel build is bit-identical to a sequential one.
    parallel_for(n_trees, workers, [&](std::uint32_t begin, std::uint32_t end) {
        for (std::uint32_t t = begin; t < end; ++t) {
            TreeBuilder builder(vs, leaf_cap, substream(seed, t));
            forest.trees[t] = builder.build();
        }
    });
    return forest;
}

std::uint32_t descend_from(const KdTree& tree, std::span<const float> q, std::uint32_t node) {
    if (node >= tree.nodes.size()) throw std::out_of_range("descend_from: node id out of range");
    if (q.size() != tree.dim) throw std::invalid_argument("descend_from: query length mismatch");
    while (!tree.nodes[node].is_leaf()) {
        const KdNode& nd = tree.nodes[node];
        node = q[nd.split_dim] <= nd.split_val ? nd.left : nd.right;
    }
    return node;
}

std::vector<std::uint32_t> search_leaves(const KdTree& tree, std::span<const float> q,
                                         std::uint32_t n_leaves) {
    if (q.size() != tree.dim) throw std::invalid_argument("search_leaves: query length mismatch");
    std::vector<std::uint32_t> out;
    if (n_leaves == 0) return out;
    n_leaves = std::min(n_leaves, tree.leaf_count);
    out.reserve(n_leaves);

    using HeapEntry = std::pair<double, std::uint32_t>;  // (detour cost, node)
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>> frontier;

    auto descend_collect = [&](std::uint32_t node, double cost) {
        while (!tree.nodes[node].is_leaf()) {
            const KdNode& nd = tree.nodes[node];
            const double diff = double(q[nd.split_dim]) - double(nd.split_val);
            const std::uint32_t other = diff <= 0.0 ? nd.right : nd.left;
            frontier.emplace(cost + std::abs(diff), other);
            node = diff <= 0.0 ? nd.left : nd.right;
        }
        out.push_back(node);
    };

    descend_collect(tree.root, 0.0);
    while (out.size() < n_leaves && !frontier.empty()) {
        const auto [cost, node] = frontier.top();
        frontier.pop();
        descend_collect(node, cost);
    }
    return out;
}

void save_forest(const KdForest& forest, const std::string& path) {
    Writer wr(path);
    wr.bytes(kMagic, 4);
    wr.u32(kFormatVersion);
    wr.u32(forest.n);
    wr.u32(forest.dim);
    wr.u32(static_cast<std::uint32_t>(forest.trees.size()));
    wr.u32(forest.leaf_cap);
    wr.u64(forest.seed);
    for (const auto& tree : forest.trees) {
        wr.u32(static_cast<std::uint32_t>(tree.nodes.size()));
        wr.u32(tree.root);
        for (const auto& nd : tree.nodes) {
            wr.u32(nd.split_dim);
            wr.f32(nd.split_val);
            wr.u32(nd.left);
            wr.u32(nd.right);
            wr.u32(nd.depth);
            wr.u8(nd.even_split ? 1 : 0);
        }
        for (const auto p : tree.point_index) wr.u32(p);
    }
    wr.close();
}

KdForest load_forest(const std::string& path) {
    Reader rd(path);
    char magic[4];
    rd.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw format_error("not a forest file: " + path);
    if (rd.u32() != kFormatVersion) throw format_error("unsupported forest version in " + path);
    KdForest forest;
    forest.n = rd.u32();
    forest.dim = rd.u32();
    const std::uint32_t n_trees = rd.u32();
    forest.leaf_cap = rd.u32();
    forest.seed = rd.u64();
    if (forest.n < 1 || forest.dim < 1 || n_trees < 1 || forest.leaf_cap < 1) {
        throw format_error("forest file: degenerate header in " + path);
    }
    forest.trees.resize(n_trees);
    for (auto& tree : forest.trees) {
        const std::uint32_t node_count = rd.u32();
        if (node_count == 0 || node_count > 2 * forest.n) {
            throw format_error("forest file: implausible node count in " + path);
        }
        tree.root = rd.u32();
        tree.leaf_cap = forest.leaf_cap;
        tree.n = forest.n;
        tree.dim = forest.dim;
        tree.nodes.resize(node_count);
        for (auto& nd : tree.nodes) {
            nd.split_dim = rd.u32();
            nd.split_val = rd.f32();
            nd.left = rd.u32();
            nd.right = rd.u32();
            nd.depth = rd.u32();
            nd.even_split = rd.u8() != 0;
        }
        tree.point_index.resize(forest.n);
        for (auto& p : tree.point_index) p = rd.u32();
        validate_tree(tree, forest.n, forest.dim, forest.leaf_cap);
    }
    if (!rd.at_eof()) throw format_error("forest file: trailing bytes in " + path);
    return forest;
}

}  // namespace annkit
