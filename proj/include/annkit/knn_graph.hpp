#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "annkit/dataset.hpp"

namespace annkit {

/// Approximate kNN graph: n rows of k neighbor ids, each row sorted ascending
/// by (dist, id). Persists as ivecs (ids) plus a companion fvecs (distances),
/// so an exact graph written by the oracle doubles as ground truth.
struct KnnGraph {
    std::uint32_t n = 0;
    std::uint32_t k = 0;
    std::vector<std::uint32_t> ids;  // n*k
    std::vector<float> dists;        // n*k, empty when loaded without a companion file

    std::span<const std::uint32_t> row(std::uint32_t i) const {
        return {ids.data() + std::size_t(i) * k, k};
    }
    std::span<const float> row_dists(std::uint32_t i) const {
        return {dists.data() + std::size_t(i) * k, k};
    }
    bool has_dists() const { return !dists.empty(); }
};

void save_graph(const KnnGraph& g, const std::string& ids_path,
                const std::optional<std::string>& dists_path = std::nullopt);
KnnGraph load_graph(const std::string& ids_path,
                    const std::optional<std::string>& dists_path = std::nullopt);

// The id rows viewed as ground truth (shape-preserving copy).
GroundTruth graph_to_ground_truth(const KnnGraph& g);
KnnGraph graph_from_ground_truth(const GroundTruth& gt);

}  // namespace annkit
