#include "annkit/knn_graph.hpp"

namespace annkit {

void save_graph(const KnnGraph& g, const std::string& ids_path,
                const std::optional<std::string>& dists_path) {
    GroundTruth rows;
    rows.n = g.n;
    rows.k = g.k;
    rows.ids = g.ids;
    save_ivecs(rows, ids_path);
    if (dists_path) {
        VectorSet d;
        d.n = g.n;
        d.dim = g.k;
        d.data = g.dists;
        save_fvecs(d, *dists_path);
    }
}

KnnGraph load_graph(const std::string& ids_path, const std::optional<std::string>& dists_path) {
    KnnGraph g;
    GroundTruth rows = load_ivecs(ids_path);
    g.n = rows.n;
    g.k = rows.k;
    g.ids = std::move(rows.ids);
    if (dists_path) {
        VectorSet d = load_fvecs(*dists_path);
        if (d.n != g.n || d.dim != g.k) {
            throw format_error("distance file " + *dists_path + " has shape " +
                               std::to_string(d.n) + "x" + std::to_string(d.dim) +
                               ", graph is " + std::to_string(g.n) + "x" + std::to_string(g.k));
        }
        g.dists = std::move(d.data);
    }
    return g;
}

GroundTruth graph_to_ground_truth(const KnnGraph& g) {
    GroundTruth gt;
    gt.n = g.n;
    gt.k = g.k;
    gt.ids = g.ids;
    return gt;
}

KnnGraph graph_from_ground_truth(const GroundTruth& gt) {
    KnnGraph g;
    g.n = gt.n;
    g.k = gt.k;
    g.ids = gt.ids;
    return g;
}

}  // namespace annkit
