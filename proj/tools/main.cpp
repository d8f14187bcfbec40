// Command-line front end: dataset conversion, index build, graph build,
// ground truth, search sweeps and evaluation, wired for reproducible runs
// (explicit seeds everywhere, timing kept out of the data artifacts).

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "annkit/dataset.hpp"
#include "annkit/eval.hpp"
#include "annkit/graph_build.hpp"
#include "annkit/kd_forest.hpp"
#include "annkit/knn_graph.hpp"
#include "annkit/parallel.hpp"
#include "annkit/search.hpp"
#include "annkit/util.hpp"

namespace {

using namespace annkit;

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

// Every CSV starts with the resolved configuration so runs are self-describing.
void write_header(std::ostream& out, const std::string& command, const ConfigEcho& config) {
    out << "# annkit " << command << "\n";
    for (const auto& [key, value] : config) out << "# " << key << "=" << value << "\n";
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << std::setprecision(10);
    return out;
}

struct SyntheticSpec {
    std::uint32_t n = 0;
    std::uint32_t dim = 0;
    std::uint64_t seed = 0;
};

SyntheticSpec parse_synthetic(const std::string& s) {
    SyntheticSpec spec;
    char c1 = 0, c2 = 0;
    std::istringstream in(s);
    if (!(in >> spec.n >> c1 >> spec.dim >> c2 >> spec.seed) || c1 != ':' || c2 != ':') {
        throw CLI::ValidationError("--synthetic expects N:DIM:SEED");
    }
    return spec;
}

std::vector<SweepPoint> parse_sweep(const std::string& s) {
    std::vector<SweepPoint> sweep;
    std::istringstream in(s);
    std::string part;
    while (std::getline(in, part, ',')) {
        SweepPoint p;
        char c = 0;
        std::istringstream pin(part);
        if (!(pin >> p.expansion >> c >> p.pool_size) || c != ':') {
            throw CLI::ValidationError("--sweep expects E:P[,E:P...]");
        }
        sweep.push_back(p);
    }
    if (sweep.empty()) throw CLI::ValidationError("--sweep expects E:P[,E:P...]");
    return sweep;
}

int cmd_convert(const std::string& in_path, const std::string& synthetic,
                const std::string& out_path, std::uint32_t limit) {
    if (in_path.empty() == synthetic.empty()) {
        throw CLI::ValidationError("convert needs exactly one of --in / --synthetic");
    }
    if (!synthetic.empty()) {
        const SyntheticSpec spec = parse_synthetic(synthetic);
        VectorSet vs = gen_synthetic(spec.n, spec.dim, spec.seed);
        if (limit && limit < vs.n) {
            vs.n = limit;
            vs.data.resize(std::size_t(limit) * vs.dim);
        }
        save_fvecs(vs, out_path);
        std::cout << "wrote " << vs.n << "x" << vs.dim << " vectors to " << out_path << "\n";
        return 0;
    }
    if (in_path.ends_with(".ivecs")) {
        GroundTruth gt = load_ivecs(in_path);
        if (limit && limit < gt.n) {
            gt.n = limit;
            gt.ids.resize(std::size_t(limit) * gt.k);
        }
        save_ivecs(gt, out_path);
        std::cout << "wrote " << gt.n << "x" << gt.k << " id rows to " << out_path << "\n";
    } else {
        VectorSet vs = load_fvecs(in_path);
        if (limit && limit < vs.n) {
            vs.n = limit;
            vs.data.resize(std::size_t(limit) * vs.dim);
        }
        save_fvecs(vs, out_path);
        std::cout << "wrote " << vs.n << "x" << vs.dim << " vectors to " << out_path << "\n";
    }
    return 0;
}

int cmd_build_trees(const std::string& base_path, std::uint32_t n_trees, std::uint32_t leaf_cap,
                    std::uint64_t seed, std::uint32_t workers, const std::string& out_path) {
    const VectorSet base = load_fvecs(base_path);
    StopWatch watch;
    const KdForest forest = build_forest(base, n_trees, leaf_cap, seed, workers);
    const double seconds = watch.seconds();
    save_forest(forest, out_path);
    std::cout << "tree build: n=" << base.n << " dim=" << base.dim << " trees=" << n_trees
              << " leaf_cap=" << leaf_cap << " seed=" << seed << "\n";
    std::cout << "tree build time: " << std::setprecision(6) << seconds << " s\n";
    std::cout << "forest written to " << out_path << "\n";
    return 0;
}

int cmd_gt(const std::string& base_path, const std::string& queries_path, std::uint32_t k,
           std::uint32_t workers, const std::string& out_path, const std::string& dists_path) {
    const VectorSet base = load_fvecs(base_path);
    std::optional<VectorSet> queries;
    if (!queries_path.empty()) queries = load_fvecs(queries_path);
    StopWatch watch;
    std::uint64_t comps = 0;
    if (dists_path.empty()) {
        const GroundTruth gt =
            brute_force_knn(base, queries ? &*queries : nullptr, k, workers, &comps);
        save_ivecs(gt, out_path);
    } else if (!queries) {
        const KnnGraph g = brute_force_graph(base, k, workers, &comps);
        save_graph(g, out_path, dists_path);
    } else {
        throw CLI::ValidationError("--out-dists is only available in self mode");
    }
    std::cout << "ground truth: k=" << k << " mode=" << (queries ? "query" : "self")
              << " dist_comps=" << comps << "\n";
    std::cout << "oracle time: " << std::setprecision(6) << watch.seconds() << " s\n";
    std::cout << "ground truth written to " << out_path << "\n";
    return 0;
}

int cmd_build_graph(const std::string& base_path, const std::string& forest_path,
                    const std::string& gt_path, BuildParams params, const std::string& out_path,
                    const std::string& dists_path, const std::string& log_path) {
    const VectorSet base = load_fvecs(base_path);
    std::optional<KdForest> forest;
    if (!forest_path.empty()) {
        forest = load_forest(forest_path);
        if (forest->n != base.n || forest->dim != base.dim) {
            throw std::runtime_error("forest file does not match the base set");
        }
    }
    std::optional<GroundTruth> gt;
    if (!gt_path.empty()) {
        gt = load_ivecs(gt_path);
        gt->validate_against(base.n);
        if (gt->n != base.n || gt->k < params.k) {
            throw std::runtime_error("ground truth shape does not cover the build");
        }
        if (gt->k > params.k) {  // slice to the graph width
            GroundTruth cut;
            cut.n = gt->n;
            cut.k = params.k;
            for (std::uint32_t i = 0; i < gt->n; ++i) {
                const auto row = gt->row(i);
                cut.ids.insert(cut.ids.end(), row.begin(), row.begin() + params.k);
            }
            gt = std::move(cut);
        }
    }

    const BuildResult result =
        build_graph(base, forest ? &*forest : nullptr, params, gt ? &*gt : nullptr);
    save_graph(result.graph, out_path,
               dists_path.empty() ? std::nullopt : std::optional<std::string>(dists_path));

    ConfigEcho echo = {
        {"base", base_path},
        {"forest", forest_path},
        {"strategy", to_string(params.strategy)},
        {"k", std::to_string(params.k)},
        {"conquer_depth", std::to_string(params.conquer_depth)},
        {"pool_cap", std::to_string(params.pool_cap)},
        {"sample_cap", std::to_string(params.sample_cap)},
        {"max_iters", std::to_string(params.max_iters)},
        {"min_change_rate", std::to_string(params.min_change_rate)},
        {"seed", std::to_string(params.seed)},
        {"workers", std::to_string(params.workers)},
        {"n", std::to_string(base.n)},
        {"dim", std::to_string(base.dim)},
    };
    std::ostringstream csv;
    csv << std::setprecision(10);
    write_header(csv, "build-graph", echo);
    csv << "iteration,seconds,dist_comps,changes,accuracy\n";
    for (const auto& row : result.stats.iterations) {
        csv << row.iteration << "," << row.seconds << "," << row.dist_comps << "," << row.changes
            << ",";
        if (row.accuracy >= 0.0) csv << row.accuracy;
        csv << "\n";
    }
    if (!log_path.empty()) {
        auto out = open_out(log_path);
        out << csv.str();
    }
    std::cout << csv.str();
    std::cout << "graph build time: " << std::setprecision(6) << result.stats.total_seconds()
              << " s (init " << result.stats.init_seconds << " s, refine "
              << result.stats.refine_seconds << " s), dist_comps=" << result.stats.dist_comps
              << (result.stats.early_stopped ? ", early-stopped" : "") << "\n";
    std::cout << "graph written to " << out_path << "\n";
    return 0;
}

int cmd_search(const std::string& base_path, const std::string& queries_path,
               const std::string& forest_path, const std::string& graph_path,
               const std::string& gt_path, SearchParams params, const std::string& sweep_str,
               bool random_init, std::uint32_t workers, const std::string& out_path,
               const std::string& csv_path, const std::string& per_query_path) {
    const VectorSet base = load_fvecs(base_path);
    const VectorSet queries = load_fvecs(queries_path);
    if (queries.n == 0) throw std::runtime_error("empty query set");
    if (queries.dim != base.dim) throw std::runtime_error("query dim does not match base");
    std::optional<KdForest> forest;
    if (!forest_path.empty()) forest = load_forest(forest_path);
    if (!random_init && !forest) {
        throw CLI::ValidationError("tree-seeded search needs --forest (or pass --random-init)");
    }
    const KnnGraph graph = load_graph(graph_path);
    std::optional<GroundTruth> gt;
    if (!gt_path.empty()) {
        gt = load_ivecs(gt_path);
        gt->validate_against(base.n);
        if (gt->n != queries.n || gt->k < params.k_return) {
            throw std::runtime_error("ground truth does not cover the queries at k_return");
        }
    }
    const std::vector<SweepPoint> sweep = parse_sweep(sweep_str);

    ConfigEcho echo = {
        {"base", base_path},
        {"queries", queries_path},
        {"forest", forest_path},
        {"graph", graph_path},
        {"k_return", std::to_string(params.k_return)},
        {"iters", std::to_string(params.iters)},
        {"n_trees_used", std::to_string(params.n_trees_used)},
        {"random_init", random_init ? "1" : "0"},
        {"seed", std::to_string(params.seed)},
        {"workers", std::to_string(workers)},
        {"sweep", sweep_str},
        {"n", std::to_string(base.n)},
        {"dim", std::to_string(base.dim)},
        {"n_queries", std::to_string(queries.n)},
    };

    std::ostringstream sweep_csv, pq_csv;
    sweep_csv << std::setprecision(10);
    pq_csv << std::setprecision(10);
    write_header(sweep_csv, "search", echo);
    sweep_csv << "expansion,pool_size,mean_time_us,avg_dist_comps,avg_seed_points,avg_recall\n";
    write_header(pq_csv, "search (per query, last sweep point)", echo);
    pq_csv << "query,time_us,dist_comps,recall\n";

    KnnGraph results;  // last sweep point's results, one row per query
    std::vector<double> time_us(queries.n), recalls(queries.n);
    std::vector<std::uint64_t> comps(queries.n);
    std::vector<std::uint32_t> seed_pts(queries.n);
    for (std::size_t si = 0; si < sweep.size(); ++si) {
        SearchParams p = params;
        p.expansion = sweep[si].expansion;
        p.pool_size = sweep[si].pool_size;
        const bool last = si + 1 == sweep.size();
        if (last) {
            results.n = queries.n;
            results.k = params.k_return;
            results.ids.assign(std::size_t(queries.n) * params.k_return, 0);
            results.dists.assign(std::size_t(queries.n) * params.k_return, 0.0f);
        }
        parallel_for(queries.n, workers, [&](std::uint32_t begin, std::uint32_t end) {
            GraphSearcher searcher(base, forest ? &*forest : nullptr, graph);
            for (std::uint32_t qi = begin; qi < end; ++qi) {
                SearchParams pq = p;
                pq.seed = substream(p.seed, qi);
                StopWatch watch;
                const SearchResult r = random_init
                                           ? searcher.search_random_init(queries.row(qi), pq)
                                           : searcher.search(queries.row(qi), pq);
                time_us[qi] = watch.seconds() * 1e6;
                comps[qi] = r.stats.dist_comps;
                seed_pts[qi] = r.stats.seed_points;
                recalls[qi] = gt ? recall(r.ids, gt->row(qi).subspan(0, params.k_return)) : -1.0;
                if (last) {
                    std::copy(r.ids.begin(), r.ids.end(),
                              results.ids.begin() + std::size_t(qi) * params.k_return);
                    std::copy(r.dists.begin(), r.dists.end(),
                              results.dists.begin() + std::size_t(qi) * params.k_return);
                }
            }
        });
        double sum_time = 0.0, sum_recall = 0.0, sum_comps = 0.0, sum_seeds = 0.0;
        for (std::uint32_t qi = 0; qi < queries.n; ++qi) {
            sum_time += time_us[qi];
            sum_comps += double(comps[qi]);
            sum_seeds += double(seed_pts[qi]);
            if (gt) sum_recall += recalls[qi];
            if (last) {
                pq_csv << qi << "," << time_us[qi] << "," << comps[qi] << ",";
                if (gt) pq_csv << recalls[qi];
                pq_csv << "\n";
            }
        }
        sweep_csv << p.expansion << "," << p.pool_size << "," << sum_time / queries.n << ","
                  << sum_comps / queries.n << "," << sum_seeds / queries.n << ",";
        if (gt) sweep_csv << sum_recall / queries.n;
        sweep_csv << "\n";
    }

    if (!out_path.empty()) save_graph(results, out_path);
    if (!csv_path.empty()) open_out(csv_path) << sweep_csv.str();
    if (!per_query_path.empty()) open_out(per_query_path) << pq_csv.str();
    std::cout << sweep_csv.str();
    if (!out_path.empty()) std::cout << "results written to " << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& graph_path, const std::string& results_path,
             const std::string& gt_path, const std::string& base_path,
             const std::string& k_list_str, std::uint32_t workers, const std::string& csv_path) {
    std::ostringstream csv;
    csv << std::setprecision(10);

    if (!k_list_str.empty()) {
        if (graph_path.empty() || base_path.empty()) {
            throw CLI::ValidationError("--k-list needs --graph and --base");
        }
        const KnnGraph graph = load_graph(graph_path);
        const VectorSet base = load_fvecs(base_path);
        std::vector<std::uint32_t> k_list;
        std::istringstream in(k_list_str);
        std::string part;
        while (std::getline(in, part, ',')) k_list.push_back(std::stoul(part));
        const auto table = accuracy_vs_k(graph, base, k_list, workers);
        write_header(csv, "eval (accuracy vs k)",
                     {{"graph", graph_path}, {"base", base_path}, {"k_list", k_list_str}});
        csv << "k,accuracy\n";
        for (const auto& [k, acc] : table) csv << k << "," << acc << "\n";
    } else if (!graph_path.empty()) {
        if (gt_path.empty()) throw CLI::ValidationError("graph accuracy needs --gt");
        const KnnGraph graph = load_graph(graph_path);
        GroundTruth gt = load_ivecs(gt_path);
        if (gt.k > graph.k) {  // wider truth: slice
            GroundTruth cut;
            cut.n = gt.n;
            cut.k = graph.k;
            for (std::uint32_t i = 0; i < gt.n; ++i) {
                const auto row = gt.row(i);
                cut.ids.insert(cut.ids.end(), row.begin(), row.begin() + graph.k);
            }
            gt = std::move(cut);
        }
        const EvalReport report = graph_accuracy_report(graph, gt);
        write_header(csv, "eval (graph accuracy)", {{"graph", graph_path}, {"gt", gt_path}});
        csv << "metric,value\n";
        csv << report.metric << "," << report.value << "\n";
    } else if (!results_path.empty()) {
        if (gt_path.empty()) throw CLI::ValidationError("recall needs --gt");
        const GroundTruth results = load_ivecs(results_path);
        const GroundTruth gt = load_ivecs(gt_path);
        if (gt.n != results.n || gt.k < results.k) {
            throw std::runtime_error("ground truth does not cover the results");
        }
        double sum = 0.0;
        for (std::uint32_t i = 0; i < results.n; ++i) {
            sum += recall(results.row(i), gt.row(i).subspan(0, results.k));
        }
        write_header(csv, "eval (search recall)", {{"results", results_path}, {"gt", gt_path}});
        csv << "metric,value\n";
        csv << "avg_recall," << sum / results.n << "\n";
    } else {
        throw CLI::ValidationError("eval needs --graph, --results, or --k-list");
    }

    if (!csv_path.empty()) open_out(csv_path) << csv.str();
    std::cout << csv.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"in-memory approximate nearest neighbor toolkit"};
    app.require_subcommand(1);
    app.set_config("--config");

    // convert
    std::string cv_in, cv_synthetic, cv_out;
    std::uint32_t cv_limit = 0;
    auto* convert = app.add_subcommand("convert", "generate or copy fvecs/ivecs datasets");
    convert->add_option("--in", cv_in, "input fvecs/ivecs file");
    convert->add_option("--synthetic", cv_synthetic, "N:DIM:SEED synthetic dataset");
    convert->add_option("--out", cv_out, "output file")->required();
    convert->add_option("--limit", cv_limit, "keep only the first N records");

    // build-trees
    std::string bt_base, bt_out;
    std::uint32_t bt_trees = 8, bt_leaf_cap = 10, bt_workers = 1;
    std::uint64_t bt_seed = 1;
    auto* build_trees = app.add_subcommand("build-trees", "build the randomized KD-tree forest");
    build_trees->add_option("--base", bt_base, "base fvecs file")->required();
    build_trees->add_option("--trees", bt_trees, "number of trees");
    build_trees->add_option("--leaf-cap", bt_leaf_cap, "max points per leaf");
    build_trees->add_option("--seed", bt_seed, "RNG seed")->required();
    build_trees->add_option("--workers", bt_workers, "worker threads");
    build_trees->add_option("--out", bt_out, "forest output file")->required();

    // gt
    std::string gt_base, gt_queries, gt_out, gt_dists;
    std::uint32_t gt_k = 10, gt_workers = 1;
    auto* gt_cmd = app.add_subcommand("gt", "brute-force ground truth (self mode by default)");
    gt_cmd->add_option("--base", gt_base, "base fvecs file")->required();
    gt_cmd->add_option("--queries", gt_queries, "query fvecs file (query mode)");
    gt_cmd->add_option("--k", gt_k, "neighbors per row");
    gt_cmd->add_option("--out", gt_out, "ivecs output")->required();
    gt_cmd->add_option("--out-dists", gt_dists, "companion fvecs of distances (self mode)");
    gt_cmd->add_option("--workers", gt_workers, "worker threads");

    // build-graph
    std::string bg_base, bg_forest, bg_gt, bg_out, bg_dists, bg_log, bg_strategy = "efanna";
    BuildParams bg_params;
    auto* build_graph_cmd = app.add_subcommand("build-graph", "build the approximate kNN graph");
    build_graph_cmd->add_option("--base", bg_base, "base fvecs file")->required();
    build_graph_cmd->add_option("--forest", bg_forest, "forest file (tree-init strategies)");
    build_graph_cmd->add_option("--gt", bg_gt, "ground-truth ivecs for per-iteration accuracy");
    build_graph_cmd->add_option("--k", bg_params.k, "graph width");
    build_graph_cmd->add_option("--dep", bg_params.conquer_depth, "conquer-to depth");
    build_graph_cmd->add_option("--pool", bg_params.pool_cap, "candidate pool size P");
    build_graph_cmd->add_option("--sample", bg_params.sample_cap, "sample bound L");
    build_graph_cmd->add_option("--iters", bg_params.max_iters, "max refinement iterations");
    build_graph_cmd->add_option("--min-change-rate", bg_params.min_change_rate,
                                "early-stop threshold (fraction of pool slots)");
    build_graph_cmd
        ->add_option("--strategy", bg_strategy,
                     "efanna | random-descent | nn-expansion | brute-force | init-only");
    build_graph_cmd->add_option("--seed", bg_params.seed, "RNG seed")->required();
    build_graph_cmd->add_option("--workers", bg_params.workers, "worker threads");
    build_graph_cmd->add_option("--out", bg_out, "graph ivecs output")->required();
    build_graph_cmd->add_option("--out-dists", bg_dists, "companion fvecs of distances");
    build_graph_cmd->add_option("--log", bg_log, "per-iteration CSV log");

    // search
    std::string s_base, s_queries, s_forest, s_graph, s_gt, s_sweep, s_out, s_csv, s_pq;
    SearchParams s_params;
    std::uint32_t s_workers = 1;
    bool s_random = false;
    auto* search_cmd = app.add_subcommand("search", "batch ANN search over a sweep of (E,P)");
    search_cmd->add_option("--base", s_base, "base fvecs file")->required();
    search_cmd->add_option("--queries", s_queries, "query fvecs file")->required();
    search_cmd->add_option("--forest", s_forest, "forest file");
    search_cmd->add_option("--graph", s_graph, "graph ivecs file")->required();
    search_cmd->add_option("--gt", s_gt, "query ground truth (enables recall columns)");
    search_cmd->add_option("--k", s_params.k_return, "results per query");
    search_cmd->add_option("--iters", s_params.iters, "expansion iterations I");
    search_cmd->add_option("--trees-used", s_params.n_trees_used, "trees used (0 = all)");
    search_cmd->add_option("--seed-count", s_params.random_seed_count,
                           "random-init candidates (0 = E)");
    search_cmd->add_flag("--random-init", s_random, "seed with random points instead of trees");
    search_cmd->add_option("--workers", s_workers, "worker threads");
    search_cmd->add_option("--seed", s_params.seed, "RNG seed")->required();
    search_cmd->add_option("--sweep", s_sweep, "E:P[,E:P...]")->required();
    search_cmd->add_option("--out", s_out, "result ivecs (last sweep point)");
    search_cmd->add_option("--csv", s_csv, "sweep summary CSV");
    search_cmd->add_option("--per-query", s_pq, "per-query CSV (last sweep point)");

    // eval
    std::string e_graph, e_results, e_gt, e_base, e_klist, e_csv;
    std::uint32_t e_workers = 1;
    auto* eval_cmd = app.add_subcommand("eval", "recall / graph accuracy from saved artifacts");
    eval_cmd->add_option("--graph", e_graph, "graph ivecs file");
    eval_cmd->add_option("--results", e_results, "search results ivecs file");
    eval_cmd->add_option("--gt", e_gt, "ground truth ivecs file");
    eval_cmd->add_option("--base", e_base, "base fvecs file (for --k-list)");
    eval_cmd->add_option("--k-list", e_klist, "comma-separated k' values for accuracy-vs-k");
    eval_cmd->add_option("--workers", e_workers, "worker threads");
    eval_cmd->add_option("--csv", e_csv, "CSV output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (convert->parsed()) return cmd_convert(cv_in, cv_synthetic, cv_out, cv_limit);
        if (build_trees->parsed()) {
            return cmd_build_trees(bt_base, bt_trees, bt_leaf_cap, bt_seed, bt_workers, bt_out);
        }
        if (gt_cmd->parsed()) {
            return cmd_gt(gt_base, gt_queries, gt_k, gt_workers, gt_out, gt_dists);
        }
        if (build_graph_cmd->parsed()) {
            bg_params.strategy = strategy_from_string(bg_strategy);
            return cmd_build_graph(bg_base, bg_forest, bg_gt, bg_params, bg_out, bg_dists, bg_log);
        }
        if (search_cmd->parsed()) {
            return cmd_search(s_base, s_queries, s_forest, s_graph, s_gt, s_params, s_sweep,
                              s_random, s_workers, s_out, s_csv, s_pq);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(e_graph, e_results, e_gt, e_base, e_klist, e_workers, e_csv);
        }
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
