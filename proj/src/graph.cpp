#include "adrgraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace adrgraph {

void GraphConfig::validate() const {
    if (theta < 0) throw ValidationError("graph: theta must be positive (or 0 for auto)");
    if (drug_threshold < 0 || dis_threshold < 0)
        throw ValidationError("graph: thresholds must be positive (or 0 for auto)");
    if (hetero_min_count < 1) throw ValidationError("graph: hetero_min_count must be >= 1");
}

double homogeneous_edge_weight(const double* vi, const double* vj, std::size_t dim, double theta,
                               double threshold) {
    const double d = l2_distance(vi, vj, dim);
    if (d > threshold) return 0.0;
    return std::exp(-(d * d) / (2.0 * theta * theta));
}

CoOccurrence count_cooccurrence(const std::vector<PatientRecord>& records,
                                const CodeVocabulary& drug_vocab, const CodeVocabulary& dis_vocab) {
    CoOccurrence c;
    c.n_dis.assign(dis_vocab.size(), 0);
    for (const auto& rec : records) {
        std::set<int> patient_dis;
        std::set<std::uint64_t> patient_pairs;
        for (const auto& visit : rec.visits) {
            std::vector<int> dis_ids;
            for (const auto& code : visit.diagnoses) {
                const int j = dis_vocab.id_of(code);
                dis_ids.push_back(j);
                patient_dis.insert(j);
            }
            for (const auto& code : visit.prescriptions) {
                const int i = drug_vocab.id_of(code);
                for (int j : dis_ids) patient_pairs.insert(CoOccurrence::key(i, j));
            }
        }
        for (int j : patient_dis) ++c.n_dis[static_cast<std::size_t>(j)];
        for (std::uint64_t k : patient_pairs) ++c.n_pair[k];
    }
    return c;
}

double heterogeneous_edge_weight(int n_ij, int n_j, int min_count) {
    if (n_j == 0) return 0.0;
    if (n_ij < min_count) return 0.0;
    return static_cast<double>(n_ij) / static_cast<double>(n_j);
}

namespace {

std::vector<double> pairwise_distances(const Matrix& vecs) {
    std::vector<double> out;
    out.reserve(vecs.rows * (vecs.rows - 1) / 2);
    for (std::size_t i = 0; i < vecs.rows; ++i)
        for (std::size_t j = i + 1; j < vecs.rows; ++j)
            out.push_back(l2_distance(vecs.row(i), vecs.row(j), vecs.cols));
    return out;
}

// Guards the degenerate all-identical-embeddings case, where the median
// distance is 0 and the Gaussian would divide by zero.
double positive_or_eps(double v) { return v > 0.0 ? v : 1e-12; }

void build_homogeneous(const Matrix& vecs, double theta, double threshold, EdgePartition& part) {
    const int n = static_cast<int>(vecs.rows);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double w = homogeneous_edge_weight(vecs.row(static_cast<std::size_t>(i)),
                                                     vecs.row(static_cast<std::size_t>(j)),
                                                     vecs.cols, theta, threshold);
            if (w > 0.0) part.edges.push_back(Edge{i, j, w});
        }
}

}  // namespace

ResolvedGraphConfig resolve_graph_config(const EmbeddingTable& drug_embed,
                                         const EmbeddingTable& dis_embed, const GraphConfig& config) {
    config.validate();
    ResolvedGraphConfig r;
    r.hetero_min_count = config.hetero_min_count;
    r.sparsity_profile = config.sparsity_profile;

    const std::vector<double> drug_d =
        drug_embed.vocab_size() > 1 ? pairwise_distances(drug_embed.vectors) : std::vector<double>{0.0};
    const std::vector<double> dis_d =
        dis_embed.vocab_size() > 1 ? pairwise_distances(dis_embed.vectors) : std::vector<double>{0.0};

    r.theta_drug = config.theta > 0 ? config.theta : positive_or_eps(percentile(drug_d, 50.0));
    r.theta_dis = config.theta > 0 ? config.theta : positive_or_eps(percentile(dis_d, 50.0));
    // profile switches the drug threshold between the 60th (low) and 30th
    // (high) distance percentiles; the disease threshold stays at the low preset
    const double drug_pct = config.sparsity_profile == SparsityProfile::low ? 60.0 : 30.0;
    r.drug_threshold = config.drug_threshold > 0 ? config.drug_threshold : percentile(drug_d, drug_pct);
    r.dis_threshold = config.dis_threshold > 0 ? config.dis_threshold : percentile(dis_d, 60.0);
    return r;
}

DrugDiseaseGraph build_graph(const EmbeddingTable& drug_embed, const EmbeddingTable& dis_embed,
                             const CategoryEncoder& drug_encoder, const CategoryEncoder& dis_encoder,
                             const CodeVocabulary& drug_vocab, const CodeVocabulary& dis_vocab,
                             const std::vector<PatientRecord>& records, const GraphConfig& config) {
    if (drug_embed.vocab_size() != drug_vocab.size() || dis_embed.vocab_size() != dis_vocab.size())
        throw ValidationError("build_graph: embedding tables do not match the vocabularies");
    if (drug_embed.dim() != dis_embed.dim())
        throw ValidationError("build_graph: drug/disease embedding dims differ");

    DrugDiseaseGraph g;
    g.n_drug = static_cast<int>(drug_vocab.size());
    g.n_dis = static_cast<int>(dis_vocab.size());
    g.embed_dim = drug_embed.dim();
    g.config = resolve_graph_config(drug_embed, dis_embed, config);
    g.partitions[0].kind = EdgeType::drug_drug;
    g.partitions[1].kind = EdgeType::dis_dis;
    g.partitions[2].kind = EdgeType::drug_dis;

    build_homogeneous(drug_embed.vectors, g.config.theta_drug, g.config.drug_threshold,
                      g.partition(EdgeType::drug_drug));
    build_homogeneous(dis_embed.vectors, g.config.theta_dis, g.config.dis_threshold,
                      g.partition(EdgeType::dis_dis));

    const CoOccurrence co = count_cooccurrence(records, drug_vocab, dis_vocab);
    auto& inter = g.partition(EdgeType::drug_dis);
    for (int i = 0; i < g.n_drug; ++i)
        for (int j = 0; j < g.n_dis; ++j) {
            const double w = heterogeneous_edge_weight(co.pair_count(i, j),
                                                       co.n_dis[static_cast<std::size_t>(j)],
                                                       g.config.hetero_min_count);
            if (w > 0.0) inter.edges.push_back(Edge{i, j, w});
        }

    // initial node features: skip-gram embedding followed by the category multi-hot
    const std::size_t wd = g.embed_dim + drug_encoder.total_dim();
    const std::size_t ws = g.embed_dim + dis_encoder.total_dim();
    g.features_drug = Matrix(static_cast<std::size_t>(g.n_drug), wd);
    g.features_dis = Matrix(static_cast<std::size_t>(g.n_dis), ws);
    for (int i = 0; i < g.n_drug; ++i) {
        const auto r = static_cast<std::size_t>(i);
        std::copy_n(drug_embed.vectors.row(r), g.embed_dim, g.features_drug.row(r));
        for (std::size_t p : drug_encoder.one_positions(drug_vocab.id_to_code[r]))
            g.features_drug.at(r, g.embed_dim + p) = 1.0;
    }
    for (int j = 0; j < g.n_dis; ++j) {
        const auto r = static_cast<std::size_t>(j);
        std::copy_n(dis_embed.vectors.row(r), g.embed_dim, g.features_dis.row(r));
        for (std::size_t p : dis_encoder.one_positions(dis_vocab.id_to_code[r]))
            g.features_dis.at(r, g.embed_dim + p) = 1.0;
    }
    return g;
}

GraphStats graph_stats(const DrugDiseaseGraph& graph) {
    GraphStats s;
    s.n_drug = graph.n_drug;
    s.n_dis = graph.n_dis;
    for (int p = 0; p < 3; ++p) {
        const auto& edges = graph.partitions[static_cast<std::size_t>(p)].edges;
        auto& ps = s.partitions[static_cast<std::size_t>(p)];
        ps.count = edges.size();
        if (edges.empty()) continue;
        double sum = 0.0;
        ps.w_min = edges.front().w;
        ps.w_max = edges.front().w;
        for (const auto& e : edges) {
            sum += e.w;
            ps.w_min = std::min(ps.w_min, e.w);
            ps.w_max = std::max(ps.w_max, e.w);
            auto bin = static_cast<std::size_t>(std::ceil(e.w * 10.0)) - 1;
            ps.weight_hist[std::min<std::size_t>(bin, 9)]++;
        }
        ps.w_mean = sum / static_cast<double>(edges.size());
    }
    const int n = graph.n_drug + graph.n_dis;
    std::vector<std::size_t> degree(static_cast<std::size_t>(n), 0);
    auto bump = [&](int gi, int gj) {
        degree[static_cast<std::size_t>(gi)]++;
        degree[static_cast<std::size_t>(gj)]++;
    };
    for (const auto& e : graph.partition(EdgeType::drug_drug).edges) bump(e.i, e.j);
    for (const auto& e : graph.partition(EdgeType::dis_dis).edges)
        bump(graph.n_drug + e.i, graph.n_drug + e.j);
    for (const auto& e : graph.partition(EdgeType::drug_dis).edges) bump(e.i, graph.n_drug + e.j);
    const std::size_t dmax = degree.empty() ? 0 : *std::max_element(degree.begin(), degree.end());
    s.degree_hist.assign(dmax + 1, 0);
    std::size_t total = 0;
    for (std::size_t d : degree) {
        s.degree_hist[d]++;
        total += d;
    }
    if (!degree.empty()) {
        s.degree_min = static_cast<double>(*std::min_element(degree.begin(), degree.end()));
        s.degree_max = static_cast<double>(dmax);
        s.degree_mean = static_cast<double>(total) / static_cast<double>(degree.size());
    }
    return s;
}

namespace {

nlohmann::json partition_stats_json(const PartitionStats& ps) {
    return {{"count", ps.count},
            {"weight_min", ps.w_min},
            {"weight_mean", ps.w_mean},
            {"weight_max", ps.w_max},
            {"weight_hist", ps.weight_hist}};
}

const char* kPartitionFile[3] = {"edges_drug_drug.txt", "edges_dis_dis.txt", "edges_drug_dis.txt"};
const char* kPartitionName[3] = {"drug_drug", "dis_dis", "drug_dis"};

}  // namespace

std::string graph_stats_json(const GraphStats& stats) {
    nlohmann::json j;
    j["n_drug"] = stats.n_drug;
    j["n_dis"] = stats.n_dis;
    for (int p = 0; p < 3; ++p)
        j["partitions"][kPartitionName[p]] = partition_stats_json(stats.partitions[static_cast<std::size_t>(p)]);
    j["degree"] = {{"min", stats.degree_min}, {"mean", stats.degree_mean}, {"max", stats.degree_max},
                   {"hist", stats.degree_hist}};
    return j.dump(2) + "\n";
}

void save_graph(const DrugDiseaseGraph& graph, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (int p = 0; p < 3; ++p) {
        std::ostringstream out;
        for (const auto& e : graph.partitions[static_cast<std::size_t>(p)].edges)
            out << e.i << ' ' << e.j << ' ' << format_g9(e.w) << '\n';
        atomic_write(dir + "/" + kPartitionFile[p], out.str());
    }
    save_matrix(dir + "/features_drug.bin", graph.features_drug, 0, 0);
    save_matrix(dir + "/features_dis.bin", graph.features_dis, 1, 0);
    nlohmann::json manifest;
    manifest["n_drug"] = graph.n_drug;
    manifest["n_dis"] = graph.n_dis;
    manifest["embed_dim"] = graph.embed_dim;
    manifest["config"] = {
        {"theta_drug", graph.config.theta_drug},
        {"theta_dis", graph.config.theta_dis},
        {"drug_threshold", graph.config.drug_threshold},
        {"dis_threshold", graph.config.dis_threshold},
        {"hetero_min_count", graph.config.hetero_min_count},
        {"sparsity_profile", graph.config.sparsity_profile == SparsityProfile::low ? "low" : "high"},
    };
    for (int p = 0; p < 3; ++p) manifest["edge_files"][kPartitionName[p]] = kPartitionFile[p];
    manifest["feature_files"] = {{"drug", "features_drug.bin"}, {"dis", "features_dis.bin"}};
    atomic_write(dir + "/graph_manifest.json", manifest.dump(2) + "\n");
}

DrugDiseaseGraph load_graph(const std::string& dir) {
    const auto manifest = nlohmann::json::parse(read_file(dir + "/graph_manifest.json"));
    DrugDiseaseGraph g;
    g.n_drug = manifest.at("n_drug").get<int>();
    g.n_dis = manifest.at("n_dis").get<int>();
    g.embed_dim = manifest.at("embed_dim").get<std::size_t>();
    const auto& cfg = manifest.at("config");
    g.config.theta_drug = cfg.at("theta_drug").get<double>();
    g.config.theta_dis = cfg.at("theta_dis").get<double>();
    g.config.drug_threshold = cfg.at("drug_threshold").get<double>();
    g.config.dis_threshold = cfg.at("dis_threshold").get<double>();
    g.config.hetero_min_count = cfg.at("hetero_min_count").get<int>();
    g.config.sparsity_profile =
        cfg.at("sparsity_profile").get<std::string>() == "low" ? SparsityProfile::low : SparsityProfile::high;
    for (int p = 0; p < 3; ++p) {
        g.partitions[static_cast<std::size_t>(p)].kind = static_cast<EdgeType>(p);
        std::ifstream in(dir + "/" + kPartitionFile[p]);
        if (!in) throw ValidationError("missing edge file in " + dir);
        Edge e;
        while (in >> e.i >> e.j >> e.w) g.partitions[static_cast<std::size_t>(p)].edges.push_back(e);
    }
    g.features_drug = load_matrix(dir + "/features_drug.bin");
    g.features_dis = load_matrix(dir + "/features_dis.bin");
    if (g.features_drug.rows != static_cast<std::size_t>(g.n_drug) ||
        g.features_dis.rows != static_cast<std::size_t>(g.n_dis))
        throw ValidationError("graph feature files do not match node counts in " + dir);
    return g;
}

}  // namespace adrgraph
