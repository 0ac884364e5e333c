#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "adrgraph/claims.hpp"
#include "adrgraph/codes.hpp"
#include "adrgraph/common.hpp"
#include "adrgraph/skipgram.hpp"

namespace adrgraph {

enum class EdgeType : int { drug_drug = 0, dis_dis = 1, drug_dis = 2 };

struct Edge {
    int i = 0;  // drug_drug/dis_dis: kind-local ids with i < j; drug_dis: i = drug id, j = disease id
    int j = 0;
    double w = 0.0;
};

struct EdgePartition {
    EdgeType kind = EdgeType::drug_drug;
    std::vector<Edge> edges;  // homogeneous edges stored once, read both directions
};

enum class SparsityProfile { low, high };

struct GraphConfig {
    double theta = 0.0;           // 0 = auto: median pairwise embedding distance per kind
    double drug_threshold = 0.0;  // 0 = auto: percentile preset chosen by profile
    double dis_threshold = 0.0;   // 0 = auto: shared across profiles (low preset)
    int hetero_min_count = 1;
    SparsityProfile sparsity_profile = SparsityProfile::low;

    void validate() const;
};

/// Config with every auto (0) field replaced by its data-derived value.
struct ResolvedGraphConfig {
    double theta_drug = 0.0;
    double theta_dis = 0.0;
    double drug_threshold = 0.0;
    double dis_threshold = 0.0;
    int hetero_min_count = 1;
    SparsityProfile sparsity_profile = SparsityProfile::low;
};

struct DrugDiseaseGraph {
    int n_drug = 0;
    int n_dis = 0;
    std::array<EdgePartition, 3> partitions;  // indexed by EdgeType
    Matrix features_drug;  // n_drug x (skipgram dim + drug category dim)
    Matrix features_dis;
    std::size_t embed_dim = 0;  // leading columns of the feature rows
    ResolvedGraphConfig config;

    const EdgePartition& partition(EdgeType t) const { return partitions[static_cast<int>(t)]; }
    EdgePartition& partition(EdgeType t) { return partitions[static_cast<int>(t)]; }
};

/// Gaussian weight exp(-d^2 / (2 theta^2)) when d <= threshold, else 0.
double homogeneous_edge_weight(const double* vi, const double* vj, std::size_t dim, double theta,
                               double threshold);

/// Same-visit drug/diagnosis co-occurrence counts, one count per patient.
struct CoOccurrence {
    std::vector<int> n_dis;                        // patients with diagnosis j anywhere
    std::unordered_map<std::uint64_t, int> n_pair; // patients with drug i and diagnosis j in one visit

    static std::uint64_t key(int drug, int dis) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(drug)) << 32) |
               static_cast<std::uint32_t>(dis);
    }
    int pair_count(int drug, int dis) const {
        auto it = n_pair.find(key(drug, dis));
        return it == n_pair.end() ? 0 : it->second;
    }
};

CoOccurrence count_cooccurrence(const std::vector<PatientRecord>& records,
                                const CodeVocabulary& drug_vocab, const CodeVocabulary& dis_vocab);

/// n_ij / n_j, or 0 (edge absent) when n_j = 0 or n_ij < min_count.
double heterogeneous_edge_weight(int n_ij, int n_j, int min_count);

ResolvedGraphConfig resolve_graph_config(const EmbeddingTable& drug_embed,
                                         const EmbeddingTable& dis_embed, const GraphConfig& config);

DrugDiseaseGraph build_graph(const EmbeddingTable& drug_embed, const EmbeddingTable& dis_embed,
                             const CategoryEncoder& drug_encoder, const CategoryEncoder& dis_encoder,
                             const CodeVocabulary& drug_vocab, const CodeVocabulary& dis_vocab,
                             const std::vector<PatientRecord>& records, const GraphConfig& config);

struct PartitionStats {
    std::size_t count = 0;
    double w_min = 0.0, w_mean = 0.0, w_max = 0.0;
    std::array<std::size_t, 10> weight_hist{};  // bins (0,0.1], ..., (0.9,1]
};

struct GraphStats {
    int n_drug = 0;
    int n_dis = 0;
    std::array<PartitionStats, 3> partitions;
    std::vector<std::size_t> degree_hist;  // undirected degree over the whole graph
    double degree_min = 0.0, degree_mean = 0.0, degree_max = 0.0;
};

GraphStats graph_stats(const DrugDiseaseGraph& graph);
std::string graph_stats_json(const GraphStats& stats);

/// One `i j w` line per edge, 9-significant-digit weights, plus a JSON
/// manifest naming the partition files, node counts and the resolved config.
void save_graph(const DrugDiseaseGraph& graph, const std::string& dir);
DrugDiseaseGraph load_graph(const std::string& dir);

}  // namespace adrgraph
