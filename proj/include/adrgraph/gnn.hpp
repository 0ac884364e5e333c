#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "adrgraph/common.hpp"
#include "adrgraph/graph.hpp"
#include "adrgraph/labels.hpp"

namespace adrgraph {

enum class GnnVariant : std::uint8_t { gcn = 0, gat = 1, adrgcn = 2 };

const char* gnn_variant_name(GnnVariant v);
GnnVariant gnn_variant_from_string(const std::string& s);

struct GnnConfig {
    GnnVariant variant = GnnVariant::gcn;
    int layers = 2;
    int hidden_dim = 300;
    std::vector<int> gat_heads = {4, 4};
    double self_loop_weight = 1.0;
    bool relu_last = true;  // apply the nonlinearity after the final layer too
    std::uint64_t seed = 1;

    void validate() const;
};

/// Message-passing view of a DrugDiseaseGraph. Node ids are global: drugs
/// occupy [0, n_drug), diseases [n_drug, n). Homogeneous edges appear in both
/// directions; self-loops are not stored and are applied at aggregation.
struct MpNeighbor {
    int j = 0;
    double w = 0.0;
    int part = 0;  // EdgeType index
};

struct MpGraph {
    int n_drug = 0;
    int n_dis = 0;
    int n = 0;
    std::vector<std::vector<MpNeighbor>> adj;
    std::vector<int> degree;                       // |adj[i]| + 1 (self-loop)
    std::array<std::vector<int>, 3> part_degree;   // per partition; own-kind partition counts the self-loop
    const Matrix* feat_drug = nullptr;             // borrowed from the source graph
    const Matrix* feat_dis = nullptr;

    int own_partition(int node) const { return node < n_drug ? 0 : 1; }
};

MpGraph build_mp_graph(const DrugDiseaseGraph& graph);

/// Attention scoring map of one GAT head: a single affine layer over the
/// concatenated pair, followed by LeakyReLU (slope 0.2).
struct GatHeadParams {
    Matrix w;                   // head_dim x in_dim
    std::vector<double> attn;   // 2 * in_dim
    double attn_bias = 0.0;
};

struct GnnLayerParams {
    Matrix w;                          // gcn
    std::array<Matrix, 3> w_part;      // adrgcn, indexed by EdgeType
    std::vector<GatHeadParams> heads;  // gat
};

struct GnnParameters {
    GnnVariant variant = GnnVariant::gcn;
    Matrix proj_drug_w;
    std::vector<double> proj_drug_b;
    Matrix proj_dis_w;
    std::vector<double> proj_dis_b;
    std::vector<GnnLayerParams> layers;
    Matrix decoder_w;  // hidden x hidden
    double decoder_b = 0.0;
};

/// Glorot-style uniform init, biases zero, deterministic per config.seed.
GnnParameters init_gnn_params(const GnnConfig& config, std::size_t in_drug, std::size_t in_dis);
GnnParameters zeros_like(const GnnParameters& params);

/// Named views over every parameter block in a fixed order; the same order
/// drives checkpoints, Adam state and finite-difference sweeps.
std::vector<TensorRef> tensor_refs(GnnParameters& params);

/// Degree-normalized fixed weight w_ij / sqrt(d_i d_j).
double gcn_alpha(double w_ij, int d_i, int d_j);

/// Attention row of one head: softmax over the listed neighbors of
/// LeakyReLU(attn . [z_i || z_k] + bias). `neighbors` must be non-empty and
/// normally includes i itself.
std::vector<double> gat_alpha_row(const Matrix& z, int i, const std::vector<int>& neighbors,
                                  const GatHeadParams& head);

/// sigma(z_drug^T W z_dis + b), kept strictly inside (0,1).
double bilinear_score(const double* z_drug, const double* z_dis, const Matrix& w, double b);

/// Per-layer, per-head attention rows: alpha[layer][head][node][k] aligned
/// with adj[node] and the self-loop last. Empty for non-GAT variants.
using AttentionSnapshot = std::vector<std::vector<std::vector<std::vector<double>>>>;

/// Full forward pass; returns z^(L) for all nodes (n x hidden).
Matrix gnn_forward(const MpGraph& graph, const GnnConfig& config, const GnnParameters& params,
                   AttentionSnapshot* attention = nullptr);

/// Mean cross-entropy of the batch under the current parameters.
double gnn_loss(const MpGraph& graph, const GnnConfig& config, const GnnParameters& params,
                const std::vector<LabeledPair>& batch);

/// Loss plus reverse-mode gradients for every parameter. `grads` must be
/// zeros_like(params); gradients are accumulated into it.
double loss_and_gradients(const MpGraph& graph, const GnnConfig& config, const GnnParameters& params,
                          const std::vector<LabeledPair>& batch, GnnParameters& grads);

/// Decoder probabilities for the given pairs under a single forward pass.
std::vector<double> score_pairs(const MpGraph& graph, const GnnConfig& config,
                                const GnnParameters& params, const std::vector<LabeledPair>& pairs);

void save_gnn_checkpoint(const std::string& path, const GnnConfig& config, std::size_t in_drug,
                         std::size_t in_dis, const GnnParameters& params);

struct GnnCheckpoint {
    GnnConfig config;
    std::size_t in_drug = 0;
    std::size_t in_dis = 0;
    GnnParameters params;
};
GnnCheckpoint load_gnn_checkpoint(const std::string& path);

}  // namespace adrgraph
