#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adrgraph/gnn.hpp"
#include "adrgraph/graph.hpp"
#include "adrgraph/labels.hpp"
#include "adrgraph/metrics.hpp"

namespace adrgraph {

enum class ModelType : std::uint8_t { lr = 0, nn = 1, gcn = 2, gat = 3, adrgcn = 4 };

const char* model_type_name(ModelType m);
ModelType model_type_from_string(const std::string& s);
bool is_gnn_model(ModelType m);

struct TrainConfig {
    ModelType model = ModelType::gcn;
    SparsityProfile sparsity_profile = SparsityProfile::low;
    int epochs = 200;
    double learning_rate = 1e-3;
    int early_stop_patience = 10;
    std::uint64_t seed = 1;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_auroc;
    int best_epoch = 0;      // 1-based epoch whose parameters were kept
    double best_val_auroc = 0.0;
    int epochs_run = 0;
};

std::vector<LabeledPair> pairs_of_split(const LabeledPairSet& set, Split split);

/// Shared full-batch Adam over named parameter views.
class AdamOptimizer {
public:
    AdamOptimizer(std::size_t n_params, double lr);
    void step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads);

private:
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    std::vector<double> m_, v_;
    int t_ = 0;
};

/// Trains one GNN variant full-batch, early-stopping on validation AUROC.
/// Returns the best-validation parameters. Throws RuntimeError naming the
/// epoch if the loss turns non-finite.
GnnParameters train_gnn(const MpGraph& graph, const GnnConfig& gnn_config, const TrainConfig& config,
                        const LabeledPairSet& labeled, TrainHistory* history = nullptr);

/// 2-layer fully connected baseline over the concatenated initial drug and
/// disease features (hidden dim 300).
struct NnParams {
    int hidden = 300;
    Matrix w1;                // hidden x in_dim
    std::vector<double> b1;   // hidden
    std::vector<double> w2;   // hidden
    double b2 = 0.0;
};

NnParams train_nn_baseline(const MpGraph& graph, const TrainConfig& config, const LabeledPairSet& labeled,
                           TrainHistory* history = nullptr, int hidden = 300);
std::vector<double> nn_scores(const MpGraph& graph, const NnParams& params,
                              const std::vector<LabeledPair>& pairs);
void save_nn_checkpoint(const std::string& path, const NnParams& params);
NnParams load_nn_checkpoint(const std::string& path);

/// Logistic regression over node + top-10-neighbor initial features.
struct LrParams {
    std::vector<double> w;
    double b = 0.0;
};

constexpr int kLrNeighborCount = 10;

/// Fixed layout: [drug feats | dis feats | 10 drug-neighbor blocks |
/// 10 dis-neighbor blocks], every block zero-padded to the wider of the two
/// feature widths. Neighbors are ordered by edge weight descending (ties by
/// node id) across all incident partitions.
std::vector<double> baseline_lr_features(const MpGraph& graph, int drug, int dis);
std::size_t lr_feature_width(const MpGraph& graph);

LrParams train_lr_baseline(const MpGraph& graph, const TrainConfig& config, const LabeledPairSet& labeled,
                           TrainHistory* history = nullptr, double l2 = 1e-4);
std::vector<double> lr_scores(const MpGraph& graph, const LrParams& params,
                              const std::vector<LabeledPair>& pairs);
void save_lr_checkpoint(const std::string& path, const LrParams& params);
LrParams load_lr_checkpoint(const std::string& path);

struct RareEval {
    bool applicable = false;  // false when no rare/post-marketing positives exist
    double accuracy = 0.0;    // fraction of such positives with score > 0.5
    std::size_t hits = 0;
    std::size_t count = 0;
};

/// Accuracy over positives tagged rare or post_marketing in `pairs`.
RareEval evaluate_rare(const std::vector<LabeledPair>& pairs, const std::vector<double>& scores);

struct FrequencyAccuracy {
    std::size_t count = 0;
    double accuracy = 0.0;
};

/// Accuracy by frequency class over positives, plus a "negative" bucket for
/// label-0 pairs (correct when score <= 0.5).
std::vector<std::pair<std::string, FrequencyAccuracy>> per_frequency_accuracy(
    const std::vector<LabeledPair>& pairs, const std::vector<double>& scores);

struct CandidatePair {
    int drug = 0;
    int dis = 0;
    double gnn_prob = 0.0;
    double nn_prob = 0.0;
};

/// Negative-labeled pairs the graph model scores above `threshold` that the
/// feature-only baseline does not also call positive (nn prob <= 0.5),
/// sorted by graph-model probability descending.
std::vector<CandidatePair> discover_candidates(const std::vector<LabeledPair>& pairs,
                                               const std::vector<double>& gnn_probs,
                                               const std::vector<double>& nn_probs,
                                               double threshold = 0.97);

}  // namespace adrgraph
