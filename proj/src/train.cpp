#include "adrgraph/train.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace adrgraph {

const char* model_type_name(ModelType m) {
    switch (m) {
        case ModelType::lr: return "lr";
        case ModelType::nn: return "nn";
        case ModelType::gcn: return "gcn";
        case ModelType::gat: return "gat";
        default: return "adrgcn";
    }
}

ModelType model_type_from_string(const std::string& s) {
    if (s == "lr") return ModelType::lr;
    if (s == "nn") return ModelType::nn;
    if (s == "gcn") return ModelType::gcn;
    if (s == "gat") return ModelType::gat;
    if (s == "adrgcn") return ModelType::adrgcn;
    throw ValidationError("unknown model: '" + s + "'");
}

bool is_gnn_model(ModelType m) {
    return m == ModelType::gcn || m == ModelType::gat || m == ModelType::adrgcn;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
    if (learning_rate <= 0) throw ValidationError("train: learning_rate must be > 0");
    if (early_stop_patience < 1) throw ValidationError("train: early_stop_patience must be >= 1");
}

std::vector<LabeledPair> pairs_of_split(const LabeledPairSet& set, Split split) {
    std::vector<LabeledPair> out;
    for (const auto& p : set.pairs)
        if (p.split == split) out.push_back(p);
    return out;
}

AdamOptimizer::AdamOptimizer(std::size_t n_params, double lr)
    : lr_(lr), m_(n_params, 0.0), v_(n_params, 0.0) {}

void AdamOptimizer::step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    std::size_t off = 0;
    for (std::size_t r = 0; r < params.size(); ++r) {
        double* p = params[r].data;
        const double* g = grads[r].data;
        for (std::size_t i = 0; i < params[r].size(); ++i, ++off) {
            m_[off] = beta1_ * m_[off] + (1.0 - beta1_) * g[i];
            v_[off] = beta2_ * v_[off] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = m_[off] / bc1;
            const double vhat = v_[off] / bc2;
            p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
    if (off != m_.size()) throw RuntimeError("adam: parameter count changed between steps");
}

namespace {

constexpr double kClamp = 1e-12;

double val_metric(const std::vector<LabeledPair>& val_pairs, const std::vector<double>& scores) {
    bool has_pos = false, has_neg = false;
    for (const auto& p : val_pairs) (p.label ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) return 0.5;  // degenerate validation split
    std::vector<int> labels;
    labels.reserve(val_pairs.size());
    for (const auto& p : val_pairs) labels.push_back(p.label);
    return auroc(scores, labels);
}

std::size_t total_size(const std::vector<TensorRef>& refs) {
    std::size_t n = 0;
    for (const auto& r : refs) n += r.size();
    return n;
}

/// Generic early-stopped full-batch loop. `run_epoch` returns the train loss
/// and must leave current parameters scoreable by `score_val`.
template <typename RunEpoch, typename ScoreVal, typename Snapshot>
TrainHistory train_loop(const TrainConfig& config, const std::vector<LabeledPair>& val_pairs,
                        RunEpoch&& run_epoch, ScoreVal&& score_val, Snapshot&& snapshot) {
    TrainHistory hist;
    double best = -1.0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const double loss = run_epoch();
        if (!std::isfinite(loss))
            throw RuntimeError("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
        hist.train_loss.push_back(loss);
        const double va = val_metric(val_pairs, score_val());
        hist.val_auroc.push_back(va);
        hist.epochs_run = epoch;
        if (va > best) {
            best = va;
            hist.best_epoch = epoch;
            hist.best_val_auroc = va;
            snapshot();
        }
        if (epoch - hist.best_epoch >= config.early_stop_patience && epoch < config.epochs) break;
    }
    return hist;
}

}  // namespace

GnnParameters train_gnn(const MpGraph& graph, const GnnConfig& gnn_config, const TrainConfig& config,
                        const LabeledPairSet& labeled, TrainHistory* history) {
    config.validate();
    GnnConfig gc = gnn_config;
    gc.seed = config.seed;
    gc.validate();
    const auto train_pairs = pairs_of_split(labeled, Split::train);
    const auto val_pairs = pairs_of_split(labeled, Split::val);
    if (train_pairs.empty()) throw ValidationError("train_gnn: empty training split");

    GnnParameters params = init_gnn_params(gc, graph.feat_drug->cols, graph.feat_dis->cols);
    GnnParameters best = params;
    auto refs = tensor_refs(params);
    AdamOptimizer adam(total_size(refs), config.learning_rate);

    TrainHistory hist = train_loop(
        config, val_pairs,
        [&]() {
            GnnParameters grads = zeros_like(params);
            const double loss = loss_and_gradients(graph, gc, params, train_pairs, grads);
            auto grefs = tensor_refs(grads);
            adam.step(refs, grefs);
            return loss;
        },
        [&]() { return score_pairs(graph, gc, params, val_pairs); },
        [&]() { best = params; });
    if (history) *history = hist;
    return best;
}

// ---- NN baseline ----------------------------------------------------------

namespace {

std::vector<double> nn_input(const MpGraph& g, int drug, int dis) {
    const Matrix& fd = *g.feat_drug;
    const Matrix& fs = *g.feat_dis;
    std::vector<double> x(fd.cols + fs.cols);
    std::copy_n(fd.row(static_cast<std::size_t>(drug)), fd.cols, x.data());
    std::copy_n(fs.row(static_cast<std::size_t>(dis)), fs.cols, x.data() + fd.cols);
    return x;
}

double nn_forward_one(const NnParams& p, const std::vector<double>& x, std::vector<double>* h_out,
                      std::vector<double>* pre_out) {
    const auto hidden = static_cast<std::size_t>(p.hidden);
    std::vector<double> pre(hidden), h(hidden);
    for (std::size_t o = 0; o < hidden; ++o) {
        pre[o] = dot(p.w1.row(o), x.data(), p.w1.cols) + p.b1[o];
        h[o] = pre[o] > 0 ? pre[o] : 0.0;
    }
    const double logit = dot(p.w2.data(), h.data(), hidden) + p.b2;
    if (h_out) *h_out = std::move(h);
    if (pre_out) *pre_out = std::move(pre);
    return logit;
}

std::vector<TensorRef> nn_tensor_refs(NnParams& p) {
    return {TensorRef{"w1", p.w1.data.data(), p.w1.rows, p.w1.cols},
            TensorRef{"b1", p.b1.data(), 1, p.b1.size()},
            TensorRef{"w2", p.w2.data(), 1, p.w2.size()},
            TensorRef{"b2", &p.b2, 1, 1}};
}

std::vector<TensorRef> lr_tensor_refs(LrParams& p) {
    return {TensorRef{"w", p.w.data(), 1, p.w.size()}, TensorRef{"b", &p.b, 1, 1}};
}

double clamped_prob(double logit) {
    // NaN passes through so divergence is caught, saturation is clamped
    const double p = sigmoid(logit);
    if (p < kClamp) return kClamp;
    if (p > 1.0 - kClamp) return 1.0 - kClamp;
    return p;
}

}  // namespace

std::vector<double> nn_scores(const MpGraph& graph, const NnParams& params,
                              const std::vector<LabeledPair>& pairs) {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& pr : pairs)
        out.push_back(clamped_prob(nn_forward_one(params, nn_input(graph, pr.drug, pr.dis), nullptr, nullptr)));
    return out;
}

NnParams train_nn_baseline(const MpGraph& graph, const TrainConfig& config, const LabeledPairSet& labeled,
                           TrainHistory* history, int hidden) {
    config.validate();
    if (hidden < 1) throw ValidationError("train_nn_baseline: hidden must be >= 1");
    const auto train_pairs = pairs_of_split(labeled, Split::train);
    const auto val_pairs = pairs_of_split(labeled, Split::val);
    if (train_pairs.empty()) throw ValidationError("train_nn_baseline: empty training split");

    const std::size_t in_dim = graph.feat_drug->cols + graph.feat_dis->cols;
    Rng rng(config.seed);
    NnParams p;
    p.hidden = hidden;
    p.w1 = Matrix(static_cast<std::size_t>(hidden), in_dim);
    const double lim1 = std::sqrt(6.0 / static_cast<double>(in_dim + static_cast<std::size_t>(hidden)));
    for (double& v : p.w1.data) v = rng.uniform(-lim1, lim1);
    p.b1.assign(static_cast<std::size_t>(hidden), 0.0);
    p.w2.resize(static_cast<std::size_t>(hidden));
    const double lim2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
    for (double& v : p.w2) v = rng.uniform(-lim2, lim2);
    p.b2 = 0.0;

    // inputs are fixed per pair; build the design matrix once
    std::vector<std::vector<double>> x_train;
    x_train.reserve(train_pairs.size());
    for (const auto& pr : train_pairs) x_train.push_back(nn_input(graph, pr.drug, pr.dis));

    NnParams best = p;
    auto refs = nn_tensor_refs(p);
    AdamOptimizer adam(total_size(refs), config.learning_rate);
    const double inv_b = 1.0 / static_cast<double>(train_pairs.size());

    TrainHistory hist = train_loop(
        config, val_pairs,
        [&]() {
            NnParams grads = p;
            for (auto& r : nn_tensor_refs(grads)) std::fill(r.data, r.data + r.size(), 0.0);
            double loss = 0.0;
            for (std::size_t k = 0; k < train_pairs.size(); ++k) {
                std::vector<double> h, pre;
                const double logit = nn_forward_one(p, x_train[k], &h, &pre);
                const double raw = sigmoid(logit);
                const double prob = clamped_prob(logit);
                const int y = train_pairs[k].label;
                loss += y ? -std::log(prob) : -std::log(1.0 - prob);
                const bool clamped = raw <= kClamp || raw >= 1.0 - kClamp;
                const double dlogit = clamped ? 0.0 : (raw - y) * inv_b;
                if (dlogit == 0.0) continue;
                grads.b2 += dlogit;
                for (std::size_t o = 0; o < h.size(); ++o) {
                    grads.w2[o] += dlogit * h[o];
                    if (pre[o] <= 0) continue;
                    const double dh = dlogit * p.w2[o];
                    grads.b1[o] += dh;
                    double* gw = grads.w1.row(o);
                    const double* x = x_train[k].data();
                    for (std::size_t i = 0; i < grads.w1.cols; ++i) gw[i] += dh * x[i];
                }
            }
            auto grefs = nn_tensor_refs(grads);
            adam.step(refs, grefs);
            return loss * inv_b;
        },
        [&]() { return nn_scores(graph, p, val_pairs); },
        [&]() { best = p; });
    if (history) *history = hist;
    return best;
}

void save_nn_checkpoint(const std::string& path, const NnParams& params) {
    nlohmann::json meta;
    meta["kind"] = "nn";
    meta["hidden"] = params.hidden;
    meta["in_dim"] = params.w1.cols;
    auto refs = nn_tensor_refs(const_cast<NnParams&>(params));
    save_tensor_file(path, meta.dump(), refs);
}

NnParams load_nn_checkpoint(const std::string& path) {
    LoadedTensorFile file = load_tensor_file(path);
    const auto meta = nlohmann::json::parse(file.meta_json);
    if (meta.at("kind").get<std::string>() != "nn")
        throw ValidationError("checkpoint is not an nn model: " + path);
    NnParams p;
    p.hidden = meta.at("hidden").get<int>();
    const auto in_dim = meta.at("in_dim").get<std::size_t>();
    p.w1 = Matrix(static_cast<std::size_t>(p.hidden), in_dim);
    p.b1.assign(static_cast<std::size_t>(p.hidden), 0.0);
    p.w2.assign(static_cast<std::size_t>(p.hidden), 0.0);
    auto refs = nn_tensor_refs(p);
    if (refs.size() != file.tensors.size()) throw ValidationError("nn checkpoint mismatch: " + path);
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const auto& [name, m] = file.tensors[i];
        if (name != refs[i].name || m.rows != refs[i].rows || m.cols != refs[i].cols)
            throw ValidationError("nn checkpoint tensor mismatch: " + path);
        std::copy(m.data.begin(), m.data.end(), refs[i].data);
    }
    return p;
}

// ---- LR baseline ----------------------------------------------------------

namespace {

std::size_t lr_block_width(const MpGraph& g) { return std::max(g.feat_drug->cols, g.feat_dis->cols); }

void copy_node_features(const MpGraph& g, int node, double* dst) {
    if (node < g.n_drug)
        std::copy_n(g.feat_drug->row(static_cast<std::size_t>(node)), g.feat_drug->cols, dst);
    else
        std::copy_n(g.feat_dis->row(static_cast<std::size_t>(node - g.n_drug)), g.feat_dis->cols, dst);
}

std::vector<int> top_neighbors(const MpGraph& g, int node) {
    std::vector<MpNeighbor> nbrs = g.adj[static_cast<std::size_t>(node)];
    std::sort(nbrs.begin(), nbrs.end(), [](const MpNeighbor& a, const MpNeighbor& b) {
        if (a.w != b.w) return a.w > b.w;
        return a.j < b.j;
    });
    std::vector<int> out;
    for (const auto& nb : nbrs) {
        out.push_back(nb.j);
        if (out.size() == kLrNeighborCount) break;
    }
    return out;
}

}  // namespace

std::size_t lr_feature_width(const MpGraph& graph) {
    const std::size_t b = lr_block_width(graph);
    return 2 * b + 2 * kLrNeighborCount * b;
}

std::vector<double> baseline_lr_features(const MpGraph& graph, int drug, int dis) {
    const std::size_t b = lr_block_width(graph);
    std::vector<double> x(lr_feature_width(graph), 0.0);
    const int dis_node = graph.n_drug + dis;
    copy_node_features(graph, drug, x.data());
    copy_node_features(graph, dis_node, x.data() + b);
    std::size_t off = 2 * b;
    for (int nb : top_neighbors(graph, drug)) {
        copy_node_features(graph, nb, x.data() + off);
        off += b;
    }
    off = 2 * b + kLrNeighborCount * b;
    for (int nb : top_neighbors(graph, dis_node)) {
        copy_node_features(graph, nb, x.data() + off);
        off += b;
    }
    return x;
}

std::vector<double> lr_scores(const MpGraph& graph, const LrParams& params,
                              const std::vector<LabeledPair>& pairs) {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& pr : pairs) {
        const auto x = baseline_lr_features(graph, pr.drug, pr.dis);
        out.push_back(clamped_prob(dot(params.w.data(), x.data(), x.size()) + params.b));
    }
    return out;
}

LrParams train_lr_baseline(const MpGraph& graph, const TrainConfig& config, const LabeledPairSet& labeled,
                           TrainHistory* history, double l2) {
    config.validate();
    const auto train_pairs = pairs_of_split(labeled, Split::train);
    const auto val_pairs = pairs_of_split(labeled, Split::val);
    if (train_pairs.empty()) throw ValidationError("train_lr_baseline: empty training split");

    std::vector<std::vector<double>> x_train;
    x_train.reserve(train_pairs.size());
    for (const auto& pr : train_pairs) x_train.push_back(baseline_lr_features(graph, pr.drug, pr.dis));

    LrParams p;
    p.w.assign(lr_feature_width(graph), 0.0);
    p.b = 0.0;
    LrParams best = p;
    auto refs = lr_tensor_refs(p);
    AdamOptimizer adam(total_size(refs), config.learning_rate);
    const double inv_b = 1.0 / static_cast<double>(train_pairs.size());

    TrainHistory hist = train_loop(
        config, val_pairs,
        [&]() {
            LrParams grads = p;
            std::fill(grads.w.begin(), grads.w.end(), 0.0);
            grads.b = 0.0;
            double loss = 0.0;
            for (std::size_t k = 0; k < train_pairs.size(); ++k) {
                const double logit = dot(p.w.data(), x_train[k].data(), p.w.size()) + p.b;
                const double raw = sigmoid(logit);
                const double prob = clamped_prob(logit);
                const int y = train_pairs[k].label;
                loss += y ? -std::log(prob) : -std::log(1.0 - prob);
                const bool clamped = raw <= kClamp || raw >= 1.0 - kClamp;
                const double dlogit = clamped ? 0.0 : (raw - y) * inv_b;
                if (dlogit == 0.0) continue;
                grads.b += dlogit;
                for (std::size_t i = 0; i < p.w.size(); ++i) grads.w[i] += dlogit * x_train[k][i];
            }
            loss *= inv_b;
            for (std::size_t i = 0; i < p.w.size(); ++i) {
                loss += l2 * p.w[i] * p.w[i];
                grads.w[i] += 2.0 * l2 * p.w[i];
            }
            auto grefs = lr_tensor_refs(grads);
            adam.step(refs, grefs);
            return loss;
        },
        [&]() { return lr_scores(graph, p, val_pairs); },
        [&]() { best = p; });
    if (history) *history = hist;
    return best;
}

void save_lr_checkpoint(const std::string& path, const LrParams& params) {
    nlohmann::json meta;
    meta["kind"] = "lr";
    meta["width"] = params.w.size();
    auto refs = lr_tensor_refs(const_cast<LrParams&>(params));
    save_tensor_file(path, meta.dump(), refs);
}

LrParams load_lr_checkpoint(const std::string& path) {
    LoadedTensorFile file = load_tensor_file(path);
    const auto meta = nlohmann::json::parse(file.meta_json);
    if (meta.at("kind").get<std::string>() != "lr")
        throw ValidationError("checkpoint is not an lr model: " + path);
    LrParams p;
    p.w.assign(meta.at("width").get<std::size_t>(), 0.0);
    auto refs = lr_tensor_refs(p);
    if (refs.size() != file.tensors.size()) throw ValidationError("lr checkpoint mismatch: " + path);
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const auto& [name, m] = file.tensors[i];
        if (name != refs[i].name || m.rows != refs[i].rows || m.cols != refs[i].cols)
            throw ValidationError("lr checkpoint tensor mismatch: " + path);
        std::copy(m.data.begin(), m.data.end(), refs[i].data);
    }
    return p;
}

// ---- evaluation helpers ---------------------------------------------------

RareEval evaluate_rare(const std::vector<LabeledPair>& pairs, const std::vector<double>& scores) {
    if (pairs.size() != scores.size()) throw ValidationError("evaluate_rare: size mismatch");
    RareEval out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!pairs[i].label) continue;
        if (pairs[i].frequency != FrequencyClass::rare &&
            pairs[i].frequency != FrequencyClass::post_marketing)
            continue;
        ++out.count;
        if (scores[i] > 0.5) ++out.hits;
    }
    out.applicable = out.count > 0;
    if (out.applicable) out.accuracy = static_cast<double>(out.hits) / static_cast<double>(out.count);
    return out;
}

std::vector<std::pair<std::string, FrequencyAccuracy>> per_frequency_accuracy(
    const std::vector<LabeledPair>& pairs, const std::vector<double>& scores) {
    if (pairs.size() != scores.size()) throw ValidationError("per_frequency_accuracy: size mismatch");
    constexpr int kNegBucket = 4;
    std::array<std::size_t, 5> count{}, hit{};
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const int bucket = pairs[i].label ? static_cast<int>(pairs[i].frequency) : kNegBucket;
        const bool correct = pairs[i].label ? scores[i] > 0.5 : scores[i] <= 0.5;
        count[static_cast<std::size_t>(bucket)]++;
        if (correct) hit[static_cast<std::size_t>(bucket)]++;
    }
    std::vector<std::pair<std::string, FrequencyAccuracy>> out;
    for (int b = 0; b < 5; ++b) {
        const auto ub = static_cast<std::size_t>(b);
        if (count[ub] == 0) continue;
        const std::string name = b == kNegBucket ? "negative" : frequency_name(static_cast<FrequencyClass>(b));
        out.emplace_back(name, FrequencyAccuracy{count[ub],
                                                 static_cast<double>(hit[ub]) / static_cast<double>(count[ub])});
    }
    return out;
}

std::vector<CandidatePair> discover_candidates(const std::vector<LabeledPair>& pairs,
                                               const std::vector<double>& gnn_probs,
                                               const std::vector<double>& nn_probs, double threshold) {
    if (pairs.size() != gnn_probs.size() || pairs.size() != nn_probs.size())
        throw ValidationError("discover_candidates: size mismatch");
    std::vector<CandidatePair> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].label != 0) continue;
        if (gnn_probs[i] <= threshold) continue;
        if (nn_probs[i] > 0.5) continue;  // also called positive by the feature-only baseline
        out.push_back(CandidatePair{pairs[i].drug, pairs[i].dis, gnn_probs[i], nn_probs[i]});
    }
    std::sort(out.begin(), out.end(), [](const CandidatePair& a, const CandidatePair& b) {
        if (a.gnn_prob != b.gnn_prob) return a.gnn_prob > b.gnn_prob;
        if (a.drug != b.drug) return a.drug < b.drug;
        return a.dis < b.dis;
    });
    return out;
}

}  // namespace adrgraph
