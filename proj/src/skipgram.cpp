#include "adrgraph/skipgram.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace adrgraph {

void SkipgramConfig::validate() const {
    if (window < 1) throw ValidationError("skipgram: window must be >= 1");
    if (dim < 2) throw ValidationError("skipgram: dim must be >= 2");
    if (negatives_per_positive < 1) throw ValidationError("skipgram: negatives_per_positive must be >= 1");
    if (epochs < 0) throw ValidationError("skipgram: epochs must be >= 0");
    if (learning_rate <= 0) throw ValidationError("skipgram: learning_rate must be > 0");
}

std::vector<std::pair<int, int>> generate_pairs(const CodeSequence& seq, int window) {
    if (window < 1) throw ValidationError("generate_pairs: window must be >= 1");
    std::vector<std::pair<int, int>> pairs;
    const int n = static_cast<int>(seq.tokens.size());
    for (int t = 0; t < n; ++t) {
        const int lo = std::max(0, t - window);
        const int hi = std::min(n - 1, t + window);
        for (int j = lo; j <= hi; ++j) {
            if (j == t) continue;
            pairs.emplace_back(seq.tokens[t], seq.tokens[j]);
        }
    }
    return pairs;
}

double sgns_step(int center, int context, const std::vector<int>& negatives,
                 Matrix& center_table, Matrix& context_table, double lr) {
    const std::size_t dim = center_table.cols;
    double* u = center_table.row(center);
    std::vector<double> grad_u(dim, 0.0);

    // positive term
    const double pos_score = sigmoid(dot(u, context_table.row(context), dim));
    double loss = -std::log(std::max(pos_score, 1e-12));
    {
        double* v = context_table.row(context);
        const double g = pos_score - 1.0;  // d loss / d (u.v)
        for (std::size_t i = 0; i < dim; ++i) {
            grad_u[i] += g * v[i];
            v[i] -= lr * g * u[i];
        }
    }
    for (int neg : negatives) {
        double* v = context_table.row(neg);
        const double s = sigmoid(dot(u, v, dim));
        loss += -std::log(std::max(1.0 - s, 1e-12));
        const double g = s;
        for (std::size_t i = 0; i < dim; ++i) {
            grad_u[i] += g * v[i];
            v[i] -= lr * g * u[i];
        }
    }
    for (std::size_t i = 0; i < dim; ++i) u[i] -= lr * grad_u[i];
    return loss;
}

NegativeSampler::NegativeSampler(const std::vector<double>& weights) {
    cum_.reserve(weights.size());
    double total = 0.0;
    for (double w : weights) {
        total += w;
        cum_.push_back(total);
    }
    if (cum_.empty() || total <= 0.0) throw ValidationError("negative sampler: no positive weights");
}

int NegativeSampler::sample(Rng& rng) const {
    const double x = rng.uniform() * cum_.back();
    auto it = std::upper_bound(cum_.begin(), cum_.end(), x);
    if (it == cum_.end()) --it;
    return static_cast<int>(it - cum_.begin());
}

EmbeddingTable train_embeddings(const std::vector<CodeSequence>& corpus, std::size_t vocab_size,
                                const SkipgramConfig& config, SkipgramTrace* trace) {
    config.validate();
    if (vocab_size == 0) throw ValidationError("train_embeddings: empty vocabulary");

    // sequences shorter than 2 contribute no pairs and are skipped
    std::vector<const CodeSequence*> usable;
    std::vector<double> counts(vocab_size, 0.0);
    for (const auto& seq : corpus) {
        if (seq.tokens.size() < 2) continue;
        usable.push_back(&seq);
        for (int t : seq.tokens) {
            if (t < 0 || static_cast<std::size_t>(t) >= vocab_size)
                throw ValidationError("train_embeddings: token id out of range");
            counts[static_cast<std::size_t>(t)] += 1.0;
        }
    }
    if (usable.empty()) throw ValidationError("train_embeddings: empty corpus");

    Rng rng(config.seed);
    EmbeddingTable table;
    table.kind = corpus.front().kind;
    table.vectors = Matrix(vocab_size, static_cast<std::size_t>(config.dim));
    Matrix context(vocab_size, static_cast<std::size_t>(config.dim));
    const double span = 0.5 / config.dim;
    for (double& v : table.vectors.data) v = rng.uniform(-span, span);
    for (double& v : context.data) v = rng.uniform(-span, span);
    if (config.epochs == 0) return table;

    std::vector<double> ns_weights(vocab_size);
    for (std::size_t i = 0; i < vocab_size; ++i) ns_weights[i] = std::pow(counts[i], 0.75);
    NegativeSampler sampler(ns_weights);

    std::size_t total_pairs = 0;
    for (const auto* seq : usable) total_pairs += generate_pairs(*seq, config.window).size();
    const double total_steps = static_cast<double>(total_pairs) * config.epochs;

    std::vector<int> negatives;
    negatives.reserve(static_cast<std::size_t>(config.negatives_per_positive));
    std::size_t step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double epoch_loss = 0.0;
        std::size_t epoch_pairs = 0;
        for (const auto* seq : usable) {
            for (auto [center, ctx] : generate_pairs(*seq, config.window)) {
                const double lr = config.learning_rate * (1.0 - static_cast<double>(step) / total_steps);
                negatives.clear();
                for (int k = 0; k < config.negatives_per_positive; ++k) {
                    const int neg = sampler.sample(rng);
                    if (neg == ctx) continue;  // skip colliding draws, as word2vec does
                    negatives.push_back(neg);
                }
                epoch_loss += sgns_step(center, ctx, negatives, table.vectors, context, lr);
                ++epoch_pairs;
                ++step;
            }
        }
        if (trace) trace->epoch_mean_loss.push_back(epoch_loss / static_cast<double>(epoch_pairs));
    }
    for (double v : table.vectors.data)
        if (!std::isfinite(v)) throw RuntimeError("train_embeddings: non-finite embedding value");
    return table;
}

void save_embeddings(const std::string& bin_path, const std::string& codes_path,
                     const EmbeddingTable& table, const CodeVocabulary& vocab, std::uint64_t seed) {
    if (vocab.size() != table.vocab_size())
        throw ValidationError("save_embeddings: vocabulary/table size mismatch");
    save_matrix(bin_path, table.vectors, static_cast<std::uint8_t>(table.kind), seed);
    std::ostringstream side;
    for (std::size_t i = 0; i < vocab.size(); ++i)
        side << i << '\t' << vocab.id_to_code[i] << '\n';
    atomic_write(codes_path, side.str());
}

EmbeddingTable load_embeddings(const std::string& bin_path, CodeKind expected_kind) {
    std::uint8_t kind = 0;
    EmbeddingTable table;
    table.vectors = load_matrix(bin_path, &kind);
    if (kind != static_cast<std::uint8_t>(expected_kind))
        throw ValidationError("embedding file holds the wrong code kind: " + bin_path);
    table.kind = expected_kind;
    return table;
}

}  // namespace adrgraph
