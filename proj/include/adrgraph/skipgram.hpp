#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adrgraph/claims.hpp"
#include "adrgraph/common.hpp"

namespace adrgraph {

struct SkipgramConfig {
    int window = 16;
    int dim = 128;
    int negatives_per_positive = 5;
    int epochs = 5;
    double learning_rate = 0.025;
    std::uint64_t seed = 1;

    void validate() const;
};

struct EmbeddingTable {
    CodeKind kind = CodeKind::drug;
    Matrix vectors;  // vocab_size x dim

    std::size_t vocab_size() const { return vectors.rows; }
    std::size_t dim() const { return vectors.cols; }
};

/// All (center, context) pairs with context offset in [-window, window],
/// offset != 0, emitted in position order.
std::vector<std::pair<int, int>> generate_pairs(const CodeSequence& seq, int window);

/// One SGD step of skip-gram with negative sampling. Returns the loss at the
/// incoming parameters:
///   -log sigmoid(u.v) - sum_neg log sigmoid(-u.v_neg)
/// with u the center row and v the context/negative rows. lr = 0 evaluates
/// the loss without updating, which the finite-difference tests rely on.
double sgns_step(int center, int context, const std::vector<int>& negatives,
                 Matrix& center_table, Matrix& context_table, double lr);

struct SkipgramTrace {
    std::vector<double> epoch_mean_loss;
};

/// Trains one embedding space from the sequences of one code kind.
/// Deterministic given config.seed; returns the center-word table.
EmbeddingTable train_embeddings(const std::vector<CodeSequence>& corpus, std::size_t vocab_size,
                                const SkipgramConfig& config, SkipgramTrace* trace = nullptr);

/// Negative-sampling distribution: unigram counts raised to 0.75.
class NegativeSampler {
public:
    NegativeSampler(const std::vector<double>& weights);
    int sample(Rng& rng) const;  // index by cumulative-weight binary search

private:
    std::vector<double> cum_;
};

void save_embeddings(const std::string& bin_path, const std::string& codes_path,
                     const EmbeddingTable& table, const CodeVocabulary& vocab, std::uint64_t seed);
EmbeddingTable load_embeddings(const std::string& bin_path, CodeKind expected_kind);

}  // namespace adrgraph
