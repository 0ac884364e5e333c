#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "adrgraph/train.hpp"

using namespace adrgraph;

namespace {

DrugDiseaseGraph toy_graph(int n_drug, int n_dis, double edge_prob, std::uint64_t seed,
                           std::size_t fd = 6, std::size_t fs = 4) {
    Rng rng(seed);
    DrugDiseaseGraph g;
    g.n_drug = n_drug;
    g.n_dis = n_dis;
    g.partitions[0].kind = EdgeType::drug_drug;
    g.partitions[1].kind = EdgeType::dis_dis;
    g.partitions[2].kind = EdgeType::drug_dis;
    for (int i = 0; i < n_drug; ++i)
        for (int j = i + 1; j < n_drug; ++j)
            if (rng.uniform() < edge_prob) g.partitions[0].edges.push_back(Edge{i, j, rng.uniform(0.1, 1.0)});
    for (int i = 0; i < n_dis; ++i)
        for (int j = i + 1; j < n_dis; ++j)
            if (rng.uniform() < edge_prob) g.partitions[1].edges.push_back(Edge{i, j, rng.uniform(0.1, 1.0)});
    for (int i = 0; i < n_drug; ++i)
        for (int j = 0; j < n_dis; ++j)
            if (rng.uniform() < edge_prob) g.partitions[2].edges.push_back(Edge{i, j, rng.uniform(0.1, 1.0)});
    g.features_drug = Matrix(static_cast<std::size_t>(n_drug), fd);
    g.features_dis = Matrix(static_cast<std::size_t>(n_dis), fs);
    for (double& v : g.features_drug.data) v = rng.uniform(-1, 1);
    for (double& v : g.features_dis.data) v = rng.uniform(-1, 1);
    return g;
}

/// Two-community graph: nodes split into halves, dense edges within a half,
/// sparse across. Node features carry the half as a strong linear signal.
DrugDiseaseGraph block_graph(int n_drug, int n_dis, std::uint64_t seed, std::size_t fd = 6,
                             std::size_t fs = 4) {
    Rng rng(seed);
    DrugDiseaseGraph g;
    g.n_drug = n_drug;
    g.n_dis = n_dis;
    g.partitions[0].kind = EdgeType::drug_drug;
    g.partitions[1].kind = EdgeType::dis_dis;
    g.partitions[2].kind = EdgeType::drug_dis;
    auto same_half = [](int a, int b, int n) { return (a < n / 2) == (b < n / 2); };
    for (int i = 0; i < n_drug; ++i)
        for (int j = i + 1; j < n_drug; ++j) {
            const double p = same_half(i, j, n_drug) ? 0.8 : 0.05;
            if (rng.uniform() < p) g.partitions[0].edges.push_back(Edge{i, j, rng.uniform(0.5, 1.0)});
        }
    for (int i = 0; i < n_dis; ++i)
        for (int j = i + 1; j < n_dis; ++j) {
            const double p = same_half(i, j, n_dis) ? 0.8 : 0.05;
            if (rng.uniform() < p) g.partitions[1].edges.push_back(Edge{i, j, rng.uniform(0.5, 1.0)});
        }
    for (int i = 0; i < n_drug; ++i)
        for (int j = 0; j < n_dis; ++j) {
            const double p = ((i < n_drug / 2) == (j < n_dis / 2)) ? 0.6 : 0.05;
            if (rng.uniform() < p) g.partitions[2].edges.push_back(Edge{i, j, rng.uniform(0.5, 1.0)});
        }
    g.features_drug = Matrix(static_cast<std::size_t>(n_drug), fd);
    g.features_dis = Matrix(static_cast<std::size_t>(n_dis), fs);
    for (double& v : g.features_drug.data) v = rng.uniform(-0.3, 0.3);
    for (double& v : g.features_dis.data) v = rng.uniform(-0.3, 0.3);
    for (int i = 0; i < n_drug; ++i) g.features_drug.at(static_cast<std::size_t>(i), 0) = i < n_drug / 2 ? 1 : -1;
    for (int j = 0; j < n_dis; ++j) g.features_dis.at(static_cast<std::size_t>(j), 0) = j < n_dis / 2 ? 1 : -1;
    return g;
}

/// Matching-halves task (positive iff drug and disease sit in the same half).
/// Splits round-robin; class disjointness is exercised elsewhere.
LabeledPairSet matching_pairs(int n_drug, int n_dis) {
    LabeledPairSet set;
    int k = 0;
    for (int d = 0; d < n_drug; ++d)
        for (int s = 0; s < n_dis; ++s) {
            const int label = ((d < n_drug / 2) == (s < n_dis / 2)) ? 1 : 0;
            Split split = Split::train;
            if (k % 5 == 3) split = Split::val;
            if (k % 5 == 4) split = Split::test;
            ++k;
            set.pairs.push_back(LabeledPair{d, s, label, FrequencyClass::common, split});
        }
    return set;
}

/// Linearly separable task for the logistic baseline: the drug half alone
/// decides the label.
LabeledPairSet drug_half_pairs(int n_drug, int n_dis) {
    LabeledPairSet set;
    int k = 0;
    for (int d = 0; d < n_drug; ++d)
        for (int s = 0; s < n_dis; ++s) {
            Split split = Split::train;
            if (k % 5 == 3) split = Split::val;
            if (k % 5 == 4) split = Split::test;
            ++k;
            set.pairs.push_back(LabeledPair{d, s, d < n_drug / 2 ? 1 : 0, FrequencyClass::common, split});
        }
    return set;
}

}  // namespace

TEST_CASE("adam drives a quadratic toward its minimum") {
    std::vector<double> x{5.0, -3.0};
    std::vector<double> g(2);
    std::vector<TensorRef> params{{"x", x.data(), 1, 2}};
    std::vector<TensorRef> grads{{"g", g.data(), 1, 2}};
    AdamOptimizer adam(2, 0.05);
    for (int it = 0; it < 2000; ++it) {
        g[0] = 2 * (x[0] - 1.0);
        g[1] = 2 * (x[1] + 2.0);
        adam.step(params, grads);
    }
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(x[1] == doctest::Approx(-2.0).epsilon(1e-3));
}

TEST_CASE("gnn training separates a matching-halves task and is seeded") {
    DrugDiseaseGraph g = block_graph(8, 8, 5);
    const LabeledPairSet labeled = matching_pairs(8, 8);
    GnnConfig gc;
    gc.variant = GnnVariant::gcn;
    gc.layers = 2;
    gc.hidden_dim = 16;
    TrainConfig tc;
    tc.model = ModelType::gcn;
    tc.epochs = 60;
    tc.learning_rate = 0.01;
    tc.early_stop_patience = 60;
    tc.seed = 7;
    const MpGraph mp = build_mp_graph(g);
    TrainHistory hist;
    const auto params = train_gnn(mp, gc, tc, labeled, &hist);
    CHECK(hist.epochs_run <= 60);
    CHECK(hist.best_val_auroc > 0.9);

    const auto test_pairs = pairs_of_split(labeled, Split::test);
    GnnConfig gc_seeded = gc;
    gc_seeded.seed = tc.seed;
    const auto scores = score_pairs(mp, gc_seeded, params, test_pairs);
    std::vector<int> y;
    for (const auto& p : test_pairs) y.push_back(p.label);
    CHECK(auroc(scores, y) > 0.85);

    const auto params2 = train_gnn(mp, gc, tc, labeled, nullptr);
    CHECK(params.decoder_w.data == params2.decoder_w.data);  // deterministic per seed
}

TEST_CASE("one epoch runs when epochs = patience = 1") {
    DrugDiseaseGraph g = toy_graph(4, 4, 0.5, 6);
    const LabeledPairSet labeled = matching_pairs(4, 4);
    GnnConfig gc;
    gc.variant = GnnVariant::gcn;
    gc.hidden_dim = 4;
    TrainConfig tc;
    tc.epochs = 1;
    tc.early_stop_patience = 1;
    TrainHistory hist;
    train_gnn(build_mp_graph(g), gc, tc, labeled, &hist);
    CHECK(hist.epochs_run == 1);
    CHECK(hist.train_loss.size() == 1);
}

TEST_CASE("shuffled labels give near-chance test auroc") {
    DrugDiseaseGraph g = toy_graph(10, 10, 0.4, 9);
    LabeledPairSet labeled = matching_pairs(10, 10);
    GnnConfig gc;
    gc.variant = GnnVariant::gcn;
    gc.hidden_dim = 8;
    TrainConfig tc;
    tc.epochs = 30;
    tc.early_stop_patience = 30;
    const MpGraph mp = build_mp_graph(g);
    // average over a few shuffle seeds to tame small-sample noise
    std::vector<double> null_aurocs;
    for (std::uint64_t shuffle_seed : {11ULL, 12ULL, 13ULL}) {
        LabeledPairSet shuffled = labeled;
        shuffle_labels(shuffled, shuffle_seed);
        tc.seed = shuffle_seed;
        const auto params = train_gnn(mp, gc, tc, shuffled, nullptr);
        const auto test_pairs = pairs_of_split(shuffled, Split::test);
        GnnConfig gs = gc;
        gs.seed = tc.seed;
        const auto scores = score_pairs(mp, gs, params, test_pairs);
        std::vector<int> y;
        for (const auto& p : test_pairs) y.push_back(p.label);
        null_aurocs.push_back(auroc(scores, y));
    }
    const double mean = (null_aurocs[0] + null_aurocs[1] + null_aurocs[2]) / 3.0;
    CHECK(std::abs(mean - 0.5) < 0.12);
}

TEST_CASE("training reports divergence with the epoch") {
    DrugDiseaseGraph g = toy_graph(4, 4, 0.5, 10);
    const LabeledPairSet labeled = matching_pairs(4, 4);
    GnnConfig gc;
    gc.variant = GnnVariant::gcn;
    gc.hidden_dim = 4;
    TrainConfig tc;
    tc.epochs = 15;
    tc.learning_rate = 1e120;  // overflows the logits into non-finite loss
    CHECK_THROWS_WITH_AS(train_gnn(build_mp_graph(g), gc, tc, labeled, nullptr),
                         doctest::Contains("epoch"), RuntimeError);
}

TEST_CASE("lr feature layout: fixed width, top neighbors, zero padding") {
    DrugDiseaseGraph g = toy_graph(5, 4, 0.0, 20, 6, 4);  // no edges: all neighbor blocks zero
    // add two drug-drug edges with distinct weights for drug 0
    g.partitions[0].edges.push_back(Edge{0, 1, 0.9});
    g.partitions[0].edges.push_back(Edge{0, 2, 0.4});
    const MpGraph mp = build_mp_graph(g);
    const std::size_t block = std::max<std::size_t>(6, 4);
    CHECK(lr_feature_width(mp) == 2 * block + 2 * 10 * block);

    const auto x = baseline_lr_features(mp, 0, 1);
    CHECK(x.size() == lr_feature_width(mp));
    // drug block holds drug 0's features, padded with zeros
    for (std::size_t i = 0; i < 6; ++i) CHECK(x[i] == g.features_drug.at(0, i));
    // first neighbor block is drug 1 (weight 0.9), second is drug 2 (0.4), rest zero
    const std::size_t nb = 2 * block;
    for (std::size_t i = 0; i < 6; ++i) CHECK(x[nb + i] == g.features_drug.at(1, i));
    for (std::size_t i = 0; i < 6; ++i) CHECK(x[nb + block + i] == g.features_drug.at(2, i));
    for (std::size_t i = nb + 2 * block; i < nb + 10 * block; ++i) CHECK(x[i] == 0.0);
    // disease 1 has no neighbors: its 10 blocks are all zero
    for (std::size_t i = nb + 10 * block; i < x.size(); ++i) {
        if (i < nb + 10 * block + block) continue;  // not the node block
        CHECK(x[i] == 0.0);
    }

    // isolated pair: every neighbor block zero
    const auto x2 = baseline_lr_features(mp, 4, 3);
    for (std::size_t i = nb; i < x2.size(); ++i) CHECK(x2[i] == 0.0);
}

TEST_CASE("nn baseline: zero weights give 0.5, hidden dim defaults to 300") {
    DrugDiseaseGraph g = toy_graph(3, 3, 0.3, 30);
    const MpGraph mp = build_mp_graph(g);
    NnParams p;
    p.hidden = 300;
    p.w1 = Matrix(300, g.features_drug.cols + g.features_dis.cols);
    p.b1.assign(300, 0.0);
    p.w2.assign(300, 0.0);
    p.b2 = 0.0;
    const std::vector<LabeledPair> pairs{LabeledPair{0, 0, 1, FrequencyClass::unknown, Split::test}};
    CHECK(nn_scores(mp, p, pairs)[0] == 0.5);

    const LabeledPairSet labeled = matching_pairs(3, 3);
    TrainConfig tc;
    tc.epochs = 2;
    tc.early_stop_patience = 2;
    tc.seed = 40;
    const auto trained = train_nn_baseline(mp, tc, labeled);
    CHECK(trained.hidden == 300);
    CHECK(trained.w1.rows == 300);
    const auto t2 = train_nn_baseline(mp, tc, labeled);
    CHECK(trained.w1.data == t2.w1.data);  // same seed, same parameters
}

TEST_CASE("baselines learn their toy tasks") {
    DrugDiseaseGraph g = block_graph(8, 8, 44);
    const MpGraph mp = build_mp_graph(g);
    TrainConfig tc;
    tc.epochs = 400;
    tc.early_stop_patience = 400;
    tc.learning_rate = 0.02;
    tc.seed = 3;

    // the 2-layer network can express the matching-halves interaction
    const LabeledPairSet xor_task = matching_pairs(8, 8);
    auto test_pairs = pairs_of_split(xor_task, Split::test);
    std::vector<int> y;
    for (const auto& p : test_pairs) y.push_back(p.label);
    const auto nn = train_nn_baseline(mp, tc, xor_task, nullptr, 32);
    CHECK(auroc(nn_scores(mp, nn, test_pairs), y) > 0.8);

    // the logistic baseline handles the linearly separable drug-half task
    const LabeledPairSet linear_task = drug_half_pairs(8, 8);
    test_pairs = pairs_of_split(linear_task, Split::test);
    y.clear();
    for (const auto& p : test_pairs) y.push_back(p.label);
    const auto lr = train_lr_baseline(mp, tc, linear_task);
    CHECK(auroc(lr_scores(mp, lr, test_pairs), y) > 0.9);
}

TEST_CASE("baseline checkpoints round-trip") {
    DrugDiseaseGraph g = toy_graph(3, 3, 0.4, 50);
    const MpGraph mp = build_mp_graph(g);
    const LabeledPairSet labeled = matching_pairs(3, 3);
    TrainConfig tc;
    tc.epochs = 2;
    tc.early_stop_patience = 2;
    const auto nn = train_nn_baseline(mp, tc, labeled, nullptr, 8);
    save_nn_checkpoint("test_nn_ck.bin", nn);
    const auto nn2 = load_nn_checkpoint("test_nn_ck.bin");
    CHECK(nn2.hidden == 8);
    CHECK(nn2.w1.rows == nn.w1.rows);
    const auto lr = train_lr_baseline(mp, tc, labeled);
    save_lr_checkpoint("test_lr_ck.bin", lr);
    const auto lr2 = load_lr_checkpoint("test_lr_ck.bin");
    CHECK(lr2.w.size() == lr.w.size());
    CHECK_THROWS_AS(load_nn_checkpoint("test_lr_ck.bin"), ValidationError);
    std::filesystem::remove("test_nn_ck.bin");
    std::filesystem::remove("test_lr_ck.bin");
}

TEST_CASE("evaluate_rare covers only rare and post-marketing positives") {
    std::vector<LabeledPair> pairs{
        LabeledPair{0, 0, 1, FrequencyClass::rare, Split::test},
        LabeledPair{0, 1, 1, FrequencyClass::post_marketing, Split::test},
        LabeledPair{0, 2, 1, FrequencyClass::common, Split::test},
        LabeledPair{0, 3, 0, FrequencyClass::rare, Split::test},  // negative: ignored
    };
    const auto all_high = evaluate_rare(pairs, {0.9, 0.9, 0.1, 0.9});
    CHECK(all_high.applicable);
    CHECK(all_high.count == 2);
    CHECK(all_high.accuracy == 1.0);
    const auto all_low = evaluate_rare(pairs, {0.1, 0.2, 0.9, 0.9});
    CHECK(all_low.accuracy == 0.0);
    const auto na = evaluate_rare({pairs[2]}, {0.9});
    CHECK(!na.applicable);
}

TEST_CASE("per-frequency accuracy buckets positives by class plus a negative bucket") {
    std::vector<LabeledPair> pairs{
        LabeledPair{0, 0, 1, FrequencyClass::common, Split::test},
        LabeledPair{0, 1, 1, FrequencyClass::rare, Split::test},
        LabeledPair{0, 2, 0, FrequencyClass::unknown, Split::test},
    };
    const auto acc = per_frequency_accuracy(pairs, {0.9, 0.2, 0.3});
    REQUIRE(acc.size() == 3);
    for (const auto& [name, a] : acc) {
        if (name == "common") CHECK(a.accuracy == 1.0);
        if (name == "rare") CHECK(a.accuracy == 0.0);
        if (name == "negative") CHECK(a.accuracy == 1.0);
    }
}

TEST_CASE("discover_candidates applies the threshold and baseline exclusion") {
    std::vector<LabeledPair> pairs{
        LabeledPair{0, 0, 0, FrequencyClass::unknown, Split::test},  // candidate
        LabeledPair{0, 1, 0, FrequencyClass::unknown, Split::test},  // nn also positive: excluded
        LabeledPair{0, 2, 1, FrequencyClass::unknown, Split::test},  // labeled positive: excluded
        LabeledPair{0, 3, 0, FrequencyClass::unknown, Split::test},  // below threshold
        LabeledPair{1, 0, 0, FrequencyClass::unknown, Split::test},  // candidate, higher prob
    };
    const std::vector<double> gnn{0.98, 0.98, 0.99, 0.90, 0.995};
    const std::vector<double> nn{0.30, 0.90, 0.10, 0.10, 0.50};
    const auto cands = discover_candidates(pairs, gnn, nn, 0.97);
    REQUIRE(cands.size() == 2);
    CHECK(cands[0].drug == 1);  // sorted by gnn probability descending
    CHECK(cands[0].gnn_prob == 0.995);
    CHECK(cands[1].drug == 0);
    CHECK(cands[1].dis == 0);
    for (const auto& c : cands) {
        CHECK(c.gnn_prob > 0.97);
        CHECK(c.nn_prob <= 0.5);
    }
}
