#pragma once

// Test-side builders and independent oracle implementations. Everything here
// must stay independent of the library's computation paths it checks.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "adrgraph/gnn.hpp"
#include "adrgraph/graph.hpp"
#include "adrgraph/labels.hpp"

namespace testsupport {

using namespace adrgraph;

/// Random graph with all three partitions populated; weights uniform in (0,1].
inline DrugDiseaseGraph random_graph(int n_drug, int n_dis, double edge_prob, std::uint64_t seed,
                                     std::size_t fd = 7, std::size_t fs = 5) {
    Rng rng(seed);
    DrugDiseaseGraph g;
    g.n_drug = n_drug;
    g.n_dis = n_dis;
    g.embed_dim = 0;
    g.partitions[0].kind = EdgeType::drug_drug;
    g.partitions[1].kind = EdgeType::dis_dis;
    g.partitions[2].kind = EdgeType::drug_dis;
    for (int i = 0; i < n_drug; ++i)
        for (int j = i + 1; j < n_drug; ++j)
            if (rng.uniform() < edge_prob)
                g.partitions[0].edges.push_back(Edge{i, j, 0.05 + 0.95 * rng.uniform()});
    for (int i = 0; i < n_dis; ++i)
        for (int j = i + 1; j < n_dis; ++j)
            if (rng.uniform() < edge_prob)
                g.partitions[1].edges.push_back(Edge{i, j, 0.05 + 0.95 * rng.uniform()});
    for (int i = 0; i < n_drug; ++i)
        for (int j = 0; j < n_dis; ++j)
            if (rng.uniform() < edge_prob)
                g.partitions[2].edges.push_back(Edge{i, j, 0.05 + 0.95 * rng.uniform()});
    g.features_drug = Matrix(static_cast<std::size_t>(n_drug), fd);
    g.features_dis = Matrix(static_cast<std::size_t>(n_dis), fs);
    for (double& v : g.features_drug.data) v = rng.uniform(-1, 1);
    for (double& v : g.features_dis.data) v = rng.uniform(-1, 1);
    return g;
}

inline std::vector<LabeledPair> random_batch(const DrugDiseaseGraph& g, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LabeledPair> batch;
    for (int k = 0; k < n; ++k)
        batch.push_back(LabeledPair{rng.below_int(g.n_drug), rng.below_int(g.n_dis),
                                    rng.below_int(2), FrequencyClass::unknown, Split::train});
    return batch;
}

inline Matrix dense_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double av = a.at(i, k);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) += av * b.at(k, j);
        }
    return c;
}

/// Independent dense-path GCN: explicit normalized adjacency times features
/// times W^T, ReLU between layers.
inline Matrix dense_gcn_forward(const DrugDiseaseGraph& g, const GnnConfig& c, const GnnParameters& p) {
    const int n = g.n_drug + g.n_dis;
    const auto un = static_cast<std::size_t>(n);
    std::vector<int> deg(un, 1);  // self-loop included
    auto bump = [&](int a, int b) {
        deg[static_cast<std::size_t>(a)]++;
        deg[static_cast<std::size_t>(b)]++;
    };
    for (const auto& e : g.partition(EdgeType::drug_drug).edges) bump(e.i, e.j);
    for (const auto& e : g.partition(EdgeType::dis_dis).edges) bump(g.n_drug + e.i, g.n_drug + e.j);
    for (const auto& e : g.partition(EdgeType::drug_dis).edges) bump(e.i, g.n_drug + e.j);

    Matrix a_hat(un, un);
    auto set_edge = [&](int i, int j, double w) {
        const double a = w / std::sqrt(static_cast<double>(deg[static_cast<std::size_t>(i)]) *
                                       static_cast<double>(deg[static_cast<std::size_t>(j)]));
        a_hat.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = a;
        a_hat.at(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) = a;
    };
    for (const auto& e : g.partition(EdgeType::drug_drug).edges) set_edge(e.i, e.j, e.w);
    for (const auto& e : g.partition(EdgeType::dis_dis).edges)
        set_edge(g.n_drug + e.i, g.n_drug + e.j, e.w);
    for (const auto& e : g.partition(EdgeType::drug_dis).edges) set_edge(e.i, g.n_drug + e.j, e.w);
    for (int i = 0; i < n; ++i)
        a_hat.at(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) =
            c.self_loop_weight / static_cast<double>(deg[static_cast<std::size_t>(i)]);

    const auto hidden = static_cast<std::size_t>(c.hidden_dim);
    Matrix z(un, hidden);
    auto project = [&](const Matrix& x, const Matrix& w, const std::vector<double>& b, std::size_t base) {
        for (std::size_t r = 0; r < x.rows; ++r)
            for (std::size_t o = 0; o < hidden; ++o) {
                double v = b[o];
                for (std::size_t i2 = 0; i2 < x.cols; ++i2) v += w.at(o, i2) * x.at(r, i2);
                z.at(base + r, o) = std::max(0.0, v);
            }
    };
    project(g.features_drug, p.proj_drug_w, p.proj_drug_b, 0);
    project(g.features_dis, p.proj_dis_w, p.proj_dis_b, static_cast<std::size_t>(g.n_drug));

    for (int l = 0; l < c.layers; ++l) {
        Matrix zw(un, hidden);
        for (std::size_t r = 0; r < un; ++r)
            for (std::size_t o = 0; o < hidden; ++o) {
                double v = 0;
                for (std::size_t i2 = 0; i2 < hidden; ++i2)
                    v += p.layers[static_cast<std::size_t>(l)].w.at(o, i2) * z.at(r, i2);
                zw.at(r, o) = v;
            }
        Matrix s = dense_matmul(a_hat, zw);
        const bool relu = l + 1 < c.layers || c.relu_last;
        if (relu)
            for (double& v : s.data) v = std::max(0.0, v);
        z = std::move(s);
    }
    return z;
}

struct FdReport {
    double max_rel = 0.0;
    std::string worst;
};

/// Central finite differences over every parameter against the analytic
/// reverse-mode gradients.
inline FdReport gradient_check(const DrugDiseaseGraph& g, GnnConfig cfg, std::uint64_t seed,
                               int batch_size = 24) {
    const MpGraph mp = build_mp_graph(g);
    cfg.seed = seed;
    GnnParameters params = init_gnn_params(cfg, g.features_drug.cols, g.features_dis.cols);
    const auto batch = random_batch(g, batch_size, seed + 1);
    GnnParameters grads = zeros_like(params);
    loss_and_gradients(mp, cfg, params, batch, grads);

    auto prefs = tensor_refs(params);
    auto grefs = tensor_refs(grads);
    const double h = 1e-4;
    FdReport rep;
    for (std::size_t t = 0; t < prefs.size(); ++t) {
        for (std::size_t i = 0; i < prefs[t].size(); ++i) {
            const double orig = prefs[t].data[i];
            prefs[t].data[i] = orig + h;
            const double up = gnn_loss(mp, cfg, params, batch);
            prefs[t].data[i] = orig - h;
            const double dn = gnn_loss(mp, cfg, params, batch);
            prefs[t].data[i] = orig;
            const double fd = (up - dn) / (2 * h);
            const double an = grefs[t].data[i];
            const double scale = std::max(std::abs(fd), std::abs(an));
            if (scale < 1e-8) continue;
            const double rel = std::abs(fd - an) / scale;
            if (rel > rep.max_rel) {
                rep.max_rel = rel;
                rep.worst = prefs[t].name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return rep;
}

/// O(n^2) pairwise count: wins plus half-ties over positive-negative pairs.
inline double auroc_bruteforce(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0.0, total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j]) continue;
            total += 1.0;
            if (s[i] > s[j])
                wins += 1.0;
            else if (s[i] == s[j])
                wins += 0.5;
        }
    }
    return wins / total;
}

/// Precision-recall integration with O(n^2) recounting at every rank.
inline double auprc_bruteforce(const std::vector<double>& s, const std::vector<int>& y) {
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    std::size_t n_pos = 0;
    for (int v : y) n_pos += v ? 1 : 0;
    double ap = 0.0, recall_prev = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        std::size_t tp = 0;
        for (std::size_t m = 0; m <= k; ++m) tp += y[order[m]] ? 1 : 0;
        const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
    }
    return ap;
}

}  // namespace testsupport
