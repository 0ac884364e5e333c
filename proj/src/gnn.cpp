#include "adrgraph/gnn.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace adrgraph {

const char* gnn_variant_name(GnnVariant v) {
    switch (v) {
        case GnnVariant::gcn: return "gcn";
        case GnnVariant::gat: return "gat";
        default: return "adrgcn";
    }
}

GnnVariant gnn_variant_from_string(const std::string& s) {
    if (s == "gcn") return GnnVariant::gcn;
    if (s == "gat") return GnnVariant::gat;
    if (s == "adrgcn") return GnnVariant::adrgcn;
    throw ValidationError("unknown gnn variant: '" + s + "'");
}

void GnnConfig::validate() const {
    if (layers < 1) throw ValidationError("gnn: layers must be >= 1");
    if (hidden_dim < 1) throw ValidationError("gnn: hidden_dim must be >= 1");
    if (self_loop_weight < 0) throw ValidationError("gnn: self_loop_weight must be >= 0");
    if (variant == GnnVariant::gat) {
        if (static_cast<int>(gat_heads.size()) != layers)
            throw ValidationError("gnn: gat_heads length must equal layers");
        for (int l = 0; l < layers; ++l) {
            if (gat_heads[static_cast<std::size_t>(l)] < 1)
                throw ValidationError("gnn: gat head counts must be >= 1");
            // heads are concatenated on every layer but the last
            if (l + 1 < layers && hidden_dim % gat_heads[static_cast<std::size_t>(l)] != 0)
                throw ValidationError("gnn: hidden_dim must be divisible by the head count");
        }
    }
}

MpGraph build_mp_graph(const DrugDiseaseGraph& graph) {
    MpGraph g;
    g.n_drug = graph.n_drug;
    g.n_dis = graph.n_dis;
    g.n = graph.n_drug + graph.n_dis;
    g.adj.assign(static_cast<std::size_t>(g.n), {});
    auto push = [&](int a, int b, double w, int part) {
        g.adj[static_cast<std::size_t>(a)].push_back(MpNeighbor{b, w, part});
        g.adj[static_cast<std::size_t>(b)].push_back(MpNeighbor{a, w, part});
    };
    for (const auto& e : graph.partition(EdgeType::drug_drug).edges) push(e.i, e.j, e.w, 0);
    for (const auto& e : graph.partition(EdgeType::dis_dis).edges)
        push(g.n_drug + e.i, g.n_drug + e.j, e.w, 1);
    for (const auto& e : graph.partition(EdgeType::drug_dis).edges)
        push(e.i, g.n_drug + e.j, e.w, 2);

    g.degree.resize(static_cast<std::size_t>(g.n));
    for (auto& pd : g.part_degree) pd.assign(static_cast<std::size_t>(g.n), 0);
    for (int i = 0; i < g.n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        g.degree[ui] = static_cast<int>(g.adj[ui].size()) + 1;
        for (const auto& nb : g.adj[ui]) g.part_degree[static_cast<std::size_t>(nb.part)][ui]++;
        g.part_degree[static_cast<std::size_t>(g.own_partition(i))][ui]++;  // self-loop
    }
    g.feat_drug = &graph.features_drug;
    g.feat_dis = &graph.features_dis;
    return g;
}

double gcn_alpha(double w_ij, int d_i, int d_j) {
    return w_ij / std::sqrt(static_cast<double>(d_i) * static_cast<double>(d_j));
}

namespace {

constexpr double kLeakySlope = 0.2;

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void fill_glorot(Matrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double lim = glorot_limit(fan_in, fan_out);
    for (double& v : m.data) v = rng.uniform(-lim, lim);
}

int head_dim_of(const GnnConfig& c, int layer) {
    const int heads = c.gat_heads[static_cast<std::size_t>(layer)];
    return layer + 1 < c.layers ? c.hidden_dim / heads : c.hidden_dim;
}

// C = A (n x k) times B^T where B is (m x k); result n x m
Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.rows);
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double* ar = a.row(r);
        double* cr = c.row(r);
        for (std::size_t o = 0; o < b.rows; ++o) cr[o] = dot(ar, b.row(o), a.cols);
    }
    return c;
}

// W += dY^T Z, with dY (n x out) and Z (n x in); W is (out x in)
void accumulate_wt_grad(Matrix& w, const Matrix& dy, const Matrix& z) {
    for (std::size_t r = 0; r < dy.rows; ++r) {
        const double* dyr = dy.row(r);
        const double* zr = z.row(r);
        for (std::size_t o = 0; o < w.rows; ++o) {
            const double coef = dyr[o];
            if (coef == 0.0) continue;
            double* wr = w.row(o);
            for (std::size_t i = 0; i < w.cols; ++i) wr[i] += coef * zr[i];
        }
    }
}

// dZ += dY W, with dY (n x out), W (out x in); dZ is (n x in)
void accumulate_z_grad(Matrix& dz, const Matrix& dy, const Matrix& w) {
    for (std::size_t r = 0; r < dy.rows; ++r) {
        const double* dyr = dy.row(r);
        double* dzr = dz.row(r);
        for (std::size_t o = 0; o < w.rows; ++o) {
            const double coef = dyr[o];
            if (coef == 0.0) continue;
            const double* wr = w.row(o);
            for (std::size_t i = 0; i < w.cols; ++i) dzr[i] += coef * wr[i];
        }
    }
}

struct LayerForward {
    Matrix input;    // n x in_dim
    Matrix preact;   // n x out_dim
    // gat internals
    std::vector<Matrix> head_y;                            // per head: n x head_dim
    std::vector<std::vector<std::vector<double>>> alpha;   // [head][node][k], self last
    std::vector<std::vector<std::vector<double>>> attn_u;  // pre-LeakyReLU scores, same layout
};

struct ForwardState {
    Matrix proj_pre_drug;
    Matrix proj_pre_dis;
    std::vector<LayerForward> layers;
    Matrix z_final;
};

void gcn_layer_forward(const MpGraph& g, const GnnConfig& c, const Matrix& w, const Matrix& z,
                       Matrix& preact) {
    const Matrix y = matmul_nt(z, w);
    for (int i = 0; i < g.n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        double* s = preact.row(ui);
        for (const auto& nb : g.adj[ui]) {
            const double a = gcn_alpha(nb.w, g.degree[ui], g.degree[static_cast<std::size_t>(nb.j)]);
            const double* yj = y.row(static_cast<std::size_t>(nb.j));
            for (std::size_t d = 0; d < y.cols; ++d) s[d] += a * yj[d];
        }
        const double a_self = c.self_loop_weight / static_cast<double>(g.degree[ui]);
        const double* yi = y.row(ui);
        for (std::size_t d = 0; d < y.cols; ++d) s[d] += a_self * yi[d];
    }
}

void gcn_layer_backward(const MpGraph& g, const GnnConfig& c, const Matrix& w, const Matrix& z,
                        const Matrix& ds, Matrix& dw, Matrix& dz) {
    Matrix dy(ds.rows, ds.cols);
    for (int i = 0; i < g.n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const double* dsi = ds.row(ui);
        for (const auto& nb : g.adj[ui]) {
            const double a = gcn_alpha(nb.w, g.degree[ui], g.degree[static_cast<std::size_t>(nb.j)]);
            double* dyj = dy.row(static_cast<std::size_t>(nb.j));
            for (std::size_t d = 0; d < ds.cols; ++d) dyj[d] += a * dsi[d];
        }
        const double a_self = c.self_loop_weight / static_cast<double>(g.degree[ui]);
        double* dyi = dy.row(ui);
        for (std::size_t d = 0; d < ds.cols; ++d) dyi[d] += a_self * dsi[d];
    }
    accumulate_wt_grad(dw, dy, z);
    accumulate_z_grad(dz, dy, w);
}

double adr_alpha(const MpGraph& g, int i, const MpNeighbor& nb) {
    const auto& pd = g.part_degree[static_cast<std::size_t>(nb.part)];
    return nb.w / std::sqrt(static_cast<double>(pd[static_cast<std::size_t>(i)]) *
                            static_cast<double>(pd[static_cast<std::size_t>(nb.j)]));
}

void adr_layer_forward(const MpGraph& g, const GnnConfig& c, const std::array<Matrix, 3>& w,
                       const Matrix& z, Matrix& preact) {
    std::array<Matrix, 3> y;
    for (int p = 0; p < 3; ++p) y[static_cast<std::size_t>(p)] = matmul_nt(z, w[static_cast<std::size_t>(p)]);
    for (int i = 0; i < g.n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        double* s = preact.row(ui);
        for (const auto& nb : g.adj[ui]) {
            const double a = adr_alpha(g, i, nb);
            const double* yj = y[static_cast<std::size_t>(nb.part)].row(static_cast<std::size_t>(nb.j));
            for (std::size_t d = 0; d < preact.cols; ++d) s[d] += a * yj[d];
        }
        const int own = g.own_partition(i);
        const double a_self =
            c.self_loop_weight / static_cast<double>(g.part_degree[static_cast<std::size_t>(own)][ui]);
        const double* yi = y[static_cast<std::size_t>(own)].row(ui);
        for (std::size_t d = 0; d < preact.cols; ++d) s[d] += a_self * yi[d];
    }
}

void adr_layer_backward(const MpGraph& g, const GnnConfig& c, const std::array<Matrix, 3>& w,
                        const Matrix& z, const Matrix& ds, std::array<Matrix, 3>& dw, Matrix& dz) {
    std::array<Matrix, 3> dy;
    for (auto& m : dy) m = Matrix(ds.rows, ds.cols);
    for (int i = 0; i < g.n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const double* dsi = ds.row(ui);
        for (const auto& nb : g.adj[ui]) {
            const double a = adr_alpha(g, i, nb);
            double* dyj = dy[static_cast<std::size_t>(nb.part)].row(static_cast<std::size_t>(nb.j));
            for (std::size_t d = 0; d < ds.cols; ++d) dyj[d] += a * dsi[d];
        }
        const int own = g.own_partition(i);
        const double a_self =
            c.self_loop_weight / static_cast<double>(g.part_degree[static_cast<std::size_t>(own)][ui]);
        double* dyi = dy[static_cast<std::size_t>(own)].row(ui);
        for (std::size_t d = 0; d < ds.cols; ++d) dyi[d] += a_self * dsi[d];
    }
    for (int p = 0; p < 3; ++p) {
        accumulate_wt_grad(dw[static_cast<std::size_t>(p)], dy[static_cast<std::size_t>(p)], z);
        accumulate_z_grad(dz, dy[static_cast<std::size_t>(p)], w[static_cast<std::size_t>(p)]);
    }
}

std::vector<int> neighbor_ids_with_self(const MpGraph& g, int i) {
    std::vector<int> ids;
    ids.reserve(g.adj[static_cast<std::size_t>(i)].size() + 1);
    for (const auto& nb : g.adj[static_cast<std::size_t>(i)]) ids.push_back(nb.j);
    ids.push_back(i);
    return ids;
}

void gat_layer_forward(const MpGraph& g, const GnnConfig& c, int layer,
                       const std::vector<GatHeadParams>& heads, const Matrix& z, LayerForward& fwd) {
    const int n_heads = static_cast<int>(heads.size());
    const bool concat = layer + 1 < c.layers;
    const std::size_t head_dim = static_cast<std::size_t>(head_dim_of(c, layer));
    fwd.head_y.resize(static_cast<std::size_t>(n_heads));
    fwd.alpha.assign(static_cast<std::size_t>(n_heads), {});
    fwd.attn_u.assign(static_cast<std::size_t>(n_heads), {});
    for (int h = 0; h < n_heads; ++h) {
        const auto uh = static_cast<std::size_t>(h);
        const GatHeadParams& head = heads[uh];
        fwd.head_y[uh] = matmul_nt(z, head.w);
        fwd.alpha[uh].resize(static_cast<std::size_t>(g.n));
        fwd.attn_u[uh].resize(static_cast<std::size_t>(g.n));
        for (int i = 0; i < g.n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const std::vector<int> nbrs = neighbor_ids_with_self(g, i);
            // raw scores kept for the LeakyReLU derivative in backward
            std::vector<double>& u = fwd.attn_u[uh][ui];
            u.resize(nbrs.size());
            const double* zi = z.row(ui);
            for (std::size_t k = 0; k < nbrs.size(); ++k) {
                const double* zk = z.row(static_cast<std::size_t>(nbrs[k]));
                double v = head.attn_bias;
                for (std::size_t d = 0; d < z.cols; ++d) v += head.attn[d] * zi[d];
                for (std::size_t d = 0; d < z.cols; ++d) v += head.attn[z.cols + d] * zk[d];
                u[k] = v;
            }
            std::vector<double>& a = fwd.alpha[uh][ui];
            a.resize(nbrs.size());
            double mx = -1e300;
            for (std::size_t k = 0; k < u.size(); ++k) {
                a[k] = u[k] > 0 ? u[k] : kLeakySlope * u[k];
                mx = std::max(mx, a[k]);
            }
            double total = 0.0;
            for (double& v : a) {
                v = std::exp(v - mx);
                total += v;
            }
            for (double& v : a) v /= total;
            // aggregate this head's output
            double* out = fwd.preact.row(ui);
            const std::size_t off = concat ? uh * head_dim : 0;
            const double scale = concat ? 1.0 : 1.0 / static_cast<double>(n_heads);
            for (std::size_t k = 0; k < nbrs.size(); ++k) {
                const double* yk = fwd.head_y[uh].row(static_cast<std::size_t>(nbrs[k]));
                const double coef = scale * a[k];
                for (std::size_t d = 0; d < head_dim; ++d) out[off + d] += coef * yk[d];
            }
        }
    }
}

void gat_layer_backward(const MpGraph& g, const GnnConfig& c, int layer,
                        const std::vector<GatHeadParams>& heads, const LayerForward& fwd,
                        const Matrix& ds, std::vector<GatHeadParams>& dheads, Matrix& dz) {
    const Matrix& z = fwd.input;
    const int n_heads = static_cast<int>(heads.size());
    const bool concat = layer + 1 < c.layers;
    const std::size_t head_dim = static_cast<std::size_t>(head_dim_of(c, layer));
    for (int h = 0; h < n_heads; ++h) {
        const auto uh = static_cast<std::size_t>(h);
        const GatHeadParams& head = heads[uh];
        GatHeadParams& dhead = dheads[uh];
        Matrix dy(z.rows, head_dim);
        const std::size_t off = concat ? uh * head_dim : 0;
        const double scale = concat ? 1.0 : 1.0 / static_cast<double>(n_heads);
        for (int i = 0; i < g.n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const std::vector<int> nbrs = neighbor_ids_with_self(g, i);
            const std::vector<double>& a = fwd.alpha[uh][ui];
            const std::vector<double>& u = fwd.attn_u[uh][ui];
            const double* dsi = ds.row(ui);

            // d out_h_i comes from the combine step (slice or mean)
            std::vector<double> dout(head_dim);
            for (std::size_t d = 0; d < head_dim; ++d) dout[d] = scale * dsi[off + d];

            std::vector<double> dalpha(nbrs.size());
            for (std::size_t k = 0; k < nbrs.size(); ++k) {
                const double* yk = fwd.head_y[uh].row(static_cast<std::size_t>(nbrs[k]));
                dalpha[k] = dot(dout.data(), yk, head_dim);
                double* dyk = dy.row(static_cast<std::size_t>(nbrs[k]));
                for (std::size_t d = 0; d < head_dim; ++d) dyk[d] += a[k] * dout[d];
            }
            double inner = 0.0;
            for (std::size_t k = 0; k < nbrs.size(); ++k) inner += a[k] * dalpha[k];
            const double* zi = z.row(ui);
            double* dzi = dz.row(ui);
            for (std::size_t k = 0; k < nbrs.size(); ++k) {
                const double de = a[k] * (dalpha[k] - inner);
                const double du = de * (u[k] > 0 ? 1.0 : kLeakySlope);
                if (du == 0.0) continue;
                dhead.attn_bias += du;
                const double* zk = z.row(static_cast<std::size_t>(nbrs[k]));
                double* dzk = dz.row(static_cast<std::size_t>(nbrs[k]));
                for (std::size_t d = 0; d < z.cols; ++d) {
                    dhead.attn[d] += du * zi[d];
                    dhead.attn[z.cols + d] += du * zk[d];
                    dzi[d] += du * head.attn[d];
                    dzk[d] += du * head.attn[z.cols + d];
                }
            }
        }
        accumulate_wt_grad(dhead.w, dy, z);
        accumulate_z_grad(dz, dy, head.w);
    }
}

// projection of one node kind: rows [row_begin, row_end) of z0 from features
void project_forward(const Matrix& feats, const Matrix& w, const std::vector<double>& b,
                     std::size_t row_begin, Matrix& pre, Matrix& z0) {
    for (std::size_t r = 0; r < feats.rows; ++r) {
        const double* x = feats.row(r);
        double* p = pre.row(r);
        double* z = z0.row(row_begin + r);
        for (std::size_t o = 0; o < w.rows; ++o) {
            const double v = dot(w.row(o), x, w.cols) + b[o];
            p[o] = v;
            z[o] = v > 0 ? v : 0.0;
        }
    }
}

void project_backward(const Matrix& feats, const Matrix& pre, const Matrix& dz0,
                      std::size_t row_begin, Matrix& dw, std::vector<double>& db) {
    for (std::size_t r = 0; r < feats.rows; ++r) {
        const double* x = feats.row(r);
        const double* p = pre.row(r);
        const double* dz = dz0.row(row_begin + r);
        for (std::size_t o = 0; o < dw.rows; ++o) {
            if (p[o] <= 0) continue;
            const double g = dz[o];
            if (g == 0.0) continue;
            db[o] += g;
            double* wr = dw.row(o);
            for (std::size_t i = 0; i < dw.cols; ++i) wr[i] += g * x[i];
        }
    }
}

ForwardState run_forward(const MpGraph& g, const GnnConfig& c, const GnnParameters& p) {
    const auto n = static_cast<std::size_t>(g.n);
    const auto hidden = static_cast<std::size_t>(c.hidden_dim);
    ForwardState st;
    st.proj_pre_drug = Matrix(g.feat_drug->rows, hidden);
    st.proj_pre_dis = Matrix(g.feat_dis->rows, hidden);
    Matrix z0(n, hidden);
    project_forward(*g.feat_drug, p.proj_drug_w, p.proj_drug_b, 0, st.proj_pre_drug, z0);
    project_forward(*g.feat_dis, p.proj_dis_w, p.proj_dis_b, static_cast<std::size_t>(g.n_drug),
                    st.proj_pre_dis, z0);

    Matrix z = std::move(z0);
    st.layers.resize(static_cast<std::size_t>(c.layers));
    for (int l = 0; l < c.layers; ++l) {
        LayerForward& fwd = st.layers[static_cast<std::size_t>(l)];
        fwd.input = std::move(z);
        fwd.preact = Matrix(n, hidden);
        const GnnLayerParams& lp = p.layers[static_cast<std::size_t>(l)];
        switch (c.variant) {
            case GnnVariant::gcn: gcn_layer_forward(g, c, lp.w, fwd.input, fwd.preact); break;
            case GnnVariant::adrgcn: adr_layer_forward(g, c, lp.w_part, fwd.input, fwd.preact); break;
            case GnnVariant::gat: gat_layer_forward(g, c, l, lp.heads, fwd.input, fwd); break;
        }
        const bool relu = l + 1 < c.layers || c.relu_last;
        z = Matrix(n, hidden);
        for (std::size_t idx = 0; idx < z.data.size(); ++idx) {
            const double v = fwd.preact.data[idx];
            z.data[idx] = relu && v < 0 ? 0.0 : v;
        }
    }
    st.z_final = std::move(z);
    return st;
}

void run_backward(const MpGraph& g, const GnnConfig& c, const GnnParameters& p,
                  const ForwardState& st, Matrix dz, GnnParameters& grads) {
    for (int l = c.layers - 1; l >= 0; --l) {
        const LayerForward& fwd = st.layers[static_cast<std::size_t>(l)];
        const bool relu = l + 1 < c.layers || c.relu_last;
        Matrix ds = std::move(dz);
        if (relu)
            for (std::size_t idx = 0; idx < ds.data.size(); ++idx)
                if (fwd.preact.data[idx] <= 0) ds.data[idx] = 0.0;
        dz = Matrix(ds.rows, fwd.input.cols);
        const GnnLayerParams& lp = p.layers[static_cast<std::size_t>(l)];
        GnnLayerParams& lg = grads.layers[static_cast<std::size_t>(l)];
        switch (c.variant) {
            case GnnVariant::gcn:
                gcn_layer_backward(g, c, lp.w, fwd.input, ds, lg.w, dz);
                break;
            case GnnVariant::adrgcn:
                adr_layer_backward(g, c, lp.w_part, fwd.input, ds, lg.w_part, dz);
                break;
            case GnnVariant::gat:
                gat_layer_backward(g, c, l, lp.heads, fwd, ds, lg.heads, dz);
                break;
        }
    }
    project_backward(*g.feat_drug, st.proj_pre_drug, dz, 0, grads.proj_drug_w, grads.proj_drug_b);
    project_backward(*g.feat_dis, st.proj_pre_dis, dz, static_cast<std::size_t>(g.n_drug),
                     grads.proj_dis_w, grads.proj_dis_b);
}

constexpr double kProbClamp = 1e-12;

}  // namespace

GnnParameters init_gnn_params(const GnnConfig& config, std::size_t in_drug, std::size_t in_dis) {
    config.validate();
    Rng rng(config.seed);
    const auto hidden = static_cast<std::size_t>(config.hidden_dim);
    GnnParameters p;
    p.variant = config.variant;
    p.proj_drug_w = Matrix(hidden, in_drug);
    fill_glorot(p.proj_drug_w, in_drug, hidden, rng);
    p.proj_drug_b.assign(hidden, 0.0);
    p.proj_dis_w = Matrix(hidden, in_dis);
    fill_glorot(p.proj_dis_w, in_dis, hidden, rng);
    p.proj_dis_b.assign(hidden, 0.0);
    p.layers.resize(static_cast<std::size_t>(config.layers));
    for (int l = 0; l < config.layers; ++l) {
        GnnLayerParams& lp = p.layers[static_cast<std::size_t>(l)];
        switch (config.variant) {
            case GnnVariant::gcn:
                lp.w = Matrix(hidden, hidden);
                fill_glorot(lp.w, hidden, hidden, rng);
                break;
            case GnnVariant::adrgcn:
                for (auto& w : lp.w_part) {
                    w = Matrix(hidden, hidden);
                    fill_glorot(w, hidden, hidden, rng);
                }
                break;
            case GnnVariant::gat: {
                const auto n_heads = static_cast<std::size_t>(config.gat_heads[static_cast<std::size_t>(l)]);
                const auto hd = static_cast<std::size_t>(head_dim_of(config, l));
                lp.heads.resize(n_heads);
                for (auto& head : lp.heads) {
                    head.w = Matrix(hd, hidden);
                    fill_glorot(head.w, hidden, hd, rng);
                    head.attn.resize(2 * hidden);
                    const double lim = glorot_limit(2 * hidden, 1);
                    for (double& v : head.attn) v = rng.uniform(-lim, lim);
                    head.attn_bias = 0.0;
                }
                break;
            }
        }
    }
    p.decoder_w = Matrix(hidden, hidden);
    fill_glorot(p.decoder_w, hidden, hidden, rng);
    p.decoder_b = 0.0;
    return p;
}

GnnParameters zeros_like(const GnnParameters& params) {
    GnnParameters z = params;
    auto refs = tensor_refs(z);
    for (auto& r : refs) std::fill(r.data, r.data + r.size(), 0.0);
    return z;
}

std::vector<TensorRef> tensor_refs(GnnParameters& p) {
    std::vector<TensorRef> refs;
    auto add_mat = [&](const std::string& name, Matrix& m) {
        refs.push_back(TensorRef{name, m.data.data(), m.rows, m.cols});
    };
    auto add_vec = [&](const std::string& name, std::vector<double>& v) {
        refs.push_back(TensorRef{name, v.data(), 1, v.size()});
    };
    add_mat("proj_drug_w", p.proj_drug_w);
    add_vec("proj_drug_b", p.proj_drug_b);
    add_mat("proj_dis_w", p.proj_dis_w);
    add_vec("proj_dis_b", p.proj_dis_b);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const std::string prefix = "layer" + std::to_string(l) + ".";
        GnnLayerParams& lp = p.layers[l];
        switch (p.variant) {
            case GnnVariant::gcn:
                add_mat(prefix + "w", lp.w);
                break;
            case GnnVariant::adrgcn:
                add_mat(prefix + "w_drug_drug", lp.w_part[0]);
                add_mat(prefix + "w_dis_dis", lp.w_part[1]);
                add_mat(prefix + "w_drug_dis", lp.w_part[2]);
                break;
            case GnnVariant::gat:
                for (std::size_t h = 0; h < lp.heads.size(); ++h) {
                    const std::string hp = prefix + "head" + std::to_string(h) + ".";
                    add_mat(hp + "w", lp.heads[h].w);
                    add_vec(hp + "attn", lp.heads[h].attn);
                    refs.push_back(TensorRef{hp + "attn_bias", &lp.heads[h].attn_bias, 1, 1});
                }
                break;
        }
    }
    add_mat("decoder_w", p.decoder_w);
    refs.push_back(TensorRef{"decoder_b", &p.decoder_b, 1, 1});
    return refs;
}

std::vector<double> gat_alpha_row(const Matrix& z, int i, const std::vector<int>& neighbors,
                                  const GatHeadParams& head) {
    if (neighbors.empty()) throw ValidationError("gat_alpha_row: empty neighbor set");
    std::vector<double> e(neighbors.size());
    const double* zi = z.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < neighbors.size(); ++k) {
        const double* zk = z.row(static_cast<std::size_t>(neighbors[k]));
        double v = head.attn_bias;
        for (std::size_t d = 0; d < z.cols; ++d) v += head.attn[d] * zi[d];
        for (std::size_t d = 0; d < z.cols; ++d) v += head.attn[z.cols + d] * zk[d];
        e[k] = v > 0 ? v : kLeakySlope * v;
    }
    const double mx = *std::max_element(e.begin(), e.end());
    double total = 0.0;
    for (double& v : e) {
        v = std::exp(v - mx);
        total += v;
    }
    for (double& v : e) v /= total;
    return e;
}

namespace {

// clamp into (0,1) while letting NaN through so divergence stays visible
double clamp_prob(double p) {
    if (p < kProbClamp) return kProbClamp;
    if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
    return p;
}

}  // namespace

double bilinear_score(const double* z_drug, const double* z_dis, const Matrix& w, double b) {
    double logit = b;
    for (std::size_t r = 0; r < w.rows; ++r) logit += z_drug[r] * dot(w.row(r), z_dis, w.cols);
    return clamp_prob(sigmoid(logit));
}

Matrix gnn_forward(const MpGraph& graph, const GnnConfig& config, const GnnParameters& params,
                   AttentionSnapshot* attention) {
    config.validate();
    ForwardState st = run_forward(graph, config, params);
    if (attention) {
        attention->clear();
        if (config.variant == GnnVariant::gat)
            for (const auto& layer : st.layers) attention->push_back(layer.alpha);
    }
    return std::move(st.z_final);
}

namespace {

double batch_loss(const Matrix& z, const MpGraph& g, const GnnParameters& p,
                  const std::vector<LabeledPair>& batch, std::vector<double>* probs_out) {
    if (batch.empty()) throw ValidationError("gnn loss: empty batch");
    double loss = 0.0;
    for (const auto& pair : batch) {
        const double* zd = z.row(static_cast<std::size_t>(pair.drug));
        const double* zs = z.row(static_cast<std::size_t>(g.n_drug + pair.dis));
        const double prob = bilinear_score(zd, zs, p.decoder_w, p.decoder_b);
        if (probs_out) probs_out->push_back(prob);
        loss += pair.label ? -std::log(prob) : -std::log(1.0 - prob);
    }
    return loss / static_cast<double>(batch.size());
}

}  // namespace

double gnn_loss(const MpGraph& graph, const GnnConfig& config, const GnnParameters& params,
                const std::vector<LabeledPair>& batch) {
    const Matrix z = gnn_forward(graph, config, params);
    return batch_loss(z, graph, params, batch, nullptr);
}

double loss_and_gradients(const MpGraph& graph, const GnnConfig& config, const GnnParameters& params,
                          const std::vector<LabeledPair>& batch, GnnParameters& grads) {
    config.validate();
    if (batch.empty()) throw ValidationError("gnn loss: empty batch");
    ForwardState st = run_forward(graph, config, params);
    const Matrix& z = st.z_final;

    Matrix dz(z.rows, z.cols);
    double loss = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (const auto& pair : batch) {
        const auto di = static_cast<std::size_t>(pair.drug);
        const auto si = static_cast<std::size_t>(graph.n_drug + pair.dis);
        const double* zd = z.row(di);
        const double* zs = z.row(si);
        double logit = params.decoder_b;
        for (std::size_t r = 0; r < z.cols; ++r)
            logit += zd[r] * dot(params.decoder_w.row(r), zs, z.cols);
        const double raw = sigmoid(logit);
        const double prob = clamp_prob(raw);
        loss += pair.label ? -std::log(prob) : -std::log(1.0 - prob);
        // gradient of the clamped loss: zero once the clamp is active
        const bool clamped = raw <= kProbClamp || raw >= 1.0 - kProbClamp;
        const double dlogit = clamped ? 0.0 : (raw - static_cast<double>(pair.label)) * inv_batch;
        if (dlogit == 0.0) continue;
        grads.decoder_b += dlogit;
        double* dzd = dz.row(di);
        double* dzs = dz.row(si);
        for (std::size_t r = 0; r < z.cols; ++r) {
            const double* wr = params.decoder_w.row(r);
            double* gwr = grads.decoder_w.row(r);
            const double zdr = zd[r];
            for (std::size_t cidx = 0; cidx < z.cols; ++cidx) {
                gwr[cidx] += dlogit * zdr * zs[cidx];
                dzd[r] += dlogit * wr[cidx] * zs[cidx];
                dzs[cidx] += dlogit * zdr * wr[cidx];
            }
        }
    }
    run_backward(graph, config, params, st, std::move(dz), grads);
    return loss * inv_batch;
}

std::vector<double> score_pairs(const MpGraph& graph, const GnnConfig& config,
                                const GnnParameters& params, const std::vector<LabeledPair>& pairs) {
    const Matrix z = gnn_forward(graph, config, params);
    std::vector<double> probs;
    probs.reserve(pairs.size());
    for (const auto& pair : pairs)
        probs.push_back(bilinear_score(z.row(static_cast<std::size_t>(pair.drug)),
                                       z.row(static_cast<std::size_t>(graph.n_drug + pair.dis)),
                                       params.decoder_w, params.decoder_b));
    return probs;
}

void save_gnn_checkpoint(const std::string& path, const GnnConfig& config, std::size_t in_drug,
                         std::size_t in_dis, const GnnParameters& params) {
    nlohmann::json meta;
    meta["kind"] = "gnn";
    meta["variant"] = gnn_variant_name(config.variant);
    meta["layers"] = config.layers;
    meta["hidden_dim"] = config.hidden_dim;
    meta["gat_heads"] = config.gat_heads;
    meta["self_loop_weight"] = config.self_loop_weight;
    meta["relu_last"] = config.relu_last;
    meta["seed"] = config.seed;
    meta["in_drug"] = in_drug;
    meta["in_dis"] = in_dis;
    auto refs = tensor_refs(const_cast<GnnParameters&>(params));
    save_tensor_file(path, meta.dump(), refs);
}

GnnCheckpoint load_gnn_checkpoint(const std::string& path) {
    LoadedTensorFile file = load_tensor_file(path);
    const auto meta = nlohmann::json::parse(file.meta_json);
    if (meta.at("kind").get<std::string>() != "gnn")
        throw ValidationError("checkpoint is not a gnn model: " + path);
    GnnCheckpoint ck;
    ck.config.variant = gnn_variant_from_string(meta.at("variant").get<std::string>());
    ck.config.layers = meta.at("layers").get<int>();
    ck.config.hidden_dim = meta.at("hidden_dim").get<int>();
    ck.config.gat_heads = meta.at("gat_heads").get<std::vector<int>>();
    ck.config.self_loop_weight = meta.at("self_loop_weight").get<double>();
    ck.config.relu_last = meta.at("relu_last").get<bool>();
    ck.config.seed = meta.at("seed").get<std::uint64_t>();
    ck.in_drug = meta.at("in_drug").get<std::size_t>();
    ck.in_dis = meta.at("in_dis").get<std::size_t>();
    ck.params = init_gnn_params(ck.config, ck.in_drug, ck.in_dis);
    auto refs = tensor_refs(ck.params);
    if (refs.size() != file.tensors.size())
        throw ValidationError("checkpoint tensor count mismatch: " + path);
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const auto& [name, m] = file.tensors[i];
        if (name != refs[i].name || m.rows != refs[i].rows || m.cols != refs[i].cols)
            throw ValidationError("checkpoint tensor '" + name + "' does not match model shape in " + path);
        std::copy(m.data.begin(), m.data.end(), refs[i].data);
    }
    return ck;
}

}  // namespace adrgraph
