#include "adrgraph/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "adrgraph/claims.hpp"
#include "adrgraph/codes.hpp"
#include "adrgraph/gnn.hpp"
#include "adrgraph/labels.hpp"
#include "adrgraph/metrics.hpp"

namespace adrgraph {

const char* kVersion = "0.1.0";

const std::vector<std::string> kStageNames = {"synth", "ingest", "embed",    "graph", "train",
                                              "eval",  "discover", "report", "all"};

namespace {

constexpr std::array<double, 3> kSplitRatios = {0.8, 0.1, 0.1};

std::string profile_name(SparsityProfile p) { return p == SparsityProfile::low ? "low" : "high"; }

std::string fmt_seed_file(const std::string& stem, const std::string& model, const std::string& profile,
                          std::uint64_t seed, const std::string& ext) {
    return stem + "_" + model + "_" + profile + "_seed" + std::to_string(seed) + ext;
}

// ---- run manifest ----------------------------------------------------------

class RunManifest {
public:
    static RunManifest open(const std::string& dir) {
        RunManifest m;
        m.dir_ = dir;
        const std::string path = dir + "/manifest.json";
        if (file_exists(path)) m.data_ = nlohmann::json::parse(read_file(path));
        if (!m.data_.contains("files")) m.data_["files"] = nlohmann::json::object();
        if (!m.data_.contains("stages")) m.data_["stages"] = nlohmann::json::object();
        m.data_["version"] = kVersion;
        return m;
    }

    // an input artifact must exist and still hash to what its producer recorded
    void require(const std::string& rel, const std::string& path, const std::string& producer) const {
        if (!file_exists(path))
            throw ValidationError("missing upstream artifact '" + rel + "' (run the " + producer +
                                  " stage first)");
        if (data_["files"].contains(rel)) {
            const std::string recorded = data_["files"][rel].get<std::string>();
            if (recorded != hash_file(path))
                throw ValidationError("artifact '" + rel + "' does not match the manifest hash; rerun " +
                                      producer);
        }
    }

    void record_file(const std::string& rel, const std::string& path) {
        data_["files"][rel] = hash_file(path);
    }

    void record_stage(const std::string& stage, const PipelineConfig& config) {
        data_["stages"][stage] = {{"config_hash", hash_string(config_json(config))},
                                  {"seed", config.seed}};
    }

    void save() { atomic_write(dir_ + "/manifest.json", data_.dump(2) + "\n"); }

private:
    std::string dir_;
    nlohmann::json data_;
};

// ---- shared artifact io ----------------------------------------------------

void save_vocab(const CodeVocabulary& vocab, const std::string& path) {
    std::ostringstream out;
    for (std::size_t i = 0; i < vocab.size(); ++i) out << i << '\t' << vocab.id_to_code[i] << '\n';
    atomic_write(path, out.str());
}

CodeVocabulary load_vocab(const std::string& path, CodeKind kind) {
    std::ifstream in(path);
    if (!in) throw ValidationError("unreadable vocabulary file: " + path);
    CodeVocabulary v;
    v.kind = kind;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ValidationError("malformed vocabulary row in " + path);
        const std::string code = line.substr(tab + 1);
        v.code_to_id[code] = static_cast<int>(v.id_to_code.size());
        v.id_to_code.push_back(code);
    }
    return v;
}

void save_sequences(const std::vector<CodeSequence>& seqs, const std::string& path) {
    std::ostringstream out;
    for (const auto& s : seqs) {
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            if (i) out << ' ';
            out << s.tokens[i];
        }
        out << '\n';
    }
    atomic_write(path, out.str());
}

std::vector<CodeSequence> load_sequences(const std::string& path, CodeKind kind) {
    std::ifstream in(path);
    if (!in) throw ValidationError("unreadable sequence file: " + path);
    std::vector<CodeSequence> seqs;
    std::string line;
    while (std::getline(in, line)) {
        CodeSequence s{kind, {}};
        std::istringstream row(line);
        int tok;
        while (row >> tok) s.tokens.push_back(tok);
        seqs.push_back(std::move(s));
    }
    return seqs;
}

std::string graph_dir(const PipelineConfig& cfg) {
    return cfg.out_dir + "/graph_" + profile_name(cfg.graph.sparsity_profile);
}

// ---- stages -----------------------------------------------------------------

void stage_synth(const PipelineConfig& cfg, RunManifest& manifest) {
    SynthConfig sc = cfg.synth;
    sc.seed = cfg.seed;
    generate_corpus(sc, cfg.out_dir + "/claims.csv", cfg.out_dir + "/labels.tsv",
                    cfg.out_dir + "/planted_rules.json");
    manifest.record_file("claims.csv", cfg.out_dir + "/claims.csv");
    manifest.record_file("labels.tsv", cfg.out_dir + "/labels.tsv");
    manifest.record_file("planted_rules.json", cfg.out_dir + "/planted_rules.json");
}

void stage_ingest(const PipelineConfig& cfg, RunManifest& manifest) {
    const std::string claims = cfg.resolved_claims_path();
    manifest.require("claims.csv", claims, "synth");
    IngestReport rep;
    const auto records = ingest_claims(claims, cfg.claims_format, &rep);
    const auto [drug_vocab, dis_vocab] = build_vocabularies(records);

    save_vocab(drug_vocab, cfg.out_dir + "/vocab_drug.tsv");
    save_vocab(dis_vocab, cfg.out_dir + "/vocab_dis.tsv");
    save_sequences(extract_corpus(records, drug_vocab, CodeKind::drug), cfg.out_dir + "/sequences_drug.txt");
    save_sequences(extract_corpus(records, dis_vocab, CodeKind::disease), cfg.out_dir + "/sequences_dis.txt");

    nlohmann::json j;
    j["patients"] = records.size();
    j["rows_total"] = rep.rows_total;
    j["rows_ok"] = rep.rows_ok;
    j["malformed"] = {{"bad_field_count", rep.bad_field_count},
                      {"bad_date", rep.bad_date},
                      {"bad_code_type", rep.bad_code_type},
                      {"bad_code", rep.bad_code}};
    j["vocab_drug"] = drug_vocab.size();
    j["vocab_dis"] = dis_vocab.size();
    atomic_write(cfg.out_dir + "/ingest_report.json", j.dump(2) + "\n");

    for (const char* f : {"vocab_drug.tsv", "vocab_dis.tsv", "sequences_drug.txt", "sequences_dis.txt",
                          "ingest_report.json"})
        manifest.record_file(f, cfg.out_dir + "/" + f);
}

void stage_embed(const PipelineConfig& cfg, RunManifest& manifest) {
    for (const char* f : {"vocab_drug.tsv", "vocab_dis.tsv", "sequences_drug.txt", "sequences_dis.txt"})
        manifest.require(f, cfg.out_dir + "/" + f, "ingest");
    const auto drug_vocab = load_vocab(cfg.out_dir + "/vocab_drug.tsv", CodeKind::drug);
    const auto dis_vocab = load_vocab(cfg.out_dir + "/vocab_dis.tsv", CodeKind::disease);

    SkipgramConfig sg = cfg.skipgram;
    sg.seed = cfg.seed;
    {
        const auto corpus = load_sequences(cfg.out_dir + "/sequences_drug.txt", CodeKind::drug);
        const auto table = train_embeddings(corpus, drug_vocab.size(), sg);
        save_embeddings(cfg.out_dir + "/embed_drug.bin", cfg.out_dir + "/embed_drug.codes.tsv", table,
                        drug_vocab, sg.seed);
    }
    {
        SkipgramConfig sg_dis = sg;
        sg_dis.seed = sg.seed + 1;  // separate spaces, separate streams
        const auto corpus = load_sequences(cfg.out_dir + "/sequences_dis.txt", CodeKind::disease);
        const auto table = train_embeddings(corpus, dis_vocab.size(), sg_dis);
        save_embeddings(cfg.out_dir + "/embed_dis.bin", cfg.out_dir + "/embed_dis.codes.tsv", table,
                        dis_vocab, sg_dis.seed);
    }
    for (const char* f : {"embed_drug.bin", "embed_drug.codes.tsv", "embed_dis.bin", "embed_dis.codes.tsv"})
        manifest.record_file(f, cfg.out_dir + "/" + f);
}

void stage_graph(const PipelineConfig& cfg, RunManifest& manifest) {
    manifest.require("claims.csv", cfg.resolved_claims_path(), "synth");
    for (const char* f : {"vocab_drug.tsv", "vocab_dis.tsv"})
        manifest.require(f, cfg.out_dir + "/" + f, "ingest");
    for (const char* f : {"embed_drug.bin", "embed_dis.bin"})
        manifest.require(f, cfg.out_dir + "/" + f, "embed");

    const auto drug_vocab = load_vocab(cfg.out_dir + "/vocab_drug.tsv", CodeKind::drug);
    const auto dis_vocab = load_vocab(cfg.out_dir + "/vocab_dis.tsv", CodeKind::disease);
    const auto drug_embed = load_embeddings(cfg.out_dir + "/embed_drug.bin", CodeKind::drug);
    const auto dis_embed = load_embeddings(cfg.out_dir + "/embed_dis.bin", CodeKind::disease);
    const auto records = ingest_claims(cfg.resolved_claims_path(), cfg.claims_format);
    const auto drug_encoder = CategoryEncoder::build(CodeKind::drug, drug_vocab.id_to_code);
    const auto dis_encoder = CategoryEncoder::build(CodeKind::disease, dis_vocab.id_to_code);

    const auto graph = build_graph(drug_embed, dis_embed, drug_encoder, dis_encoder, drug_vocab,
                                   dis_vocab, records, cfg.graph);
    const std::string dir = graph_dir(cfg);
    save_graph(graph, dir);
    atomic_write(dir + "/graph_stats.json", graph_stats_json(graph_stats(graph)));

    const std::string rel = "graph_" + profile_name(cfg.graph.sparsity_profile);
    for (const char* f : {"edges_drug_drug.txt", "edges_dis_dis.txt", "edges_drug_dis.txt",
                          "features_drug.bin", "features_dis.bin", "graph_manifest.json",
                          "graph_stats.json"})
        manifest.record_file(rel + "/" + f, dir + "/" + f);
}

struct LoadedRun {
    CodeVocabulary drug_vocab;
    CodeVocabulary dis_vocab;
    DrugDiseaseGraph graph;
};

LoadedRun load_run_inputs(const PipelineConfig& cfg, RunManifest& manifest) {
    for (const char* f : {"vocab_drug.tsv", "vocab_dis.tsv"})
        manifest.require(f, cfg.out_dir + "/" + f, "ingest");
    const std::string rel = "graph_" + profile_name(cfg.graph.sparsity_profile);
    for (const char* f : {"edges_drug_drug.txt", "edges_dis_dis.txt", "edges_drug_dis.txt",
                          "features_drug.bin", "features_dis.bin", "graph_manifest.json"})
        manifest.require(rel + "/" + f, graph_dir(cfg) + "/" + f, "graph");
    LoadedRun run;
    run.drug_vocab = load_vocab(cfg.out_dir + "/vocab_drug.tsv", CodeKind::drug);
    run.dis_vocab = load_vocab(cfg.out_dir + "/vocab_dis.tsv", CodeKind::disease);
    run.graph = load_graph(graph_dir(cfg));
    return run;
}

LabeledPairSet labeled_set_for_seed(const PipelineConfig& cfg, const LoadedRun& run, std::uint64_t seed) {
    const auto labels = load_labels(cfg.resolved_labels_path());
    const auto catalog = build_catalog(labels, run.drug_vocab, run.dis_vocab);
    if (catalog.positive_pairs.empty())
        throw ValidationError("no label pairs overlap the graph vocabularies");
    std::vector<LabeledPair> pairs = catalog.positive_pairs;
    const auto negatives = sample_negatives(catalog, seed);
    pairs.insert(pairs.end(), negatives.begin(), negatives.end());
    return split_by_disease_class(std::move(pairs), run.dis_vocab, kSplitRatios, seed);
}

void save_history(const TrainHistory& hist, const std::string& path) {
    nlohmann::json j;
    j["epochs_run"] = hist.epochs_run;
    j["best_epoch"] = hist.best_epoch;
    j["best_val_auroc"] = hist.best_val_auroc;
    j["train_loss"] = hist.train_loss;
    j["val_auroc"] = hist.val_auroc;
    atomic_write(path, j.dump(2) + "\n");
}

void stage_train(const PipelineConfig& cfg, RunManifest& manifest) {
    manifest.require("labels.tsv", cfg.resolved_labels_path(), "synth");
    LoadedRun run = load_run_inputs(cfg, manifest);
    const MpGraph mp = build_mp_graph(run.graph);
    const std::string model = model_type_name(cfg.train.model);
    const std::string profile = profile_name(cfg.graph.sparsity_profile);

    for (int i = 0; i < cfg.n_seeds; ++i) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        tc.sparsity_profile = cfg.graph.sparsity_profile;

        const std::string split_rel = "split_seed" + std::to_string(seed) + ".csv";
        const std::string split_path = cfg.out_dir + "/" + split_rel;
        LabeledPairSet labeled;
        if (file_exists(split_path)) {
            labeled = load_split(split_path, run.drug_vocab, run.dis_vocab);
        } else {
            labeled = labeled_set_for_seed(cfg, run, seed);
            save_split(labeled, run.drug_vocab, run.dis_vocab, split_path);
        }
        manifest.record_file(split_rel, split_path);

        TrainHistory hist;
        const std::string ck_rel = fmt_seed_file("model", model, profile, seed, ".bin");
        const std::string ck_path = cfg.out_dir + "/" + ck_rel;
        if (is_gnn_model(cfg.train.model)) {
            GnnConfig gc = cfg.gnn;
            gc.variant = gnn_variant_from_string(model);
            const auto params = train_gnn(mp, gc, tc, labeled, &hist);
            gc.seed = seed;
            save_gnn_checkpoint(ck_path, gc, mp.feat_drug->cols, mp.feat_dis->cols, params);
        } else if (cfg.train.model == ModelType::nn) {
            const auto params = train_nn_baseline(mp, tc, labeled, &hist);
            save_nn_checkpoint(ck_path, params);
        } else {
            const auto params = train_lr_baseline(mp, tc, labeled, &hist);
            save_lr_checkpoint(ck_path, params);
        }
        manifest.record_file(ck_rel, ck_path);
        const std::string hist_rel = fmt_seed_file("history", model, profile, seed, ".json");
        save_history(hist, cfg.out_dir + "/" + hist_rel);
        manifest.record_file(hist_rel, cfg.out_dir + "/" + hist_rel);
    }
}

std::vector<double> model_scores(const MpGraph& mp, const std::string& ck_path, ModelType model,
                                 const std::vector<LabeledPair>& pairs) {
    if (is_gnn_model(model)) {
        const auto ck = load_gnn_checkpoint(ck_path);
        return score_pairs(mp, ck.config, ck.params, pairs);
    }
    if (model == ModelType::nn) return nn_scores(mp, load_nn_checkpoint(ck_path), pairs);
    return lr_scores(mp, load_lr_checkpoint(ck_path), pairs);
}

void stage_eval(const PipelineConfig& cfg, RunManifest& manifest) {
    LoadedRun run = load_run_inputs(cfg, manifest);
    const MpGraph mp = build_mp_graph(run.graph);
    const std::string model = model_type_name(cfg.train.model);
    const std::string profile = profile_name(cfg.graph.sparsity_profile);

    std::vector<double> aurocs, auprcs, rare_accs;
    std::size_t rare_hits_pooled = 0, rare_count_pooled = 0;
    std::vector<LabeledPair> pooled_pairs;
    std::vector<double> pooled_scores;
    nlohmann::json per_seed = nlohmann::json::array();

    for (int i = 0; i < cfg.n_seeds; ++i) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
        const std::string split_rel = "split_seed" + std::to_string(seed) + ".csv";
        const std::string ck_rel = fmt_seed_file("model", model, profile, seed, ".bin");
        manifest.require(split_rel, cfg.out_dir + "/" + split_rel, "train");
        manifest.require(ck_rel, cfg.out_dir + "/" + ck_rel, "train");

        const auto labeled = load_split(cfg.out_dir + "/" + split_rel, run.drug_vocab, run.dis_vocab);
        const auto test_pairs = pairs_of_split(labeled, Split::test);
        if (test_pairs.empty()) throw ValidationError("empty test split for seed " + std::to_string(seed));
        const auto scores = model_scores(mp, cfg.out_dir + "/" + ck_rel, cfg.train.model, test_pairs);

        std::vector<int> ylab;
        ylab.reserve(test_pairs.size());
        for (const auto& p : test_pairs) ylab.push_back(p.label);
        const double roc = auroc(scores, ylab);
        const double prc = auprc(scores, ylab);
        aurocs.push_back(roc);
        auprcs.push_back(prc);
        const RareEval rare = evaluate_rare(test_pairs, scores);
        if (rare.applicable) {
            rare_accs.push_back(rare.accuracy);
            rare_hits_pooled += rare.hits;
            rare_count_pooled += rare.count;
        }
        pooled_pairs.insert(pooled_pairs.end(), test_pairs.begin(), test_pairs.end());
        pooled_scores.insert(pooled_scores.end(), scores.begin(), scores.end());

        const auto sizes = labeled.split_sizes();
        nlohmann::json row;
        row["seed"] = seed;
        row["auroc"] = roc;
        row["auprc"] = prc;
        row["rare_applicable"] = rare.applicable;
        row["rare_accuracy"] = rare.applicable ? rare.accuracy : 0.0;
        row["rare_count"] = rare.count;
        row["split_sizes"] = {{"train", sizes[0]}, {"val", sizes[1]}, {"test", sizes[2]}};
        per_seed.push_back(row);
    }

    const Ci95 roc_ci = ci95(aurocs);
    const Ci95 prc_ci = ci95(auprcs);
    nlohmann::json j;
    j["model"] = model;
    j["profile"] = profile;
    j["n_seeds"] = cfg.n_seeds;
    j["auroc"] = {{"mean", roc_ci.mean}, {"ci95_half_width", roc_ci.half_width}};
    j["auprc"] = {{"mean", prc_ci.mean}, {"ci95_half_width", prc_ci.half_width}};
    nlohmann::json rare;
    rare["applicable"] = !rare_accs.empty();
    rare["per_seed_mean"] = rare_accs.empty() ? 0.0 : ci95(rare_accs).mean;
    rare["pooled"] = rare_count_pooled == 0
                         ? 0.0
                         : static_cast<double>(rare_hits_pooled) / static_cast<double>(rare_count_pooled);
    rare["count_pooled"] = rare_count_pooled;
    j["rare_accuracy"] = rare;
    nlohmann::json freq = nlohmann::json::object();
    for (const auto& [name, acc] : per_frequency_accuracy(pooled_pairs, pooled_scores))
        freq[name] = {{"count", acc.count}, {"accuracy", acc.accuracy}};
    j["per_frequency_accuracy"] = freq;
    j["per_seed"] = per_seed;

    const std::string rel = "eval_" + model + "_" + profile + ".json";
    atomic_write(cfg.out_dir + "/" + rel, j.dump(2) + "\n");
    manifest.record_file(rel, cfg.out_dir + "/" + rel);
}

void stage_discover(const PipelineConfig& cfg, RunManifest& manifest) {
    if (!is_gnn_model(cfg.train.model))
        throw ValidationError("discover requires a graph model (gcn, gat or adrgcn)");
    LoadedRun run = load_run_inputs(cfg, manifest);
    const MpGraph mp = build_mp_graph(run.graph);
    const std::string model = model_type_name(cfg.train.model);
    const std::string profile = profile_name(cfg.graph.sparsity_profile);

    for (int i = 0; i < cfg.n_seeds; ++i) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
        const std::string split_rel = "split_seed" + std::to_string(seed) + ".csv";
        const std::string gnn_rel = fmt_seed_file("model", model, profile, seed, ".bin");
        const std::string nn_rel = fmt_seed_file("model", "nn", profile, seed, ".bin");
        manifest.require(split_rel, cfg.out_dir + "/" + split_rel, "train");
        manifest.require(gnn_rel, cfg.out_dir + "/" + gnn_rel, "train");
        manifest.require(nn_rel, cfg.out_dir + "/" + nn_rel, "train (model=nn)");

        const auto labeled = load_split(cfg.out_dir + "/" + split_rel, run.drug_vocab, run.dis_vocab);
        const auto pairs =
            cfg.discover_all_pairs ? labeled.pairs : pairs_of_split(labeled, Split::test);
        const auto gnn_probs = model_scores(mp, cfg.out_dir + "/" + gnn_rel, cfg.train.model, pairs);
        const auto nn_probs = model_scores(mp, cfg.out_dir + "/" + nn_rel, ModelType::nn, pairs);
        const auto candidates = discover_candidates(pairs, gnn_probs, nn_probs, cfg.candidate_threshold);

        std::ostringstream csv;
        csv << "drug_code,icd10_code,gnn_prob,nn_prob\n";
        char buf[64];
        for (const auto& c : candidates) {
            std::snprintf(buf, sizeof(buf), "%.6f,%.6f", c.gnn_prob, c.nn_prob);
            csv << run.drug_vocab.id_to_code[static_cast<std::size_t>(c.drug)] << ','
                << run.dis_vocab.id_to_code[static_cast<std::size_t>(c.dis)] << ',' << buf << '\n';
        }
        const std::string rel = fmt_seed_file("candidates", model, profile, seed, ".csv");
        atomic_write(cfg.out_dir + "/" + rel, csv.str());
        manifest.record_file(rel, cfg.out_dir + "/" + rel);
    }
}

void stage_report(const PipelineConfig& cfg, RunManifest& manifest) {
    std::size_t n_eval = 0;
    for (const auto& entry : std::filesystem::directory_iterator(cfg.out_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("eval_", 0) == 0 && name.find(".json") != std::string::npos) {
            manifest.require(name, cfg.out_dir + "/" + name, "eval");
            ++n_eval;
        }
        if (name.rfind("candidates_", 0) == 0 && name.find(".csv") != std::string::npos)
            manifest.require(name, cfg.out_dir + "/" + name, "discover");
    }
    if (n_eval == 0) throw ValidationError("no completed evaluations in " + cfg.out_dir);
    build_report(cfg.out_dir);
    for (const char* f : {"report.txt", "report.json", "candidates.csv"})
        manifest.record_file(f, cfg.out_dir + "/" + f);
}

}  // namespace

std::string PipelineConfig::resolved_claims_path() const {
    return claims_path.empty() ? out_dir + "/claims.csv" : claims_path;
}

std::string PipelineConfig::resolved_labels_path() const {
    return labels_path.empty() ? out_dir + "/labels.tsv" : labels_path;
}

void PipelineConfig::validate() const {
    if (out_dir.empty()) throw ValidationError("output directory must be set");
    if (n_seeds < 1) throw ValidationError("seeds must be >= 1");
    if (candidate_threshold <= 0 || candidate_threshold >= 1)
        throw ValidationError("candidate_threshold must be in (0,1)");
    synth.validate();
    skipgram.validate();
    graph.validate();
    gnn.validate();
    train.validate();
}

std::string config_json(const PipelineConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["n_seeds"] = c.n_seeds;
    j["claims_format"] = c.claims_format == ClaimsFormat::csv ? "csv" : "jsonl";
    j["candidate_threshold"] = c.candidate_threshold;
    j["discover_all_pairs"] = c.discover_all_pairs;
    j["synth"] = {{"n_patients", c.synth.n_patients},
                  {"n_drugs", c.synth.n_drugs},
                  {"n_drug_clusters", c.synth.n_drug_clusters},
                  {"n_diseases", c.synth.n_diseases},
                  {"n_disease_classes", c.synth.n_disease_classes},
                  {"n_visits_mean", c.synth.n_visits_mean},
                  {"n_adr_rules", c.synth.n_adr_rules},
                  {"adr_strength", c.synth.adr_strength},
                  {"distractor_rate", c.synth.distractor_rate}};
    j["skipgram"] = {{"window", c.skipgram.window},
                     {"dim", c.skipgram.dim},
                     {"negatives_per_positive", c.skipgram.negatives_per_positive},
                     {"epochs", c.skipgram.epochs},
                     {"learning_rate", c.skipgram.learning_rate}};
    j["graph"] = {{"theta", c.graph.theta},
                  {"drug_threshold", c.graph.drug_threshold},
                  {"dis_threshold", c.graph.dis_threshold},
                  {"hetero_min_count", c.graph.hetero_min_count},
                  {"profile", c.graph.sparsity_profile == SparsityProfile::low ? "low" : "high"}};
    j["gnn"] = {{"layers", c.gnn.layers},
                {"hidden_dim", c.gnn.hidden_dim},
                {"gat_heads", c.gnn.gat_heads},
                {"self_loop_weight", c.gnn.self_loop_weight},
                {"relu_last", c.gnn.relu_last}};
    j["train"] = {{"model", model_type_name(c.train.model)},
                  {"epochs", c.train.epochs},
                  {"learning_rate", c.train.learning_rate},
                  {"early_stop_patience", c.train.early_stop_patience}};
    return j.dump();
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int to_int(const std::string& v, const std::string& key) {
    try {
        return std::stoi(v);
    } catch (...) {
        throw ValidationError("config: bad integer for '" + key + "': " + v);
    }
}

double to_double(const std::string& v, const std::string& key) {
    try {
        return std::stod(v);
    } catch (...) {
        throw ValidationError("config: bad number for '" + key + "': " + v);
    }
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ValidationError("config: bad boolean for '" + key + "': " + v);
}

std::vector<int> to_int_list(std::string v, const std::string& key) {
    for (char& c : v)
        if (c == ',') c = ' ';
    std::istringstream in(v);
    std::vector<int> out;
    int x;
    while (in >> x) out.push_back(x);
    if (out.empty()) throw ValidationError("config: bad integer list for '" + key + "': " + v);
    return out;
}

}  // namespace

void apply_config_file(PipelineConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config file: " + path);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ValidationError("config: malformed section at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config: expected key=value at line " + std::to_string(lineno));
        const std::string key = section.empty() ? trim(line.substr(0, eq))
                                                : section + "." + trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
        else if (key == "seeds") cfg.n_seeds = to_int(value, key);
        else if (key == "out") cfg.out_dir = value;
        else if (key == "claims") cfg.claims_path = value;
        else if (key == "labels") cfg.labels_path = value;
        else if (key == "format") {
            if (value == "csv") cfg.claims_format = ClaimsFormat::csv;
            else if (value == "jsonl") cfg.claims_format = ClaimsFormat::jsonl;
            else throw ValidationError("config: unknown claims format '" + value + "'");
        } else if (key == "threshold") cfg.candidate_threshold = to_double(value, key);
        else if (key == "discover_all") cfg.discover_all_pairs = to_bool(value, key);
        else if (key == "profile") {
            if (value == "low") cfg.graph.sparsity_profile = SparsityProfile::low;
            else if (value == "high") cfg.graph.sparsity_profile = SparsityProfile::high;
            else throw ValidationError("config: unknown profile '" + value + "'");
        } else if (key == "model") cfg.train.model = model_type_from_string(value);
        else if (key == "synth.patients") cfg.synth.n_patients = to_int(value, key);
        else if (key == "synth.drugs") cfg.synth.n_drugs = to_int(value, key);
        else if (key == "synth.clusters") cfg.synth.n_drug_clusters = to_int(value, key);
        else if (key == "synth.diseases") cfg.synth.n_diseases = to_int(value, key);
        else if (key == "synth.classes") cfg.synth.n_disease_classes = to_int(value, key);
        else if (key == "synth.visits_mean") cfg.synth.n_visits_mean = to_double(value, key);
        else if (key == "synth.rules") cfg.synth.n_adr_rules = to_int(value, key);
        else if (key == "synth.strength") cfg.synth.adr_strength = to_double(value, key);
        else if (key == "synth.distractor_rate") cfg.synth.distractor_rate = to_double(value, key);
        else if (key == "skipgram.window") cfg.skipgram.window = to_int(value, key);
        else if (key == "skipgram.dim") cfg.skipgram.dim = to_int(value, key);
        else if (key == "skipgram.negatives") cfg.skipgram.negatives_per_positive = to_int(value, key);
        else if (key == "skipgram.epochs") cfg.skipgram.epochs = to_int(value, key);
        else if (key == "skipgram.lr") cfg.skipgram.learning_rate = to_double(value, key);
        else if (key == "graph.theta") cfg.graph.theta = to_double(value, key);
        else if (key == "graph.drug_threshold") cfg.graph.drug_threshold = to_double(value, key);
        else if (key == "graph.dis_threshold") cfg.graph.dis_threshold = to_double(value, key);
        else if (key == "graph.min_count") cfg.graph.hetero_min_count = to_int(value, key);
        else if (key == "gnn.layers") cfg.gnn.layers = to_int(value, key);
        else if (key == "gnn.hidden") cfg.gnn.hidden_dim = to_int(value, key);
        else if (key == "gnn.heads") cfg.gnn.gat_heads = to_int_list(value, key);
        else if (key == "gnn.self_loop_weight") cfg.gnn.self_loop_weight = to_double(value, key);
        else if (key == "gnn.relu_last") cfg.gnn.relu_last = to_bool(value, key);
        else if (key == "train.epochs") cfg.train.epochs = to_int(value, key);
        else if (key == "train.lr") cfg.train.learning_rate = to_double(value, key);
        else if (key == "train.patience") cfg.train.early_stop_patience = to_int(value, key);
        else throw ValidationError("config: unknown key '" + key + "' at line " + std::to_string(lineno));
    }
}

void run_stage(const std::string& stage, const PipelineConfig& config) {
    config.validate();
    if (std::find(kStageNames.begin(), kStageNames.end(), stage) == kStageNames.end())
        throw ValidationError("unknown stage: '" + stage + "'");
    std::filesystem::create_directories(config.out_dir);

    const std::vector<std::string> sequence =
        stage == "all" ? std::vector<std::string>{"synth", "ingest", "embed", "graph", "train", "eval",
                                                  "discover", "report"}
                       : std::vector<std::string>{stage};
    for (const auto& s : sequence) {
        // `all` trains the nn baseline alongside a graph model so discover has
        // its exclusion side
        if (stage == "all" && s == "train" && is_gnn_model(config.train.model)) {
            PipelineConfig nn_cfg = config;
            nn_cfg.train.model = ModelType::nn;
            run_stage("train", nn_cfg);
            run_stage("eval", nn_cfg);
        }
        if (stage == "all" && s == "discover" && !is_gnn_model(config.train.model)) continue;

        RunManifest manifest = RunManifest::open(config.out_dir);
        if (s == "synth") stage_synth(config, manifest);
        else if (s == "ingest") stage_ingest(config, manifest);
        else if (s == "embed") stage_embed(config, manifest);
        else if (s == "graph") stage_graph(config, manifest);
        else if (s == "train") stage_train(config, manifest);
        else if (s == "eval") stage_eval(config, manifest);
        else if (s == "discover") stage_discover(config, manifest);
        else if (s == "report") stage_report(config, manifest);
        manifest.record_stage(s, config);
        manifest.save();
    }
}

Report build_report(const std::string& run_dir) {
    std::vector<std::string> eval_files, candidate_files;
    if (!std::filesystem::is_directory(run_dir)) throw ValidationError("no run directory: " + run_dir);
    for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("eval_", 0) == 0 && name.size() > 5 && name.substr(name.size() - 5) == ".json")
            eval_files.push_back(name);
        if (name.rfind("candidates_", 0) == 0 && name.size() > 4 && name.substr(name.size() - 4) == ".csv")
            candidate_files.push_back(name);
    }
    std::sort(eval_files.begin(), eval_files.end());
    std::sort(candidate_files.begin(), candidate_files.end());

    Report report;
    nlohmann::json jrows = nlohmann::json::array();
    std::ostringstream txt;
    txt << "model     profile   seeds   AUROC                AUPRC\n";
    for (const auto& f : eval_files) {
        const auto j = nlohmann::json::parse(read_file(run_dir + "/" + f));
        ReportRow row;
        row.model = j.at("model").get<std::string>();
        row.profile = j.at("profile").get<std::string>();
        row.n_seeds = j.at("n_seeds").get<int>();
        row.auroc = {j.at("auroc").at("mean").get<double>(),
                     j.at("auroc").at("ci95_half_width").get<double>()};
        row.auprc = {j.at("auprc").at("mean").get<double>(),
                     j.at("auprc").at("ci95_half_width").get<double>()};
        report.rows.push_back(row);
        char line[160];
        std::snprintf(line, sizeof(line), "%-9s %-9s %-7d %.3f +/- %.3f      %.3f +/- %.3f\n",
                      row.model.c_str(), row.profile.c_str(), row.n_seeds, row.auroc.mean,
                      row.auroc.half_width, row.auprc.mean, row.auprc.half_width);
        txt << line;
        jrows.push_back({{"model", row.model},
                         {"profile", row.profile},
                         {"n_seeds", row.n_seeds},
                         {"auroc_mean", row.auroc.mean},
                         {"auroc_ci95_half_width", row.auroc.half_width},
                         {"auprc_mean", row.auprc.mean},
                         {"auprc_ci95_half_width", row.auprc.half_width}});
    }

    std::ostringstream merged;
    merged << "drug_code,icd10_code,gnn_prob,nn_prob\n";
    std::size_t n_candidates = 0;
    for (const auto& f : candidate_files) {
        std::ifstream in(run_dir + "/" + f);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            merged << line << '\n';
            ++n_candidates;
        }
    }
    report.n_candidates = n_candidates;

    atomic_write(run_dir + "/report.txt", txt.str());
    nlohmann::json jr;
    jr["rows"] = jrows;
    jr["n_candidates"] = n_candidates;
    atomic_write(run_dir + "/report.json", jr.dump(2) + "\n");
    atomic_write(run_dir + "/candidates.csv", merged.str());
    return report;
}

}  // namespace adrgraph
