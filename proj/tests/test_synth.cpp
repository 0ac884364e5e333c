#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "adrgraph/claims.hpp"
#include "adrgraph/codes.hpp"
#include "adrgraph/graph.hpp"
#include "adrgraph/labels.hpp"
#include "adrgraph/synth.hpp"

using namespace adrgraph;

namespace {

struct TempDir {
    std::string path;
    explicit TempDir(const std::string& p) : path(p) { std::filesystem::create_directories(path); }
    ~TempDir() { std::filesystem::remove_all(path); }
};

SynthConfig small_config(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_patients = 250;
    cfg.n_drugs = 24;
    cfg.n_drug_clusters = 4;
    cfg.n_diseases = 40;
    cfg.n_disease_classes = 10;
    cfg.n_visits_mean = 5;
    cfg.n_adr_rules = 12;
    cfg.adr_strength = 0.8;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("synthesized codes always parse") {
    for (int c = 0; c < 30; ++c)
        for (int j = 0; j < 40; ++j) CHECK_NOTHROW(parse_atc(synth_drug_code(c, j)));
    for (int k = 0; k < 30; ++k)
        for (int v = 0; v < 12; ++v) CHECK_NOTHROW(parse_icd10(synth_disease_code(k, v)));
    // distinct inputs give distinct codes
    std::set<std::string> seen;
    for (int c = 0; c < 5; ++c)
        for (int j = 0; j < 60; ++j) CHECK(seen.insert(synth_drug_code(c, j)).second);
}

TEST_CASE("generator output is byte-identical per seed and differs across seeds") {
    TempDir dir("test_synth_det");
    const auto cfg = small_config(11);
    generate_corpus(cfg, dir.path + "/c1.csv", dir.path + "/l1.tsv", dir.path + "/m1.json");
    generate_corpus(cfg, dir.path + "/c2.csv", dir.path + "/l2.tsv", dir.path + "/m2.json");
    CHECK(read_file(dir.path + "/c1.csv") == read_file(dir.path + "/c2.csv"));
    CHECK(read_file(dir.path + "/l1.tsv") == read_file(dir.path + "/l2.tsv"));
    CHECK(read_file(dir.path + "/m1.json") == read_file(dir.path + "/m2.json"));
    auto other = cfg;
    other.seed = 12;
    generate_corpus(other, dir.path + "/c3.csv", dir.path + "/l3.tsv", dir.path + "/m3.json");
    CHECK(read_file(dir.path + "/c1.csv") != read_file(dir.path + "/c3.csv"));
}

TEST_CASE("generated corpus ingests cleanly and spans enough disease classes") {
    TempDir dir("test_synth_ingest");
    const auto cfg = small_config(21);
    const auto out = generate_corpus(cfg, dir.path + "/claims.csv", dir.path + "/labels.tsv",
                                     dir.path + "/rules.json");
    CHECK(out.rules.size() == 12);
    IngestReport rep;
    const auto records = ingest_claims(dir.path + "/claims.csv", ClaimsFormat::csv, &rep);
    CHECK(rep.malformed() == 0);
    CHECK(records.size() > 200);
    const auto [drug_vocab, dis_vocab] = build_vocabularies(records);
    CHECK(drug_vocab.size() <= 24);
    std::set<std::string> classes;
    for (const auto& code : dis_vocab.id_to_code) classes.insert(parse_icd10(code).level2);
    CHECK(classes.size() >= 10);
    // labels parse and include both planted rules and distractors
    const auto labels = load_labels(dir.path + "/labels.tsv");
    CHECK(labels.rows.size() == out.n_label_rows);
    CHECK(labels.rows.size() >= out.rules.size());
    CHECK(labels.warnings.empty());
}

TEST_CASE("planted pairs dominate background pairs in heterogeneous weight") {
    TempDir dir("test_synth_dominance");
    SynthConfig cfg = small_config(31);
    cfg.n_patients = 600;
    cfg.adr_strength = 0.8;
    const auto out = generate_corpus(cfg, dir.path + "/claims.csv", dir.path + "/labels.tsv",
                                     dir.path + "/rules.json");
    const auto records = ingest_claims(dir.path + "/claims.csv", ClaimsFormat::csv);
    const auto [drug_vocab, dis_vocab] = build_vocabularies(records);
    const auto co = count_cooccurrence(records, drug_vocab, dis_vocab);

    auto weight_of = [&](const std::string& drug, const std::string& dis) {
        if (!drug_vocab.contains(drug) || !dis_vocab.contains(dis)) return 0.0;
        const int i = drug_vocab.id_of(drug);
        const int j = dis_vocab.id_of(dis);
        return heterogeneous_edge_weight(co.pair_count(i, j), co.n_dis[static_cast<std::size_t>(j)], 1);
    };
    std::vector<double> planted;
    for (const auto& rule : out.rules) planted.push_back(weight_of(rule.drug_code, rule.disease_code));
    // background: same diseases paired with a fixed non-planted drug offset
    std::set<std::pair<std::string, std::string>> planted_set;
    for (const auto& r : out.rules) planted_set.emplace(r.drug_code, r.disease_code);
    std::vector<double> background;
    Rng rng(5);
    while (background.size() < planted.size() * 4) {
        const auto d = static_cast<std::size_t>(rng.below(drug_vocab.size()));
        const auto s = static_cast<std::size_t>(rng.below(dis_vocab.size()));
        if (planted_set.count({drug_vocab.id_to_code[d], dis_vocab.id_to_code[s]})) continue;
        background.push_back(weight_of(drug_vocab.id_to_code[d], dis_vocab.id_to_code[s]));
    }
    std::sort(planted.begin(), planted.end());
    std::sort(background.begin(), background.end());
    const double median_planted = planted[planted.size() / 2];
    const double median_background = background[background.size() / 2];
    CHECK(median_planted > median_background);
}

TEST_CASE("strength zero keeps planted diseases at background rate") {
    TempDir dir("test_synth_null");
    SynthConfig cfg = small_config(41);
    cfg.adr_strength = 0.0;
    const auto out = generate_corpus(cfg, dir.path + "/claims.csv", dir.path + "/labels.tsv",
                                     dir.path + "/rules.json");
    CHECK(out.rules.size() == 12);  // rules still listed as positives
    const auto manifest = nlohmann::json::parse(read_file(dir.path + "/rules.json"));
    CHECK(manifest.at("planted_rules").size() == 12);
    CHECK(manifest.at("config").at("adr_strength").get<double>() == 0.0);
}

TEST_CASE("infeasible configs are rejected") {
    SynthConfig cfg = small_config(1);
    cfg.n_adr_rules = cfg.n_drugs * cfg.n_diseases + 1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    SynthConfig few_classes = small_config(1);
    few_classes.n_disease_classes = 5;
    CHECK_THROWS_AS(few_classes.validate(), ValidationError);
    SynthConfig bad_strength = small_config(1);
    bad_strength.adr_strength = 1.5;
    CHECK_THROWS_AS(bad_strength.validate(), ValidationError);
}
