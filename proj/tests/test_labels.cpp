#include <doctest.h>

#include <filesystem>
#include <set>

#include "adrgraph/labels.hpp"

using namespace adrgraph;

namespace {

CodeVocabulary vocab_of(CodeKind kind, const std::vector<std::string>& codes) {
    CodeVocabulary v;
    v.kind = kind;
    for (const auto& c : codes) {
        v.code_to_id[c] = static_cast<int>(v.id_to_code.size());
        v.id_to_code.push_back(c);
    }
    return v;
}

struct TempFile {
    std::string path;
    TempFile(const std::string& name, const std::string& content) : path(name) {
        atomic_write(path, content);
    }
    ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("load_labels parses rows and flags unknown frequencies") {
    TempFile f("test_labels_ok.tsv",
               "atc_code\ticd10_code\tfrequency\n"
               "A01AA01\tI50\tcommon\n"
               "B02BC03\tE11\trare\n"
               "C03CA01\tJ45\tweird\n");
    const auto labels = load_labels(f.path);
    REQUIRE(labels.rows.size() == 3);
    CHECK(labels.rows[0].frequency == FrequencyClass::common);
    CHECK(labels.rows[1].frequency == FrequencyClass::rare);
    CHECK(labels.rows[2].frequency == FrequencyClass::unknown);
    REQUIRE(labels.warnings.size() == 1);
    CHECK(labels.warnings[0].find("weird") != std::string::npos);
}

TEST_CASE("load_labels rejects duplicates and malformed rows") {
    TempFile dup("test_labels_dup.tsv",
                 "atc_code\ticd10_code\tfrequency\n"
                 "A01AA01\tI50\tcommon\n"
                 "A01AA01\tI50\trare\n");
    CHECK_THROWS_WITH_AS(load_labels(dup.path), doctest::Contains("A01AA01"), ValidationError);
    TempFile badcode("test_labels_badcode.tsv",
                     "atc_code\ticd10_code\tfrequency\n"
                     "NOTATC\tI50\tcommon\n");
    CHECK_THROWS_AS(load_labels(badcode.path), ValidationError);
    TempFile badrow("test_labels_badrow.tsv",
                    "atc_code\ticd10_code\tfrequency\n"
                    "A01AA01\tI50\n");
    CHECK_THROWS_AS(load_labels(badrow.path), ValidationError);
}

TEST_CASE("label function is membership over the labeled grid") {
    const auto drug_vocab = vocab_of(CodeKind::drug, {"A01AA01", "B02BC03", "C03CA01"});
    const auto dis_vocab = vocab_of(CodeKind::disease, {"I50", "E11"});
    TempFile f("test_labels_fn.tsv",
               "atc_code\ticd10_code\tfrequency\n"
               "A01AA01\tI50\tcommon\n"
               "B02BC03\tE11\trare\n"
               "Z99ZZ99\tZ99\tcommon\n");  // outside the vocabularies: dropped
    const auto catalog = build_catalog(load_labels(f.path), drug_vocab, dis_vocab);
    CHECK(catalog.positive_pairs.size() == 2);
    CHECK(label(drug_vocab.id_of("A01AA01"), dis_vocab.id_of("I50"), catalog) == 1);
    CHECK(label(drug_vocab.id_of("A01AA01"), dis_vocab.id_of("E11"), catalog) == 0);
    // C03CA01 is in the graph vocabulary but not the label file: outside the domain
    CHECK_THROWS_AS(label(drug_vocab.id_of("C03CA01"), dis_vocab.id_of("I50"), catalog),
                    ValidationError);
}

TEST_CASE("negative sampling avoids positives, hits the exact count, and is seeded") {
    LabelCatalog cat;
    cat.labeled_drugs = {0, 1, 2, 3};
    cat.labeled_dis = {0, 1, 2};
    for (int d = 0; d < 2; ++d)
        for (int s = 0; s < 2; ++s) {
            cat.positives.insert(LabelCatalog::key(d, s));
            cat.positive_pairs.push_back(LabeledPair{d, s, 1, FrequencyClass::common, Split::train});
        }
    const auto neg = sample_negatives(cat, 17);
    CHECK(neg.size() == cat.positive_pairs.size());
    std::set<std::pair<int, int>> seen;
    for (const auto& p : neg) {
        CHECK(p.label == 0);
        CHECK(!cat.is_positive(p.drug, p.dis));
        CHECK(seen.emplace(p.drug, p.dis).second);  // without replacement
    }
    const auto neg2 = sample_negatives(cat, 17);
    for (std::size_t i = 0; i < neg.size(); ++i) {
        CHECK(neg[i].drug == neg2[i].drug);
        CHECK(neg[i].dis == neg2[i].dis);
    }
}

TEST_CASE("negative sampling fails on a too-small complement") {
    LabelCatalog cat;
    cat.labeled_drugs = {0};
    cat.labeled_dis = {0, 1};
    cat.positives.insert(LabelCatalog::key(0, 0));
    cat.positive_pairs.push_back(LabeledPair{0, 0, 1, FrequencyClass::common, Split::train});
    cat.positives.insert(LabelCatalog::key(0, 1));
    cat.positive_pairs.push_back(LabeledPair{0, 1, 1, FrequencyClass::common, Split::train});
    CHECK_THROWS_AS(sample_negatives(cat, 1), ValidationError);
}

TEST_CASE("split assigns whole disease classes and hits equal-count packing exactly") {
    // 10 classes x 4 pairs each; kind codes I00..I09 with distinct 3-char classes
    std::vector<std::string> codes;
    for (int k = 0; k < 10; ++k) codes.push_back("I" + std::to_string(10 + k));
    const auto dis_vocab = vocab_of(CodeKind::disease, codes);
    std::vector<LabeledPair> pairs;
    for (int k = 0; k < 10; ++k)
        for (int r = 0; r < 4; ++r)
            pairs.push_back(LabeledPair{r, k, r % 2, FrequencyClass::common, Split::train});
    const auto set = split_by_disease_class(pairs, dis_vocab, {0.8, 0.1, 0.1}, 5);
    std::array<std::set<int>, 3> class_sets;
    for (const auto& p : set.pairs) class_sets[static_cast<std::size_t>(p.split)].insert(p.dis);
    CHECK(class_sets[0].size() == 8);
    CHECK(class_sets[1].size() == 1);
    CHECK(class_sets[2].size() == 1);
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b)
            for (int cls : class_sets[static_cast<std::size_t>(a)])
                CHECK(class_sets[static_cast<std::size_t>(b)].count(cls) == 0);
}

TEST_CASE("split errors when fewer than 3 classes exist") {
    const auto dis_vocab = vocab_of(CodeKind::disease, {"I50", "I50.1"});
    std::vector<LabeledPair> pairs{LabeledPair{0, 0, 1, FrequencyClass::common, Split::train},
                                   LabeledPair{0, 1, 0, FrequencyClass::common, Split::train}};
    CHECK_THROWS_AS(split_by_disease_class(pairs, dis_vocab, {0.8, 0.1, 0.1}, 1), ValidationError);
}

TEST_CASE("split ratios must sum to one") {
    const auto dis_vocab = vocab_of(CodeKind::disease, {"I50", "E11", "J45"});
    std::vector<LabeledPair> pairs{LabeledPair{0, 0, 1, FrequencyClass::common, Split::train}};
    CHECK_THROWS_AS(split_by_disease_class(pairs, dis_vocab, {0.5, 0.1, 0.1}, 1), ValidationError);
}

TEST_CASE("class disjointness holds across random instances and seeds") {
    Rng rng(99);
    for (int it = 0; it < 20; ++it) {
        const int n_classes = 5 + rng.below_int(10);
        std::vector<std::string> codes;
        for (int k = 0; k < n_classes; ++k)
            for (int v = 0; v < 1 + rng.below_int(3); ++v)
                codes.push_back("A" + std::to_string(10 + k) + (v ? "." + std::to_string(v) : ""));
        const auto dis_vocab = vocab_of(CodeKind::disease, codes);
        std::vector<LabeledPair> pairs;
        const int n_pairs = 30 + rng.below_int(50);
        for (int p = 0; p < n_pairs; ++p)
            pairs.push_back(LabeledPair{rng.below_int(5), rng.below_int(static_cast<int>(codes.size())),
                                        rng.below_int(2), FrequencyClass::common, Split::train});
        const auto set = split_by_disease_class(pairs, dis_vocab, {0.8, 0.1, 0.1}, it);
        std::array<std::set<std::string>, 3> split_classes;
        for (const auto& p : set.pairs)
            split_classes[static_cast<std::size_t>(p.split)].insert(
                dis_vocab.id_to_code[static_cast<std::size_t>(p.dis)].substr(0, 3));
        for (int a = 0; a < 3; ++a) {
            CHECK(!split_classes[static_cast<std::size_t>(a)].empty());
            for (int b = a + 1; b < 3; ++b)
                for (const auto& cls : split_classes[static_cast<std::size_t>(a)])
                    CHECK(split_classes[static_cast<std::size_t>(b)].count(cls) == 0);
        }
    }
}

TEST_CASE("frequency filter recovers exactly the tagged rows") {
    std::vector<LabeledPair> pairs{
        LabeledPair{0, 0, 1, FrequencyClass::rare, Split::train},
        LabeledPair{0, 1, 1, FrequencyClass::common, Split::train},
        LabeledPair{0, 2, 1, FrequencyClass::post_marketing, Split::train},
        LabeledPair{0, 3, 0, FrequencyClass::unknown, Split::train},
    };
    std::size_t n_infrequent = 0;
    for (const auto& p : pairs)
        if (p.frequency == FrequencyClass::rare || p.frequency == FrequencyClass::post_marketing)
            ++n_infrequent;
    CHECK(n_infrequent == 2);
}

TEST_CASE("split file round-trips") {
    const auto drug_vocab = vocab_of(CodeKind::drug, {"A01AA01", "B02BC03"});
    const auto dis_vocab = vocab_of(CodeKind::disease, {"I50", "E11", "J45"});
    LabeledPairSet set;
    set.pairs = {LabeledPair{0, 0, 1, FrequencyClass::rare, Split::train},
                 LabeledPair{1, 1, 0, FrequencyClass::unknown, Split::val},
                 LabeledPair{0, 2, 1, FrequencyClass::common, Split::test}};
    save_split(set, drug_vocab, dis_vocab, "test_split.csv");
    const auto loaded = load_split("test_split.csv", drug_vocab, dis_vocab);
    REQUIRE(loaded.pairs.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(loaded.pairs[i].drug == set.pairs[i].drug);
        CHECK(loaded.pairs[i].dis == set.pairs[i].dis);
        CHECK(loaded.pairs[i].label == set.pairs[i].label);
        CHECK(loaded.pairs[i].frequency == set.pairs[i].frequency);
        CHECK(loaded.pairs[i].split == set.pairs[i].split);
    }
    std::filesystem::remove("test_split.csv");
}

TEST_CASE("shuffle_labels permutes labels but preserves pairs and splits") {
    LabeledPairSet set;
    for (int i = 0; i < 50; ++i)
        set.pairs.push_back(LabeledPair{i, i, i < 25 ? 1 : 0, FrequencyClass::common,
                                        static_cast<Split>(i % 3)});
    LabeledPairSet shuffled = set;
    shuffle_labels(shuffled, 3);
    int ones = 0;
    bool moved = false;
    for (std::size_t i = 0; i < set.pairs.size(); ++i) {
        ones += shuffled.pairs[i].label;
        moved = moved || shuffled.pairs[i].label != set.pairs[i].label;
        CHECK(shuffled.pairs[i].drug == set.pairs[i].drug);
        CHECK(shuffled.pairs[i].split == set.pairs[i].split);
    }
    CHECK(ones == 25);
    CHECK(moved);
}
