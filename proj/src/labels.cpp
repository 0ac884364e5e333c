#include "adrgraph/labels.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "adrgraph/codes.hpp"

namespace adrgraph {

const char* frequency_name(FrequencyClass f) {
    switch (f) {
        case FrequencyClass::common: return "common";
        case FrequencyClass::rare: return "rare";
        case FrequencyClass::post_marketing: return "post_marketing";
        default: return "unknown";
    }
}

FrequencyClass frequency_from_string(const std::string& s, bool* recognized) {
    if (recognized) *recognized = true;
    if (s == "common") return FrequencyClass::common;
    if (s == "rare") return FrequencyClass::rare;
    if (s == "post_marketing") return FrequencyClass::post_marketing;
    if (s == "unknown") return FrequencyClass::unknown;
    if (recognized) *recognized = false;
    return FrequencyClass::unknown;
}

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

namespace {

std::vector<std::string> split_on(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

AdrLabelFile load_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("unreadable label file: " + path);
    std::string line;
    if (!std::getline(in, line) || split_on(line, '\t') != std::vector<std::string>{"atc_code", "icd10_code", "frequency"})
        throw ValidationError("bad label TSV header in " + path);

    AdrLabelFile out;
    std::set<std::pair<std::string, std::string>> seen;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto f = split_on(line, '\t');
        if (f.size() != 3)
            throw ValidationError("malformed label row at line " + std::to_string(lineno) + " in " + path);
        parse_atc(f[0]);    // throws on malformed codes
        parse_icd10(f[1]);
        if (!seen.emplace(f[0], f[1]).second)
            throw ValidationError("duplicate label pair (" + f[0] + ", " + f[1] + ") in " + path);
        bool recognized = true;
        const FrequencyClass freq = frequency_from_string(f[2], &recognized);
        if (!recognized)
            out.warnings.push_back("unknown frequency '" + f[2] + "' at line " + std::to_string(lineno));
        out.rows.push_back(AdrLabelRow{f[0], f[1], freq});
    }
    return out;
}

LabelCatalog build_catalog(const AdrLabelFile& labels, const CodeVocabulary& drug_vocab,
                           const CodeVocabulary& dis_vocab) {
    LabelCatalog cat;
    std::set<int> drugs, diseases;
    for (const auto& row : labels.rows) {
        if (!drug_vocab.contains(row.atc_code) || !dis_vocab.contains(row.icd10_code)) continue;
        const int d = drug_vocab.id_of(row.atc_code);
        const int s = dis_vocab.id_of(row.icd10_code);
        drugs.insert(d);
        diseases.insert(s);
        cat.positives.insert(LabelCatalog::key(d, s));
        cat.positive_pairs.push_back(LabeledPair{d, s, 1, row.frequency, Split::train});
    }
    cat.labeled_drugs.assign(drugs.begin(), drugs.end());
    cat.labeled_dis.assign(diseases.begin(), diseases.end());
    return cat;
}

int label(int drug, int dis, const LabelCatalog& catalog) {
    const bool drug_ok = std::binary_search(catalog.labeled_drugs.begin(), catalog.labeled_drugs.end(), drug);
    const bool dis_ok = std::binary_search(catalog.labeled_dis.begin(), catalog.labeled_dis.end(), dis);
    if (!drug_ok || !dis_ok)
        throw ValidationError("label: pair (" + std::to_string(drug) + ", " + std::to_string(dis) +
                              ") is outside the labeled vocabularies");
    return catalog.is_positive(drug, dis) ? 1 : 0;
}

std::vector<LabeledPair> sample_negatives(const LabelCatalog& catalog, std::uint64_t seed) {
    const std::size_t n_pos = catalog.positive_pairs.size();
    std::vector<std::pair<int, int>> complement;
    complement.reserve(catalog.labeled_drugs.size() * catalog.labeled_dis.size());
    for (int d : catalog.labeled_drugs)
        for (int s : catalog.labeled_dis)
            if (!catalog.is_positive(d, s)) complement.emplace_back(d, s);
    if (complement.size() < n_pos)
        throw ValidationError("sample_negatives: complement smaller than the positive set (" +
                              std::to_string(complement.size()) + " < " + std::to_string(n_pos) + ")");
    Rng rng(seed);
    // partial Fisher-Yates: first n_pos entries are a uniform sample without replacement
    for (std::size_t i = 0; i < n_pos; ++i) {
        const std::size_t j = i + rng.below(complement.size() - i);
        std::swap(complement[i], complement[j]);
    }
    std::vector<LabeledPair> negatives;
    negatives.reserve(n_pos);
    for (std::size_t i = 0; i < n_pos; ++i)
        negatives.push_back(LabeledPair{complement[i].first, complement[i].second, 0,
                                        FrequencyClass::unknown, Split::train});
    return negatives;
}

std::array<std::size_t, 3> LabeledPairSet::split_sizes() const {
    std::array<std::size_t, 3> sizes{0, 0, 0};
    for (const auto& p : pairs) sizes[static_cast<std::size_t>(p.split)]++;
    return sizes;
}

LabeledPairSet split_by_disease_class(std::vector<LabeledPair> pairs, const CodeVocabulary& dis_vocab,
                                      const std::array<double, 3>& ratios, std::uint64_t seed) {
    const double ratio_sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(ratio_sum - 1.0) > 1e-9)
        throw ValidationError("split_by_disease_class: ratios must sum to 1");

    std::map<std::string, std::vector<std::size_t>> by_class;  // 3-char class -> pair indices
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const std::string cls = parse_icd10(dis_vocab.id_to_code[static_cast<std::size_t>(pairs[i].dis)]).level2;
        by_class[cls].push_back(i);
    }
    if (by_class.size() < 3)
        throw ValidationError("split_by_disease_class: need at least 3 disease classes, have " +
                              std::to_string(by_class.size()));

    struct ClassBucket {
        std::string cls;
        std::vector<std::size_t> idx;
    };
    std::vector<ClassBucket> buckets;
    buckets.reserve(by_class.size());
    for (auto& [cls, idx] : by_class) buckets.push_back(ClassBucket{cls, std::move(idx)});
    // seeded shuffle then stable sort by size: ties land in seed-dependent order
    Rng rng(seed);
    rng.shuffle(buckets);
    std::stable_sort(buckets.begin(), buckets.end(),
                     [](const ClassBucket& a, const ClassBucket& b) { return a.idx.size() > b.idx.size(); });

    const double total = static_cast<double>(pairs.size());
    std::array<double, 3> deficit{ratios[0] * total, ratios[1] * total, ratios[2] * total};
    std::array<bool, 3> nonempty{false, false, false};
    std::size_t remaining_classes = buckets.size();
    for (const auto& bucket : buckets) {
        // every split must end up with at least one class
        std::size_t empties = 0;
        for (bool f : nonempty)
            if (!f) ++empties;
        std::size_t target;
        if (empties >= remaining_classes) {
            target = static_cast<std::size_t>(std::find(nonempty.begin(), nonempty.end(), false) -
                                              nonempty.begin());
        } else {
            target = 0;
            for (std::size_t s = 1; s < 3; ++s)
                if (deficit[s] > deficit[target]) target = s;
        }
        for (std::size_t i : bucket.idx) pairs[i].split = static_cast<Split>(target);
        deficit[target] -= static_cast<double>(bucket.idx.size());
        nonempty[target] = true;
        --remaining_classes;
    }
    return LabeledPairSet{std::move(pairs)};
}

void shuffle_labels(LabeledPairSet& set, std::uint64_t seed) {
    std::vector<int> labels;
    labels.reserve(set.pairs.size());
    for (const auto& p : set.pairs) labels.push_back(p.label);
    Rng rng(seed);
    rng.shuffle(labels);
    for (std::size_t i = 0; i < set.pairs.size(); ++i) set.pairs[i].label = labels[i];
}

void save_split(const LabeledPairSet& set, const CodeVocabulary& drug_vocab,
                const CodeVocabulary& dis_vocab, const std::string& path) {
    std::ostringstream out;
    out << "drug_code,icd10_code,label,frequency,split\n";
    for (const auto& p : set.pairs)
        out << drug_vocab.id_to_code[static_cast<std::size_t>(p.drug)] << ','
            << dis_vocab.id_to_code[static_cast<std::size_t>(p.dis)] << ',' << p.label << ','
            << frequency_name(p.frequency) << ',' << split_name(p.split) << '\n';
    atomic_write(path, out.str());
}

LabeledPairSet load_split(const std::string& path, const CodeVocabulary& drug_vocab,
                          const CodeVocabulary& dis_vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("unreadable split file: " + path);
    std::string line;
    if (!std::getline(in, line) ||
        split_on(line, ',') != std::vector<std::string>{"drug_code", "icd10_code", "label", "frequency", "split"})
        throw ValidationError("bad split CSV header in " + path);
    LabeledPairSet set;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto f = split_on(line, ',');
        if (f.size() != 5) throw ValidationError("malformed split row in " + path);
        LabeledPair p;
        p.drug = drug_vocab.id_of(f[0]);
        p.dis = dis_vocab.id_of(f[1]);
        p.label = f[2] == "1" ? 1 : 0;
        p.frequency = frequency_from_string(f[3]);
        if (f[4] == "train")
            p.split = Split::train;
        else if (f[4] == "val")
            p.split = Split::val;
        else if (f[4] == "test")
            p.split = Split::test;
        else
            throw ValidationError("bad split name '" + f[4] + "' in " + path);
        set.pairs.push_back(p);
    }
    return set;
}

}  // namespace adrgraph
