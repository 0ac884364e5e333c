#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "adrgraph/claims.hpp"
#include "adrgraph/common.hpp"

namespace adrgraph {

enum class FrequencyClass : std::uint8_t { common = 0, rare = 1, post_marketing = 2, unknown = 3 };

const char* frequency_name(FrequencyClass f);
FrequencyClass frequency_from_string(const std::string& s, bool* recognized = nullptr);

struct AdrLabelRow {
    std::string atc_code;
    std::string icd10_code;
    FrequencyClass frequency = FrequencyClass::unknown;
};

struct AdrLabelFile {
    std::vector<AdrLabelRow> rows;
    std::vector<std::string> warnings;  // e.g. unrecognized frequency strings
};

/// Parses the label TSV (`atc_code<TAB>icd10_code<TAB>frequency`), validating
/// code shapes and rejecting duplicate (drug, disease) rows.
AdrLabelFile load_labels(const std::string& path);

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };
const char* split_name(Split s);

struct LabeledPair {
    int drug = 0;    // vocabulary id
    int dis = 0;
    int label = 0;   // 1 iff listed in the label file
    FrequencyClass frequency = FrequencyClass::unknown;
    Split split = Split::train;
};

/// Label-file pairs restricted to the graph vocabularies, with the id sets
/// they define. The label function's domain is labeled_drugs x labeled_dis.
struct LabelCatalog {
    std::vector<int> labeled_drugs;  // sorted vocabulary ids
    std::vector<int> labeled_dis;
    std::unordered_set<std::uint64_t> positives;  // drug<<32 | dis
    std::vector<LabeledPair> positive_pairs;      // deterministic order

    static std::uint64_t key(int drug, int dis) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(drug)) << 32) |
               static_cast<std::uint32_t>(dis);
    }
    bool is_positive(int drug, int dis) const { return positives.count(key(drug, dis)) > 0; }
};

LabelCatalog build_catalog(const AdrLabelFile& labels, const CodeVocabulary& drug_vocab,
                           const CodeVocabulary& dis_vocab);

/// The label function: 1 iff the pair is in the label file. Both ids must lie
/// in the labeled subsets.
int label(int drug, int dis, const LabelCatalog& catalog);

/// Uniform without replacement from the labeled grid minus the positives.
std::vector<LabeledPair> sample_negatives(const LabelCatalog& catalog, std::uint64_t seed);

struct LabeledPairSet {
    std::vector<LabeledPair> pairs;
    std::array<std::size_t, 3> split_sizes() const;
};

/// Assigns whole 3-character disease classes to train/val/test by greedy
/// largest-class-first packing toward the pair-count ratios; class sets are
/// exactly disjoint across splits.
LabeledPairSet split_by_disease_class(std::vector<LabeledPair> pairs, const CodeVocabulary& dis_vocab,
                                      const std::array<double, 3>& ratios, std::uint64_t seed);

/// Permutes the 0/1 labels across pairs; splits and pair identities stay
/// fixed. Used for no-signal null runs.
void shuffle_labels(LabeledPairSet& set, std::uint64_t seed);

/// Split CSV: drug_code,icd10_code,label,frequency,split
void save_split(const LabeledPairSet& set, const CodeVocabulary& drug_vocab,
                const CodeVocabulary& dis_vocab, const std::string& path);
LabeledPairSet load_split(const std::string& path, const CodeVocabulary& drug_vocab,
                          const CodeVocabulary& dis_vocab);

}  // namespace adrgraph
