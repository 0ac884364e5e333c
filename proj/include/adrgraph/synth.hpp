#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adrgraph/common.hpp"

namespace adrgraph {

/// Knobs for the seeded synthetic claims corpus. Drugs live in latent
/// co-prescription clusters; disease classes are affiliated with clusters so
/// holdout disease classes still carry recoverable structure.
struct SynthConfig {
    int n_patients = 2000;
    int n_drugs = 60;
    int n_drug_clusters = 6;
    int n_diseases = 60;
    int n_disease_classes = 0;  // 0 = auto: max(10, n_diseases / 4), capped at n_diseases
    double n_visits_mean = 8.0;
    int n_adr_rules = 40;
    double adr_strength = 0.8;      // probability an exposure injects the planted disease next visit
    double distractor_rate = 0.5;   // rate of correlated-but-unplanted positives per same-cluster drug
    std::uint64_t seed = 1;

    int resolved_disease_classes() const;
    void validate() const;
};

struct PlantedRule {
    std::string drug_code;
    std::string disease_code;
    double strength = 0.0;
    bool planted = true;  // false for distractor positives
};

struct SynthOutput {
    std::vector<PlantedRule> rules;       // planted rules only
    std::size_t n_label_rows = 0;         // rules + distractors
    std::size_t n_claim_rows = 0;
};

std::string synth_drug_code(int cluster, int within_cluster);
std::string synth_disease_code(int disease_class, int variant);

/// Writes the claims CSV, label TSV and planted-rule manifest JSON.
/// Byte-identical outputs for identical configs.
SynthOutput generate_corpus(const SynthConfig& config, const std::string& claims_path,
                            const std::string& labels_path, const std::string& manifest_path);

}  // namespace adrgraph
