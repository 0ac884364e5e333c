#include "adrgraph/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "adrgraph/claims.hpp"
#include "adrgraph/labels.hpp"

namespace adrgraph {

int SynthConfig::resolved_disease_classes() const {
    if (n_disease_classes > 0) return n_disease_classes;
    return std::min(n_diseases, std::max(10, n_diseases / 4));
}

void SynthConfig::validate() const {
    if (n_patients < 1 || n_drugs < 1 || n_diseases < 1 || n_adr_rules < 1)
        throw ValidationError("synth: counts must be >= 1");
    if (n_visits_mean < 1) throw ValidationError("synth: n_visits_mean must be >= 1");
    if (adr_strength < 0 || adr_strength > 1) throw ValidationError("synth: adr_strength must be in [0,1]");
    if (distractor_rate < 0 || distractor_rate > 1)
        throw ValidationError("synth: distractor_rate must be in [0,1]");
    if (n_drug_clusters < 1 || n_drug_clusters > n_drugs)
        throw ValidationError("synth: n_drug_clusters must be in [1, n_drugs]");
    const int classes = resolved_disease_classes();
    if (classes < 10)
        throw ValidationError("synth: need at least 10 disease classes for class-disjoint splits");
    if (classes > n_diseases)
        throw ValidationError("synth: n_disease_classes cannot exceed n_diseases");
    if (static_cast<long long>(n_adr_rules) > static_cast<long long>(n_drugs) * n_diseases)
        throw ValidationError("synth: more ADR rules than drug-disease pairs");
    if (n_drug_clusters > 2340 || classes > 270 || (n_drugs + n_drug_clusters - 1) / n_drug_clusters > 312)
        throw ValidationError("synth: code space exhausted for the requested counts");
}

std::string synth_drug_code(int cluster, int within_cluster) {
    // cluster fixes ATC levels 1-2; the within index spreads levels 3-5
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%c%02d%c%c%02d", 'A' + cluster % 26, 10 + cluster / 26,
                  'A' + (within_cluster / 12) % 26, 'A' + (within_cluster / 4) % 3,
                  within_cluster % 4 + 1);
    return buf;
}

std::string synth_disease_code(int disease_class, int variant) {
    // chapter letters cycle a small alphabet so level 1 cross-cuts classes;
    // the 3-character category stays unique per class
    char buf[32];
    if (variant == 0)
        std::snprintf(buf, sizeof(buf), "%c%02d", 'A' + disease_class % 3, 10 + disease_class / 3);
    else
        std::snprintf(buf, sizeof(buf), "%c%02d.%d", 'A' + disease_class % 3, 10 + disease_class / 3,
                      variant);
    return buf;
}

namespace {

struct RulePair {
    int drugseq = 0;  // sequential drug index; cluster = drugseq % n_clusters
    int disease = 0;
};

// Rules walk the diseases in a cycle; each rule's drug comes from the cluster
// the disease class is affiliated with, so the planted signal lines up with
// the co-prescription structure and survives disease-class-disjoint splits.
std::vector<RulePair> plan_rules(const SynthConfig& cfg, int n_classes) {
    const int n_clusters = cfg.n_drug_clusters;
    std::vector<RulePair> rules;
    std::unordered_set<std::uint64_t> seen;
    std::vector<int> cluster_cursor(static_cast<std::size_t>(n_clusters), 0);
    long long guard = 0;
    const long long limit = 4LL * cfg.n_drugs * cfg.n_diseases + cfg.n_adr_rules;
    int e = 0;
    while (static_cast<int>(rules.size()) < cfg.n_adr_rules) {
        if (++guard > limit) throw ValidationError("synth: could not place the requested ADR rules");
        const int dis = e % cfg.n_diseases;
        ++e;
        const auto cluster = static_cast<std::size_t>((dis % n_classes) % n_clusters);
        const int cluster_size =
            (cfg.n_drugs - static_cast<int>(cluster) + n_clusters - 1) / n_clusters;
        const int drug = static_cast<int>(cluster) +
                         (cluster_cursor[cluster] % cluster_size) * n_clusters;
        ++cluster_cursor[cluster];
        const std::uint64_t key = (static_cast<std::uint64_t>(drug) << 32) | static_cast<std::uint32_t>(dis);
        if (!seen.insert(key).second) continue;
        rules.push_back(RulePair{drug, dis});
    }
    return rules;
}

}  // namespace

SynthOutput generate_corpus(const SynthConfig& config, const std::string& claims_path,
                            const std::string& labels_path, const std::string& manifest_path) {
    config.validate();
    const int n_classes = config.resolved_disease_classes();
    const int n_clusters = config.n_drug_clusters;

    auto drug_code = [&](int d) { return synth_drug_code(d % n_clusters, d / n_clusters); };
    auto dis_code = [&](int e) { return synth_disease_code(e % n_classes, e / n_classes); };
    auto cluster_of_drug = [&](int d) { return d % n_clusters; };
    auto cluster_of_disease = [&](int e) { return (e % n_classes) % n_clusters; };

    // diseases affiliated with each cluster (their classes map onto it)
    std::vector<std::vector<int>> affiliated(static_cast<std::size_t>(n_clusters));
    for (int e = 0; e < config.n_diseases; ++e)
        affiliated[static_cast<std::size_t>(cluster_of_disease(e))].push_back(e);

    const std::vector<RulePair> rules = plan_rules(config, n_classes);
    std::vector<std::vector<std::pair<int, int>>> rules_by_drug(static_cast<std::size_t>(config.n_drugs));
    for (std::size_t r = 0; r < rules.size(); ++r)
        rules_by_drug[static_cast<std::size_t>(rules[r].drugseq)].emplace_back(static_cast<int>(r),
                                                                               rules[r].disease);

    int base_date = 0;
    parse_iso_date("2008-01-01", base_date);

    Rng rng(config.seed);
    std::ostringstream claims;
    claims << "patient_id,date,code_type,code\n";
    std::size_t n_rows = 0;

    char pid[16];
    for (int p = 0; p < config.n_patients; ++p) {
        std::snprintf(pid, sizeof(pid), "p%06d", p);
        const int home = rng.below_int(n_clusters);

        // persistent prescription set: mostly home-cluster drugs
        const int n_active = 2 + rng.below_int(3);
        std::set<int> active;
        while (static_cast<int>(active.size()) < n_active) {
            if (rng.uniform() < 0.8) {
                const int within = rng.below_int((config.n_drugs - home + n_clusters - 1) / n_clusters);
                active.insert(home + within * n_clusters);
            } else {
                active.insert(rng.below_int(config.n_drugs));
            }
        }
        const std::vector<int> active_list(active.begin(), active.end());

        const int n_visits = rng.poisson_min1(config.n_visits_mean);
        int date = base_date + rng.below_int(3650);
        std::set<int> pending;  // planted diseases scheduled for the next visit
        for (int t = 0; t < n_visits; ++t) {
            std::set<int> rx, dx;
            for (int d : active_list)
                if (rng.uniform() < 0.7) rx.insert(d);
            if (rng.uniform() < 0.15) rx.insert(rng.below_int(config.n_drugs));
            if (rx.empty()) rx.insert(active_list[static_cast<std::size_t>(rng.below_int(n_active))]);

            const int n_dx = 1 + rng.below_int(2);
            for (int k = 0; k < n_dx; ++k) {
                const auto& pool = affiliated[static_cast<std::size_t>(home)];
                if (!pool.empty() && rng.uniform() < 0.85)
                    dx.insert(pool[static_cast<std::size_t>(rng.below_int(static_cast<int>(pool.size())))]);
                else
                    dx.insert(rng.below_int(config.n_diseases));
            }
            for (int e : pending) dx.insert(e);
            pending.clear();
            for (int d : rx)
                for (auto [r, dis] : rules_by_drug[static_cast<std::size_t>(d)])
                    if (rng.uniform() < config.adr_strength) pending.insert(dis);

            const std::string day = format_iso_date(date);
            for (int d : rx) {
                claims << pid << ',' << day << ",RX," << drug_code(d) << '\n';
                ++n_rows;
            }
            for (int e : dx) {
                claims << pid << ',' << day << ",DX," << dis_code(e) << '\n';
                ++n_rows;
            }
            date += 1 + rng.below_int(60);
        }
    }
    atomic_write(claims_path, claims.str());

    // label file: planted rules plus correlated same-cluster distractors
    Rng label_rng(config.seed + 1000003ULL);
    std::ostringstream labels;
    labels << "atc_code\ticd10_code\tfrequency\n";
    std::size_t n_label_rows = 0;
    std::set<std::pair<int, int>> labeled;
    SynthOutput out;
    static const char* kRuleFreq[3] = {"common", "rare", "post_marketing"};
    for (std::size_t r = 0; r < rules.size(); ++r) {
        labeled.emplace(rules[r].drugseq, rules[r].disease);
        labels << drug_code(rules[r].drugseq) << '\t' << dis_code(rules[r].disease) << '\t'
               << kRuleFreq[r % 3] << '\n';
        ++n_label_rows;
        out.rules.push_back(PlantedRule{drug_code(rules[r].drugseq), dis_code(rules[r].disease),
                                        config.adr_strength, true});
    }
    nlohmann::json distractors = nlohmann::json::array();
    for (std::size_t r = 0; r < rules.size(); ++r) {
        const int cluster = cluster_of_drug(rules[r].drugseq);
        for (int d = cluster; d < config.n_drugs; d += n_clusters) {
            if (d == rules[r].drugseq) continue;
            if (label_rng.uniform() >= config.distractor_rate) continue;
            if (!labeled.emplace(d, rules[r].disease).second) continue;
            labels << drug_code(d) << '\t' << dis_code(rules[r].disease) << "\tunknown\n";
            ++n_label_rows;
            distractors.push_back({{"drug", drug_code(d)}, {"disease", dis_code(rules[r].disease)}});
        }
    }
    atomic_write(labels_path, labels.str());
    out.n_label_rows = n_label_rows;
    out.n_claim_rows = n_rows;

    nlohmann::json manifest;
    manifest["config"] = {{"n_patients", config.n_patients},
                          {"n_drugs", config.n_drugs},
                          {"n_drug_clusters", n_clusters},
                          {"n_diseases", config.n_diseases},
                          {"n_disease_classes", n_classes},
                          {"n_visits_mean", config.n_visits_mean},
                          {"n_adr_rules", config.n_adr_rules},
                          {"adr_strength", config.adr_strength},
                          {"distractor_rate", config.distractor_rate},
                          {"seed", config.seed}};
    nlohmann::json jrules = nlohmann::json::array();
    for (const auto& r : out.rules)
        jrules.push_back({{"drug", r.drug_code}, {"disease", r.disease_code}, {"strength", r.strength},
                          {"planted", true}});
    manifest["planted_rules"] = jrules;
    manifest["distractor_positives"] = distractors;
    atomic_write(manifest_path, manifest.dump(2) + "\n");
    return out;
}

}  // namespace adrgraph
