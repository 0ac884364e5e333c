#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adrgraph/common.hpp"
#include "adrgraph/graph.hpp"
#include "adrgraph/skipgram.hpp"
#include "adrgraph/synth.hpp"
#include "adrgraph/train.hpp"

namespace adrgraph {

extern const char* kVersion;

/// Everything one run needs, mirroring the per-module configs. The global
/// seed feeds synth and skip-gram; training seeds fan out as seed + i.
struct PipelineConfig {
    std::string out_dir = "run";
    std::uint64_t seed = 1;
    int n_seeds = 1;
    std::string claims_path;  // defaults to <out>/claims.csv
    std::string labels_path;  // defaults to <out>/labels.tsv
    ClaimsFormat claims_format = ClaimsFormat::csv;
    double candidate_threshold = 0.97;
    bool discover_all_pairs = false;  // mine candidates over every labeled pair, not just test

    SynthConfig synth;
    SkipgramConfig skipgram;
    GraphConfig graph;
    GnnConfig gnn;
    TrainConfig train;

    std::string resolved_claims_path() const;
    std::string resolved_labels_path() const;
    void validate() const;
};

std::string config_json(const PipelineConfig& config);  // canonical dump, hashed into the manifest

/// Applies an INI-style config file (sections [synth], [skipgram], [graph],
/// [gnn], [train] plus top-level keys). Unknown keys are validation errors.
/// Command-line flags are applied after this and take precedence.
void apply_config_file(PipelineConfig& config, const std::string& path);

extern const std::vector<std::string> kStageNames;  // synth ingest embed graph train eval discover report all

/// Runs one stage (or `all`). Inputs are validated against the run manifest;
/// outputs are written atomically and recorded in it.
void run_stage(const std::string& stage, const PipelineConfig& config);

struct ReportRow {
    std::string model;
    std::string profile;
    int n_seeds = 0;
    Ci95 auroc;
    Ci95 auprc;
};

struct Report {
    std::vector<ReportRow> rows;
    std::size_t n_candidates = 0;
};

/// Consolidates eval_*.json files into report.txt/report.json plus a merged
/// candidates.csv. Pure function of the run directory's artifacts.
Report build_report(const std::string& run_dir);

}  // namespace adrgraph
