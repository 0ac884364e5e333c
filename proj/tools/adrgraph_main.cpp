#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "adrgraph/pipeline.hpp"

namespace {

adrgraph::SparsityProfile profile_from_string(const std::string& s) {
    if (s == "low") return adrgraph::SparsityProfile::low;
    if (s == "high") return adrgraph::SparsityProfile::high;
    throw adrgraph::ValidationError("unknown profile: '" + s + "' (expected low or high)");
}

// the config file is applied before CLI11 assigns flag values, so flags
// given on the command line always win
std::string find_config_arg(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) return argv[i + 1];
        if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
    }
    return "";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adrgraph: drug-disease graph pipeline for ADR signal detection"};
    app.set_version_flag("--version", std::string("adrgraph ") + adrgraph::kVersion);
    app.fallthrough();

    adrgraph::PipelineConfig cfg;
    std::string config_path;
    std::string profile;
    std::string model;
    std::string format;

    app.add_option("--config", config_path,
                   "configuration file (INI sections mirror the option groups)");
    app.add_option("--out", cfg.out_dir, "run directory for all artifacts");
    app.add_option("--seed", cfg.seed, "global seed");
    app.add_option("--seeds", cfg.n_seeds, "number of independent train/eval seeds");
    app.add_option("--profile", profile, "edge-forming threshold profile (low|high)");
    app.add_option("--model", model, "model to train/evaluate (lr|nn|gcn|gat|adrgcn)");
    app.add_option("--claims", cfg.claims_path, "claims file (defaults to <out>/claims.csv)");
    app.add_option("--labels", cfg.labels_path, "label TSV (defaults to <out>/labels.tsv)");
    app.add_option("--format", format, "claims file format (csv|jsonl)");
    app.add_option("--threshold", cfg.candidate_threshold, "candidate probability threshold");
    app.add_flag("--discover-all", cfg.discover_all_pairs, "mine candidates over all labeled pairs");

    app.add_option("--synth.patients", cfg.synth.n_patients, "synthetic patient count");
    app.add_option("--synth.drugs", cfg.synth.n_drugs, "synthetic drug count");
    app.add_option("--synth.clusters", cfg.synth.n_drug_clusters, "co-prescription clusters");
    app.add_option("--synth.diseases", cfg.synth.n_diseases, "synthetic disease count");
    app.add_option("--synth.classes", cfg.synth.n_disease_classes, "disease classes (0 = auto)");
    app.add_option("--synth.visits_mean", cfg.synth.n_visits_mean, "mean visits per patient");
    app.add_option("--synth.rules", cfg.synth.n_adr_rules, "planted ADR rules");
    app.add_option("--synth.strength", cfg.synth.adr_strength, "planted rule strength in [0,1]");
    app.add_option("--synth.distractor_rate", cfg.synth.distractor_rate,
                   "rate of correlated distractor positives");

    app.add_option("--skipgram.window", cfg.skipgram.window, "context window size");
    app.add_option("--skipgram.dim", cfg.skipgram.dim, "embedding dimension");
    app.add_option("--skipgram.negatives", cfg.skipgram.negatives_per_positive, "negatives per positive");
    app.add_option("--skipgram.epochs", cfg.skipgram.epochs, "skip-gram epochs");
    app.add_option("--skipgram.lr", cfg.skipgram.learning_rate, "initial skip-gram learning rate");

    app.add_option("--graph.theta", cfg.graph.theta, "Gaussian width (0 = median distance)");
    app.add_option("--graph.drug_threshold", cfg.graph.drug_threshold,
                   "drug edge distance cutoff (0 = profile percentile)");
    app.add_option("--graph.dis_threshold", cfg.graph.dis_threshold,
                   "disease edge distance cutoff (0 = shared percentile)");
    app.add_option("--graph.min_count", cfg.graph.hetero_min_count,
                   "minimum co-occurring patients per drug-disease edge");

    app.add_option("--gnn.layers", cfg.gnn.layers, "GNN layers");
    app.add_option("--gnn.hidden", cfg.gnn.hidden_dim, "hidden dimension");
    app.add_option("--gnn.heads", cfg.gnn.gat_heads, "attention heads per layer");
    app.add_option("--gnn.self_loop_weight", cfg.gnn.self_loop_weight, "self-loop weight");
    app.add_option("--gnn.relu_last", cfg.gnn.relu_last, "apply ReLU after the final layer");

    app.add_option("--train.epochs", cfg.train.epochs, "training epochs");
    app.add_option("--train.lr", cfg.train.learning_rate, "training learning rate");
    app.add_option("--train.patience", cfg.train.early_stop_patience, "early stopping patience");

    for (const auto& name : adrgraph::kStageNames) {
        std::string desc = "run the " + name + " stage";
        if (name == "all") desc = "run every stage in order";
        app.add_subcommand(name, desc);
    }
    app.require_subcommand(1);

    try {
        const std::string pre_config = find_config_arg(argc, argv);
        if (!pre_config.empty()) adrgraph::apply_config_file(cfg, pre_config);
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            return app.exit(e);
        }
        if (!profile.empty()) cfg.graph.sparsity_profile = profile_from_string(profile);
        if (!model.empty()) cfg.train.model = adrgraph::model_type_from_string(model);
        if (!format.empty()) {
            if (format == "csv")
                cfg.claims_format = adrgraph::ClaimsFormat::csv;
            else if (format == "jsonl")
                cfg.claims_format = adrgraph::ClaimsFormat::jsonl;
            else
                throw adrgraph::ValidationError("unknown claims format: '" + format + "'");
        }

        const std::string stage = app.get_subcommands().front()->get_name();
        adrgraph::run_stage(stage, cfg);
        std::cout << "stage '" << stage << "' completed (out: " << cfg.out_dir << ")\n";
        return 0;
    } catch (const adrgraph::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
}
