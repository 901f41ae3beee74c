// dsi command-line entry point.
//
// Subcommands operate on a shared output directory and reuse persisted
// artifacts (datasets, model checkpoints) when the config hash matches, so
// the expensive stages run once:
//
//   dsi_cli gen-data        --preset fig2 --seed 1 --out out/fig2
//   dsi_cli train-diffusion --preset fig2 --seed 1 --out out/fig2
//   dsi_cli train-predictor --preset fig2 --seed 1 --out out/fig2
//   dsi_cli dsi-eval        --preset fig2 --seed 1 --out out/fig2
//   dsi_cli sweep           --preset grid2d --param threshold_k --values 0,0.5,0.9
//   dsi_cli verify-theorem  --preset fig2 --alpha-grid 0.9,0.95,0.99
//   dsi_cli ablation        --preset fig2 --seed 1 --out out/fig2
//
// --config FILE loads a JSON config first; explicit flags win over the file.
// Exit codes: 0 success, 2 config error, 3 numeric failure.
// DSI_LOG={error|info|debug} controls logging.

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dsi/harness.hpp"
#include "dsi/log.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string preset;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t workers = 0;
    bool workers_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON config file");
    cmd->add_option("--preset", flags.preset, "fig2 | grid2d | cdsprites-mini");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--seed", flags.seed, "experiment seed")
        ->each([&](const std::string&) { flags.seed_set = true; });
    cmd->add_option("--workers", flags.workers, "worker threads (0 = all cores)")
        ->each([&](const std::string&) { flags.workers_set = true; });
}

dsi::ExperimentConfig resolve_config(const CommonFlags& flags) {
    dsi::ExperimentConfig cfg = dsi::ExperimentConfig::for_preset(
        flags.preset.empty() ? "fig2" : flags.preset);
    if (!flags.config_path.empty()) cfg.apply_json_file(flags.config_path);
    // flags win over the file
    if (!flags.preset.empty() && !flags.config_path.empty())
        cfg.preset = flags.preset;
    if (flags.seed_set) cfg.seed = flags.seed;
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.workers_set) cfg.workers = flags.workers;
    if (cfg.out_dir.empty()) throw dsi::ConfigError("--out directory required");
    return cfg;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::string tok;
    std::stringstream ss(text);
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stod(tok));
    return out;
}

std::vector<std::string> parse_string_list(const std::string& text) {
    std::vector<std::string> out;
    std::string tok;
    std::stringstream ss(text);
    while (std::getline(ss, tok, ';'))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distribution Shift Inversion experiments"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string param, values_text, set_values_text, k_text, times_text,
        alpha_text;
    std::size_t reps = 3, stride = 0;

    auto* gen = app.add_subcommand("gen-data", "generate and persist datasets");
    add_common(gen, flags);

    auto* traind = app.add_subcommand("train-diffusion",
                                      "train per-domain diffusion models");
    add_common(traind, flags);

    auto* trainp = app.add_subcommand("train-predictor", "train the ERM predictor");
    add_common(trainp, flags);

    auto* eval = app.add_subcommand("dsi-eval", "run DSI on the held-out domain");
    add_common(eval, flags);
    eval->add_option("--k", k_text, "confidence threshold override");
    eval->add_option("--starting-times", times_text,
                     "comma-separated starting time series");
    eval->add_option("--stride", stride, "strided reverse steps K");

    auto* sweep = app.add_subcommand("sweep", "single-parameter sweep");
    add_common(sweep, flags);
    sweep->add_option("--param", param,
                      "starting_time_s | threshold_k | ensemble_set")
        ->required();
    sweep->add_option("--values", values_text, "comma-separated numeric values");
    sweep->add_option("--set-values", set_values_text,
                      "semicolon-separated ensemble sets, e.g. 'original;original+all'");
    sweep->add_option("--reps", reps, "repetitions per value");

    auto* thm = app.add_subcommand("verify-theorem",
                                   "numeric check of the KL bound");
    add_common(thm, flags);
    thm->add_option("--alpha-grid", alpha_text, "comma-separated alphas");

    auto* abl = app.add_subcommand("ablation", "noise-space alignment ablation");
    add_common(abl, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        dsi::ExperimentConfig cfg = resolve_config(flags);
        if (stride != 0) cfg.stride_steps = stride;
        if (!k_text.empty()) cfg.dsi.threshold = std::stod(k_text);
        if (!times_text.empty()) {
            cfg.dsi.starting_times.clear();
            for (double v : parse_double_list(times_text))
                cfg.dsi.starting_times.push_back(static_cast<std::size_t>(v));
        }
        if (!alpha_text.empty()) cfg.theorem.alpha_grid = parse_double_list(alpha_text);

        if (gen->parsed()) {
            const dsi::BenchmarkData data = dsi::generate_benchmark(cfg);
            std::filesystem::create_directories(cfg.out_dir + "/data");
            dsi::write_dataset(cfg.out_dir + "/data/train.dsd", data.train);
            dsi::write_dataset(cfg.out_dir + "/data/test.dsd", data.test);
            std::ofstream(cfg.out_dir + "/data/train.csv")
                << dsi::dataset_csv(data.train);
            std::ofstream(cfg.out_dir + "/data/test.csv")
                << dsi::dataset_csv(data.test);
            std::printf("wrote %zu train / %zu test samples under %s/data\n",
                        data.train.size(), data.test.size(), cfg.out_dir.c_str());
        } else if (traind->parsed() || trainp->parsed()) {
            const dsi::PipelineArtifacts art = dsi::ensure_artifacts(cfg);
            std::printf("models ready under %s/models (predictor train acc %.4f)\n",
                        cfg.out_dir.c_str(), art.predictor_train_accuracy);
        } else if (eval->parsed()) {
            const dsi::PipelineResult res = dsi::run_pipeline(cfg);
            std::printf("base %.4f -> dsi %.4f (preservation %.4f, correction %.4f)\n",
                        res.report.base_accuracy, res.report.dsi_accuracy,
                        res.report.preservation_ratio, res.report.correction_ratio);
            std::printf("eval rows: %s\n", res.eval_csv_path.c_str());
        } else if (sweep->parsed()) {
            dsi::SweepSpec spec;
            spec.parameter = param;
            spec.values = parse_double_list(values_text);
            spec.set_values = parse_string_list(set_values_text);
            spec.repetitions = reps;
            const dsi::SweepResult res = dsi::run_sweep(cfg, spec);
            std::printf("sweep rows: %s\nsummary:   %s\nplot:      %s\n",
                        res.csv_path.c_str(), res.summary_csv_path.c_str(),
                        res.svg_path.c_str());
        } else if (thm->parsed()) {
            const auto reports = dsi::run_verify_theorem(cfg);
            std::fputs(dsi::theorem_reports_text(reports).c_str(), stdout);
            for (const auto& r : reports)
                if (!r.holds) throw dsi::TrainingError("theorem bound violated");
        } else if (abl->parsed()) {
            const dsi::AblationResult res = dsi::run_alignment_ablation(cfg);
            std::printf("total alignment: consistency %.4f, |corr| %.4f\n",
                        res.total_alignment_consistency,
                        std::abs(res.total_alignment_correlation));
            std::printf("no alignment:    consistency %.4f (s=%zu)\n",
                        res.no_alignment_consistency, res.starting_time);
            std::printf("dsi mixing:      consistency %.4f (s=%zu)\n",
                        res.mixing_consistency, res.starting_time);
        }
        return 0;
    } catch (const dsi::ConfigError& e) {
        dsi::log_error(e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        dsi::log_error(e.what());
        return 2;
    } catch (const dsi::TrainingError& e) {
        dsi::log_error(e.what());
        return 3;
    } catch (const std::exception& e) {
        dsi::log_error(e.what());
        return 3;
    }
}
