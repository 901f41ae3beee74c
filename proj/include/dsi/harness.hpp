#pragma once

// Experiment harness: presets, JSON config, staged pipelines with cached
// artifacts, sweep runners, the alignment ablation, and run manifests.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsi/datasets.hpp"
#include "dsi/dsi.hpp"
#include "dsi/theory.hpp"

namespace dsi {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TheoremKnobs {
    std::vector<double> alpha_grid = {0.9, 0.95, 0.99};
    std::size_t n_samples = 20000;
    std::size_t n_jsm = 20000;
    std::size_t stride_steps = 100;
};

struct ExperimentConfig {
    std::string preset = "fig2";  // fig2 | grid2d | cdsprites-mini
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    std::size_t workers = 0;  // 0 = hardware concurrency

    Fig2Config fig2;
    Grid2dConfig grid2d;
    CdspritesConfig cdsprites;

    std::size_t schedule_steps = 1000;
    double sigma_min = 1e-4;
    double sigma_max = 0.02;
    std::vector<std::size_t> diffusion_hidden = {128, 128, 128};
    std::size_t diffusion_train_steps = 4000;
    std::size_t diffusion_batch = 128;
    double diffusion_lr = 1e-3;
    double diffusion_weight_decay = 0.0;

    PredictorTrainConfig predictor;
    DsiConfig dsi;
    std::size_t stride_steps = 250;

    TheoremKnobs theorem;
    std::size_t ablation_s = 200;

    static ExperimentConfig for_preset(const std::string& name);
    void apply_json_file(const std::string& path);
    void apply_json_text(const std::string& text);
    std::string to_json_text() const;  // canonical (sorted keys)

    NoiseSchedule make_schedule() const;
    DiffusionTrainConfig make_diffusion_config() const;
    std::size_t effective_workers() const;
    std::uint64_t config_hash() const;
};

// "original", "all", "original+all", "0,2", "original+1", ...
EnsembleSet parse_ensemble_set(const std::string& text);
std::string ensemble_set_to_string(const EnsembleSet& set);

struct BenchmarkData {
    LabeledDataset train;
    LabeledDataset test;
    std::size_t domain_count = 1;
    // analytic specs where the preset has them (fig2)
    std::optional<GaussianMixtureSpec> source_spec;
    std::optional<GaussianMixtureSpec> target_spec;
};

BenchmarkData generate_benchmark(const ExperimentConfig& cfg);

struct PipelineArtifacts {
    BenchmarkData data;
    std::vector<DiffusionModel> models;  // one per training domain
    Predictor predictor;
    double predictor_train_accuracy = 0.0;
};

// Loads cached models from out_dir when the manifest hash matches, otherwise
// trains and persists them (data, checkpoints, manifest).
PipelineArtifacts ensure_artifacts(const ExperimentConfig& cfg);

struct PipelineResult {
    EvalReport report;
    // fig2 only: fraction of (sample, domain) transforms whose accepted
    // prediction matches the source-MAP label of the transformed point
    double label_consistency = -1.0;
    std::string eval_csv_path;
};

PipelineResult run_pipeline(const ExperimentConfig& cfg);

struct SweepSpec {
    std::string parameter;  // starting_time_s | threshold_k | ensemble_set
    std::vector<double> values;
    std::vector<std::string> set_values;  // ensemble_set sweeps
    std::size_t repetitions = 3;

    std::size_t value_count() const {
        return parameter == "ensemble_set" ? set_values.size() : values.size();
    }
};

struct SweepPoint {
    std::string value_label;
    double value = 0.0;
    std::size_t repetition = 0;
    std::uint64_t seed = 0;
    double base_accuracy = 0.0;
    double dsi_accuracy = 0.0;
    double preservation_ratio = 0.0;
    double correction_ratio = 0.0;
};

struct SweepResult {
    std::vector<SweepPoint> points;  // value-major, repetition-minor
    std::string csv_path;
    std::string summary_csv_path;
    std::string svg_path;
};

SweepResult run_sweep(const ExperimentConfig& cfg, const SweepSpec& spec);

struct AblationResult {
    double total_alignment_correlation = 0.0;  // |phi| between y and output class
    double total_alignment_consistency = 0.0;
    double no_alignment_consistency = 0.0;
    double mixing_consistency = 0.0;
    std::size_t starting_time = 0;
    std::string csv_path;
};

// fig2 preset only: total alignment / no alignment / DSI mixing.
AblationResult run_alignment_ablation(const ExperimentConfig& cfg);

std::vector<TheoremReport> run_verify_theorem(const ExperimentConfig& cfg);

// FNV-1a, used for config hashes and artifact checksums.
std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64_str(const std::string& s);
std::uint64_t file_checksum(const std::string& path);

}  // namespace dsi
