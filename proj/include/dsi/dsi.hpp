#pragma once

// Distribution Shift Inversion: the adaptive starting-time loop with
// per-domain diffusion transfer, logit-mean ensembling and confidence
// filtering, plus batch evaluation with preservation/correction accounting.

#include <cstdint>
#include <string>
#include <vector>

#include "dsi/diffusion.hpp"
#include "dsi/predictor.hpp"

namespace dsi {

enum class EnsembleFn { LogitMean };

// Elementwise mean of the logits; probabilities recomputed from the mean.
LogitsRecord ensemble(const std::vector<LogitsRecord>& records, EnsembleFn fn);

// Which predictions enter the ensemble: the original sample's and/or a subset
// of the per-domain transformed ones. Empty `domains` means all models.
struct EnsembleSet {
    bool include_original = true;
    std::vector<std::size_t> domains;
    bool all_domains = true;
};

struct DsiConfig {
    std::vector<std::size_t> starting_times = {50, 100, 150, 200, 250};
    double threshold = 0.8;  // k
    ConfidenceKind confidence_kind = ConfidenceKind::MaxClassProbability;
    EnsembleSet ensemble_set;
    bool include_base_precheck = true;
    EnsembleFn ensemble_fn = EnsembleFn::LogitMean;
    // Alg. draws a fresh eps inside the loop; fixed mode reuses the stage-1
    // draw for variance-reduction studies.
    bool fresh_noise_per_stage = true;
    // Keep the per-domain transformed samples on the trace (off by default;
    // the label-consistency diagnostics need them).
    bool keep_transformed = false;

    void validate(std::size_t total_steps, std::size_t model_count) const;
};

struct DsiStageRecord {
    std::size_t stage = 0;          // 1-based
    std::size_t starting_time = 0;  // s_l
    std::vector<Matrix> transformed;  // x_tilde per ensemble domain (opt-in)
    std::vector<LogitsRecord> domain_records;
    LogitsRecord ensembled;
    double confidence_value = 0.0;
    bool accepted = false;
};

struct DsiTrace {
    LogitsRecord base;              // h_0 on the raw sample
    double base_confidence = 0.0;
    std::vector<DsiStageRecord> stages;
    std::size_t accepted_stage = 0;  // 0 = base pre-check, else 1..L
    LogitsRecord final_record;
    std::uint64_t diffusion_steps = 0;   // eps-net evaluations consumed
    std::uint64_t predictor_calls = 0;
};

DsiTrace dsi_predict(const Matrix& x, const Predictor& f,
                     const std::vector<DiffusionModel>& models,
                     const DsiConfig& cfg, const StrideSampler& stride,
                     RngStream& rng);

struct SampleOutcome {
    std::size_t sample_id = 0;
    int true_label = 0;
    std::size_t base_pred = 0;
    std::size_t dsi_pred = 0;
    std::size_t accepted_stage = 0;
    double confidence_value = 0.0;
    std::uint64_t steps_consumed = 0;
};

struct ClassBreakdown {
    std::size_t count = 0;
    std::size_t base_correct = 0;
    std::size_t dsi_correct = 0;
};

struct EvalReport {
    std::size_t sample_count = 0;
    double base_accuracy = 0.0;
    double dsi_accuracy = 0.0;
    double preservation_ratio = 0.0;  // both_correct / base_correct
    double correction_ratio = 0.0;    // only_dsi_correct / base_wrong
    std::size_t both_correct = 0;
    std::size_t only_base_correct = 0;
    std::size_t only_dsi_correct = 0;
    std::size_t both_wrong = 0;
    std::uint64_t total_diffusion_steps = 0;
    std::vector<ClassBreakdown> per_class;
    std::vector<SampleOutcome> rows;

    std::size_t base_correct() const { return both_correct + only_base_correct; }
    std::size_t base_wrong() const { return only_dsi_correct + both_wrong; }
};

EvalReport evaluate_dsi(const Matrix& samples, const std::vector<int>& labels,
                        const Predictor& f, const std::vector<DiffusionModel>& models,
                        const DsiConfig& cfg, const StrideSampler& stride,
                        std::uint64_t seed, std::size_t workers = 1);

// One row per sample plus a trailing summary block.
std::string eval_report_csv(const EvalReport& report);

}  // namespace dsi
