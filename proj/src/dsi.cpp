#include "dsi/dsi.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dsi/parallel.hpp"

namespace dsi {

LogitsRecord ensemble(const std::vector<LogitsRecord>& records, EnsembleFn fn) {
    if (fn != EnsembleFn::LogitMean)
        throw std::invalid_argument("ensemble: unknown ensemble function");
    if (records.empty()) throw std::invalid_argument("ensemble: empty record list");
    const std::size_t c = records.front().logits.size();
    std::vector<double> mean(c, 0.0);
    for (const auto& r : records) {
        if (r.logits.size() != c)
            throw std::invalid_argument("ensemble: class count mismatch");
        for (std::size_t j = 0; j < c; ++j) mean[j] += r.logits[j];
    }
    const double inv = 1.0 / static_cast<double>(records.size());
    for (double& v : mean) v *= inv;
    return make_logits_record(std::move(mean));
}

void DsiConfig::validate(std::size_t total_steps, std::size_t model_count) const {
    if (starting_times.empty())
        throw std::invalid_argument("DsiConfig: starting_times must be non-empty");
    std::size_t prev = 0;
    for (std::size_t s : starting_times) {
        if (s == 0 || s <= prev || s > total_steps)
            throw std::invalid_argument(
                "DsiConfig: starting_times must be strictly increasing in 1..T");
        prev = s;
    }
    if (!ensemble_set.include_original && !ensemble_set.all_domains &&
        ensemble_set.domains.empty())
        throw std::invalid_argument("DsiConfig: ensemble set is empty");
    if (!ensemble_set.all_domains)
        for (std::size_t m : ensemble_set.domains)
            if (m >= model_count)
                throw std::invalid_argument("DsiConfig: ensemble domain out of range");
    const std::size_t domains =
        ensemble_set.all_domains ? model_count : ensemble_set.domains.size();
    if (domains > 0 && model_count == 0)
        throw std::invalid_argument("DsiConfig: no diffusion models supplied");
    if (domains == 0 && !ensemble_set.include_original)
        throw std::invalid_argument(
            "DsiConfig: ensemble needs the original or at least one domain");
}

DsiTrace dsi_predict(const Matrix& x, const Predictor& f,
                     const std::vector<DiffusionModel>& models,
                     const DsiConfig& cfg, const StrideSampler& stride,
                     RngStream& rng) {
    if (x.rows() != 1) throw std::invalid_argument("dsi_predict: one sample at a time");
    const std::size_t total_steps =
        models.empty() ? (cfg.starting_times.empty() ? 0 : cfg.starting_times.back())
                       : models.front().schedule.total_steps;
    cfg.validate(total_steps, models.size());
    for (const auto& m : models)
        if (m.data_dim() != x.cols() || f.data_dim() != x.cols())
            throw std::invalid_argument("dsi_predict: data_dim mismatch");

    std::vector<std::size_t> domain_ids;
    if (cfg.ensemble_set.all_domains) {
        domain_ids.resize(models.size());
        for (std::size_t m = 0; m < models.size(); ++m) domain_ids[m] = m;
    } else {
        domain_ids = cfg.ensemble_set.domains;
    }

    DsiTrace trace;
    trace.base = predict(f, x);
    trace.predictor_calls = 1;
    trace.base_confidence = confidence(trace.base, cfg.confidence_kind);
    if (cfg.include_base_precheck && trace.base_confidence > cfg.threshold) {
        trace.accepted_stage = 0;
        trace.final_record = trace.base;
        return trace;
    }

    Matrix eps(1, x.cols());
    bool have_noise = false;
    for (std::size_t l = 0; l < cfg.starting_times.size(); ++l) {
        const std::size_t s = cfg.starting_times[l];
        if (cfg.fresh_noise_per_stage || !have_noise) {
            for (std::size_t j = 0; j < x.cols(); ++j) eps(0, j) = rng.next_normal();
            have_noise = true;
        }

        DsiStageRecord stage;
        stage.stage = l + 1;
        stage.starting_time = s;

        std::vector<LogitsRecord> members;
        if (cfg.ensemble_set.include_original) members.push_back(trace.base);
        for (std::size_t m : domain_ids) {
            const Matrix xhat = forward_noise(x, s, eps, models[m].schedule);
            Matrix xt = reverse_sample_from(models[m], xhat, s, stride, rng);
            trace.diffusion_steps += stride.steps_from(s);
            LogitsRecord h_m = predict(f, xt);
            ++trace.predictor_calls;
            if (cfg.keep_transformed) stage.transformed.push_back(std::move(xt));
            stage.domain_records.push_back(std::move(h_m));
            members.push_back(stage.domain_records.back());
        }
        stage.ensembled = ensemble(members, cfg.ensemble_fn);
        stage.confidence_value = confidence(stage.ensembled, cfg.confidence_kind);
        stage.accepted = stage.confidence_value > cfg.threshold;

        const bool last = l + 1 == cfg.starting_times.size();
        trace.stages.push_back(std::move(stage));
        if (trace.stages.back().accepted || last) {
            trace.stages.back().accepted = true;  // the last prediction is accepted
            trace.accepted_stage = l + 1;
            trace.final_record = trace.stages.back().ensembled;
            return trace;
        }
    }
    throw std::logic_error("dsi_predict: unreachable");
}

EvalReport evaluate_dsi(const Matrix& samples, const std::vector<int>& labels,
                        const Predictor& f, const std::vector<DiffusionModel>& models,
                        const DsiConfig& cfg, const StrideSampler& stride,
                        std::uint64_t seed, std::size_t workers) {
    if (samples.rows() == 0) throw std::invalid_argument("evaluate_dsi: empty test set");
    if (samples.rows() != labels.size())
        throw std::invalid_argument("evaluate_dsi: label count mismatch");

    const std::size_t n = samples.rows();
    EvalReport report;
    report.sample_count = n;
    report.rows.resize(n);
    report.per_class.resize(f.class_count());

    parallel_for(n, workers, [&](std::size_t i) {
        RngStream stream = make_stream(seed, StreamKind::EvalSample, i);
        const Matrix xi = samples.row_copy(i);
        const DsiTrace trace = dsi_predict(xi, f, models, cfg, stride, stream);
        SampleOutcome& row = report.rows[i];
        row.sample_id = i;
        row.true_label = labels[i];
        row.base_pred = trace.base.predicted_class;
        row.dsi_pred = trace.final_record.predicted_class;
        row.accepted_stage = trace.accepted_stage;
        row.confidence_value = trace.accepted_stage == 0
                                   ? trace.base_confidence
                                   : trace.stages.back().confidence_value;
        row.steps_consumed = trace.diffusion_steps;
    });

    std::size_t base_hits = 0, dsi_hits = 0;
    for (const SampleOutcome& row : report.rows) {
        const bool base_ok = static_cast<int>(row.base_pred) == row.true_label;
        const bool dsi_ok = static_cast<int>(row.dsi_pred) == row.true_label;
        base_hits += base_ok;
        dsi_hits += dsi_ok;
        report.both_correct += base_ok && dsi_ok;
        report.only_base_correct += base_ok && !dsi_ok;
        report.only_dsi_correct += !base_ok && dsi_ok;
        report.both_wrong += !base_ok && !dsi_ok;
        report.total_diffusion_steps += row.steps_consumed;
        auto& cls = report.per_class[static_cast<std::size_t>(row.true_label)];
        ++cls.count;
        cls.base_correct += base_ok;
        cls.dsi_correct += dsi_ok;
    }
    report.base_accuracy = static_cast<double>(base_hits) / static_cast<double>(n);
    report.dsi_accuracy = static_cast<double>(dsi_hits) / static_cast<double>(n);
    report.preservation_ratio =
        report.base_correct() == 0
            ? 1.0
            : static_cast<double>(report.both_correct) /
                  static_cast<double>(report.base_correct());
    report.correction_ratio =
        report.base_wrong() == 0
            ? 0.0
            : static_cast<double>(report.only_dsi_correct) /
                  static_cast<double>(report.base_wrong());
    return report;
}

std::string eval_report_csv(const EvalReport& report) {
    std::ostringstream os;
    os.precision(12);
    os << "sample_id,true_label,base_pred,dsi_pred,accepted_stage,confidence,"
          "steps_consumed\n";
    for (const auto& row : report.rows) {
        os << row.sample_id << ',' << row.true_label << ',' << row.base_pred << ','
           << row.dsi_pred << ',' << row.accepted_stage << ',' << row.confidence_value
           << ',' << row.steps_consumed << '\n';
    }
    os << "# summary\n";
    os << "samples," << report.sample_count << '\n';
    os << "base_accuracy," << report.base_accuracy << '\n';
    os << "dsi_accuracy," << report.dsi_accuracy << '\n';
    os << "preservation_ratio," << report.preservation_ratio << '\n';
    os << "correction_ratio," << report.correction_ratio << '\n';
    os << "both_correct," << report.both_correct << '\n';
    os << "only_base_correct," << report.only_base_correct << '\n';
    os << "only_dsi_correct," << report.only_dsi_correct << '\n';
    os << "both_wrong," << report.both_wrong << '\n';
    os << "total_diffusion_steps," << report.total_diffusion_steps << '\n';
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const auto& cls = report.per_class[c];
        os << "class_" << c << "_count," << cls.count << '\n';
        os << "class_" << c << "_base_correct," << cls.base_correct << '\n';
        os << "class_" << c << "_dsi_correct," << cls.dsi_correct << '\n';
    }
    return os.str();
}

}  // namespace dsi
