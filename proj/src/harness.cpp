#include "dsi/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dsi/log.hpp"
#include "dsi/parallel.hpp"
#include "dsi/svg.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dsi {

// ---- config -----------------------------------------------------------------

ExperimentConfig ExperimentConfig::for_preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.preset = name;
    if (name == "fig2") {
        // the base pre-check is off in this preset so every sample actually
        // passes through the transformation (the literal Alg. behavior)
        cfg.dsi.include_base_precheck = false;
        cfg.dsi.threshold = 0.8;
        cfg.dsi.starting_times = {50, 100, 150, 200, 250};
        cfg.predictor.hidden_dims = {64, 64};
        cfg.predictor.max_steps = 2000;
    } else if (name == "grid2d") {
        cfg.dsi.include_base_precheck = false;
        cfg.dsi.threshold = 0.95;
        cfg.dsi.starting_times = {100, 200, 300};
        cfg.predictor.hidden_dims = {64, 64};
        cfg.predictor.max_steps = 1500;
    } else if (name == "cdsprites-mini") {
        cfg.diffusion_hidden = {384, 384, 384};
        cfg.diffusion_train_steps = 12000;
        cfg.diffusion_batch = 128;
        cfg.predictor.hidden_dims = {64, 64};
        cfg.predictor.max_steps = 4000;
        cfg.predictor.early_stop_train_accuracy = 0.99;
        cfg.predictor.early_stop_check_every = 25;
        cfg.dsi.include_base_precheck = false;
        cfg.dsi.threshold = 0.95;
        cfg.dsi.starting_times = {150, 250, 350};
    } else {
        throw ConfigError("unknown preset: " + name);
    }
    return cfg;
}

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json dsi_cfg_to_json(const DsiConfig& d) {
    return json{{"starting_times", d.starting_times},
                {"threshold", d.threshold},
                {"confidence", confidence_kind_name(d.confidence_kind)},
                {"ensemble_set", ensemble_set_to_string(d.ensemble_set)},
                {"include_base_precheck", d.include_base_precheck},
                {"fresh_noise_per_stage", d.fresh_noise_per_stage}};
}

void dsi_cfg_from_json(const json& j, DsiConfig& d) {
    maybe(j, "starting_times", d.starting_times);
    maybe(j, "threshold", d.threshold);
    if (j.contains("confidence"))
        d.confidence_kind = confidence_kind_from_name(j.at("confidence"));
    if (j.contains("ensemble_set"))
        d.ensemble_set = parse_ensemble_set(j.at("ensemble_set"));
    maybe(j, "include_base_precheck", d.include_base_precheck);
    maybe(j, "fresh_noise_per_stage", d.fresh_noise_per_stage);
}

}  // namespace

std::string ExperimentConfig::to_json_text() const {
    json j;
    j["preset"] = preset;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["workers"] = workers;
    j["fig2"] = {{"source_mean", fig2.source_mean}, {"source_sd", fig2.source_sd},
                 {"target_mean", fig2.target_mean}, {"target_sd", fig2.target_sd},
                 {"n_train", fig2.n_train},         {"n_test", fig2.n_test}};
    j["grid2d"] = {{"domains", grid2d.domains},
                   {"class_count", grid2d.class_count},
                   {"class_radius", grid2d.class_radius},
                   {"cluster_sd", grid2d.cluster_sd},
                   {"domain_shift", grid2d.domain_shift},
                   {"domain_rotation", grid2d.domain_rotation},
                   {"holdout_shift", grid2d.holdout_shift},
                   {"holdout_rotation", grid2d.holdout_rotation},
                   {"n_per_domain", grid2d.n_per_domain},
                   {"n_test", grid2d.n_test}};
    j["cdsprites"] = {{"grid", cdsprites.grid},
                      {"domains", cdsprites.domains},
                      {"train_correlation", cdsprites.train_correlation},
                      {"n_per_domain", cdsprites.n_per_domain},
                      {"n_test", cdsprites.n_test},
                      {"pixel_noise", cdsprites.pixel_noise},
                      {"hue_jitter", cdsprites.hue_jitter}};
    j["diffusion"] = {{"schedule_steps", schedule_steps},
                      {"sigma_min", sigma_min},
                      {"sigma_max", sigma_max},
                      {"hidden", diffusion_hidden},
                      {"train_steps", diffusion_train_steps},
                      {"batch", diffusion_batch},
                      {"learning_rate", diffusion_lr},
                      {"weight_decay", diffusion_weight_decay}};
    j["predictor"] = {{"hidden", predictor.hidden_dims},
                      {"activation", predictor.activation == Activation::Tanh
                                         ? "tanh"
                                         : "relu"},
                      {"max_steps", predictor.max_steps},
                      {"batch", predictor.batch_size},
                      {"learning_rate", predictor.learning_rate},
                      {"weight_decay", predictor.weight_decay},
                      {"early_stop_train_accuracy",
                       predictor.early_stop_train_accuracy},
                      {"early_stop_check_every", predictor.early_stop_check_every}};
    j["dsi"] = dsi_cfg_to_json(dsi);
    j["stride_steps"] = stride_steps;
    j["theorem"] = {{"alpha_grid", theorem.alpha_grid},
                    {"n_samples", theorem.n_samples},
                    {"n_jsm", theorem.n_jsm},
                    {"stride_steps", theorem.stride_steps}};
    j["ablation_s"] = ablation_s;
    return j.dump(2) + "\n";
}

void ExperimentConfig::apply_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config JSON parse error: ") + e.what());
    }
    try {
        if (j.contains("preset")) *this = for_preset(j.at("preset"));
        maybe(j, "seed", seed);
        maybe(j, "out_dir", out_dir);
        maybe(j, "workers", workers);
        if (j.contains("fig2")) {
            const json& f = j["fig2"];
            maybe(f, "source_mean", fig2.source_mean);
            maybe(f, "source_sd", fig2.source_sd);
            maybe(f, "target_mean", fig2.target_mean);
            maybe(f, "target_sd", fig2.target_sd);
            maybe(f, "n_train", fig2.n_train);
            maybe(f, "n_test", fig2.n_test);
        }
        if (j.contains("grid2d")) {
            const json& g = j["grid2d"];
            maybe(g, "domains", grid2d.domains);
            maybe(g, "class_count", grid2d.class_count);
            maybe(g, "class_radius", grid2d.class_radius);
            maybe(g, "cluster_sd", grid2d.cluster_sd);
            maybe(g, "domain_shift", grid2d.domain_shift);
            maybe(g, "domain_rotation", grid2d.domain_rotation);
            maybe(g, "holdout_shift", grid2d.holdout_shift);
            maybe(g, "holdout_rotation", grid2d.holdout_rotation);
            maybe(g, "n_per_domain", grid2d.n_per_domain);
            maybe(g, "n_test", grid2d.n_test);
        }
        if (j.contains("cdsprites")) {
            const json& c = j["cdsprites"];
            maybe(c, "grid", cdsprites.grid);
            maybe(c, "domains", cdsprites.domains);
            maybe(c, "train_correlation", cdsprites.train_correlation);
            maybe(c, "n_per_domain", cdsprites.n_per_domain);
            maybe(c, "n_test", cdsprites.n_test);
            maybe(c, "pixel_noise", cdsprites.pixel_noise);
            maybe(c, "hue_jitter", cdsprites.hue_jitter);
        }
        if (j.contains("diffusion")) {
            const json& d = j["diffusion"];
            maybe(d, "schedule_steps", schedule_steps);
            maybe(d, "sigma_min", sigma_min);
            maybe(d, "sigma_max", sigma_max);
            maybe(d, "hidden", diffusion_hidden);
            maybe(d, "train_steps", diffusion_train_steps);
            maybe(d, "batch", diffusion_batch);
            maybe(d, "learning_rate", diffusion_lr);
            maybe(d, "weight_decay", diffusion_weight_decay);
        }
        if (j.contains("predictor")) {
            const json& p = j["predictor"];
            maybe(p, "hidden", predictor.hidden_dims);
            if (p.contains("activation"))
                predictor.activation = p.at("activation") == "relu"
                                           ? Activation::Relu
                                           : Activation::Tanh;
            maybe(p, "max_steps", predictor.max_steps);
            maybe(p, "batch", predictor.batch_size);
            maybe(p, "learning_rate", predictor.learning_rate);
            maybe(p, "weight_decay", predictor.weight_decay);
            maybe(p, "early_stop_train_accuracy",
                  predictor.early_stop_train_accuracy);
            maybe(p, "early_stop_check_every", predictor.early_stop_check_every);
        }
        if (j.contains("dsi")) dsi_cfg_from_json(j["dsi"], dsi);
        maybe(j, "stride_steps", stride_steps);
        if (j.contains("theorem")) {
            const json& t = j["theorem"];
            maybe(t, "alpha_grid", theorem.alpha_grid);
            maybe(t, "n_samples", theorem.n_samples);
            maybe(t, "n_jsm", theorem.n_jsm);
            maybe(t, "stride_steps", theorem.stride_steps);
        }
        maybe(j, "ablation_s", ablation_s);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
}

void ExperimentConfig::apply_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    apply_json_text(ss.str());
}

NoiseSchedule ExperimentConfig::make_schedule() const {
    return NoiseSchedule::linear(schedule_steps, sigma_min, sigma_max);
}

DiffusionTrainConfig ExperimentConfig::make_diffusion_config() const {
    DiffusionTrainConfig d;
    d.schedule = make_schedule();
    d.hidden_dims = diffusion_hidden;
    d.steps = diffusion_train_steps;
    d.batch_size = diffusion_batch;
    d.learning_rate = diffusion_lr;
    d.weight_decay = diffusion_weight_decay;
    return d;
}

std::size_t ExperimentConfig::effective_workers() const {
    return workers == 0 ? default_workers() : workers;
}

std::uint64_t ExperimentConfig::config_hash() const {
    // out_dir and workers do not affect results; hash the rest
    ExperimentConfig canon = *this;
    canon.out_dir = "";
    canon.workers = 0;
    return fnv1a64_str(canon.to_json_text());
}

EnsembleSet parse_ensemble_set(const std::string& text) {
    EnsembleSet set;
    set.include_original = false;
    set.all_domains = false;
    set.domains.clear();
    std::stringstream ss(text);
    std::string part;
    bool any = false;
    while (std::getline(ss, part, '+')) {
        if (part == "original") {
            set.include_original = true;
        } else if (part == "all") {
            set.all_domains = true;
        } else if (!part.empty()) {
            std::stringstream ds(part);
            std::string idx;
            while (std::getline(ds, idx, ','))
                set.domains.push_back(static_cast<std::size_t>(std::stoul(idx)));
        }
        any = true;
    }
    if (!any) throw ConfigError("empty ensemble set spec");
    return set;
}

std::string ensemble_set_to_string(const EnsembleSet& set) {
    std::string out;
    if (set.include_original) out = "original";
    if (set.all_domains) {
        out += out.empty() ? "all" : "+all";
    } else if (!set.domains.empty()) {
        std::string idx;
        for (std::size_t i = 0; i < set.domains.size(); ++i)
            idx += (i ? "," : "") + std::to_string(set.domains[i]);
        out += out.empty() ? idx : "+" + idx;
    }
    return out;
}

// ---- hashing / manifest ------------------------------------------------------

std::uint64_t fnv1a64(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t fnv1a64_str(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::uint64_t file_checksum(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("file_checksum: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return fnv1a64_str(ss.str());
}

// ---- benchmark generation ------------------------------------------------------

BenchmarkData generate_benchmark(const ExperimentConfig& cfg) {
    BenchmarkData data;
    if (cfg.preset == "fig2") {
        Fig2Data f = gen_fig2_1d(cfg.fig2, cfg.seed);
        data.train = std::move(f.train);
        data.test = std::move(f.test);
        data.domain_count = 1;
        data.source_spec = std::move(f.source);
        data.target_spec = std::move(f.target);
    } else if (cfg.preset == "grid2d") {
        Grid2dData g = gen_multidomain_2d(cfg.grid2d, cfg.seed);
        data.train = std::move(g.train);
        data.test = std::move(g.test);
        data.domain_count = cfg.grid2d.domains;
    } else if (cfg.preset == "cdsprites-mini") {
        CdspritesData c = gen_mini_cdsprites(cfg.cdsprites, cfg.seed);
        data.train = std::move(c.train);
        data.test = std::move(c.test);
        data.domain_count = cfg.cdsprites.domains;
    } else {
        throw ConfigError("unknown preset: " + cfg.preset);
    }
    return data;
}

// ---- artifacts ----------------------------------------------------------------

namespace {

Matrix domain_rows(const LabeledDataset& ds, int domain) {
    std::size_t count = 0;
    for (int d : ds.domain_ids) count += d == domain;
    Matrix out(count, ds.dim());
    std::size_t r = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.domain_ids[i] != domain) continue;
        for (std::size_t j = 0; j < ds.dim(); ++j) out(r, j) = ds.samples(i, j);
        ++r;
    }
    return out;
}

std::string model_path(const ExperimentConfig& cfg, std::size_t domain) {
    return cfg.out_dir + "/models/diffusion_" + std::to_string(domain) + ".ckpt";
}

std::string predictor_path(const ExperimentConfig& cfg) {
    return cfg.out_dir + "/models/predictor.ckpt";
}

json read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) return json::object();
    try {
        json j;
        is >> j;
        return j;
    } catch (const json::exception&) {
        return json::object();
    }
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    const std::string text = j.dump(2) + "\n";
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace

PipelineArtifacts ensure_artifacts(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir + "/data");
    fs::create_directories(cfg.out_dir + "/models");

    PipelineArtifacts art;
    try {
        art.data = generate_benchmark(cfg);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("stage gen-data failed: ") + e.what());
    }
    write_dataset(cfg.out_dir + "/data/train.dsd", art.data.train);
    write_dataset(cfg.out_dir + "/data/test.dsd", art.data.test);

    const std::string manifest_path = cfg.out_dir + "/manifest.json";
    json manifest = read_manifest(manifest_path);
    const std::string hash = std::to_string(cfg.config_hash());
    const bool cache_ok = manifest.value("config_hash", "") == hash;

    bool models_cached = cache_ok;
    for (std::size_t m = 0; m < art.data.domain_count && models_cached; ++m)
        models_cached = fs::exists(model_path(cfg, m));
    const bool predictor_cached = cache_ok && fs::exists(predictor_path(cfg));

    art.models.resize(art.data.domain_count);
    if (models_cached) {
        log_info("loading cached diffusion models from " + cfg.out_dir);
        for (std::size_t m = 0; m < art.data.domain_count; ++m)
            art.models[m] = load_diffusion_model(model_path(cfg, m));
    } else {
        log_info("training " + std::to_string(art.data.domain_count) +
                 " diffusion model(s)");
        const DiffusionTrainConfig dcfg = cfg.make_diffusion_config();
        std::vector<std::string> failures(art.data.domain_count);
        parallel_for(art.data.domain_count,
                     std::min(cfg.effective_workers(), art.data.domain_count),
                     [&](std::size_t m) {
                         try {
                             const Matrix rows =
                                 domain_rows(art.data.train, static_cast<int>(m));
                             RngStream rng = make_stream(cfg.seed,
                                                         StreamKind::DiffusionTrain, m);
                             art.models[m] = train_diffusion(
                                 rows, dcfg, "domain-" + std::to_string(m), rng);
                         } catch (const std::exception& e) {
                             failures[m] = e.what();
                         }
                     });
        for (std::size_t m = 0; m < failures.size(); ++m)
            if (!failures[m].empty())
                throw TrainingError("stage train-diffusion failed on domain " +
                                    std::to_string(m) + ": " + failures[m]);
        for (std::size_t m = 0; m < art.data.domain_count; ++m)
            save_diffusion_model(art.models[m], model_path(cfg, m));
    }

    if (predictor_cached) {
        art.predictor = load_predictor(predictor_path(cfg));
        art.predictor_train_accuracy = manifest.value("predictor_train_accuracy", -1.0);
    } else {
        log_info("training predictor");
        RngStream rng = make_stream(cfg.seed, StreamKind::PredictorTrain, 0);
        try {
            PredictorTrainResult res =
                train_predictor(art.data.train.samples, art.data.train.labels,
                                art.data.train.class_count, cfg.predictor, rng);
            art.predictor = std::move(res.predictor);
            art.predictor_train_accuracy = res.train_accuracy;
        } catch (const TrainingError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("stage train-predictor failed: ") + e.what());
        }
        save_predictor(art.predictor, predictor_path(cfg));
    }

    // refresh manifest
    json arts = json::object();
    arts["data/train.dsd"] =
        std::to_string(file_checksum(cfg.out_dir + "/data/train.dsd"));
    arts["data/test.dsd"] =
        std::to_string(file_checksum(cfg.out_dir + "/data/test.dsd"));
    for (std::size_t m = 0; m < art.data.domain_count; ++m)
        arts["models/diffusion_" + std::to_string(m) + ".ckpt"] =
            std::to_string(file_checksum(model_path(cfg, m)));
    arts["models/predictor.ckpt"] =
        std::to_string(file_checksum(predictor_path(cfg)));
    manifest["config_hash"] = hash;
    manifest["seed"] = cfg.seed;
    manifest["artifacts"] = arts;
    manifest["predictor_train_accuracy"] = art.predictor_train_accuracy;
    write_json_file(manifest_path, manifest);
    write_text_file(cfg.out_dir + "/config.json", cfg.to_json_text());
    return art;
}

// ---- pipeline -----------------------------------------------------------------

namespace {

// fig2 diagnostics: rerun the per-sample traces (same streams as the report)
// keeping transformed points, and score predictions against the source-MAP
// label of where each transform landed.
double fig2_label_consistency(const ExperimentConfig& cfg,
                              const PipelineArtifacts& art,
                              const StrideSampler& stride) {
    const GaussianMixtureSpec& src = *art.data.source_spec;
    DsiConfig traced = cfg.dsi;
    traced.keep_transformed = true;
    std::vector<std::size_t> hits(art.data.test.size(), 0);
    std::vector<std::size_t> totals(art.data.test.size(), 0);
    parallel_for(art.data.test.size(), cfg.effective_workers(), [&](std::size_t i) {
        RngStream stream = make_stream(cfg.seed, StreamKind::EvalSample, i);
        const Matrix xi = art.data.test.samples.row_copy(i);
        const DsiTrace trace =
            dsi_predict(xi, art.predictor, art.models, traced, stride, stream);
        if (trace.accepted_stage == 0) return;  // nothing was transformed
        const DsiStageRecord& st = trace.stages.back();
        for (const Matrix& xt : st.transformed) {
            // source-MAP label: which class-conditional explains the landing
            // point best (fig2 components are the two classes)
            double best = -1e300;
            std::size_t best_c = 0;
            for (std::size_t c = 0; c < src.components.size(); ++c) {
                GaussianMixtureSpec comp;
                comp.components.push_back(src.components[c]);
                comp.components.back().weight = 1.0;
                const double ld = comp.log_density(xt.data());
                if (ld > best) {
                    best = ld;
                    best_c = c;
                }
            }
            hits[i] += trace.final_record.predicted_class == best_c;
            ++totals[i];
        }
    });
    std::size_t hit = 0, total = 0;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        hit += hits[i];
        total += totals[i];
    }
    return total == 0 ? -1.0 : static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& cfg) {
    const PipelineArtifacts art = ensure_artifacts(cfg);
    const StrideSampler stride =
        StrideSampler::linear(art.models.front().schedule, cfg.stride_steps);

    log_info("evaluating DSI on " + std::to_string(art.data.test.size()) +
             " held-out samples");
    PipelineResult result;
    result.report = evaluate_dsi(art.data.test.samples, art.data.test.labels,
                                 art.predictor, art.models, cfg.dsi, stride, cfg.seed,
                                 cfg.effective_workers());
    if (cfg.preset == "fig2" && art.data.source_spec)
        result.label_consistency = fig2_label_consistency(cfg, art, stride);

    fs::create_directories(cfg.out_dir + "/eval");
    result.eval_csv_path = cfg.out_dir + "/eval/eval.csv";
    write_text_file(result.eval_csv_path, eval_report_csv(result.report));

    json manifest = read_manifest(cfg.out_dir + "/manifest.json");
    json summary;
    summary["base_accuracy"] = result.report.base_accuracy;
    summary["dsi_accuracy"] = result.report.dsi_accuracy;
    summary["preservation_ratio"] = result.report.preservation_ratio;
    summary["correction_ratio"] = result.report.correction_ratio;
    summary["label_consistency"] = result.label_consistency;
    summary["total_diffusion_steps"] = result.report.total_diffusion_steps;
    manifest["summary"] = summary;
    manifest["artifacts"]["eval/eval.csv"] =
        std::to_string(file_checksum(result.eval_csv_path));
    write_json_file(cfg.out_dir + "/manifest.json", manifest);
    return result;
}

// ---- sweeps ---------------------------------------------------------------------

SweepResult run_sweep(const ExperimentConfig& cfg, const SweepSpec& spec) {
    if (spec.repetitions < 1) throw ConfigError("sweep: repetitions must be >= 1");
    if (spec.value_count() == 0) throw ConfigError("sweep: no values to sweep");
    const bool is_set_sweep = spec.parameter == "ensemble_set";
    if (spec.parameter != "starting_time_s" && spec.parameter != "threshold_k" &&
        !is_set_sweep)
        throw ConfigError("sweep: unknown parameter " + spec.parameter);

    SweepResult result;
    // one artifact build per repetition; values are evaluation-time knobs
    std::vector<PipelineArtifacts> reps;
    std::vector<ExperimentConfig> rep_cfgs;
    for (std::size_t r = 0; r < spec.repetitions; ++r) {
        ExperimentConfig rc = cfg;
        rc.seed = cfg.seed + r;
        rc.out_dir = cfg.out_dir + "/sweep_rep" + std::to_string(r);
        reps.push_back(ensure_artifacts(rc));
        rep_cfgs.push_back(std::move(rc));
    }

    for (std::size_t v = 0; v < spec.value_count(); ++v) {
        for (std::size_t r = 0; r < spec.repetitions; ++r) {
            ExperimentConfig rc = rep_cfgs[r];
            SweepPoint point;
            point.repetition = r;
            point.seed = rc.seed;
            if (spec.parameter == "starting_time_s") {
                point.value = spec.values[v];
                point.value_label = std::to_string(static_cast<long long>(point.value));
                rc.dsi.starting_times = {
                    static_cast<std::size_t>(spec.values[v])};
            } else if (spec.parameter == "threshold_k") {
                point.value = spec.values[v];
                point.value_label = std::to_string(point.value);
                rc.dsi.threshold = point.value;
            } else {
                point.value = static_cast<double>(v);
                point.value_label = spec.set_values[v];
                rc.dsi.ensemble_set = parse_ensemble_set(spec.set_values[v]);
            }
            const StrideSampler stride = StrideSampler::linear(
                reps[r].models.front().schedule, rc.stride_steps);
            const EvalReport rep = evaluate_dsi(
                reps[r].data.test.samples, reps[r].data.test.labels,
                reps[r].predictor, reps[r].models, rc.dsi, stride, rc.seed,
                rc.effective_workers());
            point.base_accuracy = rep.base_accuracy;
            point.dsi_accuracy = rep.dsi_accuracy;
            point.preservation_ratio = rep.preservation_ratio;
            point.correction_ratio = rep.correction_ratio;
            result.points.push_back(std::move(point));
        }
    }

    fs::create_directories(cfg.out_dir + "/sweep");
    std::ostringstream csv;
    csv.precision(12);
    csv << "value,repetition,seed,base_accuracy,dsi_accuracy,preservation_ratio,"
           "correction_ratio\n";
    for (const auto& p : result.points)
        csv << p.value_label << ',' << p.repetition << ',' << p.seed << ','
            << p.base_accuracy << ',' << p.dsi_accuracy << ','
            << p.preservation_ratio << ',' << p.correction_ratio << '\n';
    result.csv_path = cfg.out_dir + "/sweep/sweep_" + spec.parameter + ".csv";
    write_text_file(result.csv_path, csv.str());

    // per-value mean +- std over repetitions
    std::ostringstream sum;
    sum.precision(12);
    sum << "value,mean_dsi_accuracy,std_dsi_accuracy,mean_base_accuracy\n";
    PlotSeries dsi_series{"dsi", {}, {}, {}};
    PlotSeries base_series{"base", {}, {}, {}};
    for (std::size_t v = 0; v < spec.value_count(); ++v) {
        double mean = 0.0, base_mean = 0.0;
        for (std::size_t r = 0; r < spec.repetitions; ++r) {
            mean += result.points[v * spec.repetitions + r].dsi_accuracy;
            base_mean += result.points[v * spec.repetitions + r].base_accuracy;
        }
        mean /= static_cast<double>(spec.repetitions);
        base_mean /= static_cast<double>(spec.repetitions);
        double var = 0.0;
        for (std::size_t r = 0; r < spec.repetitions; ++r) {
            const double d =
                result.points[v * spec.repetitions + r].dsi_accuracy - mean;
            var += d * d;
        }
        const double sd = spec.repetitions > 1
                              ? std::sqrt(var / static_cast<double>(spec.repetitions - 1))
                              : 0.0;
        sum << result.points[v * spec.repetitions].value_label << ',' << mean << ','
            << sd << ',' << base_mean << '\n';
        const double x = is_set_sweep ? static_cast<double>(v)
                                      : result.points[v * spec.repetitions].value;
        dsi_series.x.push_back(x);
        dsi_series.y.push_back(mean);
        dsi_series.y_std.push_back(sd);
        base_series.x.push_back(x);
        base_series.y.push_back(base_mean);
    }
    result.summary_csv_path =
        cfg.out_dir + "/sweep/sweep_" + spec.parameter + "_summary.csv";
    write_text_file(result.summary_csv_path, sum.str());

    result.svg_path = cfg.out_dir + "/sweep/sweep_" + spec.parameter + ".svg";
    emit_plot({dsi_series, base_series},
              {"accuracy vs " + spec.parameter, spec.parameter, "accuracy"},
              result.svg_path);
    return result;
}

// ---- alignment ablation ----------------------------------------------------------

AblationResult run_alignment_ablation(const ExperimentConfig& cfg) {
    if (cfg.preset != "fig2")
        throw ConfigError("ablation: requires the fig2 preset");
    const PipelineArtifacts art = ensure_artifacts(cfg);
    const DiffusionModel& model = art.models.front();
    const StrideSampler stride =
        StrideSampler::linear(model.schedule, cfg.stride_steps);
    const GaussianMixtureSpec& src = *art.data.source_spec;
    const std::size_t T = model.schedule.total_steps;
    const std::size_t s = cfg.ablation_s;
    if (s == 0 || s > T) throw ConfigError("ablation: starting time out of range");

    const Matrix& xs = art.data.test.samples;
    const std::vector<int>& ys = art.data.test.labels;
    const std::size_t n = xs.rows();

    auto map_label = [&](double x) {
        // class-conditional MAP under the source spec (component = class)
        double best = -1e300;
        std::size_t best_c = 0;
        for (std::size_t c = 0; c < src.components.size(); ++c) {
            GaussianMixtureSpec comp;
            comp.components.push_back(src.components[c]);
            comp.components.back().weight = 1.0;
            const double ld = comp.log_density(&x);
            if (ld > best) {
                best = ld;
                best_c = c;
            }
        }
        return static_cast<int>(best_c);
    };

    std::vector<int> total_lab(n), noalign_lab(n), mix_lab(n);
    parallel_for(n, cfg.effective_workers(), [&](std::size_t i) {
        RngStream rng = make_stream(cfg.seed, StreamKind::Sampling, i);
        const Matrix xi = xs.row_copy(i);
        // total alignment: pure noise in, full reverse pass
        Matrix z(1, 1);
        z(0, 0) = rng.next_normal();
        const Matrix xt_total = reverse_sample_from(model, z, T, stride, rng);
        total_lab[i] = map_label(xt_total(0, 0));
        // no alignment: the raw OoD sample pretends to be x_s
        const Matrix xt_raw = reverse_sample_from(model, xi, s, stride, rng);
        noalign_lab[i] = map_label(xt_raw(0, 0));
        // DSI mixing
        Matrix eps(1, 1);
        eps(0, 0) = rng.next_normal();
        const Matrix xhat = forward_noise(xi, s, eps, model.schedule);
        const Matrix xt_mix = reverse_sample_from(model, xhat, s, stride, rng);
        mix_lab[i] = map_label(xt_mix(0, 0));
    });

    auto consistency = [&](const std::vector<int>& lab) {
        std::size_t hit = 0;
        for (std::size_t i = 0; i < n; ++i) hit += lab[i] == ys[i];
        return static_cast<double>(hit) / static_cast<double>(n);
    };
    // phi coefficient between the binary input label and output class
    auto phi_corr = [&](const std::vector<int>& lab) {
        double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (ys[i] == 1 && lab[i] == 1) ++n11;
            else if (ys[i] == 1 && lab[i] == 0) ++n10;
            else if (ys[i] == 0 && lab[i] == 1) ++n01;
            else ++n00;
        }
        const double denom = std::sqrt((n11 + n10) * (n01 + n00) * (n11 + n01) *
                                       (n10 + n00));
        return denom == 0.0 ? 0.0 : (n11 * n00 - n10 * n01) / denom;
    };

    AblationResult res;
    res.starting_time = s;
    res.total_alignment_consistency = consistency(total_lab);
    res.total_alignment_correlation = phi_corr(total_lab);
    res.no_alignment_consistency = consistency(noalign_lab);
    res.mixing_consistency = consistency(mix_lab);

    fs::create_directories(cfg.out_dir + "/ablation");
    std::ostringstream csv;
    csv.precision(12);
    csv << "condition,label_consistency,label_correlation,starting_time\n";
    csv << "total_alignment," << res.total_alignment_consistency << ','
        << res.total_alignment_correlation << ',' << T << '\n';
    csv << "no_alignment," << res.no_alignment_consistency << ",," << s << '\n';
    csv << "dsi_mixing," << res.mixing_consistency << ",," << s << '\n';
    res.csv_path = cfg.out_dir + "/ablation/report.csv";
    write_text_file(res.csv_path, csv.str());
    return res;
}

// ---- theorem -----------------------------------------------------------------------

std::vector<TheoremReport> run_verify_theorem(const ExperimentConfig& cfg) {
    if (cfg.preset != "fig2")
        throw ConfigError("verify-theorem: requires the fig2 preset");
    const PipelineArtifacts art = ensure_artifacts(cfg);
    TheoremConfig tc;
    tc.alpha_grid = cfg.theorem.alpha_grid;
    tc.n_samples = cfg.theorem.n_samples;
    tc.n_jsm = cfg.theorem.n_jsm;
    tc.stride_steps = cfg.theorem.stride_steps;
    RngStream rng = make_stream(cfg.seed, StreamKind::Theorem, 0);
    const auto reports =
        verify_theorem(art.models.front(), *art.data.source_spec,
                       *art.data.target_spec, tc, rng);
    fs::create_directories(cfg.out_dir + "/theorem");
    write_text_file(cfg.out_dir + "/theorem/report.csv",
                    theorem_reports_csv(reports));
    write_text_file(cfg.out_dir + "/theorem/report.txt",
                    theorem_reports_text(reports));
    return reports;
}

}  // namespace dsi
