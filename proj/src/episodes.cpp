#include "ibm2/episodes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ibm2/error.hpp"
#include "ibm2/parallel.hpp"
#include "ibm2/rng.hpp"

namespace ibm2 {

namespace {

constexpr std::uint64_t kTagPrelim = 0x50524550ull; // "PREP"
constexpr std::uint64_t kTagSearch = 0x53524348ull; // "SRCH"
constexpr std::uint64_t kTagNoise = 0x4e4f4953ull;  // "NOIS"
constexpr std::uint64_t kTagFinal = 0x46494e4cull;  // "FINL"
constexpr std::uint64_t kTagLrProbe = 0x4c525042ull; // "LRPB"
constexpr std::uint64_t kTagClassPick = 0x434c53ull; // "CLS"
constexpr std::uint64_t kTagRowPick = 0x524f57ull;   // "ROW"

std::vector<std::vector<std::size_t>> rows_by_class(const FeatureDataset& pool) {
    std::vector<std::vector<std::size_t>> by_class(pool.class_count);
    for (std::size_t i = 0; i < pool.rows(); ++i) by_class[pool.labels[i]].push_back(i);
    return by_class;
}

// First `take` elements of a seeded partial Fisher-Yates over `items`.
void partial_shuffle(std::vector<std::size_t>& items, std::size_t take, rng::Stream& stream) {
    for (std::size_t j = 0; j < take && j + 1 < items.size(); ++j) {
        const std::size_t t = j + static_cast<std::size_t>(stream.below(items.size() - j));
        std::swap(items[j], items[t]);
    }
}

void append_row(FeatureDataset& out, const FeatureDataset& src, std::size_t row,
                std::uint32_t label) {
    const auto r = src.row(row);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(label);
}

double default_fixed_lr(Method method) { return method == Method::baseline ? 0.005 : 1.0; }

} // namespace

const char* run_mode_name(RunMode mode) { return mode == RunMode::pfsl ? "pfsl" : "fsl"; }
const char* method_name(Method method) { return method == Method::baseline ? "baseline" : "ibm2"; }

const char* lr_policy_name(LrPolicyKind kind) {
    switch (kind) {
        case LrPolicyKind::fixed: return "fixed";
        case LrPolicyKind::grid: return "grid";
        case LrPolicyKind::probe: return "probe";
    }
    return "fixed";
}

RunMode run_mode_from_name(const std::string& name) {
    if (name == "pfsl") return RunMode::pfsl;
    if (name == "fsl") return RunMode::fsl;
    throw Error(ErrorCode::invalid_config, "unknown mode '" + name + "'");
}

Method method_from_name(const std::string& name) {
    if (name == "baseline") return Method::baseline;
    if (name == "ibm2") return Method::ibm2;
    throw Error(ErrorCode::invalid_config, "unknown method '" + name + "'");
}

PfslTask sample_pfsl_task(const FeatureDataset& pool, const FeatureDataset& test, int shots,
                          std::uint64_t seed) {
    if (shots < 1) throw Error(ErrorCode::invalid_spec, "shots must be >= 1");
    const auto by_class = rows_by_class(pool);

    PfslTask task;
    task.shots = shots;
    task.seed = seed;
    task.train.d = pool.d;
    task.train.class_count = pool.class_count;
    task.train.class_names = pool.class_names;
    task.train.normalized = pool.normalized;
    task.train.features.reserve(static_cast<std::size_t>(shots) * pool.class_count * pool.d);

    for (std::uint32_t c = 0; c < pool.class_count; ++c) {
        if (by_class[c].size() < static_cast<std::size_t>(shots)) {
            throw Error(ErrorCode::insufficient_rows,
                        "class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                            " rows, need " + std::to_string(shots));
        }
        std::vector<std::size_t> indices = by_class[c];
        rng::Stream stream(rng::mix64(seed, c));
        partial_shuffle(indices, static_cast<std::size_t>(shots), stream);
        for (int j = 0; j < shots; ++j) append_row(task.train, pool, indices[j], c);
    }

    task.test = test;
    return task;
}

FslEpisode sample_fsl_episode(const FeatureDataset& pool, int way, int shots, int query,
                              std::uint64_t seed) {
    if (way < 1 || shots < 1 || query < 1) {
        throw Error(ErrorCode::invalid_spec, "way, shots and query must all be >= 1");
    }
    if (pool.class_count < static_cast<std::uint32_t>(way)) {
        throw Error(ErrorCode::insufficient_classes,
                    "pool has " + std::to_string(pool.class_count) + " classes, need " +
                        std::to_string(way));
    }

    std::vector<std::size_t> class_ids(pool.class_count);
    std::iota(class_ids.begin(), class_ids.end(), 0);
    rng::Stream class_stream(rng::mix64(seed, kTagClassPick));
    partial_shuffle(class_ids, static_cast<std::size_t>(way), class_stream);
    std::vector<std::size_t> chosen(class_ids.begin(), class_ids.begin() + way);
    std::sort(chosen.begin(), chosen.end()); // remap by ascending original id

    const auto by_class = rows_by_class(pool);
    const std::size_t per_class = static_cast<std::size_t>(shots) + static_cast<std::size_t>(query);

    FslEpisode episode;
    episode.way = way;
    episode.shots = shots;
    episode.query = query;
    episode.seed = seed;
    for (FeatureDataset* split : {&episode.support, &episode.query_set}) {
        split->d = pool.d;
        split->class_count = static_cast<std::uint32_t>(way);
        split->normalized = pool.normalized;
    }

    std::vector<std::vector<std::size_t>> picks(way);
    for (int n = 0; n < way; ++n) {
        const std::size_t original = chosen[n];
        if (by_class[original].size() < per_class) {
            throw Error(ErrorCode::insufficient_rows,
                        "class " + std::to_string(original) + " has " +
                            std::to_string(by_class[original].size()) + " rows, need " +
                            std::to_string(per_class));
        }
        picks[n] = by_class[original];
        rng::Stream row_stream(rng::mix64(rng::mix64(seed, kTagRowPick), original));
        partial_shuffle(picks[n], per_class, row_stream);
        if (!pool.class_names.empty()) {
            episode.support.class_names.push_back(pool.class_names[original]);
            episode.query_set.class_names.push_back(pool.class_names[original]);
        }
    }

    for (int n = 0; n < way; ++n) {
        for (int j = 0; j < shots; ++j) {
            append_row(episode.support, pool, picks[n][j], static_cast<std::uint32_t>(n));
        }
    }
    for (int n = 0; n < way; ++n) {
        for (int j = 0; j < query; ++j) {
            append_row(episode.query_set, pool, picks[n][shots + j], static_cast<std::uint32_t>(n));
        }
    }
    return episode;
}

void RunConfig::validate() const {
    if (shots.empty()) throw Error(ErrorCode::invalid_config, "shots list must not be empty");
    for (int k : shots) {
        if (k < 1) throw Error(ErrorCode::invalid_config, "every shot count must be >= 1");
    }
    if (episodes < 1) throw Error(ErrorCode::invalid_config, "episodes must be >= 1");
    if (runs < 0) throw Error(ErrorCode::invalid_config, "runs must be >= 0");
    if (probe_episodes < 1) throw Error(ErrorCode::invalid_config, "probe_episodes must be >= 1");
    if (mode == RunMode::fsl) {
        if (way < 1 || query < 1) throw Error(ErrorCode::invalid_config, "fsl needs way >= 1, query >= 1");
        if (lr_policy.kind == LrPolicyKind::grid) {
            throw Error(ErrorCode::invalid_config, "grid LR selection is a pfsl protocol; use probe or fixed in fsl mode");
        }
    }
    if (data.preset.empty() && (data.train_file.empty() ||
                                (mode == RunMode::pfsl && data.test_file.empty()))) {
        throw Error(ErrorCode::invalid_config, "data needs either a preset or feature file paths");
    }
    if (lr_policy.kind == LrPolicyKind::fixed && !std::isnan(lr_policy.value) &&
        lr_policy.value < 0.0) {
        throw Error(ErrorCode::invalid_config, "fixed LR must be >= 0");
    }
}

RunConfig resolve_defaults(const RunConfig& config) {
    RunConfig cfg = config;
    const bool pfsl = cfg.mode == RunMode::pfsl;
    if (cfg.runs == 0) cfg.runs = pfsl ? 3 : 5;
    if (cfg.trainer.epochs == 0) cfg.trainer.epochs = pfsl ? 100 : 200;
    if (cfg.search.epochs == 0) cfg.search.epochs = pfsl ? 20 : 50;
    if (std::isnan(cfg.search.t_init)) cfg.search.t_init = pfsl ? 0.9 : 0.999;
    return cfg;
}

std::vector<double> default_lr_grid(RunMode mode) {
    if (mode == RunMode::pfsl) {
        return {0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0};
    }
    return {0.00001, 0.0001, 0.001, 0.01, 0.1, 1.0};
}

namespace {

// Everything up to (and including) the eps search; final training happens per
// candidate LR so grid selection never repeats the search.
struct PipelinePrep {
    FeatureDataset train_n;
    FeatureDataset test_n;
    double acc_up = 0.0;
    double probe_test = 0.0;
    bool is_ibm2 = false;
    RangeVector range;
    SearchTrace trace;
    std::uint64_t task_seed = 0;
};

PipelinePrep prepare_pipeline(const FeatureDataset& task_train, const FeatureDataset& task_test,
                              const RunConfig& config, std::uint64_t task_seed) {
    PipelinePrep prep;
    prep.task_seed = task_seed;
    prep.train_n = l2_normalize(task_train);
    prep.test_n = l2_normalize(task_test);

    TrainConfig prelim = config.trainer;
    prelim.epochs = config.search.epochs;
    prelim.init_lr = config.search.lr;
    prelim.seed = rng::mix64(task_seed, kTagPrelim);
    DatasetSource original(prep.train_n);
    const TrainResult prelim_result = train(original, prep.train_n.class_count, prelim);
    prep.acc_up = prelim_result.train_accuracy;
    prep.probe_test = evaluate(prelim_result.head, prep.test_n);

    if (config.method == Method::ibm2) {
        prep.is_ibm2 = true;
        prep.range = compute_range_vector(prep.train_n, config.sampling);

        SearchConfig search = config.search;
        search.t_init = compute_threshold(config.search.t_init, prep.acc_up);
        search.seed = rng::mix64(task_seed, kTagNoise);

        TrainConfig search_trainer = config.trainer;
        search_trainer.epochs = search.epochs;
        search_trainer.init_lr = search.lr;
        search_trainer.seed = rng::mix64(task_seed, kTagSearch);

        prep.trace = search_epsilon(prep.train_n, prep.range, search, search_trainer);
    }
    return prep;
}

TaskResult finalize_pipeline(const PipelinePrep& prep, const RunConfig& config, double final_lr) {
    TaskResult result;
    result.acc_up = prep.acc_up;
    result.probe_test_accuracy = prep.probe_test;
    result.selected_lr = final_lr;

    TrainConfig final_cfg = config.trainer;
    final_cfg.init_lr = final_lr;
    final_cfg.seed = rng::mix64(prep.task_seed, kTagFinal);

    if (!prep.is_ibm2) {
        DatasetSource source(prep.train_n);
        TrainResult trained = train(source, prep.train_n.class_count, final_cfg);
        result.train_accuracy = trained.train_accuracy;
        result.head = std::move(trained.head);
    } else {
        result.eps_hat = prep.trace.eps_hat;
        result.threshold = prep.trace.threshold;
        result.range_fallback = prep.range.degenerate_fallback;
        result.trace = prep.trace;

        VirtualSetSpec spec;
        spec.parent = &prep.train_n;
        spec.eps = prep.trace.eps_hat;
        spec.replicas = config.search.replicas;
        spec.range = prep.range;
        spec.seed = rng::mix64(prep.task_seed, kTagNoise);
        VirtualSource source(spec);
        TrainResult trained = train(source, prep.train_n.class_count, final_cfg);
        result.train_accuracy = trained.train_accuracy;
        result.head = std::move(trained.head);
    }
    result.accuracy = evaluate(result.head, prep.test_n);
    return result;
}

double resolve_fixed_lr(const RunConfig& config) {
    if (std::isnan(config.lr_policy.value)) return default_fixed_lr(config.method);
    return config.lr_policy.value;
}

} // namespace

TaskResult run_pipeline(const FeatureDataset& task_train, const FeatureDataset& task_test,
                        const RunConfig& config, std::uint64_t task_seed, double final_lr) {
    const PipelinePrep prep = prepare_pipeline(task_train, task_test, config, task_seed);
    return finalize_pipeline(prep, config, final_lr);
}

double select_lr(const std::vector<ProbeEpisode>& probe_episodes,
                 const std::vector<double>& candidates, const RunConfig& config) {
    if (probe_episodes.empty()) throw Error(ErrorCode::empty_input, "need at least one probe episode");
    if (candidates.empty()) throw Error(ErrorCode::empty_input, "need at least one LR candidate");

    std::vector<double> sums(candidates.size(), 0.0);
    for (const ProbeEpisode& episode : probe_episodes) {
        const PipelinePrep prep = prepare_pipeline(episode.train, episode.test, config, episode.seed);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            sums[i] += finalize_pipeline(prep, config, candidates[i]).accuracy;
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        if (sums[i] > sums[best] || (sums[i] == sums[best] && candidates[i] < candidates[best])) {
            best = i;
        }
    }
    return candidates[best];
}

namespace {

PfslShotReport run_pfsl_shot(const RunConfig& cfg, const FeatureDataset& pool,
                             const FeatureDataset& test, int shots) {
    PfslShotReport shot_report;
    shot_report.shots = shots;

    double fixed_lr = resolve_fixed_lr(cfg);
    if (cfg.lr_policy.kind == LrPolicyKind::probe) {
        std::vector<ProbeEpisode> probes;
        probes.reserve(cfg.probe_episodes);
        const std::uint64_t probe_base = rng::mix64(cfg.seed, kTagLrProbe);
        for (int i = 0; i < cfg.probe_episodes; ++i) {
            PfslTask task = sample_pfsl_task(pool, test, shots, rng::mix64(probe_base, i));
            probes.push_back({std::move(task.train), std::move(task.test), rng::mix64(probe_base, i)});
        }
        fixed_lr = select_lr(probes, default_lr_grid(cfg.mode), cfg);
    }

    for (int s = 0; s < cfg.runs; ++s) {
        const std::uint64_t task_seed = rng::mix64(cfg.seed, static_cast<std::uint64_t>(s));
        const PfslTask task = sample_pfsl_task(pool, test, shots, task_seed);

        TaskResult result;
        if (cfg.lr_policy.kind == LrPolicyKind::grid) {
            const PipelinePrep prep = prepare_pipeline(task.train, task.test, cfg, task_seed);
            const std::vector<double> grid = default_lr_grid(cfg.mode);
            bool first = true;
            for (double lr : grid) {
                TaskResult candidate = finalize_pipeline(prep, cfg, lr);
                if (first || candidate.accuracy > result.accuracy ||
                    (candidate.accuracy == result.accuracy && lr < result.selected_lr)) {
                    result = std::move(candidate);
                }
                first = false;
            }
        } else {
            result = run_pipeline(task.train, task.test, cfg, task_seed, fixed_lr);
        }
        shot_report.seeds.push_back({task_seed, std::move(result)});
    }

    double sum = 0.0;
    for (const auto& outcome : shot_report.seeds) sum += outcome.result.accuracy;
    shot_report.mean_accuracy = sum / static_cast<double>(shot_report.seeds.size());
    double sq = 0.0;
    for (const auto& outcome : shot_report.seeds) {
        const double diff = outcome.result.accuracy - shot_report.mean_accuracy;
        sq += diff * diff;
    }
    shot_report.std_accuracy =
        shot_report.seeds.size() > 1
            ? std::sqrt(sq / static_cast<double>(shot_report.seeds.size() - 1))
            : 0.0;
    return shot_report;
}

FslShotReport run_fsl_shot(const RunConfig& cfg, const FeatureDataset& pool, int shots) {
    FslShotReport shot_report;
    shot_report.shots = shots;

    double lr = resolve_fixed_lr(cfg);
    if (cfg.lr_policy.kind == LrPolicyKind::probe) {
        std::vector<ProbeEpisode> probes;
        probes.reserve(cfg.probe_episodes);
        const std::uint64_t probe_base = rng::mix64(cfg.seed, kTagLrProbe);
        for (int i = 0; i < cfg.probe_episodes; ++i) {
            FslEpisode episode =
                sample_fsl_episode(pool, cfg.way, shots, cfg.query, rng::mix64(probe_base, i));
            probes.push_back({std::move(episode.support), std::move(episode.query_set),
                              rng::mix64(probe_base, i)});
        }
        lr = select_lr(probes, default_lr_grid(cfg.mode), cfg);
    }
    shot_report.selected_lr = lr;

    const bool keep_traces = cfg.method == Method::ibm2;
    for (int r = 0; r < cfg.runs; ++r) {
        const std::uint64_t run_seed = rng::mix64(cfg.seed, static_cast<std::uint64_t>(r));
        FslRunReport run_report;
        run_report.run_seed = run_seed;
        run_report.episode_accuracy.resize(cfg.episodes, 0.0);
        if (keep_traces) {
            run_report.episode_eps_hat.resize(cfg.episodes, 0.0);
            run_report.episode_traces.resize(cfg.episodes);
        }

        std::string failure;
        long failure_episode = -1;
#pragma omp parallel for schedule(dynamic)
        for (long e = 0; e < static_cast<long>(cfg.episodes); ++e) {
            try {
                const std::uint64_t episode_seed = rng::mix64(run_seed, static_cast<std::uint64_t>(e));
                const FslEpisode episode =
                    sample_fsl_episode(pool, cfg.way, shots, cfg.query, episode_seed);
                TaskResult result =
                    run_pipeline(episode.support, episode.query_set, cfg, episode_seed, lr);
                run_report.episode_accuracy[e] = result.accuracy;
                if (keep_traces) {
                    run_report.episode_eps_hat[e] = result.eps_hat;
                    run_report.episode_traces[e] = std::move(*result.trace);
                }
            } catch (const std::exception& ex) {
#pragma omp critical
                {
                    if (failure_episode < 0 || e < failure_episode) {
                        failure_episode = e;
                        failure = ex.what();
                    }
                }
            }
        }
        if (failure_episode >= 0) {
            throw Error(ErrorCode::invalid_spec,
                        "episode " + std::to_string(failure_episode) + " failed: " + failure);
        }

        run_report.metrics = episode_metrics(run_report.episode_accuracy);
        shot_report.runs.push_back(std::move(run_report));
    }

    const double n_runs = static_cast<double>(shot_report.runs.size());
    for (const FslRunReport& run : shot_report.runs) {
        shot_report.mean_acc_m += run.metrics.acc_mean / n_runs;
        shot_report.mean_sigma += run.metrics.acc_std / n_runs;
        shot_report.mean_worst1 += run.metrics.acc_worst1 / n_runs;
        shot_report.mean_worst10 += run.metrics.acc_worst10 / n_runs;
        shot_report.mean_worst100 += run.metrics.acc_worst100 / n_runs;
        shot_report.mean_ci95 += run.metrics.ci95 / n_runs;
    }
    return shot_report;
}

} // namespace

std::pair<FeatureDataset, FeatureDataset> resolve_data(const RunConfig& config) {
    if (!config.data.preset.empty()) {
        const MixtureSpec spec = mixture_preset(config.data.preset, config.data.synth_seed,
                                                config.data.pool_per_class, config.data.test_per_class);
        return synth_mixture(spec);
    }
    FeatureDataset pool = load_feature_file(config.data.train_file);
    FeatureDataset test;
    if (!config.data.test_file.empty()) {
        test = load_feature_file(config.data.test_file);
    }
    return {std::move(pool), std::move(test)};
}

ExperimentReport run_experiment(const RunConfig& config) {
    RunConfig cfg = resolve_defaults(config);
    cfg.validate();
    apply_thread_count(resolve_thread_count(cfg.jobs));

    const auto [pool, test] = resolve_data(cfg);

    ExperimentReport report;
    report.config = cfg;
    for (int shots : cfg.shots) {
        if (cfg.mode == RunMode::pfsl) {
            report.pfsl.push_back(run_pfsl_shot(cfg, pool, test, shots));
        } else {
            report.fsl.push_back(run_fsl_shot(cfg, pool, shots));
        }
    }
    return report;
}

} // namespace ibm2
