#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ibm2/feature_store.hpp"
#include "ibm2/margin_search.hpp"
#include "ibm2/metrics.hpp"

namespace ibm2 {

enum class RunMode { pfsl, fsl };
enum class Method { baseline, ibm2 };
enum class LrPolicyKind { fixed, grid, probe };

const char* run_mode_name(RunMode mode);
const char* method_name(Method method);
const char* lr_policy_name(LrPolicyKind kind);
RunMode run_mode_from_name(const std::string& name);
Method method_from_name(const std::string& name);

// Many-way task: k rows from every class of the pool, evaluated on the full
// test split.
struct PfslTask {
    FeatureDataset train;
    FeatureDataset test;
    int shots = 1;
    std::uint64_t seed = 0;
};

// N-way k-shot episode with labels remapped to [0, N) by ascending original id.
struct FslEpisode {
    int way = 5;
    int shots = 1;
    int query = 15;
    FeatureDataset support;
    FeatureDataset query_set;
    std::uint64_t seed = 0;
};

PfslTask sample_pfsl_task(const FeatureDataset& pool, const FeatureDataset& test, int shots,
                          std::uint64_t seed);
FslEpisode sample_fsl_episode(const FeatureDataset& pool, int way, int shots, int query,
                              std::uint64_t seed);

struct LrPolicy {
    LrPolicyKind kind = LrPolicyKind::fixed;
    // Fixed LR; NaN means "per-method default" (0.005 baseline, 1.0 IbM2).
    double value = std::numeric_limits<double>::quiet_NaN();
};

struct DataConfig {
    std::string train_file; // binary feature files ...
    std::string test_file;
    std::string preset;     // ... or a synthetic preset
    std::uint64_t synth_seed = 7;
    int pool_per_class = 30;
    int test_per_class = 50;
};

// One experiment description; serialized as JSON with config_version 1.
struct RunConfig {
    RunMode mode = RunMode::pfsl;
    Method method = Method::ibm2;
    SamplingMode sampling = SamplingMode::ellipsoidal;
    std::vector<int> shots = {1};
    int way = 5;
    int query = 15;
    int episodes = 500;     // fsl episodes per run
    int runs = 0;           // 0 = mode default (3 pfsl seeds, 5 fsl runs)
    int probe_episodes = 20;
    std::uint64_t seed = 1;
    int jobs = 0;           // 0 = library default; IBM2_THREADS overrides
    LrPolicy lr_policy;
    TrainConfig trainer;    // final-stage trainer; init_lr comes from lr_policy
    SearchConfig search;    // search knobs; t_init/epochs default per mode
    DataConfig data;

    RunConfig() {
        // Sentinels filled in by resolve_defaults (mode-dependent).
        trainer.epochs = 0;
        search.epochs = 0;
        search.t_init = std::numeric_limits<double>::quiet_NaN();
    }

    void validate() const;
};

// Fills mode-dependent defaults (threshold, epoch counts, run counts) for any
// field left at its sentinel. Reports echo the resolved config.
RunConfig resolve_defaults(const RunConfig& config);

std::vector<double> default_lr_grid(RunMode mode);

// Outcome of one task/episode pipeline.
struct TaskResult {
    double accuracy = 0.0;        // test accuracy of the method's final probe
    double train_accuracy = 0.0;  // final probe on its own training source
    double acc_up = 0.0;          // training accuracy of the search-config probe on D
    double probe_test_accuracy = 0.0; // test accuracy of that probe
    double selected_lr = 0.0;
    double eps_hat = std::numeric_limits<double>::quiet_NaN();
    double threshold = std::numeric_limits<double>::quiet_NaN();
    bool range_fallback = false;
    std::optional<SearchTrace> trace;
    LinearHead head;
};

// End-to-end pipeline on one pre-sampled task: normalize both splits, train
// the preliminary probe on D (recording ACC_up), then — for IbM2 — clamp the
// threshold, compute the range vector, search eps, and train the final probe
// on D^eps_hat; for the baseline the final probe trains on D itself. The test
// accuracy of the final probe is TaskResult.accuracy.
TaskResult run_pipeline(const FeatureDataset& task_train, const FeatureDataset& task_test,
                        const RunConfig& config, std::uint64_t task_seed, double final_lr);

struct ProbeEpisode {
    FeatureDataset train;
    FeatureDataset test;
    std::uint64_t seed = 0;
};

// Candidate maximizing mean test accuracy over the probe episodes; ties pick
// the smaller LR.
double select_lr(const std::vector<ProbeEpisode>& probe_episodes,
                 const std::vector<double>& candidates, const RunConfig& config);

// --- Experiment-level results ------------------------------------------------

struct PfslSeedOutcome {
    std::uint64_t task_seed = 0;
    TaskResult result;
};

struct PfslShotReport {
    int shots = 1;
    std::vector<PfslSeedOutcome> seeds;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
};

struct FslRunReport {
    std::uint64_t run_seed = 0;
    std::vector<double> episode_accuracy; // by episode index
    std::vector<double> episode_eps_hat;  // ibm2 only
    std::vector<SearchTrace> episode_traces;
    EpisodeReport metrics;
};

struct FslShotReport {
    int shots = 1;
    double selected_lr = 0.0;
    std::vector<FslRunReport> runs;
    // Each §5.3 metric averaged over runs.
    double mean_acc_m = 0.0, mean_sigma = 0.0, mean_worst1 = 0.0, mean_worst10 = 0.0,
           mean_worst100 = 0.0, mean_ci95 = 0.0;
};

struct ExperimentReport {
    RunConfig config; // resolved echo
    std::vector<PfslShotReport> pfsl;
    std::vector<FslShotReport> fsl;
    double wall_clock_seconds = 0.0;
};

// Runs the full experiment grid described by the config. pFSL: one pipeline
// per seed per shot, mean +/- std. FSL: `runs` x `episodes` episodes per shot
// with the metric suite per run. Episodes run in parallel; aggregation is by
// episode index, so the report does not depend on the thread count.
ExperimentReport run_experiment(const RunConfig& config);

// Loads (or synthesizes) the pool/test datasets named by the config.
std::pair<FeatureDataset, FeatureDataset> resolve_data(const RunConfig& config);

} // namespace ibm2
