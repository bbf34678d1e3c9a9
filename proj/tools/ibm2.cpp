#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ibm2/episodes.hpp"
#include "ibm2/error.hpp"
#include "ibm2/report.hpp"

namespace {

using ibm2::Error;
using ibm2::ErrorCode;
using ibm2::RunConfig;

constexpr int kExitUsage = 2;
constexpr int kExitBadConfig = 3;
constexpr int kExitMissingFile = 4;

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_failure, "cannot open " + out_path + " for writing");
    out << text;
    if (!out.good()) throw Error(ErrorCode::io_failure, "writing " + out_path);
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
    std::vector<int> values;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string item = text.substr(pos, comma - pos);
        try {
            std::size_t used = 0;
            const int v = std::stoi(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            values.push_back(v);
        } catch (const std::exception&) {
            throw Error(ErrorCode::invalid_config, std::string(what) + ": bad integer '" + item + "'");
        }
        pos = comma + 1;
        if (comma == text.size()) break;
    }
    if (values.empty()) throw Error(ErrorCode::invalid_config, std::string(what) + ": empty list");
    return values;
}

// Flags shared by run/ablate subcommands; all optional, overriding the config
// file when given.
struct RunFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<std::string> mode;
    std::optional<std::string> method;
    std::optional<std::string> sampling;
    std::optional<int> replicas;
    std::optional<double> threshold;
    std::optional<std::string> lr;
    std::optional<std::string> shots;
    std::optional<int> way;
    std::optional<int> episodes;
    std::optional<int> runs;
    std::optional<std::string> preset;
    std::string out_path;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
    cmd->add_option("--config", flags.config_path, "run config JSON");
    cmd->add_option("--seed", flags.seed, "master seed");
    cmd->add_option("--jobs", flags.jobs, "worker threads (env IBM2_THREADS overrides)");
    cmd->add_option("--mode", flags.mode, "pfsl|fsl");
    cmd->add_option("--method", flags.method, "baseline|ibm2");
    cmd->add_option("--sampling", flags.sampling, "spherical|ellipsoidal");
    cmd->add_option("--r", flags.replicas, "virtual samples per instance");
    cmd->add_option("--t", flags.threshold, "search accuracy threshold");
    cmd->add_option("--lr", flags.lr, "fixed LR value, or 'grid'/'probe'");
    cmd->add_option("--shots", flags.shots, "comma-separated shot counts");
    cmd->add_option("--way", flags.way, "fsl way");
    cmd->add_option("--episodes", flags.episodes, "fsl episodes per run");
    cmd->add_option("--runs", flags.runs, "seeds (pfsl) or runs (fsl)");
    cmd->add_option("--preset", flags.preset, "synthetic data preset");
    cmd->add_option("--out", flags.out_path, "output path (default stdout)");
}

RunConfig build_config(const RunFlags& flags) {
    RunConfig cfg;
    if (!flags.config_path.empty()) cfg = ibm2::load_config_file(flags.config_path);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.jobs) cfg.jobs = *flags.jobs;
    if (flags.mode) cfg.mode = ibm2::run_mode_from_name(*flags.mode);
    if (flags.method) cfg.method = ibm2::method_from_name(*flags.method);
    if (flags.sampling) cfg.sampling = ibm2::sampling_mode_from_name(*flags.sampling);
    if (flags.replicas) cfg.search.replicas = *flags.replicas;
    if (flags.threshold) cfg.search.t_init = *flags.threshold;
    if (flags.shots) cfg.shots = parse_int_list(*flags.shots, "--shots");
    if (flags.way) cfg.way = *flags.way;
    if (flags.episodes) cfg.episodes = *flags.episodes;
    if (flags.runs) cfg.runs = *flags.runs;
    if (flags.preset) {
        cfg.data.preset = *flags.preset;
        cfg.data.train_file.clear();
        cfg.data.test_file.clear();
    }
    if (flags.lr) {
        if (*flags.lr == "grid") {
            cfg.lr_policy.kind = ibm2::LrPolicyKind::grid;
        } else if (*flags.lr == "probe") {
            cfg.lr_policy.kind = ibm2::LrPolicyKind::probe;
        } else {
            try {
                std::size_t used = 0;
                cfg.lr_policy.value = std::stod(*flags.lr, &used);
                if (used != flags.lr->size()) throw std::invalid_argument(*flags.lr);
            } catch (const std::exception&) {
                throw Error(ErrorCode::invalid_config, "--lr expects a number, 'grid' or 'probe'");
            }
            cfg.lr_policy.kind = ibm2::LrPolicyKind::fixed;
        }
    }
    return cfg;
}

nlohmann::ordered_json timed_experiment_json(const RunConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    ibm2::ExperimentReport report = ibm2::run_experiment(cfg);
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return ibm2::report_to_json(report);
}

int cmd_run(const RunFlags& flags) {
    const RunConfig cfg = build_config(flags);
    write_output(ibm2::dump_json(timed_experiment_json(cfg)), flags.out_path);
    return 0;
}

int cmd_ablate_r(const RunFlags& flags, const std::string& values) {
    RunConfig cfg = build_config(flags);
    cfg.method = ibm2::Method::ibm2;

    const auto start = std::chrono::steady_clock::now();
    nlohmann::ordered_json doc;
    doc["artifact"] = "ibm2";
    doc["artifact_version"] = ibm2::kArtifactVersion;
    doc["report_version"] = ibm2::kReportVersion;
    doc["ablation"] = {{"axis", "r"}, {"values", parse_int_list(values, "--values")}};
    doc["master_seed"] = cfg.seed;

    nlohmann::ordered_json experiments = nlohmann::ordered_json::array();
    bool config_written = false;
    for (int r : parse_int_list(values, "--values")) {
        RunConfig cfg_r = cfg;
        cfg_r.search.replicas = r;
        ibm2::ExperimentReport report = ibm2::run_experiment(cfg_r);
        if (!config_written) {
            doc["config"] = ibm2::config_to_json(report.config);
            config_written = true;
        }
        nlohmann::ordered_json sub = ibm2::report_to_json(report);
        for (nlohmann::ordered_json& e : sub["experiments"]) {
            nlohmann::ordered_json tagged;
            tagged["r"] = r;
            for (auto& [key, value] : e.items()) tagged[key] = std::move(value);
            experiments.push_back(std::move(tagged));
        }
    }
    doc["experiments"] = std::move(experiments);
    doc["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_output(ibm2::dump_json(doc), flags.out_path);
    return 0;
}

int cmd_ablate_sampling(const RunFlags& flags) {
    const RunConfig base = build_config(flags);

    const auto start = std::chrono::steady_clock::now();
    nlohmann::ordered_json doc;
    doc["artifact"] = "ibm2";
    doc["artifact_version"] = ibm2::kArtifactVersion;
    doc["report_version"] = ibm2::kReportVersion;
    doc["ablation"] = {{"axis", "sampling"}, {"values", {"baseline", "spherical", "ellipsoidal"}}};
    doc["master_seed"] = base.seed;
    doc["config"] = ibm2::config_to_json(base);

    nlohmann::ordered_json experiments = nlohmann::ordered_json::array();
    for (const std::string& arm : {std::string("baseline"), std::string("spherical"),
                                   std::string("ellipsoidal")}) {
        RunConfig cfg = base;
        if (arm == "baseline") {
            cfg.method = ibm2::Method::baseline;
        } else {
            cfg.method = ibm2::Method::ibm2;
            cfg.sampling = ibm2::sampling_mode_from_name(arm);
        }
        ibm2::ExperimentReport report = ibm2::run_experiment(cfg);
        nlohmann::ordered_json sub = ibm2::report_to_json(report);
        for (nlohmann::ordered_json& e : sub["experiments"]) {
            nlohmann::ordered_json tagged;
            tagged["arm"] = arm;
            for (auto& [key, value] : e.items()) tagged[key] = std::move(value);
            experiments.push_back(std::move(tagged));
        }
    }
    doc["experiments"] = std::move(experiments);
    doc["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_output(ibm2::dump_json(doc), flags.out_path);
    return 0;
}

int error_exit(const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    switch (err.code()) {
        case ErrorCode::invalid_config: return kExitBadConfig;
        case ErrorCode::missing_file: return kExitMissingFile;
        default: return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Instance-based max-margin classification over feature vectors"};
    app.require_subcommand(1);

    // import
    auto* import_cmd = app.add_subcommand("import", "convert a CSV dump to a binary feature file");
    std::string import_in, import_out;
    import_cmd->add_option("--in", import_in, "input CSV")->required();
    import_cmd->add_option("--out", import_out, "output feature file")->required();

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "write synthetic train/test feature files");
    std::string synth_preset = "iso";
    std::uint64_t synth_seed = 7;
    int synth_train = 30, synth_test = 50;
    std::string synth_out_train = "train.feat", synth_out_test = "test.feat";
    std::string synth_format = "bin";
    synth_cmd->add_option("--preset", synth_preset, "iso-easy|iso|aniso");
    synth_cmd->add_option("--seed", synth_seed, "generator seed");
    synth_cmd->add_option("--train-per-class", synth_train, "pool rows per class");
    synth_cmd->add_option("--test-per-class", synth_test, "test rows per class");
    synth_cmd->add_option("--out-train", synth_out_train, "train output path");
    synth_cmd->add_option("--out-test", synth_out_test, "test output path");
    synth_cmd->add_option("--format", synth_format, "bin|csv");

    // run + ablations
    RunFlags run_flags;
    auto* run_cmd = app.add_subcommand("run", "run an experiment from a config");
    add_run_flags(run_cmd, run_flags);

    RunFlags ablate_r_flags;
    std::string ablate_r_values = "1,10,50,200,400";
    auto* ablate_r_cmd = app.add_subcommand("ablate-r", "sweep the per-instance sample count R");
    add_run_flags(ablate_r_cmd, ablate_r_flags);
    ablate_r_cmd->add_option("--values", ablate_r_values, "comma-separated R values");

    RunFlags ablate_s_flags;
    auto* ablate_s_cmd =
        app.add_subcommand("ablate-sampling", "baseline vs spherical vs ellipsoidal");
    add_run_flags(ablate_s_cmd, ablate_s_flags);

    // report
    auto* report_cmd = app.add_subcommand("report", "render a report JSON as text or CSV");
    std::string report_in, report_format = "text", report_out;
    report_cmd->add_option("input", report_in, "report JSON path")->required();
    report_cmd->add_option("--format", report_format, "text|csv");
    report_cmd->add_option("--out", report_out, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::cerr << "error: usage: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*import_cmd) {
            ibm2::write_feature_file(ibm2::import_csv(import_in), import_out);
            return 0;
        }
        if (*synth_cmd) {
            const ibm2::MixtureSpec spec =
                ibm2::mixture_preset(synth_preset, synth_seed, synth_train, synth_test);
            const auto [train, test] = ibm2::synth_mixture(spec);
            if (synth_format == "bin") {
                ibm2::write_feature_file(train, synth_out_train);
                ibm2::write_feature_file(test, synth_out_test);
            } else if (synth_format == "csv") {
                ibm2::write_csv(train, synth_out_train);
                ibm2::write_csv(test, synth_out_test);
            } else {
                throw Error(ErrorCode::invalid_config, "--format must be bin or csv");
            }
            return 0;
        }
        if (*run_cmd) return cmd_run(run_flags);
        if (*ablate_r_cmd) return cmd_ablate_r(ablate_r_flags, ablate_r_values);
        if (*ablate_s_cmd) return cmd_ablate_sampling(ablate_s_flags);
        if (*report_cmd) {
            std::ifstream in(report_in);
            if (!in) throw Error(ErrorCode::missing_file, report_in);
            nlohmann::json doc;
            try {
                in >> doc;
            } catch (const nlohmann::json::exception& ex) {
                throw Error(ErrorCode::invalid_config,
                            "cannot parse " + report_in + ": " + ex.what());
            }
            if (report_format == "text") {
                write_output(ibm2::report_to_text(doc), report_out);
            } else if (report_format == "csv") {
                write_output(ibm2::report_to_csv(doc), report_out);
            } else {
                throw Error(ErrorCode::invalid_config, "--format must be text or csv");
            }
            return 0;
        }
    } catch (const Error& err) {
        return error_exit(err);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
