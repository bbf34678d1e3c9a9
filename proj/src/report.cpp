#include "ibm2/report.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ibm2/error.hpp"

namespace ibm2 {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.contains(key)) {
            throw Error(ErrorCode::invalid_config, "unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key) || obj[key].is_null()) return fallback;
    try {
        return obj[key].get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::invalid_config, "wrong type for '" + key + "'");
    }
}

ordered_json trace_to_json(const SearchTrace& trace) {
    ordered_json steps = ordered_json::array();
    for (const SearchStep& step : trace.steps) {
        steps.push_back({{"left", step.left},
                         {"right", step.right},
                         {"eps", step.eps},
                         {"virtual_train_accuracy", step.virtual_train_accuracy}});
    }
    return {{"threshold", trace.threshold}, {"eps_hat", trace.eps_hat}, {"steps", std::move(steps)}};
}

ordered_json metrics_to_json(const EpisodeReport& m) {
    return {{"n", m.n},          {"acc_m", m.acc_mean},      {"sigma", m.acc_std},
            {"acc_1", m.acc_worst1}, {"acc_10", m.acc_worst10}, {"acc_100", m.acc_worst100},
            {"ci95", m.ci95}};
}

} // namespace

ordered_json config_to_json(const RunConfig& config) {
    ordered_json j;
    j["config_version"] = kConfigVersion;
    j["mode"] = run_mode_name(config.mode);
    j["method"] = method_name(config.method);
    j["sampling"] = sampling_mode_name(config.sampling);
    j["shots"] = config.shots;
    j["way"] = config.way;
    j["query"] = config.query;
    j["episodes"] = config.episodes;
    j["runs"] = config.runs;
    j["probe_episodes"] = config.probe_episodes;
    j["seed"] = config.seed;
    // jobs is execution-only (results are independent of it), so it is
    // accepted on input but never echoed.

    ordered_json lr;
    lr["kind"] = lr_policy_name(config.lr_policy.kind);
    if (config.lr_policy.kind == LrPolicyKind::fixed && !std::isnan(config.lr_policy.value)) {
        lr["value"] = config.lr_policy.value;
    }
    j["lr_policy"] = std::move(lr);

    j["trainer"] = {{"batch_size", config.trainer.batch_size},
                    {"epochs", config.trainer.epochs},
                    {"label_smoothing", config.trainer.label_smoothing},
                    {"beta1", config.trainer.beta1},
                    {"beta2", config.trainer.beta2},
                    {"adam_eps", config.trainer.adam_eps},
                    {"cache_limit_bytes", config.trainer.cache_limit_bytes}};

    ordered_json search;
    if (!std::isnan(config.search.t_init)) search["t_init"] = config.search.t_init;
    search["right_init"] = config.search.right_init;
    search["tol"] = config.search.tol;
    search["replicas"] = config.search.replicas;
    search["epochs"] = config.search.epochs;
    search["lr"] = config.search.lr;
    search["warm_start"] = config.search.warm_start;
    search["resample_per_step"] = config.search.resample_per_step;
    j["search"] = std::move(search);

    ordered_json data;
    if (!config.data.preset.empty()) {
        data["preset"] = config.data.preset;
        data["synth_seed"] = config.data.synth_seed;
        data["pool_per_class"] = config.data.pool_per_class;
        data["test_per_class"] = config.data.test_per_class;
    } else {
        data["train_file"] = config.data.train_file;
        data["test_file"] = config.data.test_file;
    }
    j["data"] = std::move(data);
    return j;
}

RunConfig config_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::invalid_config, "config must be a JSON object");
    check_keys(j, {"config_version", "mode", "method", "sampling", "shots", "way", "query",
                   "episodes", "runs", "probe_episodes", "seed", "jobs", "lr_policy", "trainer",
                   "search", "data"},
               "config");

    const int version = get_or<int>(j, "config_version", kConfigVersion);
    if (version != kConfigVersion) {
        throw Error(ErrorCode::version_mismatch,
                    "config_version " + std::to_string(version) + ", expected " +
                        std::to_string(kConfigVersion));
    }

    RunConfig cfg;
    cfg.mode = run_mode_from_name(get_or<std::string>(j, "mode", "pfsl"));
    cfg.method = method_from_name(get_or<std::string>(j, "method", "ibm2"));
    cfg.sampling = sampling_mode_from_name(get_or<std::string>(j, "sampling", "ellipsoidal"));
    cfg.shots = get_or<std::vector<int>>(j, "shots", {1});
    cfg.way = get_or<int>(j, "way", 5);
    cfg.query = get_or<int>(j, "query", 15);
    cfg.episodes = get_or<int>(j, "episodes", 500);
    cfg.runs = get_or<int>(j, "runs", 0);
    cfg.probe_episodes = get_or<int>(j, "probe_episodes", 20);
    cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
    cfg.jobs = get_or<int>(j, "jobs", 0);

    if (j.contains("lr_policy")) {
        const json& lr = j["lr_policy"];
        check_keys(lr, {"kind", "value"}, "lr_policy");
        const std::string kind = get_or<std::string>(lr, "kind", "fixed");
        if (kind == "fixed") {
            cfg.lr_policy.kind = LrPolicyKind::fixed;
        } else if (kind == "grid") {
            cfg.lr_policy.kind = LrPolicyKind::grid;
        } else if (kind == "probe") {
            cfg.lr_policy.kind = LrPolicyKind::probe;
        } else {
            throw Error(ErrorCode::invalid_config, "unknown lr_policy kind '" + kind + "'");
        }
        cfg.lr_policy.value =
            get_or<double>(lr, "value", std::numeric_limits<double>::quiet_NaN());
    }

    if (j.contains("trainer")) {
        const json& t = j["trainer"];
        check_keys(t, {"batch_size", "epochs", "label_smoothing", "beta1", "beta2", "adam_eps",
                       "cache_limit_bytes"},
                   "trainer");
        cfg.trainer.batch_size = get_or<std::size_t>(t, "batch_size", 256);
        cfg.trainer.epochs = get_or<int>(t, "epochs", 0);
        cfg.trainer.label_smoothing = get_or<double>(t, "label_smoothing", 0.1);
        cfg.trainer.beta1 = get_or<double>(t, "beta1", 0.9);
        cfg.trainer.beta2 = get_or<double>(t, "beta2", 0.999);
        cfg.trainer.adam_eps = get_or<double>(t, "adam_eps", 1e-8);
        cfg.trainer.cache_limit_bytes = get_or<std::size_t>(t, "cache_limit_bytes", 256ull << 20);
    }

    if (j.contains("search")) {
        const json& s = j["search"];
        check_keys(s, {"t_init", "right_init", "tol", "replicas", "epochs", "lr", "warm_start",
                       "resample_per_step"},
                   "search");
        cfg.search.t_init = get_or<double>(s, "t_init", std::numeric_limits<double>::quiet_NaN());
        cfg.search.right_init = get_or<double>(s, "right_init", 10.0);
        cfg.search.tol = get_or<double>(s, "tol", 0.05);
        cfg.search.replicas = get_or<int>(s, "replicas", 200);
        cfg.search.epochs = get_or<int>(s, "epochs", 0);
        cfg.search.lr = get_or<double>(s, "lr", 1.0);
        cfg.search.warm_start = get_or<bool>(s, "warm_start", true);
        cfg.search.resample_per_step = get_or<bool>(s, "resample_per_step", false);
    }

    if (j.contains("data")) {
        const json& d = j["data"];
        check_keys(d, {"preset", "synth_seed", "pool_per_class", "test_per_class", "train_file",
                       "test_file"},
                   "data");
        cfg.data.preset = get_or<std::string>(d, "preset", "");
        cfg.data.synth_seed = get_or<std::uint64_t>(d, "synth_seed", 7);
        cfg.data.pool_per_class = get_or<int>(d, "pool_per_class", 30);
        cfg.data.test_per_class = get_or<int>(d, "test_per_class", 50);
        cfg.data.train_file = get_or<std::string>(d, "train_file", "");
        cfg.data.test_file = get_or<std::string>(d, "test_file", "");
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::missing_file, path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::invalid_config, "cannot parse " + path + ": " + ex.what());
    }
    return config_from_json(j);
}

ordered_json report_to_json(const ExperimentReport& report) {
    ordered_json j;
    j["artifact"] = "ibm2";
    j["artifact_version"] = kArtifactVersion;
    j["report_version"] = kReportVersion;
    j["master_seed"] = report.config.seed;
    j["config"] = config_to_json(report.config);
    j["wall_clock_seconds"] = report.wall_clock_seconds;

    ordered_json experiments = ordered_json::array();
    for (const PfslShotReport& shot : report.pfsl) {
        ordered_json e;
        e["mode"] = "pfsl";
        e["shots"] = shot.shots;
        e["mean_accuracy"] = shot.mean_accuracy;
        e["std_accuracy"] = shot.std_accuracy;
        ordered_json seeds = ordered_json::array();
        for (const PfslSeedOutcome& outcome : shot.seeds) {
            ordered_json s;
            s["task_seed"] = outcome.task_seed;
            s["accuracy"] = outcome.result.accuracy;
            s["train_accuracy"] = outcome.result.train_accuracy;
            s["acc_up"] = outcome.result.acc_up;
            s["probe_test_accuracy"] = outcome.result.probe_test_accuracy;
            s["selected_lr"] = outcome.result.selected_lr;
            if (outcome.result.trace.has_value()) {
                s["eps_hat"] = outcome.result.eps_hat;
                s["threshold"] = outcome.result.threshold;
                s["range_fallback"] = outcome.result.range_fallback;
                s["trace"] = trace_to_json(*outcome.result.trace);
            }
            seeds.push_back(std::move(s));
        }
        e["seeds"] = std::move(seeds);
        experiments.push_back(std::move(e));
    }

    for (const FslShotReport& shot : report.fsl) {
        ordered_json e;
        e["mode"] = "fsl";
        e["shots"] = shot.shots;
        e["selected_lr"] = shot.selected_lr;
        e["metrics_mean"] = {{"acc_m", shot.mean_acc_m},     {"sigma", shot.mean_sigma},
                             {"acc_1", shot.mean_worst1},    {"acc_10", shot.mean_worst10},
                             {"acc_100", shot.mean_worst100}, {"ci95", shot.mean_ci95}};
        ordered_json runs = ordered_json::array();
        for (const FslRunReport& run : shot.runs) {
            ordered_json r;
            r["run_seed"] = run.run_seed;
            r["metrics"] = metrics_to_json(run.metrics);
            r["episode_accuracy"] = run.episode_accuracy;
            if (!run.episode_eps_hat.empty()) {
                r["episode_eps_hat"] = run.episode_eps_hat;
                ordered_json traces = ordered_json::array();
                for (const SearchTrace& trace : run.episode_traces) traces.push_back(trace_to_json(trace));
                r["episode_traces"] = std::move(traces);
            }
            runs.push_back(std::move(r));
        }
        e["runs"] = std::move(runs);
        experiments.push_back(std::move(e));
    }
    j["experiments"] = std::move(experiments);
    return j;
}

namespace {

std::string format_double_17(double v) {
    if (!std::isfinite(v)) {
        throw Error(ErrorCode::io_failure, "non-finite value cannot be serialized to JSON");
    }
    std::array<char, 40> buf{};
    const int len = std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return std::string(buf.data(), static_cast<std::size_t>(len));
}

void escape_string(const std::string& s, std::string& out) {
    out.push_back('"');
    for (char raw : s) {
        const auto c = static_cast<unsigned char>(raw);
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    std::array<char, 8> buf{};
                    std::snprintf(buf.data(), buf.size(), "\\u%04x", c);
                    out += buf.data();
                } else {
                    out.push_back(raw);
                }
        }
    }
    out.push_back('"');
}

void dump_value(const ordered_json& j, std::string& out, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent) * depth, ' ');
    const std::string pad_in(static_cast<std::size_t>(indent) * (depth + 1), ' ');
    switch (j.type()) {
        case ordered_json::value_t::null: out += "null"; break;
        case ordered_json::value_t::boolean: out += j.get<bool>() ? "true" : "false"; break;
        case ordered_json::value_t::number_integer:
            out += std::to_string(j.get<std::int64_t>());
            break;
        case ordered_json::value_t::number_unsigned:
            out += std::to_string(j.get<std::uint64_t>());
            break;
        case ordered_json::value_t::number_float:
            out += format_double_17(j.get<double>());
            break;
        case ordered_json::value_t::string: escape_string(j.get<std::string>(), out); break;
        case ordered_json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                break;
            }
            out += "[\n";
            bool first = true;
            for (const auto& item : j) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in;
                dump_value(item, out, indent, depth + 1);
            }
            out += "\n" + pad + "]";
            break;
        }
        case ordered_json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                break;
            }
            out += "{\n";
            bool first = true;
            for (const auto& [key, value] : j.items()) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in;
                escape_string(key, out);
                out += ": ";
                dump_value(value, out, indent, depth + 1);
            }
            out += "\n" + pad + "}";
            break;
        }
        default:
            throw Error(ErrorCode::io_failure, "unsupported JSON value type");
    }
}

} // namespace

std::string dump_json(const ordered_json& j, int indent) {
    std::string out;
    dump_value(j, out, indent, 0);
    out += "\n";
    return out;
}

std::string report_to_text(const json& report) {
    std::ostringstream out;
    out << "ibm2 report (seed " << report.at("master_seed") << ")\n";

    char line[256];
    std::snprintf(line, sizeof(line), "%-6s %-6s %-10s %-10s %-10s %-10s %-10s %-10s\n", "mode",
                  "shots", "acc_m", "sigma", "acc_1", "acc_10", "acc_100", "eps_hat");
    out << line;
    for (const json& e : report.at("experiments")) {
        const std::string mode = e.at("mode").get<std::string>();
        if (mode == "pfsl") {
            double eps_sum = 0.0;
            std::size_t eps_count = 0;
            for (const json& s : e.at("seeds")) {
                if (s.contains("eps_hat")) {
                    eps_sum += s.at("eps_hat").get<double>();
                    ++eps_count;
                }
            }
            std::snprintf(line, sizeof(line), "%-6s %-6d %-10.4f %-10.4f %-10s %-10s %-10s %-10s\n",
                          mode.c_str(), e.at("shots").get<int>(), e.at("mean_accuracy").get<double>(),
                          e.at("std_accuracy").get<double>(), "-", "-", "-",
                          eps_count > 0
                              ? std::to_string(eps_sum / static_cast<double>(eps_count)).c_str()
                              : "-");
            out << line;
        } else {
            const json& m = e.at("metrics_mean");
            std::snprintf(line, sizeof(line), "%-6s %-6d %-10.4f %-10.4f %-10.4f %-10.4f %-10.4f %-10s\n",
                          mode.c_str(), e.at("shots").get<int>(), m.at("acc_m").get<double>(),
                          m.at("sigma").get<double>(), m.at("acc_1").get<double>(),
                          m.at("acc_10").get<double>(), m.at("acc_100").get<double>(), "-");
            out << line;
        }
    }
    return out.str();
}

std::string report_to_csv(const json& report) {
    // One row per evaluation unit: mode,shots,run,episode,accuracy,eps_hat
    std::string out;
    auto add = [&out](const std::string& mode, int shots, std::size_t run, std::size_t episode,
                      double accuracy, const std::string& eps) {
        out += mode;
        out += ',' + std::to_string(shots);
        out += ',' + std::to_string(run);
        out += ',' + std::to_string(episode);
        out += ',' + format_double_17(accuracy);
        out += ',' + eps;
        out += '\n';
    };

    for (const json& e : report.at("experiments")) {
        const std::string mode = e.at("mode").get<std::string>();
        const int shots = e.at("shots").get<int>();
        if (mode == "pfsl") {
            std::size_t idx = 0;
            for (const json& s : e.at("seeds")) {
                add(mode, shots, idx, 0, s.at("accuracy").get<double>(),
                    s.contains("eps_hat") ? format_double_17(s.at("eps_hat").get<double>()) : "");
                ++idx;
            }
        } else {
            std::size_t run_idx = 0;
            for (const json& run : e.at("runs")) {
                const auto& acc = run.at("episode_accuracy");
                const bool has_eps = run.contains("episode_eps_hat");
                for (std::size_t ep = 0; ep < acc.size(); ++ep) {
                    add(mode, shots, run_idx, ep, acc[ep].get<double>(),
                        has_eps ? format_double_17(run.at("episode_eps_hat")[ep].get<double>()) : "");
                }
                ++run_idx;
            }
        }
    }
    return out;
}

} // namespace ibm2
