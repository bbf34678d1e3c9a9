#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>

#include "ibm2/episodes.hpp"
#include "ibm2/error.hpp"
#include "ibm2/report.hpp"

using namespace ibm2;
using nlohmann::json;
using nlohmann::ordered_json;

TEST_CASE("dump round-trips doubles exactly via 17 significant digits") {
    const std::vector<double> values = {0.1, 1.0 / 3.0, 9.18, 1e-300, 1.7976931348623157e308,
                                        5e-324, -0.0, 123456789.123456789};
    for (double v : values) {
        ordered_json j;
        j["x"] = v;
        const std::string text = dump_json(j);
        const json back = json::parse(text);
        const double recovered = back["x"].get<double>();
        CHECK(recovered == v);
    }
}

TEST_CASE("dump rejects non-finite values") {
    ordered_json j;
    j["x"] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(dump_json(j), Error);
}

TEST_CASE("dump escapes strings") {
    ordered_json j;
    j["s"] = "a\"b\\c\nd";
    const std::string text = dump_json(j);
    const json back = json::parse(text);
    CHECK(back["s"].get<std::string>() == "a\"b\\c\nd");
}

TEST_CASE("config serialization round trip") {
    RunConfig cfg;
    cfg.mode = RunMode::fsl;
    cfg.method = Method::ibm2;
    cfg.sampling = SamplingMode::spherical;
    cfg.shots = {1, 5};
    cfg.way = 7;
    cfg.query = 9;
    cfg.episodes = 42;
    cfg.runs = 2;
    cfg.seed = 987654321;
    cfg.jobs = 3;
    cfg.lr_policy.kind = LrPolicyKind::probe;
    cfg.trainer.epochs = 17;
    cfg.trainer.batch_size = 33;
    cfg.search.epochs = 4;
    cfg.search.t_init = 0.95;
    cfg.search.replicas = 11;
    cfg.search.warm_start = false;
    cfg.data.preset = "aniso";
    cfg.data.synth_seed = 5;

    const ordered_json j = config_to_json(cfg);
    const RunConfig back = config_from_json(json::parse(dump_json(j)));
    CHECK(back.mode == cfg.mode);
    CHECK(back.method == cfg.method);
    CHECK(back.sampling == cfg.sampling);
    CHECK(back.shots == cfg.shots);
    CHECK(back.way == cfg.way);
    CHECK(back.query == cfg.query);
    CHECK(back.episodes == cfg.episodes);
    CHECK(back.runs == cfg.runs);
    CHECK(back.seed == cfg.seed);
    CHECK(back.jobs == 0); // execution-only: accepted on input, never echoed
    CHECK(back.lr_policy.kind == cfg.lr_policy.kind);
    CHECK(back.trainer.epochs == cfg.trainer.epochs);
    CHECK(back.trainer.batch_size == cfg.trainer.batch_size);
    CHECK(back.search.epochs == cfg.search.epochs);
    CHECK(back.search.t_init == cfg.search.t_init);
    CHECK(back.search.replicas == cfg.search.replicas);
    CHECK(back.search.warm_start == cfg.search.warm_start);
    CHECK(back.data.preset == cfg.data.preset);
    CHECK(back.data.synth_seed == cfg.data.synth_seed);

    // Echo of the echo is byte-stable.
    CHECK(dump_json(config_to_json(back)) == dump_json(j));
}

TEST_CASE("unknown config keys are rejected") {
    const json j = {{"config_version", 1}, {"modee", "pfsl"}};
    try {
        config_from_json(j);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::invalid_config);
    }
}

TEST_CASE("config version is checked") {
    const json j = {{"config_version", 99}};
    try {
        config_from_json(j);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::version_mismatch);
    }
}

TEST_CASE("report views are pure functions of the document") {
    RunConfig cfg;
    cfg.mode = RunMode::fsl;
    cfg.method = Method::baseline;
    cfg.shots = {1};
    cfg.way = 2;
    cfg.query = 4;
    cfg.episodes = 3;
    cfg.runs = 1;
    cfg.seed = 7;
    cfg.trainer.epochs = 5;
    cfg.search.epochs = 2;
    cfg.search.t_init = 0.9;
    cfg.search.replicas = 4;
    cfg.data.preset = "iso-easy";
    cfg.data.pool_per_class = 8;
    cfg.data.test_per_class = 4;

    const ordered_json report = report_to_json(run_experiment(cfg));
    const json doc = json::parse(dump_json(report));

    const std::string text_a = report_to_text(doc);
    const std::string text_b = report_to_text(doc);
    CHECK(text_a == text_b);
    CHECK(text_a.find("fsl") != std::string::npos);

    const std::string csv = report_to_csv(doc);
    // one line per episode
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
