#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ncf/harness.hpp"

using namespace ncf;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path = fs::temp_directory_path() /
               ("ncf_" + tag + "_" + std::to_string(counter.fetch_add(1)) + "_" +
                std::to_string(std::chrono::steady_clock::now().time_since_epoch().count() % 100000));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    REQUIRE(out);
    out << content;
}

const harness::RunRecord& record_of(const std::vector<harness::RunRecord>& recs,
                                    eval::Variant variant, double test_case) {
    for (const auto& r : recs)
        if (r.result.label.variant == variant && r.result.label.test_case_kmh == test_case) return r;
    FAIL("record not found");
    return recs.front();
}

}  // namespace

TEST_CASE("find_t_initiate is dv over a plus the margin", "[harness]") {
    CHECK(harness::find_t_initiate(0.1111, 0.1, 0.0) == Approx(1.111));
    CHECK(harness::find_t_initiate(0.2222, 0.1, 0.5) == Approx(2.722));
    CHECK(harness::find_t_initiate(0.0, 0.1, 0.0) == 0.0);
    CHECK_THROWS_AS(harness::find_t_initiate(0.1, 0.0, 0.0), ConfigError);
}

TEST_CASE("the built-in scenario resolves to the 67.5 m setup", "[harness]") {
    const auto setup = harness::load_scenario({});
    CHECK(setup.resolved.name == "CCRs_25kmh");
    CHECK(setup.initial_gap_m == Approx(67.5));
    CHECK(setup.resolved.vut().name == "VehicleUnderTest");

    const char* lonely = "scenario S { Layout { Database = \"m\" } TrafficElements { "
                         "Player V { Description { Control = external } Init { PosAbsolute = (0,0,0,true) } } } }";
    CHECK_THROWS_WITH(harness::load_scenario(lonely),
                      Catch::Matchers::ContainsSubstring("no target player"));
}

TEST_CASE("experiment 1 produces the 3x3 grid with mirror symmetry", "[harness][exp1]") {
    const harness::ExperimentConfig cfg;
    const auto scenario = harness::load_scenario({});
    const auto trigger = sim::reference_trigger(cfg.ttc_threshold_s);
    const auto recs = harness::run_experiment_1(cfg, scenario, trigger);

    REQUIRE(recs.size() == 9);

    SECTION("all runs fire and are valid") {
        for (const auto& r : recs) {
            REQUIRE(r.result.v_aeb_kmh.has_value());
            CHECK(r.result.d_x_m.value() > 0.0);
            CHECK(r.result.valid);
        }
    }

    SECTION("left and right oscillation rows are identical") {
        for (const double speed : cfg.test_speeds_kmh) {
            const auto& l = record_of(recs, eval::Variant::osc_left, speed).result;
            const auto& r = record_of(recs, eval::Variant::osc_right, speed).result;
            CHECK(l.v_aeb_kmh == r.v_aeb_kmh);
            CHECK(l.t_aeb_s == r.t_aeb_s);
            CHECK(l.d_x_m == r.d_x_m);
            CHECK(l.v_res_kmh == Approx(r.v_res_kmh));
        }
    }

    SECTION("constant-speed regime is reached before the trigger") {
        const auto& r = record_of(recs, eval::Variant::ideal, 25.8).result;
        CHECK(*r.v_aeb_kmh == Approx(25.8).epsilon(1e-9));
    }

    SECTION("the reported residual speed is the analytic one") {
        const auto& r = record_of(recs, eval::Variant::ideal, 25.0).result;
        const double expected =
            mps_to_kmh(eval::residual_velocity(kmh_to_mps(*r.v_aeb_kmh), *r.d_x_m, cfg.brake_model()));
        CHECK(r.v_res_kmh == Approx(expected));
    }

    SECTION("reference trigger times cover all variants at the base speed") {
        const auto t_aeb = harness::reference_trigger_times(recs, cfg.base_speed_kmh);
        REQUIRE(t_aeb.size() == 3);
        CHECK(t_aeb.at(eval::Variant::ideal) > 0.0);
    }
}

TEST_CASE("experiment 2 accelerates late and triggers earlier", "[harness][exp2]") {
    const harness::ExperimentConfig cfg;
    const auto scenario = harness::load_scenario({});
    const auto trigger = sim::reference_trigger(cfg.ttc_threshold_s);
    const auto exp1 = harness::run_experiment_1(cfg, scenario, trigger);
    const auto t_ref = harness::reference_trigger_times(exp1, cfg.base_speed_kmh);
    const auto exp2 = harness::run_experiment_2(cfg, scenario, trigger, t_ref);

    REQUIRE(exp2.size() == 9);

    SECTION("the base-speed target degenerates to experiment 1") {
        for (const auto variant : harness::kVariantOrder) {
            const auto& e1 = record_of(exp1, variant, cfg.base_speed_kmh).result;
            const auto& e2 = record_of(exp2, variant, cfg.base_speed_kmh).result;
            CHECK(e1.v_aeb_kmh == e2.v_aeb_kmh);
            CHECK(e1.t_aeb_s == e2.t_aeb_s);
            CHECK(e1.d_x_m == e2.d_x_m);
            CHECK(e1.v_res_kmh == e2.v_res_kmh);
        }
    }

    SECTION("accelerating approaches fire at strictly larger distances than the base run") {
        for (const auto variant : harness::kVariantOrder) {
            const double base_dx = *record_of(exp1, variant, cfg.base_speed_kmh).result.d_x_m;
            for (const double target : {25.4, 25.8}) {
                const auto& rec = record_of(exp2, variant, target).result;
                CHECK(*rec.d_x_m > base_dx);
                CHECK(*rec.v_aeb_kmh > cfg.base_speed_kmh);
            }
        }
    }

    SECTION("ideal-trajectory speed-variation runs avoid the collision") {
        for (const double target : cfg.test_speeds_kmh) {
            const auto& rec = record_of(exp2, eval::Variant::ideal, target);
            CHECK_FALSE(rec.result.collided);
            CHECK(rec.result.v_res_kmh == 0.0);
        }
    }

    SECTION("missing reference trigger times are rejected") {
        CHECK_THROWS_AS(harness::run_experiment_2(cfg, scenario, trigger, {}), ConfigError);
    }

    SECTION("a T_initiate below the feasibility minimum is a configuration error") {
        harness::ExperimentConfig bad = cfg;
        bad.t_initiate_override_s = 1.0;  // 25.4 km/h needs dv/a = 1.11 s
        CHECK_THROWS_AS(harness::run_experiment_2(bad, scenario, trigger, t_ref), ConfigError);
    }
}

TEST_CASE("job ids are stable content hashes", "[harness][jobs]") {
    harness::Job a;
    a.scenario_source = "scenario S {}";
    a.experiment = eval::Experiment::exp1_constant;
    harness::Job b = a;
    CHECK(harness::job_id_of(a) == harness::job_id_of(b));

    b.config.ttc_threshold_s = 1.3;
    CHECK(harness::job_id_of(a) != harness::job_id_of(b));

    b = a;
    b.scenario_source = "scenario S2 {}";
    CHECK(harness::job_id_of(a) != harness::job_id_of(b));
}

TEST_CASE("jobs load from queue files", "[harness][jobs]") {
    TempDir dir("jobfiles");
    const harness::ExperimentConfig defaults;

    SECTION("bare .scn becomes a single ideal run") {
        spit(dir.path / "a.scn", harness::default_scenario_source());
        const auto job = harness::job_from_file(dir.path / "a.scn", defaults);
        CHECK(job.experiment == eval::Experiment::custom);
        REQUIRE(job.runs.size() == 1);
        CHECK(job.runs[0].first == eval::Variant::ideal);
        CHECK(job.runs[0].second == defaults.base_speed_kmh);
    }

    SECTION("manifest selects the experiment and overrides config keys") {
        spit(dir.path / "m.json",
             R"({"experiment":"exp1","config":{"ttc_threshold_s":1.2,"test_speeds_kmh":[25.0]}})");
        const auto job = harness::job_from_file(dir.path / "m.json", defaults);
        CHECK(job.experiment == eval::Experiment::exp1_constant);
        CHECK(job.config.ttc_threshold_s == Approx(1.2));
        CHECK(job.config.test_speeds_kmh == std::vector<double>{25.0});
        CHECK(job.config.dt_s == defaults.dt_s);  // untouched keys keep defaults
    }

    SECTION("manifest may reference a scenario file next to it") {
        spit(dir.path / "scene.scn", harness::default_scenario_source());
        spit(dir.path / "m.json", R"({"experiment":"custom","scenario_file":"scene.scn",)"
                                  R"("runs":[{"variant":"osc-left","speed_kmh":30.0}]})");
        const auto job = harness::job_from_file(dir.path / "m.json", defaults);
        CHECK(job.scenario_source == harness::default_scenario_source());
        REQUIRE(job.runs.size() == 1);
        CHECK(job.runs[0].first == eval::Variant::osc_left);
        CHECK(job.runs[0].second == 30.0);
    }
}

TEST_CASE("variation-driven jobs run one simulation per path", "[harness][jobs]") {
    TempDir dir("variation");
    spit(dir.path / "v.json", R"({
      "experiment": "custom",
      "variation": {
        "resolution": 3,
        "interactions": ["lat-left", "lat-right", "spd-inc"],
        "mode": "boundary",
        "count": 8,
        "speed_kmh": 25.0
      }
    })");
    const harness::ExperimentConfig defaults;
    const auto job = harness::job_from_file(dir.path / "v.json", defaults);
    REQUIRE(job.variation.has_value());
    CHECK(job.variation->spec.interaction_set.size() == 3);

    const auto outputs = harness::execute_job(job);
    REQUIRE(outputs.traces.size() == 3);  // boundary: one constant path per interaction
    CHECK(outputs.traces[0].first == "custom_path-0000_25.0.csv");

    // profiles file records each path as mnemonics
    CHECK(outputs.profiles_txt.find("path-0000") != std::string::npos);
    CHECK(outputs.profiles_txt.find("lat-left,lat-left,lat-left") != std::string::npos);
    CHECK(outputs.profiles_txt.find("spd-inc,spd-inc,spd-inc") != std::string::npos);

    // distinct labels survive the table
    std::size_t lines = 0;
    for (char c : outputs.results_csv) lines += c == '\n';
    CHECK(lines == 4);

    // snapshot round-trip reproduces the same runs
    const auto replay = harness::run_from_snapshot(outputs.config_snapshot);
    REQUIRE(replay.traces.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(replay.traces[i].second == outputs.traces[i].second);
}

TEST_CASE("the run store persists and detects completed jobs", "[harness][store]") {
    TempDir dir("store");
    harness::RunStore store(dir.path / "store");

    harness::Job job;
    job.config.dt_s = 0.01;
    job.experiment = eval::Experiment::custom;
    job.runs = {{eval::Variant::ideal, 25.0}};
    job.id = harness::job_id_of(job);

    CHECK_FALSE(store.contains(job.id));
    const auto outputs = harness::execute_job(job);
    store.write_job(job, outputs);

    CHECK(store.contains(job.id));
    const auto d = store.job_dir(job.id);
    CHECK(fs::exists(d / "scenario.scn"));
    CHECK(fs::exists(d / "scenario.xml"));
    CHECK(fs::exists(d / "config.json"));
    CHECK(fs::exists(d / "results.csv"));
    CHECK(fs::exists(d / "table.txt"));
    CHECK(fs::exists(d / "validity.jsonl"));
    CHECK(fs::exists(d / "traces" / "custom_ideal_25.0.csv"));
    CHECK_FALSE(fs::exists(dir.path / "store" / (job.id + ".partial")));

    SECTION("every validity line is one JSON object") {
        std::istringstream lines(slurp(d / "validity.jsonl"));
        std::string line;
        std::size_t n = 0;
        while (std::getline(lines, line)) {
            const auto j = nlohmann::json::parse(line);
            CHECK(j.contains("valid"));
            ++n;
        }
        CHECK(n == outputs.traces.size());
    }

    SECTION("the stored snapshot reproduces the run byte for byte") {
        const auto snapshot = nlohmann::json::parse(slurp(d / "config.json"));
        const auto replay = harness::run_from_snapshot(snapshot);
        CHECK(replay.results_csv == slurp(d / "results.csv"));
        REQUIRE(replay.traces.size() == 1);
        CHECK(replay.traces[0].second == slurp(d / "traces" / "custom_ideal_25.0.csv"));
        CHECK(replay.scenario_xml == slurp(d / "scenario.xml"));
    }
}

TEST_CASE("drain processes the queue in order and isolates failures", "[harness][batch]") {
    TempDir dir("batch");
    const fs::path queue = dir.path / "queue";
    fs::create_directories(queue);
    harness::RunStore store(dir.path / "store");
    harness::ExperimentConfig defaults;
    defaults.test_speeds_kmh = {25.0};

    SECTION("an empty queue idles without writing") {
        const auto stats = harness::drain_queue(queue, store, defaults);
        CHECK(stats.processed == 0);
        CHECK(fs::is_empty(store.root()));
    }

    SECTION("a valid job lands in the store and leaves the queue") {
        spit(queue / "job1.scn", harness::default_scenario_source());
        const auto stats = harness::drain_queue(queue, store, defaults);
        CHECK(stats.processed == 1);
        CHECK(stats.succeeded == 1);
        CHECK(fs::is_empty(queue));

        std::size_t dirs = 0;
        for (const auto& e : fs::directory_iterator(store.root())) {
            CHECK(fs::exists(e.path() / "results.csv"));
            ++dirs;
        }
        CHECK(dirs == 1);
    }

    SECTION("a malformed job is marked failed and the loop continues") {
        spit(queue / "a_bad.scn", "scenario Broken {");
        spit(queue / "b_good.scn", harness::default_scenario_source());
        const auto stats = harness::drain_queue(queue, store, defaults);
        CHECK(stats.processed == 2);
        CHECK(stats.failed == 1);
        CHECK(stats.succeeded == 1);

        bool saw_diagnostics = false;
        for (const auto& e : fs::directory_iterator(store.root()))
            if (e.path().filename().string().ends_with(".failed")) {
                saw_diagnostics = true;
                const auto msg = slurp(e.path() / "diagnostics.txt");
                CHECK(msg.find("a_bad.scn") != std::string::npos);
            }
        CHECK(saw_diagnostics);
    }

    SECTION("resubmitting identical content is skipped") {
        spit(queue / "j.scn", harness::default_scenario_source());
        auto stats = harness::drain_queue(queue, store, defaults);
        CHECK(stats.succeeded == 1);

        spit(queue / "j_again.scn", harness::default_scenario_source());
        stats = harness::drain_queue(queue, store, defaults);
        CHECK(stats.processed == 1);
        CHECK(stats.skipped == 1);
        CHECK(stats.succeeded == 0);
    }

    SECTION("a stale staging directory is wiped before processing") {
        spit(queue / "j.scn", harness::default_scenario_source());
        const auto job = harness::job_from_file(queue / "j.scn", defaults);
        fs::create_directories(store.root() / (job.id + ".partial"));
        spit(store.root() / (job.id + ".partial") / "junk.txt", "leftover");

        const auto stats = harness::drain_queue(queue, store, defaults);
        CHECK(stats.succeeded == 1);
        CHECK(store.contains(job.id));
        CHECK_FALSE(fs::exists(store.root() / (job.id + ".partial")));
    }

    SECTION("parallel workers process every job exactly once") {
        spit(queue / "a.scn", harness::default_scenario_source());
        spit(queue / "b.json", R"({"experiment":"custom","runs":[{"variant":"osc-left","speed_kmh":20.0}]})");
        spit(queue / "c.json", R"({"experiment":"custom","runs":[{"variant":"osc-right","speed_kmh":30.0}]})");
        const auto stats = harness::drain_queue(queue, store, defaults, 2);
        CHECK(stats.processed == 3);
        CHECK(stats.succeeded == 3);
        CHECK(fs::is_empty(queue));
    }

    SECTION("watch with once drains and returns") {
        spit(queue / "j.scn", harness::default_scenario_source());
        harness::WatchOptions opts;
        opts.once = true;
        const auto stats = harness::watch_and_run(queue, store, defaults, opts);
        CHECK(stats.succeeded == 1);
    }
}
