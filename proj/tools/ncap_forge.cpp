// ncap-forge: EuroNCAP AEB scenario generation, simulation and evaluation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ncf/harness.hpp"

namespace fs = std::filesystem;
using namespace ncf;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + p.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << content;
}

harness::ExperimentConfig load_config(const std::string& config_path) {
    harness::ExperimentConfig cfg;
    if (!config_path.empty()) {
        nlohmann::json merged = nlohmann::json(cfg);
        merged.update(nlohmann::json::parse(read_file(config_path)));
        cfg = merged.get<harness::ExperimentConfig>();
    }
    return cfg;
}

fs::path store_root(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("NCAP_FORGE_STORE")) return env;
    return "store";
}

std::string scenario_source_from(const std::string& scenario_path) {
    return scenario_path.empty() ? std::string{} : read_file(scenario_path);
}

dsl::ScenarioRegistry registry_from_dir(const std::string& dir) {
    dsl::ScenarioRegistry registry;
    if (dir.empty()) return registry;
    if (!fs::is_directory(dir)) throw ConfigError("registry directory does not exist: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".scn") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
        for (auto& ast : dsl::parse_many(read_file(f)))
            registry[ast.scenario_name] = std::move(ast);
    return registry;
}

int run_stored_job(harness::Job job, const std::string& store_flag) {
    harness::RunStore store(store_root(store_flag));
    if (store.contains(job.id)) {
        std::cout << "job " << job.id << " already completed in " << store.root().string() << "\n";
        std::cout << read_file(store.job_dir(job.id) / "table.txt");
        return 0;
    }
    const harness::JobOutputs outputs = harness::execute_job(job);
    store.write_job(job, outputs);
    std::cout << "job " << job.id << " -> " << store.job_dir(job.id).string() << "\n";
    std::cout << outputs.table_txt;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EuroNCAP AEB scenario toolkit: DSL generation, tolerance-range variation, "
                 "simulation and evaluation"};
    app.require_subcommand(1);

    // generate
    auto* generate = app.add_subcommand("generate", "Resolve a ScenarioDSL file and emit the scene XML");
    std::string gen_input, gen_registry, gen_output;
    generate->add_option("input", gen_input, "scenario .scn file")->required();
    generate->add_option("--registry", gen_registry, "directory with ancestor .scn files");
    generate->add_option("-o,--output", gen_output, "output .xml path (default: stdout)");

    // run
    auto* run = app.add_subcommand("run", "Simulate a single test run");
    std::string run_scenario, run_profile = "ideal", run_config, run_out;
    double run_speed = 25.0;
    std::optional<double> run_ttc;
    run->add_option("--scenario", run_scenario, "scenario .scn file (default: built-in CCRs fixture)");
    run->add_option("--profile", run_profile, "ideal|osc-left|osc-right")
        ->check(CLI::IsMember({"ideal", "osc-left", "osc-right"}));
    run->add_option("--speed", run_speed, "test speed in km/h");
    run->add_option("--ttc", run_ttc, "reference trigger TTC threshold in s");
    run->add_option("--config", run_config, "config JSON file");
    run->add_option("--out", run_out, "directory for trace.csv and validity.json");

    // exp1 / exp2
    auto* exp1 = app.add_subcommand("exp1", "Constant-speed reference runs (3 variants x 3 speeds)");
    auto* exp2 = app.add_subcommand("exp2", "Speed-variation runs seeded by exp1 trigger points");
    std::string exp_scenario, exp_config, exp_store;
    std::optional<double> exp2_t_initiate;
    for (auto* cmd : {exp1, exp2}) {
        cmd->add_option("--scenario", exp_scenario, "scenario .scn file (default: built-in CCRs fixture)");
        cmd->add_option("--config", exp_config, "config JSON file");
        cmd->add_option("--store", exp_store, "result store directory (or $NCAP_FORGE_STORE)");
    }
    exp2->add_option("--t-initiate", exp2_t_initiate, "seconds before the reference trigger to begin accelerating");

    // batch
    auto* batch = app.add_subcommand("batch", "Process ScenarioDSL job files from a watched directory");
    std::string batch_queue, batch_store, batch_config;
    unsigned batch_jobs = 1;
    bool batch_once = false;
    batch->add_option("--queue", batch_queue, "job queue directory")->required();
    batch->add_option("--store", batch_store, "result store directory (or $NCAP_FORGE_STORE)");
    batch->add_option("--jobs", batch_jobs, "parallel job limit")->check(CLI::PositiveNumber);
    batch->add_option("--config", batch_config, "config JSON file with defaults for incoming jobs");
    batch->add_flag("--once", batch_once, "drain the current queue and exit instead of watching");

    // report
    auto* report = app.add_subcommand("report", "Print the result tables of every completed job");
    std::string report_store;
    report->add_option("--store", report_store, "result store directory (or $NCAP_FORGE_STORE)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) {
            auto asts = dsl::parse_many(read_file(gen_input));
            auto registry = registry_from_dir(gen_registry);
            for (const auto& ast : asts) registry[ast.scenario_name] = ast;
            const auto xml = dsl::generate_scene(dsl::resolve(asts.back(), registry));
            if (gen_output.empty()) std::cout << xml;
            else write_file(gen_output, xml);
            return 0;
        }

        if (run->parsed()) {
            auto cfg = load_config(run_config);
            if (run_ttc) cfg.ttc_threshold_s = *run_ttc;
            const auto scenario = harness::load_scenario(scenario_source_from(run_scenario));
            const auto variant = eval::variant_from_string(run_profile);
            auto params = harness::experiment_params(cfg, run_speed);
            vary::PerturbationProfile profile = vary::ideal_profile(params);
            profile.lateral = harness::lateral_for(cfg, *variant);
            const auto rec = harness::run_single(cfg, scenario,
                                                 {eval::Experiment::custom, *variant, run_speed},
                                                 profile, sim::reference_trigger(cfg.ttc_threshold_s));

            const auto table = eval::build_table({rec.result});
            std::cout << table.text();
            std::cout << (rec.validity.valid ? "run valid per protocol tolerances\n"
                                             : "run INVALID per protocol tolerances\n");
            for (const auto& v : rec.validity.violations)
                std::cout << "  violation: " << v.parameter << " at t=" << v.t_s << " value=" << v.value
                          << " bound=" << v.bound << "\n";
            if (!run_out.empty()) {
                fs::create_directories(run_out);
                write_file(fs::path(run_out) / "trace.csv", sim::to_csv(rec.outcome.trace));
                write_file(fs::path(run_out) / "validity.json", harness::validity_json(rec).dump(2) + "\n");
                write_file(fs::path(run_out) / "results.csv", table.csv());
            }
            return rec.validity.valid ? 0 : 2;
        }

        if (exp1->parsed() || exp2->parsed()) {
            harness::Job job;
            job.config = load_config(exp_config);
            if (exp2->parsed() && exp2_t_initiate) job.config.t_initiate_override_s = exp2_t_initiate;
            job.scenario_source = scenario_source_from(exp_scenario);
            job.experiment = exp1->parsed() ? eval::Experiment::exp1_constant
                                            : eval::Experiment::exp2_speed_variation;
            job.id = harness::job_id_of(job);
            return run_stored_job(std::move(job), exp_store);
        }

        if (batch->parsed()) {
            harness::RunStore store(store_root(batch_store));
            harness::WatchOptions opts;
            opts.jobs = batch_jobs;
            opts.once = batch_once;
            const auto stats = harness::watch_and_run(batch_queue, store,
                                                      load_config(batch_config), opts);
            std::cout << "processed " << stats.processed << " job file(s): " << stats.succeeded
                      << " succeeded, " << stats.failed << " failed, " << stats.skipped
                      << " skipped\n";
            return stats.failed == 0 ? 0 : 2;
        }

        if (report->parsed()) {
            const fs::path root = store_root(report_store);
            if (!fs::is_directory(root)) throw ConfigError("store directory does not exist: " + root.string());
            std::vector<fs::path> dirs;
            for (const auto& e : fs::directory_iterator(root))
                if (e.is_directory() && fs::exists(e.path() / "results.csv")) dirs.push_back(e.path());
            std::sort(dirs.begin(), dirs.end());
            for (const auto& dir : dirs) {
                std::cout << "== job " << dir.filename().string() << "\n";
                std::cout << read_file(dir / "table.txt") << "\n";
            }
            std::cout << dirs.size() << " completed job(s) in " << root.string() << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
