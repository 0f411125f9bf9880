#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ncf/experiment.hpp"
#include "ncf/hash.hpp"

namespace ncf::harness {

namespace fs = std::filesystem;

enum class JobStatus { queued, running, done, failed };

/// Tolerance-range variation request: which interaction paths to run a
/// custom job over, either exhaustively or by sampling.
struct VariationRequest {
    vary::VariationSpec spec;
    enum class Mode { exhaustive, uniform_random, boundary } mode = Mode::boundary;
    std::size_t count = 16;
    double speed_kmh = 25.0;

    std::vector<vary::VariationPath> paths() const {
        switch (mode) {
            case Mode::exhaustive:
                return vary::enumerate_paths(spec);
            case Mode::uniform_random:
                return vary::sample_paths(spec, vary::SampleStrategy::uniform_random, count);
            case Mode::boundary:
                return vary::sample_paths(spec, vary::SampleStrategy::boundary, count);
        }
        return {};
    }
};

/// One simulation job: a scenario plus the experiment to run on it. Custom
/// jobs carry either an explicit run list or a variation request. The id is
/// a content hash, so resubmitting identical content is a no-op.
struct Job {
    std::string id;
    std::string scenario_source;
    eval::Experiment experiment = eval::Experiment::custom;
    ExperimentConfig config;
    std::vector<std::pair<eval::Variant, double>> runs;  // custom experiment only
    std::optional<VariationRequest> variation;           // custom experiment only
    JobStatus status = JobStatus::queued;
    std::string origin;  // queue file name, informational
};

inline nlohmann::json job_snapshot(const Job& job) {
    nlohmann::json j{
        {"experiment", eval::to_string(job.experiment)},
        {"scenario", job.scenario_source},
        {"config", job.config},
    };
    if (job.experiment == eval::Experiment::custom && !job.variation) {
        auto& runs = j["runs"] = nlohmann::json::array();
        for (const auto& [variant, speed] : job.runs)
            runs.push_back({{"variant", eval::to_string(variant)}, {"speed_kmh", speed}});
    }
    if (job.variation) {
        const auto& v = *job.variation;
        auto& jv = j["variation"] = nlohmann::json::object();
        jv["resolution"] = v.spec.resolution;
        jv["seed"] = v.spec.seed;
        auto& set = jv["interactions"] = nlohmann::json::array();
        for (const auto& ia : v.spec.interaction_set)
            set.push_back({{"kind", vary::mnemonic(ia.kind)}, {"magnitude", ia.magnitude}});
        jv["mode"] = v.mode == VariationRequest::Mode::exhaustive      ? "exhaustive"
                     : v.mode == VariationRequest::Mode::uniform_random ? "uniform_random"
                                                                        : "boundary";
        jv["count"] = v.count;
        jv["speed_kmh"] = v.speed_kmh;
    }
    return j;
}

inline std::string job_id_of(const Job& job) {
    return hex64(fnv1a64(job_snapshot(job).dump()));
}

inline Job job_from_snapshot(const nlohmann::json& j) {
    Job job;
    job.scenario_source = j.value("scenario", std::string{});
    if (j.contains("config")) job.config = j.at("config").get<ExperimentConfig>();
    const auto exp = j.value("experiment", std::string{"custom"});
    if (exp == "exp1") job.experiment = eval::Experiment::exp1_constant;
    else if (exp == "exp2") job.experiment = eval::Experiment::exp2_speed_variation;
    else if (exp == "custom") job.experiment = eval::Experiment::custom;
    else throw ConfigError("unknown experiment kind: " + exp);
    if (j.contains("runs")) {
        for (const auto& r : j.at("runs")) {
            const auto vs = r.value("variant", std::string{"ideal"});
            const auto variant = eval::variant_from_string(vs);
            if (!variant) throw ConfigError("unknown variant: " + vs);
            job.runs.emplace_back(*variant, r.value("speed_kmh", job.config.base_speed_kmh));
        }
    }
    if (j.contains("variation")) {
        const auto& jv = j.at("variation");
        VariationRequest v;
        v.spec.resolution = jv.value("resolution", 1);
        v.spec.seed = jv.value("seed", std::uint64_t{0});
        if (!jv.contains("interactions")) throw ConfigError("variation request lacks interactions");
        for (const auto& ia : jv.at("interactions")) {
            vary::Interaction interaction;
            std::string kind_str;
            if (ia.is_string()) kind_str = ia.get<std::string>();
            else {
                kind_str = ia.value("kind", std::string{});
                interaction.magnitude = ia.value("magnitude", 0.0);
            }
            const auto kind = vary::kind_from_mnemonic(kind_str);
            if (!kind) throw ConfigError("unknown interaction mnemonic: " + kind_str);
            interaction.kind = *kind;
            if (interaction.magnitude == 0.0)
                interaction.magnitude = *kind == vary::InteractionKind::speed_increase ? 0.1 : 0.05;
            v.spec.interaction_set.push_back(interaction);
        }
        const auto mode = jv.value("mode", std::string{"boundary"});
        if (mode == "exhaustive") v.mode = VariationRequest::Mode::exhaustive;
        else if (mode == "uniform_random") v.mode = VariationRequest::Mode::uniform_random;
        else if (mode == "boundary") v.mode = VariationRequest::Mode::boundary;
        else throw ConfigError("unknown variation mode: " + mode);
        v.count = jv.value("count", std::size_t{16});
        v.speed_kmh = jv.value("speed_kmh", job.config.base_speed_kmh);
        job.variation = v;
    }
    if (job.experiment == eval::Experiment::custom && job.runs.empty() && !job.variation)
        job.runs.emplace_back(eval::Variant::ideal, job.config.base_speed_kmh);
    job.id = job_id_of(job);
    return job;
}

/// Build a job from a queue file: bare `.scn` sources become a single ideal
/// run, `.json` manifests may select an experiment, override config keys,
/// and reference or inline the scenario.
inline Job job_from_file(const fs::path& file, const ExperimentConfig& defaults) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot read job file " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string content = buf.str();

    Job job;
    job.config = defaults;
    job.origin = file.filename().string();

    if (file.extension() == ".scn") {
        job.scenario_source = content;
        job.experiment = eval::Experiment::custom;
        job.runs.emplace_back(eval::Variant::ideal, defaults.base_speed_kmh);
    } else {
        nlohmann::json manifest = nlohmann::json::parse(content);
        if (manifest.contains("config")) {
            nlohmann::json merged = nlohmann::json(defaults);
            merged.update(manifest.at("config"));
            job.config = merged.get<ExperimentConfig>();
        }
        if (manifest.contains("scenario_file")) {
            const fs::path p = file.parent_path() / manifest.at("scenario_file").get<std::string>();
            std::ifstream sin(p, std::ios::binary);
            if (!sin) throw ConfigError("cannot read scenario file " + p.string());
            std::stringstream sbuf;
            sbuf << sin.rdbuf();
            job.scenario_source = sbuf.str();
        } else {
            job.scenario_source = manifest.value("scenario", std::string{});
        }
        const auto exp = manifest.value("experiment", std::string{"custom"});
        nlohmann::json jj = job_snapshot(job);
        jj["experiment"] = exp;
        if (manifest.contains("runs")) jj["runs"] = manifest.at("runs");
        if (manifest.contains("variation")) jj["variation"] = manifest.at("variation");
        Job parsed = job_from_snapshot(jj);
        parsed.origin = job.origin;
        return parsed;
    }
    job.id = job_id_of(job);
    return job;
}

struct JobOutputs {
    std::string scenario_xml;
    std::vector<std::pair<std::string, std::string>> traces;  // filename -> csv
    std::string profiles_txt;                                 // one line per run
    std::string validity_jsonl;
    std::string results_csv;
    std::string table_txt;
    nlohmann::json config_snapshot;
};

inline std::string trace_filename(const eval::RunLabel& label) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s_%s_%.1f.csv", eval::to_string(label.experiment).c_str(),
                  label.variant_name().c_str(), label.test_case_kmh);
    return buf;
}

/// Run every simulation a job asks for and collect the artifacts that go
/// into its store directory.
inline JobOutputs execute_job(const Job& job) {
    const ScenarioSetup scenario = load_scenario(job.scenario_source);
    const sim::AebTrigger trigger = sim::reference_trigger(job.config.ttc_threshold_s);

    std::vector<RunRecord> records;
    std::vector<std::string> profile_lines;
    switch (job.experiment) {
        case eval::Experiment::exp1_constant:
            records = run_experiment_1(job.config, scenario, trigger);
            break;
        case eval::Experiment::exp2_speed_variation: {
            ExperimentConfig ref_cfg = job.config;
            ref_cfg.test_speeds_kmh = {job.config.base_speed_kmh};
            const auto reference = run_experiment_1(ref_cfg, scenario, trigger);
            records = run_experiment_2(job.config, scenario, trigger,
                                       reference_trigger_times(reference, job.config.base_speed_kmh));
            break;
        }
        case eval::Experiment::custom:
            if (job.variation) {
                const auto& v = *job.variation;
                auto params = experiment_params(job.config, v.speed_kmh);
                params.var_start_t_s = estimate_window_start(job.config, scenario.initial_gap_m,
                                                             v.speed_kmh, v.spec.t0_ttc_s);
                const auto paths = v.paths();
                for (std::size_t i = 0; i < paths.size(); ++i) {
                    char tag[32];
                    std::snprintf(tag, sizeof tag, "path-%04zu", i);
                    eval::RunLabel label{eval::Experiment::custom, eval::Variant::ideal, v.speed_kmh, tag};
                    records.push_back(run_single(job.config, scenario, label,
                                                 vary::path_to_profile(paths[i], params), trigger));
                    profile_lines.push_back(vary::to_line(paths[i]));
                }
            } else {
                for (const auto& [variant, speed] : job.runs) {
                    auto params = experiment_params(job.config, speed);
                    vary::PerturbationProfile profile = vary::ideal_profile(params);
                    profile.lateral = lateral_for(job.config, variant);
                    records.push_back(run_single(job.config, scenario,
                                                 {eval::Experiment::custom, variant, speed}, profile,
                                                 trigger));
                }
            }
            break;
    }

    JobOutputs out;
    out.scenario_xml = dsl::generate_scene(scenario.resolved);
    std::vector<eval::RunResult> results;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        out.traces.emplace_back(trace_filename(rec.result.label), sim::to_csv(rec.outcome.trace));
        out.profiles_txt += trace_filename(rec.result.label) + ": " +
                            (i < profile_lines.size() ? profile_lines[i]
                                                      : rec.result.label.variant_name()) +
                            "\n";
        out.validity_jsonl += validity_json(rec).dump() + "\n";
        results.push_back(rec.result);
    }
    const auto table = eval::build_table(std::move(results));
    out.results_csv = table.csv();
    out.table_txt = table.text();
    out.config_snapshot = job_snapshot(job);
    out.config_snapshot["id"] = job.id;
    return out;
}

/// Re-execute a stored config snapshot; outputs are byte-identical to the
/// original job's.
inline JobOutputs run_from_snapshot(const nlohmann::json& snapshot) {
    return execute_job(job_from_snapshot(snapshot));
}

/// Directory-backed result store. A job directory appears atomically via
/// rename, so a completed directory is immutable and a crash mid-job leaves
/// only a staging directory that the next run wipes.
class RunStore {
public:
    explicit RunStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

    const fs::path& root() const { return root_; }
    fs::path job_dir(const std::string& id) const { return root_ / id; }
    bool contains(const std::string& id) const { return fs::exists(job_dir(id)); }

    void write_job(const Job& job, const JobOutputs& outputs) {
        const fs::path staging = root_ / (job.id + ".partial");
        fs::remove_all(staging);
        fs::create_directories(staging / "traces");

        write_file(staging / "scenario.scn", job.scenario_source.empty()
                                                 ? std::string(default_scenario_source())
                                                 : job.scenario_source);
        write_file(staging / "scenario.xml", outputs.scenario_xml);
        write_file(staging / "config.json", outputs.config_snapshot.dump(2) + "\n");
        for (const auto& [name, csv] : outputs.traces) write_file(staging / "traces" / name, csv);
        write_file(staging / "profiles.txt", outputs.profiles_txt);
        write_file(staging / "validity.jsonl", outputs.validity_jsonl);
        write_file(staging / "results.csv", outputs.results_csv);
        write_file(staging / "table.txt", outputs.table_txt);

        const fs::path final_dir = job_dir(job.id);
        if (fs::exists(final_dir)) {
            fs::remove_all(staging);  // identical job landed concurrently
            return;
        }
        fs::rename(staging, final_dir);
    }

    void write_failure(const std::string& id, const std::string& diagnostics) {
        const fs::path dir = root_ / (id + ".failed");
        fs::create_directories(dir);
        write_file(dir / "diagnostics.txt", diagnostics + "\n");
    }

    void clean_staging() {
        for (const auto& e : fs::directory_iterator(root_)) {
            const auto name = e.path().filename().string();
            if (e.is_directory() && name.size() > 8 && name.ends_with(".partial")) fs::remove_all(e.path());
        }
    }

private:
    static void write_file(const fs::path& p, const std::string& content) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw fs::filesystem_error("cannot open for writing", p, std::make_error_code(std::errc::io_error));
        out << content;
        out.flush();
        if (!out) throw fs::filesystem_error("write failed", p, std::make_error_code(std::errc::io_error));
    }

    fs::path root_;
};

struct DrainStats {
    std::size_t processed = 0;
    std::size_t succeeded = 0;
    std::size_t failed = 0;
    std::size_t skipped = 0;
};

namespace detail {

inline std::vector<fs::path> pending_job_files(const fs::path& queue_dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(queue_dir)) {
        if (!e.is_regular_file()) continue;
        const auto ext = e.path().extension();
        if (ext == ".scn" || ext == ".json") files.push_back(e.path());
    }
    // deterministic batch order: name first, modification time as tiebreak
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        if (a.filename() != b.filename()) return a.filename() < b.filename();
        return fs::last_write_time(a) < fs::last_write_time(b);
    });
    return files;
}

}  // namespace detail

/// Process every job file currently in the queue directory, oldest name
/// first. Job-level failures are recorded in the store and do not stop the
/// drain; store write failures propagate.
inline DrainStats drain_queue(const fs::path& queue_dir, RunStore& store,
                              const ExperimentConfig& defaults, unsigned jobs = 1) {
    if (!fs::is_directory(queue_dir)) throw ConfigError("queue directory does not exist: " + queue_dir.string());
    store.clean_staging();

    const auto files = detail::pending_job_files(queue_dir);
    DrainStats stats;
    stats.processed = files.size();

    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::exception_ptr store_error;

    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= files.size()) return;
            {
                std::lock_guard lock(mu);
                if (store_error) return;
            }
            const fs::path& file = files[i];
            try {
                Job job;
                try {
                    job = job_from_file(file, defaults);
                } catch (const std::exception& e) {
                    std::ifstream in(file, std::ios::binary);
                    std::stringstream buf;
                    buf << in.rdbuf();
                    const std::string fallback_id = hex64(fnv1a64(buf.str()));
                    store.write_failure(fallback_id, "job file " + file.filename().string() +
                                                         " rejected: " + e.what());
                    std::lock_guard lock(mu);
                    ++stats.failed;
                    fs::remove(file);
                    continue;
                }
                if (store.contains(job.id)) {
                    std::lock_guard lock(mu);
                    ++stats.skipped;
                    fs::remove(file);
                    continue;
                }
                try {
                    job.status = JobStatus::running;
                    const JobOutputs outputs = execute_job(job);
                    store.write_job(job, outputs);
                    job.status = JobStatus::done;
                    std::lock_guard lock(mu);
                    ++stats.succeeded;
                } catch (const fs::filesystem_error&) {
                    throw;  // store write failure aborts the loop
                } catch (const std::exception& e) {
                    job.status = JobStatus::failed;
                    store.write_failure(job.id, "job " + file.filename().string() + " failed: " + e.what());
                    std::lock_guard lock(mu);
                    ++stats.failed;
                }
                fs::remove(file);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!store_error) store_error = std::current_exception();
                return;
            }
        }
    };

    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < jobs; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (store_error) std::rethrow_exception(store_error);
    return stats;
}

struct WatchOptions {
    unsigned jobs = 1;
    std::chrono::milliseconds poll{200};
    bool once = false;  // drain the current queue and return (used by tests)
};

/// Fig.-4-style service loop: watch the queue directory, treat incoming
/// additions as simulation jobs, and idle when the queue is empty.
inline DrainStats watch_and_run(const fs::path& queue_dir, RunStore& store,
                                const ExperimentConfig& defaults, const WatchOptions& opts = {}) {
    DrainStats total;
    while (true) {
        const DrainStats stats = drain_queue(queue_dir, store, defaults, opts.jobs);
        total.processed += stats.processed;
        total.succeeded += stats.succeeded;
        total.failed += stats.failed;
        total.skipped += stats.skipped;
        if (opts.once) return total;
        if (stats.processed == 0) std::this_thread::sleep_for(opts.poll);
    }
}

}  // namespace ncf::harness
