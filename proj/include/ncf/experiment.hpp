#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncf/dsl/parser.hpp"
#include "ncf/dsl/resolver.hpp"
#include "ncf/dsl/scene_writer.hpp"
#include "ncf/errors.hpp"
#include "ncf/evaluation.hpp"
#include "ncf/profile.hpp"
#include "ncf/protocol.hpp"
#include "ncf/sim.hpp"
#include "ncf/trace_csv.hpp"
#include "ncf/units.hpp"

namespace ncf::harness {

/// Self-contained CCRs fixture: a base scenario and the concrete test-case
/// scenario extending it. Used when no scenario file is supplied.
inline const char* default_scenario_source() {
    return R"(// Built-in CCRs fixture: stationary target 67.5 m ahead of the VUT.
scenario CCRs_Base {
  Layout { Database = "test.xodr" }
  VehicleList { ConfigFile = "cfg.xml" }
  TrafficElements {
    Player VehicleUnderTest {
      Description {
        Driver = DefaultDriver
        Control = external
        Type = Brand_VehicleProject
      }
    }
    Player TargetVehicle {
      Description {
        Driver = StaticDriver
        Control = internal
        Type = Brand_TargetDummy
      }
      Init { PosAbsolute = (67.5,0,0,false) }
    }
  }
  PulkTraffic { Density = 0 }
}
scenario CCRs_25kmh extends CCRs_Base {
  TrafficElements {
    Player VehicleUnderTest {
      Init { PosAbsolute = (0,0,0,true) }
    }
  }
}
)";
}

/// Everything one experiment needs: simulator settings, trigger threshold,
/// profile shaping and the test-speed plan. Serializes to the config
/// snapshot stored with each job.
struct ExperimentConfig {
    double dt_s = 0.01;
    double horizon_s = 60.0;
    double brake_decel_mps2 = 3.5;
    double brake_delay_s = 0.3;
    sim::DelayBehavior delay_behavior = sim::DelayBehavior::continue_program;

    double ttc_threshold_s = 1.4;

    double base_accel_mps2 = 2.0;
    double osc_amplitude_m = 0.1;
    double osc_period_s = 2.0;
    double boost_accel_mps2 = 0.1;
    double t_initiate_margin_s = 0.5;
    std::optional<double> t_initiate_override_s;

    double base_speed_kmh = 25.0;
    std::vector<double> test_speeds_kmh{25.0, 25.4, 25.8};

    protocol::ToleranceSpec tolerances;
    std::uint64_t seed = 0;

    eval::BrakeModel brake_model() const { return {brake_decel_mps2, brake_delay_s}; }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = nlohmann::json{
        {"dt_s", c.dt_s},
        {"horizon_s", c.horizon_s},
        {"brake_decel_mps2", c.brake_decel_mps2},
        {"brake_delay_s", c.brake_delay_s},
        {"delay_behavior", c.delay_behavior == sim::DelayBehavior::hold_speed ? "hold_speed" : "continue_program"},
        {"ttc_threshold_s", c.ttc_threshold_s},
        {"base_accel_mps2", c.base_accel_mps2},
        {"osc_amplitude_m", c.osc_amplitude_m},
        {"osc_period_s", c.osc_period_s},
        {"boost_accel_mps2", c.boost_accel_mps2},
        {"t_initiate_margin_s", c.t_initiate_margin_s},
        {"base_speed_kmh", c.base_speed_kmh},
        {"test_speeds_kmh", c.test_speeds_kmh},
        {"seed", c.seed},
        {"tolerances",
         {{"vut_speed_over_kmh", c.tolerances.vut_speed_over_kmh},
          {"vut_speed_symmetric", c.tolerances.vut_speed_symmetric},
          {"lateral_m", c.tolerances.lateral_m},
          {"target_speed_kmh", c.tolerances.target_speed_kmh},
          {"yaw_rate_dps", c.tolerances.yaw_rate_dps},
          {"steer_rate_dps", c.tolerances.steer_rate_dps},
          {"window_start_ttc_s", c.tolerances.window_start_ttc_s}}},
    };
    if (c.t_initiate_override_s) j["t_initiate_s"] = *c.t_initiate_override_s;
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c = ExperimentConfig{};
    auto get = [&j](const char* key, auto& slot) {
        if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
    };
    get("dt_s", c.dt_s);
    get("horizon_s", c.horizon_s);
    get("brake_decel_mps2", c.brake_decel_mps2);
    get("brake_delay_s", c.brake_delay_s);
    if (j.contains("delay_behavior")) {
        const auto s = j.at("delay_behavior").get<std::string>();
        if (s == "hold_speed") c.delay_behavior = sim::DelayBehavior::hold_speed;
        else if (s == "continue_program") c.delay_behavior = sim::DelayBehavior::continue_program;
        else throw ConfigError("unknown delay_behavior: " + s);
    }
    get("ttc_threshold_s", c.ttc_threshold_s);
    get("base_accel_mps2", c.base_accel_mps2);
    get("osc_amplitude_m", c.osc_amplitude_m);
    get("osc_period_s", c.osc_period_s);
    get("boost_accel_mps2", c.boost_accel_mps2);
    get("t_initiate_margin_s", c.t_initiate_margin_s);
    get("base_speed_kmh", c.base_speed_kmh);
    get("test_speeds_kmh", c.test_speeds_kmh);
    get("seed", c.seed);
    if (j.contains("t_initiate_s")) c.t_initiate_override_s = j.at("t_initiate_s").get<double>();
    if (j.contains("tolerances")) {
        const auto& t = j.at("tolerances");
        auto gett = [&t](const char* key, auto& slot) {
            if (t.contains(key)) slot = t.at(key).get<std::decay_t<decltype(slot)>>();
        };
        gett("vut_speed_over_kmh", c.tolerances.vut_speed_over_kmh);
        gett("vut_speed_symmetric", c.tolerances.vut_speed_symmetric);
        gett("lateral_m", c.tolerances.lateral_m);
        gett("target_speed_kmh", c.tolerances.target_speed_kmh);
        gett("yaw_rate_dps", c.tolerances.yaw_rate_dps);
        gett("steer_rate_dps", c.tolerances.steer_rate_dps);
        gett("window_start_ttc_s", c.tolerances.window_start_ttc_s);
    }
}

/// Scenario geometry extracted for simulation: the gap between the VUT and
/// the first internally controlled player ahead of it.
struct ScenarioSetup {
    dsl::ResolvedScenario resolved;
    double initial_gap_m = 0.0;
};

inline ScenarioSetup load_scenario(const std::string& source, const dsl::ScenarioRegistry& extra = {}) {
    auto asts = dsl::parse_many(source.empty() ? default_scenario_source() : source);
    dsl::ScenarioRegistry registry = extra;
    for (const auto& ast : asts) registry[ast.scenario_name] = ast;

    ScenarioSetup setup;
    setup.resolved = dsl::resolve(asts.back(), registry);

    const dsl::Player& vut = setup.resolved.vut();
    std::optional<double> gap;
    for (const auto& p : setup.resolved.players) {
        if (p.control == dsl::ControlMode::internal) {
            const double g = p.initial_pose.x_m - vut.initial_pose.x_m;
            if (g > 0.0 && (!gap || g < *gap)) gap = g;
        }
    }
    if (!gap) throw ConfigError("scenario '" + setup.resolved.name + "' has no target player ahead of the VUT");
    setup.initial_gap_m = *gap;
    return setup;
}

/// T_initiate = dv/a plus a safety margin so the boost completes before the
/// reference trigger point.
inline double find_t_initiate(double target_dv_mps, double a_modify_mps2, double margin_s) {
    if (a_modify_mps2 <= 0.0) throw ConfigError("modification acceleration must be positive");
    return target_dv_mps / a_modify_mps2 + margin_s;
}

/// Instant at which the approach crosses the given TTC, from the base
/// acceleration kinematics. Anchors the variation window of path-driven runs.
inline double estimate_window_start(const ExperimentConfig& cfg, double gap0_m, double speed_kmh,
                                    double ttc_s = 4.0) {
    const double v = kmh_to_mps(speed_kmh);
    const double a = cfg.base_accel_mps2;
    const double t_acc = v / a;
    const double gap_at_acc_end = gap0_m - 0.5 * v * t_acc;
    if (gap_at_acc_end <= ttc_s * v)  // crossing happens while still accelerating
        return -ttc_s + std::sqrt(ttc_s * ttc_s + 2.0 * gap0_m / a);
    return t_acc + (gap_at_acc_end - ttc_s * v) / v;
}

struct RunRecord {
    eval::RunResult result;
    protocol::ValidityReport validity;
    sim::RunOutcome outcome;
};

inline vary::ExperimentParams experiment_params(const ExperimentConfig& cfg, double test_speed_kmh) {
    vary::ExperimentParams p;
    p.test_speed_kmh = test_speed_kmh;
    p.base_accel_mps2 = cfg.base_accel_mps2;
    p.osc_amplitude_m = cfg.osc_amplitude_m;
    p.osc_period_s = cfg.osc_period_s;
    p.boost_accel_mps2 = cfg.boost_accel_mps2;
    return p;
}

inline vary::LateralProfile lateral_for(const ExperimentConfig& cfg, eval::Variant variant) {
    switch (variant) {
        case eval::Variant::ideal:
            return vary::LateralProfile::ideal();
        case eval::Variant::osc_left:
            return vary::LateralProfile::sinusoid(cfg.osc_amplitude_m, cfg.osc_period_s, true);
        case eval::Variant::osc_right:
            return vary::LateralProfile::sinusoid(cfg.osc_amplitude_m, cfg.osc_period_s, false);
    }
    return vary::LateralProfile::ideal();
}

/// One simulated run: execute, derive the analytic residual speed from the
/// trigger conditions, and check protocol validity over the trace.
inline RunRecord run_single(const ExperimentConfig& cfg, const ScenarioSetup& scenario,
                            eval::RunLabel label, const vary::PerturbationProfile& profile,
                            const sim::AebTrigger& trigger,
                            std::optional<double> target_speed_kmh = std::nullopt) {
    sim::SimConfig sc;
    sc.dt_s = cfg.dt_s;
    sc.horizon_s = cfg.horizon_s;
    sc.initial_gap_m = scenario.initial_gap_m;
    sc.brake_decel_mps2 = cfg.brake_decel_mps2;
    sc.brake_delay_s = cfg.brake_delay_s;
    sc.delay_behavior = cfg.delay_behavior;
    sc.profile = profile;
    if (target_speed_kmh) sc.target.v0_mps = kmh_to_mps(*target_speed_kmh);

    RunRecord rec;
    rec.outcome = sim::run(sc, trigger);
    rec.outcome.trace.scenario_name = scenario.resolved.name;
    rec.outcome.trace.path_provenance = label.variant_name();

    rec.result.label = label;
    rec.result.collided = rec.outcome.collided;
    if (rec.outcome.trigger) {
        const auto& trg = *rec.outcome.trigger;
        rec.result.v_aeb_kmh = mps_to_kmh(trg.v_aeb_mps);
        rec.result.t_aeb_s = trg.t_aeb_s;
        rec.result.d_x_m = trg.d_x_m;
        if (!target_speed_kmh || *target_speed_kmh == 0.0)
            rec.result.v_res_kmh = mps_to_kmh(eval::residual_velocity(trg.v_aeb_mps, trg.d_x_m, cfg.brake_model()));
        else
            rec.result.v_res_kmh = mps_to_kmh(eval::residual_velocity_moving(
                trg.v_aeb_mps, trg.d_x_m, kmh_to_mps(*target_speed_kmh), 0.0, cfg.brake_model()));
    } else {
        rec.result.v_res_kmh = mps_to_kmh(rec.outcome.impact_speed_mps);
    }

    rec.validity = protocol::check_validity(rec.outcome.trace, label.test_case_kmh, cfg.tolerances,
                                            rec.result.t_aeb_s, target_speed_kmh);
    rec.result.valid = rec.validity.valid;
    return rec;
}

inline const eval::Variant kVariantOrder[] = {eval::Variant::osc_left, eval::Variant::ideal,
                                              eval::Variant::osc_right};

/// Constant-speed reference runs: three lateral variants across the
/// configured test speeds, each accelerating at the base rate and holding.
inline std::vector<RunRecord> run_experiment_1(const ExperimentConfig& cfg,
                                               const ScenarioSetup& scenario,
                                               const sim::AebTrigger& trigger) {
    std::vector<RunRecord> out;
    for (const auto variant : kVariantOrder) {
        for (const double speed : cfg.test_speeds_kmh) {
            auto params = experiment_params(cfg, speed);
            vary::PerturbationProfile profile = vary::ideal_profile(params);
            profile.lateral = lateral_for(cfg, variant);
            out.push_back(run_single(cfg, scenario, {eval::Experiment::exp1_constant, variant, speed},
                                     profile, trigger));
        }
    }
    return out;
}

/// Trigger instants of the base-speed runs from experiment 1, per variant.
inline std::map<eval::Variant, double> reference_trigger_times(const std::vector<RunRecord>& exp1,
                                                               double base_speed_kmh) {
    std::map<eval::Variant, double> t_aeb;
    for (const auto& rec : exp1)
        if (rec.result.label.test_case_kmh == base_speed_kmh && rec.result.t_aeb_s)
            t_aeb[rec.result.label.variant] = *rec.result.t_aeb_s;
    return t_aeb;
}

/// Speed-variation runs: approach at the base speed, then accelerate with
/// the small modification rate from (T_AEB - T_initiate) toward each target
/// speed. Targets equal to the base speed degenerate to experiment 1.
inline std::vector<RunRecord> run_experiment_2(const ExperimentConfig& cfg,
                                               const ScenarioSetup& scenario,
                                               const sim::AebTrigger& trigger,
                                               const std::map<eval::Variant, double>& exp1_t_aeb) {
    std::vector<RunRecord> out;
    for (const auto variant : kVariantOrder) {
        const auto ref = exp1_t_aeb.find(variant);
        if (ref == exp1_t_aeb.end())
            throw ConfigError("experiment 2 requires the experiment-1 trigger time of the " +
                              to_string(variant) + " base-speed run");
        for (const double target : cfg.test_speeds_kmh) {
            auto params = experiment_params(cfg, cfg.base_speed_kmh);
            const eval::RunLabel label{eval::Experiment::exp2_speed_variation, variant, target};

            vary::PerturbationProfile profile;
            if (target <= cfg.base_speed_kmh) {
                profile = vary::ideal_profile(params);
                profile.lateral = lateral_for(cfg, variant);
            } else {
                const double dv = kmh_to_mps(target - cfg.base_speed_kmh);
                const double t_init = cfg.t_initiate_override_s
                                          ? *cfg.t_initiate_override_s
                                          : find_t_initiate(dv, cfg.boost_accel_mps2, cfg.t_initiate_margin_s);
                if (t_init < dv / cfg.boost_accel_mps2 - 1e-9)
                    throw ConfigError("T_initiate " + std::to_string(t_init) +
                                      " s is below the feasibility minimum for dv = " + std::to_string(dv) + " m/s");
                const double boost_t = ref->second - t_init;
                if (boost_t < 0.0)
                    throw ConfigError("T_initiate exceeds the reference trigger time");
                profile = vary::late_acceleration_profile(params, target, boost_t, lateral_for(cfg, variant));
            }
            out.push_back(run_single(cfg, scenario, label, profile, trigger));
        }
    }
    return out;
}

inline nlohmann::json validity_json(const RunRecord& rec) {
    nlohmann::json j{
        {"scenario", rec.outcome.trace.scenario_name},
        {"experiment", eval::to_string(rec.result.label.experiment)},
        {"variant", rec.result.label.variant_name()},
        {"test_case_kmh", rec.result.label.test_case_kmh},
        {"valid", rec.validity.valid},
        {"not_evaluated", rec.validity.not_evaluated},
    };
    auto& violations = j["violations"] = nlohmann::json::array();
    for (const auto& v : rec.validity.violations)
        violations.push_back({{"parameter", v.parameter}, {"t_s", v.t_s}, {"value", v.value}, {"bound", v.bound}});
    return j;
}

}  // namespace ncf::harness
