#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ncf/errors.hpp"
#include "ncf/hash.hpp"
#include "ncf/profile.hpp"
#include "ncf/units.hpp"

namespace ncf::sim {

struct VehicleState {
    double t = 0.0;         // s
    double x = 0.0;         // m, longitudinal position along the test axis
    double y = 0.0;         // m, lateral offset from the ideal trajectory
    double v = 0.0;         // m/s
    double a = 0.0;         // m/s^2, realized acceleration of the last step
    double yaw_rate = 0.0;  // heading-change proxy, d(lateral offset)/dt
};

/// Target vehicle program: constant speed, optionally decelerating to a
/// stop from decel_start_t (CCRb).
struct TargetProgram {
    double v0_mps = 0.0;
    double decel_mps2 = 0.0;
    double decel_start_t_s = 0.0;
};

/// What a trigger gets to see each step. Closing speed is VUT minus target.
struct AebObservation {
    double gap_m = 0.0;
    double closing_speed_mps = 0.0;
    double lateral_offset_m = 0.0;
    double own_speed_mps = 0.0;
    double t_s = 0.0;
};

// Fire/hold decision per step; the simulator latches the first fire.
using AebTrigger = std::function<bool(const AebObservation&)>;

enum class DelayBehavior {
    continue_program,  // keep following the speed program during the brake delay
    hold_speed,        // freeze speed during the delay
};

struct SimConfig {
    double dt_s = 0.01;
    double initial_gap_m = 67.5;
    double initial_speed_mps = 0.0;
    double brake_decel_mps2 = 3.5;
    double brake_delay_s = 0.3;
    double horizon_s = 60.0;
    DelayBehavior delay_behavior = DelayBehavior::continue_program;
    vary::PerturbationProfile profile;
    TargetProgram target;

    void validate() const {
        if (dt_s <= 0.0) throw ConfigError("dt must be positive");
        if (brake_decel_mps2 <= 0.0) throw ConfigError("brake deceleration must be positive");
        if (initial_gap_m <= 0.0) throw ConfigError("initial gap must be positive");
        if (profile.speed_program.empty()) throw ConfigError("speed program is empty");
    }

    std::string fingerprint() const {
        char buf[256];
        std::snprintf(buf, sizeof buf, "dt=%.9g gap=%.9g v0=%.9g bd=%.9g del=%.9g hor=%.9g db=%d tgt=%.9g/%.9g/%.9g",
                      dt_s, initial_gap_m, initial_speed_mps, brake_decel_mps2, brake_delay_s,
                      horizon_s, static_cast<int>(delay_behavior), target.v0_mps,
                      target.decel_mps2, target.decel_start_t_s);
        std::string s(buf);
        for (const auto& ph : profile.speed_program) {
            std::snprintf(buf, sizeof buf, " ph=%.9g/%.9g/%.9g", ph.start_t_s, ph.accel_mps2, ph.target_mps);
            s += buf;
        }
        return s;
    }
};

struct TraceSample {
    VehicleState vut;
    VehicleState target;
    std::optional<double> ttc_s;  // gap / closing speed, only while closing
    bool aeb_fired = false;
};

struct Trace {
    std::vector<TraceSample> samples;
    std::string scenario_name;
    std::string path_provenance;
    std::string config_hash;
};

struct TriggerEvent {
    double t_aeb_s = 0.0;
    double v_aeb_mps = 0.0;
    double d_x_m = 0.0;
};

struct RunOutcome {
    Trace trace;
    std::optional<TriggerEvent> trigger;
    bool collided = false;
    double impact_speed_mps = 0.0;  // closing speed at contact, 0 if avoided
    double t_end_s = 0.0;
};

enum class LongitudinalMode { follow_program, hold_speed, brake };

namespace detail {

// v update first, trapezoidal position update: exact for piecewise-constant
// acceleration, which keeps stepped braking distances in line with the
// closed-form residual speed at coarse dt.
inline void advance(VehicleState& s, double v_next, double dt) {
    s.x += 0.5 * (s.v + v_next) * dt;
    s.a = (v_next - s.v) / dt;
    s.v = v_next;
    s.t += dt;
}

}  // namespace detail

/// One fixed step of both vehicles. The VUT follows its speed program (or
/// brakes), lateral offset is imposed from the profile.
inline void step(VehicleState& vut, VehicleState& target, const SimConfig& cfg, double t,
                 LongitudinalMode mode = LongitudinalMode::follow_program) {
    const double dt = cfg.dt_s;

    double v_next = vut.v;
    switch (mode) {
        case LongitudinalMode::follow_program: {
            const vary::SpeedPhase* ph = cfg.profile.active_phase(t);
            if (ph && vut.v < ph->target_mps)
                v_next = std::min(vut.v + ph->accel_mps2 * dt, ph->target_mps);
            break;
        }
        case LongitudinalMode::hold_speed:
            break;
        case LongitudinalMode::brake:
            v_next = std::max(0.0, vut.v - cfg.brake_decel_mps2 * dt);
            break;
    }
    detail::advance(vut, v_next, dt);
    vut.y = cfg.profile.lateral.offset_at(vut.t);
    vut.yaw_rate = cfg.profile.lateral.rate_at(vut.t);

    double tv_next = target.v;
    if (cfg.target.decel_mps2 > 0.0 && t >= cfg.target.decel_start_t_s)
        tv_next = std::max(0.0, target.v - cfg.target.decel_mps2 * dt);
    detail::advance(target, tv_next, dt);
}

inline std::optional<double> ttc_of(double gap, double closing) {
    if (closing > 1e-9 && gap > 0.0) return gap / closing;
    return std::nullopt;
}

/// Simulate from t = 0 until collision (gap <= 0), standstill after the
/// trigger, or the horizon. The trigger is queried every step until it
/// fires; the decision is latched. On fire the VUT keeps its program for
/// brake_delay seconds, then brakes at brake_decel until standstill.
inline RunOutcome run(const SimConfig& cfg, const AebTrigger& trigger) {
    cfg.validate();

    RunOutcome out;
    out.trace.config_hash = hex64(fnv1a64(cfg.fingerprint()));

    VehicleState vut;
    vut.v = cfg.initial_speed_mps;
    vut.y = cfg.profile.lateral.offset_at(0.0);
    vut.yaw_rate = cfg.profile.lateral.rate_at(0.0);
    VehicleState target;
    target.x = cfg.initial_gap_m;
    target.v = cfg.target.v0_mps;

    bool fired = false;
    double t_fire = 0.0;

    const auto steps = static_cast<std::size_t>(cfg.horizon_s / cfg.dt_s) + 1;
    out.trace.samples.reserve(std::min<std::size_t>(steps, 1u << 20));

    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = vut.t;
        const double gap = target.x - vut.x;
        const double closing = vut.v - target.v;

        if (!fired && trigger({gap, closing, vut.y, vut.v, t})) {
            fired = true;
            t_fire = t;
            out.trigger = TriggerEvent{t, vut.v, gap};
        }

        out.trace.samples.push_back({vut, target, ttc_of(gap, closing), fired});

        if (gap <= 0.0) {
            out.collided = true;
            out.impact_speed_mps = std::max(0.0, closing);
            out.t_end_s = t;
            return out;
        }
        if (fired && t >= t_fire + cfg.brake_delay_s && vut.v <= 0.0) {
            out.t_end_s = t;  // standstill
            return out;
        }

        LongitudinalMode mode = LongitudinalMode::follow_program;
        if (fired) {
            if (t < t_fire + cfg.brake_delay_s)
                mode = cfg.delay_behavior == DelayBehavior::hold_speed ? LongitudinalMode::hold_speed
                                                                       : LongitudinalMode::follow_program;
            else
                mode = LongitudinalMode::brake;
        }
        step(vut, target, cfg, t, mode);
    }
    throw SimError("simulation horizon exceeded without a termination condition");
}

/// Reference stand-in for the supplier's black-box guard: fires as soon as
/// TTC falls to the threshold while closing.
inline AebTrigger reference_trigger(double ttc_threshold_s) {
    if (ttc_threshold_s <= 0.0) throw ConfigError("TTC threshold must be positive");
    return [ttc_threshold_s](const AebObservation& obs) {
        const auto ttc = ttc_of(obs.gap_m, obs.closing_speed_mps);
        return ttc.has_value() && *ttc <= ttc_threshold_s;
    };
}

/// Test helper: fire at a fixed gap while closing.
inline AebTrigger gap_trigger(double fire_gap_m) {
    return [fire_gap_m](const AebObservation& obs) {
        return obs.closing_speed_mps > 0.0 && obs.gap_m <= fire_gap_m;
    };
}

inline AebTrigger never_trigger() {
    return [](const AebObservation&) { return false; };
}

}  // namespace ncf::sim
