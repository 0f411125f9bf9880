#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ncf/errors.hpp"
#include "ncf/sim.hpp"
#include "ncf/units.hpp"

namespace ncf::protocol {

enum class FamilyKind { CCRs, CCRm, CCRb };
enum class AssessedFunction { AEB, FCW };

inline std::string to_string(FamilyKind k) {
    switch (k) {
        case FamilyKind::CCRs: return "CCRs";
        case FamilyKind::CCRm: return "CCRm";
        case FamilyKind::CCRb: return "CCRb";
    }
    return "?";
}

/// One Car-to-Car Rear scenario family with its speed range and target
/// vehicle behaviour. CCRb additionally picks a start gap of 40 m or 12 m
/// and a target deceleration of 2 m/s^2 or 6 m/s^2.
struct ScenarioFamily {
    FamilyKind kind = FamilyKind::CCRs;
    AssessedFunction function = AssessedFunction::AEB;
    double vut_speed_min_kmh = 10.0;
    double vut_speed_max_kmh = 50.0;
    double step_major_kmh = 10.0;
    double step_minor_kmh = 5.0;
    double target_speed_kmh = 0.0;
    double ccrb_gap_m = 40.0;
    double ccrb_decel_mps2 = 2.0;
};

inline ScenarioFamily make_family(FamilyKind kind, AssessedFunction fn,
                                  double ccrb_gap_m = 40.0, double ccrb_decel_mps2 = 2.0) {
    ScenarioFamily f;
    f.kind = kind;
    f.function = fn;
    switch (kind) {
        case FamilyKind::CCRs:
            f.target_speed_kmh = 0.0;
            if (fn == AssessedFunction::AEB) { f.vut_speed_min_kmh = 10.0; f.vut_speed_max_kmh = 50.0; }
            else                             { f.vut_speed_min_kmh = 30.0; f.vut_speed_max_kmh = 80.0; }
            break;
        case FamilyKind::CCRm:
            f.target_speed_kmh = 20.0;
            if (fn == AssessedFunction::AEB) { f.vut_speed_min_kmh = 30.0; f.vut_speed_max_kmh = 70.0; }
            else                             { f.vut_speed_min_kmh = 50.0; f.vut_speed_max_kmh = 80.0; }
            break;
        case FamilyKind::CCRb:
            f.target_speed_kmh = 50.0;
            f.vut_speed_min_kmh = 50.0;
            f.vut_speed_max_kmh = 50.0;
            if (ccrb_gap_m != 40.0 && ccrb_gap_m != 12.0)
                throw ConfigError("CCRb start gap must be 40 m or 12 m");
            if (ccrb_decel_mps2 != 2.0 && ccrb_decel_mps2 != 6.0)
                throw ConfigError("CCRb target deceleration must be 2 or 6 m/s^2");
            f.ccrb_gap_m = ccrb_gap_m;
            f.ccrb_decel_mps2 = ccrb_decel_mps2;
            break;
    }
    return f;
}

/// Tolerance bands that must hold from TTC = 4 s until system activation.
struct ToleranceSpec {
    double vut_speed_over_kmh = 1.0;   // one-sided: test speed + 1.0 km/h
    bool vut_speed_symmetric = false;  // some protocol revisions use +/-
    double lateral_m = 0.1;
    double target_speed_kmh = 1.0;
    double yaw_rate_dps = 1.0;
    double steer_rate_dps = 15.0;
    double window_start_ttc_s = 4.0;
};

struct Violation {
    std::string parameter;
    double t_s = 0.0;
    double value = 0.0;
    double bound = 0.0;
};

struct ValidityReport {
    bool valid = true;
    std::vector<Violation> violations;
    std::vector<std::string> not_evaluated;  // channels absent from the trace
};

struct SpeedHistoryEntry {
    double speed_kmh = 0.0;
    bool collided = false;
};

namespace detail {

struct SteppingState {
    bool started = false;
    double last = 0.0;
    bool minor_mode = false;
    bool has_pending = false;
    double pending = 0.0;  // the reduced run right after the first collision
};

inline std::optional<double> stepping_next(const ScenarioFamily& f, const SteppingState& st) {
    if (!st.started) return f.vut_speed_min_kmh;
    if (st.has_pending) return st.pending;
    const double step = st.minor_mode ? f.step_minor_kmh : f.step_major_kmh;
    const double next = st.last + step;
    if (next > f.vut_speed_max_kmh + 1e-9) return std::nullopt;
    return next;
}

inline void stepping_advance(const ScenarioFamily& f, SteppingState& st, double speed, bool collided) {
    st.has_pending = false;
    st.started = true;
    st.last = speed;
    if (collided && !st.minor_mode) {
        st.minor_mode = true;
        const double reduced = speed - f.step_minor_kmh;
        // A collision at the range minimum has no in-range reduced run; the
        // sequence continues upward in minor steps.
        if (reduced >= f.vut_speed_min_kmh - 1e-9) {
            st.has_pending = true;
            st.pending = reduced;
        }
    }
}

}  // namespace detail

/// Next test speed per the protocol's stepping rules: major steps from the
/// range start; after the first collision the speed drops one minor step
/// and then climbs in minor steps to the range maximum.
inline std::optional<double> next_test_speed(const ScenarioFamily& family,
                                             const std::vector<SpeedHistoryEntry>& history) {
    detail::SteppingState st;
    for (const auto& h : history) {
        const auto expected = detail::stepping_next(family, st);
        if (!expected || std::abs(*expected - h.speed_kmh) > 1e-9)
            throw ConfigError("speed history inconsistent with the protocol stepping sequence");
        detail::stepping_advance(family, st, h.speed_kmh, h.collided);
    }
    return detail::stepping_next(family, st);
}

/// Check every sample between the TTC = 4 s instant and the activation (or
/// collision / trace end) against the tolerance bands. The steering channel
/// is not simulated and is reported as not evaluated. The target speed band
/// applies only when a nominal target speed is given, and only before the
/// target's deceleration onset.
inline ValidityReport check_validity(const sim::Trace& trace, double test_speed_kmh,
                                     const ToleranceSpec& tol,
                                     std::optional<double> activation_t_s = std::nullopt,
                                     std::optional<double> target_nominal_kmh = std::nullopt,
                                     std::optional<double> target_decel_onset_t_s = std::nullopt) {
    if (trace.samples.empty()) throw ConfigError("trace has no samples");

    ValidityReport report;
    report.not_evaluated.push_back("steer_rate");

    // Window start: first sample at or past TTC = window_start; if the trace
    // begins inside the window, it starts at the trace start.
    double t_start = trace.samples.front().vut.t;
    bool found = false;
    for (const auto& s : trace.samples) {
        if (s.ttc_s && *s.ttc_s <= tol.window_start_ttc_s) {
            t_start = s.vut.t;
            found = true;
            break;
        }
    }
    if (!found) return report;  // never reached the window: nothing to check

    double t_end = trace.samples.back().vut.t;
    for (const auto& s : trace.samples) {
        if (s.target.x - s.vut.x <= 0.0) { t_end = s.vut.t; break; }
    }
    if (activation_t_s) t_end = std::min(t_end, *activation_t_s);

    const double v_limit = kmh_to_mps(test_speed_kmh + tol.vut_speed_over_kmh);
    const double v_floor = kmh_to_mps(test_speed_kmh - tol.vut_speed_over_kmh);

    for (const auto& s : trace.samples) {
        const double t = s.vut.t;
        if (t < t_start || t > t_end) continue;

        if (s.vut.v > v_limit + 1e-12)
            report.violations.push_back({"vut_speed", t, mps_to_kmh(s.vut.v), test_speed_kmh + tol.vut_speed_over_kmh});
        else if (tol.vut_speed_symmetric && s.vut.v < v_floor - 1e-12)
            report.violations.push_back({"vut_speed", t, mps_to_kmh(s.vut.v), test_speed_kmh - tol.vut_speed_over_kmh});

        if (std::abs(s.vut.y) > tol.lateral_m + 1e-12)
            report.violations.push_back({"lateral", t, s.vut.y, tol.lateral_m});

        if (std::abs(s.vut.yaw_rate) > tol.yaw_rate_dps + 1e-12)
            report.violations.push_back({"yaw_rate", t, s.vut.yaw_rate, tol.yaw_rate_dps});

        if (target_nominal_kmh) {
            const bool before_onset = !target_decel_onset_t_s || t < *target_decel_onset_t_s;
            if (before_onset && std::abs(mps_to_kmh(s.target.v) - *target_nominal_kmh) > tol.target_speed_kmh + 1e-12)
                report.violations.push_back({"target_speed", t, mps_to_kmh(s.target.v), tol.target_speed_kmh});
        }
    }
    report.valid = report.violations.empty();
    return report;
}

}  // namespace ncf::protocol
