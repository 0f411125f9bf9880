#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ncf/errors.hpp"
#include "ncf/units.hpp"
#include "ncf/variation.hpp"

namespace ncf::vary {

inline constexpr double kLateralToleranceM = 0.1;    // 0 +/- 0.1 m
inline constexpr double kSpeedToleranceKmh = 1.0;    // test speed + 1.0 km/h, one-sided

/// Imposed lateral offset as a pure function of time. Left of the ideal
/// trajectory is negative y.
class LateralProfile {
public:
    static LateralProfile ideal() { return LateralProfile{}; }

    // starts_left: first excursion heads to -amplitude
    static LateralProfile sinusoid(double amplitude_m, double period_s, bool starts_left,
                                   double start_t_s = 0.0) {
        if (amplitude_m > kLateralToleranceM)
            throw ConfigError("oscillation amplitude exceeds the 0.1 m lateral tolerance");
        if (period_s <= 0.0) throw ConfigError("oscillation period must be positive");
        LateralProfile p;
        p.kind_ = Kind::sinusoid;
        p.amplitude_ = starts_left ? -amplitude_m : amplitude_m;
        p.period_ = period_s;
        p.start_t_ = start_t_s;
        return p;
    }

    // knots: (t, y) pairs, nondecreasing t; linear in between, clamped outside
    static LateralProfile piecewise(std::vector<std::pair<double, double>> knots) {
        for (const auto& [t, y] : knots) {
            (void)t;
            if (std::abs(y) > kLateralToleranceM + 1e-12)
                throw ConfigError("piecewise lateral knot exceeds the 0.1 m tolerance");
        }
        LateralProfile p;
        p.kind_ = Kind::piecewise;
        p.knots_ = std::move(knots);
        return p;
    }

    double offset_at(double t) const {
        switch (kind_) {
            case Kind::none:
                return 0.0;
            case Kind::sinusoid: {
                if (t < start_t_) return 0.0;
                return amplitude_ * std::sin(2.0 * kPi * (t - start_t_) / period_);
            }
            case Kind::piecewise: {
                if (knots_.empty()) return 0.0;
                if (t <= knots_.front().first) return knots_.front().second;
                if (t >= knots_.back().first) return knots_.back().second;
                for (std::size_t i = 1; i < knots_.size(); ++i) {
                    if (t <= knots_[i].first) {
                        const auto& [t0, y0] = knots_[i - 1];
                        const auto& [t1, y1] = knots_[i];
                        if (t1 <= t0) return y1;
                        return y0 + (y1 - y0) * (t - t0) / (t1 - t0);
                    }
                }
                return knots_.back().second;
            }
        }
        return 0.0;
    }

    // d(offset)/dt, used as the heading-change proxy recorded in traces
    double rate_at(double t, double h = 1e-4) const {
        return (offset_at(t + h) - offset_at(t - h)) / (2.0 * h);
    }

private:
    enum class Kind { none, sinusoid, piecewise };
    static constexpr double kPi = 3.14159265358979323846;

    Kind kind_ = Kind::none;
    double amplitude_ = 0.0;  // signed: negative heads left first
    double period_ = 1.0;
    double start_t_ = 0.0;
    std::vector<std::pair<double, double>> knots_;
};

/// One phase of the speed program: from start_t, accelerate with `accel`
/// until `target` is reached, then hold.
struct SpeedPhase {
    double start_t_s = 0.0;
    double accel_mps2 = 0.0;
    double target_mps = 0.0;
};

struct PerturbationProfile {
    LateralProfile lateral;
    std::vector<SpeedPhase> speed_program;  // sorted by start_t_s

    const SpeedPhase* active_phase(double t) const {
        const SpeedPhase* active = nullptr;
        for (const auto& ph : speed_program) {
            if (ph.start_t_s <= t) active = &ph;
            else break;
        }
        return active;
    }
};

/// Parameters shared by profile synthesis: the test case's nominal speed
/// plus the defaults used for oscillation and late-acceleration shaping.
struct ExperimentParams {
    double test_speed_kmh = 25.0;
    double base_accel_mps2 = 2.0;
    double osc_amplitude_m = 0.1;
    double osc_period_s = 2.0;
    double osc_start_t_s = 0.0;
    // window mapped onto a variation path's interaction slots
    double var_start_t_s = 0.0;
    double var_duration_s = 4.0;   // nominal [T_0, T_End] length at constant closing speed
    double boost_accel_mps2 = 0.1;

    double speed_ceiling_mps() const { return kmh_to_mps(test_speed_kmh + kSpeedToleranceKmh); }
};

inline void check_speed_target(double target_mps, const ExperimentParams& cfg) {
    if (target_mps > cfg.speed_ceiling_mps() + 1e-9)
        throw ConfigError("speed program target exceeds test speed + 1.0 km/h");
}

/// Base program: accelerate from rest at base_accel until the test speed,
/// then hold (passive robot).
inline PerturbationProfile ideal_profile(const ExperimentParams& cfg) {
    PerturbationProfile p;
    p.lateral = LateralProfile::ideal();
    p.speed_program = {{0.0, cfg.base_accel_mps2, kmh_to_mps(cfg.test_speed_kmh)}};
    return p;
}

enum class OscillationSide { left_first, right_first };

inline PerturbationProfile oscillating_profile(const ExperimentParams& cfg, OscillationSide side) {
    PerturbationProfile p = ideal_profile(cfg);
    p.lateral = LateralProfile::sinusoid(cfg.osc_amplitude_m, cfg.osc_period_s,
                                         side == OscillationSide::left_first, cfg.osc_start_t_s);
    return p;
}

/// Late-acceleration program: hold the base test speed, then from boost_t
/// accelerate with boost_accel toward target_kmh (within the tolerance
/// ceiling of the base test speed).
inline PerturbationProfile late_acceleration_profile(const ExperimentParams& cfg,
                                                     double target_kmh, double boost_t_s,
                                                     LateralProfile lateral = LateralProfile::ideal()) {
    const double target = kmh_to_mps(target_kmh);
    check_speed_target(target, cfg);
    PerturbationProfile p;
    p.lateral = std::move(lateral);
    p.speed_program = {{0.0, cfg.base_accel_mps2, kmh_to_mps(cfg.test_speed_kmh)},
                       {boost_t_s, cfg.boost_accel_mps2, target}};
    std::sort(p.speed_program.begin(), p.speed_program.end(),
              [](const SpeedPhase& a, const SpeedPhase& b) { return a.start_t_s < b.start_t_s; });
    return p;
}

/// Synthesize a concrete perturbation profile from one variation path.
/// The variation window is split into `path.steps.size()` equal slots; each
/// lateral interaction ramps the offset linearly within its slot, each
/// speed_increase opens a late-acceleration phase at its slot start.
inline PerturbationProfile path_to_profile(const VariationPath& path, const ExperimentParams& cfg) {
    if (path.steps.empty()) throw ConfigError("variation path is empty");
    const double slot = cfg.var_duration_s / static_cast<double>(path.steps.size());

    std::vector<std::pair<double, double>> knots;
    knots.emplace_back(cfg.var_start_t_s, 0.0);
    double y = 0.0;

    PerturbationProfile p;
    p.speed_program = {{0.0, cfg.base_accel_mps2, kmh_to_mps(cfg.test_speed_kmh)}};

    for (std::size_t i = 0; i < path.steps.size(); ++i) {
        const Interaction& ia = path.steps[i];
        const double t_end = cfg.var_start_t_s + slot * static_cast<double>(i + 1);
        switch (ia.kind) {
            case InteractionKind::lateral_nudge_left:
                y = std::max(-kLateralToleranceM, y - std::abs(ia.magnitude));
                break;
            case InteractionKind::lateral_nudge_right:
                y = std::min(kLateralToleranceM, y + std::abs(ia.magnitude));
                break;
            case InteractionKind::lateral_hold:
            case InteractionKind::speed_hold:
                break;
            case InteractionKind::speed_increase: {
                const double accel = ia.magnitude > 0.0 ? ia.magnitude : cfg.boost_accel_mps2;
                const double t_start = cfg.var_start_t_s + slot * static_cast<double>(i);
                p.speed_program.push_back({t_start, accel, cfg.speed_ceiling_mps()});
                break;
            }
        }
        knots.emplace_back(t_end, y);
    }

    p.lateral = LateralProfile::piecewise(std::move(knots));
    std::sort(p.speed_program.begin(), p.speed_program.end(),
              [](const SpeedPhase& a, const SpeedPhase& b) { return a.start_t_s < b.start_t_s; });
    return p;
}

/// Dense tolerance check over [t_from, t_to]: |lateral| <= 0.1 m and every
/// program target within the ceiling. Step matches the simulator's dt.
inline bool profile_within_tolerances(const PerturbationProfile& p, const ExperimentParams& cfg,
                                      double t_from, double t_to, double dt = 0.01) {
    for (const auto& ph : p.speed_program)
        if (ph.target_mps > cfg.speed_ceiling_mps() + 1e-9) return false;
    for (double t = t_from; t <= t_to + 1e-12; t += dt)
        if (std::abs(p.lateral.offset_at(t)) > kLateralToleranceM + 1e-9) return false;
    return true;
}

}  // namespace ncf::vary
