#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "ncf/errors.hpp"
#include "ncf/units.hpp"

namespace ncf::eval {

/// Analytic braking function: a fixed delay with unchanged speed followed
/// by constant deceleration.
struct BrakeModel {
    double decel_mps2 = 3.5;
    double delay_s = 0.3;

    void validate() const {
        if (decel_mps2 <= 0.0) throw ConfigError("brake deceleration must be positive");
        if (delay_s < 0.0) throw ConfigError("brake delay must be nonnegative");
    }
};

/// Closed-form residual speed against a stationary target. The VUT covers
/// v*delay unchanged, then decelerates; whatever speed is left when the gap
/// is used up is the residual.
inline double residual_velocity(double v_aeb_mps, double d_x_m,
                                const BrakeModel& model = BrakeModel{}) {
    model.validate();
    if (d_x_m <= 0.0) throw ConfigError("trigger distance must be positive");

    const double s_delay = v_aeb_mps * model.delay_s;
    if (s_delay >= d_x_m) return v_aeb_mps;  // impact during the delay
    const double s_brake = v_aeb_mps * v_aeb_mps / (2.0 * model.decel_mps2);
    if (s_delay + s_brake <= d_x_m) return 0.0;
    return std::sqrt(v_aeb_mps * v_aeb_mps - 2.0 * model.decel_mps2 * (d_x_m - s_delay));
}

/// Moving-target residual speed by integrating the same dynamics. Returns
/// the closing speed at contact, or 0 when the gap never closes.
inline double residual_velocity_moving(double v_aeb_mps, double d_x_m, double target_v_mps,
                                       double target_decel_mps2 = 0.0,
                                       const BrakeModel& model = BrakeModel{},
                                       double dt = 1e-4) {
    model.validate();
    if (d_x_m <= 0.0) throw ConfigError("trigger distance must be positive");

    double gap = d_x_m;
    double v = v_aeb_mps;
    double tv = target_v_mps;
    double t = 0.0;
    const double horizon = model.delay_s + (v_aeb_mps + target_v_mps) / model.decel_mps2 + 10.0;
    while (t < horizon) {
        const double v_next = t >= model.delay_s ? std::max(0.0, v - model.decel_mps2 * dt) : v;
        const double tv_next = std::max(0.0, tv - target_decel_mps2 * dt);
        gap -= 0.5 * ((v + v_next) - (tv + tv_next)) * dt;
        v = v_next;
        tv = tv_next;
        t += dt;
        if (gap <= 0.0) return std::max(0.0, v - tv);
        if (v <= tv && v == 0.0) return 0.0;                  // both stopped or target ahead
        if (t >= model.delay_s && v <= tv) return 0.0;        // no longer closing
    }
    return 0.0;
}

enum class Experiment { exp1_constant, exp2_speed_variation, custom };
enum class Variant { osc_left, ideal, osc_right };

inline std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::exp1_constant: return "exp1";
        case Experiment::exp2_speed_variation: return "exp2";
        case Experiment::custom: return "custom";
    }
    return "?";
}

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::osc_left: return "osc-left";
        case Variant::ideal: return "ideal";
        case Variant::osc_right: return "osc-right";
    }
    return "?";
}

inline std::optional<Variant> variant_from_string(const std::string& s) {
    if (s == "osc-left") return Variant::osc_left;
    if (s == "ideal") return Variant::ideal;
    if (s == "osc-right") return Variant::osc_right;
    return std::nullopt;
}

struct RunLabel {
    Experiment experiment = Experiment::custom;
    Variant variant = Variant::ideal;
    double test_case_kmh = 0.0;  // nominal test speed naming the test case
    std::string tag;             // distinguishes variation-path runs, empty otherwise

    friend auto operator<=>(const RunLabel&, const RunLabel&) = default;

    std::string variant_name() const { return tag.empty() ? to_string(variant) : tag; }
};

/// One row of the result table.
struct RunResult {
    RunLabel label;
    std::optional<double> v_aeb_kmh;
    std::optional<double> t_aeb_s;
    std::optional<double> d_x_m;
    double v_res_kmh = 0.0;
    bool collided = false;
    bool valid = true;
};

// Scoring is pluggable; the official point scheme is not modelled.
using ScorePolicy = std::function<double(const RunResult&)>;

/// Default policy: normalized speed reduction, 0 for invalid runs.
inline ScorePolicy speed_reduction_policy() {
    return [](const RunResult& r) {
        if (!r.valid) return 0.0;
        const double v_test = r.label.test_case_kmh;
        if (v_test <= 0.0) return 0.0;
        return std::clamp((v_test - r.v_res_kmh) / v_test, 0.0, 1.0);
    };
}

inline double score(const RunResult& run, const ScorePolicy& policy = speed_reduction_policy()) {
    return policy(run);
}

inline constexpr const char* kResultsCsvHeader =
    "experiment,variant,test_case,v_aeb_kmh,t_aeb_s,d_x_m,v_res_kmh,collided,valid,score";

namespace detail {

inline std::string fmt(double v, int precision) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

inline std::string fmt_opt(const std::optional<double>& v, int precision) {
    return v ? fmt(*v, precision) : std::string{};
}

inline int variant_order(Variant v) {
    switch (v) {
        case Variant::osc_left: return 0;
        case Variant::ideal: return 1;
        case Variant::osc_right: return 2;
    }
    return 3;
}

inline std::string variant_display(Variant v) {
    switch (v) {
        case Variant::osc_left: return "Left";
        case Variant::ideal: return "Ideal";
        case Variant::osc_right: return "Right";
    }
    return "?";
}

}  // namespace detail

/// The assembled result table: a long-form CSV plus an aligned-text grid
/// with one (v_AEB, D_x, v_res) column group per test case.
class ResultTable {
public:
    explicit ResultTable(std::vector<RunResult> results) : results_(std::move(results)) {
        std::set<RunLabel> seen;
        for (const auto& r : results_)
            if (!seen.insert(r.label).second)
                throw ConfigError("duplicate run label in result table");
        std::sort(results_.begin(), results_.end(), [](const RunResult& a, const RunResult& b) {
            if (a.label.experiment != b.label.experiment) return a.label.experiment < b.label.experiment;
            if (a.label.variant != b.label.variant)
                return detail::variant_order(a.label.variant) < detail::variant_order(b.label.variant);
            if (a.label.tag != b.label.tag) return a.label.tag < b.label.tag;
            return a.label.test_case_kmh < b.label.test_case_kmh;
        });
    }

    const std::vector<RunResult>& rows() const { return results_; }

    std::string csv(const ScorePolicy& policy = speed_reduction_policy()) const {
        std::string out(kResultsCsvHeader);
        out += '\n';
        for (const auto& r : results_) {
            out += to_string(r.label.experiment);
            out += ',';
            out += r.label.variant_name();
            out += ',';
            out += detail::fmt(r.label.test_case_kmh, 1);
            out += ',';
            out += detail::fmt_opt(r.v_aeb_kmh, 2);
            out += ',';
            out += detail::fmt_opt(r.t_aeb_s, 3);
            out += ',';
            out += detail::fmt_opt(r.d_x_m, 3);
            out += ',';
            out += detail::fmt(r.v_res_kmh, 2);
            out += ',';
            out += r.collided ? '1' : '0';
            out += ',';
            out += r.valid ? '1' : '0';
            out += ',';
            out += detail::fmt(policy(r), 3);
            out += '\n';
        }
        return out;
    }

    /// Grid rendering: rows are experiment x variant, column groups are the
    /// test cases. Speeds carry one decimal, distances two.
    std::string text() const {
        std::vector<double> cases;
        for (const auto& r : results_)
            if (std::find(cases.begin(), cases.end(), r.label.test_case_kmh) == cases.end())
                cases.push_back(r.label.test_case_kmh);
        std::sort(cases.begin(), cases.end());

        const int w = 10;
        std::string out;
        auto cell = [&](const std::string& s) {
            out += s;
            if (s.size() < static_cast<std::size_t>(w)) out += std::string(w - s.size(), ' ');
        };

        cell("exp");
        cell("variant");
        for (double c : cases) {
            cell("v_AEB");
            cell("D_x");
            cell("v_res");
            (void)c;
        }
        out += '\n';
        cell("");
        cell("");
        for (double c : cases) {
            cell("[" + detail::fmt(c, 1) + "]");
            cell("[km/h]");
            cell("");
        }
        out += '\n';

        // row key: experiment, canonical variant order, then the display name
        std::map<std::tuple<Experiment, int, std::string>, std::map<double, const RunResult*>> grid;
        for (const auto& r : results_) {
            const std::string display =
                r.label.tag.empty() ? detail::variant_display(r.label.variant) : r.label.tag;
            grid[{r.label.experiment, detail::variant_order(r.label.variant), display}]
                [r.label.test_case_kmh] = &r;
        }

        for (const auto& [key, row] : grid) {
            cell(to_string(std::get<0>(key)));
            cell(std::get<2>(key));
            for (double c : cases) {
                const auto it = row.find(c);
                if (it == row.end()) {
                    cell("-");
                    cell("-");
                    cell("-");
                    continue;
                }
                const RunResult& r = *it->second;
                cell(r.v_aeb_kmh ? detail::fmt(*r.v_aeb_kmh, 1) : "-");
                cell(r.d_x_m ? detail::fmt(*r.d_x_m, 2) : "-");
                cell(detail::fmt(r.v_res_kmh, 1));
            }
            out += '\n';
        }
        return out;
    }

private:
    std::vector<RunResult> results_;
};

inline ResultTable build_table(std::vector<RunResult> results) {
    return ResultTable(std::move(results));
}

}  // namespace ncf::eval
