#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "ncf/evaluation.hpp"
#include "ncf/profile.hpp"
#include "ncf/sim.hpp"
#include "ncf/trace_csv.hpp"
#include "ncf/units.hpp"

using namespace ncf;
using Catch::Approx;

namespace {

vary::ExperimentParams params_for(double speed_kmh) {
    vary::ExperimentParams p;
    p.test_speed_kmh = speed_kmh;
    return p;
}

sim::SimConfig ccrs_config(double speed_kmh, double dt = 0.01, double gap = 67.5) {
    sim::SimConfig c;
    c.dt_s = dt;
    c.initial_gap_m = gap;
    c.profile = vary::ideal_profile(params_for(speed_kmh));
    return c;
}

// constant-speed approach: the VUT starts at the test speed with a hold program
sim::SimConfig constant_speed_config(double speed_kmh, double gap, double dt) {
    sim::SimConfig c;
    c.dt_s = dt;
    c.initial_gap_m = gap;
    c.initial_speed_mps = kmh_to_mps(speed_kmh);
    c.profile.speed_program = {{0.0, 0.0, kmh_to_mps(speed_kmh)}};
    return c;
}

}  // namespace

TEST_CASE("stepper matches constant-acceleration kinematics", "[sim]") {
    SECTION("1 s at 2 m/s^2 from rest") {
        auto cfg = ccrs_config(25.0, 0.01);
        sim::VehicleState vut, target;
        target.x = cfg.initial_gap_m;
        for (int i = 0; i < 100; ++i) sim::step(vut, target, cfg, vut.t);
        CHECK(vut.v == Approx(2.0).epsilon(1e-9));
        CHECK(vut.x == Approx(1.005).margin(0.0051));
        CHECK(vut.t == Approx(1.0).margin(1e-9));
    }

    SECTION("holding at the test speed leaves v unchanged") {
        auto cfg = ccrs_config(25.0, 0.01);
        sim::VehicleState vut, target;
        vut.v = kmh_to_mps(25.0);
        target.x = cfg.initial_gap_m;
        for (int i = 0; i < 500; ++i) sim::step(vut, target, cfg, vut.t);
        CHECK(vut.v == Approx(kmh_to_mps(25.0)).epsilon(1e-12));
        CHECK(vut.a == 0.0);
    }

    SECTION("closed form: reaching 25 km/h takes 3.472 s over 12.06 m") {
        const double v_target = kmh_to_mps(25.0);
        auto cfg = ccrs_config(25.0, 1e-4);
        sim::VehicleState vut, target;
        target.x = cfg.initial_gap_m;
        while (vut.v < v_target) sim::step(vut, target, cfg, vut.t);
        CHECK(vut.t == Approx(v_target / 2.0).margin(2e-4));                // v/a
        CHECK(vut.x == Approx(v_target * v_target / 4.0).margin(1e-3));    // v^2 / 2a
    }
}

TEST_CASE("run terminates by collision when nothing fires", "[sim]") {
    auto cfg = ccrs_config(25.0);
    const auto out = sim::run(cfg, sim::never_trigger());
    CHECK(out.collided);
    CHECK_FALSE(out.trigger.has_value());
    CHECK(out.impact_speed_mps == Approx(kmh_to_mps(25.0)).epsilon(1e-9));
    const double final_gap = out.trace.samples.back().target.x - out.trace.samples.back().vut.x;
    CHECK(final_gap <= 0.0);
}

TEST_CASE("reference trigger fires once at the TTC threshold", "[sim]") {
    auto cfg = ccrs_config(25.0);
    const auto out = sim::run(cfg, sim::reference_trigger(1.3));

    REQUIRE(out.trigger.has_value());
    CHECK(out.trigger->d_x_m > 0.0);

    // closed form: at constant closing speed the threshold crossing is at gap = v * TTC
    const double v = kmh_to_mps(25.0);
    const double expected_gap = v * 1.3;
    CHECK(out.trigger->d_x_m <= expected_gap + 1e-9);
    CHECK(out.trigger->d_x_m >= expected_gap - v * cfg.dt_s - 1e-9);
    CHECK(out.trigger->v_aeb_mps == Approx(v).epsilon(1e-9));

    SECTION("the fired flag has exactly one rising edge and never falls") {
        int rising = 0;
        bool prev = false;
        for (const auto& s : out.trace.samples) {
            if (s.aeb_fired && !prev) ++rising;
            CHECK_FALSE((prev && !s.aeb_fired));
            prev = s.aeb_fired;
        }
        CHECK(rising == 1);
    }
}

TEST_CASE("closing speed below zero never fires the reference trigger", "[sim]") {
    auto cfg = ccrs_config(25.0);
    cfg.target.v0_mps = kmh_to_mps(40.0);  // target runs away
    cfg.horizon_s = 5.0;
    CHECK_THROWS_AS(sim::run(cfg, sim::reference_trigger(1.3)), SimError);  // timeout, no fire
}

TEST_CASE("fire at 9.28 m and 25.0 km/h stops short of the target", "[sim]") {
    auto cfg = ccrs_config(25.0);
    const auto out = sim::run(cfg, sim::gap_trigger(9.28));
    REQUIRE(out.trigger.has_value());
    CHECK_FALSE(out.collided);
    CHECK(out.impact_speed_mps == 0.0);
    CHECK(out.trace.samples.back().vut.v == 0.0);
}

TEST_CASE("halving dt moves the trigger distance by at most 2 v dt", "[sim][property]") {
    auto coarse = ccrs_config(25.0, 0.01);
    auto fine = ccrs_config(25.0, 0.005);
    const auto out_coarse = sim::run(coarse, sim::reference_trigger(1.3));
    const auto out_fine = sim::run(fine, sim::reference_trigger(1.3));
    REQUIRE(out_coarse.trigger.has_value());
    REQUIRE(out_fine.trigger.has_value());
    const double bound = 2.0 * kmh_to_mps(25.0) * 0.01;
    CHECK(std::abs(out_coarse.trigger->d_x_m - out_fine.trigger->d_x_m) <= bound);
}

TEST_CASE("post-trigger integration agrees with the analytic brake model", "[sim]") {
    // spot checks at dt = 1e-3; the full grid runs in the acceptance suite
    const eval::BrakeModel model{};
    for (const double v_kmh : {15.0, 25.0, 40.0}) {
        for (const double d : {4.0, 8.0, 12.0, 18.0}) {
            auto cfg = constant_speed_config(v_kmh, d, 1e-3);
            const auto out = sim::run(cfg, sim::gap_trigger(d));
            REQUIRE(out.trigger.has_value());
            const double analytic = eval::residual_velocity(kmh_to_mps(v_kmh), d, model);
            INFO("v=" << v_kmh << " km/h, d=" << d << " m");
            if (analytic == 0.0) {
                CHECK_FALSE(out.collided);
                CHECK(out.impact_speed_mps == 0.0);
            } else {
                REQUIRE(out.collided);
                CHECK(out.impact_speed_mps == Approx(analytic).epsilon(0.01));
            }
        }
    }
}

TEST_CASE("during the delay the speed program continues by default", "[sim]") {
    // late-acceleration program still boosting when the trigger fires
    vary::ExperimentParams params = params_for(25.0);
    auto profile = vary::late_acceleration_profile(params, 25.8, 0.0);

    sim::SimConfig cfg;
    cfg.dt_s = 1e-3;
    cfg.initial_gap_m = 30.0;
    cfg.initial_speed_mps = kmh_to_mps(25.0);
    cfg.profile = profile;

    const auto fire_gap = 29.0;
    auto run_with = [&](sim::DelayBehavior b) {
        cfg.delay_behavior = b;
        return sim::run(cfg, sim::gap_trigger(fire_gap));
    };
    const auto cont = run_with(sim::DelayBehavior::continue_program);
    const auto hold = run_with(sim::DelayBehavior::hold_speed);
    REQUIRE(cont.trigger.has_value());
    REQUIRE(hold.trigger.has_value());

    // speed at the end of the delay differs between the two behaviors
    auto v_after_delay = [&](const sim::RunOutcome& out) {
        const double t_end = out.trigger->t_aeb_s + cfg.brake_delay_s;
        for (const auto& s : out.trace.samples)
            if (s.vut.t >= t_end - 1e-9) return s.vut.v;
        return out.trace.samples.back().vut.v;
    };
    CHECK(v_after_delay(cont) > v_after_delay(hold));
    CHECK(v_after_delay(hold) == Approx(hold.trigger->v_aeb_mps).epsilon(1e-9));
}

TEST_CASE("trace ttc is defined only while closing", "[sim]") {
    auto cfg = ccrs_config(25.0);
    const auto out = sim::run(cfg, sim::never_trigger());
    // at t = 0 the VUT stands still: not closing, no ttc
    CHECK_FALSE(out.trace.samples.front().ttc_s.has_value());
    bool saw_ttc = false;
    for (const auto& s : out.trace.samples) {
        const double closing = s.vut.v - s.target.v;
        if (s.ttc_s) {
            saw_ttc = true;
            CHECK(closing > 0.0);
            CHECK(*s.ttc_s == Approx((s.target.x - s.vut.x) / closing).epsilon(1e-12));
        }
    }
    CHECK(saw_ttc);
}

TEST_CASE("identical configs produce bit-identical traces", "[sim]") {
    auto cfg = ccrs_config(25.0);
    const auto a = sim::run(cfg, sim::reference_trigger(1.3));
    const auto b = sim::run(cfg, sim::reference_trigger(1.3));
    CHECK(sim::to_csv(a.trace) == sim::to_csv(b.trace));
    CHECK(a.trace.config_hash == b.trace.config_hash);
}

TEST_CASE("trace csv format", "[sim]") {
    auto cfg = ccrs_config(25.0);
    const auto out = sim::run(cfg, sim::never_trigger());
    const std::string csv = sim::to_csv(out.trace);
    CHECK(csv.rfind("t,x_vut,y_vut,v_vut,a_vut,yaw_rate,x_tgt,v_tgt,gap,ttc,aeb_fired\n", 0) == 0);
    // the first sample is not closing: the ttc field between the last two commas is empty
    const auto first_row_start = csv.find('\n') + 1;
    const auto first_row = csv.substr(first_row_start, csv.find('\n', first_row_start) - first_row_start);
    CHECK(first_row.find(",,0") != std::string::npos);
}

TEST_CASE("config validation", "[sim]") {
    auto cfg = ccrs_config(25.0);
    cfg.dt_s = 0.0;
    CHECK_THROWS_AS(sim::run(cfg, sim::never_trigger()), ConfigError);
    cfg = ccrs_config(25.0);
    cfg.brake_decel_mps2 = -1.0;
    CHECK_THROWS_AS(sim::run(cfg, sim::never_trigger()), ConfigError);
    CHECK_THROWS_AS(sim::reference_trigger(0.0), ConfigError);
}
