#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "xnor_rram/device.hpp"

using namespace xnor_rram;
using Catch::Approx;

namespace {

DeviceModelParams zero_sigma(double intercept = 9000.0) {
    DeviceModelParams p;
    p.lrs_intercept = intercept;
    p.lrs_sigma_rel = 0.0;
    p.hrs_log_sigma = 0.0;
    return p;
}

DeviceState lrs(double r) { return {CellState::lrs, r}; }

}  // namespace

TEST_CASE("SET with zero sigma lands on the affine mean", "[device]") {
    auto p = zero_sigma();
    Rng rng(1);
    CHECK(apply_set(lrs(6000), 2.3, p, rng).resistance == Approx(6010.0).epsilon(1e-12));
    CHECK(apply_set(lrs(6000), 2.35, p, rng).resistance == Approx(5945.0).epsilon(1e-12));
    CHECK(apply_set(lrs(6000), 2.3, p, rng).state == CellState::lrs);
}

TEST_CASE("SET rejects gate voltages outside the physical range", "[device]") {
    DeviceModelParams p;
    Rng rng(1);
    CHECK_THROWS_AS(apply_set(lrs(6000), 1.49, p, rng), std::invalid_argument);
    CHECK_THROWS_AS(apply_set(lrs(6000), 3.51, p, rng), std::invalid_argument);
    CHECK_NOTHROW(apply_set(lrs(6000), 1.5, p, rng));
    CHECK_NOTHROW(apply_set(lrs(6000), 3.5, p, rng));
}

TEST_CASE("seeded draws are reproducible", "[device]") {
    DeviceModelParams p;
    Rng a(42);
    Rng b(42);
    CHECK(apply_set(lrs(6000), 2.3, p, a).resistance == apply_set(lrs(6000), 2.3, p, b).resistance);
    CHECK(apply_reset(lrs(6000), p, a).resistance == apply_reset(lrs(6000), p, b).resistance);
}

TEST_CASE("RESET with zero sigma returns the median", "[device]") {
    auto p = zero_sigma();
    Rng rng(3);
    const auto s = apply_reset(lrs(6000), p, rng);
    CHECK(s.state == CellState::hrs);
    CHECK(s.resistance == Approx(3e6).epsilon(1e-12));
}

TEST_CASE("state invariants hold over many draws", "[device][property]") {
    DeviceModelParams p;
    p.lrs_sigma_rel = 0.5;  // wide enough to hit the clamps
    p.hrs_log_sigma = 3.0;
    Rng rng(11);
    for (int i = 0; i < 20000; ++i) {
        const auto s = apply_set(lrs(6000), 1.5 + 2.0 * uniform01(rng), p, rng);
        REQUIRE(s.resistance >= p.lrs_min);
        REQUIRE(s.resistance <= p.lrs_max);
        const auto h = apply_reset(s, p, rng);
        REQUIRE(h.resistance >= p.hrs_floor);
        REQUIRE(h.resistance > 0.0);
    }
}

TEST_CASE("read_resistance is an identity read and rejects pristine cells", "[device]") {
    CHECK(read_resistance(lrs(6000)) == 6000.0);
    CHECK(read_resistance({CellState::hrs, 3e6}) == 3e6);
    CHECK_THROWS_AS(read_resistance(DeviceState{}), UnprogrammedError);
}

TEST_CASE("LRS write-verify converges on the first SET when already in window", "[device]") {
    auto p = zero_sigma();
    DeviceState cell = lrs(20000);
    Rng rng(5);
    const auto rep = write_verify_lrs(cell, LrsTarget{}, p, rng);
    CHECK(rep.converged);
    CHECK(rep.iterations_used == 1);
    CHECK(rep.final_resistance == Approx(6010.0));
}

TEST_CASE("LRS write-verify steps the gate up until the window is reached", "[device]") {
    auto p = zero_sigma(9190.0);  // mean(2.3) = 6200
    DeviceState cell = lrs(20000);
    Rng rng(5);
    const auto rep = write_verify_lrs(cell, LrsTarget{}, p, rng);
    CHECK(rep.converged);
    CHECK(rep.iterations_used == 3);
    CHECK(rep.final_gate_v == Approx(2.4));
    CHECK(rep.final_resistance == Approx(6070.0));
    std::vector<double> sets;
    int resets = 0;
    for (const auto& e : rep.trace) {
        if (e.pulse.kind == PulseKind::set) sets.push_back(e.resistance);
        if (e.pulse.kind == PulseKind::reset) ++resets;
    }
    REQUIRE(sets.size() == 3);
    CHECK(sets[0] == Approx(6200.0));
    CHECK(sets[1] == Approx(6135.0));
    CHECK(sets[2] == Approx(6070.0));
    CHECK(resets == 2);  // a RESET precedes every SET after the first
}

TEST_CASE("LRS write-verify steps the gate down when resistance is too low", "[device]") {
    auto p = zero_sigma(8800.0);  // mean(2.3) = 5810
    DeviceState cell = lrs(20000);
    Rng rng(5);
    const auto rep = write_verify_lrs(cell, LrsTarget{}, p, rng);
    CHECK(rep.converged);
    CHECK(rep.final_gate_v == Approx(2.2));  // 5810 -> 5875 -> 5940
    CHECK(rep.iterations_used == 3);
}

TEST_CASE("zero-sigma LRS loop moves monotonically toward the window", "[device][property]") {
    for (double intercept : {8000.0, 8600.0, 9400.0, 10000.0}) {
        auto p = zero_sigma(intercept);
        DeviceState cell = lrs(20000);
        Rng rng(1);
        LrsTarget t;
        t.max_iter = 40;
        const auto rep = write_verify_lrs(cell, t, p, rng);
        double prev = 1e300;
        for (const auto& e : rep.trace) {
            if (e.pulse.kind != PulseKind::set) continue;
            const double d = std::abs(e.resistance - 6000.0);
            if (e.resistance >= t.lo && e.resistance <= t.hi) break;
            CHECK(d < prev);
            prev = d;
        }
    }
}

TEST_CASE("write-verify loops terminate within the pulse budget", "[device][property]") {
    DeviceModelParams p;
    p.lrs_sigma_rel = 0.3;  // makes non-convergence common
    Rng rng(9);
    for (int i = 0; i < 2000; ++i) {
        DeviceState c;
        LrsTarget t;
        t.max_iter = 1 + static_cast<int>(i % 10);
        const auto rep = write_verify_lrs(c, t, p, rng);
        REQUIRE(rep.iterations_used <= t.max_iter);
        if (rep.converged) REQUIRE((rep.final_resistance >= t.lo && rep.final_resistance <= t.hi));
        DeviceState h;
        HrsTarget ht;
        ht.max_iter = t.max_iter;
        const auto hr = write_verify_hrs(h, ht, p, rng);
        REQUIRE(hr.iterations_used <= ht.max_iter);
        if (hr.converged) REQUIRE(hr.final_resistance > ht.threshold);
    }
}

TEST_CASE("HRS write-verify with zero sigma converges in one pulse", "[device]") {
    auto p = zero_sigma();
    DeviceState cell = lrs(6000);
    Rng rng(2);
    const auto rep = write_verify_hrs(cell, HrsTarget{}, p, rng);
    CHECK(rep.converged);
    CHECK(rep.iterations_used == 1);
    CHECK(rep.final_resistance == Approx(3e6));
}

TEST_CASE("HRS convergence probability follows 1 - (1 - p)^10", "[device][statistics]") {
    // Single-pulse success p = 0.2: the median sits z(0.8) log-sigmas below 1 MOhm.
    DeviceModelParams params;
    const double z80 = 0.8416212335729143;
    params.hrs_log_median = 1e6 * std::exp(-z80 * params.hrs_log_sigma);
    const double p = 0.2;
    const double expected = 1.0 - std::pow(1.0 - p, 10);
    int ok = 0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        DeviceState cell = lrs(6000);  // already formed
        Rng rng = make_stream(123, i);
        ok += write_verify_hrs(cell, HrsTarget{}, params, rng).converged ? 1 : 0;
    }
    CHECK(std::abs(static_cast<double>(ok) / trials - expected) < 0.01);
}

TEST_CASE("pristine cells are formed before programming", "[device]") {
    DeviceModelParams p;
    DeviceState cell;
    Rng rng(4);
    const auto rep = write_verify_lrs(cell, LrsTarget{}, p, rng);
    REQUIRE_FALSE(rep.trace.empty());
    CHECK(rep.trace.front().pulse.kind == PulseKind::form);
    CHECK(cell.state == CellState::lrs);
}

TEST_CASE("refresh leaves in-window cells untouched", "[device]") {
    DeviceModelParams p;
    DeviceState cell = lrs(6000);
    Rng rng(4);
    const auto rep = refresh_lrs(cell, LrsTarget{}, p, rng);
    CHECK(rep.converged);
    CHECK(rep.iterations_used == 0);
    CHECK(cell.resistance == 6000.0);
    DeviceState out = lrs(6500);
    const auto rep2 = refresh_lrs(out, LrsTarget{}, p, rng);
    CHECK(rep2.iterations_used >= 1);
}

TEST_CASE("parameter validation rejects inconsistent models", "[device]") {
    DeviceModelParams p;
    p.lrs_slope = 100.0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = {};
    p.lrs_sigma_rel = -0.1;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    LrsTarget t;
    t.lo = 7000;
    CHECK_THROWS_AS(validate(t), std::invalid_argument);
    HrsTarget h;
    h.max_iter = 0;
    CHECK_THROWS_AS(validate(h), std::invalid_argument);
}
