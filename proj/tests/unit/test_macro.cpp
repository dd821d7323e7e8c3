#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstring>
#include <sstream>

#include "oracles.hpp"
#include "xnor_rram/macro.hpp"

using namespace xnor_rram;
using Catch::Approx;

namespace {

HeaderConfig fixed_pullup(double ohms) {
    HeaderConfig h = HeaderConfig::nominal(4);
    h.pullup_ohms[3] = ohms;
    // keep the table strictly decreasing around the override
    h.pullup_ohms[2] = ohms * 1.5;
    h.pullup_ohms[4] = ohms * 0.8;
    return h;
}

InputVector vec_from(std::span<const Bit> v) {
    InputVector in{};
    std::copy(v.begin(), v.end(), in.begin());
    return in;
}

}  // namespace

TEST_CASE("ideal bitcount extremes and symmetry", "[macro]") {
    InputVector ones{};
    ones.fill(1);
    InputVector neg{};
    neg.fill(-1);
    CHECK(ideal_bitcount(ones, ones) == 64);
    CHECK(ideal_bitcount(ones, neg) == -64);
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const auto w = WeightTile::random(rng).column(0);
        const auto x = vec_from(w);
        InputVector nx{};
        for (int r = 0; r < 64; ++r) nx[static_cast<std::size_t>(r)] = static_cast<Bit>(-x[static_cast<std::size_t>(r)]);
        CHECK(ideal_bitcount(x, w) == 64);
        CHECK(ideal_bitcount(nx, w) == -64);
    }
}

TEST_CASE("bitcount equals 2m - 64 and is always even", "[macro][property]") {
    Rng rng(8);
    for (int i = 0; i < 500; ++i) {
        const auto w = WeightTile::random(rng).column(0);
        const int m = static_cast<int>(rng() % 65);
        const auto x = input_with_matches(w, m, rng);
        CHECK(matches(x, w) == m);
        CHECK(ideal_bitcount(x, w) == 2 * m - 64);
        CHECK(oracle::xnor_dot(x, w) == 2 * m - 64);
    }
}

TEST_CASE("closed-form divider voltages", "[macro]") {
    MacroArray macro(1.2);
    macro.program_exact(WeightTile{}, 6000.0, 1e6);
    const auto h = fixed_pullup(2000.0);
    const auto w = macro.weights().column(0);
    Rng rng(1);
    const auto at = [&](int m) { return macro.evaluate_bitline(0, input_with_matches(w, m, rng), h); };

    CHECK(macro.pulldown_resistance(0, input_with_matches(w, 0, rng)) == Approx(15625.0).epsilon(1e-12));
    CHECK(at(0).voltage == Approx(1.0638297872).epsilon(1e-9));
    CHECK(macro.pulldown_resistance(0, input_with_matches(w, 64, rng)) == Approx(93.75).epsilon(1e-12));
    CHECK(at(64).voltage == Approx(0.0537313433).epsilon(1e-9));
    CHECK(macro.pulldown_resistance(0, input_with_matches(w, 32, rng)) == Approx(186.38).epsilon(1e-4));
    CHECK(at(32).voltage == Approx(0.10230).epsilon(1e-4));
    const auto r = at(32);
    CHECK(r.selected_lrs == 32);
    CHECK(r.bitcount == 0);
    for (int m = 0; m <= 64; ++m) {
        CHECK(at(m).voltage == Approx(oracle::divider_voltage(1.2, 2000.0, m, 6000.0, 1e6)).epsilon(1e-12));
    }
}

TEST_CASE("programming maps weights onto complementary LRS/HRS cells", "[macro]") {
    WeightTile checker;
    for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c) checker(r, c) = ((r + c) % 2 == 0) ? 1 : -1;
    for (const auto& w : {WeightTile{}, checker}) {
        MacroArray macro;
        macro.program_weights(w, DeviceModelParams{}, ProgrammingTargets{}, 17);
        for (int r = 0; r < 64; ++r) {
            for (int c = 0; c < 64; ++c) {
                const auto& cell = macro.bitcell(r, c);
                const bool plus = w(r, c) > 0;
                CHECK(cell.pos_cell.state == (plus ? CellState::lrs : CellState::hrs));
                CHECK(cell.neg_cell.state == (plus ? CellState::hrs : CellState::lrs));
            }
        }
    }
}

TEST_CASE("selected cell is LRS iff XNOR(input, weight) = +1", "[macro]") {
    Rng rng(21);
    MacroArray macro;
    const auto w = WeightTile::random(rng);
    macro.program_exact(w, 6000.0, 3e6);
    for (int r = 0; r < 64; ++r) {
        for (int c = 0; c < 64; c += 7) {
            for (Bit a : {Bit{1}, Bit{-1}}) {
                const auto& cell = macro.bitcell(r, c);
                const auto& sel = a > 0 ? cell.pos_cell : cell.neg_cell;
                CHECK((sel.state == CellState::lrs) == (a == w(r, c)));
            }
        }
    }
}

TEST_CASE("unprogrammed columns are rejected", "[macro]") {
    MacroArray macro;
    InputVector x{};
    x.fill(1);
    CHECK_THROWS_AS(macro.evaluate_bitline(0, x, HeaderConfig::fitted()), UnprogrammedError);
    CHECK_THROWS_AS(MacroArray(1.5), std::invalid_argument);
}

TEST_CASE("voltage depends on the input only through m for exact arrays", "[macro][property]") {
    Rng rng(5);
    MacroArray macro;
    macro.program_exact(WeightTile::random(rng), 6000.0, 3e6);
    const auto h = HeaderConfig::fitted();
    for (int c = 0; c < 64; c += 9) {
        const auto w = macro.weights().column(c);
        for (int m = 0; m <= 64; m += 3) {
            const double v0 = macro.evaluate_bitline(c, input_with_matches(w, m, rng), h).voltage;
            for (int k = 0; k < 5; ++k) {
                CHECK(macro.evaluate_bitline(c, input_with_matches(w, m, rng), h).voltage == v0);
            }
        }
    }
}

TEST_CASE("voltage strictly decreases when an HRS selection becomes LRS", "[macro][property]") {
    Rng rng(6);
    MacroArray macro;
    macro.program_weights(WeightTile::random(rng), DeviceModelParams{}, ProgrammingTargets{}, 99);
    const auto h = HeaderConfig::fitted();
    for (int trial = 0; trial < 300; ++trial) {
        const int c = static_cast<int>(rng() % 64);
        const auto w = macro.weights().column(c);
        auto x = input_with_matches(w, static_cast<int>(rng() % 64), rng);
        // flip one mismatching row to a match
        int r = 0;
        while (x[static_cast<std::size_t>(r)] == w[static_cast<std::size_t>(r)]) ++r;
        const double before = macro.evaluate_bitline(c, x, h).voltage;
        x[static_cast<std::size_t>(r)] = w[static_cast<std::size_t>(r)];
        CHECK(macro.evaluate_bitline(c, x, h).voltage < before);
    }
}

TEST_CASE("negating input and weights leaves bitcount and voltage unchanged", "[macro][property]") {
    Rng rng(12);
    const auto w = WeightTile::random(rng);
    WeightTile nw;
    for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c) nw(r, c) = static_cast<Bit>(-w(r, c));
    MacroArray a;
    MacroArray b;
    a.program_exact(w, 6000.0, 3e6);
    b.program_exact(nw, 6000.0, 3e6);
    const auto h = HeaderConfig::fitted();
    for (int i = 0; i < 200; ++i) {
        const int c = static_cast<int>(rng() % 64);
        InputVector x{};
        for (auto& v : x) v = (rng() & 1U) ? 1 : -1;
        InputVector nx{};
        for (int r = 0; r < 64; ++r) nx[static_cast<std::size_t>(r)] = static_cast<Bit>(-x[static_cast<std::size_t>(r)]);
        CHECK(ideal_bitcount(x, w.column(c)) == ideal_bitcount(nx, nw.column(c)));
        CHECK(a.evaluate_bitline(c, x, h).voltage == b.evaluate_bitline(c, nx, h).voltage);
    }
}

TEST_CASE("transfer curve on an exact array has zero spread and decreases", "[macro]") {
    MacroArray macro;
    Rng rng(2);
    macro.program_exact(WeightTile::random(rng), 6000.0, 3e6);
    const auto curve = transfer_curve(macro, 3, HeaderConfig::fitted(), 20, rng);
    REQUIRE(curve.size() == 65);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        CHECK(curve[i].bitcount == 2 * static_cast<int>(i) - 64);
        CHECK(curve[i].std_v == 0.0);
        if (i > 0) CHECK(curve[i].mean_v < curve[i - 1].mean_v);
    }
}

TEST_CASE("fitted header maximizes the slope at bitcount 0 for strength 4", "[macro]") {
    const auto h = HeaderConfig::fitted();
    REQUIRE_NOTHROW(validate(h));
    // V(m) = vdd / (1 + R_pu * g(m)); |dV/dg| peaks where R_pu * g = 1.
    const double g0 = 32.0 / 6000.0 + 32.0 / 3e6;
    CHECK(h.pullup() * g0 == Approx(1.0).epsilon(1e-12));
    CHECK(oracle::divider_voltage(1.2, h.pullup(), 32, 6000.0, 3e6) == Approx(0.6).epsilon(1e-12));
    // any other pull-up gives a smaller local slope at b = 0
    auto slope = [](double r_pu) {
        return oracle::divider_voltage(1.2, r_pu, 31, 6000.0, 3e6) - oracle::divider_voltage(1.2, r_pu, 33, 6000.0, 3e6);
    };
    for (double f : {0.5, 0.8, 0.95, 1.05, 1.25, 2.0}) CHECK(slope(h.pullup() * f) < slope(h.pullup()));
}

TEST_CASE("header table validation", "[macro]") {
    HeaderConfig h = HeaderConfig::nominal(4);
    CHECK_NOTHROW(validate(h));
    h.pullup_ohms[5] = h.pullup_ohms[4];
    CHECK_THROWS_AS(validate(h), std::invalid_argument);
    h = HeaderConfig::nominal(9);
    CHECK_THROWS_AS(validate(h), std::invalid_argument);
}

TEST_CASE("snapshot round trip is byte-identical", "[macro][io]") {
    Rng rng(31);
    MacroArray macro;
    macro.program_weights(WeightTile::random(rng), DeviceModelParams{}, ProgrammingTargets{}, 5);
    std::stringstream a;
    macro.save_snapshot(a);
    const std::string bytes = a.str();
    REQUIRE(bytes.size() == 64 * 64 * 2 * 8);
    std::stringstream in(bytes);
    const auto loaded = MacroArray::load_snapshot(in);
    std::stringstream b;
    loaded.save_snapshot(b);
    CHECK(b.str() == bytes);
    CHECK(loaded.weights() == macro.weights());
    InputVector x{};
    for (auto& v : x) v = (rng() & 1U) ? 1 : -1;
    CHECK(loaded.evaluate_bitline(7, x, HeaderConfig::fitted()).voltage ==
          macro.evaluate_bitline(7, x, HeaderConfig::fitted()).voltage);
}

TEST_CASE("snapshot layout is little-endian float64, positive cell first", "[macro][io]") {
    MacroArray macro;
    macro.program_exact(WeightTile{}, 6000.0, 3e6);
    std::stringstream s;
    macro.save_snapshot(s);
    const std::string bytes = s.str();
    auto read = [&](std::size_t i) {
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= std::uint64_t{static_cast<unsigned char>(bytes[i * 8 + k])} << (8 * k);
        double v = 0;
        std::memcpy(&v, &bits, 8);
        return v;
    };
    CHECK(read(0) == 6000.0);
    CHECK(read(1) == 3e6);
}

TEST_CASE("truncated snapshots are rejected", "[macro][io]") {
    std::stringstream s(std::string(100, '\0'));
    CHECK_THROWS_AS(MacroArray::load_snapshot(s), IoError);
}

TEST_CASE("random 64x64 programming meets the population bounds", "[macro][statistics]") {
    Rng rng(77);
    MacroArray macro;
    const auto rep = macro.program_weights(WeightTile::random(rng), DeviceModelParams{}, ProgrammingTargets{}, 2024);
    const auto lrs = rep.lrs_resistances();
    const auto hrs = rep.hrs_resistances();
    REQUIRE(lrs.size() == 4096);
    REQUIRE(hrs.size() == 4096);
    const auto frac = [](const std::vector<double>& v, auto pred) {
        return static_cast<double>(std::count_if(v.begin(), v.end(), pred)) / static_cast<double>(v.size());
    };
    CHECK(frac(lrs, [](double r) { return r >= 5700 && r <= 6300; }) >= 0.99);
    CHECK(frac(lrs, [](double r) { return r < 5900; }) < 0.10);
    CHECK(frac(lrs, [](double r) { return r > 6100; }) < 0.25);
    CHECK(frac(hrs, [](double r) { return r < 1e6; }) < 0.01);
}
