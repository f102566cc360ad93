#include "doctest.h"

#include <random>

#include "berglab/construct.hpp"

using namespace berglab;

namespace {

const RadialWeight& weight() {
    static auto w = RadialWeight::double_exp(1, 1);
    return w;
}

const ConstructionState& state() {
    static auto s = build_construction(weight(), ConstructConfig{});
    return s;
}

DiskPoint node_point(const ConstructLevel& l, int k, cplx gap) {
    return {std::polar(1.0, 2 * kPi * k / l.lattice.N), gap};
}

}  // namespace

TEST_CASE("depth selection") {
    auto s = init_state(weight(), ConstructConfig{});
    auto c = select_next_x(s.minorant, 0.5, std::exp(-5.0), 1, 0);
    double bound = 5 + 2 + std::log(2.0);
    CHECK(c.bound_eq32 == doctest::Approx(bound).epsilon(1e-14));
    CHECK(c.x > bound);
    CHECK(std::find(s.minorant.touch_points.begin(), s.minorant.touch_points.end(), c.x) !=
          s.minorant.touch_points.end());
    auto c2 = select_next_x(s.minorant, 0.5, std::exp(-5.0), 2, 0);
    CHECK(c2.bound_eq32 - c.bound_eq32 == doctest::Approx(2.0).epsilon(1e-14));
    auto f = select_next_x(s.minorant, 0.5, std::exp(-5.0), 1, 16);
    CHECK(f.x >= 16);
    CHECK(f.bound_by == "schedule");
    CHECK_THROWS_AS(select_next_x(s.minorant, 0.5, std::exp(-5.0), 1, 45), UsageError);
}

TEST_CASE("eta selection") {
    auto none = [](const DiskPoint&) { return false; };
    CHECK(select_eta([](const DiskPoint&) { return LogReal::zero(); }, none) == 0.5);
    double prev = 1;
    for (double a : {0.1, 1.0, 3.0, 6.0}) {
        double e = select_eta([&](const DiskPoint& p) { return LogReal::from_double(a * p.z().real()); }, none);
        CHECK(e <= prev);
        CHECK(std::exp(a) < 1 / e);
        prev = e;
    }
    CHECK(prev < 0.5);
    auto jump = [](const DiskPoint& p) { return LogReal::from_double(p.z().real() > 0.3 ? 5.0 : 0.0); };
    CHECK_THROWS_AS(select_eta(jump, none), NumericError);
}

TEST_CASE("gamma solve") {
    auto s = init_state(weight(), ConstructConfig{});
    auto b = block_at_touch(s.minorant, weight(), 8.0);
    auto I = [&](double u) { return concentration_integral(b, weight(), u).log_integral; };
    auto at0 = solve_gamma(b, weight(), I(kNegInf));
    CHECK(at0.status == GammaStatus::Solved);
    CHECK(at0.log_gamma == kNegInf);
    CHECK(at0.residual <= 1e-8);

    double prev = -1e300;
    for (int i = 0; i < 10; ++i) {
        double v = I(std::log(b.lam) + 0.1 * i).to_double();
        CHECK(v > prev);
        prev = v;
    }

    LogReal target = LogReal::from_double(-std::log(20.0));
    double tol = 1e-8;
    auto sol = solve_gamma(b, weight(), target, tol);
    REQUIRE(sol.status == GammaStatus::Solved);
    CHECK(sol.residual <= tol);
    // grid scan over gamma theta: the bisection answer lies in the sign-change cell
    double g0 = 0, g1 = 2 * b.lam + 100;
    auto F = [&](double g) { return (I(std::log(g)) - target).to_double(); };
    double lo = g0, hi = g1, fprev = F(g0 + 1e-300);
    for (int i = 1; i <= 10000; ++i) {
        double g = g0 + (g1 - g0) * i / 10000;
        double f = F(g);
        if (fprev < 0 && f >= 0) {
            lo = g0 + (g1 - g0) * (i - 1) / 10000;
            hi = g;
            break;
        }
        fprev = f;
    }
    double g = sol.scaled().to_double();
    CHECK(g >= lo - 2 * tol);
    CHECK(g <= hi + 2 * tol);
    CHECK(std::fabs(F(g)) <= 2 * tol);

    auto low = solve_gamma(b, weight(), LogReal(1e4, -1));
    CHECK(low.status == GammaStatus::ClampedLow);
    CHECK(solve_gamma(b, weight(), LogReal(3000.0, 1)).status == GammaStatus::ClampedHigh);
    CHECK_THROWS_AS(solve_gamma(b, weight(), LogReal(2500.0, 1)), NumericError);
    auto big = solve_gamma(b, weight(), LogReal(1400.0, 1));
    CHECK(big.status == GammaStatus::Solved);
    CHECK(big.residual <= 1e-8);
    CHECK(big.scaled_base.log_magnitude == 1400.0);
}

TEST_CASE("two-level construction") {
    auto& s = state();
    REQUIRE(s.levels.size() == 2);
    auto& l1 = s.levels[0];
    auto& l2 = s.levels[1];
    CHECK(l1.block.x_n == 8.0);
    CHECK(l2.block.x_n == 16.0);
    CHECK(l1.lattice.N == 20);
    CHECK(l2.lattice.N == 59874);
    CHECK(l1.tau == 1.0);
    for (auto* l : {&l1, &l2}) CHECK(std::exp(-l->block.x_n) < l->eta * s.kappa * std::exp(-2.0 * l->n));
    CHECK(l1.count(GammaStatus::Solved) == 20);
    CHECK(l2.count(GammaStatus::Omitted) == 344);
    CHECK(l2.count(GammaStatus::Singular) == 2);
    for (auto* l : {&l1, &l2})
        for (auto& g : l->gammas)
            if (g.status == GammaStatus::Solved) CHECK(g.residual <= 1e-8);

    auto again = build_construction(weight(), ConstructConfig{});
    bool same = true;
    for (std::size_t i = 0; i < 2; ++i)
        for (int k = 0; k < s.levels[i].lattice.N; ++k) {
            const auto &a = s.levels[i].gammas[k];
            const auto &b = again.levels[i].gammas[k];
            same = same && a.status == b.status && a.scaled_offset == b.scaled_offset &&
                   a.scaled_base.log_magnitude == b.scaled_base.log_magnitude;
        }
    CHECK(same);

    auto one = init_state(weight(), ConstructConfig{});
    extend_state(one);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 200; ++i) {
        cplx z = std::polar(std::sqrt(u(rng)) * 0.999, 2 * kPi * u(rng));
        auto a = eval_W(s, DiskPoint::at(z));
        auto d = eval_W_direct(s, z);
        double av = a.re.to_double(), dv = d.re.to_double();
        CHECK(std::fabs(av - dv) <= 1e-9 * std::max(1.0, std::fabs(av)));
        CHECK(eval_W(s, DiskPoint::at(z), 1).re.to_double() == eval_W(one, DiskPoint::at(z)).re.to_double());
    }
    for (int i = 0; i < 200; ++i) {
        int k = static_cast<int>(u(rng) * l1.lattice.N);
        cplx gap = l1.block.delta_n * std::polar(0.5 + 3 * u(rng), kPi * (u(rng) - 0.5));
        auto p = node_point(l1, k, gap);
        auto a = eval_W(s, p).re;
        auto d = eval_W_direct(s, p.z()).re;
        CHECK(std::fabs((a - d).to_double()) <= 1e-6 * std::max(1.0, std::fabs(a.to_double())));
    }
    for (int i = 0; i < 10000; ++i) {
        cplx z = std::polar(std::sqrt(u(rng)) * 0.9999, 2 * kPi * u(rng));
        auto f = eval_F(s, z);
        CHECK(std::isfinite(f.log_magnitude));
    }
    CHECK(eval_W(s, DiskPoint::at(0.0)).im.is_zero());
    CHECK_THROWS_AS(eval_F(s, 1.0), UsageError);
    CHECK_THROWS_AS(eval_W(s, node_point(l1, 3, 0.0)), NumericError);
}

TEST_CASE("construction checks") {
    auto& s = state();
    auto inc = verify_level_increment(s, 0);
    CHECK(inc.all_pass());
    CHECK(inc.get("patches_disjoint").margin > 0);

    auto c1 = verify_concentration(s, 0);
    CHECK(c1.all_pass());
    auto c2 = verify_concentration(s, 1);
    CHECK_FALSE(c2.get("eq33").pass);
    CHECK_FALSE(c2.get("c_le_10").pass);
    CHECK(c2.get("ablation").pass);
    double worst_active = 0, inactive = 0;
    for (auto& [k, v] : c2.values) {
        if (k == "log_c_active") worst_active = v;
        if (k == "omitted" || k == "singular") inactive += v;
    }
    CHECK(worst_active < std::log(10.0));
    CHECK(inactive == 346);

    auto dp = find_decay_points(s);
    REQUIRE(dp.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        double d = s.levels[i].block.delta_n;
        CHECK(dp[i].found);
        CHECK(dp[i].log_abs_F <= dp[i].threshold);
        CHECK(dp[i].one_minus_abs > d / 2);
        CHECK(dp[i].one_minus_abs < d);
        CHECK(1 - std::abs(dp[i].xi) == doctest::Approx(dp[i].one_minus_abs).epsilon(1e-6));
    }

    auto ni = verify_norm_integrals(s);
    CHECK(ni.all_pass());
    double total = 0, disks = 0;
    for (auto& [k, v] : ni.values) {
        if (k == "a1_total") total = v;
        if (k.find("_disk_sum") != std::string::npos) disks += v;
    }
    CHECK(disks <= total);
    CHECK(std::isfinite(total));
}

TEST_CASE("interleaved pair schedule") {
    ConstructConfig cfg;
    cfg.levels = 1;
    auto p = build_interleaved_pair(weight(), cfg);
    CHECK(p.first.levels[0].block.x_n == 8.0);
    CHECK(p.second.levels[0].block.x_n == 12.0);
    auto r = verify_pair(p);
    CHECK(r.get("interleaved").pass);
    CHECK(r.get("42a_f1").pass);
    CHECK(r.get("42a_f2").pass);
    CHECK(r.get("42b_f1_on_f2").pass);
    CHECK(r.get("42b_f2_on_f1").pass);
    ConstructConfig two;
    CHECK_THROWS_AS(build_interleaved_pair(weight(), two, 9), UsageError);
}

TEST_CASE("smoothness functional") {
    SmoothnessConfig sc;
    sc.pairs = 2000;
    auto r = verify_smoothness_functional(state(), sc);
    CHECK(r.all_pass());
    auto r2 = verify_smoothness_functional(state(), sc);
    CHECK(r.values == r2.values);
}
