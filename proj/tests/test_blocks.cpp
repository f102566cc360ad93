#include "doctest.h"

#include <random>

#include "berglab/blocks.hpp"

using namespace berglab;

namespace {

struct Fixture {
    RadialWeight w = RadialWeight::double_exp(1, 1);
    std::vector<double> x, Q;
    MinorantResult r;
    Fixture() {
        for (int i = 0; i <= 4000; ++i) {
            x.push_back(0.01 * i);
            Q.push_back(std::exp(x.back() / 2));
        }
        r = regularize(x, Q, 0.5);
    }
};

const Fixture& fx() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("F_alpha") {
    auto f0 = f_alpha(3.5, 0.0);
    CHECK(f0.log_magnitude == 0.0);
    CHECK(f0.phase == 0.0);
    auto fr = f_alpha(2.5, 0.3);
    CHECK(fr.log_magnitude == doctest::Approx(-2.5 * std::log(0.7)).epsilon(1e-15));
    CHECK(fr.phase == 0.0);
    CHECK_THROWS_AS(f_alpha_gap(2.0, 0.0), NumericError);
    for (double alpha : {3.0, 7.5, 40.0}) {
        for (double rho : {0.01, 0.2, 0.9}) {
            for (int sgn : {-1, 1}) {
                cplx z = 1.0 - std::polar(rho, sgn * kPi / alpha);
                auto F = f_alpha(alpha, z);
                double re = F.real_part().to_double();
                double expect = -std::pow(std::abs(1.0 - z), -alpha);
                CHECK(std::fabs(re / expect - 1) <= 1e-12);
            }
        }
    }
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 2000; ++i) {
        cplx z = std::polar(std::sqrt(u(rng)) * 0.999, 2 * kPi * u(rng));
        double alpha = 0.5 + 50 * u(rng);
        auto F = f_alpha(alpha, z);
        auto re = F.real_part();
        CHECK(re <= LogReal(F.log_magnitude, 1));
        CHECK(F.log_magnitude <= -alpha * std::log(1 - std::abs(z)) + 1e-12 * alpha);
    }
    double phi = 0.1;
    for (int i = 0; i < 2000; ++i) {
        double alpha = 100 + 900 * u(rng);
        cplx z = std::polar(0.5 + 0.5 * u(rng), 2 * kPi * u(rng));
        if (!(std::abs(z) < 1) || std::fabs(std::arg(1.0 - z)) <= phi) continue;
        auto F = f_alpha(alpha, z);
        CHECK(F.log_magnitude <= -alpha * phi * phi / 3 - alpha * std::log(1 - std::abs(z)));
    }
}

TEST_CASE("block values at distinguished points") {
    auto& f = fx();
    auto b = block_at_touch(f.r, f.w, 10.0);
    CHECK(b.lam == doctest::Approx(std::exp(10.0)).epsilon(1e-14));
    CHECK(b.lam_prime == doctest::Approx(std::exp(10.0)).epsilon(1e-14));
    CHECK(b.r_n == 1 - std::exp(-10.0));
    CHECK(b.gamma_used <= b.gamma_n);
    auto at_r = block_eval_gap(b, b.delta_n);
    CHECK(at_r.h.sign == 1);
    CHECK(std::fabs(at_r.h.log_magnitude - theta_small(f.r, b.delta_n).log_magnitude) <= 1e-9 * b.lam);
    auto wit = block_eval_gap(b, b.delta_n * std::polar(1.0, kPi / b.lam_prime));
    CHECK(wit.h.sign == -1);
    CHECK(std::fabs(wit.h.log_magnitude - b.lam) <= 1e-9 * b.lam);
    auto at0 = block_eval(b, 0.0);
    CHECK(at0.h.log_magnitude == doctest::Approx(b.lam - b.x_n * b.lam_prime).epsilon(1e-12));
}

TEST_CASE("H' closed form vs finite differences") {
    auto b = make_block(3.0, std::exp(3.0), std::exp(3.0));
    for (cplx z : {cplx(0.9, 0.02), cplx(0.95, -0.01), cplx(0.5, 0.3), cplx(-0.2, 0.6)}) {
        double h = 1e-6 * (1 - std::abs(z));
        cplx fp = (block_eval(b, z + h).H.to_complex() - block_eval(b, z - h).H.to_complex()) / (2 * h);
        cplx cf = block_derivative_gap(b, to_gap(z)).to_complex();
        CHECK(std::abs(fp - cf) <= 1e-5 * std::abs(cf));
    }
}

TEST_CASE("building blocks are harmonic") {
    auto b = make_block(3.0, std::exp(3.0), std::exp(3.0));
    for (cplx z : {cplx(0.9, 0.02), cplx(0.95, 0.0), cplx(0.5, 0.3), cplx(0.97, -0.01)}) {
        double s = 1e-4 * (1 - std::abs(z));
        auto h = [&](cplx p) { return block_eval(b, p).h.to_double(); };
        double c = h(z);
        double hxx = h(z + s) + h(z - s) - 2 * c;
        double hyy = h(z + cplx(0, s)) + h(z - cplx(0, s)) - 2 * c;
        CHECK(std::fabs(hxx + hyy) <= 1e-4 * (std::fabs(hxx) + std::fabs(hyy)));
    }
}

TEST_CASE("majorant estimates for a deep block") {
    auto& f = fx();
    auto b = block_at_touch(f.r, f.w, 10.0);
    auto rep = verify_majorants(b, f.r, block_grid(b));
    CHECK_FALSE(rep.below_regime);
    for (auto& c : rep.checks) CHECK_MESSAGE(c.pass, c.name << " margin " << c.margin << " at " << c.location);
    CHECK(rep.c_theta < 1);
    // equality in (a) at r_n
    CHECK(std::fabs(rep.values[0].second) <= 1e-9 * b.lam);
    // the excluded disk is not scanned: a point inside violates (b)
    auto inner = block_eval_gap(b, b.delta_n);
    CHECK(inner.h.log_magnitude >= f.r.lambda(b.x_n) - 1e-9 * b.lam);
}

TEST_CASE("auxiliary block estimates") {
    auto& f = fx();
    for (double xn : {8.0, 10.0, 12.0}) {
        auto b = block_at_touch(f.r, f.w, xn);
        auto rep = verify_block_aux(b, f.w, 0.5);
        for (auto& c : rep.checks) CHECK_MESSAGE(c.pass, xn << " " << c.name << " margin " << c.margin);
        double gap = rep.values[0].second;
        CHECK(gap > b.delta_n / 2);
        CHECK(gap < b.delta_n);
    }
    auto b = block_at_touch(f.r, f.w, 10.0);
    auto far = block_eval(b, -b.r_n);
    CHECK(far.h.log_magnitude < -3 * b.x_n);
}

TEST_CASE("concentration integral matches direct quadrature on a shallow block") {
    auto w = RadialWeight::double_exp(1, 1);
    double xn = 3.0;
    auto b = make_block(xn, w.Lambda(xn), w.Lambda_prime(xn));
    double theta = std::exp(b.lam);
    for (double log_g : {std::log(5.0), std::log(50.0), std::log(400.0)}) {
        auto ci = concentration_integral(b, w, log_g);
        REQUIRE(ci.method == "laplace");
        double g = std::exp(log_g), gam = g / theta, d = b.delta_n, lp = b.lam_prime;
        // bracket in local coordinates v = (z - r_n)/delta
        auto bracket = [&](double a, double c) {
            cplx v(a, c);
            double e_a = std::real(std::pow(1.0 - v, -lp));
            cplx wgap = d * (1.0 - v);
            double gap = one_minus_abs(wgap);
            double tau = -std::log(gap / d);
            return (1 + gam) * e_a - std::exp(w.Lambda_increment(xn, tau));
        };
        double Ka = w.Lambda_prime(xn) + w.Lambda_second(xn) + lp * lp - (1 + gam) * (lp + lp * lp);
        double Kb = (1 + gam) * (lp + lp * lp);
        double sa = 1 / std::sqrt(theta * Ka), sb = 1 / std::sqrt(theta * Kb);
        double a0 = gam * lp / Ka;
        auto gl = gauss_legendre(8);
        int cells = 60;
        double span_a = 12 * sa, span_b = 12 * sb, sum = 0, peak = theta * bracket(a0, 0);
        for (int i = 0; i < cells; ++i)
            for (int j = 0; j < cells; ++j)
                for (int p = 0; p < 8; ++p)
                    for (int q = 0; q < 8; ++q) {
                        double a = a0 - span_a + span_a * (2 * i + 1 + gl.x[p]) / cells;
                        double c = -span_b + span_b * (2 * j + 1 + gl.x[q]) / cells;
                        double wt = gl.w[p] * gl.w[q] * (span_a / cells) * (span_b / cells);
                        sum += wt * std::exp(theta * bracket(a, c) - peak);
                    }
        double direct = peak + std::log(sum * d * d / kPi);
        double laplace = ci.log_integral.sign * std::exp(ci.log_integral.log_magnitude);
        CHECK(std::fabs(laplace - direct) <= 1e-3 * std::max(1.0, std::fabs(direct)));
    }
}

TEST_CASE("theta regularity") {
    auto& f = fx();
    std::vector<double> s;
    for (double v = 0.5; v > 1e-15; v *= 0.8) s.push_back(v);
    auto rep = verify_theta_regularity(f.r, s);
    CHECK(rep.all_pass());
    CHECK(rep.values[0].second == 0);
    auto one = verify_theta_regularity(f.r, {0.05});
    CHECK(one.all_pass());
    auto xs = f.r.q.xs();
    auto ys = f.r.q.ys();
    auto it = std::upper_bound(xs.begin(), xs.end(), 1.0);
    std::size_t at = it - xs.begin();
    xs.insert(it, 1.0 + 1e-9);
    ys.insert(ys.begin() + at, f.r.q(1.0));
    for (std::size_t i = at + 1; i < ys.size(); ++i) ys[i] += 3;
    auto bad = f.r;
    bad.q = PiecewiseLinear(xs, ys);
    CHECK_FALSE(verify_theta_regularity(bad, {std::exp(-1.0)}).all_pass());
}

TEST_CASE("pair estimates") {
    auto& f = fx();
    auto b = block_at_touch(f.r, f.w, 10.0);
    auto id = pair_estimates(b, f.r, cplx(0.3, 0.2), 0.0);
    CHECK(id.get("41").pass);
    auto shallow = pair_estimates(b, f.r, cplx(0.6, 0.1), cplx(1e-6, -2e-6));
    CHECK(shallow.get("41").pass);
    CHECK(shallow.get("case_a").pass);
    cplx zc = 1.0 - std::polar(std::exp(-9.5), 0.9 * kPi / 2);
    auto deep = pair_estimates(b, f.r, zc, 0.0);
    CHECK(deep.get("case_b").pass);
    CHECK(deep.get("case_c").pass);
    CHECK_THROWS_AS(pair_estimates(b, f.r, cplx(0.6, 0.1), 0.1), UsageError);
}

TEST_CASE("ratio estimates") {
    auto& f = fx();
    auto b = block_at_touch(f.r, f.w, 10.0);
    auto same = ratio_estimates(b, f.r, cplx(0.7, 0.1), 0.0);
    CHECK(same.get("value_ratio").pass);
    auto near = ratio_estimates(b, f.r, cplx(0.7, 0.1), cplx(1e-12, 0));
    for (auto& c : near.checks) CHECK_MESSAGE(c.pass, c.name);
    cplx zd = 1.0 - std::polar(2 * b.delta_n, 0.2);
    auto deep = ratio_estimates(b, f.r, zd, 0.0);
    for (auto& c : deep.checks) CHECK_MESSAGE(c.pass, c.name);
    CHECK_THROWS_AS(ratio_estimates(b, f.r, cplx(0.7, 0.1), 0.01), UsageError);
}
