#include "berglab/blocks.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include "checks.hpp"

namespace berglab {

using namespace detail;

double one_minus_abs(cplx w) { return (2 * w.real() - std::norm(w)) / (1 + std::abs(1.0 - w)); }

BuildingBlock make_block(double x_n, double lam, double lam_prime) {
    if (!(x_n > 0)) throw UsageError("building block: x_n must be positive");
    if (!(lam > 0) || !(lam_prime > 0)) throw UsageError("building block: lambda and lambda' must be positive");
    BuildingBlock b;
    b.x_n = x_n;
    b.lam = lam;
    b.lam_prime = lam_prime;
    b.delta_n = std::exp(-x_n);
    b.r_n = 1 - b.delta_n;
    b.log_gamma_n = -lam / 10;
    b.gamma_n = std::exp(b.log_gamma_n);
    b.gamma_used = b.gamma_n;
    return b;
}

BuildingBlock block_at_touch(const MinorantResult& r, const RadialWeight& w, double x_n) {
    double lam = w.Lambda(x_n);
    double lp = w.Lambda_prime(x_n);
    double lo = r.lambda_prime_left(x_n), hi = r.lambda_prime(x_n);
    return make_block(x_n, lam, std::clamp(lp, std::min(lo, hi), hi));
}

LogComplex f_alpha_gap(double alpha, cplx w) {
    if (std::abs(w) == 0) throw NumericError("f_alpha: singularity at z = 1");
    return LogComplex(-alpha * std::log(std::abs(w)), -alpha * std::arg(w));
}

LogComplex f_alpha(double alpha, cplx z) {
    if (!(std::abs(z) < 1)) throw UsageError("f_alpha: |z| must be < 1");
    return f_alpha_gap(alpha, to_gap(z));
}

BlockValue block_eval_gap(const BuildingBlock& b, cplx w) {
    if (std::abs(w) == 0) throw NumericError("block_eval: singularity at z = 1");
    double lm = b.lam - b.lam_prime * (std::log(std::abs(w)) + b.x_n);
    double ph = -b.lam_prime * std::arg(w);
    double c = std::cos(ph);
    BlockValue v;
    v.H = LogComplex(lm, ph);
    v.h = c == 0 ? LogReal::zero() : LogReal(lm + std::log(std::fabs(c)), c > 0 ? 1 : -1);
    return v;
}

BlockValue block_eval(const BuildingBlock& b, cplx z) {
    if (!(std::abs(z) < 1)) throw UsageError("block_eval: |z| must be < 1");
    return block_eval_gap(b, to_gap(z));
}

LogComplex block_derivative_gap(const BuildingBlock& b, cplx w) {
    auto H = block_eval_gap(b, w).H;
    return H * LogComplex(std::log(b.lam_prime), 0.0) / LogComplex::from_complex(w);
}

bool BlockReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const PropertyCheck& c) { return c.pass; });
}

const PropertyCheck& BlockReport::get(const std::string& name) const {
    for (auto& c : checks)
        if (c.name == name) return c;
    throw UsageError("BlockReport: unknown check " + name);
}

std::vector<cplx> block_grid(const BuildingBlock& b, int n_radii, int n_angles) {
    std::vector<cplx> pts;
    double d = b.delta_n;
    double lo = std::log(d * d * d), hi = std::log(1.999);
    for (int i = 0; i < n_radii; ++i) {
        double rho = std::exp(lo + (hi - lo) * i / (n_radii - 1));
        for (int j = 0; j < n_angles; ++j) {
            double psi = -kPi / 2 + kPi * (j + 0.5) / n_angles;
            cplx w = std::polar(rho, psi);
            if (std::abs(1.0 - w) < 1 && one_minus_abs(w) > 0) pts.push_back(w);
        }
    }
    // ring just outside the excluded disk |z - r_n| = delta^2
    for (int j = 0; j < 4 * n_angles; ++j) {
        double phi = 2 * kPi * j / (4 * n_angles);
        pts.push_back(d - d * d * (1 + 1e-6) * std::polar(1.0, phi));
    }
    // angular sweep at |1 - z| = delta_n, resolving the sectors of opening pi/lam'
    int m = std::min(20000, std::max(n_angles, static_cast<int>(8 * b.lam_prime)));
    for (int j = 0; j < m; ++j) {
        double psi = -kPi / 2 + kPi * (j + 0.5) / m;
        cplx w = std::polar(d, psi);
        if (one_minus_abs(w) > 0) pts.push_back(w);
    }
    return pts;
}

BlockReport verify_majorants(const BuildingBlock& b, const MinorantResult& r, const std::vector<cplx>& gap_points,
                             double min_depth) {
    BlockReport rep;
    rep.lemma = "majorants";
    rep.block = b;
    rep.below_regime = b.x_n < min_depth;
    Tracker ta("a", 1e-12), tb("b", 1e-12), tc("c", 0);
    double log1pg = std::log1p(b.gamma_used);
    double c_theta = 0;
    int below = 0;  // points with theta <= 2 (log theta)^2, outside the lemma's range
    for (cplx w : gap_points) {
        double gap = one_minus_abs(w);
        if (!(gap > 0)) continue;
        double t = -std::log(gap);
        double lam_t = r.lambda(t);
        auto v = block_eval_gap(b, w);
        double lh = v.h.log_magnitude;
        double radius = 1 - gap;
        double scale = depth_scale(lam_t);
        if (!v.h.is_zero()) ta.see((lam_t - lh) / scale, radius);
        double bound = log_theta_minus_square(lam_t);
        bool outside = std::abs(w - b.delta_n) > b.delta_n * b.delta_n;
        if (!std::isfinite(bound)) {
            ++below;
        } else if (outside && v.h.sign > 0) {
            tb.see((bound - lh - log1pg) / scale, radius);
        }
        bool lower_ok = true;
        if (v.h.sign < 0) {
            double m = std::isfinite(bound) ? (bound - lh - log1pg) / scale : -1.0;
            lower_ok = m > 0;
        } else {
            lower_ok = std::isfinite(bound);
        }
        if (!lower_ok) c_theta = std::max(c_theta, radius);
    }
    // lower bound holds for |z| > c_theta on the scanned points
    for (cplx w : gap_points) {
        double gap = one_minus_abs(w);
        if (!(gap > 0) || 1 - gap <= c_theta) continue;
        double lam_t = r.lambda(-std::log(gap));
        auto v = block_eval_gap(b, w);
        double bound = log_theta_minus_square(lam_t);
        double m = v.h.sign < 0 ? (bound - v.h.log_magnitude - log1pg) / depth_scale(lam_t) : 1.0;
        tc.see(m, 1 - gap);
    }
    rep.c_theta = c_theta;
    auto pc = tc.done();
    pc.pass = c_theta < 1;
    rep.checks = {ta.done(), tb.done(), pc};
    auto at_r = block_eval_gap(b, b.delta_n);
    rep.values.emplace_back("log_h_at_r_n_minus_lambda", at_r.h.log_magnitude - r.lambda(b.x_n));
    rep.values.emplace_back("c_theta", c_theta);
    rep.values.emplace_back("points_theta_below_square", below);
    return rep;
}

ConcentrationIntegral concentration_integral(const BuildingBlock& b, const RadialWeight& w, double log_scaled_gamma) {
    double lp = b.lam_prime, L1 = w.Lambda_prime(b.x_n), L2 = w.Lambda_second(b.x_n);
    double d = b.delta_n, lam = b.lam;
    double log_gamma = log_scaled_gamma - lam;
    double gam = std::exp(log_gamma);
    double Ka = L1 + L2 + L1 * L1 - (1 + gam) * (lp + lp * lp);
    double Kb = (1 + gam) * (lp + lp * lp) + L1 * d / b.r_n;
    double Delta = lp - L1;
    // linear coefficient gamma lam' + Delta, assembled in log form
    LogReal Lin = LogReal(log_gamma + std::log(lp), 1) + LogReal::from_double(Delta);
    LogReal g(log_scaled_gamma, 1);
    ConcentrationIntegral ci;
    if (!(Kb > 0)) throw NumericError("concentration_integral: angular curvature is not positive");
    double a_star = Ka > 0 && !Lin.is_zero() ? Lin.to_double() / Ka : 0.0;
    if (Ka > 0 && std::fabs(a_star) < d / 2) {
        ci.method = "laplace";
        ci.peak_offset = a_star;
        LogReal quad = Lin.is_zero() ? LogReal::zero()
                                     : LogReal(lam + 2 * Lin.log_magnitude - std::log(2 * Ka), 1);
        double C = std::log(2.0) + 2 * std::log(d) - lam - 0.5 * (std::log(Ka) + std::log(Kb));
        ci.excess = quad + LogReal::from_double(C);
        ci.log_integral = g + ci.excess;
    } else {
        // radial part stays >= gamma on a half-interval of length delta/2 on the side of the linear term
        ci.method = "edge_bound";
        ci.peak_offset = (Lin.sign >= 0 ? 1 : -1) * d / 4;
        double C = std::log(d * d * d / (2 * kPi)) + 0.5 * std::log(2 * kPi) - 0.5 * (lam + std::log(Kb));
        ci.excess = LogReal::from_double(C);
        ci.log_integral = g + ci.excess;
    }
    return ci;
}

BlockReport verify_block_aux(const BuildingBlock& b, const RadialWeight& w, double epsilon0, double min_depth) {
    BlockReport rep;
    rep.lemma = "block_aux";
    rep.block = b;
    rep.below_regime = b.x_n < min_depth;
    double d = b.delta_n;
    double rho0 = d * std::exp(-1 + 2 / epsilon0);
    double target = -3 * b.x_n;
    Tracker ta("a");
    for (int i = 0; i < 60; ++i) {
        double rho = rho0 * std::pow(2.0 / rho0, i / 59.0);
        if (rho >= 2) rho = 1.999;
        for (int j = 0; j < 64; ++j) {
            double psi = -kPi / 2 + kPi * (j + 0.5) / 64;
            cplx wv = std::polar(rho, psi);
            if (!(std::abs(1.0 - wv) < 1) || !(one_minus_abs(wv) > 0)) continue;
            auto v = block_eval_gap(b, wv);
            ta.see((target - v.h.log_magnitude) / std::fabs(target), rho);
        }
    }
    {
        auto v = block_eval_gap(b, 1.0 + b.r_n);
        ta.see((target - v.h.log_magnitude) / std::fabs(target), 1.0 + b.r_n);
    }

    cplx wit = d * std::polar(1.0, kPi / b.lam_prime);
    auto vw = block_eval_gap(b, wit);
    double gap = one_minus_abs(wit);
    double err = std::fabs(vw.h.log_magnitude - b.lam) / depth_scale(b.lam);
    double mb = std::min({vw.h.sign < 0 ? 1e-9 - err : -1.0, (gap - d / 2) / d, (d - gap) / d});
    auto cb = make_check("b", mb, 1 - gap);

    auto ci = concentration_integral(b, w, b.log_gamma_n + b.lam);
    double mc = ci.log_integral.sign >= 0 ? 1.0 : -1.0;
    if (ci.log_integral.is_zero()) mc = 0;
    auto cc = make_check("c", mc, b.r_n);
    rep.checks = {ta.done(), cb, cc};
    rep.values.emplace_back("witness_one_minus_abs", gap);
    rep.values.emplace_back("log_abs_log_integral", ci.log_integral.log_magnitude);
    rep.values.emplace_back("log_integral_sign", ci.log_integral.sign);
    return rep;
}

BlockReport verify_theta_regularity(const MinorantResult& r, const std::vector<double>& s_grid) {
    BlockReport rep;
    rep.lemma = "theta_regularity";
    Tracker tr("regularity");
    int skipped = 0;
    for (double s : s_grid) {
        double t = -std::log(s);
        double lam = r.lambda(t);
        double eps = std::exp(-2 * lam) / s;  // relative perturbation of s
        if (!(eps < 1)) {
            ++skipped;
            continue;
        }
        double dt = -std::log1p(-eps);
        double dl = dt == 0 ? 0.0 : lambda_increment(r, t, dt);
        double allowed = std::log1p(std::exp(-lam));
        tr.see((allowed - dl) / std::max(allowed, 1e-300), s);
    }
    rep.checks = {tr.done()};
    rep.values.emplace_back("skipped", skipped);
    return rep;
}

BlockReport pair_estimates(const BuildingBlock& b, const MinorantResult& r, cplx z, cplx dz) {
    if (!(std::abs(z) < 1)) throw UsageError("pair_estimates: |z| must be < 1");
    double gz = 1 - std::abs(z);
    double tz = -std::log(gz);
    double lz = r.lambda(tz);
    double ldz = std::log(std::abs(dz));
    if (!(ldz < -2 * lz)) throw UsageError("pair_estimates: |w - z| must be below theta(1-|z|)^-2");
    cplx w = z + dz;
    double aw = std::abs(w);
    double dabs = (2 * (std::conj(z) * dz).real() + std::norm(dz)) / (aw + std::abs(z));
    double dt = -std::log1p(-dabs / gz);
    double dl = dt == 0 ? 0.0 : lambda_increment(r, tz, dt);
    BlockReport rep;
    rep.lemma = "pair";
    rep.block = b;
    double e41 = dl == 0 ? kNegInf : lz + std::log(std::fabs(std::expm1(dl)));
    rep.checks.push_back(make_check("41", std::isfinite(e41) ? -e41 / depth_scale(lz) : 1.0, std::abs(z)));

    cplx gw = to_gap(w);
    auto vw = block_eval_gap(b, gw);
    double log1pg = std::log1p(b.gamma_used);
    if (lz <= 0.4 * b.lam) {
        double m = vw.h.sign > 0 ? (lz - vw.h.log_magnitude - log1pg) / depth_scale(lz) : 1.0;
        rep.checks.push_back(make_check("case_a", m, std::abs(z)));
    }
    if (lz > b.lam / 3) {
        double lHp = block_derivative_gap(b, gw).log_magnitude;
        LogReal lhs_b = LogReal::from_double(2 * std::fabs(lHp)) + vw.h;
        LogReal rhs_b(std::log(1.5) + lz, 1);
        double mb = lhs_b.sign <= 0 ? 1.0 : (rhs_b.log_magnitude - lhs_b.log_magnitude) / depth_scale(lz);
        rep.checks.push_back(make_check("case_b", mb, std::abs(z)));
        if (std::fabs(std::arg(to_gap(z))) > kPi / (2 * b.lam_prime)) {
            LogReal lhs_c = LogReal::from_double(2 * lHp) + vw.h;
            LogReal rhs_c(lz - log1pg, 1);
            double mc = lhs_c.sign <= 0 ? 1.0 : (rhs_c.log_magnitude - lhs_c.log_magnitude) / depth_scale(lz);
            rep.checks.push_back(make_check("case_c", mc, std::abs(z)));
        }
    }
    rep.values.emplace_back("lambda_t", lz);
    rep.values.emplace_back("delta_lambda", dl);
    return rep;
}

BlockReport ratio_estimates(const BuildingBlock& b, const MinorantResult& r, cplx z, cplx dxi) {
    if (!(std::abs(z) < 1)) throw UsageError("ratio_estimates: |z| must be < 1");
    double tz = -std::log(1 - std::abs(z));
    double lz = r.lambda(tz);
    if (!(std::log(std::abs(dxi)) < -3 * lz)) throw UsageError("ratio_estimates: |xi - z| must be below theta(1-|z|)^-3");
    cplx gz = to_gap(z), gx = to_gap(z + dxi);
    auto vz = block_eval_gap(b, gz);
    auto vx = block_eval_gap(b, gx);
    LogReal half(std::log(0.5), 1);
    LogReal dh = (vx.h - vz.h) * half;
    LogReal rhs = LogReal(lz - std::log1p(b.gamma_used), 1) - LogReal::from_double(lz);
    auto margin = [&](const LogReal& lhs) {
        LogReal diff = rhs - lhs;
        if (diff.is_zero()) return 0.0;
        double scale = std::max(rhs.log_magnitude, 0.0);
        return diff.sign * std::exp(std::min(diff.log_magnitude - scale, 0.0));
    };
    double lHp = block_derivative_gap(b, gx).log_magnitude;
    LogReal lhs_d = LogReal::from_double(lHp - std::log(2.0)) + dh;
    BlockReport rep;
    rep.lemma = "ratio";
    rep.block = b;
    rep.checks.push_back(make_check("derivative_ratio", margin(lhs_d), std::abs(z)));
    rep.checks.push_back(make_check("value_ratio", margin(dh), std::abs(z)));
    rep.values.emplace_back("lambda_t", lz);
    return rep;
}

}  // namespace berglab
