#include "berglab/construct.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <random>

#include "checks.hpp"

namespace berglab {

using namespace detail;

namespace {

constexpr double kDropLog = -800;

double node_angle(int k, int N) { return 2 * kPi * k / N; }

// 1 - z conj(zeta_k) for z = anchor (1 - gap)
cplx node_gap(const DiskPoint& p, double phi_k) {
    double d = std::arg(p.anchor) - phi_k;
    cplx rot = std::polar(1.0, d);
    cplx one_minus_rot = cplx(0, -2 * std::sin(d / 2)) * std::polar(1.0, d / 2);
    return one_minus_rot + rot * p.gap;
}

// candidate node indices whose block can exceed e^{kDropLog} at p
template <class F>
void for_nodes_near(const ConstructLevel& lv, const DiskPoint& p, double log_radius, F&& visit) {
    int N = lv.lattice.N;
    double s = p.one_minus_abs();
    double R = log_radius > 1 ? 3.0 : std::exp(log_radius);
    if (R >= 2) {
        for (int k = 0; k < N; ++k) visit(k);
        return;
    }
    if (s >= R) return;
    double rz = 1 - s;
    double q = rz > 0 ? (R * R - s * s) / (4 * rz) : 2.0;
    if (q >= 1) {
        for (int k = 0; k < N; ++k) visit(k);
        return;
    }
    double hw = 2 * std::asin(std::sqrt(q));
    double th = std::arg(p.anchor) + std::arg(1.0 - p.gap);
    long lo = static_cast<long>(std::ceil((th - hw) * N / (2 * kPi))) - 1;
    long hi = static_cast<long>(std::floor((th + hw) * N / (2 * kPi))) + 1;
    if (hi - lo + 1 >= N) {
        for (int k = 0; k < N; ++k) visit(k);
        return;
    }
    for (long j = lo; j <= hi; ++j) visit(static_cast<int>(((j % N) + N) % N));
}

double drop_log_radius(const BuildingBlock& b) { return (b.lam - kDropLog) / b.lam_prime - b.x_n; }

LogReal scale_by_one_plus_gamma(const LogReal& v, double log_gamma) {
    if (v.is_zero() || !std::isfinite(log_gamma)) return v;
    return v + LogReal(v.log_magnitude + log_gamma, v.sign);
}

void add_level(const ConstructLevel& lv, const DiskPoint& p, int skip_k, WValue& acc) {
    double phi_scale = 2 * kPi / lv.lattice.N;
    for_nodes_near(lv, p, drop_log_radius(lv.block), [&](int k) {
        if (k == skip_k || !lv.active(k)) return;
        cplx g = node_gap(p, phi_scale * k);
        auto v = block_eval_gap(lv.block, g);
        if (v.H.log_magnitude < kDropLog) return;
        double lg = lv.gammas[k].log_gamma;
        acc.re = acc.re + scale_by_one_plus_gamma(v.h, lg);
        acc.im = acc.im + scale_by_one_plus_gamma(v.H.imag_part(), lg);
    });
}

LogReal total_of(const std::vector<LogReal>& t) { return t.empty() ? LogReal::zero() : log_sum_exp(t); }

int level_count(const ConstructionState& s, int upto) {
    int L = static_cast<int>(s.levels.size());
    return upto < 0 ? L : std::min(upto, L);
}

}  // namespace

const char* status_name(GammaStatus s) {
    switch (s) {
        case GammaStatus::Solved: return "solved";
        case GammaStatus::ClampedLow: return "clamped_low";
        case GammaStatus::ClampedHigh: return "clamped_high";
        case GammaStatus::Omitted: return "omitted";
        case GammaStatus::Singular: return "singular";
    }
    return "?";
}

bool ConstructLevel::active(int k) const {
    auto st = gammas[k].status;
    return st == GammaStatus::Solved || st == GammaStatus::ClampedHigh || st == GammaStatus::ClampedLow;
}

int ConstructLevel::count(GammaStatus s) const {
    return static_cast<int>(std::count_if(gammas.begin(), gammas.end(), [&](auto& g) { return g.status == s; }));
}

WValue eval_W(const ConstructionState& s, const DiskPoint& p, int upto) {
    WValue acc;
    for (int i = 0; i < level_count(s, upto); ++i) add_level(s.levels[i], p, -1, acc);
    return acc;
}

WValue eval_W_except(const ConstructionState& s, const DiskPoint& p, int n_index, int k) {
    WValue acc;
    for (int i = 0; i < level_count(s, -1); ++i) add_level(s.levels[i], p, i == n_index ? k : -1, acc);
    return acc;
}

WValue eval_W_direct(const ConstructionState& s, cplx z, int upto) {
    if (!(std::abs(z) < 1)) throw UsageError("eval_W_direct: |z| must be < 1");
    WValue acc;
    for (int i = 0; i < level_count(s, upto); ++i) {
        auto& lv = s.levels[i];
        for (int k = 0; k < lv.lattice.N; ++k) {
            if (!lv.active(k)) continue;
            auto v = block_eval(lv.block, z * std::polar(1.0, -node_angle(k, lv.lattice.N)));
            double lg = lv.gammas[k].log_gamma;
            acc.re = acc.re + scale_by_one_plus_gamma(v.h, lg);
            acc.im = acc.im + scale_by_one_plus_gamma(v.H.imag_part(), lg);
        }
    }
    return acc;
}

LogComplex eval_W_prime(const ConstructionState& s, const DiskPoint& p, int upto) {
    LogComplex acc;
    for (int i = 0; i < level_count(s, upto); ++i) {
        auto& lv = s.levels[i];
        double phi_scale = 2 * kPi / lv.lattice.N;
        for_nodes_near(lv, p, drop_log_radius(lv.block), [&](int k) {
            if (!lv.active(k)) return;
            cplx g = node_gap(p, phi_scale * k);
            auto d = block_derivative_gap(lv.block, g);
            double lg = lv.gammas[k].log_gamma;
            double l1 = std::isfinite(lg) ? std::log1p(std::exp(lg)) : 0.0;
            acc = acc + LogComplex(d.log_magnitude + l1, d.phase - phi_scale * k);
        });
    }
    return acc;
}

LogComplex eval_F(const ConstructionState& s, cplx z) {
    if (!(std::abs(z) < 1)) throw UsageError("eval_F: |z| must be < 1");
    auto w = eval_W(s, DiskPoint::at(z));
    double re = w.re.to_double(), im = w.im.to_double();
    return LogComplex(re, std::isfinite(im) && std::fabs(im) < 1e15 ? im : 0.0);
}

bool in_patch(const ConstructionState& s, const DiskPoint& p, int upto) {
    for (int i = 0; i < level_count(s, upto); ++i) {
        auto& lv = s.levels[i];
        double rho = lv.block.delta_n * std::exp(2 / s.epsilon0);
        bool hit = false;
        for_nodes_near(lv, p, std::log(rho), [&](int k) {
            if (!hit && std::abs(node_gap(p, node_angle(k, lv.lattice.N))) < rho) hit = true;
        });
        if (hit) return true;
    }
    return false;
}

double select_eta(const std::function<LogReal(const DiskPoint&)>& V,
                  const std::function<bool(const DiskPoint&)>& excluded, int net_radial, int net_angular) {
    if (net_radial < 2 || net_angular < 8) throw UsageError("select_eta: net too coarse");
    auto point = [&](double rho, double phi) { return DiskPoint{std::polar(1.0, phi), cplx(1 - rho, 0)}; };
    int R = net_radial, A = net_angular;
    std::vector<double> val((R + 1) * A, std::nan(""));
    double sup = 0, lip = 0;
    for (int i = 0; i <= R; ++i)
        for (int j = 0; j < A; ++j) {
            auto p = point(static_cast<double>(i) / R, 2 * kPi * j / A);
            if (excluded(p)) continue;
            double v = V(p).to_double();
            val[i * A + j] = v;
            sup = std::max(sup, std::fabs(v));
        }
    auto pair_lip = [&](double r1, double p1, double v1, double r2, double p2, double v2) {
        for (int it = 0; std::fabs(v1 - v2) >= 1 && it < 50; ++it) {
            double rm = (r1 + r2) / 2, pm = (p1 + p2) / 2;
            auto p = point(rm, pm);
            if (excluded(p)) return;
            double vm = V(p).to_double();
            if (std::fabs(vm - v1) >= std::fabs(v2 - vm))
                r2 = rm, p2 = pm, v2 = vm;
            else
                r1 = rm, p1 = pm, v1 = vm;
        }
        double dist = std::abs(std::polar(r1, p1) - std::polar(r2, p2));
        if (std::fabs(v1 - v2) >= 1) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "select_eta: V jumps by %.3g near |z| = %.6g", std::fabs(v1 - v2), r1);
            throw NumericError(buf);
        }
        if (dist > 0) lip = std::max(lip, std::fabs(v1 - v2) / dist);
    };
    for (int i = 0; i <= R; ++i)
        for (int j = 0; j < A; ++j) {
            double v = val[i * A + j];
            if (std::isnan(v)) continue;
            double r = static_cast<double>(i) / R, phi = 2 * kPi * j / A;
            double vr = i < R ? val[(i + 1) * A + j] : std::nan("");
            double va = val[i * A + (j + 1) % A];
            if (!std::isnan(vr)) pair_lip(r, phi, v, r + 1.0 / R, phi, vr);
            if (!std::isnan(va) && i > 0) pair_lip(r, phi, v, r, phi + 2 * kPi / A, va);
        }
    if (!std::isfinite(sup) || !std::isfinite(lip)) throw NumericError("select_eta: V not finite on the net");
    double need = std::max(lip > 0 ? std::log2(lip) : -1.0, sup / std::log(2.0));
    int j = std::max(1, static_cast<int>(std::floor(need)) + 1);
    if (j > 1074) throw NumericError("select_eta: no eta in the dyadic ladder works (state too wild)");
    return std::ldexp(1.0, -j);
}

DepthChoice select_next_x(const MinorantResult& m, double eta, double kappa, int n, double floor) {
    if (!(eta > 0 && eta < 1) || !(kappa > 0 && kappa < 1)) throw UsageError("select_next_x: need eta, kappa in (0,1)");
    DepthChoice c;
    c.bound_eq32 = -std::log(eta * kappa) + 2 * n;
    c.floor = floor;
    c.bound_by = c.bound_eq32 >= floor ? "eq32" : "schedule";
    for (double t : m.touch_points) {
        if (t > c.bound_eq32 && t >= floor - 1e-9) {
            c.x = t;
            return c;
        }
    }
    char buf[200];
    std::snprintf(buf, sizeof buf, "select_next_x: no touch point beyond x = %.6g (largest x = %.6g); increase x_max",
                  std::max(c.bound_eq32, floor), m.x_max);
    throw UsageError(buf);
}

LogReal solution_log_integral(const BuildingBlock& b, const RadialWeight& w, const GammaSolution& g) {
    LogReal sc = g.scaled();
    auto ci = concentration_integral(b, w, sc.sign > 0 ? sc.log_magnitude : kNegInf);
    if (g.scaled_base.is_zero()) return ci.log_integral;
    return g.scaled_base + LogReal::from_double(g.scaled_offset + ci.excess.to_double());
}

GammaSolution solve_gamma(const BuildingBlock& b, const RadialWeight& w, const LogReal& log_target, double tol) {
    GammaSolution sol;
    sol.log_target = log_target;
    auto gap = [&](const LogReal& a, const LogReal& c) { return (a - c).to_double(); };
    auto clamp = [&](GammaStatus st, const LogReal& base, const LogReal& li) {
        sol.scaled_base = base;
        sol.log_gamma = base.is_zero() ? kNegInf : base.log_magnitude - b.lam;
        sol.log_integral = li;
        double d = std::fabs(gap(li, log_target));
        sol.residual = std::isfinite(d) ? std::expm1(d) : std::numeric_limits<double>::infinity();
        sol.status = sol.residual <= tol ? GammaStatus::Solved : st;
        return sol;
    };
    LogReal top(b.log_gamma_n + b.lam, 1);
    LogReal i0 = concentration_integral(b, w, kNegInf).log_integral;
    LogReal ih = concentration_integral(b, w, top.log_magnitude).log_integral;
    if (log_target <= i0) return clamp(GammaStatus::ClampedLow, LogReal::zero(), i0);
    if (ih <= log_target) return clamp(GammaStatus::ClampedHigh, top, ih);

    bool big = log_target.sign > 0 && log_target.log_magnitude > std::log(1e9);
    if (big) sol.scaled_base = log_target;
    double dbase = big ? 0.0 : -log_target.to_double();
    double top_off = big ? kInf : std::min(top.to_double(), 1e300);
    auto F = [&](double off) {
        LogReal g = sol.scaled_base + LogReal::from_double(off);
        auto ci = concentration_integral(b, w, g.sign > 0 ? g.log_magnitude : kNegInf);
        double f = (LogReal::from_double(dbase + off) + ci.excess).to_double();
        return std::isnan(f) ? kInf : f;
    };
    double lo, hi;
    if (big) {
        double e0 = -F(0.0);
        double r = std::fabs(e0) + 1;
        lo = e0 - r, hi = e0 + r;
        for (int i = 0; i < 60 && !(F(lo) < 0 && F(hi) > 0); ++i) lo -= r, hi += r, r *= 2;
    } else {
        lo = 0;
        hi = std::min(top_off, std::max(1.0, 2 * (std::fabs(dbase) + std::fabs(i0.to_double()))));
        while (F(hi) < 0 && hi < top_off) hi = std::min(top_off, 2 * hi);
    }
    double flo = F(lo), fhi = F(hi);
    if (!(flo <= 0 && fhi >= 0) || !std::isfinite(lo) || !std::isfinite(hi))
        throw NumericError("solve_gamma: bracket failure (gamma theta beyond double resolution)");
    double best = std::fabs(flo) < std::fabs(fhi) ? lo : hi, fbest = std::min(std::fabs(flo), std::fabs(fhi));
    for (int it = 0; it < 400 && fbest > tol; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        double f = F(mid);
        if (std::fabs(f) < fbest) fbest = std::fabs(f), best = mid;
        (f < 0 ? lo : hi) = mid;
    }
    sol.scaled_offset = best;
    LogReal g = sol.scaled();
    sol.log_gamma = g.sign > 0 ? g.log_magnitude - b.lam : kNegInf;
    sol.status = GammaStatus::Solved;
    sol.log_integral = solution_log_integral(b, w, sol);
    sol.residual = std::expm1(fbest);
    return sol;
}

ConstructionState init_state(const RadialWeight& w, const ConstructConfig& cfg) {
    if (w.family() == WeightFamily::Unit) throw UsageError("construction: the unit weight has no building blocks");
    if (!(cfg.grid_step > 0) || !(cfg.x_max > cfg.grid_step)) throw UsageError("construction: bad minorant grid");
    ConstructionState s;
    s.weight = w;
    s.config = cfg;
    s.epsilon0 = cfg.epsilon0;
    s.kappa = cfg.effective_kappa();
    if (!(s.kappa > 0 && s.kappa < 1)) throw UsageError("construction: kappa must lie in (0,1)");
    std::vector<double> x, Q;
    int n = static_cast<int>(std::llround(cfg.x_max / cfg.grid_step));
    for (int i = 0; i <= n; ++i) {
        x.push_back(i * cfg.grid_step);
        Q.push_back(std::sqrt(w.Lambda(x.back())));
    }
    s.minorant = regularize(x, Q, cfg.epsilon0);
    return s;
}

void extend_state(ConstructionState& s, double floor) {
    int n = static_cast<int>(s.levels.size()) + 1;
    const auto& cfg = s.config;
    if (!(floor > 0)) {
        if (static_cast<int>(cfg.x_floor.size()) >= n)
            floor = cfg.x_floor[n - 1];
        else if (n == 1)
            floor = cfg.x1;
        else {
            double xp = s.levels.back().block.x_n;
            floor = std::max(2 * xp, xp + cfg.log_spacing);
        }
    }
    double eta = select_eta([&](const DiskPoint& p) { return eval_W(s, p).re; },
                            [&](const DiskPoint& p) { return in_patch(s, p); }, cfg.eta_net_radial,
                            cfg.eta_net_angular);
    auto dc = select_next_x(s.minorant, eta, s.kappa, n, floor);
    ConstructLevel lv;
    lv.n = n;
    lv.eta = eta;
    lv.tau = 1;
    lv.x_bound_eq32 = dc.bound_eq32;
    lv.x_floor = dc.floor;
    lv.bound_by = dc.bound_by;
    lv.block = block_at_touch(s.minorant, s.weight, dc.x);
    lv.lattice = build_level_depth(s.kappa, dc.x, LevelRule::centers(), n);
    int N = lv.lattice.N;
    LogReal log_norm = LogReal::from_double(-std::log(static_cast<double>(n) * n * N));
    std::map<std::pair<int, double>, GammaSolution> memo;
    lv.gammas.resize(N);
    for (int k = 0; k < N; ++k) {
        DiskPoint p{std::polar(1.0, node_angle(k, N)), 0.0};
        LogReal v;
        try {
            v = eval_W(s, p).re;
        } catch (const NumericError&) {
            lv.gammas[k].status = GammaStatus::Singular;
            lv.gammas[k].residual = std::numeric_limits<double>::infinity();
            continue;
        }
        auto key = std::make_pair(v.sign, v.log_magnitude);
        auto it = memo.find(key);
        if (it == memo.end()) {
            GammaSolution g;
            try {
                g = solve_gamma(lv.block, s.weight, -v + log_norm, cfg.gamma_tol);
            } catch (const NumericError&) {
                g.log_target = -v + log_norm;
                g.scaled_base = LogReal(lv.block.log_gamma_n + lv.block.lam, 1);
                g.log_gamma = lv.block.log_gamma_n;
                g.status = GammaStatus::ClampedHigh;
                g.residual = kInf;
            }
            it = memo.emplace(key, g).first;
        }
        lv.gammas[k] = it->second;
        if (lv.gammas[k].status == GammaStatus::ClampedLow) lv.gammas[k].status = GammaStatus::Omitted;
    }
    s.levels.push_back(std::move(lv));
}

ConstructionState build_construction(const RadialWeight& w, const ConstructConfig& cfg) {
    if (cfg.levels < 1) throw UsageError("construction: need at least one level");
    auto s = init_state(w, cfg);
    for (int i = 0; i < cfg.levels; ++i) extend_state(s);
    return s;
}

namespace {

WValue level_W(const ConstructLevel& lv, const DiskPoint& p) {
    WValue acc;
    add_level(lv, p, -1, acc);
    return acc;
}

DiskPoint center_point(const ConstructLevel& lv, int k) {
    return {std::polar(1.0, node_angle(k, lv.lattice.N)), cplx(lv.block.delta_n, 0)};
}

double patch_radius(const ConstructionState& s, const ConstructLevel& lv) {
    return lv.block.delta_n * std::exp(2 / s.epsilon0);
}

double clamp_finite(double v) { return std::isfinite(v) ? v : (v > 0 ? 1e300 : -1e300); }

// up to m indices spread evenly over the active nodes
std::vector<int> spread_active(const ConstructLevel& lv, std::size_t m) {
    std::vector<int> act;
    for (int k = 0; k < lv.lattice.N; ++k)
        if (lv.active(k)) act.push_back(k);
    if (act.size() <= m) return act;
    std::vector<int> out;
    for (std::size_t i = 0; i < m; ++i) out.push_back(act[i * act.size() / m]);
    return out;
}

// integral of exp(E) over {delta^2 <= |z - w_{n,k}| < patch radius} (or from t_min), E evaluated by `exponent`
LogReal patch_integral(const ConstructionState& s, const ConstructLevel& lv, int k, double t_min,
                       const std::function<double(const DiskPoint&, double)>& exponent) {
    double d = lv.block.delta_n, t_max = patch_radius(s, lv);
    constexpr int cells = 64, ang = 64;
    auto gl = gauss_legendre(4);
    double a = std::log(t_min), b = std::log(t_max), h = (b - a) / cells;
    cplx anchor = std::polar(1.0, node_angle(k, lv.lattice.N));
    std::vector<LogReal> terms;
    for (int c = 0; c < cells; ++c)
        for (int q = 0; q < 4; ++q) {
            double lt = a + h * (c + 0.5 + 0.5 * gl.x[q]);
            double t = std::exp(lt);
            double lw = std::log(0.5 * h * gl.w[q]) + 2 * lt + std::log(2.0 / ang);
            for (int j = 0; j < ang; ++j) {
                DiskPoint p{anchor, d + std::polar(t, 2 * kPi * (j + 0.5) / ang)};
                double sgap = p.one_minus_abs();
                if (!(sgap > 0)) continue;
                double e = exponent(p, sgap);
                if (e == kNegInf) continue;
                terms.emplace_back(e + lw, 1);
            }
        }
    return total_of(terms);
}

double a1_exponent(const ConstructionState& s, const DiskPoint& p, double sgap) {
    return clamp_finite((eval_W(s, p).re - theta_big(s.weight, sgap)).to_double());
}

double a2_exponent(const ConstructionState& s, const DiskPoint& p, double sgap) {
    return clamp_finite((-eval_W(s, p).re - tilde_log_inverse_gap(s.weight, sgap)).to_double());
}

}  // namespace

BlockReport verify_level_increment(const ConstructionState& s, int n_index) {
    if (n_index < 0 || n_index + 1 >= static_cast<int>(s.levels.size()))
        throw UsageError("verify_level_increment: need a following level");
    auto& lv = s.levels[n_index];
    auto& nx = s.levels[n_index + 1];
    BlockReport rep;
    rep.lemma = "level_increment";
    rep.block = nx.block;
    double d = lv.block.delta_n, rho = patch_radius(s, lv);
    int M = std::max(4096, 4 * nx.lattice.N);
    double sup = 0, where = 0;
    for (int j = 0; j < M; ++j) {
        double phi = 2 * kPi * j / M;
        double u = std::fabs(clamp_finite(level_W(nx, DiskPoint{std::polar(1.0, phi), cplx(rho, 0)}).re.to_double()));
        if (u > sup) sup = u, where = phi;
    }
    double C = sup / d;
    auto disjoint = [&](const ConstructLevel& l) {
        double sp = std::sin(kPi / l.lattice.N), pr = patch_radius(s, l);
        return (sp - pr) / sp;
    };
    rep.checks = {make_check("increment", 1 - C, where), make_check("patches_disjoint", std::min(disjoint(lv), disjoint(nx)), 0)};
    rep.values = {{"C", C}, {"tau", nx.tau}, {"circle_points", M}};
    return rep;
}

DiskMass disk_mass(const ConstructionState& s, int n_index, int k) {
    auto& lv = s.levels.at(n_index);
    if (k < 0 || k >= lv.lattice.N) throw UsageError("disk_mass: node index out of range");
    DiskMass m;
    m.n = lv.n;
    m.k = k;
    auto p = center_point(lv, k);
    LogReal rest = eval_W_except(s, p, n_index, k).re;
    double lr;
    if (lv.active(k)) {
        lr = (rest + solution_log_integral(lv.block, s.weight, lv.gammas[k])).to_double();
    } else {
        lr = (rest - theta_big(s.weight, lv.block.delta_n)).to_double() + 4 * std::log(lv.block.delta_n);
    }
    lr = clamp_finite(lr);
    m.mass = LogReal(lr, 1);
    m.log_ratio = lr + std::log(static_cast<double>(lv.n) * lv.n * lv.lattice.N);
    return m;
}

BlockReport verify_concentration(const ConstructionState& s, int n_index) {
    auto& lv = s.levels.at(n_index);
    BlockReport rep;
    rep.lemma = "concentration";
    rep.block = lv.block;
    double worst = 0, worst_active = 0, where = 0, max_res = 0, res_at = 0;
    int active_outside = 0;
    std::vector<LogReal> masses;
    for (int k = 0; k < lv.lattice.N; ++k) {
        auto m = disk_mass(s, n_index, k);
        masses.push_back(m.mass);
        double a = std::fabs(m.log_ratio);
        if (a > worst) worst = a, where = k;
        if (lv.active(k)) {
            worst_active = std::max(worst_active, a);
            if (a > std::log(10.0)) ++active_outside;
        }
        double r = lv.gammas[k].residual;
        if (!(r <= max_res)) max_res = r, res_at = k;
    }
    double ablation = 0;
    for (auto& g : lv.gammas) {
        if (g.status != GammaStatus::Solved || !std::isfinite(g.log_gamma)) continue;
        auto i0 = concentration_integral(lv.block, s.weight, kNegInf).log_integral;
        ablation = std::max(ablation, std::fabs((g.log_integral - i0).to_double()));
    }
    double tol = 1e-6;
    rep.checks = {
        make_check("c_le_10", std::log(10.0) - worst, where),
        make_check("eq33", clamp_finite((tol - max_res) / tol), res_at),
        make_check("ablation", ablation - tol, 0),
    };
    rep.values = {{"c", std::exp(std::min(worst, 700.0))},
                  {"log_c", worst},
                  {"log_c_active", worst_active},
                  {"max_residual", clamp_finite(max_res)},
                  {"log_level_mass", total_of(masses).log_magnitude},
                  {"ablation_log_gap", ablation},
                  {"active_outside_c", active_outside},
                  {"solved", lv.count(GammaStatus::Solved)},
                  {"clamped_high", lv.count(GammaStatus::ClampedHigh)},
                  {"omitted", lv.count(GammaStatus::Omitted)},
                  {"singular", lv.count(GammaStatus::Singular)}};
    return rep;
}

std::vector<DecayPoint> find_decay_points(const ConstructionState& s) {
    std::vector<DecayPoint> out;
    for (auto& lv : s.levels) {
        DecayPoint best;
        best.n = lv.n;
        double d = lv.block.delta_n;
        LogReal th = theta_small(s.minorant, d);
        best.threshold = LogReal(th.log_magnitude - std::log(2.0), -1);
        LogReal strict(th.log_magnitude + std::log(2.0 / 3), -1);
        for (int k : spread_active(lv, 256)) {
            for (int sg : {1, -1}) {
                DiskPoint p{std::polar(1.0, node_angle(k, lv.lattice.N)), d * std::polar(1.0, sg * kPi / lv.block.lam_prime)};
                double oma = p.one_minus_abs();
                if (!(oma > d / 2 && oma < d)) continue;
                LogReal v;
                try {
                    v = eval_W(s, p).re;
                } catch (const NumericError&) {
                    continue;
                }
                if (!(v < strict) || !(v <= best.threshold)) continue;
                if (!best.found || v < best.log_abs_F) {
                    best.found = true;
                    best.xi = p.z();
                    best.one_minus_abs = oma;
                    best.log_abs_F = v;
                }
            }
        }
        out.push_back(best);
    }
    return out;
}

BlockReport verify_norm_integrals(const ConstructionState& s) {
    BlockReport rep;
    rep.lemma = "norm_integrals";
    if (s.levels.empty()) throw UsageError("verify_norm_integrals: empty state");
    rep.block = s.levels.front().block;
    Tracker trend("a1_trend"), dec("a1_decreasing"), a2("a2_trend");
    std::vector<LogReal> total;
    double prev = kInf;
    for (int i = 0; i < static_cast<int>(s.levels.size()); ++i) {
        auto& lv = s.levels[i];
        int N = lv.lattice.N;
        std::vector<LogReal> dm;
        for (int k = 0; k < N; ++k) dm.push_back(disk_mass(s, i, k).mass);
        LogReal inside = total_of(dm);
        auto sample = spread_active(lv, 32);
        std::vector<LogReal> outs, a2s;
        double d = lv.block.delta_n;
        for (int k : sample) {
            outs.push_back(patch_integral(s, lv, k, d * d,
                                          [&](const DiskPoint& p, double g) { return a1_exponent(s, p, g); }));
            a2s.push_back(patch_integral(s, lv, k, d * d * d,
                                         [&](const DiskPoint& p, double g) { return a2_exponent(s, p, g); }));
        }
        double scale = sample.empty() ? 0 : std::log(static_cast<double>(N) / sample.size());
        LogReal outside(total_of(outs).log_magnitude + scale, 1);
        LogReal shell = inside + outside;
        double ls = shell.log_magnitude;
        double l2 = std::log(static_cast<double>(lv.n) * lv.n);
        trend.see(std::log(10.0) - std::fabs(ls + l2), lv.n);
        double sh = shell.to_double();
        if (std::isfinite(prev)) dec.see((prev - sh) / prev, lv.n);
        prev = sh;
        double la2 = total_of(a2s).log_magnitude + scale;
        a2.see(std::log(10.0) - l2 - la2, lv.n);
        total.push_back(shell);
        std::string tag = "level" + std::to_string(lv.n);
        rep.values.emplace_back(tag + "_shell", sh);
        rep.values.emplace_back(tag + "_disk_sum", inside.to_double());
        rep.values.emplace_back(tag + "_outside_disks", outside.to_double());
        rep.values.emplace_back(tag + "_n2_shell", sh * lv.n * lv.n);
        rep.values.emplace_back(tag + "_a2_log_shell", la2);
    }
    DiskMesh mesh;
    mesh.floor = 1e-6;
    LogReal bg = disk_integral_polar(
        [&](double, double gap, double phi) {
            DiskPoint p{std::polar(1.0, phi), cplx(gap, 0)};
            if (in_patch(s, p)) return LogReal::zero();
            return LogReal(a1_exponent(s, p, gap), 1);
        },
        mesh);
    double bgv = bg.to_double();
    total.push_back(bg);
    double a1 = total_of(total).to_double();
    rep.values.emplace_back("background", bgv);
    rep.values.emplace_back("a1_total", a1);
    rep.checks = {trend.done(), dec.done(), a2.done(), make_check("a1_finite", std::isfinite(a1) ? 1.0 : -1.0, 0)};
    return rep;
}

PairState build_interleaved_pair(const RadialWeight& w, const ConstructConfig& cfg, double offset) {
    if (!(offset > 0)) throw UsageError("build_interleaved_pair: offset must be positive");
    auto xs = cfg.x_floor.empty() ? depth_schedule(cfg.x1, cfg.levels, cfg.log_spacing) : cfg.x_floor;
    if (static_cast<int>(xs.size()) < cfg.levels) throw UsageError("build_interleaved_pair: schedule too short");
    xs.resize(cfg.levels);
    auto ys = xs;
    for (auto& y : ys) y += offset;
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (!(xs[i] < ys[i] && (i + 1 == xs.size() || ys[i] < xs[i + 1])))
            throw UsageError("build_interleaved_pair: schedules are not interleaved");
    PairState p;
    auto c1 = cfg, c2 = cfg;
    c1.x_floor = xs;
    c2.x_floor = ys;
    p.first = build_construction(w, c1);
    p.second = build_construction(w, c2);
    return p;
}

BlockReport verify_pair(const PairState& p) {
    BlockReport rep;
    rep.lemma = "pair";
    const ConstructionState* fam[2] = {&p.first, &p.second};
    if (p.first.levels.empty() || p.first.levels.size() != p.second.levels.size())
        throw UsageError("verify_pair: families must have equal positive depth");
    rep.block = p.first.levels.front().block;
    double order = kInf;
    std::vector<double> r;
    for (std::size_t i = 0; i < p.first.levels.size(); ++i) {
        r.push_back(p.first.levels[i].block.x_n);
        r.push_back(p.second.levels[i].block.x_n);
    }
    for (std::size_t i = 0; i + 1 < r.size(); ++i) order = std::min(order, r[i + 1] - r[i]);
    rep.checks.push_back(make_check("interleaved", order, 0));
    for (int j = 0; j < 2; ++j) {
        auto& s = *fam[j];
        double worst = 0;
        for (int i = 0; i < static_cast<int>(s.levels.size()); ++i) {
            auto c = verify_concentration(s, i);
            worst = std::max(worst, c.values[1].second);
        }
        std::string tag = "f" + std::to_string(j + 1);
        rep.checks.push_back(make_check("42a_" + tag, std::log(10.0) - worst, 0));
        rep.values.emplace_back("log_c_" + tag, worst);
    }
    for (int j = 0; j < 2; ++j) {
        auto& s = *fam[j];
        auto& o = *fam[1 - j];
        Tracker t("42b_f" + std::to_string(j + 1) + "_on_f" + std::to_string(2 - j));
        int count = 0;
        for (auto& lv : o.levels) {
            double d = lv.block.delta_n;
            LogReal th = theta_small(s.minorant, d), inv(-std::log(d), 1);
            for (int k = 0; k < lv.lattice.N; ++k) {
                auto c = center_point(lv, k);
                double v;
                try {
                    v = clamp_finite((eval_W(s, c).re - th + inv).to_double());
                } catch (const NumericError&) {
                    v = 1e300;
                }
                t.see(-v / depth_scale(v), lv.n * 1e7 + k);
                ++count;
            }
        }
        rep.checks.push_back(t.done());
        rep.values.emplace_back("cross_centers_f" + std::to_string(2 - j), count);
    }
    return rep;
}

BlockReport verify_smoothness_functional(const ConstructionState& s, const SmoothnessConfig& cfg) {
    if (s.levels.empty()) throw UsageError("verify_smoothness_functional: empty state");
    BlockReport rep;
    rep.lemma = "smoothness";
    rep.block = s.levels.front().block;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> U(0, 1);
    auto lam_of = [&](double gap) { return s.minorant.lambda(-std::log(gap)); };
    std::vector<std::vector<int>> active;
    for (auto& lv : s.levels) active.push_back(spread_active(lv, static_cast<std::size_t>(lv.lattice.N)));
    Tracker e0("est000"), e1("est001");
    double logM = kNegInf, where_M = 0;
    int direct = 0, derivative = 0;
    for (int i = 0; i < cfg.pairs; ++i) {
        DiskPoint p;
        if (i % 2 == 0) {
            double rad = std::sqrt(U(rng)) * (1 - 1e-9);
            p = DiskPoint::at(std::polar(rad, 2 * kPi * U(rng)));
        } else {
            std::size_t li = (i / 2) % s.levels.size();
            auto& lv = s.levels[li];
            auto& act = active[li];
            int k = act[static_cast<std::size_t>(U(rng) * act.size()) % act.size()];
            double t = lv.block.delta_n * std::exp(2 / s.epsilon0 * (2 * U(rng) - 1));
            p = DiskPoint{std::polar(1.0, node_angle(k, lv.lattice.N)), std::polar(t, kPi * (U(rng) - 0.5))};
        }
        double gz = p.one_minus_abs();
        if (!(gz > 0 && gz <= 1)) continue;
        double lam = lam_of(std::min(gz, 1.0));
        double u = std::max(U(rng), 1e-300);
        double log_dz = -3 * lam + std::log(u);
        double dphi = 2 * kPi * U(rng);
        cplx dz = std::exp(log_dz) * std::polar(1.0, dphi);
        cplx gw = p.gap - dz / p.anchor;
        bool representable = std::abs(dz) > 1e-12 * std::abs(p.gap) && std::abs(dz) > 0;
        double dtheta_log;
        if (representable) {
            double gwv = one_minus_abs(gw);
            if (!(gwv > 0)) continue;
            double dl = lambda_increment(s.minorant, -std::log(gz), std::log(gz) - std::log(gwv));
            dtheta_log = lam + std::log(std::fabs(std::expm1(dl)) + 1e-320);
        } else {
            double x = -std::log(gz);
            double lp = std::max(s.minorant.lambda_prime(x), s.minorant.lambda_prime_left(x));
            dtheta_log = lam + std::log(lp) + log_dz - std::log(gz);
        }
        e0.see(-std::expm1(dtheta_log), gz);
        LogComplex wp;
        try {
            wp = eval_W_prime(s, p);
        } catch (const NumericError&) {
            continue;
        }
        double Q;
        if (wp.log_magnitude + log_dz < std::log(1e-3) || !representable) {
            Q = 2 * (wp.log_magnitude - std::log(2.0));
            ++derivative;
        } else {
            auto a = eval_W(s, p), b = eval_W(s, DiskPoint{p.anchor, gw});
            cplx dw((b.re - a.re).to_double(), (b.im - a.im).to_double());
            dw /= 2.0;
            double lab = dw.real() > 30 ? dw.real() : std::log(std::abs(std::exp(dw) - 1.0));
            Q = 2 * (lab - log_dz);
            ++direct;
        }
        double th = std::exp(std::min(lam, 700.0));
        double cand = Q - 2 * th;
        if (cand > logM) logM = cand, where_M = gz;
    }
    e1.see(std::isfinite(logM) ? 1.0 : -1.0, where_M);
    // off the diagonal neighborhood: direct double sum vs the sixth-power reduction on a coarse grid
    struct Node {
        DiskPoint p;
        cplx z;
        double wgt, lam, logomega, V;
        cplx W;
    };
    std::vector<Node> nodes;
    auto gl = gauss_legendre(4);
    for (int i = 0; i < cfg.coarse_radial; ++i)
        for (int q = 0; q < 4; ++q) {
            double r = (i + 0.5 + 0.5 * gl.x[q]) / cfg.coarse_radial;
            double wr = 0.5 * gl.w[q] / cfg.coarse_radial;
            for (int j = 0; j < cfg.coarse_angular; ++j) {
                double phi = 2 * kPi * (j + 0.5) / cfg.coarse_angular;
                Node n;
                n.p = DiskPoint{std::polar(1.0, phi), cplx(1 - r, 0)};
                n.z = n.p.z();
                n.wgt = 2 * r * wr / cfg.coarse_angular;
                n.lam = lam_of(1 - r);
                n.logomega = -std::exp(s.weight.Lambda(-std::log(1 - r)));
                auto wv = eval_W(s, n.p);
                n.V = clamp_finite(wv.re.to_double());
                n.W = cplx(n.V, clamp_finite(wv.im.to_double()));
                nodes.push_back(n);
            }
        }
    std::vector<LogReal> dterms;
    std::vector<LogReal> A0, B0, A1, B1;
    for (auto& a : nodes) {
        double lw = std::log(a.wgt) + a.logomega;
        double six = 6 * a.lam;
        A0.emplace_back(lw + six, 1);
        B0.emplace_back(lw, 1);
        A1.emplace_back(lw + six - a.V, 1);
        B1.emplace_back(lw + a.V, 1);
        for (auto& b : nodes) {
            double dist = std::abs(a.z - b.z);
            if (dist <= std::exp(-3 * a.lam)) continue;
            cplx dw = (b.W - a.W) / 2.0;
            double lab = dw.real() > 30 ? dw.real() : std::log(std::abs(std::exp(dw) - 1.0));
            if (!std::isfinite(lab)) continue;
            dterms.emplace_back(2 * lab - 2 * std::log(dist) + lw + std::log(b.wgt) + b.logomega, 1);
        }
    }
    double ldirect = total_of(dterms).log_magnitude;
    double lred = std::log(2.0) + (LogReal(total_of(A0).log_magnitude + total_of(B0).log_magnitude, 1) +
                                   LogReal(total_of(A1).log_magnitude + total_of(B1).log_magnitude, 1))
                                      .log_magnitude;
    rep.checks = {e0.done(), e1.done(), make_check("off_diagonal", std::log(10.0) + lred - ldirect, 0)};
    rep.values = {{"log_M", clamp_finite(logM)},   {"pairs", cfg.pairs},          {"derivative_branch", derivative},
                  {"direct_branch", direct},       {"log_direct_off_E", clamp_finite(ldirect)}, {"log_reduction_off_E", lred}};
    return rep;
}

}  // namespace berglab
