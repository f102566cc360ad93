#include "berglab/lattice.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <random>

namespace berglab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_inside(cplx a, const char* what) {
    if (!(std::abs(a) < 1)) throw UsageError(std::string(what) + ": point must lie strictly inside the unit disk");
}

PropertyCheck named(const std::string& name, bool pass, double margin, double where) {
    PropertyCheck c;
    c.name = name;
    c.pass = pass;
    c.margin = margin;
    c.location = where;
    return c;
}

LogComplex factor(cplx a, cplx z) {
    cplx num = z - a, den = 1.0 - std::conj(a) * z;
    if (std::abs(num) == 0) return LogComplex();
    return LogComplex(std::log(std::abs(num)) - std::log(std::abs(den)), std::arg(num) - std::arg(den));
}

std::vector<std::size_t> sampled_indices(std::size_t n, std::size_t cap) {
    std::vector<std::size_t> idx;
    std::size_t step = std::max<std::size_t>(1, (n + cap - 1) / cap);
    for (std::size_t j = 0; j < n; j += step) idx.push_back(j);
    return idx;
}

double normalization_log(const std::vector<SubsetMask>& masks) {
    double s = 0;
    for (auto& m : masks) s -= m.level->N * std::log1p(-m.level->delta_n);
    return s;
}

}  // namespace

double pseudo_hyperbolic(cplx z, cplx w) {
    if (!(std::abs(z) < 1) || !(std::abs(w) < 1)) throw UsageError("pseudo_hyperbolic: arguments must lie in the disk");
    return std::abs(z - w) / std::abs(1.0 - z * std::conj(w));
}

const std::vector<cplx>& patch_net() {
    static const std::vector<cplx> net = [] {
        std::vector<cplx> v{0.0};
        for (auto [count, rad] : {std::pair{7, 0.35}, std::pair{12, 0.65}, std::pair{12, 0.9}})
            for (int j = 0; j < count; ++j) v.push_back(std::polar(rad, 2 * kPi * j / count));
        return v;
    }();
    return net;
}

LatticeLevel build_level_depth(double kappa, double x_n, const LevelRule& rule, int n) {
    if (!(kappa > 0 && kappa < 1)) throw UsageError("build_level: kappa must lie in (0,1)");
    double delta = std::exp(-x_n);
    if (!(delta <= 0.2 + 1e-15) || !(delta > 0)) throw UsageError("build_level: need 4/5 <= r_n < 1");
    double ratio = kappa / delta;
    if (ratio < 1) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "build_level: level too shallow, kappa/(1-r_n) = %.6g < 1", ratio);
        throw UsageError(buf);
    }
    LatticeLevel l;
    l.n = n;
    l.x_n = x_n;
    l.delta_n = delta;
    l.r_n = 1 - delta;
    l.kappa = kappa;
    l.N = static_cast<int>(std::floor(ratio));
    if (l.N + 1 <= ratio) ++l.N;
    double rho = delta * delta;
    std::mt19937_64 rng(rule.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(n)));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < l.N; ++k) {
        cplx w = std::polar(l.r_n, 2 * kPi * k / l.N);
        l.nodes.push_back(w);
        cplx z = w;
        if (rule.kind == SampleRule::Perturbed) {
            double rad = rho * std::sqrt(u(rng)) * (1 - 1e-9);
            z = w + std::polar(rad, 2 * kPi * u(rng));
        } else if (rule.kind == SampleRule::Minimizer) {
            if (!rule.log_abs_q) throw UsageError("build_level: minimizer rule needs a function");
            double best = kInf;
            for (cplx off : patch_net()) {
                cplx p = w + rho * off;
                double v = rule.log_abs_q(p);
                if (v < best) {
                    best = v;
                    z = p;
                }
            }
        }
        l.samples.push_back(z);
    }
    return l;
}

LatticeLevel build_level(double kappa, double r_n, const LevelRule& rule, int n) {
    if (!(r_n >= 0.8 && r_n < 1)) throw UsageError("build_level: need 4/5 <= r_n < 1");
    return build_level_depth(kappa, -std::log1p(-r_n), rule, n);
}

double SubsetMask::sigma() const {
    if (!level || level->N == 0) return 0;
    return static_cast<double>(level->N - static_cast<int>(selected.size())) / level->N;
}

SubsetMask SubsetMask::full(const LatticeLevel& l) {
    SubsetMask m;
    m.level = &l;
    for (int k = 0; k < l.N; ++k) m.selected.push_back(k);
    return m;
}

std::vector<cplx> selected_points(const SubsetMask& m) {
    std::vector<cplx> p;
    for (int k : m.selected) p.push_back(m.level->samples.at(k));
    return p;
}

LogComplex blaschke_eval(const std::vector<cplx>& points, cplx z) {
    if (!(std::abs(z) <= 1)) throw UsageError("blaschke_eval: |z| must be <= 1");
    double lm = 0, ph = 0;
    for (cplx a : points) {
        check_inside(a, "blaschke_eval");
        auto f = factor(a, z);
        if (f.is_zero()) return LogComplex();
        lm += f.log_magnitude;
        ph += f.phase;
    }
    return LogComplex(lm, ph);
}

LogComplex node_derivative_complex(const std::vector<cplx>& points, std::size_t j) {
    cplx zj = points.at(j);
    check_inside(zj, "node_derivative");
    double lm = -std::log1p(-std::norm(zj)), ph = 0;
    for (std::size_t k = 0; k < points.size(); ++k) {
        if (k == j) continue;
        auto f = factor(points[k], zj);
        if (f.is_zero()) throw UsageError("node_derivative: duplicate points");
        lm += f.log_magnitude;
        ph += f.phase;
    }
    return LogComplex(lm, ph);
}

LogReal node_derivative(const std::vector<cplx>& points, std::size_t j) {
    cplx zj = points.at(j);
    check_inside(zj, "node_derivative");
    double lm = -std::log1p(-std::norm(zj));
    for (std::size_t k = 0; k < points.size(); ++k) {
        if (k == j) continue;
        double r = pseudo_hyperbolic(zj, points[k]);
        if (r == 0) throw UsageError("node_derivative: duplicate points");
        lm += std::log(r);
    }
    return LogReal(lm, 1);
}

LogComplex comparator_eval(const LatticeLevel& l, cplx z) {
    double N = l.N;
    double lrN = N * std::log1p(-l.delta_n);
    cplx zN = std::abs(z) == 0 ? cplx(0) : std::polar(std::exp(N * std::log(std::abs(z))), N * std::arg(z));
    double rN = std::exp(lrN);
    return LogComplex::from_complex((zN - rN) / (1.0 - rN * zN));
}

BlockReport verify_lemma_tl8(const LatticeLevel& l, double r, double eps, double min_depth) {
    if (!(r > 0 && r < 1)) throw UsageError("verify_lemma_tl8: r must lie in (0,1)");
    BlockReport rep;
    rep.lemma = "tl8";
    rep.below_regime = l.x_n < min_depth;
    double cmin = kInf;
    auto idx = sampled_indices(l.samples.size(), 512);
    for (std::size_t j : idx) cmin = std::min(cmin, std::exp(node_derivative(l.samples, j).log_magnitude) / l.N);
    rep.checks.push_back(named("a", cmin > 0 && std::isfinite(cmin), cmin, 0));
    int M = std::max(64, 4 * l.N);
    double worst = kInf, where = 0, cmp = 0;
    for (int m = 0; m < M; ++m) {
        cplx z = std::polar(r, 2 * kPi * m / M);
        double lb = blaschke_eval(l.samples, z).log_magnitude;
        double margin = eps - std::fabs(lb + l.kappa);
        if (margin < worst) {
            worst = margin;
            where = 2 * kPi * m / M;
        }
        cmp = std::max(cmp, std::fabs(lb - comparator_eval(l, z).log_magnitude));
    }
    rep.checks.push_back(named("b", worst >= 0, worst, where));
    rep.values.emplace_back("c_kappa", cmin);
    rep.values.emplace_back("derivative_nodes_sampled", static_cast<double>(idx.size()));
    rep.values.emplace_back("max_log_ratio_to_comparator", cmp);
    rep.values.emplace_back("log_abs_comparator_at_0", comparator_eval(l, 0.0).log_magnitude);
    return rep;
}

BlockReport verify_lemma_tl9(const SubsetMask& m, double r, double eps, double min_depth) {
    if (!(r > 0 && r < 1)) throw UsageError("verify_lemma_tl9: r must lie in (0,1)");
    const auto& l = *m.level;
    auto pts = selected_points(m);
    double sigma = m.sigma();
    BlockReport rep;
    rep.lemma = "tl9";
    rep.below_regime = l.x_n < min_depth;
    double lo = kInf, hi = kInf, lo_at = 0, hi_at = 0;
    int M = std::max(64, 4 * l.N);
    for (int i = 0; i <= 8; ++i) {
        double rad = r * i / 8;
        int K = i == 0 ? 1 : M;
        for (int k = 0; k < K; ++k) {
            cplx z = std::polar(rad, 2 * kPi * k / K);
            double v = blaschke_eval(pts, z).log_magnitude + l.kappa;
            double ml = v + eps, mu = 3 * l.kappa * sigma / (1 - rad) + eps - v;
            if (ml < lo) lo = ml, lo_at = rad;
            if (mu < hi) hi = mu, hi_at = rad;
        }
    }
    rep.checks.push_back(named("lower", lo >= 0, lo, lo_at));
    rep.checks.push_back(named("upper", hi >= 0, hi, hi_at));
    rep.values.emplace_back("sigma", sigma);
    return rep;
}

InterpolationReport interpolation_identity(const std::vector<SubsetMask>& masks, const std::function<cplx(cplx)>& f,
                                           cplx z, double r, int contour_points) {
    if (!(r > 0 && r < 1) || !(std::abs(z) < r)) throw UsageError("interpolation_identity: need |z| < r < 1");
    std::vector<cplx> pts;
    for (auto& m : masks)
        for (cplx p : selected_points(m)) pts.push_back(p);
    for (cplx p : pts) {
        if (std::fabs(std::abs(p) - r) < 1e-12) throw UsageError("interpolation_identity: node on the contour");
        if (p == z) throw UsageError("interpolation_identity: z is a node");
    }
    double lc = normalization_log(masks);
    LogComplex c(lc, 0.0);
    InterpolationReport rep;
    int floor_m = static_cast<int>(8 * pts.size());
    rep.contour_points = contour_points > 0 ? std::max(contour_points, floor_m) : std::max(floor_m, 2048);
    cplx lhs = -f(z) / (c * blaschke_eval(pts, z)).to_complex();
    for (std::size_t j = 0; j < pts.size(); ++j) {
        if (!(std::abs(pts[j]) < r)) continue;
        ++rep.nodes_inside;
        cplx d = (c * node_derivative_complex(pts, j)).to_complex();
        lhs += f(pts[j]) / (d * (z - pts[j]));
    }
    cplx rhs = 0;
    int M = rep.contour_points;
    for (int m = 0; m < M; ++m) {
        cplx zeta = std::polar(r, 2 * kPi * m / M);
        cplx B = (c * blaschke_eval(pts, zeta)).to_complex();
        rhs += f(zeta) * zeta / (B * (z - zeta));
    }
    rhs /= static_cast<double>(M);
    rep.lhs = lhs;
    rep.rhs = rhs;
    rep.residual = std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
    return rep;
}

std::vector<double> depth_schedule(double x1, int levels, double log_spacing) {
    std::vector<double> x{x1};
    while (static_cast<int>(x.size()) < levels) x.push_back(std::max(2 * x.back(), x.back() + log_spacing));
    return x;
}

BlockReport growth_bound_check(const std::vector<LatticeLevel>& levels, const std::function<cplx(cplx)>& f, double p,
                               double min_depth) {
    if (!(p > 0)) throw UsageError("growth_bound_check: p must be positive");
    BlockReport rep;
    rep.lemma = "tl10";
    std::vector<SubsetMask> masks;
    bool sigma_ok = true;
    double worst_sigma = kInf;
    for (auto& l : levels) {
        rep.below_regime = rep.below_regime || l.x_n < min_depth;
        double n = l.n;
        std::vector<double> mag;
        double sum = 0;
        for (cplx zk : l.samples) {
            mag.push_back(std::abs(f(zk)));
            sum += std::pow(mag.back(), p);
        }
        if (!(sum <= n * n * l.N)) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "growth_bound_check: sample bound violated at n=%d (sum %.6g > %.6g)", l.n,
                          sum, n * n * l.N);
            throw UsageError(buf);
        }
        SubsetMask m;
        m.level = &l;
        double cut = std::pow(n, 4 / p);
        for (int k = 0; k < l.N; ++k)
            if (mag[k] <= cut) m.selected.push_back(k);
        double s = m.sigma();
        worst_sigma = std::min(worst_sigma, 1 / (n * n) - s);
        if (s > 1 / (n * n)) sigma_ok = false;
        masks.push_back(m);
    }
    rep.checks.push_back(named("sample_bound", true, 0, 0));
    rep.checks.push_back(named("density", sigma_ok, worst_sigma, 0));

    double lc = normalization_log(masks);
    std::vector<cplx> pts;
    for (auto& m : masks)
        for (cplx q : selected_points(m)) pts.push_back(q);
    auto logB = [&](cplx z) { return lc + blaschke_eval(pts, z).log_magnitude; };

    double gmin = levels.empty() ? 0.1 : levels.back().delta_n / 4;
    double c_f = 0, c1 = 0;
    for (int i = 0; i <= 60; ++i) {
        double gap = std::exp(std::log(gmin) * i / 60.0);
        double rad = i == 0 ? 0.0 : 1 - gap;
        if (i == 0) gap = 1;
        for (int k = 0; k < 64; ++k) {
            cplx z = std::polar(rad, 2 * kPi * k / 64);
            c_f = std::max(c_f, std::abs(f(z)) * std::exp(-1 / gap));
            double lb = logB(z);
            if (std::isfinite(lb)) c1 = std::max(c1, std::exp(lb - 1 / (5 * gap)));
        }
    }
    double c2 = kInf, c3 = kInf;
    for (std::size_t li = 0; li < levels.size(); ++li) {
        auto& l = levels[li];
        int M = std::max(64, 4 * l.N);
        double rad = 1 - 2 * l.delta_n;
        for (int k = 0; k < M; ++k) c2 = std::min(c2, std::exp(logB(std::polar(rad, 2 * kPi * k / M)) - l.kappa * l.n));
        std::size_t offset = 0;
        for (std::size_t m = 0; m < li; ++m) offset += masks[m].selected.size();
        for (std::size_t j : sampled_indices(masks[li].selected.size(), 256)) {
            double ld = lc + node_derivative(pts, offset + j).log_magnitude;
            c3 = std::min(c3, std::exp(ld - std::log(static_cast<double>(l.N)) - l.kappa * l.n));
        }
    }
    rep.checks.push_back(named("f_bound", std::isfinite(c_f), c_f, 0));
    rep.checks.push_back(named("B_upper", std::isfinite(c1) && c1 > 0, c1, 0));
    rep.checks.push_back(named("B_lower_on_circles", std::isfinite(c2) && c2 > 0, c2, 0));
    rep.checks.push_back(named("B_derivative", std::isfinite(c3) && c3 > 0, c3, 0));
    rep.c_theta = c_f;
    rep.values = {{"c", c_f}, {"c1", c1}, {"c2", c2}, {"c3", c3}};
    for (auto& m : masks) rep.values.emplace_back("sigma_" + std::to_string(m.level->n), m.sigma());
    return rep;
}

}  // namespace berglab
