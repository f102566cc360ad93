#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "berglab/experiment.hpp"

using namespace berglab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kPinnedDelta0 = 0.0602388724;  // min_N d_N, default two-level F, N <= 200

struct Outcome {
    bool pass = true;
    std::string detail;
    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += (ok ? "" : "FAILED ") + what;
    }
};

std::string fmt(const char* f, double a, double b = 0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::vector<double> grid(double a, double b, double h) {
    std::vector<double> x;
    int n = static_cast<int>(std::lround((b - a) / h));
    for (int i = 0; i <= n; ++i) x.push_back(a + (b - a) * i / n);
    return x;
}

std::vector<std::size_t> brute_hull(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < x.size(); ++i) {
        bool under = false;
        for (std::size_t a = 0; a < i && !under; ++a)
            for (std::size_t b = i + 1; b < x.size() && !under; ++b)
                if (y[a] + (y[b] - y[a]) * (x[i] - x[a]) / (x[b] - x[a]) <= y[i]) under = true;
        if (!under) v.push_back(i);
    }
    return v;
}

fs::path out_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("berglab_acceptance_" + name);
    fs::remove_all(p);
    return p;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

const json& report(const json& env, const std::string& name) {
    for (auto& r : env.at("reports"))
        if (r.at("name") == name) return r;
    throw std::runtime_error("missing report " + name);
}

bool check_passes(const json& rep, const std::string& check) {
    for (auto& c : rep.at("checks"))
        if (c.at("name") == check) return c.at("pass").get<bool>();
    throw std::runtime_error("missing check " + check);
}

double value(const json& rep, const std::string& key) {
    auto& v = rep.at("values").at(key);
    if (v.is_string()) {
        std::string s = v;
        return s == "inf" ? INFINITY : s == "-inf" ? -INFINITY : NAN;
    }
    return v.get<double>();
}

Outcome quadrature_calibration() {
    Outcome o;
    auto m = moments(RadialWeight::unit(), 64);
    double worst = 0;
    for (int n = 0; n <= 64; ++n) worst = std::max(worst, std::fabs(m.at(n).to_double() * (n + 1) - 1));
    o.require(worst <= 1e-8, fmt("max |Omega(n)(n+1) - 1| = %.3g over n <= 64", worst));
    return o;
}

Outcome minorant_suite() {
    Outcome o;
    auto x = grid(0, 40, 0.02);
    std::vector<double> Q;
    for (double t : x) Q.push_back(std::exp(t / 2));
    auto rep = verify_lemma51(regularize(x, Q, 0.5), x, Q);
    o.require(rep.all_pass(), "Lambda = e^x: properties a-f");
    auto xb = grid(0, 30, 0.01);
    std::vector<double> Qb;
    for (double t : xb)
        Qb.push_back(std::sqrt(std::exp(t) + 0.05 * std::exp(10.0) * std::max(0.0, 1 - 4 * (t - 10) * (t - 10))));
    o.require(verify_lemma51(regularize(xb, Qb, 0.5), xb, Qb).all_pass(), "concave bump: properties a-f");
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1, 1);
    int agree = 0, reps = 10;
    for (int r = 0; r < reps; ++r) {
        std::vector<double> hx, hy;
        for (int i = 0; i < 200; ++i) {
            hx.push_back(i + 0.5 * u(rng));
            hy.push_back(0.01 * (i - 100.0) * (i - 100.0) + 20 * u(rng));
        }
        agree += lower_hull_indices(hx, hy) == brute_hull(hx, hy);
    }
    o.require(agree == reps, fmt("brute-force hull agrees on %.0f/%.0f random 200-sample inputs", agree, reps));
    return o;
}

Outcome power_identities() {
    Outcome o;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0, 1);
    double worst_a = 0, worst_c = 0;
    for (int i = 0; i < 1000; ++i) {
        cplx z = std::polar(0.999 * std::sqrt(u(rng)), 2 * kPi * u(rng));
        double alpha = 0.5 + 49.5 * u(rng);
        double log_mag = -alpha * std::log(std::abs(1.0 - z));
        auto re = f_alpha(alpha, z).real_part();
        double scaled = re.sign == 0 ? 0 : re.sign * std::exp(re.log_magnitude - log_mag);
        worst_a = std::max(worst_a, std::fabs(scaled - std::cos(alpha * std::arg(1.0 - z))));
    }
    for (int i = 0; i < 1000; ++i) {
        double alpha = 3 + 97 * u(rng);
        double rho = 1.998 * u(rng) * std::cos(kPi / alpha);
        int sgn = i % 2 ? 1 : -1;
        cplx z = 1.0 - std::polar(rho, sgn * kPi / alpha);
        if (!(std::abs(z) < 1) || rho == 0) continue;
        auto re = f_alpha(alpha, z).real_part();
        double rel = re.sign < 0 ? std::fabs(std::expm1(re.log_magnitude + alpha * std::log(std::abs(1.0 - z)))) : INFINITY;
        worst_c = std::max(worst_c, rel);
    }
    o.require(worst_a <= 1e-12, fmt("(a) worst error / |F| = %.3g on 1000 points", worst_a));
    o.require(worst_c <= 1e-12, fmt("(c) worst relative error = %.3g on 1000 points", worst_c));
    double alpha = 200, phi = 0.1, worst_d = -INFINITY;
    int pts = 0;
    for (double r = 0.5005; r < 1; r += 0.001)
        for (int k = 0; k < 2000; ++k) {
            cplx z = std::polar(r, 2 * kPi * (k + 0.5) / 2000);
            if (std::fabs(std::arg(1.0 - z)) <= phi) continue;
            double lhs = f_alpha(alpha, z).log_magnitude;
            double rhs = -alpha * phi * phi / 3 - alpha * std::log1p(-r);
            worst_d = std::max(worst_d, lhs - rhs);
            ++pts;
        }
    o.require(worst_d <= 0, fmt("(d) alpha=200 phi=0.1: worst log margin %.3g over %.0f grid points", worst_d, pts));
    return o;
}

Outcome lattice_comparator() {
    Outcome o;
    double kappa = std::exp(-5.0);
    auto l = build_level_depth(kappa, 12.0, LevelRule::centers());
    o.require(l.samples == l.nodes, "centers rule samples are the nodes");
    double worst = 0;
    for (double rad : {0.0, 0.3, 0.5, 0.9})
        for (double th : {0.0, 0.77, 2.1, 4.0}) {
            cplx z = std::polar(rad, th);
            worst = std::max(worst, std::fabs(blaschke_eval(l.samples, z).log_magnitude -
                                              comparator_eval(l, z).log_magnitude));
        }
    o.require(worst <= 1e-9, fmt("max |log|B_n| - log|A_n|| = %.3g", worst));
    double a0 = comparator_eval(l, 0.0).log_magnitude;
    double expect = l.N * std::log1p(-l.delta_n);
    o.require(std::fabs(a0 - expect) <= 1e-12 * std::fabs(expect), fmt("log|A_n(0)| = N log r_n = %.6g", a0));
    o.require(std::fabs(a0 + kappa) <= 0.01, fmt("|log|A_n(0)| + kappa| = %.3g", std::fabs(a0 + kappa)));
    o.require(verify_lemma_tl8(l, 0.5, 0.01).all_pass(), "centers rule estimates at r = 0.5");
    auto p = build_level_depth(kappa, 12.0, LevelRule::perturbed(7));
    o.require(verify_lemma_tl8(p, 0.5, 0.02).all_pass(), "perturbed rule, eps = 0.02 at r = 0.5");
    return o;
}

Outcome interpolation() {
    Outcome o;
    auto cube = [](cplx z) { return z * z * z; };
    auto quint = [](cplx z) { return 1.0 + z * z * z * z * z; };
    auto deep = build_level_depth(0.5, 5.0, LevelRule::centers());
    std::vector<SubsetMask> m1{SubsetMask::full(deep)};
    for (auto& [name, f] : std::vector<std::pair<std::string, std::function<cplx(cplx)>>>{{"z^3", cube}, {"1+z^5", quint}}) {
        auto r = interpolation_identity(m1, f, 0.1, 0.9, 8 * deep.N);
        o.require(r.residual < 1e-8, fmt("one level (N=%.0f), 8N contour points: residual %.3g", deep.N, r.residual) +
                                         " for " + name);
    }
    auto l1 = build_level_depth(0.5, 2.5, LevelRule::perturbed(5), 1);
    auto l2 = build_level_depth(0.5, 5.0, LevelRule::perturbed(5), 2);
    std::vector<SubsetMask> m2{SubsetMask::full(l1), SubsetMask::full(l2)};
    auto r2 = interpolation_identity(m2, cube, cplx(0.3, 0.2), 0.95, 8 * (l1.N + l2.N));
    o.require(r2.residual < 1e-8 && r2.nodes_inside == l1.N,
              fmt("two levels, %.0f nodes inside, 8x contour points: residual %.3g", r2.nodes_inside, r2.residual));
    auto shallow = build_level(0.5, 1 - 0.5 / 8.5, LevelRule::centers());
    std::vector<SubsetMask> ms{SubsetMask::full(shallow)};
    double e1 = interpolation_identity(ms, cube, 0.1, 0.97, 64).residual;
    double e2 = interpolation_identity(ms, cube, 0.1, 0.97, 128).residual;
    o.require(e2 <= e1 / 4, fmt("doubling 64 -> 128 points shrinks the residual %.3gx", e1 / e2));
    return o;
}

Outcome construction(const ExperimentConfig& c) {
    Outcome o;
    std::ostringstream log;
    auto a = out_dir("construct_a"), b = out_dir("construct_b");
    run_subcommand("construct", c, a, log);
    run_subcommand("construct", c, b, log);
    auto env = read_json(a / "construct.json");
    for (int n = 1; n <= c.construct.levels; ++n) {
        auto& r = report(env, "concentration_" + std::to_string(n));
        o.require(check_passes(r, "eq33"), fmt("level %.0f: solve residual max %.3g", n, value(r, "max_residual")));
        o.require(check_passes(r, "c_le_10"),
                  fmt("level %.0f: concentration log c = %.3g (c <= 10)", n, value(r, "log_c")));
    }
    auto& d = report(env, "decay");
    o.require(d.at("status") == "pass", "decay witnesses with log|F| <= -theta/2");
    o.require(check_passes(report(env, "norm_integrals"), "a1_trend"), "shell masses ~ 1/n^2 within 10x");
    bool same = slurp(a / "state.json") == slurp(b / "state.json") &&
                slurp(a / "construct.json") == slurp(b / "construct.json");
    o.require(same, "artifact hash " + sha256_hex(slurp(a / "state.json")).substr(0, 16) + " identical across runs");
    return o;
}

Outcome non_cyclicity(const ExperimentConfig& c) {
    Outcome o;
    std::ostringstream log;
    auto dir = out_dir("cyclicity");
    run_subcommand("cyclicity", c, dir, log);
    auto env = read_json(dir / "cyclicity.json");
    auto& r = report(env, "cyclicity");
    double lo = value(r, "delta0");
    o.require(lo >= kPinnedDelta0 * (1 - 1e-9) && lo > 0,
              fmt("min d_N over N <= 200 = %.10g (pinned %.10g)", lo, kPinnedDelta0));
    o.require(check_passes(r, "nonincreasing"), "d_N nonincreasing");
    o.require(check_passes(r, "control_decays"),
              fmt("control 1 + z/2: d_200 = %.3g, d_0 = %.3g", value(r, "control_d_max_degree"), value(r, "control_d_0")));
    return o;
}

Outcome pair_evidence(const ExperimentConfig& c) {
    Outcome o;
    std::ostringstream log;
    auto dir = out_dir("pair");
    run_subcommand("pair", c, dir, log);
    auto env = read_json(dir / "pair.json");
    auto& p = report(env, "pair");
    for (auto k : {"interleaved", "42a_f1", "42a_f2", "42b_f1_on_f2", "42b_f2_on_f1"}) {
        bool ok = check_passes(p, k);
        std::string label = std::string(k) == "interleaved" ? "depths interleave"
                            : std::string(k).rfind("42a", 0) == 0 ? std::string("upper bound off the disks, family ") + k[5]
                                                                  : std::string("smallness at the other family's centres, ") + (k + 4);
        o.require(ok, label);
    }
    auto& s = report(env, "subspace_distance");
    o.require(s.at("status") == "pass",
              fmt("log dist(F2, span z^j F1) >= %.4g over N <= 100", value(s, "log_min_distance")));
    return o;
}

Outcome smoothness(const ExperimentConfig& c) {
    Outcome o;
    std::ostringstream log;
    auto dir = out_dir("smooth");
    run_subcommand("smooth", c, dir, log);
    auto env = read_json(dir / "smooth.json");
    auto& s = report(env, "smoothness");
    o.require(check_passes(s, "est000"), fmt("first estimate on %.0f pairs", value(s, "pairs")));
    o.require(check_passes(s, "est001"), fmt("second estimate, log M = %.4g", value(s, "log_M")));
    for (auto name : {"resolvent_integral_F", "resolvent_integral_control"}) {
        auto& r = report(env, name);
        o.require(check_passes(r, "orderings"),
                  std::string(name) + fmt(": orderings differ by %.3g (log A = %.6g)", value(r, "relative_gap"),
                                          value(r, "log_A_lambda_outer")));
    }
    return o;
}

Outcome negative_controls() {
    Outcome o;
    int fails = 0, total = 0;
    for (double e = 0.05; e < 1; e += 0.05, ++total)
        fails += !check_condition_10(RadialWeight::single_exp(1.0), default_x_grid(), e).pass;
    o.require(fails == total, fmt("exp(-1/(1-t)) fails the growth condition for %.0f/%.0f eps0 in (0,1)", fails, total));

    auto x = grid(0, 30, 0.01);
    std::vector<double> Q;
    for (double t : x) Q.push_back(std::sqrt(std::exp(t) + 0.05 * std::exp(10.0) * std::max(0.0, 1 - 4 * (t - 10) * (t - 10))));
    auto r = regularize(x, Q, 0.5);
    auto only = [&](const MinorantResult& m, const std::vector<double>& xs, const std::vector<double>& qs,
                    const std::string& prop) {
        auto rep = verify_lemma51(m, xs, qs);
        bool ok = true;
        for (auto& p : rep.checks) ok = ok && (p.pass == (p.name != prop));
        o.require(ok, "corruption of (" + prop + ") flagged there only");
    };
    {
        auto xs = r.q.xs();
        auto ys = r.q.ys();
        auto it = std::upper_bound(xs.begin(), xs.end(), 10.0);
        std::size_t at = it - xs.begin();
        xs.insert(it, 10.0);
        ys.insert(ys.begin() + at, Q[1000] * 1.001);
        auto c = r;
        c.q = PiecewiseLinear(xs, ys);
        only(c, x, Q, "a");
    }
    {
        auto c = r;
        c.touch_points.push_back(10.0);
        std::sort(c.touch_points.begin(), c.touch_points.end());
        only(c, x, Q, "d");
    }
    {
        auto xs = grid(0, 1.5, 0.01);
        std::vector<double> qs;
        for (double t : xs) qs.push_back(std::exp(t / 2));
        auto c = regularize(xs, qs, 0.5);
        c.q.right_extrap_slope *= 2;
        only(c, xs, qs, "c");
    }
    return o;
}

}  // namespace

int main() {
    ExperimentConfig cfg;
    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        std::function<Outcome()> run;
    };
    std::vector<Criterion> all{
        {1, "quadrature calibration", 5, quadrature_calibration},
        {2, "minorant suite", 10, minorant_suite},
        {3, "power function identities", 5, power_identities},
        {4, "lattice comparator", 30, lattice_comparator},
        {5, "interpolation identity", 30, interpolation},
        {6, "two-level construction", 600, [&] { return construction(cfg); }},
        {7, "non-cyclicity evidence", 300, [&] { return non_cyclicity(cfg); }},
        {8, "interleaved pair", 600, [&] { return pair_evidence(cfg); }},
        {9, "smoothness and resolvent integral", 600, [&] { return smoothness(cfg); }},
        {10, "negative controls", 5, negative_controls},
    };
    int failed = 0;
    for (auto& c : all) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.require(secs < c.limit_s, fmt("runtime %.1f s (limit %.0f s)", secs, c.limit_s));
        failed += !o.pass;
        std::printf("criterion %d [%s]: %s | %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("acceptance: %d/%zu criteria pass\n", static_cast<int>(all.size()) - failed, all.size());
    return failed ? 1 : 0;
}
