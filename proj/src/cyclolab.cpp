#include "berglab/cyclolab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "checks.hpp"

namespace berglab {

namespace {

struct RadialNode {
    double r, weight;  // weight against 2 r dr
};

std::vector<RadialNode> radial_nodes(const DiskMesh& mesh) {
    auto gl = gauss_legendre(mesh.gl_nodes);
    std::vector<RadialNode> out;
    for (auto [a, b] : radial_cells(mesh))
        for (int i = 0; i < mesh.gl_nodes; ++i) {
            double r = 0.5 * (a + b) + 0.5 * (b - a) * gl.x[i];
            out.push_back({r, gl.w[i] * 0.5 * (b - a) * 2 * r});
        }
    return out;
}

// f sqrt(omega) on the polar grid, row per radial node
struct Samples {
    std::vector<RadialNode> radial;
    int M = 0;
    std::vector<cplx> v;
    cplx at(std::size_t i, int m) const { return v[i * M + m]; }
};

double grid_angle(int m, int M) { return 2 * kPi * (m + 0.5) / M; }

Samples sample(const std::function<LogComplex(cplx)>& f, const RadialWeight& w, const DiskMesh& mesh, int M) {
    Samples s;
    s.radial = radial_nodes(mesh);
    s.M = M;
    s.v.resize(s.radial.size() * M);
    for (std::size_t i = 0; i < s.radial.size(); ++i) {
        double r = s.radial[i].r, half_log_omega = 0.5 * w.log_omega_gap(1 - r);
        for (int m = 0; m < M; ++m) {
            auto val = f(std::polar(r, grid_angle(m, M)));
            double lm = val.log_magnitude + half_log_omega;
            if (std::isnan(lm) || lm > 700) {
                char buf[128];
                std::snprintf(buf, sizeof buf, "gram: integrand not representable at r=%.17g", r);
                throw NumericError(buf);
            }
            s.v[i * M + m] = lm < -745 ? cplx(0) : std::polar(std::exp(lm), val.phase);
        }
    }
    return s;
}

// sum_i weight_i r_i^{j+l} mean_m a_im conj(b_im) e^{i(l-j) phi_m}; out(j, l)
Eigen::MatrixXcd cross_moments(const Samples& a, const Samples& b, int N) {
    int Q = 2 * N;
    std::vector<std::vector<cplx>> P(a.radial.size(), std::vector<cplx>(2 * Q + 1));
    parallel_for(a.radial.size(), [&](std::size_t i) {
        auto& Pi = P[i];
        for (int m = 0; m < a.M; ++m) {
            cplx p = a.at(i, m) * std::conj(b.at(i, m)) / double(a.M);
            if (p == cplx(0)) continue;
            double phi = grid_angle(m, a.M);
            cplx step = std::polar(1.0, phi), e = std::polar(1.0, -Q * phi);
            for (int q = -Q; q <= Q; ++q, e *= step) Pi[q + Q] += p * e;
        }
    });
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(N + 1, N + 1);
    std::vector<double> pw(2 * N + 1);
    for (std::size_t i = 0; i < a.radial.size(); ++i) {
        double r = a.radial[i].r;
        pw[0] = a.radial[i].weight;
        for (int k = 1; k <= 2 * N; ++k) pw[k] = pw[k - 1] * r;
        for (int j = 0; j <= N; ++j)
            for (int l = 0; l <= N; ++l) out(j, l) += pw[j + l] * P[i][l - j + Q];
    }
    return out;
}

void add_atoms(Eigen::MatrixXcd& G, const std::vector<AtomRing>& rings) {
    int N = static_cast<int>(G.rows()) - 1;
    for (auto& ring : rings) {
        std::vector<cplx> B(2 * N + 1);
        for (std::size_t k = 0; k < ring.log_mass.size(); ++k) {
            if (!(ring.log_mass[k] < 690)) throw NumericError("gram: generator atom mass not representable");
            double mass = std::exp(ring.log_mass[k]);
            if (mass == 0) continue;
            cplx step = std::polar(1.0, ring.phase[k]), e = std::polar(mass, -N * ring.phase[k]);
            for (int q = -N; q <= N; ++q, e *= step) B[q + N] += e;
        }
        std::vector<double> pw(2 * N + 1, 1.0);
        for (int k = 1; k <= 2 * N; ++k) pw[k] = pw[k - 1] * ring.r;
        for (int j = 0; j <= N; ++j)
            for (int l = 0; l <= N; ++l) G(j, l) += pw[j + l] * B[j - l + N];
    }
}

LogReal atom_total(const std::vector<AtomRing>& rings) {
    std::vector<LogReal> t;
    for (auto& ring : rings)
        for (double m : ring.log_mass)
            if (m > -745) t.push_back(LogReal(m, 1));
    return t.empty() ? LogReal() : log_sum_exp(t);
}

int gram_angular(const DiskMesh& mesh, int N) { return std::max(mesh.min_angular, 4 * N + 8); }

LogComplex log_domain(cplx z) { return LogComplex::from_complex(z); }

}  // namespace

Generator Generator::polynomial(std::vector<cplx> coeffs) {
    Generator g;
    auto d = coeffs;
    for (std::size_t k = 0; k < d.size(); ++k) d[k] *= double(k);
    auto horner = [](const std::vector<cplx>& c, cplx z, std::size_t from) {
        cplx acc = 0;
        for (std::size_t k = c.size(); k-- > from;) acc = acc * z + c[k];
        return acc;
    };
    g.value = [coeffs, horner](cplx z) { return log_domain(horner(coeffs, z, 0)); };
    g.log_derivative = [coeffs, d, horner](cplx z) { return horner(d, z, 1) / horner(coeffs, z, 0); };
    return g;
}

Generator Generator::constant(cplx c) { return polynomial({c}); }

Generator generator_from_state(const ConstructionState& s, double p) {
    if (!(p > 0)) throw UsageError("generator_from_state: p must be positive");
    Generator g;
    auto state = std::make_shared<const ConstructionState>(s);
    g.value = [state, p](cplx z) {
        auto W = eval_W(*state, DiskPoint::at(z));
        return LogComplex(W.re.to_double() / p, LogComplex::wrap_phase(std::fmod(W.im.to_double() / p, 2 * kPi)));
    };
    g.log_derivative = [state, p](cplx z) { return eval_W_prime(*state, DiskPoint::at(z)).to_complex() / p; };
    if (p == 2) {
        for (std::size_t i = 0; i < s.levels.size(); ++i) {
            auto& lv = s.levels[i];
            AtomRing ring;
            ring.r = lv.block.r_n;
            ring.phase.resize(lv.lattice.N);
            ring.log_mass.resize(lv.lattice.N);
            parallel_for(lv.lattice.N, [&](std::size_t k) {
                ring.phase[k] = 2 * kPi * k / lv.lattice.N;
                ring.log_mass[k] = disk_mass(s, static_cast<int>(i), static_cast<int>(k)).mass.log_magnitude;
            });
            g.atoms.push_back(std::move(ring));
        }
    }
    return g;
}

double weight_floor(const RadialWeight& w, double log_cut) {
    double target = std::log(log_cut);
    if (w.family() == WeightFamily::Unit) return DiskMesh{}.floor;
    if (w.Lambda(std::log(2.0)) >= target) return 0.5;
    double lo = std::log(2.0), hi = lo;
    while (w.Lambda(hi) < target) {
        hi *= 2;
        if (hi > 700) return DiskMesh{}.floor;
    }
    return std::exp(-bisect_monotone([&](double x) { return w.Lambda(x); }, lo, hi, target, 1e-12));
}

DiskMesh gram_mesh(const RadialWeight& w, int levels_per_octave) {
    DiskMesh m;
    m.floor = weight_floor(w);
    m.levels_per_octave = levels_per_octave;
    m.cells_per_unit = 16;
    m.gl_nodes = 8;
    return m;
}

LogComplex inner_product(const std::function<LogComplex(cplx)>& f, const std::function<LogComplex(cplx)>& g,
                         const RadialWeight& w, const DiskMesh& mesh) {
    std::vector<LogComplex> terms;
    auto gl = gauss_legendre(mesh.gl_nodes);
    for (auto [a, b] : radial_cells(mesh)) {
        int M = angular_count(mesh, 1 - b);
        for (int i = 0; i < mesh.gl_nodes; ++i) {
            double r = 0.5 * (a + b) + 0.5 * (b - a) * gl.x[i];
            double base = std::log(gl.w[i] * 0.5 * (b - a) * 2 * r / M) + w.log_omega_gap(1 - r);
            for (int m = 0; m < M; ++m) {
                cplx z = std::polar(r, grid_angle(m, M));
                auto t = f(z) * g(z).conj();
                if (std::isnan(t.log_magnitude) || (std::isinf(t.log_magnitude) && t.log_magnitude > 0))
                    throw NumericError("inner_product: non-finite integrand");
                if (!t.is_zero()) terms.push_back(LogComplex(t.log_magnitude + base, t.phase));
            }
        }
    }
    return terms.empty() ? LogComplex() : log_sum_exp(terms);
}

GramSystem build_gram(const Generator& f, const RadialWeight& w, int N, const DiskMesh& mesh, const Generator* target) {
    if (N < 0) throw UsageError("build_gram: degree must be nonnegative");
    double floor = weight_floor(w);
    auto check_atoms = [&](const std::vector<AtomRing>& rings) {
        for (auto& ring : rings)
            if (1 - ring.r >= floor) throw UsageError("build_gram: atoms must lie outside the quadrature region");
    };
    check_atoms(f.atoms);
    Generator one = Generator::constant();
    const Generator& t = target ? *target : one;
    check_atoms(t.atoms);
    for (auto& a : t.atoms)
        for (auto& b : f.atoms)
            if (a.r == b.r) throw UsageError("build_gram: target and generator share an atom ring");

    DiskMesh m = mesh;
    m.floor = std::max(mesh.floor, floor);
    int M = gram_angular(m, N);
    auto fs = sample(f.value, w, m, M);
    auto ts = sample(t.value, w, m, M);

    GramSystem g;
    g.N = N;
    // <z^j f, z^l f> = sum r^{j+l} mean |f|^2 omega e^{i(j-l) phi}
    g.G = cross_moments(fs, fs, N).transpose();
    add_atoms(g.G, f.atoms);
    // <t, z^j f> = sum r^j mean t conj(f) omega e^{-i j phi}: row 0 of the cross table
    auto tc = cross_moments(ts, fs, N);
    g.b = tc.col(0);
    g.target_norm_sq = cross_moments(ts, ts, 0)(0, 0).real();
    g.target_atoms = atom_total(t.atoms);
    g.hermitian_error = (g.G - g.G.adjoint()).cwiseAbs().maxCoeff() / 
                        std::max(g.G.diagonal().real().cwiseAbs().maxCoeff(), 1e-300);
    g.G = (0.5 * (g.G + g.G.adjoint())).eval();
    Eigen::VectorXd d = g.G.diagonal().real().cwiseSqrt();
    if (!(d.minCoeff() > 0)) throw NumericError("build_gram: zero diagonal entry");
    Eigen::MatrixXcd S = d.cwiseInverse().asDiagonal() * g.G * d.cwiseInverse().asDiagonal();
    g.ridge = 1e-12 * S.trace().real() / (N + 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(S, Eigen::EigenvaluesOnly);
    g.min_eig_rel = es.eigenvalues().minCoeff() / S.trace().real();
    return g;
}

DistanceSolve solve_distance(const GramSystem& g, int n) {
    if (n < 0 || n > g.N) throw UsageError("solve_distance: degree outside the Gram system");
    Eigen::VectorXd d = g.G.diagonal().real().head(n + 1).cwiseSqrt().cwiseInverse();
    Eigen::MatrixXcd S = d.asDiagonal() * g.G.topLeftCorner(n + 1, n + 1) * d.asDiagonal();
    double ridge = 1e-12 * S.trace().real() / (n + 1);
    S.diagonal().array() += ridge;
    Eigen::VectorXcd b = d.asDiagonal() * g.b.head(n + 1);
    Eigen::LDLT<Eigen::MatrixXcd> ldlt(S);
    Eigen::VectorXcd a = ldlt.solve(b);
    DistanceSolve out;
    auto D = ldlt.vectorD().cwiseAbs();
    out.condition = D.maxCoeff() / D.minCoeff();
    double bn = b.norm();
    out.residual = bn > 0 ? (S * a - b).norm() / bn : 0.0;
    if (!(out.residual <= 1e-8)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "gram solve: residual %.3g at degree %d, condition estimate %.3g", out.residual,
                      n, out.condition);
        throw NumericError(buf);
    }
    auto sq = g.target_atoms + LogReal::from_double(g.target_norm_sq - b.dot(a).real());
    out.distance_sq = sq.to_double();
    out.log_distance = sq.sign > 0 ? LogReal(0.5 * sq.log_magnitude, 1) : LogReal();
    out.distance = sq.sign > 0 ? std::exp(0.5 * sq.log_magnitude) : 0.0;
    return out;
}

std::vector<DistanceSolve> distance_profile(const GramSystem& g) {
    std::vector<DistanceSolve> out;
    for (int n = 0; n <= g.N; ++n) out.push_back(solve_distance(g, n));
    return out;
}

double cyclicity_distance(const Generator& f, const RadialWeight& w, int N, const DiskMesh& mesh) {
    return solve_distance(build_gram(f, w, N, mesh), N).distance;
}

double subspace_distance(const Generator& g, const Generator& f, const RadialWeight& w, int N, const DiskMesh& mesh) {
    return solve_distance(build_gram(f, w, N, mesh, &g), N).distance;
}

LogReal bilateral_norm(const BilateralSequence& seq) {
    if (!seq.moments) throw UsageError("bilateral_norm: moments missing");
    if (static_cast<int>(seq.c.size()) != 2 * seq.M + 1) throw UsageError("bilateral_norm: expected 2M+1 coefficients");
    std::vector<LogReal> terms;
    for (int n = -seq.M; n <= seq.M; ++n) {
        cplx c = seq.c[n + seq.M];
        if (!std::isfinite(std::abs(c))) throw UsageError("bilateral_norm: non-finite coefficient");
        if (c == cplx(0)) continue;
        terms.push_back(LogReal(2 * std::log(std::abs(c)) + extend_bilateral(*seq.moments, n).log_magnitude, 1));
    }
    if (terms.empty()) return {};
    auto sum = log_sum_exp(terms);
    return LogReal(0.5 * sum.log_magnitude, 1);
}

namespace {

// (1 - f(z)/f(lambda)) / (lambda - z) from the two values
LogComplex resolvent_value(const LogComplex& fz, const LogComplex& fl, cplx z, cplx lambda,
                           const std::function<cplx(cplx)>& log_derivative) {
    cplx d = lambda - z;
    if (d == cplx(0)) return LogComplex::from_complex(log_derivative(lambda));
    if (fz.is_zero()) return LogComplex::from_complex(1.0 / d);
    double a = fz.log_magnitude - fl.log_magnitude, b = fz.phase - fl.phase;
    if (a > 30) return LogComplex(a - std::log(std::abs(d)), LogComplex::wrap_phase(b + kPi - std::arg(d)));
    double s = std::sin(0.5 * b);
    cplx num(-(std::expm1(a) * std::cos(b) - 2 * s * s), -std::exp(a) * std::sin(b));
    return LogComplex::from_complex(num / d);
}

void require_value(const LogComplex& fl) {
    if (fl.is_zero() || !std::isfinite(fl.log_magnitude))
        throw NumericError("resolvent: f(lambda) not representable in the log domain");
}

struct APoint {
    cplx z;
    double log_weight;  // quadrature weight times omega
    LogComplex f;
};

std::vector<APoint> a_points(const Generator& f, const RadialWeight& w, const AMesh& am, double shift) {
    DiskMesh m;
    m.cells_per_unit = am.cells_per_unit;
    m.levels_per_octave = am.levels_per_octave;
    m.floor = weight_floor(w);
    auto gl = gauss_legendre(am.gl_nodes);
    std::vector<APoint> pts;
    for (auto [a, b] : radial_cells(m))
        for (int i = 0; i < am.gl_nodes; ++i) {
            double r = 0.5 * (a + b) + 0.5 * (b - a) * gl.x[i];
            double lw = std::log(gl.w[i] * 0.5 * (b - a) * 2 * r / am.angular) + w.log_omega_gap(1 - r);
            if (lw < -1e6) continue;
            for (int k = 0; k < am.angular; ++k) {
                cplx z = std::polar(r, 2 * kPi * (k + shift) / am.angular);
                pts.push_back({z, lw, f.value(z)});
            }
        }
    return pts;
}

LogReal double_sum(const Generator& f, const std::vector<APoint>& lambdas, const std::vector<APoint>& zs) {
    std::vector<LogReal> outer;
    for (auto& l : lambdas) {
        require_value(l.f);
        std::vector<LogReal> inner;
        for (auto& z : zs) {
            auto v = resolvent_value(z.f, l.f, z.z, l.z, f.log_derivative);
            if (std::isnan(v.log_magnitude)) throw NumericError("resolvent integral: non-finite integrand");
            if (!v.is_zero()) inner.push_back(LogReal(2 * v.log_magnitude + z.log_weight + l.log_weight, 1));
        }
        if (!inner.empty()) outer.push_back(log_sum_exp(inner));
    }
    return outer.empty() ? LogReal() : log_sum_exp(outer);
}

double relative_gap(const LogReal& a, const LogReal& b) {
    if (a.sign == 0 && b.sign == 0) return 0;
    if (a.sign == 0 || b.sign == 0) return 1;
    return -std::expm1(-std::fabs(a.log_magnitude - b.log_magnitude));
}

}  // namespace

std::function<LogComplex(cplx)> resolvent_vector(const Generator& f, cplx lambda) {
    auto fl = f.value(lambda);
    require_value(fl);
    return [f, fl, lambda](cplx z) { return resolvent_value(f.value(z), fl, z, lambda, f.log_derivative); };
}

LogReal resolvent_norm_sq(const Generator& f, cplx lambda, const RadialWeight& w, const DiskMesh& mesh) {
    auto R = resolvent_vector(f, lambda);
    return disk_integral_polar(
        [&](double r, double gap, double phi) {
            auto v = R(std::polar(r, phi));
            return v.is_zero() ? LogReal() : LogReal(2 * v.log_magnitude + w.log_omega_gap(gap), 1);
        },
        mesh);
}

BlockReport resolvent_integral_check(const Generator& f, const RadialWeight& w, const AMesh& mesh) {
    auto P = a_points(f, w, mesh, 0.5), Q = a_points(f, w, mesh, 0.0);
    LogReal lambda_outer = double_sum(f, P, Q), z_outer = double_sum(f, Q, P);
    auto fine = mesh.refined();
    auto Pf = a_points(f, w, fine, 0.5), Qf = a_points(f, w, fine, 0.0);
    LogReal refined = double_sum(f, Pf, Qf);
    double gap = relative_gap(lambda_outer, z_outer), drift = relative_gap(lambda_outer, refined);
    bool finite = std::isfinite(lambda_outer.log_magnitude) || lambda_outer.sign == 0;
    BlockReport rep;
    rep.lemma = "resolvent_integral";
    rep.checks = {detail::make_check("orderings", (0.05 - gap) / 0.05, 0), detail::make_check("refinement", (0.10 - drift) / 0.10, 0),
                  detail::make_check("finite", finite ? 1.0 : -1.0, 0)};
    rep.values = {{"log_A_lambda_outer", lambda_outer.log_magnitude},
                  {"log_A_z_outer", z_outer.log_magnitude},
                  {"log_A_refined", refined.log_magnitude},
                  {"relative_gap", gap},
                  {"drift", drift},
                  {"points", static_cast<double>(P.size())}};
    return rep;
}

}  // namespace berglab
