#include "berglab/convexreg.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace berglab {

namespace {

void check_samples(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw UsageError("convex minorant: need >= 2 samples of equal length");
    for (std::size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1])) throw UsageError("convex minorant: x must be strictly increasing");
}

// cross product sign of (b - a) x (c - a)
double turn(double ax, double ay, double bx, double by, double cx, double cy) {
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

struct Knots {
    std::vector<double> x, y;
    double slope(std::size_t i) const {
        std::size_t j = std::min(i, x.size() - 2);
        return (y[j + 1] - y[j]) / (x[j + 1] - x[j]);
    }
    double value(double t) const {
        auto it = std::upper_bound(x.begin(), x.end(), t);
        std::size_t c = it == x.begin() ? 0 : std::min<std::size_t>(it - x.begin() - 1, x.size() - 2);
        return y[c] + slope(c) * (t - x[c]);
    }
};

Knots hull_of(const Knots& k) {
    Knots h;
    for (std::size_t i : lower_hull_indices(k.x, k.y)) {
        h.x.push_back(k.x[i]);
        h.y.push_back(k.y[i]);
    }
    return h;
}

bool violates(const Knots& k, std::size_t i) {
    double s = k.slope(i), b = k.y[i] * k.y[i] / 2;
    return s > b * (1 + 1e-12);
}

}  // namespace

std::vector<std::size_t> lower_hull_indices(const std::vector<double>& x, const std::vector<double>& y) {
    check_samples(x, y);
    std::vector<std::size_t> h;
    for (std::size_t i = 0; i < x.size(); ++i) {
        while (h.size() >= 2) {
            std::size_t a = h[h.size() - 2], b = h.back();
            if (turn(x[a], y[a], x[b], y[b], x[i], y[i]) <= 0)
                h.pop_back();
            else
                break;
        }
        h.push_back(i);
    }
    return h;
}

PiecewiseLinear greatest_convex_minorant(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> hx, hy;
    for (std::size_t i : lower_hull_indices(x, y)) {
        hx.push_back(x[i]);
        hy.push_back(y[i]);
    }
    if (hx.size() == 1) {
        hx.push_back(x.back());
        hy.push_back(y.back());
    }
    return PiecewiseLinear(std::move(hx), std::move(hy));
}

MinorantResult regularize(const std::vector<double>& x, const std::vector<double>& Q, double epsilon0) {
    check_samples(x, Q);
    if (!(epsilon0 > 0 && epsilon0 < 1)) throw UsageError("regularize: epsilon0 must lie in (0,1)");
    for (std::size_t i = 0; i < Q.size(); ++i) {
        if (!(Q[i] > 0) || !std::isfinite(Q[i])) throw UsageError("regularize: Q must be positive and finite");
        if (i && Q[i] < Q[i - 1]) throw UsageError("regularize: Q must be increasing");
    }
    {
        // e^{-eps0 x/2} Q eventually increasing: nondecreasing over the last quarter of the grid
        std::size_t n = x.size(), i = n - 1;
        auto g = [&](std::size_t j) { return std::log(Q[j]) - epsilon0 * x[j] / 2; };
        while (i > 0 && g(i - 1) <= g(i) + 1e-13 * std::fabs(g(i))) --i;
        if (i > (3 * (n - 1)) / 4 || !(g(n - 1) > g(i)))
            throw UsageError("regularize: exp(-eps0 x/2) Q(x) is not eventually increasing on the grid");
    }

    MinorantResult r;
    r.epsilon0 = epsilon0;
    r.x_max = x.back();
    Knots k = hull_of(Knots{x, Q});

    bool any = false;
    for (std::size_t i = 0; i < k.x.size() && !any; ++i) any = violates(k, i);
    if (any) {
        double s0 = std::min(k.slope(0), k.y[0] * k.y[0] / 3);
        k.y[1] = std::min(k.y[1], k.y[0] + s0 * (k.x[1] - k.x[0]));
        k = hull_of(k);
    }

    double a = k.x.front();
    std::size_t cap = 10 * x.size() + 100;
    for (;;) {
        std::size_t b = k.x.size();
        for (std::size_t i = 0; i < k.x.size(); ++i)
            if (k.x[i] >= a && violates(k, i)) {
                b = i;
                break;
            }
        if (b == k.x.size()) break;
        if (static_cast<std::size_t>(r.iterations) >= cap) {
            char buf[200];
            std::snprintf(buf, sizeof buf, "regularize: iteration bound %zu exceeded; last violation at x=%.17g",
                          cap, k.x[b]);
            throw NumericError(buf);
        }
        ++r.iterations;

        std::size_t j = b;
        while (j > 0 && k.x[j - 1] >= a && k.slope(j - 1) > k.y[j] * k.y[j] / 3) --j;
        double c = k.x[j], qc = k.y[j];
        double d = c;
        for (std::size_t m = j; m < k.x.size(); ++m) {
            double s = k.slope(m);
            if (s > k.y[m] * k.y[m] / 3) {
                double cross = std::sqrt(3 * s);
                double end = m + 1 < k.x.size() ? k.x[m + 1] : r.x_max;
                double ym = m + 1 < k.x.size() ? k.y[m + 1] : k.y[m] + s * (end - k.x[m]);
                if (ym * ym / 3 < s) {
                    d = end;
                    continue;
                }
                d = k.x[m] + (cross - k.y[m]) / s;
            }
            break;
        }

        double E = c + 3 / qc;
        Knots g;
        double e = c;
        std::vector<double> ux;
        for (double u = c; u < E; u += (E - u) / 8) {
            if (u > k.x.back()) break;
            ux.push_back(u);
            if (ode_patch(c, qc, u) > k.value(u)) break;
            e = u;
            if (ux.size() > 2000) break;
        }
        std::vector<double> all = k.x;
        all.insert(all.end(), ux.begin(), ux.end());
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        for (double t : all) {
            double v = k.value(t);
            if (t >= c && t < E) v = std::min(v, t == c ? qc : ode_patch(c, qc, t));
            g.x.push_back(t);
            g.y.push_back(v);
        }
        k = hull_of(g);
        double a_next = e;
        for (double t : k.x)
            if (t > e) {
                a_next = t;
                break;
            }
        r.patches.push_back({c, d, e, a_next});
        a = c;
    }

    r.q = PiecewiseLinear(k.x, k.y);
    for (std::size_t i = 0; i < x.size(); ++i) {
        double qi = r.q(x[i]);
        if (std::fabs(qi - Q[i]) <= 1e-9 * Q[i] && r.q.right_slope(x[i]) >= epsilon0 * qi / 2 * (1 - 1e-12))
            r.touch_points.push_back(x[i]);
    }
    return r;
}

LogReal theta_small(const MinorantResult& r, double s) {
    if (!(s > 0 && s <= 1)) throw UsageError("theta_small: s must lie in (0,1]");
    double x = -std::log(s);
    if (x < r.q.xs().front() - 1e-12 || x > r.x_max * (1 + 1e-12))
        throw UsageError("theta_small: log(1/s) outside the regularized domain");
    return LogReal(r.lambda(x), 1);
}

bool Lemma51Report::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const PropertyCheck& c) { return c.pass; });
}

const PropertyCheck& Lemma51Report::get(const std::string& name) const {
    for (auto& c : checks)
        if (c.name == name) return c;
    throw UsageError("Lemma51Report: unknown property " + name);
}

namespace {

struct Worst {
    PropertyCheck p;
    double tol;
    Worst(std::string n, double t) : tol(t) {
        p.name = std::move(n);
        p.margin = std::numeric_limits<double>::infinity();
    }
    void see(double margin, double where) {
        if (margin < p.margin) {
            p.margin = margin;
            p.location = where;
        }
        if (margin < -tol) p.pass = false;
    }
    PropertyCheck done() {
        if (!std::isfinite(p.margin)) p.margin = 0;
        return p;
    }
};

}  // namespace

Lemma51Report verify_lemma51(const MinorantResult& r, const std::vector<double>& x, const std::vector<double>& Q) {
    Lemma51Report rep;
    const auto& q = r.q;
    double e0 = r.epsilon0;

    Worst a("a", 1e-9);
    for (std::size_t i = 0; i < x.size(); ++i) a.see((Q[i] - q(x[i])) / std::max(1.0, Q[i]), x[i]);

    Worst b("b", 0);
    {
        std::size_t n = x.size(), i = n;
        while (i > 0 && std::log(q(x[i - 1])) - e0 * x[i - 1] / 2 >= -1e-12 * x[i - 1]) --i;
        bool tail = n > 0 && i <= (3 * (n - 1)) / 4;
        rep.A = i < n ? x[i] : r.x_max;
        if (!tail) {
            b.p.pass = false;
            b.see(std::log(q(x[n - 1])) - e0 * x[n - 1] / 2, x[n - 1]);
        }
        for (std::size_t j = i; j < n; ++j) b.see(std::log(q(x[j])) - e0 * x[j] / 2, x[j]);
    }

    Worst c("c", 1e-9);
    for (std::size_t i = 0; i < q.size(); ++i) {
        double t = q.xs()[i], v = q.ys()[i];
        double bound = v * v / 2;
        c.see((bound - q.right_slope(t)) / bound, t);
    }

    Worst d("d", 1e-9), e("e", 1e-12), f("f", 1e-9);
    if (r.touch_points.empty()) {
        d.p.pass = false;
        e.p.pass = false;
    }
    for (double t : r.touch_points) {
        auto it = std::lower_bound(x.begin(), x.end(), t);
        double Qt = it != x.end() && *it == t ? Q[it - x.begin()] : std::numeric_limits<double>::quiet_NaN();
        double qt = q(t), qp = q.right_slope(t);
        d.see(std::isnan(Qt) ? -1.0 : -std::fabs(qt - Qt) / Qt, t);
        e.see((qp - e0 * qt / 2) / qt, t);
        double lt = qt * qt, lp = 2 * qt * qp;
        double lo = qp > 0 ? t - qt / qp : -std::numeric_limits<double>::infinity();
        for (double xv : x) {
            if (xv < lo) continue;
            double h = xv - t, lx = q(xv);
            lx *= lx;
            double rhs = lt + h * lp + 0.25 * e0 * h * h * lp;
            f.see((lx - rhs) / std::max({1.0, lx, std::fabs(rhs)}), t);
        }
    }
    rep.checks = {a.done(), b.done(), c.done(), d.done(), e.done(), f.done()};
    return rep;
}

SandwichReport check_sandwich(const MinorantResult& r, const std::vector<double>& s_grid,
                              const std::vector<double>& log_Theta) {
    if (s_grid.size() != log_Theta.size() || s_grid.empty()) throw UsageError("check_sandwich: size mismatch");
    std::vector<std::size_t> ord(s_grid.size());
    for (std::size_t i = 0; i < ord.size(); ++i) ord[i] = i;
    std::sort(ord.begin(), ord.end(), [&](auto i, auto j) { return s_grid[i] < s_grid[j]; });
    SandwichReport rep;
    rep.worst_lower = rep.worst_upper = std::numeric_limits<double>::infinity();
    std::size_t k = 0;
    for (; k < ord.size(); ++k) {
        std::size_t i = ord[k];
        double s = s_grid[i];
        double lt = theta_small(r, s).log_magnitude;
        double low = std::pow(s, -r.epsilon0);
        double tol = 1e-9 * std::max(1.0, std::fabs(lt));
        double ml = lt - low, mu = log_Theta[i] - lt;
        if (ml < -tol || mu < -tol) break;
        rep.worst_lower = std::min(rep.worst_lower, ml);
        rep.worst_upper = std::min(rep.worst_upper, mu);
        rep.threshold_s = s;
    }
    rep.pass = k > 0 && k * 4 >= ord.size();
    if (!std::isfinite(rep.worst_lower)) rep.worst_lower = rep.worst_upper = 0;
    return rep;
}

}  // namespace berglab
