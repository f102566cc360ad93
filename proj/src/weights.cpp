#include "berglab/weights.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace berglab {

RadialWeight RadialWeight::unit() { return RadialWeight{}; }

RadialWeight RadialWeight::single_exp(double beta, double epsilon0) {
    if (!(beta >= 1)) throw UsageError("single_exp weight needs beta >= 1");
    RadialWeight w;
    w.family_ = WeightFamily::SingleExp;
    w.beta_ = beta;
    w.eps0_ = epsilon0;
    return w;
}

RadialWeight RadialWeight::double_exp(double c, double beta, double epsilon0) {
    if (!(c > 0) || !(beta > 0)) throw UsageError("double_exp weight needs c > 0, beta > 0");
    RadialWeight w;
    w.family_ = WeightFamily::DoubleExp;
    w.c_ = c;
    w.beta_ = beta;
    w.eps0_ = epsilon0;
    return w;
}

RadialWeight RadialWeight::sampled(std::vector<double> s, std::vector<double> l, double epsilon0) {
    if (s.size() != l.size() || s.size() < 2) throw UsageError("sampled weight: need >= 2 rows");
    std::vector<std::pair<double, double>> rows;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!(s[i] > 0 && s[i] < 1)) throw UsageError("sampled weight: one_minus_t must lie in (0,1)");
        if (!(l[i] > 0)) throw UsageError("sampled weight: log_one_over_omega must be positive");
        rows.emplace_back(-std::log(s[i]), std::log(l[i]));
    }
    std::sort(rows.begin(), rows.end());
    std::vector<double> x, y;
    for (auto& [a, b] : rows) {
        if (!x.empty() && !(a > x.back())) throw UsageError("sampled weight: duplicate one_minus_t");
        if (!y.empty() && b < y.back()) throw UsageError("sampled weight: omega must be decreasing");
        x.push_back(a);
        y.push_back(b);
    }
    RadialWeight w;
    w.family_ = WeightFamily::Sampled;
    w.eps0_ = epsilon0;
    w.table_ = PiecewiseLinear(std::move(x), std::move(y));
    return w;
}

RadialWeight RadialWeight::from_csv(std::istream& in, double epsilon0) {
    std::string line;
    if (!std::getline(in, line)) throw UsageError("sampled weight csv: empty input");
    if (!line.empty() && line.back() == '\r') throw UsageError("sampled weight csv: CRLF line endings");
    if (line != "one_minus_t,log_one_over_omega")
        throw UsageError("sampled weight csv: header must be one_minus_t,log_one_over_omega");
    std::vector<double> s, l;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        double a, b;
        char extra;
        if (std::sscanf(line.c_str(), "%lf,%lf%c", &a, &b, &extra) != 2)
            throw UsageError("sampled weight csv: bad row " + std::to_string(row));
        s.push_back(a);
        l.push_back(b);
    }
    return sampled(std::move(s), std::move(l), epsilon0);
}

std::string RadialWeight::family_name() const {
    switch (family_) {
        case WeightFamily::Unit: return "unit";
        case WeightFamily::SingleExp: return "single_exp";
        case WeightFamily::DoubleExp: return "double_exp";
        case WeightFamily::Sampled: return "sampled";
    }
    return "?";
}

double RadialWeight::Lambda(double x) const {
    switch (family_) {
        case WeightFamily::Unit: return kNegInf;
        case WeightFamily::SingleExp: return beta_ * x;
        case WeightFamily::DoubleExp: return c_ * std::exp(beta_ * x);
        case WeightFamily::Sampled: return table_(x);
    }
    return 0;
}

double RadialWeight::Lambda_prime(double x) const {
    switch (family_) {
        case WeightFamily::Unit: return 0;
        case WeightFamily::SingleExp: return beta_;
        case WeightFamily::DoubleExp: return beta_ * c_ * std::exp(beta_ * x);
        case WeightFamily::Sampled: return table_.right_slope(x);
    }
    return 0;
}

double RadialWeight::Lambda_second(double x) const {
    switch (family_) {
        case WeightFamily::DoubleExp: return beta_ * beta_ * c_ * std::exp(beta_ * x);
        default: return 0;
    }
}

double RadialWeight::Lambda_increment(double x, double t) const {
    switch (family_) {
        case WeightFamily::Unit: return 0;
        case WeightFamily::SingleExp: return beta_ * t;
        case WeightFamily::DoubleExp: return Lambda(x) * std::expm1(beta_ * t);
        case WeightFamily::Sampled: {
            // exact inside one cell
            const auto& xs = table_.xs();
            if (x >= xs.front() && x <= xs.back() && x + t >= xs.front() && x + t <= xs.back()) {
                double sl = t >= 0 ? table_.right_slope(x) : table_.left_slope(x);
                double lo = std::min(x, x + t), hi = std::max(x, x + t);
                auto it = std::upper_bound(xs.begin(), xs.end(), lo);
                if (it == xs.end() || *it >= hi) return sl * t;
            }
            return table_(x + t) - table_(x);
        }
    }
    return 0;
}

double RadialWeight::log_Lambda(double x) const {
    switch (family_) {
        case WeightFamily::Unit: return kNegInf;
        case WeightFamily::SingleExp: return std::log(beta_ * x);
        case WeightFamily::DoubleExp: return std::log(c_) + beta_ * x;
        case WeightFamily::Sampled: return std::log(table_(x));
    }
    return 0;
}

double RadialWeight::log_omega_gap(double s) const {
    switch (family_) {
        case WeightFamily::Unit: return 0;
        case WeightFamily::SingleExp: return -std::pow(s, -beta_);
        case WeightFamily::DoubleExp: return -std::exp(c_ * std::pow(s, -beta_));
        case WeightFamily::Sampled: return -std::exp(table_(-std::log(s)));
    }
    return 0;
}

LogReal theta_big(const RadialWeight& w, double s) {
    if (!(s > 0 && s < 1)) throw UsageError("theta_big: s must lie in (0,1)");
    if (w.family() == WeightFamily::Unit) return LogReal::zero();
    return LogReal(w.Lambda(-std::log(s)), 1);
}

double lambda_big(const RadialWeight& w, double x) {
    if (!(x >= 0)) throw UsageError("lambda_big: x must be >= 0");
    double L = w.Lambda(x);
    if (!(L > 0) || !std::isfinite(L)) {
        char buf[120];
        std::snprintf(buf, sizeof buf, "lambda_big: Theta <= 1 at x=%.6g, log log undefined", x);
        throw NumericError(buf);
    }
    return L;
}

LogReal MomentSequence::at(int n) const {
    if (n < 0 || n > max_n()) throw UsageError("moment index out of computed range");
    return LogReal(log_values[n], 1);
}

namespace {

DiskMesh moment_mesh() {
    DiskMesh m;
    m.cells_per_unit = 32;
    m.levels_per_octave = 8;
    m.floor = 1e-14;
    m.min_angular = 1;
    return m;
}

}  // namespace

LogReal moment(const RadialWeight& w, int n) {
    if (n < 0) throw UsageError("moment: n must be >= 0");
    auto v = disk_integral_polar(
        [&](double, double gap, double) { return LogReal(2.0 * n * std::log1p(-gap) + w.log_omega_gap(gap), 1); },
        moment_mesh());
    if (v.is_zero()) throw NumericError("moment: quadrature returned zero");
    return v;
}

MomentSequence moments(const RadialWeight& w, int max_n) {
    MomentSequence m;
    for (int n = 0; n <= max_n; ++n) m.log_values.push_back(moment(w, n).log_magnitude);
    return m;
}

LogReal extend_bilateral(const MomentSequence& m, int n) {
    if (n >= 0) return m.at(n);
    int k = -n - 1;
    if (k > m.max_n()) throw UsageError("extend_bilateral: index outside computed moments");
    return LogReal(-m.log_values[k], 1);
}

LogReal tilde_log_inverse_gap(const RadialWeight& w, double s) {
    double L = w.Lambda(-std::log(s));
    if (!(L > 0)) {
        char buf[120];
        std::snprintf(buf, sizeof buf, "tilde_weight: log 1/omega <= 1 at radius %.17g", 1 - s);
        throw UsageError(buf);
    }
    return LogReal(L + std::log1p(-L * L * std::exp(-L)), 1);
}

LogReal tilde_weight(const RadialWeight& w, double z_abs) {
    if (!(z_abs >= 0 && z_abs < 1)) throw UsageError("tilde_weight: |z| must lie in [0,1)");
    auto li = tilde_log_inverse_gap(w, 1 - z_abs);
    return LogReal(-std::exp(li.log_magnitude), 1);
}

std::vector<double> default_x_grid(double x_max, int n) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = 1.0 + (x_max - 1.0) * i / (n - 1);
    return g;
}

GrowthReport check_condition_10(const RadialWeight& w, const std::vector<double>& x_grid, double epsilon0) {
    GrowthReport r;
    for (double x : x_grid) {
        double ll = w.log_Lambda(x);
        if (!std::isfinite(ll)) continue;
        r.x.push_back(x);
        r.log_quantity.push_back(-epsilon0 * x + ll);
    }
    std::size_t n = r.x.size();
    if (n < 4) {
        r.note = "grid too short";
        return r;
    }
    std::size_t i = n - 1;
    while (i > 0 && r.log_quantity[i - 1] <= r.log_quantity[i] + 1e-13 * std::fabs(r.log_quantity[i])) --i;
    r.threshold_x = r.x[i];
    bool tail_long = i <= (3 * (n - 1)) / 4;
    bool grows = r.log_quantity[n - 1] > r.log_quantity[i] + 1e-12;
    r.pass = tail_long && grows;
    r.note = r.pass ? "increasing beyond threshold" : "no increasing tail on the grid";
    return r;
}

double derived_log_omega_bound(double x, double alpha, long long n_max) {
    double lx = std::log(x), best = std::numeric_limits<double>::infinity();
    for (long long n = 0; n <= n_max; ++n) {
        double dn = static_cast<double>(n);
        double v = std::log1p(dn) - dn / std::pow(std::log(dn + 2), alpha) - (2 * dn + 2) * lx;
        best = std::min(best, v);
    }
    return best;
}

double derived_log_omega_bound_wide(double x, double alpha) {
    double best = derived_log_omega_bound(x, alpha, 1000);
    double lx = std::log(x);
    for (double n = 1000; n < 1e300; n *= 1.001) {
        double v = std::log1p(n) - n / std::pow(std::log(n + 2), alpha) - (2 * n + 2) * lx;
        best = std::min(best, v);
        if (v > best + 1e3 && n > 1e6) break;
    }
    return best;
}

MomentBoundReport check_condition_10k(const MomentSequence& m, double alpha, const std::vector<double>& x_points) {
    MomentBoundReport r;
    r.pass = true;
    r.worst_margin = std::numeric_limits<double>::infinity();
    for (int n = 0; n <= m.max_n(); ++n) {
        double bound = -n / std::pow(std::log(2.0 + n), alpha);
        double margin = bound - m.log_values[n];
        if (margin < r.worst_margin) {
            r.worst_margin = margin;
            r.worst_n = n;
        }
        if (margin < -1e-12 * std::max(1.0, std::fabs(bound))) r.pass = false;
    }
    for (double x : x_points) {
        r.x.push_back(x);
        r.log_omega_bound.push_back(derived_log_omega_bound_wide(x, alpha));
    }
    return r;
}

void write_moments_csv(std::ostream& out, const MomentSequence& m) {
    out << "n,log_Omega,Omega\n";
    for (int n = 0; n <= m.max_n(); ++n) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", n, m.log_values[n], std::exp(m.log_values[n]));
        out << buf;
    }
}

}  // namespace berglab
