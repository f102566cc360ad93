#include "berglab/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <sstream>
#include <thread>

namespace berglab {

LogReal::LogReal(double logmag, int s) : log_magnitude(logmag), sign(s) {
    if (std::isnan(logmag)) throw NumericError("LogReal: NaN log-magnitude");
    if (logmag == kNegInf || s == 0) {
        log_magnitude = kNegInf;
        sign = 0;
    } else {
        sign = s > 0 ? 1 : -1;
    }
}

LogReal LogReal::from_double(double x) {
    if (std::isnan(x)) throw NumericError("LogReal: NaN input");
    if (x == 0.0) return {};
    return {std::log(std::fabs(x)), x > 0 ? 1 : -1};
}

double LogReal::to_double() const {
    if (sign == 0) return 0.0;
    return sign * std::exp(log_magnitude);
}

LogReal LogReal::operator*(const LogReal& o) const {
    if (sign == 0 || o.sign == 0) return {};
    return {log_magnitude + o.log_magnitude, sign * o.sign};
}

LogReal LogReal::operator/(const LogReal& o) const {
    if (o.sign == 0) throw NumericError("LogReal: division by zero");
    if (sign == 0) return {};
    return {log_magnitude - o.log_magnitude, sign * o.sign};
}

LogReal LogReal::inverse() const { return LogReal::one() / *this; }

LogReal LogReal::pow(double p) const {
    if (sign < 0) throw NumericError("LogReal: power of negative value");
    if (sign == 0) {
        if (p > 0) return {};
        throw NumericError("LogReal: nonpositive power of zero");
    }
    return {p * log_magnitude, 1};
}

namespace {

// log(e^a + s e^b) for a >= b, s = +-1
LogReal combine(double a, int sa, double b, int sb) {
    if (sb == 0) return {a, sa};
    if (sa == 0) return {b, sb};
    if (a < b) {
        std::swap(a, b);
        std::swap(sa, sb);
    }
    double d = b - a;
    if (sa == sb) return {a + std::log1p(std::exp(d)), sa};
    if (d == 0.0) return {};
    return {a + std::log1p(-std::exp(d)), sa};
}

}  // namespace

LogReal operator+(const LogReal& a, const LogReal& b) {
    return combine(a.log_magnitude, a.sign, b.log_magnitude, b.sign);
}

LogReal operator-(const LogReal& a, const LogReal& b) { return a + (-b); }

bool operator<(const LogReal& a, const LogReal& b) {
    if (a.sign != b.sign) return a.sign < b.sign;
    if (a.sign == 0) return false;
    return a.sign > 0 ? a.log_magnitude < b.log_magnitude : a.log_magnitude > b.log_magnitude;
}

bool operator<=(const LogReal& a, const LogReal& b) { return !(b < a); }

double LogComplex::wrap_phase(double p) {
    if (!std::isfinite(p)) throw NumericError("LogComplex: non-finite phase");
    if (p > -kPi && p <= kPi) return p;
    double q = std::remainder(p, 2.0 * kPi);
    if (q <= -kPi) q += 2.0 * kPi;
    return q;
}

LogComplex::LogComplex(double logmag, double ph) : log_magnitude(logmag), phase(0.0) {
    if (std::isnan(logmag)) throw NumericError("LogComplex: NaN log-magnitude");
    if (logmag != kNegInf) phase = wrap_phase(ph);
}

LogComplex LogComplex::from_complex(cplx z) {
    if (z == cplx(0.0, 0.0)) return {};
    return {std::log(std::abs(z)), std::arg(z)};
}

LogComplex LogComplex::exp_of(cplx w) { return {w.real(), w.imag()}; }

cplx LogComplex::to_complex() const {
    if (is_zero()) return {0.0, 0.0};
    return std::polar(std::exp(log_magnitude), phase);
}

LogComplex LogComplex::operator*(const LogComplex& o) const {
    if (is_zero() || o.is_zero()) return {};
    return {log_magnitude + o.log_magnitude, phase + o.phase};
}

LogComplex LogComplex::operator/(const LogComplex& o) const {
    if (o.is_zero()) throw NumericError("LogComplex: division by zero");
    if (is_zero()) return {};
    return {log_magnitude - o.log_magnitude, phase - o.phase};
}

LogReal LogComplex::real_part() const {
    if (is_zero()) return {};
    double c = std::cos(phase);
    if (c == 0.0) return {};
    return {log_magnitude + std::log(std::fabs(c)), c > 0 ? 1 : -1};
}

LogReal LogComplex::imag_part() const {
    if (is_zero()) return {};
    double s = std::sin(phase);
    if (s == 0.0) return {};
    return {log_magnitude + std::log(std::fabs(s)), s > 0 ? 1 : -1};
}

LogComplex operator+(const LogComplex& a, const LogComplex& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    const LogComplex& big = a.log_magnitude >= b.log_magnitude ? a : b;
    const LogComplex& small = a.log_magnitude >= b.log_magnitude ? b : a;
    cplx rel = std::polar(std::exp(small.log_magnitude - big.log_magnitude), small.phase - big.phase);
    cplx s = 1.0 + rel;
    if (s == cplx(0.0, 0.0)) return {};
    return {big.log_magnitude + 0.5 * std::log1p(2.0 * rel.real() + std::norm(rel)), big.phase + std::arg(s)};
}

LogReal log_sum_exp(const std::vector<LogReal>& terms) {
    if (terms.empty()) throw UsageError("log_sum_exp: empty list");
    double m = kNegInf;
    for (const auto& t : terms) m = std::max(m, t.log_magnitude);
    if (m == kNegInf) return {};
    // Kahan-compensated sums of positive and negative parts, shifted by the max.
    double pos = 0, neg = 0, cp = 0, cn = 0;
    for (const auto& t : terms) {
        if (t.sign == 0) continue;
        double v = std::exp(t.log_magnitude - m);
        double& s = t.sign > 0 ? pos : neg;
        double& c = t.sign > 0 ? cp : cn;
        double y = v - c;
        double u = s + y;
        c = (u - s) - y;
        s = u;
    }
    double diff = pos - neg;
    if (diff == 0.0) return {};
    return {m + std::log(std::fabs(diff)), diff > 0 ? 1 : -1};
}

LogComplex log_sum_exp(const std::vector<LogComplex>& terms) {
    if (terms.empty()) throw UsageError("log_sum_exp: empty list");
    double m = kNegInf;
    for (const auto& t : terms) m = std::max(m, t.log_magnitude);
    if (m == kNegInf) return {};
    cplx s = 0;
    for (const auto& t : terms)
        if (!t.is_zero()) s += std::polar(std::exp(t.log_magnitude - m), t.phase);
    if (s == cplx(0.0, 0.0)) return {};
    return {m + std::log(std::abs(s)), std::arg(s)};
}

GaussRule gauss_legendre(int n) {
    if (n < 1) throw UsageError("gauss_legendre: n < 1");
    GaussRule g;
    g.x.resize(n);
    g.w.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1;
            dp = n * (x * p1 - p0) / (x * x - 1);
            double dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-16) break;
        }
        double p0 = 1, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1);
        g.x[n - 1 - i] = x;
        g.w[n - 1 - i] = 2.0 / ((1 - x * x) * dp * dp);
    }
    return g;
}

std::vector<std::pair<double, double>> radial_cells(const DiskMesh& mesh) {
    std::vector<std::pair<double, double>> cells;
    for (int i = 0; i < mesh.cells_per_unit; ++i)
        cells.emplace_back(0.5 * i / mesh.cells_per_unit, 0.5 * (i + 1) / mesh.cells_per_unit);
    // gaps halve per octave; within an octave subdivide geometrically
    double gap = 0.5;
    while (gap > mesh.floor) {
        double ratio = std::pow(0.5, 1.0 / mesh.levels_per_octave);
        double g = gap;
        for (int k = 0; k < mesh.levels_per_octave; ++k) {
            double g2 = k + 1 == mesh.levels_per_octave ? gap * 0.5 : g * ratio;
            cells.emplace_back(1.0 - g, 1.0 - g2);
            g = g2;
        }
        gap *= 0.5;
    }
    return cells;
}

int angular_count(const DiskMesh& mesh, double outer_gap) {
    double m = mesh.min_angular;
    if (mesh.angular_per_inverse_gap > 0) m = std::max(m, std::ceil(mesh.angular_per_inverse_gap / outer_gap));
    return static_cast<int>(std::min<double>(m, mesh.max_angular));
}

namespace {

struct Accum {
    // running sum of sign*exp(l) with rescaling; deterministic for a fixed order
    double m = kNegInf, s = 0;
    void add(const LogReal& t) {
        if (t.sign == 0) return;
        if (t.log_magnitude > m) {
            s = (m == kNegInf ? 0.0 : s * std::exp(m - t.log_magnitude)) + t.sign;
            m = t.log_magnitude;
        } else {
            s += t.sign * std::exp(t.log_magnitude - m);
        }
    }
    LogReal value() const {
        if (m == kNegInf || s == 0) return {};
        return {m + std::log(std::fabs(s)), s > 0 ? 1 : -1};
    }
};

}  // namespace

LogReal disk_integral_polar(const std::function<LogReal(double, double, double)>& integrand,
                            const DiskMesh& mesh) {
    auto gl = gauss_legendre(mesh.gl_nodes);
    auto cells = radial_cells(mesh);
    Accum total;
    for (auto [a, b] : cells) {
        double ga = 1.0 - a, gb = 1.0 - b;
        int M = angular_count(mesh, gb);
        Accum cell;
        for (int i = 0; i < mesh.gl_nodes; ++i) {
            double gap = 0.5 * (ga + gb) - 0.5 * (ga - gb) * gl.x[i];
            double r = 1.0 - gap;
            double base = std::log(gl.w[i] * 0.5 * (b - a) * r * 2.0 / M);
            for (int j = 0; j < M; ++j) {
                double phi = 2.0 * kPi * (j + 0.5) / M;
                LogReal v = integrand(r, gap, phi);
                if (std::isnan(v.log_magnitude) || v.log_magnitude == std::numeric_limits<double>::infinity()) {
                    char buf[128];
                    std::snprintf(buf, sizeof buf, "disk_integral: non-finite integrand at r=%.17g phi=%.17g", r, phi);
                    throw NumericError(buf);
                }
                if (v.sign) cell.add(LogReal(v.log_magnitude + base, v.sign));
            }
        }
        total.add(cell.value());
    }
    return total.value();
}

LogReal disk_integral(const std::function<LogReal(cplx)>& integrand, const DiskMesh& mesh) {
    return disk_integral_polar([&](double r, double, double phi) { return integrand(std::polar(r, phi)); }, mesh);
}

LogReal small_disk_integral(const std::function<LogReal(cplx)>& integrand, double rho,
                            const SmallDiskMesh& mesh) {
    if (!(rho > 0)) throw UsageError("small_disk_integral: radius must be positive");
    if (mesh.radial_cells * mesh.gl_nodes * mesh.angular < 32)
        throw UsageError("small_disk_integral: fewer than 32 nodes");
    auto gl = gauss_legendre(mesh.gl_nodes);
    Accum total;
    for (int c = 0; c < mesh.radial_cells; ++c) {
        double a = rho * c / mesh.radial_cells, b = rho * (c + 1) / mesh.radial_cells;
        Accum cell;
        for (int i = 0; i < mesh.gl_nodes; ++i) {
            double s = 0.5 * (a + b) + 0.5 * (b - a) * gl.x[i];
            double base = std::log(gl.w[i] * 0.5 * (b - a) * s * 2.0 / mesh.angular);
            for (int j = 0; j < mesh.angular; ++j) {
                double phi = 2.0 * kPi * (j + 0.5) / mesh.angular;
                LogReal v = integrand(std::polar(s, phi));
                if (std::isnan(v.log_magnitude) || v.log_magnitude == std::numeric_limits<double>::infinity()) {
                    char buf[160];
                    std::snprintf(buf, sizeof buf,
                                  "small_disk_integral: non-finite integrand at offset %.6g (refine the mesh)", s);
                    throw NumericError(buf);
                }
                if (v.sign) cell.add(LogReal(v.log_magnitude + base, v.sign));
            }
        }
        total.add(cell.value());
    }
    return total.value();
}

int worker_count() {
    const char* env = std::getenv("BERGLAB_THREADS");
    if (env && *env) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1 || v > 4096) throw UsageError("BERGLAB_THREADS must be a positive integer");
        return static_cast<int>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    std::size_t workers = std::min<std::size_t>(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto run = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

double bisect_monotone(const std::function<double(double)>& f, double lo, double hi, double target, double tol,
                       int max_iter) {
    if (!(lo <= hi)) throw UsageError("bisect_monotone: lo > hi");
    double flo = f(lo) - target, fhi = f(hi) - target;
    if (std::fabs(flo) <= tol) return lo;
    if (std::fabs(fhi) <= tol) return hi;
    if ((flo > 0) == (fhi > 0)) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "bisect_monotone: no bracket, f(%.17g)=%.17g, f(%.17g)=%.17g, target %.17g", lo,
                      flo + target, hi, fhi + target, target);
        throw NumericError(buf);
    }
    bool increasing = fhi > flo;
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        double fm = f(mid) - target;
        if (std::fabs(fm) <= tol) return mid;
        if ((fm < 0) == increasing)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

PiecewiseLinear::PiecewiseLinear(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.size() != y_.size() || x_.size() < 2) throw UsageError("PiecewiseLinear: need >= 2 matching knots");
    for (std::size_t i = 1; i < x_.size(); ++i)
        if (!(x_[i] > x_[i - 1])) throw UsageError("PiecewiseLinear: knots must be strictly increasing");
    left_extrap_slope = slope(0);
    right_extrap_slope = slope(x_.size() - 2);
}

double PiecewiseLinear::slope(std::size_t c) const { return (y_[c + 1] - y_[c]) / (x_[c + 1] - x_[c]); }

std::size_t PiecewiseLinear::cell_of(double t) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(i, x_.size() - 2);
}

double PiecewiseLinear::operator()(double t) const {
    if (t < x_.front()) return y_.front() + left_extrap_slope * (t - x_.front());
    if (t > x_.back()) return y_.back() + right_extrap_slope * (t - x_.back());
    std::size_t c = cell_of(t);
    double u = (t - x_[c]) / (x_[c + 1] - x_[c]);
    return y_[c] + u * (y_[c + 1] - y_[c]);
}

double PiecewiseLinear::right_slope(double t) const {
    if (t >= x_.back()) return right_extrap_slope;
    if (t < x_.front()) return left_extrap_slope;
    return slope(cell_of(t));
}

double PiecewiseLinear::left_slope(double t) const {
    if (t <= x_.front()) return left_extrap_slope;
    if (t > x_.back()) return right_extrap_slope;
    auto it = std::lower_bound(x_.begin(), x_.end(), t);
    std::size_t i = static_cast<std::size_t>(it - x_.begin());
    return slope(i - 1);
}

bool PiecewiseLinear::is_convex(double rel_tol) const {
    for (std::size_t c = 1; c + 1 < x_.size(); ++c) {
        double a = slope(c - 1), b = slope(c);
        if (b < a - rel_tol * std::max({1.0, std::fabs(a), std::fabs(b)})) return false;
    }
    return true;
}

bool PiecewiseLinear::is_increasing() const {
    for (std::size_t c = 1; c < x_.size(); ++c)
        if (y_[c] < y_[c - 1]) return false;
    return true;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace berglab
