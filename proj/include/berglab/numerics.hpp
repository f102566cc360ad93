#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace berglab {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Signed real stored as (log|x|, sign); log = -inf with sign 0 encodes zero.
struct LogReal {
    double log_magnitude = kNegInf;
    int sign = 0;

    LogReal() = default;
    LogReal(double logmag, int s);

    static LogReal from_double(double x);
    static LogReal zero() { return {}; }
    static LogReal one() { return {0.0, 1}; }
    static LogReal exp_of(double e) { return {e, 1}; }

    double to_double() const;
    bool is_zero() const { return sign == 0; }

    LogReal operator*(const LogReal& o) const;
    LogReal operator/(const LogReal& o) const;
    LogReal operator-() const { return sign == 0 ? *this : LogReal(log_magnitude, -sign); }
    LogReal inverse() const;
    LogReal pow(double p) const;
};

LogReal operator+(const LogReal& a, const LogReal& b);
LogReal operator-(const LogReal& a, const LogReal& b);
bool operator<(const LogReal& a, const LogReal& b);
bool operator<=(const LogReal& a, const LogReal& b);

// Complex number stored as (log|z|, arg z), arg in (-pi, pi].
struct LogComplex {
    double log_magnitude = kNegInf;
    double phase = 0.0;

    LogComplex() = default;
    LogComplex(double logmag, double ph);

    static LogComplex from_complex(cplx z);
    static LogComplex exp_of(cplx w);

    cplx to_complex() const;
    bool is_zero() const { return log_magnitude == kNegInf; }

    LogComplex operator*(const LogComplex& o) const;
    LogComplex operator/(const LogComplex& o) const;
    LogComplex conj() const { return {log_magnitude, wrap_phase(-phase)}; }
    LogReal real_part() const;
    LogReal imag_part() const;

    static double wrap_phase(double p);
};

LogComplex operator+(const LogComplex& a, const LogComplex& b);

LogReal log_sum_exp(const std::vector<LogReal>& terms);
LogComplex log_sum_exp(const std::vector<LogComplex>& terms);

// Gauss-Legendre nodes/weights on [-1,1].
struct GaussRule {
    std::vector<double> x, w;
};
GaussRule gauss_legendre(int n);

// Polar mesh on the unit disk with cells refined geometrically toward |z| = 1.
struct DiskMesh {
    int gl_nodes = 4;
    int min_angular = 64;
    int levels_per_octave = 1;     // radial cells per halving of 1-r
    double floor = 1e-12;          // smallest 1-r resolved
    int cells_per_unit = 8;        // radial cells on [0, 1/2]
    // angular points for a cell whose outer radius is 1-s; defaults to
    // max(min_angular, ceil(angular_per_inverse_gap / s)) capped.
    double angular_per_inverse_gap = 0.0;
    int max_angular = 1 << 20;
};

struct QuadNode {
    double r, phi, weight;  // weight against dm = dx dy / pi
};

// Radial cells as [a,b] intervals of r, ordered from 0 outward.
std::vector<std::pair<double, double>> radial_cells(const DiskMesh& mesh);
int angular_count(const DiskMesh& mesh, double outer_gap);

// Integral of a log-domain integrand over D against normalized area.
// Cells are accumulated in fixed order.
LogReal disk_integral(const std::function<LogReal(cplx)>& integrand, const DiskMesh& mesh);

// Integrand given in polar form (r, gap = 1 - r, phi); gap is passed
// separately so points near the circle keep full relative accuracy.
LogReal disk_integral_polar(const std::function<LogReal(double r, double gap, double phi)>& integrand,
                            const DiskMesh& mesh);

// Integral over the small disk {|z - c| < rho}, normalized area, with a polar
// rule centered at c; at least 32 nodes.
struct SmallDiskMesh {
    int radial_cells = 8;
    int gl_nodes = 4;
    int angular = 32;
};
LogReal small_disk_integral(const std::function<LogReal(cplx offset)>& integrand, double rho,
                            const SmallDiskMesh& mesh);

// Workers for parallel_for: BERGLAB_THREADS when set (UsageError unless a positive integer), else the hardware count.
int worker_count();
// fn(i) for i in [0, n); the first failing index's exception is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

double bisect_monotone(const std::function<double(double)>& f, double lo, double hi, double target,
                       double tol = 1e-10, int max_iter = 400);

class PiecewiseLinear {
public:
    PiecewiseLinear() = default;
    PiecewiseLinear(std::vector<double> x, std::vector<double> y);

    double operator()(double t) const;
    // slope of the cell to the right of t (last cell beyond the end)
    double right_slope(double t) const;
    double left_slope(double t) const;
    double slope(std::size_t cell) const;

    const std::vector<double>& xs() const { return x_; }
    const std::vector<double>& ys() const { return y_; }
    std::size_t size() const { return x_.size(); }
    bool is_convex(double rel_tol = 1e-12) const;
    bool is_increasing() const;

    double left_extrap_slope = 0.0;
    double right_extrap_slope = 0.0;

private:
    std::vector<double> x_, y_;
    std::size_t cell_of(double t) const;
};

std::string fmt_double(double v);

}  // namespace berglab
