#pragma once

#include <algorithm>
#include <limits>
#include <string>

#include "berglab/convexreg.hpp"

namespace berglab {
namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline PropertyCheck make_check(const std::string& name, double margin, double where, double tol = 0) {
    PropertyCheck c;
    c.name = name;
    c.margin = margin;
    c.location = where;
    c.pass = margin >= -tol;
    return c;
}

struct Tracker {
    PropertyCheck p;
    double tol;
    Tracker(std::string n, double t = 0) : tol(t) {
        p.name = std::move(n);
        p.margin = kInf;
    }
    void see(double margin, double where) {
        if (margin < p.margin) {
            p.margin = margin;
            p.location = where;
        }
        if (margin < -tol) p.pass = false;
    }
    PropertyCheck done() const {
        PropertyCheck c = p;
        if (!std::isfinite(c.margin)) c.margin = 0;
        return c;
    }
};

// increment p(t + dt) - p(t), exact when both ends share a cell
inline double pl_increment(const PiecewiseLinear& p, double t, double dt) {
    const auto& xs = p.xs();
    double lo = std::min(t, t + dt), hi = std::max(t, t + dt);
    auto it = std::upper_bound(xs.begin(), xs.end(), lo);
    if (it == xs.end() || *it >= hi) return (dt >= 0 ? p.right_slope(t) : p.left_slope(t)) * dt;
    return p(t + dt) - p(t);
}

inline double lambda_increment(const MinorantResult& r, double t, double dt) {
    double dq = pl_increment(r.q, t, dt);
    return dq * (2 * r.q(t) + dq);
}

// log(theta - 2 (log theta)^2) given lambda = log theta; -inf when nonpositive
inline double log_theta_minus_square(double lam) {
    double u = 2 * lam * lam * std::exp(-lam);
    if (u >= 1) return kNegInf;
    return lam + std::log1p(-u);
}

inline double depth_scale(double v) { return std::max(1.0, std::fabs(v)); }

}  // namespace detail
}  // namespace berglab
