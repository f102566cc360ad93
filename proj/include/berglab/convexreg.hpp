#pragma once

#include <string>
#include <vector>

#include "berglab/numerics.hpp"

namespace berglab {

// Lower convex hull of (x_i, y_i), returned as a PiecewiseLinear on the hull vertices.
PiecewiseLinear greatest_convex_minorant(const std::vector<double>& x, const std::vector<double>& y);
// indices of hull vertices
std::vector<std::size_t> lower_hull_indices(const std::vector<double>& x, const std::vector<double>& y);

struct Patch {
    double c, d, e, a_next;  // start, end of the q' > q^2/3 run, end of ODE piece, rejoin point
};

struct MinorantResult {
    PiecewiseLinear q;             // sqrt of the regularized lambda
    std::vector<double> touch_points;
    double epsilon0 = 0.5;
    double x_max = 0;
    int iterations = 0;
    std::vector<Patch> patches;

    double lambda(double x) const {
        double v = q(x);
        return v * v;
    }
    // right derivative of lambda = q^2
    double lambda_prime(double x) const { return 2 * q(x) * q.right_slope(x); }
    double lambda_prime_left(double x) const { return 2 * q(x) * q.left_slope(x); }
};

// Q sampled on increasing x with x_0 = 0 ... x_max.
MinorantResult regularize(const std::vector<double>& x, const std::vector<double>& Q, double epsilon0);

// theta(s) = exp[lambda(log 1/s)] as a log-domain value
LogReal theta_small(const MinorantResult& r, double s);

struct PropertyCheck {
    std::string name;
    bool pass = true;
    double margin = 0;    // worst normalized margin (negative = violation)
    double location = 0;  // x where the worst margin occurs
};

struct Lemma51Report {
    std::vector<PropertyCheck> checks;  // a, b, c, d, e, f in order
    double A = 0;                       // start of e^{eps0 x / 2} <= q
    bool all_pass() const;
    const PropertyCheck& get(const std::string& name) const;
};

Lemma51Report verify_lemma51(const MinorantResult& r, const std::vector<double>& x, const std::vector<double>& Q);

// f(x) = 3 / (c + 3/q_c - x)
inline double ode_patch(double c, double qc, double x) { return 3.0 / (c + 3.0 / qc - x); }

struct SandwichReport {
    bool pass = false;
    double threshold_s = 0;  // sandwich holds for s below this
    double worst_lower = 0, worst_upper = 0;
};
// exp(s^{-eps0}) <= theta(s) <= Theta(s); log_Theta(s) given by the caller
SandwichReport check_sandwich(const MinorantResult& r, const std::vector<double>& s_grid,
                              const std::vector<double>& log_Theta);

}  // namespace berglab
