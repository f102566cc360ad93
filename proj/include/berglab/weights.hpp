#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "berglab/numerics.hpp"

namespace berglab {

enum class WeightFamily { Unit, SingleExp, DoubleExp, Sampled };

// Radial weight omega(t), t = |z|. Families:
//   Unit       omega = 1 (tests only)
//   SingleExp  omega = exp(-1/(1-t)^beta)
//   DoubleExp  omega = exp(-exp(c/(1-t)^beta))
//   Sampled    log 1/omega given on a geometric grid in 1-t, piecewise linear
//              in (log(1-t), log log 1/omega)
class RadialWeight {
public:
    static RadialWeight unit();
    static RadialWeight single_exp(double beta, double epsilon0 = 0.5);
    static RadialWeight double_exp(double c, double beta, double epsilon0 = 0.5);
    static RadialWeight sampled(std::vector<double> one_minus_t, std::vector<double> log_one_over_omega,
                                double epsilon0 = 0.5);
    static RadialWeight from_csv(std::istream& in, double epsilon0 = 0.5);

    WeightFamily family() const { return family_; }
    std::string family_name() const;
    double epsilon0() const { return eps0_; }
    double c() const { return c_; }
    double beta() const { return beta_; }

    // log Theta(e^{-x}) = Lambda(x); -inf for the unit weight.
    double Lambda(double x) const;
    double Lambda_prime(double x) const;
    double Lambda_second(double x) const;
    // Lambda(x + t) - Lambda(x), accurate for small |t|
    double Lambda_increment(double x, double t) const;
    // log Lambda(x), finite even where Lambda overflows
    double log_Lambda(double x) const;

    // log omega(t) expressed through the gap s = 1 - t; may be -inf.
    double log_omega_gap(double s) const;

    const PiecewiseLinear& samples() const { return table_; }

private:
    WeightFamily family_ = WeightFamily::Unit;
    double c_ = 1, beta_ = 1, eps0_ = 0.5;
    PiecewiseLinear table_;  // x = -log s  ->  Lambda
};

// Theta(s) = log 1/omega(1-s) as a log-domain value.
LogReal theta_big(const RadialWeight& w, double s);
// Lambda(x) = log Theta(e^{-x})
double lambda_big(const RadialWeight& w, double x);

struct MomentSequence {
    std::vector<double> log_values;  // log Omega(n), n = 0..max_n
    int max_n() const { return static_cast<int>(log_values.size()) - 1; }
    LogReal at(int n) const;
};

MomentSequence moments(const RadialWeight& w, int max_n);
LogReal moment(const RadialWeight& w, int n);
LogReal extend_bilateral(const MomentSequence& m, int n);

// omega-tilde(|z|) with log 1/omega-tilde = log 1/omega - (log log 1/omega)^2
LogReal tilde_weight(const RadialWeight& w, double z_abs);
// same through the gap s = 1 - |z|: returns log 1/omega-tilde as LogReal
LogReal tilde_log_inverse_gap(const RadialWeight& w, double s);

struct GrowthReport {
    bool pass = false;
    double threshold_x = 0;  // start of the increasing tail
    std::vector<double> x, log_quantity;
    std::string note;
};

// (1-t)^eps0 log log 1/omega(t) = exp(-eps0 x) Lambda(x) on the x grid
GrowthReport check_condition_10(const RadialWeight& w, const std::vector<double>& x_grid, double epsilon0);
std::vector<double> default_x_grid(double x_max = 2000, int n = 4001);

struct MomentBoundReport {
    bool pass = false;
    int worst_n = -1;
    double worst_margin = 0;  // min over n of [bound - log Omega(n)]
    std::vector<double> x, log_omega_bound;
};

MomentBoundReport check_condition_10k(const MomentSequence& m, double alpha,
                                      const std::vector<double>& x_points = {0.5, 0.7, 0.9, 0.95, 0.99});
// log of min_n (n+1) exp[-n/(log(n+2))^alpha] / x^{2n+2} over 0 <= n <= n_max
double derived_log_omega_bound(double x, double alpha, long long n_max);
// same minimum with n searched on a geometric ladder (for x very close to 1)
double derived_log_omega_bound_wide(double x, double alpha);

void write_moments_csv(std::ostream& out, const MomentSequence& m);

}  // namespace berglab
