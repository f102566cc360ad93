#pragma once

#include <string>
#include <vector>

#include "berglab/convexreg.hpp"
#include "berglab/numerics.hpp"
#include "berglab/weights.hpp"

namespace berglab {

// Points are passed in gap coordinates w = 1 - z, which keeps full relative
// precision near z = 1.
inline cplx to_gap(cplx z) { return 1.0 - z; }
// 1 - |z| for z = 1 - w
double one_minus_abs(cplx w);

struct BuildingBlock {
    double x_n = 0;
    double lam = 0;        // lambda(x_n)
    double lam_prime = 0;  // lambda'(x_n)
    double delta_n = 0;    // e^{-x_n}
    double r_n = 0;        // 1 - delta_n
    double log_gamma_n = 0;
    double gamma_n = 0;     // e^{-lam/10}, may underflow to 0
    double gamma_used = 0;  // in [0, gamma_n]
};

BuildingBlock make_block(double x_n, double lam, double lam_prime);
// Block at a touch point: lam = Lambda(x_n) and lam' = Lambda'(x_n), the latter
// clamped into the subdifferential of the regularized lambda.
BuildingBlock block_at_touch(const MinorantResult& r, const RadialWeight& w, double x_n);

// F_alpha(z) = (1 - z)^{-alpha}
LogComplex f_alpha(double alpha, cplx z);
LogComplex f_alpha_gap(double alpha, cplx w);

struct BlockValue {
    LogComplex H;
    LogReal h;
};
BlockValue block_eval(const BuildingBlock& b, cplx z);
BlockValue block_eval_gap(const BuildingBlock& b, cplx w);
// H'_n(z) = lam' H_n(z) / (1 - z)
LogComplex block_derivative_gap(const BuildingBlock& b, cplx w);

struct BlockReport {
    std::string lemma;
    BuildingBlock block;
    std::vector<PropertyCheck> checks;
    bool below_regime = false;  // x_n below the asymptotic depth; failures are not errors
    double c_theta = 0;         // empirical radius for the lower bound, when scanned
    std::vector<std::pair<std::string, double>> values;
    bool all_pass() const;
    const PropertyCheck& get(const std::string& name) const;
};

constexpr double kDefaultMinDepth = 8.0;

// Sample points (gap coordinates) for scanning a block: geometric in |w| around
// delta_n, all angles, plus a ring just outside |z - r_n| = delta_n^2.
std::vector<cplx> block_grid(const BuildingBlock& b, int n_radii = 120, int n_angles = 96);

BlockReport verify_majorants(const BuildingBlock& b, const MinorantResult& r, const std::vector<cplx>& gap_points,
                             double min_depth = kDefaultMinDepth);

// log of int_{|z - r_n| < delta^2} exp[(1 + gamma) h_n - Theta(1 - |z|)] dm, with the peak
// handled in scaled local coordinates. log_scaled_gamma = log(gamma theta(delta_n)).
struct ConcentrationIntegral {
    LogReal log_integral;  // may be astronomically large; kept in log form
    std::string method;    // "laplace" or "edge_bound"
    double peak_offset = 0;  // radial peak position in units of delta_n
    LogReal excess;          // log_integral - gamma theta(delta_n)
};
ConcentrationIntegral concentration_integral(const BuildingBlock& b, const RadialWeight& w, double log_scaled_gamma);

BlockReport verify_block_aux(const BuildingBlock& b, const RadialWeight& w, double epsilon0,
                             double min_depth = kDefaultMinDepth);

BlockReport verify_theta_regularity(const MinorantResult& r, const std::vector<double>& s_grid);

BlockReport pair_estimates(const BuildingBlock& b, const MinorantResult& r, cplx z, cplx dz);
BlockReport ratio_estimates(const BuildingBlock& b, const MinorantResult& r, cplx z, cplx dxi);

}  // namespace berglab
