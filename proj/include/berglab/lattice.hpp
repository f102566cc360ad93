#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "berglab/blocks.hpp"
#include "berglab/numerics.hpp"

namespace berglab {

double pseudo_hyperbolic(cplx z, cplx w);

enum class SampleRule { Centers, Perturbed, Minimizer };

struct LevelRule {
    SampleRule kind = SampleRule::Centers;
    std::uint64_t seed = 0;
    std::function<double(cplx)> log_abs_q;  // minimized over a 32-point net for Minimizer
    static LevelRule centers() { return {}; }
    static LevelRule perturbed(std::uint64_t seed) { return {SampleRule::Perturbed, seed, {}}; }
    static LevelRule minimizer(std::function<double(cplx)> f) { return {SampleRule::Minimizer, 0, std::move(f)}; }
};

struct LatticeLevel {
    int n = 1;
    double x_n = 0;      // -log(1 - r_n)
    double delta_n = 0;  // 1 - r_n
    double r_n = 0;
    int N = 0;
    double kappa = 0;
    std::vector<cplx> nodes;
    std::vector<cplx> samples;
};

// The 32 offsets (in units of the patch radius) of the fixed net in D_{n,k}.
const std::vector<cplx>& patch_net();

LatticeLevel build_level(double kappa, double r_n, const LevelRule& rule, int n = 1);
LatticeLevel build_level_depth(double kappa, double x_n, const LevelRule& rule, int n = 1);

struct SubsetMask {
    const LatticeLevel* level = nullptr;
    std::vector<int> selected;
    double sigma() const;
    static SubsetMask full(const LatticeLevel& l);
};

// prod (z - a)/(1 - conj(a) z)
LogComplex blaschke_eval(const std::vector<cplx>& points, cplx z);
// |B'(z_j)| = prod_{k != j} rho(z_j, z_k) / (1 - |z_j|^2)
LogReal node_derivative(const std::vector<cplx>& points, std::size_t j);
// complex B'(z_j) for the product over points (z_j a zero)
LogComplex node_derivative_complex(const std::vector<cplx>& points, std::size_t j);
// comparator (z^N - r^N)/(1 - r^N z^N)
LogComplex comparator_eval(const LatticeLevel& l, cplx z);

std::vector<cplx> selected_points(const SubsetMask& m);

BlockReport verify_lemma_tl8(const LatticeLevel& l, double r, double eps, double min_depth = kDefaultMinDepth);
BlockReport verify_lemma_tl9(const SubsetMask& m, double r, double eps, double min_depth = kDefaultMinDepth);

struct InterpolationReport {
    cplx lhs, rhs;
    double residual = 0;
    int contour_points = 0;
    int nodes_inside = 0;
};
// masks over consecutive levels; f holomorphic and bounded
InterpolationReport interpolation_identity(const std::vector<SubsetMask>& masks, const std::function<cplx(cplx)>& f,
                                           cplx z, double r, int contour_points = 0);

// x_{n+1} = max(2 x_n, x_n + log_spacing)
std::vector<double> depth_schedule(double x1, int levels, double log_spacing = 4.0);

BlockReport growth_bound_check(const std::vector<LatticeLevel>& levels, const std::function<cplx(cplx)>& f, double p,
                               double min_depth = kDefaultMinDepth);

}  // namespace berglab
