#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "berglab/blocks.hpp"
#include "berglab/construct.hpp"
#include "berglab/weights.hpp"

namespace berglab {

// Point masses of |f|^2 omega at r e^{i phase_k}, standing in for mass the mesh cannot resolve.
struct AtomRing {
    double r = 0;
    std::vector<double> phase, log_mass;
};

struct Generator {
    std::function<LogComplex(cplx)> value;
    std::function<cplx(cplx)> log_derivative;  // f'/f
    std::vector<AtomRing> atoms;

    static Generator polynomial(std::vector<cplx> coeffs);
    static Generator constant(cplx c = 1.0);
};

// f = F^{1/p} = exp(W/p); atoms carry the mass of |F|^{2/p} e^{-Theta} on each D_{n,k} (p = 2 only)
Generator generator_from_state(const ConstructionState& s, double p = 2);

// 1 - r below which omega < exp(-cut); the quadrature region stops there
double weight_floor(const RadialWeight& w, double log_cut = 2000);
DiskMesh gram_mesh(const RadialWeight& w, int levels_per_octave = 2);

LogComplex inner_product(const std::function<LogComplex(cplx)>& f, const std::function<LogComplex(cplx)>& g,
                         const RadialWeight& w, const DiskMesh& mesh);

struct GramSystem {
    int N = 0;
    Eigen::MatrixXcd G;   // <z^j f, z^l f>
    Eigen::VectorXcd b;   // <target, z^j f>
    double target_norm_sq = 0;  // quadrature part
    LogReal target_atoms;       // atom part, kept apart since it may overflow
    double ridge = 0;     // relative to the diagonally scaled matrix
    double hermitian_error = 0, min_eig_rel = 0;
};

// target defaults to 1; atoms of target and f contribute to the norms but never to b
GramSystem build_gram(const Generator& f, const RadialWeight& w, int N, const DiskMesh& mesh,
                      const Generator* target = nullptr);

struct DistanceSolve {
    double distance = 0, distance_sq = 0;
    LogReal log_distance;  // d itself in log form
    double residual = 0, condition = 0;
};
// distance to span{z^j f : j <= n}; throws NumericError when the scaled solve misses 1e-8
DistanceSolve solve_distance(const GramSystem& g, int n);
std::vector<DistanceSolve> distance_profile(const GramSystem& g);

double cyclicity_distance(const Generator& f, const RadialWeight& w, int N, const DiskMesh& mesh);
double subspace_distance(const Generator& g, const Generator& f, const RadialWeight& w, int N, const DiskMesh& mesh);

struct BilateralSequence {
    int M = 0;
    std::vector<cplx> c;  // c[n + M], n in [-M, M]
    const MomentSequence* moments = nullptr;
};
LogReal bilateral_norm(const BilateralSequence& seq);

std::function<LogComplex(cplx)> resolvent_vector(const Generator& f, cplx lambda);
LogReal resolvent_norm_sq(const Generator& f, cplx lambda, const RadialWeight& w, const DiskMesh& mesh);

struct AMesh {
    int cells_per_unit = 6;
    int levels_per_octave = 1;
    int gl_nodes = 3;
    int angular = 40;
    AMesh refined() const { return {2 * cells_per_unit, 2 * levels_per_octave, gl_nodes, 2 * angular}; }
};
// the double integral of |1 - f(z)/f(lambda)|^2 / |lambda - z|^2 omega(lambda) omega(z) with lambda outer,
// then z outer, on staggered grids; drift against the refined mesh
BlockReport resolvent_integral_check(const Generator& f, const RadialWeight& w, const AMesh& mesh = {});

}  // namespace berglab
