#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "berglab/blocks.hpp"
#include "berglab/convexreg.hpp"
#include "berglab/lattice.hpp"
#include "berglab/weights.hpp"

namespace berglab {

struct ConstructConfig {
    double epsilon0 = 0.5;
    double kappa = 0;  // 0 selects exp(-1 - 2/epsilon0)
    int levels = 2;
    std::vector<double> x_floor;  // per-level depth floors; empty -> depth_schedule(x1, levels, log_spacing)
    double x1 = 8;
    double log_spacing = 4;
    double grid_step = 0.01;
    double x_max = 40;
    double gamma_tol = 1e-8;  // |log I - log T| at which bisection stops
    int eta_net_radial = 48;
    int eta_net_angular = 192;
    double effective_kappa() const { return kappa > 0 ? kappa : std::exp(-1 - 2 / epsilon0); }
};

enum class GammaStatus : std::uint8_t { Solved, ClampedLow, ClampedHigh, Omitted, Singular };
const char* status_name(GammaStatus s);

struct GammaSolution {
    double log_gamma = kNegInf;  // gamma itself underflows at depth
    // gamma theta(delta_n) = scaled_base + scaled_offset; the base carries astronomically large targets
    LogReal scaled_base;
    double scaled_offset = 0;
    GammaStatus status = GammaStatus::Solved;
    LogReal log_target, log_integral;  // values of log T and log I
    double residual = 0;               // |I/T - 1|
    LogReal scaled() const { return scaled_base + LogReal::from_double(scaled_offset); }
};
// log I at the solution, with the base kept out of the rounding
LogReal solution_log_integral(const BuildingBlock& b, const RadialWeight& w, const GammaSolution& g);

// Solve int_{|z - r_n| < delta^2} exp[(1 + gamma) h_n - Theta] dm = T for gamma in [0, gamma_n].
GammaSolution solve_gamma(const BuildingBlock& b, const RadialWeight& w, const LogReal& log_target, double tol = 1e-8);

struct ConstructLevel {
    int n = 1;
    BuildingBlock block;
    LatticeLevel lattice;
    std::vector<GammaSolution> gammas;
    double eta = 0.5;
    double tau = 1;
    double x_bound_eq32 = 0;  // -log(eta kappa) + 2n
    double x_floor = 0;
    std::string bound_by;  // "eq32" or "schedule"
    bool active(int k) const;
    int count(GammaStatus s) const;
};

struct ConstructionState {
    RadialWeight weight;
    MinorantResult minorant;
    double kappa = 0, epsilon0 = 0.5;
    ConstructConfig config;
    std::vector<ConstructLevel> levels;
};

// z = anchor (1 - gap) with |anchor| = 1; keeps points near the circle exact.
struct DiskPoint {
    cplx anchor{1, 0};
    cplx gap{1, 0};
    static DiskPoint at(cplx z) { return {1.0, 1.0 - z}; }
    cplx z() const { return anchor * (1.0 - gap); }
    double one_minus_abs() const { return berglab::one_minus_abs(gap); }
};

struct WValue {
    LogReal re, im;
};

// W = sum over levels < upto of sum_k (1 + gamma_{n,k}) H_n(z conj(zeta_{n,k})); terms below
// e^{-800} are dropped. Throws NumericError at a block singularity.
WValue eval_W(const ConstructionState& s, const DiskPoint& p, int upto = -1);
// the same sum with every node visited, in z coordinates
WValue eval_W_direct(const ConstructionState& s, cplx z, int upto = -1);
// W minus the block at (n, k)
WValue eval_W_except(const ConstructionState& s, const DiskPoint& p, int n_index, int k);
LogComplex eval_W_prime(const ConstructionState& s, const DiskPoint& p, int upto = -1);
LogComplex eval_F(const ConstructionState& s, cplx z);

bool in_patch(const ConstructionState& s, const DiskPoint& p, int upto = -1);

// Largest eta in {2^-j} with |V(z) - V(w)| < 1 for |z - w| < eta and exp|V| < 1/eta on the
// net of the closed disk outside `excluded`; throws NumericError if V jumps.
double select_eta(const std::function<LogReal(const DiskPoint&)>& V,
                  const std::function<bool(const DiskPoint&)>& excluded, int net_radial = 48, int net_angular = 192);

struct DepthChoice {
    double x = 0, bound_eq32 = 0, floor = 0;
    std::string bound_by;
};
DepthChoice select_next_x(const MinorantResult& m, double eta, double kappa, int n, double floor);

ConstructionState init_state(const RadialWeight& w, const ConstructConfig& cfg);
// appends one level; floor overrides the configured schedule when positive
void extend_state(ConstructionState& s, double floor = 0);
ConstructionState build_construction(const RadialWeight& w, const ConstructConfig& cfg);

// (35): sup |V_{n+1} - V_n| / delta_n on |z| <= 1 - delta_n e^{2/eps0}, and patch disjointness
BlockReport verify_level_increment(const ConstructionState& s, int n_index);

struct DiskMass {
    int n = 0, k = 0;
    LogReal mass;  // the integral over D_{n,k}
    double log_ratio = 0;  // log(mass n^2 N_n)
};
// mass of |F| e^{-Theta} on D_{n,k}: exp(W except the block at its center) times the concentration integral
DiskMass disk_mass(const ConstructionState& s, int n_index, int k);

BlockReport verify_concentration(const ConstructionState& s, int n_index);

struct DecayPoint {
    int n = 0;
    cplx xi;
    double one_minus_abs = 0;
    LogReal log_abs_F;  // Re W
    LogReal threshold;  // -theta(delta_n)/2
    bool found = false;
};
std::vector<DecayPoint> find_decay_points(const ConstructionState& s);

BlockReport verify_norm_integrals(const ConstructionState& s);

struct PairState {
    ConstructionState first, second;
};
PairState build_interleaved_pair(const RadialWeight& w, const ConstructConfig& cfg, double offset = 4);
// (42a) per family and (42b) at every center of the other family
BlockReport verify_pair(const PairState& p);

struct SmoothnessConfig {
    int pairs = 10000;
    std::uint64_t seed = 1;
    int coarse_radial = 12, coarse_angular = 24;
};
BlockReport verify_smoothness_functional(const ConstructionState& s, const SmoothnessConfig& cfg = {});

}  // namespace berglab
