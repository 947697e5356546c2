#pragma once

#include <map>
#include <optional>
#include <string>

#include "gausstest/symplectic.hpp"

namespace gausstest {

// c = 3 * 2^9 * 3098 in the lower bound on the distance to pure Gaussian states.
inline constexpr double kLowerBoundConstant = 3.0 * 512.0 * 3098.0;

struct BoundReport {
    std::string which;
    double lower = 0.0;
    double upper_raw = 0.0;
    double upper = 0.0;  // min(1, upper_raw)
    std::optional<double> exact;
    std::map<std::string, double> params;

    // lower <= exact <= upper, with a small slack for rounding.
    bool sandwich_ok(double slack = 1e-12) const;
};

// First and second moments plus energy data, as needed by the bounds.
struct StateMoments {
    RVec mean;
    RMat cov;
    double energy = 0.0;     // <E>
    double energy_sq = 0.0;  // <E^2>
    bool pure_gaussian = false;
};

StateMoments state_moments(const FockState& s, double leakage_bound = kDefaultLeakageBound);
StateMoments gaussian_moments(const GaussianState& g);

BoundReport gaussian_pair_bounds(const GaussianState& g1, const GaussianState& g2);
BoundReport general_pair_bounds(const StateMoments& a, const StateMoments& b);

// eps_V > 0 switches to the perturbed forms, in which nu are estimated values.
BoundReport pure_gaussian_set_distance_bounds(const RVec& nu, int n, double E,
                                              std::optional<double> eps_v = std::nullopt);

struct WilliamsonPerturbation {
    double bound_inf = 0.0;   // sqrt(K1 K2) ||V1 - V2||_inf
    double bound_two = 0.0;   // sqrt(K1 K2) ||V1 - V2||_2
    double gap_inf = 0.0;     // ||D1 - D2||_inf computed directly
    double gap_two = 0.0;     // ||D1 - D2||_2 computed directly
};

WilliamsonPerturbation williamson_perturbation_bound(const RMat& v1, const RMat& v2);

double hardness_constant_c_nE(double nE);
double gaussianification_prefactor(double nE);

struct GaussianificationBounds {
    BoundReport report;  // exact = d(rho, G(rho)); upper = prefactor * sqrt(set_distance_upper)
    double c_nE = 0.0;
    double prefactor = 0.0;
    double set_distance_upper = 0.0;  // an upper estimate of the distance to Gaussian states
    bool forward_ok = true;           // distance to the set <= d(rho, G(rho))
    bool converse_ok = true;
};

// The distance to the mixed Gaussian set is estimated from above by the
// smaller of d(rho, G(rho)) and d(rho, vacuum) unless supplied.
GaussianificationBounds gaussianification_bounds(const FockState& s, int n, double E,
                                                 std::optional<double> set_distance_upper = std::nullopt,
                                                 double leakage_bound = kDefaultLeakageBound);

// Matrix norms used above; "2-norm" is the Frobenius norm.
double norm_inf(const RMat& m);
double norm_two(const RMat& m);

}  // namespace gausstest
