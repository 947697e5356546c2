#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gausstest/fock.hpp"
#include "gausstest/sampling.hpp"

namespace gausstest {

// Distribution over {0..cutoff-1}^n, row-major like FockShape; tail_mass is the
// probability beyond the cutoff.
struct ClassicalDist {
    int n = 1;
    int cutoff = 1;
    std::vector<double> probs;
    double tail_mass = 0.0;

    FockShape shape() const { return {n, cutoff}; }
    // Tail folded back in by renormalizing the truncated support.
    ClassicalDist normalized() const;
    double max_prob() const;
};

ClassicalDist geometric_distribution(double nu, int n, int cutoff);
// Smallest cutoff with geometric tail below `tail`.
int geometric_cutoff(double nu, int n, double tail = 1e-9);

// Includes half the difference of the tail masses.
double total_variation(const ClassicalDist& p, const ClassicalDist& q);

struct PerturbedMember {
    ClassicalDist base;  // normalized q
    ClassicalDist p;
    double eps = 0.0;
    std::uint64_t z_seed = 0;
    std::vector<int> z;
    double tv = 0.0;
    int resamples = 0;
};

// p(i) proportional to (1 + 4 eps z(i)) q(i)
PerturbedMember perturb_with_signs(const ClassicalDist& q, double eps, const std::vector<int>& z);
// Random signs, redrawn until TV(p, q) > eps.
PerturbedMember valiant_perturb(const ClassicalDist& q, double eps, std::uint64_t z_seed, int max_resamples = 1000);

// rho(p) = sum_k p(k) |k><k| on cutoff d (default p.cutoff).
MixedFockState embed_classical(const ClassicalDist& p, std::optional<int> d = std::nullopt,
                               double tail_budget = 1e-9);

// Tr[rho_nu^{(x)n} E^2] for the i.i.d. thermal state with mean photon number nu.
double thermal_energy_second_moment(int n, double nu);
// Tr[rho(p) E^2] summed over the support.
double classical_energy_second_moment(const ClassicalDist& p);
// Positive root of thermal_energy_second_moment(n, nu) = (1-4eps)/(1+4eps) (nE)^2.
double solve_nu_for_energy(int n, double E, double eps);

struct HardnessConfig {
    int n = 2;
    std::vector<double> energies{2.0, 3.0, 4.0};
    // eps = 8 c_nE^2 eps_B when eps_B is set; otherwise eps is used directly.
    std::optional<double> eps_b;
    double eps = 0.1;
    int trials = 20;
    int members = 5;
    int reps = 60;
    double success = 2.0 / 3.0;
    double tail = 1e-9;
    bool check_embedding = true;
};

struct HardnessRow {
    double E = 0.0;
    double nu = 0.0;
    int cutoff = 0;
    double q_inf = 0.0;
    double energy_limit = 0.0;  // (nE)^2
    double energy_sq_q = 0.0;
    double energy_sq_p_max = 0.0;
    bool energy_ok = true;
    double tv_min = 0.0;
    int resamples = 0;
    double embed_gap = 0.0;  // |trace distance - TV| for the first member
    std::vector<double> samples;
    double mean_samples = 0.0;
};

struct HardnessReport {
    int n = 1;
    double eps = 0.0;
    std::vector<HardnessRow> rows;
    bool monotone = true;
    std::string asymptotic_claim;
    std::vector<std::string> warnings;
};

HardnessReport hardness_experiment(const HardnessConfig& cfg, RngStream& rng);

// Samples at which the chi-square identity tester tells p from q with the
// given success probability (found by bisection in log m).
double distinguishing_samples(const ClassicalDist& q, const ClassicalDist& p, double eps, int reps, double success,
                              RngStream& rng);

}  // namespace gausstest
