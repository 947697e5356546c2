#pragma once

#include <cstdint>
#include <random>

#include "gausstest/fock.hpp"

namespace gausstest {

// Mean and covariance in block ordering (x_1..x_n, p_1..p_n); vacuum has cov = I.
class GaussianState {
public:
    GaussianState(RVec mean, RMat cov);

    static GaussianState vacuum(int n);
    static GaussianState thermal(int n, double nbar);
    // Single-mode coherent state with complex amplitude alpha.
    static GaussianState coherent(Complex alpha);
    // Single-mode squeezed vacuum, cov = diag(e^{2r}, e^{-2r}).
    static GaussianState squeezed(double r);

    int n() const { return n_; }
    const RVec& mean() const { return mean_; }
    const RMat& cov() const { return cov_; }
    bool is_pure(double tol = 1e-9) const;

private:
    int n_;
    RVec mean_;
    RMat cov_;
};

struct Moments {
    RVec mean;
    RMat cov;
};

struct WilliamsonFactors {
    RMat S;
    RVec nu;  // sorted descending
};

enum class Purity { automatic, pure, mixed };

RMat symplectic_form(int n);

// Padded ladder-operator evaluation; refuses when leakage exceeds the bound.
Moments moments_of_state(const FockState& s, double leakage_bound = kDefaultLeakageBound);

RVec symplectic_eigenvalues(const RMat& cov);
WilliamsonFactors williamson_decomposition(const RMat& cov);

// Pure states via the Bargmann recurrence on the Gaussian wavefunction,
// mixed states through a two-mode-squeezed purification (thermal products
// are written down directly). Throws LeakageError when the cutoff is too small.
FockState gaussian_state_to_fock(const GaussianState& g, int d, Purity purity = Purity::automatic,
                                 double leakage_bound = kDefaultLeakageBound);
PureFockState gaussian_pure_to_fock(const GaussianState& g, int d,
                                    double leakage_bound = kDefaultLeakageBound);
MixedFockState gaussian_mixed_to_fock(const GaussianState& g, int d,
                                      double leakage_bound = kDefaultLeakageBound);

// Truncation loss of the Fock representation at cutoff d, without a budget check.
double gaussian_fock_leakage(const GaussianState& g, int d);
// Smallest cutoff whose leakage is below target.
int minimal_cutoff(const GaussianState& g, double target = 1e-10, int d_max = 160);

GaussianState gaussianification(const FockState& s, double leakage_bound = kDefaultLeakageBound);

// Entropy of a single-mode thermal state with symplectic eigenvalue nu, in nats.
double gaussian_entropy_h(double nu);
double gaussian_entropy(const RVec& nu);
double nongaussianity_relative_entropy(const FockState& s, double leakage_bound = kDefaultLeakageBound);

struct PhaseSpaceValue {
    Complex chi;
    double wigner = 0.0;
};

PhaseSpaceValue phase_space_functions(const GaussianState& g, const RVec& r);

// Haar-like passive part times squeezing r_i ~ U[0, squeeze_max], times another passive part.
RMat random_symplectic(int n, double squeeze_max, std::mt19937_64& rng);
GaussianState random_gaussian_pure(int n, double squeeze_max, std::uint64_t seed,
                                   double displacement_max = 0.0);

// Symmetric positive-definite helpers.
RMat spd_sqrt(const RMat& m);
RMat spd_inverse_sqrt(const RMat& m);
double operator_norm(const RMat& m);

}  // namespace gausstest
