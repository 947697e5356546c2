#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace gausstest {

using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

using FockIndex = std::vector<int>;

inline constexpr double kDefaultLeakageBound = 1e-8;

// Uniform per-mode cutoff d, row-major multi-index with mode 0 most significant.
struct FockShape {
    int modes = 1;
    int cutoff = 2;

    std::size_t dim() const;
    std::size_t index(const FockIndex& k) const;
    FockIndex unindex(std::size_t idx) const;
    int total_photons(std::size_t idx) const;
    bool operator==(const FockShape&) const = default;
};

class PureFockState {
public:
    // Normalizes the amplitudes; `leakage` is the norm^2 lost before truncation.
    PureFockState(int modes, int cutoff, CVec amplitudes, double leakage = 0.0);

    static PureFockState basis(int modes, int cutoff, const FockIndex& k);
    static PureFockState vacuum(int modes, int cutoff);

    int modes() const { return shape_.modes; }
    int cutoff() const { return shape_.cutoff; }
    const FockShape& shape() const { return shape_; }
    std::size_t dim() const { return shape_.dim(); }
    const CVec& amplitudes() const { return amps_; }
    Complex amplitude(const FockIndex& k) const { return amps_(shape_.index(k)); }
    double leakage() const { return leakage_; }

    // Zero-extends to a larger cutoff.
    PureFockState padded(int new_cutoff) const;

private:
    FockShape shape_;
    CVec amps_;
    double leakage_;
};

class MixedFockState {
public:
    // Validates Hermiticity, trace and the eigenvalue floor. Eigenvalues below
    // -1e-10 are clamped to zero, the result renormalized and clamped() set.
    MixedFockState(int modes, int cutoff, CMat matrix, double leakage = 0.0);

    static MixedFockState from_pure(const PureFockState& psi);
    static MixedFockState diagonal(int modes, int cutoff, const RVec& probs, double leakage = 0.0);

    int modes() const { return shape_.modes; }
    int cutoff() const { return shape_.cutoff; }
    const FockShape& shape() const { return shape_; }
    std::size_t dim() const { return shape_.dim(); }
    const CMat& matrix() const { return rho_; }
    double leakage() const { return leakage_; }
    bool clamped() const { return clamped_; }
    bool is_diagonal() const { return diagonal_; }
    RVec diagonal_probabilities() const;

    MixedFockState padded(int new_cutoff) const;

private:
    FockShape shape_;
    CMat rho_;
    double leakage_;
    bool clamped_ = false;
    bool diagonal_ = false;
};

using FockState = std::variant<PureFockState, MixedFockState>;

const FockShape& shape_of(const FockState& s);
double leakage_of(const FockState& s);
MixedFockState to_mixed(const FockState& s);

enum class OperatorKind { annihilation, creation, position, momentum, number, energy, custom };

struct ModeOperator {
    OperatorKind kind = OperatorKind::custom;
    CMat matrix;
};

struct ModeOperators {
    int cutoff = 0;
    ModeOperator a, adag, x, p, number, energy;
};

// Single-mode ladder algebra truncated at d levels. The top level carries
// truncation artifacts: [x,p] = i only on indices < d-1.
ModeOperators build_mode_operators(int d);

// I (x) ... (x) op (x) ... (x) I acting on `mode`.
CMat embed_mode_operator(const CMat& single, int mode, const FockShape& shape);
// Same action without forming the dense embedding.
CVec apply_mode_operator(const CMat& single, int mode, const FockShape& shape, const CVec& v);

CMat total_number_operator(const FockShape& shape);
CMat total_energy_operator(const FockShape& shape);
// Projector onto even total photon number.
CMat parity_projector(const FockShape& shape);

Complex expectation_value(const PureFockState& s, const CMat& op);
Complex expectation_value(const MixedFockState& s, const CMat& op);
Complex expectation_value(const FockState& s, const CMat& op);

PureFockState tensor_product(const PureFockState& a, const PureFockState& b);
MixedFockState tensor_product(const MixedFockState& a, const MixedFockState& b);

// Reduced state on the listed modes (kept in increasing order).
MixedFockState partial_trace(const MixedFockState& s, const std::vector<int>& keep);

double trace_distance_exact(const MixedFockState& a, const MixedFockState& b);

struct SpectralFunctionals {
    double purity = 1.0;
    double von_neumann_entropy = 0.0;
    std::optional<double> fidelity;
};

SpectralFunctionals spectral_functionals(const MixedFockState& s,
                                         const PureFockState* target = nullptr);

// -sum lambda ln lambda over positive entries.
double entropy_from_spectrum(const RVec& eigenvalues);

// rho = sum_j w_j |v_j><v_j|, with negligible weights dropped.
struct Ensemble {
    FockShape shape;
    std::vector<double> weights;
    std::vector<CVec> vectors;
};

Ensemble spectral_ensemble(const FockState& s, double weight_floor = 1e-16);
Ensemble padded(const Ensemble& e, int new_cutoff);

}  // namespace gausstest
