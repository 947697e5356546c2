#pragma once

#include <string>
#include <vector>

#include "gausstest/fock.hpp"

namespace gausstest {

enum class CopyAxis { plane, diag111 };
enum class TestId { test1, test2, test2prime, test3, test4, test5 };
enum class GeneratorKind { G, Gtilde };
enum class ProjectorVariant { test1, test2, test4, test5 };

TestId parse_test_id(const std::string& s);  // "1", "2", "2'", "2p", "3", "4", "5"
std::string to_string(TestId t);

inline constexpr std::size_t kDefaultDenseBudget = 4096;

// k = 2 rotates two copies by r_theta in the plane; k = 3 rotates three copies
// about the (1,1,1) axis. In both cases U_theta = exp(-i theta s G_k) with
// G_2 = G, G_3 = G^(12) + G^(23) + G^(31) and s = 1 or 1/sqrt(3).
struct CopyRotation {
    int copies = 2;
    double angle = 0.0;
    CopyAxis axis = CopyAxis::plane;
    int modes = 1;
    int cutoff = 2;
};

double rotation_scale(int copies);

// The generator restricted to one mode index: k copies of a single mode
// carrying N photons in total. The full generator is the sum of these over
// mode indices, which commute.
struct GroupBlock {
    int copies = 2;
    int photons = 0;
    std::vector<std::vector<int>> basis;  // occupations per copy
    CMat generator;
    RVec eigenvalues;
    CMat eigenvectors;

    int rank_of(const std::vector<int>& occ) const;
};

// Memoized and thread-safe; the returned reference stays valid for the process lifetime.
const GroupBlock& group_block(int copies, int photons);

// exp(-i theta s G) on one group block.
CMat rotation_block(int copies, int photons, double angle);

struct RotationUnitary {
    CopyRotation rot;
    // Acts on the (d^n)^k grid. Exact on every sector whose per-mode-index
    // photon totals stay below d; rows and columns outside are zero.
    CMat matrix;
    std::vector<std::size_t> covered;
};

RotationUnitary copy_rotation_unitary(const CopyRotation& rot, std::size_t budget = kDefaultDenseBudget);

struct GeneratorOperator {
    GeneratorKind which = GeneratorKind::G;
    int modes = 1;
    int cutoff = 2;
    CMat matrix;  // truncated ladder operators on (d^n)^k
};

GeneratorOperator rotation_generator(GeneratorKind which, int n, int d,
                                     std::size_t budget = kDefaultDenseBudget);

struct InvariantProjector {
    ProjectorVariant variant = ProjectorVariant::test2;
    int modes = 1;
    int cutoff = 2;
    CMat matrix;  // over the complete sectors of the (d^n)^k grid
    double nullspace_rel_tol = 1e-10;
};

InvariantProjector invariant_projector(ProjectorVariant variant, int n, int d,
                                       std::size_t budget = kDefaultDenseBudget);

struct AcceptanceOptions {
    double leakage_bound = kDefaultLeakageBound;
    double nullspace_rel_tol = 1e-10;
    // Sectors whose weight bound falls below this are skipped.
    double sector_skip = 1e-17;
    // Limit on product terms when expanding a mixed state.
    std::size_t max_mixed_terms = 200000;
};

double acceptance_probability(TestId test, const FockState& state, const AcceptanceOptions& opt = {});

struct Test3Result {
    MixedFockState sigma;
    double purity = 1.0;
    double swap_test_accept_prob = 1.0;
};

Test3Result test3_product_check(const PureFockState& state, const AcceptanceOptions& opt = {},
                                std::size_t budget = kDefaultDenseBudget);

struct GeneratorMoments {
    double g2 = 0.0;
    double g4 = 0.0;
    double energy_second_moment = 0.0;  // <E^2> of a single copy
    double bound = 0.0;                 // (4 <E^2> + 2n)^2; NaN for Gtilde, which has no such bound
    bool bound_ok = true;
};

GeneratorMoments generator_moments(const FockState& state, GeneratorKind which,
                                   double leakage_bound = kDefaultLeakageBound);

}  // namespace gausstest
