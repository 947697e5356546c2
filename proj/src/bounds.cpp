#include "gausstest/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "gausstest/error.hpp"

namespace gausstest {

namespace {

double condition_number(const RMat& v) {
    Eigen::SelfAdjointEigenSolver<RMat> es(v, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    if (lo <= 0.0) throw InvalidArgument("matrix is not positive definite");
    return es.eigenvalues().maxCoeff() / lo;
}

void check_same_modes(const RVec& a, const RVec& b) {
    if (a.size() != b.size()) throw InvalidArgument("states have different mode counts");
}

}  // namespace

bool BoundReport::sandwich_ok(double slack) const {
    if (!exact) return lower <= upper + slack;
    return lower <= *exact + slack && *exact <= upper + slack;
}

double norm_inf(const RMat& m) { return m.size() ? operator_norm(m) : 0.0; }
double norm_two(const RMat& m) { return m.norm(); }

StateMoments state_moments(const FockState& s, double leakage_bound) {
    Moments mo = moments_of_state(s, leakage_bound);
    const FockShape& sh = shape_of(s);
    RVec diag;
    if (auto p = std::get_if<PureFockState>(&s))
        diag = p->amplitudes().cwiseAbs2();
    else
        diag = std::get<MixedFockState>(s).diagonal_probabilities();
    double e2 = 0.0;
    for (std::size_t i = 0; i < sh.dim(); ++i) {
        const double e = sh.total_photons(i) + 0.5 * sh.modes;
        e2 += diag(i) * e * e;
    }
    StateMoments out;
    out.mean = mo.mean;
    out.cov = mo.cov;
    out.energy = 0.25 * mo.cov.trace() + 0.5 * mo.mean.squaredNorm();
    out.energy_sq = e2;
    return out;
}

StateMoments gaussian_moments(const GaussianState& g) {
    StateMoments out;
    out.mean = g.mean();
    out.cov = g.cov();
    const double n = g.n();
    out.energy = 0.25 * g.cov().trace() + 0.5 * g.mean().squaredNorm();
    const double var = ((g.cov() * g.cov()).trace() - 2.0 * n) / 8.0 + 0.5 * g.mean().dot(g.cov() * g.mean());
    out.energy_sq = out.energy * out.energy + var;
    out.pure_gaussian = g.is_pure();
    return out;
}

BoundReport gaussian_pair_bounds(const GaussianState& g1, const GaussianState& g2) {
    check_same_modes(g1.mean(), g2.mean());
    const RMat& v = g1.cov();
    const RMat& w = g2.cov();
    const double dv_inf = norm_inf(v - w);
    const double dv_two = norm_two(v - w);
    const double dm = (g1.mean() - g2.mean()).norm();
    const double min_inf = std::min(norm_inf(v), norm_inf(w));
    BoundReport r;
    r.which = "gaussian_pair";
    r.upper_raw = (1.0 + std::sqrt(3.0)) / 8.0 * std::max(v.trace(), w.trace()) * dv_inf + std::sqrt(min_inf / 2.0) * dm;
    r.upper = std::min(1.0, r.upper_raw);
    const double lower_mean = std::min(1.0, dm / std::sqrt(4.0 * min_inf + 1.0)) / 200.0;
    const double lower_cov = std::min(1.0, dv_two / (4.0 * min_inf + 1.0)) / 200.0;
    r.lower = std::max(lower_mean, lower_cov);
    r.params = {{"cov_diff_inf", dv_inf}, {"cov_diff_two", dv_two}, {"mean_diff", dm},
                {"min_cov_inf", min_inf}, {"lower_mean", lower_mean}, {"lower_cov", lower_cov}};
    return r;
}

BoundReport general_pair_bounds(const StateMoments& a, const StateMoments& b) {
    check_same_modes(a.mean, b.mean);
    if (!(a.energy > 0.0 && b.energy > 0.0 && a.energy_sq > 0.0 && b.energy_sq > 0.0))
        throw InvalidArgument("general pair bounds need positive first and second energy moments");
    const double dv_inf = norm_inf(a.cov - b.cov);
    const double dm = (a.mean - b.mean).norm();
    const double e_max = std::max(a.energy, b.energy);
    const double e2_max = std::max(a.energy_sq, b.energy_sq);
    BoundReport r;
    r.which = "general_pair";
    const double lower_mean = dm * dm / (32.0 * e_max);
    const double lower_cov = dv_inf * dv_inf / (3098.0 * e2_max);
    r.lower = std::max(lower_mean, lower_cov);
    if (a.pure_gaussian || b.pure_gaussian) {
        r.upper_raw = std::sqrt(e_max) * std::sqrt(dv_inf + 2.0 * dm * dm);
    } else {
        r.upper_raw = 1.0;  // no moment-based upper bound without a pure Gaussian argument
        r.params["upper_trivial"] = 1.0;
    }
    r.upper = std::min(1.0, r.upper_raw);
    r.params.insert({{"cov_diff_inf", dv_inf}, {"mean_diff", dm}, {"energy_max", e_max},
                     {"energy_sq_max", e2_max}, {"lower_mean", lower_mean}, {"lower_cov", lower_cov}});
    return r;
}

BoundReport pure_gaussian_set_distance_bounds(const RVec& nu, int n, double E, std::optional<double> eps_v) {
    if (nu.size() != n) throw InvalidArgument("expected one symplectic eigenvalue per mode");
    if (!(E > 0.0)) throw InvalidArgument("energy bound must be positive");
    if (nu.size() == 0 || nu.minCoeff() < 1.0 - 1e-8) throw InvalidArgument("symplectic eigenvalues must be >= 1");
    if (eps_v && *eps_v < 0.0) throw InvalidArgument("eps_V must be >= 0");
    const double excess = (nu.array() - 1.0).max(0.0).sum();
    const double numax = nu.maxCoeff();
    const double ne = n * E;
    const double cne6 = kLowerBoundConstant * std::pow(ne, 6);
    BoundReport r;
    r.params = {{"n", double(n)}, {"E", E}, {"nu_max", numax}};
    if (!eps_v) {
        r.which = "pure_gaussian_set";
        r.upper_raw = std::sqrt(excess / 2.0);
        r.lower = std::pow(std::max(0.0, numax - 1.0), 2) / cne6;
    } else {
        const double ev = *eps_v;
        r.which = "pure_gaussian_set_perturbed";
        const double up_corr = std::sqrt(std::pow(double(n), 3)) * 4.0 * E * (4.0 * ne + ev) * ev;
        const double lo_corr = 8.0 * ne * (4.0 * ne + ev) * ev;
        r.upper_raw = std::sqrt(excess + up_corr) / std::sqrt(2.0);
        const double raw_lower = (std::pow(numax - 1.0, 2) - lo_corr) / (2.0 * cne6);
        r.lower = std::max(0.0, raw_lower);
        r.params["eps_V"] = ev;
        r.params["lower_raw"] = raw_lower;
    }
    r.upper = std::min(1.0, r.upper_raw);
    return r;
}

WilliamsonPerturbation williamson_perturbation_bound(const RMat& v1, const RMat& v2) {
    if (v1.rows() != v2.rows() || v1.cols() != v2.cols()) throw InvalidArgument("covariances differ in size");
    const double k = std::sqrt(condition_number(v1) * condition_number(v2));
    WilliamsonPerturbation out;
    out.bound_inf = k * norm_inf(v1 - v2);
    out.bound_two = k * norm_two(v1 - v2);
    RVec n1 = symplectic_eigenvalues(v1);
    RVec n2 = symplectic_eigenvalues(v2);
    out.gap_inf = (n1 - n2).cwiseAbs().maxCoeff();
    out.gap_two = std::sqrt(2.0) * (n1 - n2).norm();  // D carries each nu twice
    return out;
}

double hardness_constant_c_nE(double nE) {
    return std::sqrt(2.0) + 8.0 * std::pow(3.0, 0.25) * std::pow(nE, 1.5) +
           (1.0 + std::sqrt(3.0)) / 2.0 * std::sqrt(3098.0) * nE * nE;
}

double gaussianification_prefactor(double nE) {
    return 1.0 + (1.0 + std::sqrt(3.0)) / 2.0 * std::sqrt(6.0) * std::sqrt(1549.0) * nE * nE +
           4.0 * std::sqrt(2.0 * std::sqrt(3.0)) * std::pow(nE, 1.5);
}

GaussianificationBounds gaussianification_bounds(const FockState& s, int n, double E,
                                                 std::optional<double> set_distance_upper, double leakage_bound) {
    if (!(E > 0.0)) throw InvalidArgument("energy bound must be positive");
    const FockShape sh = shape_of(s);
    if (sh.modes != n) throw InvalidArgument("mode count does not match the state");
    StateMoments sm = state_moments(s, leakage_bound);
    GaussianificationBounds out;
    const double ne = n * E;
    out.c_nE = hardness_constant_c_nE(ne);
    out.prefactor = gaussianification_prefactor(ne);

    GaussianState g(sm.mean, sm.cov);
    const int d = std::max(sh.cutoff, minimal_cutoff(g, 1e-10));
    MixedFockState rho = to_mixed(s).padded(d);
    MixedFockState grho = gaussian_mixed_to_fock(g, d, 1e-10);
    const double dist_g = trace_distance_exact(rho, grho);
    double upper_est = dist_g;
    if (set_distance_upper) {
        upper_est = *set_distance_upper;
    } else {
        MixedFockState vac = MixedFockState::from_pure(PureFockState::vacuum(n, d));
        upper_est = std::min(dist_g, trace_distance_exact(rho, vac));
    }
    out.set_distance_upper = upper_est;
    out.forward_ok = upper_est <= dist_g + 1e-12 || set_distance_upper.has_value();
    BoundReport& r = out.report;
    r.which = "gaussianification";
    r.exact = dist_g;
    r.lower = 0.0;
    r.upper_raw = out.prefactor * std::sqrt(std::max(0.0, upper_est));
    r.upper = std::min(1.0, r.upper_raw);
    r.params = {{"n", double(n)}, {"E", E}, {"c_nE", out.c_nE}, {"prefactor", out.prefactor},
                {"set_distance_upper", upper_est}, {"energy_sq", sm.energy_sq}};
    if (std::sqrt(sm.energy_sq) > ne + 1e-9) r.params["energy_bound_violated"] = 1.0;
    out.converse_ok = dist_g <= r.upper_raw + 1e-12;
    return out;
}

}  // namespace gausstest
