#include "gausstest/estimators.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "gausstest/bounds.hpp"
#include "gausstest/error.hpp"

namespace gausstest {

namespace {

std::uint64_t checked_ceil(double x, const char* what) {
    if (!std::isfinite(x) || x < 0.0 || x >= 1.8e19) throw InfeasibleError(std::string(what) + " overflows");
    return static_cast<std::uint64_t>(std::ceil(x));
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) throw InfeasibleError("sample count overflows");
    return a * b;
}

void check_unit(double x, const char* name) {
    if (!(x > 0.0 && x < 1.0)) throw InvalidArgument(std::string(name) + " must lie in (0, 1)");
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

}  // namespace

std::string to_string(Hypothesis h) { return h == Hypothesis::A_close ? "A_close" : "B_far"; }

CovarianceEstimate estimate_moments(const HeterodyneSource& source, std::uint64_t shots, RngStream& rng,
                                    double target_eps_v) {
    if (shots < 2) throw InvalidArgument("need at least two shots");
    HeterodyneSample first = source(rng);
    const Eigen::Index m = first.outcome.size();
    // Welford accumulation
    RVec mean = RVec::Zero(m);
    RMat m2 = RMat::Zero(m, m);
    auto add = [&](const RVec& x, std::uint64_t k) {
        RVec d = x - mean;
        mean += d / static_cast<double>(k);
        m2 += d * (x - mean).transpose();
    };
    add(first.outcome, 1);
    for (std::uint64_t k = 2; k <= shots; ++k) add(source(rng).outcome, k);
    CovarianceEstimate est;
    est.mean_hat = mean;
    RMat cov = 2.0 * m2 / static_cast<double>(shots - 1) - RMat::Identity(m, m);
    est.cov_hat = 0.5 * (cov + cov.transpose());
    est.samples_used = shots;
    est.target_eps_v = target_eps_v;
    return est;
}

std::uint64_t covariance_sample_size(int n, double E, double eps, double delta) {
    if (n < 1) throw InvalidArgument("n must be positive");
    check_unit(eps, "eps");
    check_unit(delta, "delta");
    if (E < 0.5) throw InvalidArgument("E must be at least 1/2");
    const double nn = n;
    const double inner = 68.0 * std::log(2.0 * (2.0 * nn * nn + 3.0 * nn) / delta) * 200.0 *
                         (8.0 * nn * nn * E * E + 3.0 * nn) / (eps * eps);
    return checked_mul(static_cast<std::uint64_t>(n + 3), checked_ceil(inner, "sample count"));
}

double covariance_delta(int n, double E, double eps_v) {
    const double ne = n * E;
    return 4.0 * ne * (4.0 * ne + eps_v) * eps_v;
}

double covariance_threshold(int n, double E, double eps_b, double eps_v) {
    return 1.0 + 2.0 * eps_b * eps_b / n - covariance_delta(n, E, eps_v) / std::sqrt(static_cast<double>(n));
}

TestDecision covariance_test_decision(const CovarianceEstimate& est, double eps_a, double eps_b, double E, int n,
                                      double eps_v) {
    if (n < 1 || est.cov_hat.rows() != 2 * n) throw InvalidArgument("estimate does not have 2n quadratures");
    if (eps_a < 0.0 || eps_b <= 0.0 || eps_v < 0.0) throw InvalidArgument("eps_A, eps_V >= 0 and eps_B > 0 required");
    const double ne = n * E;
    const double delta = covariance_delta(n, E, eps_v);
    const double lhs = 2.0 * eps_b * eps_b / n - delta / std::sqrt(static_cast<double>(n));
    const double rhs = std::sqrt(2.0 * delta + 2.0 * kLowerBoundConstant * std::pow(ne, 6) * eps_a);
    if (!(lhs > rhs))
        throw InfeasibleError("2 eps_B^2/n - Delta/sqrt(n) > sqrt(2 Delta + 2 c (nE)^6 eps_A) fails: " + fmt(lhs) +
                              " <= " + fmt(rhs));
    TestDecision dec;
    dec.threshold = covariance_threshold(n, E, eps_b, eps_v);
    RMat cov = est.cov_hat;
    // a noisy estimate may fail to be positive definite; clip to keep the spectrum defined
    Eigen::SelfAdjointEigenSolver<RMat> es(cov);
    if (es.eigenvalues().minCoeff() <= 1e-9) {
        cov = es.eigenvectors() * es.eigenvalues().cwiseMax(1e-9).asDiagonal() * es.eigenvectors().transpose();
        dec.warnings.push_back("estimated covariance was not positive definite; eigenvalues clipped");
    }
    dec.statistic = symplectic_eigenvalues(cov).maxCoeff();
    dec.hypothesis = dec.statistic >= dec.threshold ? Hypothesis::B_far : Hypothesis::A_close;
    dec.rounds = est.samples_used;
    dec.accept_fraction = dec.hypothesis == Hypothesis::A_close ? 1.0 : 0.0;
    const double energy = 0.25 * cov.trace() + 0.5 * est.mean_hat.squaredNorm();
    if (energy > ne) dec.warnings.push_back("estimated energy " + fmt(energy) + " exceeds the declared bound nE");
    return dec;
}

PipelineResult pure_testing_pipeline(const HeterodyneSource& source, const PipelineConfig& cfg, RngStream& rng) {
    const int n = cfg.n;
    if (n < 1) throw InvalidArgument("n must be positive");
    check_unit(cfg.delta, "delta");
    if (cfg.E < 0.5) throw InvalidArgument("E must be at least 1/2");
    if (cfg.eps_a < 0.0 || cfg.eps_b <= 0.0) throw InvalidArgument("eps_A >= 0 and eps_B > 0 required");
    const double ne = n * cfg.E;
    PipelineResult out;
    out.eta = std::pow(cfg.eps_b, 4) - 0.5 * kLowerBoundConstant * std::pow(n, 8) * std::pow(cfg.E, 6) * cfg.eps_a;
    if (!(out.eta > 0.0)) throw InfeasibleError("eta = eps_B^4 - (c/2) n^8 E^6 eps_A = " + fmt(out.eta) + " <= 0");
    out.mu = std::pow(2.0 * cfg.eps_b * cfg.eps_b / n, 2) - 2.0 * kLowerBoundConstant * std::pow(ne, 6) * cfg.eps_a;
    out.eps_v = out.mu / (24.0 * ne * (4.0 * ne + 1.0));
    if (!(out.eps_v > 0.0 && out.eps_v < 1.0)) throw InfeasibleError("eps_V = " + fmt(out.eps_v) + " outside (0, 1)");
    std::vector<std::string> warnings;
    try {
        out.required_shots = covariance_sample_size(n, cfg.E, out.eps_v, cfg.delta);
    } catch (const InfeasibleError&) {
        out.required_shots = std::numeric_limits<std::uint64_t>::max();
    }
    out.shots_used = out.required_shots;
    if (out.shots_used > cfg.max_shots) {
        out.shots_used = cfg.max_shots;
        out.capped = true;
        warnings.push_back("sample size " + std::to_string(out.required_shots) + " capped at " +
                           std::to_string(cfg.max_shots) + " shots");
    }
    out.estimate = estimate_moments(source, out.shots_used, rng, out.eps_v);
    out.decision = covariance_test_decision(out.estimate, cfg.eps_a, cfg.eps_b, cfg.E, n, out.eps_v);
    warnings.insert(warnings.end(), out.decision.warnings.begin(), out.decision.warnings.end());
    out.decision.warnings = std::move(warnings);
    return out;
}

std::uint64_t amplification_rounds(double p_a, double p_b, double delta, const AmplifyConfig& cfg) {
    if (!(p_a > p_b)) throw InvalidArgument("p_A must exceed p_B");
    if (p_a > 1.0 || p_b < 0.0) throw InvalidArgument("probabilities must lie in [0, 1]");
    check_unit(delta, "delta");
    if (!(cfg.kappa > 0.0)) throw InvalidArgument("kappa must be positive");
    const double l = std::log(1.0 / delta);
    if (cfg.one_sided) {
        const double eps = cfg.eps > 0.0 ? cfg.eps : p_a - p_b;
        return checked_ceil(cfg.kappa / eps * l, "round count");
    }
    const double gap = p_a - p_b;
    return checked_ceil(cfg.kappa / (gap * gap) * l, "round count");
}

TestDecision amplified_decision(const RoundSource& round, double p_a, double p_b, double delta, RngStream& rng,
                                const AmplifyConfig& cfg) {
    TestDecision dec;
    dec.rounds = amplification_rounds(p_a, p_b, delta, cfg);
    std::uint64_t accepted = 0;
    for (std::uint64_t r = 0; r < dec.rounds; ++r)
        if (round(rng)) ++accepted;
    dec.accept_fraction = static_cast<double>(accepted) / static_cast<double>(dec.rounds);
    dec.statistic = dec.accept_fraction;
    dec.threshold = 0.5 * (p_a + p_b);
    dec.hypothesis = dec.accept_fraction >= dec.threshold ? Hypothesis::A_close : Hypothesis::B_far;
    return dec;
}

int copies_per_round(TestId test) {
    switch (test) {
        case TestId::test1:
        case TestId::test2:
        case TestId::test2prime:
        case TestId::test3: return 2;
        case TestId::test4:
        case TestId::test5: return 3;
    }
    return 2;
}

TestPlan rotation_test_plan(const TestPlanConfig& cfg, double eps_a, double eps_b) {
    if (!(cfg.delta > 0.0 && cfg.delta < 0.5)) throw InvalidArgument("delta must lie in (0, 1/2)");
    if (cfg.E < 0.5) throw InvalidArgument("E must be at least 1/2");
    if (cfg.n < 1) throw InvalidArgument("n must be positive");
    if (!(cfg.C_universal > 0.0)) throw InvalidArgument("C must be positive");
    if (eps_a < 0.0 || eps_b <= 0.0) throw InvalidArgument("eps_A >= 0 and eps_B > 0 required");
    const double ne = cfg.n * cfg.E;
    const double energy_term = 1.0 / std::pow(ne, 4);
    TestPlan plan;
    plan.energy_branch = energy_term < eps_b * eps_b;
    plan.epsilon_gap = cfg.C_universal * std::min(eps_b * eps_b, energy_term) - eps_a;
    if (!(plan.epsilon_gap > 0.0))
        throw InfeasibleError("epsilon gap C min(eps_B^2, (nE)^-4) - eps_A = " + fmt(plan.epsilon_gap) + " <= 0");
    const double l = std::log(1.0 / cfg.delta);
    plan.rounds = cfg.one_sided ? checked_ceil(cfg.kappa / plan.epsilon_gap * l, "round count")
                                : checked_ceil(cfg.kappa / (plan.epsilon_gap * plan.epsilon_gap) * l, "round count");
    plan.copies_per_round = copies_per_round(cfg.test);
    plan.total_copies = checked_mul(plan.rounds, static_cast<std::uint64_t>(plan.copies_per_round));
    return plan;
}

}  // namespace gausstest
