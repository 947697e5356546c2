#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gausstest/rotations.hpp"
#include "gausstest/sampling.hpp"

namespace gausstest {

enum class Hypothesis { A_close, B_far };
std::string to_string(Hypothesis h);

struct CovarianceEstimate {
    RVec mean_hat;
    RMat cov_hat;  // symmetrized
    std::uint64_t samples_used = 0;
    double target_eps_v = 0.0;
};

using HeterodyneSource = std::function<HeterodyneSample(RngStream&)>;
using RoundSource = std::function<bool(RngStream&)>;

struct TestDecision {
    Hypothesis hypothesis = Hypothesis::A_close;
    std::uint64_t rounds = 0;
    double accept_fraction = 0.0;
    double threshold = 0.0;
    double statistic = 0.0;  // nu_max for the covariance tester, accept fraction otherwise
    std::vector<std::string> warnings;
};

// cov_hat = 2 * sample covariance - I
CovarianceEstimate estimate_moments(const HeterodyneSource& source, std::uint64_t shots, RngStream& rng,
                                    double target_eps_v = 0.0);

std::uint64_t covariance_sample_size(int n, double E, double eps, double delta);

// c = 3 * 2^9 * 3098
double covariance_delta(int n, double E, double eps_v);
double covariance_threshold(int n, double E, double eps_b, double eps_v);

TestDecision covariance_test_decision(const CovarianceEstimate& est, double eps_a, double eps_b, double E, int n,
                                      double eps_v);

struct PipelineConfig {
    int n = 1;
    double E = 1.0;
    double eps_a = 0.0;
    double eps_b = 0.1;
    double delta = 0.1;
    // The formula asks for far more shots than a desk run affords.
    std::uint64_t max_shots = 100000;
};

struct PipelineResult {
    TestDecision decision;
    CovarianceEstimate estimate;
    double eta = 0.0;
    double mu = 0.0;
    double eps_v = 0.0;
    std::uint64_t required_shots = 0;
    std::uint64_t shots_used = 0;
    bool capped = false;
};

PipelineResult pure_testing_pipeline(const HeterodyneSource& source, const PipelineConfig& cfg, RngStream& rng);

struct AmplifyConfig {
    double kappa = 8.0;
    // Use k = ceil(kappa / eps * ln(1/delta)) for tests with p_A close to one.
    bool one_sided = false;
    double eps = 0.0;  // defaults to p_A - p_B
};

std::uint64_t amplification_rounds(double p_a, double p_b, double delta, const AmplifyConfig& cfg = {});

TestDecision amplified_decision(const RoundSource& round, double p_a, double p_b, double delta, RngStream& rng,
                                const AmplifyConfig& cfg = {});

struct TestPlanConfig {
    double C_universal = 1.0;
    double eps0 = 0.1;
    double delta = 0.1;
    double E = 1.0;
    int n = 1;
    double kappa = 8.0;
    bool one_sided = false;
    TestId test = TestId::test4;
};

struct TestPlan {
    double epsilon_gap = 0.0;
    std::uint64_t rounds = 0;
    int copies_per_round = 3;
    std::uint64_t total_copies = 0;
    bool energy_branch = false;  // the (nE)^-4 term is the smaller one
};

int copies_per_round(TestId test);
TestPlan rotation_test_plan(const TestPlanConfig& cfg, double eps_a, double eps_b);

}  // namespace gausstest
