#pragma once

#include <cstdint>
#include <random>

#include "gausstest/fock.hpp"
#include "gausstest/rotations.hpp"

namespace gausstest {

// mt19937_64 seeded from (seed, stream) through seed_seq; identical pairs give
// identical sequences and distinct stream ids give independent engines.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    RngStream substream(std::uint64_t id) const;

    std::mt19937_64& engine() { return engine_; }
    double uniform();  // [0, 1)
    double normal();

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
};

class FockSampler {
public:
    explicit FockSampler(const FockState& state);
    FockIndex operator()(RngStream& rng) const;

private:
    FockShape shape_;
    std::vector<double> cdf_;
};

FockIndex fock_sample(const FockState& state, RngStream& rng);

struct HeterodyneSample {
    RVec outcome;  // (x_1..x_n, p_1..p_n) = sqrt(2) (Re alpha, Im alpha)
};

struct HeterodyneOptions {
    double leakage_bound = kDefaultLeakageBound;
    // Above this envelope constant single-mode states switch to the grid sampler.
    double max_envelope = 64.0;
    // Multi-mode states with a larger envelope are refused.
    double hard_envelope = 1e6;
    int radial_bins = 2048;
    int angular_bins = 256;
};

// Samples the Husimi density <alpha|rho|alpha>/pi^n.
class HeterodyneSampler {
public:
    enum class Method { fock_diagonal, rejection, grid };

    explicit HeterodyneSampler(const FockState& state, const HeterodyneOptions& opt = {});

    HeterodyneSample operator()(RngStream& rng) const;

    Method method() const { return method_; }
    double envelope() const { return envelope_; }
    double proposal_variance() const { return s2_; }
    int modes() const { return shape_.modes; }
    // <alpha|rho|alpha>, the Husimi density times pi^n.
    double husimi(const CVec& alpha) const;

private:
    HeterodyneSample from_alpha(const CVec& alpha) const;
    HeterodyneSample sample_diagonal(RngStream& rng) const;
    HeterodyneSample sample_rejection(RngStream& rng) const;
    HeterodyneSample sample_grid(RngStream& rng) const;

    FockShape shape_;
    Ensemble ens_;
    Method method_ = Method::rejection;
    double s2_ = 2.0;
    double envelope_ = 1.0;
    std::vector<double> diag_cdf_;
    std::vector<double> grid_cdf_;
    double grid_rmax_ = 0.0;
    int radial_bins_ = 0;
    int angular_bins_ = 0;
};

HeterodyneSample heterodyne_sample(const FockState& state, RngStream& rng);

// Bernoulli with the exact acceptance probability of the test.
class TestRoundSampler {
public:
    TestRoundSampler(TestId test, const FockState& state, const AcceptanceOptions& opt = {});
    explicit TestRoundSampler(double probability);
    bool operator()(RngStream& rng) const;
    double probability() const { return p_; }

private:
    double p_;
};

bool test_round_sample(TestId test, const FockState& state, RngStream& rng);

}  // namespace gausstest
