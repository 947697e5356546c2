#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gausstest/error.hpp"
#include "gausstest/fixtures.hpp"
#include "gausstest/sampling.hpp"

using namespace gausstest;

namespace {

// Wilson-Hilferty upper quantile of chi^2 with k degrees of freedom.
double chi2_quantile(int k, double z) {
    const double a = 2.0 / (9.0 * k);
    return k * std::pow(1.0 - a + z * std::sqrt(a), 3);
}

constexpr double kZ99 = 2.3263478740408408;

// Pearson statistic against expected probabilities, merging cells with
// expectation below 5 into one bucket. Returns {statistic, dof}.
std::pair<double, int> pearson(const std::vector<long>& counts, const std::vector<double>& probs, long total) {
    double stat = 0.0, rest_o = 0.0, rest_e = 0.0;
    int cells = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double e = probs[i] * total;
        if (e < 5.0) {
            rest_o += counts[i];
            rest_e += e;
            continue;
        }
        stat += (counts[i] - e) * (counts[i] - e) / e;
        ++cells;
    }
    if (rest_e > 0.0) {
        stat += (rest_o - rest_e) * (rest_o - rest_e) / rest_e;
        ++cells;
    }
    return {stat, cells - 1};
}

struct OutcomeStats {
    RVec mean;
    RMat second;  // about the mean
};

OutcomeStats outcome_stats(const HeterodyneSampler& s, long N, RngStream& rng) {
    const int dim = 2 * s.modes();
    RVec sum = RVec::Zero(dim);
    RMat sq = RMat::Zero(dim, dim);
    for (long i = 0; i < N; ++i) {
        RVec x = s(rng).outcome;
        sum += x;
        sq += x * x.transpose();
    }
    OutcomeStats o;
    o.mean = sum / N;
    o.second = sq / N - o.mean * o.mean.transpose();
    return o;
}

double spectral_norm(const RMat& m) {
    return Eigen::SelfAdjointEigenSolver<RMat>(0.5 * (m + m.transpose())).eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("rng streams") {
    RngStream a(5, 1), b(5, 1), c(5, 2), d(6, 1);
    bool same = true, diff_stream = false, diff_seed = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.engine()(), y = b.engine()(), z = c.engine()(), w = d.engine()();
        same = same && x == y;
        diff_stream = diff_stream || x != z;
        diff_seed = diff_seed || x != w;
    }
    CHECK(same);
    CHECK(diff_stream);
    CHECK(diff_seed);
    RngStream s1 = RngStream(9).substream(3), s2 = RngStream(9).substream(3);
    CHECK(s1.engine()() == s2.engine()());
    RngStream u(1);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform();
        CHECK((x >= 0.0 && x < 1.0));
    }
}

TEST_CASE("Fock sampling") {
    RngStream rng(1);
    Fixture vac = make_fixture("vacuum");
    for (int i = 0; i < 100; ++i) CHECK(fock_sample(vac.state, rng) == FockIndex{0});

    Fixture th = make_fixture("thermal:1", 50);
    FockSampler fs(th.state);
    const long N = 10000;
    long zeros = 0;
    double mean = 0.0;
    for (long i = 0; i < N; ++i) {
        const int k = fs(rng)[0];
        zeros += k == 0;
        mean += k;
    }
    mean /= N;
    CHECK(std::abs(zeros / double(N) - 0.5) < 0.01);
    // mean photon number within 3 sigma, sigma^2 = nbar(nbar+1)/N
    CHECK(std::abs(mean - 1.0) < 3.0 * std::sqrt(2.0 / N));

    // goodness of fit on a two-mode diagonal state
    RVec p(9);
    p << 0.3, 0.1, 0.05, 0.15, 0.1, 0.02, 0.08, 0.1, 0.1;
    MixedFockState m = MixedFockState::diagonal(2, 3, p);
    FockSampler ms(m);
    const long M = 100000;
    std::vector<long> counts(9, 0);
    const FockShape sh{2, 3};
    for (long i = 0; i < M; ++i) ++counts[sh.index(ms(rng))];
    auto [stat, dof] = pearson(counts, std::vector<double>(p.data(), p.data() + 9), M);
    CHECK(stat < chi2_quantile(dof, kZ99));
}

TEST_CASE("heterodyne calibration") {
    SUBCASE("vacuum") {
        HeterodyneSampler s(make_fixture("vacuum").state);
        CHECK(s.method() == HeterodyneSampler::Method::fock_diagonal);
        CVec z = CVec::Zero(1);
        z(0) = Complex(0.6, -0.2);
        CHECK(s.husimi(z) == doctest::Approx(std::exp(-0.4)));
        RngStream rng(2);
        OutcomeStats o = outcome_stats(s, 100000, rng);
        CHECK(spectral_norm(o.second - RMat::Identity(2, 2)) < 0.02);
        CHECK(o.mean.norm() < 0.02);
    }
    SUBCASE("coherent") {
        HeterodyneSampler s(make_fixture("coherent:1").state);
        CVec z = CVec::Zero(1);
        z(0) = 1.0;
        CHECK(s.husimi(z) == doctest::Approx(1.0).epsilon(1e-8));
        RngStream rng(3);
        OutcomeStats o = outcome_stats(s, 100000, rng);
        CHECK(std::abs(o.mean(0) - std::sqrt(2.0)) < 0.02);
        CHECK(std::abs(o.mean(1)) < 0.02);
        CHECK(spectral_norm(o.second - RMat::Identity(2, 2)) < 0.03);
    }
    SUBCASE("single photon") {
        HeterodyneSampler s(PureFockState::basis(1, 5, {1}));
        RngStream rng(4);
        OutcomeStats o = outcome_stats(s, 100000, rng);
        CHECK(o.mean.norm() < 0.02);
        CHECK(spectral_norm(o.second - 2.0 * RMat::Identity(2, 2)) < 0.05);
    }
    SUBCASE("squeezed through rejection and grid") {
        Fixture f = make_fixture("squeezed:0.4");
        const RMat want = 0.5 * (f.gaussian->cov() + RMat::Identity(2, 2));
        HeterodyneSampler rej(f.state);
        CHECK(rej.method() == HeterodyneSampler::Method::rejection);
        RngStream rng(5);
        CHECK(spectral_norm(outcome_stats(rej, 100000, rng).second - want) < 0.05);
        HeterodyneOptions opt;
        opt.max_envelope = 1.0;
        HeterodyneSampler grid(f.state, opt);
        CHECK(grid.method() == HeterodyneSampler::Method::grid);
        CHECK(spectral_norm(outcome_stats(grid, 100000, rng).second - want) < 0.05);
    }
    SUBCASE("two-mode state") {
        Fixture f = make_fixture("coherent:0.5", 12);
        HeterodyneSampler s(tensor_product(std::get<PureFockState>(f.state), PureFockState::vacuum(1, 12)));
        RngStream rng(6);
        OutcomeStats o = outcome_stats(s, 50000, rng);
        CHECK(std::abs(o.mean(0) - std::sqrt(2.0) * 0.5) < 0.03);
        CHECK(spectral_norm(o.second - RMat::Identity(4, 4)) < 0.05);
    }
}

TEST_CASE("heterodyne error scales as N^-1/2") {
    HeterodyneSampler s(make_fixture("thermal:0.5").state);
    std::vector<double> lx, ly;
    RngStream rng(12);
    for (long N : {1000L, 10000L, 100000L}) {
        double err = 0.0;
        for (int r = 0; r < 10; ++r) {
            OutcomeStats o = outcome_stats(s, N, rng);
            err += spectral_norm(2.0 * o.second - RMat::Identity(2, 2) - 2.0 * RMat::Identity(2, 2));
        }
        lx.push_back(std::log(double(N)));
        ly.push_back(std::log(err / 10.0));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / 3, my = std::accumulate(ly.begin(), ly.end(), 0.0) / 3;
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < 3; ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    CHECK(std::abs(sxy / sxx + 0.5) < 0.1);
}

TEST_CASE("test rounds") {
    RngStream rng(7);
    TestRoundSampler always(TestId::test2, make_fixture("vacuum").state);
    bool all = true;
    for (int i = 0; i < 1000; ++i) all = all && always(rng);
    CHECK(all);

    TestRoundSampler five(TestId::test5, PureFockState::basis(1, 5, {1}));
    CHECK(five.probability() == doctest::Approx(5.0 / 9.0).epsilon(1e-12));
    const int N = 10000;
    int acc = 0;
    for (int i = 0; i < N; ++i) acc += five(rng);
    const double p = 5.0 / 9.0;
    CHECK(std::abs(acc / double(N) - p) < 3.0 * std::sqrt(p * (1 - p) / N));

    TestRoundSampler sq(TestId::test2prime, make_fixture("squeezed:0.3").state);
    CHECK(sq.probability() >= 1.0 - 1e-6);

    RngStream r1(8), r2(8);
    TestRoundSampler half(0.5);
    for (int i = 0; i < 200; ++i) CHECK(half(r1) == half(r2));
    CHECK_THROWS_AS(TestRoundSampler(1.5), InvalidArgument);
}
