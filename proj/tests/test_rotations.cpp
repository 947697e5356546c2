#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "gausstest/error.hpp"
#include "gausstest/fixtures.hpp"
#include "gausstest/rotations.hpp"
#include "gausstest/symplectic.hpp"

using namespace gausstest;

namespace {

constexpr double kPi = std::numbers::pi;

std::size_t grid_index(const std::vector<int>& occ, int d) {
    std::size_t g = 0;
    for (int o : occ) g = g * static_cast<std::size_t>(d) + static_cast<std::size_t>(o);
    return g;
}

CMat restrict_to(const CMat& m, const std::vector<std::size_t>& idx) {
    const auto s = static_cast<Eigen::Index>(idx.size());
    CMat out(s, s);
    for (Eigen::Index r = 0; r < s; ++r)
        for (Eigen::Index c = 0; c < s; ++c) out(r, c) = m(idx[r], idx[c]);
    return out;
}

CVec product_vector(const CVec& v, int copies) {
    CVec out = v;
    for (int c = 1; c < copies; ++c) out = Eigen::kroneckerProduct(out, v).eval();
    return out;
}

PureFockState zero_four(double eps, int d) {
    CVec c = CVec::Zero(d);
    c(0) = std::sqrt(1.0 - eps * eps);
    c(4) = eps;
    return PureFockState(1, d, c);
}

GaussianState random_mixed_gaussian(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(1.0, 1.4);
    RMat s = random_symplectic(n, 0.3, rng);
    RVec dd(2 * n);
    for (int i = 0; i < n; ++i) dd(i) = dd(i + n) = u(rng);
    RMat v = s * dd.asDiagonal() * s.transpose();
    return GaussianState(RVec::Zero(2 * n), 0.5 * (v + v.transpose()));
}

}  // namespace

TEST_CASE("group blocks") {
    for (int N = 0; N <= 6; ++N) {
        const GroupBlock& b = group_block(2, N);
        CHECK(b.basis.size() == static_cast<std::size_t>(N + 1));
        CHECK((b.generator - b.generator.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
        // spectrum of the two-copy generator: N, N-2, ..., -N
        for (int j = 0; j <= N; ++j) CHECK(std::abs(b.eigenvalues(j) - (2 * j - N)) < 1e-9);
        for (std::size_t r = 0; r < b.basis.size(); ++r) CHECK(b.rank_of(b.basis[r]) == static_cast<int>(r));
    }
    for (int N = 0; N <= 5; ++N) {
        const GroupBlock& b = group_block(3, N);
        CHECK(b.basis.size() == static_cast<std::size_t>((N + 1) * (N + 2) / 2));
        const double s = rotation_scale(3);
        for (Eigen::Index j = 0; j < b.eigenvalues.size(); ++j) {
            const double l = s * b.eigenvalues(j);
            CHECK(std::abs(l - std::round(l)) < 1e-9);
            CHECK(std::abs(l) <= N + 1e-9);
        }
    }
    CHECK_THROWS_AS(group_block(4, 1), InvalidArgument);

    // two photons on two copies: the kernel is (|20> + |02>)/sqrt2
    const GroupBlock& b2 = group_block(2, 2);
    CVec want = CVec::Zero(3);
    want(b2.rank_of({2, 0})) = want(b2.rank_of({0, 2})) = 1.0 / std::sqrt(2.0);
    CHECK((b2.generator * want).norm() < 1e-12);
    Eigen::Index k0 = 0;
    b2.eigenvalues.cwiseAbs().minCoeff(&k0);
    CHECK(std::abs(std::abs(b2.eigenvectors.col(k0).dot(want)) - 1.0) < 1e-12);
}

TEST_CASE("copy rotation unitaries") {
    SUBCASE("beam splitter elements") {
        const int d = 11;
        RotationUnitary u = copy_rotation_unitary({2, kPi / 4, CopyAxis::plane, 1, d});
        for (int m = 0; m <= 10; ++m) {
            const std::size_t i = grid_index({m, 0}, d);
            CHECK(std::abs(u.matrix(i, i) - std::pow(2.0, -0.5 * m)) < 1e-10);
        }
    }
    SUBCASE("three copy elements") {
        const int d = 7;
        RotationUnitary u = copy_rotation_unitary({3, kPi / 3, CopyAxis::diag111, 1, d});
        for (int m = 0; m < d; ++m) {
            const std::size_t i = grid_index({m, 0, 0}, d);
            CHECK(std::abs(u.matrix(i, i) - std::pow(2.0 / 3.0, m)) < 1e-10);
        }
    }
    SUBCASE("identity, unitarity, additivity") {
        for (int k : {2, 3}) {
            const CopyAxis ax = k == 2 ? CopyAxis::plane : CopyAxis::diag111;
            const int d = k == 2 ? 5 : 4;
            RotationUnitary u0 = copy_rotation_unitary({k, 0.0, ax, 1, d});
            RotationUnitary a = copy_rotation_unitary({k, 0.37, ax, 1, d});
            RotationUnitary b = copy_rotation_unitary({k, 1.1, ax, 1, d});
            RotationUnitary ab = copy_rotation_unitary({k, 1.47, ax, 1, d});
            CMat i0 = restrict_to(u0.matrix, u0.covered);
            CHECK((i0 - CMat::Identity(i0.rows(), i0.cols())).cwiseAbs().maxCoeff() < 1e-12);
            CMat ua = restrict_to(a.matrix, a.covered);
            CHECK((ua * ua.adjoint() - CMat::Identity(ua.rows(), ua.cols())).cwiseAbs().maxCoeff() < 1e-9);
            CHECK((a.matrix * b.matrix - ab.matrix).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
    SUBCASE("quarter turn swaps copies") {
        const int d = 4;
        RotationUnitary u = copy_rotation_unitary({2, kPi / 2, CopyAxis::plane, 1, d});
        for (int a = 0; a < d; ++a)
            for (int b = 0; a + b < d; ++b) {
                CHECK(std::abs(std::abs(u.matrix(grid_index({b, a}, d), grid_index({a, b}, d))) - 1.0) < 1e-10);
            }
    }
    SUBCASE("two photons pair") {
        // <1,1|U_theta|1,1> = cos(2 theta)
        const int d = 3;
        for (double th : {0.2, 0.7, kPi / 4}) {
            RotationUnitary u = copy_rotation_unitary({2, th, CopyAxis::plane, 1, d});
            const std::size_t i = grid_index({1, 1}, d);
            CHECK(std::abs(u.matrix(i, i) - std::cos(2 * th)) < 1e-12);
        }
    }
    CHECK_THROWS_AS(copy_rotation_unitary({2, 0.1, CopyAxis::diag111, 1, 3}), InvalidArgument);
    CHECK_THROWS_AS(copy_rotation_unitary({4, 0.1, CopyAxis::plane, 1, 3}), InvalidArgument);
    CHECK_THROWS_AS(copy_rotation_unitary({3, 0.1, CopyAxis::diag111, 2, 8}), BudgetError);
}

TEST_CASE("generator operators") {
    for (auto which : {GeneratorKind::G, GeneratorKind::Gtilde}) {
        const int k = which == GeneratorKind::G ? 2 : 3;
        const int d = k == 2 ? 5 : 4;
        GeneratorOperator g = rotation_generator(which, 1, d);
        CHECK((g.matrix - g.matrix.adjoint()).cwiseAbs().maxCoeff() < 1e-11);
        CMat num = total_number_operator({k, d});
        CHECK((g.matrix * num - num * g.matrix).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(g.matrix.col(0).norm() < 1e-15);

        // exponentiating the truncated generator reproduces the blockwise unitary
        const double th = 0.61;
        RotationUnitary u = copy_rotation_unitary({k, th, k == 2 ? CopyAxis::plane : CopyAxis::diag111, 1, d});
        CMat gb = restrict_to(g.matrix, u.covered);
        CMat ex = (Complex(0.0, -th * rotation_scale(k)) * gb).exp();
        CHECK((ex - restrict_to(u.matrix, u.covered)).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("invariant projectors") {
    const int d = 5;
    InvariantProjector p1 = invariant_projector(ProjectorVariant::test1, 1, d);
    InvariantProjector p2 = invariant_projector(ProjectorVariant::test2, 1, d);
    InvariantProjector p4 = invariant_projector(ProjectorVariant::test4, 1, 4);
    InvariantProjector p5 = invariant_projector(ProjectorVariant::test5, 1, 4);
    for (const auto* p : {&p1, &p2, &p4, &p5}) {
        CHECK((p->matrix * p->matrix - p->matrix).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((p->matrix - p->matrix.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
    }
    CHECK((p1.matrix * p2.matrix - p1.matrix).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((p4.matrix * p5.matrix - p4.matrix).cwiseAbs().maxCoeff() < 1e-8);

    const std::size_t i11 = grid_index({1, 1}, d), i40 = grid_index({4, 0}, d);
    CHECK(std::abs(p2.matrix(i11, i11)) < 1e-12);
    CHECK(std::abs(p2.matrix(i40, i40) - 0.375) < 1e-12);
    // group average of <1,1|U_l|1,1> = cos(l pi/2)
    double avg = 0.0;
    for (int l = 0; l < 8; ++l) avg += std::cos(2 * l * kPi / 4) / 8.0;
    CHECK(std::abs(p2.matrix(i11, i11).real() - avg) < 1e-12);

    const std::size_t i111 = grid_index({1, 1, 1}, 4);
    CHECK(std::abs(p5.matrix(i111, i111) - 5.0 / 9.0) < 1e-12);
    // permanent oracle: <111|U|111> = perm(R) for a rotation R about (1,1,1)
    double avg5 = 0.0;
    for (int l = 0; l < 6; ++l) {
        const double c = std::cos(l * kPi / 3), s = std::sin(l * kPi / 3);
        Eigen::Matrix3d K;
        K << 0, -1, 1, 1, 0, -1, -1, 1, 0;
        K /= std::sqrt(3.0);
        Eigen::Matrix3d R = Eigen::Matrix3d::Identity() + s * K + (1 - c) * K * K;
        double perm = 0.0;
        int idx[3] = {0, 1, 2};
        do {
            perm += R(0, idx[0]) * R(1, idx[1]) * R(2, idx[2]);
        } while (std::next_permutation(idx, idx + 3));
        avg5 += perm / 6.0;
    }
    CHECK(avg5 == doctest::Approx(5.0 / 9.0));

    CHECK_THROWS_AS(invariant_projector(ProjectorVariant::test4, 2, 8), BudgetError);
}

TEST_CASE("acceptance probabilities on discrete states") {
    PureFockState vac = PureFockState::vacuum(1, 6);
    PureFockState one = PureFockState::basis(1, 6, {1});
    CHECK(acceptance_probability(TestId::test2, vac) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(acceptance_probability(TestId::test2, one)) < 1e-9);
    CHECK(std::abs(acceptance_probability(TestId::test5, one) - 5.0 / 9.0) < 1e-9);

    for (double eps : {0.05, 0.1}) {
        const double rej = 1.0 - acceptance_probability(TestId::test2, zero_four(eps, 12));
        CHECK(rej / (eps * eps) == doctest::Approx(0.5).epsilon(0.01));
    }
    CHECK(acceptance_probability(TestId::test2, zero_four(0.1, 12)) == doctest::Approx(0.995).epsilon(5e-5));

    // brute force on the single-copy |4>: <4,4|P|4,4> through the projector
    const int d = 9;
    InvariantProjector p2 = invariant_projector(ProjectorVariant::test2, 1, d);
    CVec four = CVec::Zero(d);
    four(4) = 1.0;
    CVec two = product_vector(four, 2);
    const double direct = (two.adjoint() * p2.matrix * two)(0).real();
    CHECK(acceptance_probability(TestId::test2, PureFockState(1, d, four)) == doctest::Approx(direct));

    CHECK_THROWS_AS(parse_test_id("7"), InvalidArgument);
    CHECK(parse_test_id("2p") == TestId::test2prime);
    CHECK(to_string(parse_test_id("2'")) == "2'");
}

TEST_CASE("perfect completeness on Gaussian fixtures") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        GaussianState g = random_gaussian_pure(1, 0.25, seed);
        FockState s = gaussian_state_to_fock(g, minimal_cutoff(g, 1e-10));
        for (TestId t : {TestId::test1, TestId::test2, TestId::test2prime, TestId::test4, TestId::test5})
            CHECK(acceptance_probability(t, s) >= 1.0 - 1e-5);
    }
    for (const char* spec : {"coherent:0.4", "coherent:0.2,0.3", "squeezed:0.2"}) {
        Fixture f = make_fixture(spec, std::nullopt, 1e-8);
        for (TestId t : {TestId::test3, TestId::test4, TestId::test5})
            CHECK(acceptance_probability(t, f.state) >= 1.0 - 1e-5);
    }
    Fixture sq = make_fixture("squeezed:0.3");
    CHECK(acceptance_probability(TestId::test2prime, sq.state) >= 1.0 - 1e-6);
}

TEST_CASE("monotonicity between tests") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 8; ++t) {
        CVec v(5);
        for (auto& x : v) x = Complex(nd(rng), nd(rng));
        PureFockState s(1, 5, v);
        CHECK(acceptance_probability(TestId::test1, s) <= acceptance_probability(TestId::test2, s) + 1e-9);
        CHECK(acceptance_probability(TestId::test4, s) <= acceptance_probability(TestId::test5, s) + 1e-9);
    }
}

TEST_CASE("mixed states are penalized") {
    for (const char* spec : {"thermal:0.5", "thermal:1"}) {
        Fixture f = make_fixture(spec);
        const double purity = spectral_functionals(to_mixed(f.state)).purity;
        REQUIRE(purity <= 0.9);
        CHECK(acceptance_probability(TestId::test2, f.state) <= 0.999);
    }
}

TEST_CASE("product check") {
    Fixture coh = make_fixture("coherent:0.5");
    Test3Result r = test3_product_check(std::get<PureFockState>(coh.state));
    CHECK(r.purity == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.swap_test_accept_prob == doctest::Approx(0.5 * (1.0 + r.purity)));

    Fixture sq = make_fixture("squeezed:0.3");
    Test3Result rs = test3_product_check(std::get<PureFockState>(sq.state));
    CHECK(rs.purity == doctest::Approx(1.0).epsilon(1e-6));

    Test3Result r1 = test3_product_check(PureFockState::basis(1, 4, {1}));
    CHECK(r1.purity < 0.99);

    Test3Result rv = test3_product_check(PureFockState::vacuum(1, 3));
    CHECK(rv.purity == doctest::Approx(1.0));
    CHECK(std::abs(rv.sigma.matrix()(0, 0) - Complex(1.0)) < 1e-12);
}

TEST_CASE("generator moments") {
    CHECK(std::abs(generator_moments(make_fixture("vacuum").state, GeneratorKind::G).g2) < 1e-12);
    GeneratorMoments th = generator_moments(make_fixture("thermal:1").state, GeneratorKind::G);
    CHECK(th.g2 == doctest::Approx(4.0).epsilon(1e-8));
    CHECK(th.bound_ok);

    GeneratorMoments one = generator_moments(PureFockState::basis(1, 6, {1}), GeneratorKind::Gtilde);
    CHECK(one.g2 == doctest::Approx(12.0).epsilon(1e-10));
    CHECK(std::isnan(one.bound));
    CHECK(one.energy_second_moment == doctest::Approx(2.25));

    // brute force with the truncated generator on three copies of |1>
    GeneratorOperator gt = rotation_generator(GeneratorKind::Gtilde, 1, 4);
    CVec e1 = CVec::Zero(4);
    e1(1) = 1.0;
    CVec psi = product_vector(e1, 3);
    CVec g1 = gt.matrix * psi;
    CVec g2v = gt.matrix * g1;
    CHECK(g1.squaredNorm() == doctest::Approx(one.g2));
    CHECK(g2v.squaredNorm() == doctest::Approx(one.g4));

    GeneratorMoments g1m = generator_moments(PureFockState::basis(1, 6, {1}), GeneratorKind::G);
    CHECK(g1m.g4 <= g1m.bound + 1e-6);

    CHECK_THROWS_AS(generator_moments(make_fixture("coherent:0.5").state, GeneratorKind::G), PreconditionError);
    CHECK_NOTHROW(generator_moments(make_fixture("coherent:0.5").state, GeneratorKind::Gtilde));
}

TEST_CASE("generator identity on random Gaussians") {
    std::mt19937_64 rng(77);
    for (int t = 0; t < 6; ++t) {
        const int n = 1 + t % 2;
        GaussianState g = random_mixed_gaussian(n, rng);
        const int d = minimal_cutoff(g, 1e-10);
        FockState s = gaussian_state_to_fock(g, d);
        RVec nu = symplectic_eigenvalues(g.cov());
        const double sum = (nu.array().square() - 1.0).sum();
        GeneratorMoments gm = generator_moments(s, GeneratorKind::G);
        GeneratorMoments gtm = generator_moments(s, GeneratorKind::Gtilde);
        CHECK(std::abs(gm.g2 - 0.5 * sum) < 1e-5);
        CHECK(std::abs(gtm.g2 - 1.5 * sum) < 1e-5);
        CHECK(gm.bound_ok);
    }
}
