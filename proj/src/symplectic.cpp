#include "gausstest/symplectic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gausstest/error.hpp"

namespace gausstest {

namespace {

constexpr double kCovSymTol = 1e-10;
constexpr double kUncertaintyTol = 1e-8;
constexpr double kMaxCondition = 1e12;

struct RawAmplitudes {
    CVec amps;  // exact amplitudes on the truncated grid
    double leakage;
};

// Amplitudes <k|psi> for a pure Gaussian state on `modes` modes.
// With Z = W + iU from the Gaussian wavefunction, a psi = (B a^dag + gamma) psi
// where B = (I - Z)(I + Z)^{-1} and gamma = alpha - B conj(alpha). This gives
// sqrt(k_i + 1) psi(k + e_i) = gamma_i psi(k) + sum_j B_ij sqrt(k_j) psi(k - e_j).
RawAmplitudes pure_amplitudes(const RVec& mean, const RMat& cov, int d) {
    const int n = static_cast<int>(mean.size() / 2);
    const RMat vxx = cov.topLeftCorner(n, n);
    const RMat vxp = cov.topRightCorner(n, n);
    const RMat wmat = vxx.inverse();
    const RMat umat = -0.5 * (wmat * vxp + vxp.transpose() * wmat);
    CMat z = wmat.cast<Complex>() + Complex(0.0, 1.0) * umat.cast<Complex>();
    CMat id = CMat::Identity(n, n);
    CMat bmat = (id - z) * (id + z).inverse();
    bmat = (0.5 * (bmat + bmat.transpose())).eval();
    CVec alpha(n);
    for (int i = 0; i < n; ++i) alpha(i) = Complex(mean(i), mean(n + i)) / std::sqrt(2.0);
    CVec gamma = alpha - bmat * alpha.conjugate();

    const RVec mvec = mean;
    const RMat vpi = cov + RMat::Identity(2 * n, 2 * n);
    Eigen::LDLT<RMat> ldlt(vpi);
    const double quad = mvec.dot(ldlt.solve(mvec));
    const double p0 = std::pow(2.0, n) * std::exp(-quad) / std::sqrt(vpi.determinant());

    FockShape shape{n, d};
    const std::size_t dim = shape.dim();
    std::vector<std::size_t> stride(n);
    for (int i = n - 1, s = 1; i >= 0; --i, s *= d) stride[i] = s;
    std::vector<double> sq(d + 1);
    for (int k = 0; k <= d; ++k) sq[k] = std::sqrt(static_cast<double>(k));

    CVec amps = CVec::Zero(dim);
    amps(0) = std::sqrt(p0);
    FockIndex k(n, 0);
    for (std::size_t idx = 1; idx < dim; ++idx) {
        for (int m = n - 1; m >= 0; --m) {  // increment row-major multi-index
            if (++k[m] < d) break;
            k[m] = 0;
        }
        int i = 0;
        while (k[i] == 0) ++i;
        const std::size_t prev = idx - stride[i];
        Complex acc = gamma(i) * amps(prev);
        for (int j = 0; j < n; ++j) {
            const int kj = k[j] - (j == i ? 1 : 0);
            if (kj == 0 || bmat(i, j) == Complex(0.0)) continue;
            acc += bmat(i, j) * sq[kj] * amps(prev - stride[j]);
        }
        amps(idx) = acc / sq[k[i]];
    }
    double leak = std::clamp(1.0 - amps.squaredNorm(), 0.0, 1.0);
    return {std::move(amps), leak};
}

bool is_thermal_product(const GaussianState& g) {
    const int n = g.n();
    if (g.mean().cwiseAbs().maxCoeff() != 0.0) return false;
    for (int j = 0; j < 2 * n; ++j)
        for (int i = 0; i < 2 * n; ++i)
            if (i != j && g.cov()(i, j) != 0.0) return false;
    for (int i = 0; i < n; ++i)
        if (g.cov()(i, i) != g.cov()(n + i, n + i)) return false;
    return true;
}

RVec thermal_ratios(const GaussianState& g) {
    RVec x(g.n());
    for (int i = 0; i < g.n(); ++i) {
        const double nu = g.cov()(i, i);
        x(i) = (nu - 1.0) / (nu + 1.0);
    }
    return x;
}

// Purification on 2n modes (system then ancilla): (S + I) applied to a
// product of two-mode squeezed vacua with the Williamson spectrum.
GaussianState purification(const GaussianState& g) {
    const int n = g.n();
    WilliamsonFactors wf = williamson_decomposition(g.cov());
    const int m = 2 * n;
    RMat vt = RMat::Zero(2 * m, 2 * m);
    for (int i = 0; i < n; ++i) {
        const double nu = std::max(1.0, wf.nu(i));
        const double c = std::sqrt(std::max(0.0, nu * nu - 1.0));
        const int xs = i, xa = n + i, ps = m + i, pa = m + n + i;
        vt(xs, xs) = vt(xa, xa) = vt(ps, ps) = vt(pa, pa) = nu;
        vt(xs, xa) = vt(xa, xs) = c;
        vt(ps, pa) = vt(pa, ps) = -c;
    }
    RMat t = RMat::Identity(2 * m, 2 * m);
    for (int r = 0; r < 2 * n; ++r)
        for (int c = 0; c < 2 * n; ++c) {
            const int rr = r < n ? r : m + (r - n);
            const int cc = c < n ? c : m + (c - n);
            t(rr, cc) = wf.S(r, c);
        }
    RMat vp = t * vt * t.transpose();
    vp = (0.5 * (vp + vp.transpose())).eval();
    RVec mp = RVec::Zero(2 * m);
    mp.segment(0, n) = g.mean().segment(0, n);
    mp.segment(m, n) = g.mean().segment(n, n);
    return GaussianState(mp, vp);
}

MixedFockState reduce_purified(const CVec& amps, int n, int d, double leakage) {
    const auto ds = static_cast<Eigen::Index>(FockShape{n, d}.dim());
    Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> mat(amps.data(), ds, ds);
    CMat rho = mat * mat.adjoint();
    return MixedFockState(n, d, std::move(rho), leakage);
}

void check_leakage(double leak, double bound, int d) {
    if (leak > bound)
        throw LeakageError("cutoff " + std::to_string(d) + " leaves leakage " + std::to_string(leak) +
                               " above the budget " + std::to_string(bound),
                           leak);
}

}  // namespace

GaussianState::GaussianState(RVec mean, RMat cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    if (mean_.size() == 0 || mean_.size() % 2 != 0) throw InvalidArgument("mean must have even, nonzero length");
    n_ = static_cast<int>(mean_.size() / 2);
    if (cov_.rows() != 2 * n_ || cov_.cols() != 2 * n_)
        throw InvalidArgument("covariance must be " + std::to_string(2 * n_) + "x" + std::to_string(2 * n_));
    if (!cov_.allFinite() || !mean_.allFinite()) throw InvalidArgument("non-finite Gaussian moments");
    if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > kCovSymTol)
        throw InvalidArgument("covariance is not symmetric");
    cov_ = (0.5 * (cov_ + cov_.transpose())).eval();
    CMat unc = cov_.cast<Complex>() + Complex(0.0, 1.0) * symplectic_form(n_).cast<Complex>();
    Eigen::SelfAdjointEigenSolver<CMat> es(unc, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kUncertaintyTol)
        throw InvalidArgument("covariance violates the uncertainty relation V + i Omega >= 0");
}

GaussianState GaussianState::vacuum(int n) {
    return GaussianState(RVec::Zero(2 * n), RMat::Identity(2 * n, 2 * n));
}

GaussianState GaussianState::thermal(int n, double nbar) {
    if (nbar < 0) throw InvalidArgument("mean photon number must be >= 0");
    return GaussianState(RVec::Zero(2 * n), (2.0 * nbar + 1.0) * RMat::Identity(2 * n, 2 * n));
}

GaussianState GaussianState::coherent(Complex alpha) {
    RVec m(2);
    m << std::sqrt(2.0) * alpha.real(), std::sqrt(2.0) * alpha.imag();
    return GaussianState(m, RMat::Identity(2, 2));
}

GaussianState GaussianState::squeezed(double r) {
    RMat c = RMat::Zero(2, 2);
    c(0, 0) = std::exp(2.0 * r);
    c(1, 1) = std::exp(-2.0 * r);
    return GaussianState(RVec::Zero(2), c);
}

bool GaussianState::is_pure(double tol) const {
    RVec nu = symplectic_eigenvalues(cov_);
    return (nu.array() - 1.0).abs().maxCoeff() < tol;
}

RMat symplectic_form(int n) {
    RMat om = RMat::Zero(2 * n, 2 * n);
    om.topRightCorner(n, n) = RMat::Identity(n, n);
    om.bottomLeftCorner(n, n) = -RMat::Identity(n, n);
    return om;
}

RMat spd_sqrt(const RMat& m) {
    Eigen::SelfAdjointEigenSolver<RMat> es(m);
    if (es.eigenvalues().minCoeff() <= 0.0) throw InvalidArgument("matrix is not positive definite");
    return es.operatorSqrt();
}

RMat spd_inverse_sqrt(const RMat& m) {
    Eigen::SelfAdjointEigenSolver<RMat> es(m);
    if (es.eigenvalues().minCoeff() <= 0.0) throw InvalidArgument("matrix is not positive definite");
    return es.operatorInverseSqrt();
}

double operator_norm(const RMat& m) {
    Eigen::JacobiSVD<RMat> svd(m);
    return svd.singularValues()(0);
}

Moments moments_of_state(const FockState& s, double leakage_bound) {
    const double leak = leakage_of(s);
    if (leak > leakage_bound)
        throw LeakageError("state leakage " + std::to_string(leak) + " exceeds the moment budget " +
                               std::to_string(leakage_bound),
                           leak);
    const FockShape& sh = shape_of(s);
    const int n = sh.modes;
    Ensemble e = padded(spectral_ensemble(s, 0.0), sh.cutoff + 1);
    ModeOperators ops = build_mode_operators(sh.cutoff + 1);
    Moments mo;
    mo.mean = RVec::Zero(2 * n);
    RMat second = RMat::Zero(2 * n, 2 * n);
    for (std::size_t c = 0; c < e.vectors.size(); ++c) {
        const CVec& v = e.vectors[c];
        std::vector<CVec> rv;
        for (int q = 0; q < 2 * n; ++q)
            rv.push_back(apply_mode_operator(q < n ? ops.x.matrix : ops.p.matrix, q % n, e.shape, v));
        for (int i = 0; i < 2 * n; ++i) {
            mo.mean(i) += e.weights[c] * v.dot(rv[i]).real();
            for (int j = 0; j < 2 * n; ++j) second(i, j) += e.weights[c] * 2.0 * rv[i].dot(rv[j]).real();
        }
    }
    mo.cov = second - 2.0 * mo.mean * mo.mean.transpose();
    mo.cov = (0.5 * (mo.cov + mo.cov.transpose())).eval();
    return mo;
}

RVec symplectic_eigenvalues(const RMat& cov) {
    if (cov.rows() != cov.cols() || cov.rows() % 2 != 0) throw InvalidArgument("covariance must be 2n x 2n");
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > kCovSymTol)
        throw InvalidArgument("covariance is not symmetric");
    const int n = static_cast<int>(cov.rows() / 2);
    RMat half = spd_sqrt(0.5 * (cov + cov.transpose()));
    RMat k = half * symplectic_form(n) * half;
    CMat h = Complex(0.0, 1.0) * k.cast<Complex>();
    Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
    RVec nu(n);
    for (int i = 0; i < n; ++i) nu(i) = es.eigenvalues()(2 * n - 1 - i);
    return nu;
}

WilliamsonFactors williamson_decomposition(const RMat& cov) {
    if (cov.rows() != cov.cols() || cov.rows() % 2 != 0) throw InvalidArgument("covariance must be 2n x 2n");
    const int n = static_cast<int>(cov.rows() / 2);
    RMat v = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<RMat> ves(v);
    const double lo = ves.eigenvalues().minCoeff();
    const double hi = ves.eigenvalues().maxCoeff();
    if (lo <= 0.0) throw InvalidArgument("covariance is not positive definite");
    if (hi / lo > kMaxCondition)
        throw NumericalError("covariance condition number " + std::to_string(hi / lo) + " exceeds 1e12");
    RMat half = ves.operatorSqrt();
    RMat ihalf = ves.operatorInverseSqrt();
    RMat mm = ihalf * symplectic_form(n) * ihalf;
    CMat h = Complex(0.0, 1.0) * mm.cast<Complex>();
    Eigen::SelfAdjointEigenSolver<CMat> es(h);
    // Positive eigenvalues are 1/nu in ascending order of the upper half; the
    // eigenvector u = (v + i w)/sqrt(2) yields the orthogonal columns w (x-block) and v (p-block).
    RMat o(2 * n, 2 * n);
    RVec nu(n);
    for (int i = 0; i < n; ++i) {
        const Eigen::Index col = n + i;
        const double lam = es.eigenvalues()(col);
        nu(i) = 1.0 / lam;
        CVec u = es.eigenvectors().col(col);
        o.col(i) = std::sqrt(2.0) * u.imag();
        o.col(n + i) = std::sqrt(2.0) * u.real();
    }
    RVec scale(2 * n);
    for (int i = 0; i < n; ++i) scale(i) = scale(n + i) = 1.0 / std::sqrt(nu(i));
    WilliamsonFactors wf;
    wf.S = half * o * scale.asDiagonal();
    wf.nu = nu;
    return wf;
}

double gaussian_fock_leakage(const GaussianState& g, int d) {
    if (d < 2) throw InvalidArgument("cutoff must be >= 2");
    if (is_thermal_product(g)) {
        RVec x = thermal_ratios(g);
        double keep = 1.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) keep *= 1.0 - std::pow(x(i), d);
        return std::clamp(1.0 - keep, 0.0, 1.0);
    }
    if (g.is_pure()) return pure_amplitudes(g.mean(), g.cov(), d).leakage;
    GaussianState p = purification(g);
    return pure_amplitudes(p.mean(), p.cov(), d).leakage;
}

int minimal_cutoff(const GaussianState& g, double target, int d_max) {
    for (int d = 2; d <= d_max; ++d)
        if (gaussian_fock_leakage(g, d) < target) return d;
    throw LeakageError("no cutoff up to " + std::to_string(d_max) + " reaches leakage " + std::to_string(target),
                       gaussian_fock_leakage(g, d_max));
}

PureFockState gaussian_pure_to_fock(const GaussianState& g, int d, double leakage_bound) {
    if (d < 2) throw InvalidArgument("cutoff must be >= 2");
    if (g.n() > 3) throw InvalidArgument("Gaussian to Fock conversion supports at most 3 modes");
    if (!g.is_pure(1e-6)) throw PreconditionError("Gaussian state is not pure (symplectic eigenvalues differ from 1)");
    RawAmplitudes raw = pure_amplitudes(g.mean(), g.cov(), d);
    check_leakage(raw.leakage, leakage_bound, d);
    return PureFockState(g.n(), d, std::move(raw.amps), raw.leakage);
}

MixedFockState gaussian_mixed_to_fock(const GaussianState& g, int d, double leakage_bound) {
    if (d < 2) throw InvalidArgument("cutoff must be >= 2");
    if (g.n() > 3) throw InvalidArgument("Gaussian to Fock conversion supports at most 3 modes");
    const int n = g.n();
    if (is_thermal_product(g)) {
        RVec x = thermal_ratios(g);
        FockShape sh{n, d};
        RVec diag(sh.dim());
        for (std::size_t idx = 0; idx < sh.dim(); ++idx) {
            FockIndex k = sh.unindex(idx);
            double p = 1.0;
            for (int i = 0; i < n; ++i) p *= (1.0 - x(i)) * std::pow(x(i), k[i]);
            diag(idx) = p;
        }
        const double leak = std::clamp(1.0 - diag.sum(), 0.0, 1.0);
        check_leakage(leak, leakage_bound, d);
        return MixedFockState::diagonal(n, d, diag, leak);
    }
    if (g.is_pure()) return MixedFockState::from_pure(gaussian_pure_to_fock(g, d, leakage_bound));
    GaussianState p = purification(g);
    RawAmplitudes raw = pure_amplitudes(p.mean(), p.cov(), d);
    check_leakage(raw.leakage, leakage_bound, d);
    return reduce_purified(raw.amps, n, d, raw.leakage);
}

FockState gaussian_state_to_fock(const GaussianState& g, int d, Purity purity, double leakage_bound) {
    switch (purity) {
        case Purity::pure:
            return gaussian_pure_to_fock(g, d, leakage_bound);
        case Purity::mixed:
            return gaussian_mixed_to_fock(g, d, leakage_bound);
        case Purity::automatic:
            break;
    }
    if (g.is_pure()) return gaussian_pure_to_fock(g, d, leakage_bound);
    return gaussian_mixed_to_fock(g, d, leakage_bound);
}

GaussianState gaussianification(const FockState& s, double leakage_bound) {
    Moments m = moments_of_state(s, leakage_bound);
    return GaussianState(m.mean, m.cov);
}

double gaussian_entropy_h(double nu) {
    const double e = 0.5 * (nu - 1.0);
    if (e <= 0.0) return 0.0;
    if (nu - 1.0 < 1e-6) return e - e * std::log(e) + 0.5 * e * e;
    return (e + 1.0) * std::log(e + 1.0) - e * std::log(e);
}

double gaussian_entropy(const RVec& nu) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < nu.size(); ++i) s += gaussian_entropy_h(nu(i));
    return s;
}

double nongaussianity_relative_entropy(const FockState& s, double leakage_bound) {
    GaussianState g = gaussianification(s, leakage_bound);
    const double sg = gaussian_entropy(symplectic_eigenvalues(g.cov()));
    double sr = 0.0;
    if (auto m = std::get_if<MixedFockState>(&s)) sr = spectral_functionals(*m).von_neumann_entropy;
    return sg - sr;
}

PhaseSpaceValue phase_space_functions(const GaussianState& g, const RVec& r) {
    const int n = g.n();
    if (r.size() != 2 * n) throw InvalidArgument("phase-space point must have length 2n");
    Eigen::LDLT<RMat> ldlt(g.cov());
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
        throw InvalidArgument("covariance is singular");
    RVec om = symplectic_form(n) * r;
    PhaseSpaceValue out;
    out.chi = std::exp(Complex(-0.25 * om.dot(g.cov() * om), om.dot(g.mean())));
    RVec dr = r - g.mean();
    out.wigner = std::exp(-dr.dot(ldlt.solve(dr))) /
                 (std::pow(std::numbers::pi, n) * std::sqrt(g.cov().determinant()));
    return out;
}

RMat random_symplectic(int n, double squeeze_max, std::mt19937_64& rng) {
    if (squeeze_max < 0) throw InvalidArgument("squeeze_max must be >= 0");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto passive = [&]() {
        CMat gin(n, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) gin(i, j) = Complex(normal(rng), normal(rng));
        Eigen::HouseholderQR<CMat> qr(gin);
        CMat q = qr.householderQ();
        CMat r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (int i = 0; i < n; ++i) {
            const double a = std::abs(r(i, i));
            if (a > 0) q.col(i) *= r(i, i) / a;
        }
        RMat k(2 * n, 2 * n);
        k.topLeftCorner(n, n) = q.real();
        k.topRightCorner(n, n) = -q.imag();
        k.bottomLeftCorner(n, n) = q.imag();
        k.bottomRightCorner(n, n) = q.real();
        return k;
    };
    RVec sq(2 * n);
    for (int i = 0; i < n; ++i) {
        const double r = squeeze_max * unif(rng);
        sq(i) = std::exp(r);
        sq(n + i) = std::exp(-r);
    }
    RMat k1 = passive();
    RMat k2 = passive();
    return k1 * sq.asDiagonal() * k2;
}

GaussianState random_gaussian_pure(int n, double squeeze_max, std::uint64_t seed, double displacement_max) {
    if (n < 1) throw InvalidArgument("mode count must be >= 1");
    std::mt19937_64 rng(seed);
    RMat s = random_symplectic(n, squeeze_max, rng);
    RMat cov = s * s.transpose();
    cov = (0.5 * (cov + cov.transpose())).eval();
    RVec mean = RVec::Zero(2 * n);
    if (displacement_max > 0) {
        std::uniform_real_distribution<double> unif(-displacement_max, displacement_max);
        for (int i = 0; i < 2 * n; ++i) mean(i) = unif(rng);
    }
    return GaussianState(mean, cov);
}

}  // namespace gausstest
