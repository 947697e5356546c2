#include "gausstest/fock.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gausstest/error.hpp"

namespace gausstest {

namespace {

constexpr double kHermTol = 1e-12;
constexpr double kHermRepairTol = 1e-9;
constexpr double kEigFloor = -1e-10;

std::size_t ipow(std::size_t b, int e) {
    std::size_t r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

void check_cutoff(int d) {
    if (d < 2) throw InvalidArgument("cutoff must be >= 2, got " + std::to_string(d));
}

void check_modes(int n) {
    if (n < 1) throw InvalidArgument("mode count must be >= 1, got " + std::to_string(n));
}

std::vector<std::size_t> pad_map(const FockShape& from, int new_cutoff) {
    FockShape to{from.modes, new_cutoff};
    std::vector<std::size_t> map(from.dim());
    for (std::size_t i = 0; i < from.dim(); ++i) map[i] = to.index(from.unindex(i));
    return map;
}

bool offdiagonal_zero(const CMat& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (i != j && m(i, j) != Complex(0.0)) return false;
    return true;
}

}  // namespace

std::size_t FockShape::dim() const { return ipow(static_cast<std::size_t>(cutoff), modes); }

std::size_t FockShape::index(const FockIndex& k) const {
    if (static_cast<int>(k.size()) != modes)
        throw InvalidArgument("Fock index has " + std::to_string(k.size()) + " entries, expected " +
                              std::to_string(modes));
    std::size_t idx = 0;
    for (int v : k) {
        if (v < 0 || v >= cutoff)
            throw InvalidArgument("occupation " + std::to_string(v) + " outside [0, " +
                                  std::to_string(cutoff) + ")");
        idx = idx * cutoff + v;
    }
    return idx;
}

FockIndex FockShape::unindex(std::size_t idx) const {
    FockIndex k(modes);
    for (int i = modes - 1; i >= 0; --i) {
        k[i] = static_cast<int>(idx % cutoff);
        idx /= cutoff;
    }
    return k;
}

int FockShape::total_photons(std::size_t idx) const {
    int t = 0;
    for (int i = 0; i < modes; ++i) {
        t += static_cast<int>(idx % cutoff);
        idx /= cutoff;
    }
    return t;
}

PureFockState::PureFockState(int modes, int cutoff, CVec amplitudes, double leakage)
    : shape_{modes, cutoff}, amps_(std::move(amplitudes)), leakage_(leakage) {
    check_modes(modes);
    check_cutoff(cutoff);
    if (static_cast<std::size_t>(amps_.size()) != shape_.dim())
        throw InvalidArgument("amplitude vector has length " + std::to_string(amps_.size()) +
                              ", expected " + std::to_string(shape_.dim()));
    if (!(leakage >= 0.0 && leakage <= 1.0)) throw InvalidArgument("leakage must lie in [0,1]");
    double nrm = amps_.norm();
    if (!(nrm > 0.0) || !std::isfinite(nrm)) throw InvalidArgument("amplitudes have zero or non-finite norm");
    amps_ /= nrm;
}

PureFockState PureFockState::basis(int modes, int cutoff, const FockIndex& k) {
    FockShape s{modes, cutoff};
    CVec v = CVec::Zero(s.dim());
    v(s.index(k)) = 1.0;
    return PureFockState(modes, cutoff, std::move(v));
}

PureFockState PureFockState::vacuum(int modes, int cutoff) {
    return basis(modes, cutoff, FockIndex(modes, 0));
}

PureFockState PureFockState::padded(int new_cutoff) const {
    if (new_cutoff < cutoff()) throw InvalidArgument("padding cannot shrink the cutoff");
    auto map = pad_map(shape_, new_cutoff);
    CVec v = CVec::Zero(FockShape{modes(), new_cutoff}.dim());
    for (std::size_t i = 0; i < map.size(); ++i) v(map[i]) = amps_(i);
    return PureFockState(modes(), new_cutoff, std::move(v), leakage_);
}

MixedFockState::MixedFockState(int modes, int cutoff, CMat matrix, double leakage)
    : shape_{modes, cutoff}, rho_(std::move(matrix)), leakage_(leakage) {
    check_modes(modes);
    check_cutoff(cutoff);
    const auto dim = static_cast<Eigen::Index>(shape_.dim());
    if (rho_.rows() != dim || rho_.cols() != dim)
        throw InvalidArgument("density matrix is " + std::to_string(rho_.rows()) + "x" +
                              std::to_string(rho_.cols()) + ", expected " + std::to_string(dim));
    if (!rho_.allFinite()) throw InvalidArgument("density matrix has non-finite entries");
    if (!(leakage >= 0.0 && leakage <= 1.0)) throw InvalidArgument("leakage must lie in [0,1]");

    double asym = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
    if (asym > kHermRepairTol)
        throw InvalidArgument("density matrix is not Hermitian (deviation " + std::to_string(asym) + ")");
    if (asym > 0.0) rho_ = (0.5 * (rho_ + rho_.adjoint())).eval();

    diagonal_ = offdiagonal_zero(rho_);
    double tr = rho_.trace().real();
    if (!(tr > 0.0)) throw InvalidArgument("density matrix has non-positive trace");
    rho_ /= tr;

    if (diagonal_) {
        RVec d = rho_.diagonal().real();
        if (d.minCoeff() < kEigFloor) {
            d = d.cwiseMax(0.0);
            d /= d.sum();
            rho_ = d.cast<Complex>().asDiagonal();
            clamped_ = true;
        }
        return;
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(rho_);
    if (es.eigenvalues().minCoeff() < kEigFloor) {
        RVec ev = es.eigenvalues().cwiseMax(0.0);
        ev /= ev.sum();
        rho_ = es.eigenvectors() * ev.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
        rho_ = (0.5 * (rho_ + rho_.adjoint())).eval();
        clamped_ = true;
    }
}

MixedFockState MixedFockState::from_pure(const PureFockState& psi) {
    const CVec& v = psi.amplitudes();
    return MixedFockState(psi.modes(), psi.cutoff(), v * v.adjoint(), psi.leakage());
}

MixedFockState MixedFockState::diagonal(int modes, int cutoff, const RVec& probs, double leakage) {
    CMat m = probs.cast<Complex>().asDiagonal();
    return MixedFockState(modes, cutoff, std::move(m), leakage);
}

RVec MixedFockState::diagonal_probabilities() const { return rho_.diagonal().real(); }

MixedFockState MixedFockState::padded(int new_cutoff) const {
    if (new_cutoff < cutoff()) throw InvalidArgument("padding cannot shrink the cutoff");
    auto map = pad_map(shape_, new_cutoff);
    const auto big = static_cast<Eigen::Index>(FockShape{modes(), new_cutoff}.dim());
    CMat m = CMat::Zero(big, big);
    for (std::size_t j = 0; j < map.size(); ++j)
        for (std::size_t i = 0; i < map.size(); ++i) m(map[i], map[j]) = rho_(i, j);
    return MixedFockState(modes(), new_cutoff, std::move(m), leakage_);
}

const FockShape& shape_of(const FockState& s) {
    return std::visit([](const auto& x) -> const FockShape& { return x.shape(); }, s);
}

double leakage_of(const FockState& s) {
    return std::visit([](const auto& x) { return x.leakage(); }, s);
}

MixedFockState to_mixed(const FockState& s) {
    if (auto p = std::get_if<PureFockState>(&s)) return MixedFockState::from_pure(*p);
    return std::get<MixedFockState>(s);
}

ModeOperators build_mode_operators(int d) {
    check_cutoff(d);
    ModeOperators ops;
    ops.cutoff = d;
    CMat a = CMat::Zero(d, d);
    for (int k = 1; k < d; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    CMat adag = a.adjoint();
    const double s = 1.0 / std::sqrt(2.0);
    const Complex i(0.0, 1.0);
    CMat number = CMat::Zero(d, d);
    CMat energy = CMat::Zero(d, d);
    for (int k = 0; k < d; ++k) {
        number(k, k) = static_cast<double>(k);
        energy(k, k) = k + 0.5;
    }
    ops.a = {OperatorKind::annihilation, a};
    ops.adag = {OperatorKind::creation, adag};
    ops.x = {OperatorKind::position, s * (a + adag)};
    ops.p = {OperatorKind::momentum, (s / i) * (a - adag)};
    ops.number = {OperatorKind::number, number};
    ops.energy = {OperatorKind::energy, energy};
    return ops;
}

CMat embed_mode_operator(const CMat& single, int mode, const FockShape& shape) {
    if (mode < 0 || mode >= shape.modes) throw InvalidArgument("mode index out of range");
    if (single.rows() != shape.cutoff || single.cols() != shape.cutoff)
        throw InvalidArgument("single-mode operator does not match the cutoff");
    const auto outer = static_cast<Eigen::Index>(ipow(shape.cutoff, mode));
    const auto inner = static_cast<Eigen::Index>(ipow(shape.cutoff, shape.modes - mode - 1));
    const Eigen::Index d = shape.cutoff;
    const auto dim = static_cast<Eigen::Index>(shape.dim());
    CMat out = CMat::Zero(dim, dim);
    for (Eigen::Index o = 0; o < outer; ++o)
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index c = 0; c < d; ++c) {
                Complex v = single(r, c);
                if (v == Complex(0.0)) continue;
                for (Eigen::Index in = 0; in < inner; ++in)
                    out((o * d + r) * inner + in, (o * d + c) * inner + in) = v;
            }
    return out;
}

CVec apply_mode_operator(const CMat& single, int mode, const FockShape& shape, const CVec& v) {
    if (mode < 0 || mode >= shape.modes) throw InvalidArgument("mode index out of range");
    if (single.rows() != shape.cutoff || single.cols() != shape.cutoff)
        throw InvalidArgument("single-mode operator does not match the cutoff");
    if (static_cast<std::size_t>(v.size()) != shape.dim())
        throw InvalidArgument("vector does not match the Fock shape");
    const auto outer = static_cast<Eigen::Index>(ipow(shape.cutoff, mode));
    const auto inner = static_cast<Eigen::Index>(ipow(shape.cutoff, shape.modes - mode - 1));
    const Eigen::Index d = shape.cutoff;
    struct Entry {
        Eigen::Index r, c;
        Complex v;
    };
    std::vector<Entry> nz;
    for (Eigen::Index c = 0; c < d; ++c)
        for (Eigen::Index r = 0; r < d; ++r)
            if (single(r, c) != Complex(0.0)) nz.push_back({r, c, single(r, c)});
    CVec out = CVec::Zero(v.size());
    for (Eigen::Index o = 0; o < outer; ++o) {
        const Eigen::Index base = o * d * inner;
        for (const auto& e : nz) {
            const Eigen::Index ro = base + e.r * inner;
            const Eigen::Index co = base + e.c * inner;
            for (Eigen::Index in = 0; in < inner; ++in) out(ro + in) += e.v * v(co + in);
        }
    }
    return out;
}

CMat total_number_operator(const FockShape& shape) {
    RVec diag(shape.dim());
    for (std::size_t i = 0; i < shape.dim(); ++i) diag(i) = shape.total_photons(i);
    return diag.cast<Complex>().asDiagonal();
}

CMat total_energy_operator(const FockShape& shape) {
    RVec diag(shape.dim());
    for (std::size_t i = 0; i < shape.dim(); ++i) diag(i) = shape.total_photons(i) + 0.5 * shape.modes;
    return diag.cast<Complex>().asDiagonal();
}

CMat parity_projector(const FockShape& shape) {
    RVec diag(shape.dim());
    for (std::size_t i = 0; i < shape.dim(); ++i) diag(i) = shape.total_photons(i) % 2 == 0 ? 1.0 : 0.0;
    return diag.cast<Complex>().asDiagonal();
}

Complex expectation_value(const PureFockState& s, const CMat& op) {
    const auto dim = static_cast<Eigen::Index>(s.dim());
    if (op.rows() != dim || op.cols() != dim)
        throw InvalidArgument("operator dimension " + std::to_string(op.rows()) +
                              " does not match state dimension " + std::to_string(dim));
    return s.amplitudes().dot(op * s.amplitudes());
}

Complex expectation_value(const MixedFockState& s, const CMat& op) {
    const auto dim = static_cast<Eigen::Index>(s.dim());
    if (op.rows() != dim || op.cols() != dim)
        throw InvalidArgument("operator dimension " + std::to_string(op.rows()) +
                              " does not match state dimension " + std::to_string(dim));
    // Tr[op rho] = sum_ij op_ij rho_ji
    return (op.cwiseProduct(s.matrix().transpose())).sum();
}

Complex expectation_value(const FockState& s, const CMat& op) {
    return std::visit([&](const auto& x) { return expectation_value(x, op); }, s);
}

PureFockState tensor_product(const PureFockState& a, const PureFockState& b) {
    if (a.cutoff() != b.cutoff()) throw InvalidArgument("tensor product requires equal cutoffs");
    CVec v(a.dim() * b.dim());
    for (std::size_t i = 0; i < a.dim(); ++i)
        v.segment(i * b.dim(), b.dim()) = a.amplitudes()(i) * b.amplitudes();
    double leak = 1.0 - (1.0 - a.leakage()) * (1.0 - b.leakage());
    return PureFockState(a.modes() + b.modes(), a.cutoff(), std::move(v), leak);
}

MixedFockState tensor_product(const MixedFockState& a, const MixedFockState& b) {
    if (a.cutoff() != b.cutoff()) throw InvalidArgument("tensor product requires equal cutoffs");
    const auto da = static_cast<Eigen::Index>(a.dim());
    const auto db = static_cast<Eigen::Index>(b.dim());
    CMat m(da * db, da * db);
    for (Eigen::Index j = 0; j < da; ++j)
        for (Eigen::Index i = 0; i < da; ++i) m.block(i * db, j * db, db, db) = a.matrix()(i, j) * b.matrix();
    double leak = 1.0 - (1.0 - a.leakage()) * (1.0 - b.leakage());
    return MixedFockState(a.modes() + b.modes(), a.cutoff(), std::move(m), leak);
}

MixedFockState partial_trace(const MixedFockState& s, const std::vector<int>& keep_in) {
    const FockShape& sh = s.shape();
    if (keep_in.empty()) throw InvalidArgument("partial trace needs a non-empty mode subset");
    std::vector<int> keep = keep_in;
    std::sort(keep.begin(), keep.end());
    if (std::adjacent_find(keep.begin(), keep.end()) != keep.end())
        throw InvalidArgument("partial trace subset has repeated modes");
    if (keep.front() < 0 || keep.back() >= sh.modes) throw InvalidArgument("partial trace subset out of range");
    std::vector<int> traced;
    for (int m = 0; m < sh.modes; ++m)
        if (!std::binary_search(keep.begin(), keep.end(), m)) traced.push_back(m);

    FockShape ks{static_cast<int>(keep.size()), sh.cutoff};
    const std::size_t kd = ks.dim();
    const std::size_t td = traced.empty() ? 1 : FockShape{static_cast<int>(traced.size()), sh.cutoff}.dim();
    // full index for (kept multi-index, traced multi-index)
    std::vector<std::size_t> full(kd * td);
    FockShape ts{std::max<int>(1, static_cast<int>(traced.size())), sh.cutoff};
    for (std::size_t ki = 0; ki < kd; ++ki) {
        FockIndex kk = ks.unindex(ki);
        for (std::size_t ti = 0; ti < td; ++ti) {
            FockIndex k(sh.modes);
            for (std::size_t q = 0; q < keep.size(); ++q) k[keep[q]] = kk[q];
            if (!traced.empty()) {
                FockIndex tt = ts.unindex(ti);
                for (std::size_t q = 0; q < traced.size(); ++q) k[traced[q]] = tt[q];
            }
            full[ki * td + ti] = sh.index(k);
        }
    }
    CMat r = CMat::Zero(kd, kd);
    for (std::size_t j = 0; j < kd; ++j)
        for (std::size_t i = 0; i < kd; ++i) {
            Complex acc = 0.0;
            for (std::size_t t = 0; t < td; ++t) acc += s.matrix()(full[i * td + t], full[j * td + t]);
            r(i, j) = acc;
        }
    return MixedFockState(ks.modes, sh.cutoff, std::move(r), s.leakage());
}

double trace_distance_exact(const MixedFockState& a, const MixedFockState& b) {
    if (!(a.shape() == b.shape())) throw InvalidArgument("trace distance requires equal modes and cutoff");
    double t;
    if (a.is_diagonal() && b.is_diagonal()) {
        t = 0.5 * (a.diagonal_probabilities() - b.diagonal_probabilities()).cwiseAbs().sum();
    } else {
        CMat diff = a.matrix() - b.matrix();
        Eigen::SelfAdjointEigenSolver<CMat> es(diff, Eigen::EigenvaluesOnly);
        t = 0.5 * es.eigenvalues().cwiseAbs().sum();
    }
    return std::clamp(t, 0.0, 1.0);
}

double entropy_from_spectrum(const RVec& ev) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev(i) > 1e-300) s -= ev(i) * std::log(ev(i));
    return std::max(s, 0.0);
}

SpectralFunctionals spectral_functionals(const MixedFockState& s, const PureFockState* target) {
    RVec ev;
    if (s.is_diagonal()) {
        ev = s.diagonal_probabilities();
    } else {
        Eigen::SelfAdjointEigenSolver<CMat> es(s.matrix(), Eigen::EigenvaluesOnly);
        ev = es.eigenvalues();
    }
    if (ev.minCoeff() < kEigFloor) throw InvalidArgument("state is not positive semidefinite");
    SpectralFunctionals f;
    f.purity = std::min(1.0, s.matrix().cwiseAbs2().sum());
    f.von_neumann_entropy = entropy_from_spectrum(ev);
    if (target) {
        if (!(target->shape() == s.shape())) throw InvalidArgument("fidelity target has a different shape");
        const CVec& v = target->amplitudes();
        f.fidelity = std::clamp(v.dot(s.matrix() * v).real(), 0.0, 1.0);
    }
    return f;
}

Ensemble spectral_ensemble(const FockState& st, double weight_floor) {
    Ensemble e;
    e.shape = shape_of(st);
    if (auto p = std::get_if<PureFockState>(&st)) {
        e.weights.push_back(1.0);
        e.vectors.push_back(p->amplitudes());
        return e;
    }
    const auto& m = std::get<MixedFockState>(st);
    if (m.is_diagonal()) {
        RVec d = m.diagonal_probabilities();
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            if (d(i) <= weight_floor) continue;
            CVec v = CVec::Zero(d.size());
            v(i) = 1.0;
            e.weights.push_back(d(i));
            e.vectors.push_back(std::move(v));
        }
        return e;
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(m.matrix());
    for (Eigen::Index i = es.eigenvalues().size() - 1; i >= 0; --i) {
        if (es.eigenvalues()(i) <= weight_floor) continue;
        e.weights.push_back(es.eigenvalues()(i));
        e.vectors.push_back(es.eigenvectors().col(i));
    }
    return e;
}

Ensemble padded(const Ensemble& e, int new_cutoff) {
    if (new_cutoff < e.shape.cutoff) throw InvalidArgument("padding cannot shrink the cutoff");
    auto map = pad_map(e.shape, new_cutoff);
    Ensemble out;
    out.shape = {e.shape.modes, new_cutoff};
    out.weights = e.weights;
    for (const auto& v : e.vectors) {
        CVec w = CVec::Zero(out.shape.dim());
        for (std::size_t i = 0; i < map.size(); ++i) w(map[i]) = v(i);
        out.vectors.push_back(std::move(w));
    }
    return out;
}

}  // namespace gausstest
