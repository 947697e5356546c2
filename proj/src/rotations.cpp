#include "gausstest/rotations.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include <Eigen/Sparse>

#include "gausstest/error.hpp"

namespace gausstest {

namespace {

using RowMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::size_t ipow(std::size_t b, int e) {
    std::size_t r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

std::vector<std::pair<int, int>> copy_pairs(int copies) {
    if (copies == 2) return {{0, 1}};
    if (copies == 3) return {{0, 1}, {1, 2}, {2, 0}};
    throw InvalidArgument("copy rotations need k = 2 or 3 copies, got " + std::to_string(copies));
}

void enumerate(int copies, int photons, std::vector<int>& cur, int pos, std::vector<std::vector<int>>& out) {
    if (pos == copies - 1) {
        cur[pos] = photons;
        out.push_back(cur);
        return;
    }
    for (int o = photons; o >= 0; --o) {
        cur[pos] = o;
        enumerate(copies, photons - o, cur, pos + 1, out);
    }
}

std::unique_ptr<GroupBlock> build_group_block(int copies, int photons) {
    auto gb = std::make_unique<GroupBlock>();
    gb->copies = copies;
    gb->photons = photons;
    std::vector<int> cur(copies, 0);
    enumerate(copies, photons, cur, 0, gb->basis);
    const auto m = static_cast<Eigen::Index>(gb->basis.size());
    gb->generator = CMat::Zero(m, m);
    const Complex i(0.0, 1.0);
    for (Eigen::Index c = 0; c < m; ++c) {
        const auto& o = gb->basis[c];
        for (auto [u, v] : copy_pairs(copies)) {
            if (o[u] > 0) {  // i a_u a_v^dag
                auto t = o;
                --t[u];
                ++t[v];
                gb->generator(gb->rank_of(t), c) += i * std::sqrt(double(o[u]) * (o[v] + 1));
            }
            if (o[v] > 0) {  // -i a_u^dag a_v
                auto t = o;
                ++t[u];
                --t[v];
                gb->generator(gb->rank_of(t), c) -= i * std::sqrt(double(o[u] + 1) * o[v]);
            }
        }
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(gb->generator);
    gb->eigenvalues = es.eigenvalues();
    gb->eigenvectors = es.eigenvectors();
    return gb;
}

// Basis of the product sector (N_1..N_n) and helpers to move between the
// sector basis, the generator eigenbasis and the copy grid.
struct Sector {
    int copies;
    int modes;
    std::vector<int> photons;
    std::vector<const GroupBlock*> legs;
    std::vector<int> dims;
    std::size_t size = 1;

    Sector(int k, const std::vector<int>& nvec) : copies(k), modes(static_cast<int>(nvec.size())), photons(nvec) {
        for (int N : nvec) {
            legs.push_back(&group_block(k, N));
            dims.push_back(static_cast<int>(legs.back()->basis.size()));
            size *= dims.back();
        }
    }

    std::vector<int> unrank(std::size_t idx) const {
        std::vector<int> b(modes);
        for (int i = modes - 1; i >= 0; --i) {
            b[i] = static_cast<int>(idx % dims[i]);
            idx /= dims[i];
        }
        return b;
    }

    // Occupation of mode i in copy c for the sector basis element b.
    int occ(const std::vector<int>& b, int i, int c) const { return legs[i]->basis[b[i]][c]; }

    RVec lambda() const {
        RVec out = RVec::Zero(size);
        for (std::size_t j = 0; j < size; ++j) {
            auto b = unrank(j);
            for (int i = 0; i < modes; ++i) out(j) += legs[i]->eigenvalues(b[i]);
        }
        return out;
    }

    // Grid index of copy c on a per-mode cutoff D, or -1 when it does not fit.
    long copy_index(const std::vector<int>& b, int c, int D) const {
        long idx = 0;
        for (int i = 0; i < modes; ++i) {
            const int o = occ(b, i, c);
            if (o >= D) return -1;
            idx = idx * D + o;
        }
        return idx;
    }

    void apply_legs(CVec& t, bool adjoint) const {
        std::size_t outer = 1;
        for (int i = 0; i < modes; ++i) {
            const std::size_t m = dims[i];
            const std::size_t inner = size / (outer * m);
            const CMat& v = legs[i]->eigenvectors;
            for (std::size_t o = 0; o < outer; ++o) {
                Eigen::Map<RowMat> x(t.data() + o * m * inner, m, inner);
                if (adjoint)
                    x = (v.adjoint() * x).eval();
                else
                    x = (v * x).eval();
            }
            outer *= m;
        }
    }

    CMat dense_eigenvectors() const {
        CMat v = legs[0]->eigenvectors;
        for (int i = 1; i < modes; ++i) {
            const CMat& w = legs[i]->eigenvectors;
            CMat k(v.rows() * w.rows(), v.cols() * w.cols());
            for (Eigen::Index c = 0; c < v.cols(); ++c)
                for (Eigen::Index r = 0; r < v.rows(); ++r) k.block(r * w.rows(), c * w.cols(), w.rows(), w.cols()) = v(r, c) * w;
            v = std::move(k);
        }
        return v;
    }
};

// Components of phi_1 (x) ... (x) phi_k on a sector; each phi lives on (n, d).
CVec sector_tensor(const Sector& s, const std::vector<const CVec*>& vecs, int d) {
    CVec t(s.size);
    for (std::size_t j = 0; j < s.size; ++j) {
        auto b = s.unrank(j);
        Complex v = 1.0;
        for (int c = 0; c < s.copies && v != Complex(0.0); ++c) {
            long idx = s.copy_index(b, c, d);
            v = idx < 0 ? Complex(0.0) : v * (*vecs[c])(idx);
        }
        t(j) = v;
    }
    return t;
}

// Weight of each sector: distribution of per-mode photon totals under the product of |phi_c|^2.
struct SectorWeights {
    int modes;
    int side;  // totals range over [0, side)
    std::vector<double> w;
    double at(const std::vector<int>& nvec) const {
        std::size_t idx = 0;
        for (int v : nvec) idx = idx * side + v;
        return w[idx];
    }
};

SectorWeights sector_weights(const std::vector<const CVec*>& vecs, int n, int d) {
    FockShape sh{n, d};
    int side = 1;
    std::vector<double> acc{1.0};
    for (const CVec* v : vecs) {
        const int nside = side + d - 1;
        std::vector<double> next(ipow(nside, n), 0.0);
        for (std::size_t a = 0; a < acc.size(); ++a) {
            if (acc[a] == 0.0) continue;
            std::vector<int> ka(n);
            std::size_t t = a;
            for (int i = n - 1; i >= 0; --i) {
                ka[i] = static_cast<int>(t % side);
                t /= side;
            }
            for (std::size_t g = 0; g < sh.dim(); ++g) {
                const double p = std::norm((*v)(g));
                if (p == 0.0) continue;
                FockIndex kg = sh.unindex(g);
                std::size_t idx = 0;
                for (int i = 0; i < n; ++i) idx = idx * nside + (ka[i] + kg[i]);
                next[idx] += acc[a] * p;
            }
        }
        acc = std::move(next);
        side = nside;
    }
    return {n, side, std::move(acc)};
}

void for_each_sector(int n, int side, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> nvec(n, 0);
    const std::size_t total = ipow(side, n);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t t = idx;
        for (int i = n - 1; i >= 0; --i) {
            nvec[i] = static_cast<int>(t % side);
            t /= side;
        }
        fn(nvec);
    }
}

using WeightFn = std::function<RVec(const RVec& lambda)>;

WeightFn group_average(int copies, double angle, int order) {
    const double s = rotation_scale(copies);
    return [=](const RVec& lam) {
        RVec w(lam.size());
        for (Eigen::Index j = 0; j < lam.size(); ++j) {
            Complex acc = 0.0;
            for (int l = 0; l < order; ++l) acc += std::exp(Complex(0.0, -l * angle * s * lam(j)));
            w(j) = acc.real() / order;
        }
        return w;
    };
}

WeightFn kernel_indicator(double rel_tol) {
    return [=](const RVec& lam) {
        const double mx = lam.size() ? lam.cwiseAbs().maxCoeff() : 0.0;
        RVec w(lam.size());
        for (Eigen::Index j = 0; j < lam.size(); ++j) w(j) = std::abs(lam(j)) <= rel_tol * mx ? 1.0 : 0.0;
        return w;
    };
}

// <phi_L| f(G) |phi_R> summed over sectors.
Complex sector_form(const std::vector<const CVec*>& left, const std::vector<const CVec*>& right, int n, int d,
                    const WeightFn& weight, double skip) {
    const int k = static_cast<int>(left.size());
    const bool same = left == right;
    SectorWeights wl = sector_weights(left, n, d);
    SectorWeights wr = same ? wl : sector_weights(right, n, d);
    Complex total = 0.0;
    for_each_sector(n, wl.side, [&](const std::vector<int>& nvec) {
        if (std::sqrt(wl.at(nvec) * wr.at(nvec)) < skip) return;
        Sector s(k, nvec);
        CVec tl = sector_tensor(s, left, d);
        s.apply_legs(tl, true);
        CVec tr;
        if (same) {
            tr = tl;
        } else {
            tr = sector_tensor(s, right, d);
            s.apply_legs(tr, true);
        }
        RVec w = weight(s.lambda());
        total += (tl.conjugate().array() * w.array().cast<Complex>() * tr.array()).sum();
    });
    return total;
}

// Ancilla-0 probability of the controlled-U circuit: || (X + U X)/2 ||^2.
double test2prime_born(const std::vector<const CVec*>& vecs, int n, int d, double skip) {
    const double theta = std::numbers::pi / 4;
    SectorWeights ws = sector_weights(vecs, n, d);
    double p = 0.0;
    for_each_sector(n, ws.side, [&](const std::vector<int>& nvec) {
        if (ws.at(nvec) < skip * skip) return;
        Sector s(2, nvec);
        CVec x = sector_tensor(s, vecs, d);
        CVec ux = x;
        s.apply_legs(ux, true);
        RVec lam = s.lambda();
        for (Eigen::Index j = 0; j < ux.size(); ++j) ux(j) *= std::exp(Complex(0.0, -theta * lam(j)));
        s.apply_legs(ux, false);
        p += (0.5 * (x + ux)).squaredNorm();
    });
    return p;
}

Ensemble checked_ensemble(const FockState& st, const AcceptanceOptions& opt) {
    const double leak = leakage_of(st);
    if (leak > opt.leakage_bound)
        throw LeakageError("state leakage " + std::to_string(leak) + " exceeds the budget " +
                               std::to_string(opt.leakage_bound),
                           leak);
    return spectral_ensemble(st, 1e-14);
}

double pure_test_value(TestId test, const std::vector<const CVec*>& vecs, int n, int d,
                       const AcceptanceOptions& opt) {
    switch (test) {
        case TestId::test2:
            return sector_form(vecs, vecs, n, d, group_average(2, std::numbers::pi / 4, 8), opt.sector_skip).real();
        case TestId::test5:
            return sector_form(vecs, vecs, n, d, group_average(3, std::numbers::pi / 3, 6), opt.sector_skip).real();
        case TestId::test4:
            return sector_form(vecs, vecs, n, d, kernel_indicator(opt.nullspace_rel_tol), opt.sector_skip).real();
        case TestId::test1: {
            std::vector<const CVec*> swapped{vecs[1], vecs[0]};
            auto ker = kernel_indicator(opt.nullspace_rel_tol);
            Complex a = sector_form(vecs, vecs, n, d, ker, opt.sector_skip);
            Complex b = vecs[0] == vecs[1] ? a : sector_form(vecs, swapped, n, d, ker, opt.sector_skip);
            return 0.5 * (a + b).real();
        }
        case TestId::test2prime:
            return test2prime_born(vecs, n, d, opt.sector_skip);
        case TestId::test3:
            break;
    }
    throw InvalidArgument("unsupported test for this evaluation path");
}

int copies_for(TestId t) { return (t == TestId::test4 || t == TestId::test5) ? 3 : 2; }

void check_dense_budget(int n, int d, int k, std::size_t budget) {
    const double dim = std::pow(static_cast<double>(d), n * k);
    if (dim > static_cast<double>(budget))
        throw BudgetError("dense dimension " + std::to_string(static_cast<long long>(dim)) + " exceeds the budget " +
                          std::to_string(budget));
}

// Sectors that fit completely inside the (d^n)^k grid.
template <class Fn>
void for_each_complete_sector(int k, int n, int d, Fn&& fn) {
    for_each_sector(n, d, [&](const std::vector<int>& nvec) {
        Sector s(k, nvec);
        std::vector<std::size_t> grid(s.size);
        const std::size_t cd = ipow(d, n);
        for (std::size_t j = 0; j < s.size; ++j) {
            auto b = s.unrank(j);
            std::size_t g = 0;
            for (int c = 0; c < k; ++c) g = g * cd + static_cast<std::size_t>(s.copy_index(b, c, d));
            grid[j] = g;
        }
        fn(s, grid);
    });
}

// Single-copy operator monomials for generator moments.
struct Term {
    double coef;
    std::vector<std::vector<int>> ops;  // per copy, leftmost operator first
};

std::vector<Term> generator_terms(GeneratorKind which, int n) {
    const int k = which == GeneratorKind::G ? 2 : 3;
    std::vector<Term> out;
    for (auto [u, v] : copy_pairs(k))
        for (int i = 0; i < n; ++i) {
            Term a{1.0, std::vector<std::vector<int>>(k)};
            a.ops[u] = {i};
            a.ops[v] = {n + i};
            Term b{-1.0, std::vector<std::vector<int>>(k)};
            b.ops[u] = {n + i};
            b.ops[v] = {i};
            out.push_back(a);
            out.push_back(b);
        }
    return out;
}

std::vector<Term> multiply(const std::vector<Term>& a, const std::vector<Term>& b) {
    std::vector<Term> out;
    out.reserve(a.size() * b.size());
    for (const auto& x : a)
        for (const auto& y : b) {
            Term t{x.coef * y.coef, x.ops};
            for (std::size_t c = 0; c < t.ops.size(); ++c) t.ops[c].insert(t.ops[c].end(), y.ops[c].begin(), y.ops[c].end());
            out.push_back(std::move(t));
        }
    return out;
}

// Single-copy moments Tr[rho R_a1 ... R_ak] for k <= 4, evaluated as
// Tr[(rho R_a1) Q] with Q = R_a2 ... R_ak sparse. Padding by two levels keeps
// every intermediate level exact.
class MonomialCache {
public:
    using Sparse = Eigen::SparseMatrix<Complex, Eigen::ColMajor>;

    explicit MonomialCache(const FockState& st) {
        const FockShape src = shape_of(st);
        shape_ = FockShape{src.modes, src.cutoff + 2};
        const auto dim = static_cast<Eigen::Index>(shape_.dim());
        std::vector<Eigen::Index> map(src.dim());
        for (std::size_t i = 0; i < src.dim(); ++i) map[i] = static_cast<Eigen::Index>(shape_.index(src.unindex(i)));
        rho_ = CMat::Zero(dim, dim);
        if (auto p = std::get_if<PureFockState>(&st)) {
            const CVec& v = p->amplitudes();
            for (std::size_t i = 0; i < src.dim(); ++i)
                for (std::size_t j = 0; j < src.dim(); ++j) rho_(map[i], map[j]) = v(i) * std::conj(v(j));
        } else {
            const CMat& m = std::get<MixedFockState>(st).matrix();
            for (std::size_t i = 0; i < src.dim(); ++i)
                for (std::size_t j = 0; j < src.dim(); ++j) rho_(map[i], map[j]) = m(i, j);
        }
        ModeOperators ops = build_mode_operators(shape_.cutoff);
        const int n = shape_.modes;
        for (int q = 0; q < 2 * n; ++q) quad_.push_back(embed_sparse(q < n ? ops.x.matrix : ops.p.matrix, q % n));
    }

    Complex get(const std::vector<int>& mono) {
        if (mono.empty()) return rho_.trace();
        if (mono.size() > 4) throw InvalidArgument("single-copy monomials are limited to degree 4");
        auto it = cache_.find(mono);
        if (it != cache_.end()) return it->second;
        const CMat& l = left(mono[0]);
        Complex acc = 0.0;
        if (mono.size() == 1) {
            acc = l.trace();
        } else {
            const Sparse& q = product(std::vector<int>(mono.begin() + 1, mono.end()));
            for (Eigen::Index c = 0; c < q.outerSize(); ++c)
                for (Sparse::InnerIterator e(q, c); e; ++e) acc += l(c, e.row()) * e.value();
        }
        cache_.emplace(mono, acc);
        return acc;
    }

    int modes() const { return shape_.modes; }

private:
    Sparse embed_sparse(const CMat& single, int mode) const {
        const auto dim = static_cast<Eigen::Index>(shape_.dim());
        const auto inner = static_cast<Eigen::Index>(ipow(shape_.cutoff, shape_.modes - mode - 1));
        const Eigen::Index d = shape_.cutoff;
        const Eigen::Index outer = dim / (d * inner);
        std::vector<Eigen::Triplet<Complex>> trip;
        for (Eigen::Index o = 0; o < outer; ++o)
            for (Eigen::Index r = 0; r < d; ++r)
                for (Eigen::Index c = 0; c < d; ++c) {
                    const Complex v = single(r, c);
                    if (v == Complex(0.0)) continue;
                    for (Eigen::Index in = 0; in < inner; ++in)
                        trip.emplace_back((o * d + r) * inner + in, (o * d + c) * inner + in, v);
                }
        Sparse m(dim, dim);
        m.setFromTriplets(trip.begin(), trip.end());
        return m;
    }

    const CMat& left(int q) {
        auto it = left_.find(q);
        if (it != left_.end()) return it->second;
        return left_.emplace(q, CMat(rho_ * quad_[static_cast<std::size_t>(q)])).first->second;
    }

    const Sparse& product(const std::vector<int>& ops) {
        auto it = prod_.find(ops);
        if (it != prod_.end()) return it->second;
        Sparse m = quad_[static_cast<std::size_t>(ops[0])];
        for (std::size_t i = 1; i < ops.size(); ++i) m = (m * quad_[static_cast<std::size_t>(ops[i])]).pruned();
        return prod_.emplace(ops, std::move(m)).first->second;
    }

    FockShape shape_;
    CMat rho_;
    std::vector<Sparse> quad_;
    std::map<int, CMat> left_;
    std::map<std::vector<int>, Sparse> prod_;
    std::map<std::vector<int>, Complex> cache_;
};

double term_expectation(const std::vector<Term>& terms, MonomialCache& cache) {
    Complex acc = 0.0;
    for (const auto& t : terms) {
        Complex v = t.coef;
        for (const auto& mono : t.ops) {
            v *= cache.get(mono);
            if (v == Complex(0.0)) break;
        }
        acc += v;
    }
    return acc.real();
}

}  // namespace

TestId parse_test_id(const std::string& s) {
    if (s == "1") return TestId::test1;
    if (s == "2") return TestId::test2;
    if (s == "2'" || s == "2p" || s == "2prime") return TestId::test2prime;
    if (s == "3") return TestId::test3;
    if (s == "4") return TestId::test4;
    if (s == "5") return TestId::test5;
    throw InvalidArgument("unknown test id '" + s + "' (expected 1, 2, 2', 3, 4 or 5)");
}

std::string to_string(TestId t) {
    switch (t) {
        case TestId::test1: return "1";
        case TestId::test2: return "2";
        case TestId::test2prime: return "2'";
        case TestId::test3: return "3";
        case TestId::test4: return "4";
        case TestId::test5: return "5";
    }
    return "?";
}

double rotation_scale(int copies) {
    if (copies == 2) return 1.0;
    if (copies == 3) return 1.0 / std::sqrt(3.0);
    throw InvalidArgument("copy rotations need k = 2 or 3 copies, got " + std::to_string(copies));
}

int GroupBlock::rank_of(const std::vector<int>& occ) const {
    // Lexicographic order with descending leading occupations.
    int rank = 0;
    int rest = photons;
    for (int c = 0; c + 1 < copies; ++c) {
        for (int o = rest; o > occ[c]; --o) {
            const int r = rest - o;  // photons left for the remaining copies
            const int slots = copies - c - 1;
            // number of compositions of r into `slots` parts
            long cnt = 1;
            for (int s = 1; s < slots; ++s) cnt = cnt * (r + s) / s;
            rank += static_cast<int>(cnt);
        }
        rest -= occ[c];
    }
    return rank;
}

const GroupBlock& group_block(int copies, int photons) {
    if (copies != 2 && copies != 3) throw InvalidArgument("copy rotations need k = 2 or 3 copies");
    if (photons < 0) throw InvalidArgument("photon number must be >= 0");
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<GroupBlock>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(copies, photons);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, build_group_block(copies, photons)).first;
    return *it->second;
}

CMat rotation_block(int copies, int photons, double angle) {
    const GroupBlock& gb = group_block(copies, photons);
    const double s = rotation_scale(copies);
    CVec ph(gb.eigenvalues.size());
    for (Eigen::Index j = 0; j < ph.size(); ++j) ph(j) = std::exp(Complex(0.0, -angle * s * gb.eigenvalues(j)));
    return gb.eigenvectors * ph.asDiagonal() * gb.eigenvectors.adjoint();
}

RotationUnitary copy_rotation_unitary(const CopyRotation& rot, std::size_t budget) {
    if (rot.copies != 2 && rot.copies != 3) throw InvalidArgument("copy rotations need k = 2 or 3 copies");
    if ((rot.copies == 2) != (rot.axis == CopyAxis::plane))
        throw InvalidArgument("k = 2 uses the plane axis and k = 3 the (1,1,1) axis");
    if (rot.modes < 1 || rot.cutoff < 2) throw InvalidArgument("invalid modes or cutoff");
    check_dense_budget(rot.modes, rot.cutoff, rot.copies, budget);
    const auto dim = static_cast<Eigen::Index>(ipow(ipow(rot.cutoff, rot.modes), rot.copies));
    RotationUnitary out{rot, CMat::Zero(dim, dim), {}};
    const double s = rotation_scale(rot.copies);
    for_each_complete_sector(rot.copies, rot.modes, rot.cutoff, [&](const Sector& sec, const std::vector<std::size_t>& grid) {
        CMat v = sec.dense_eigenvectors();
        RVec lam = sec.lambda();
        CVec ph(lam.size());
        for (Eigen::Index j = 0; j < lam.size(); ++j) ph(j) = std::exp(Complex(0.0, -rot.angle * s * lam(j)));
        CMat u = v * ph.asDiagonal() * v.adjoint();
        for (std::size_t c = 0; c < grid.size(); ++c)
            for (std::size_t r = 0; r < grid.size(); ++r) out.matrix(grid[r], grid[c]) = u(r, c);
        out.covered.insert(out.covered.end(), grid.begin(), grid.end());
    });
    std::sort(out.covered.begin(), out.covered.end());
    return out;
}

GeneratorOperator rotation_generator(GeneratorKind which, int n, int d, std::size_t budget) {
    const int k = which == GeneratorKind::G ? 2 : 3;
    if (n < 1 || d < 2) throw InvalidArgument("invalid modes or cutoff");
    check_dense_budget(n, d, k, budget);
    FockShape sh{k * n, d};
    ModeOperators ops = build_mode_operators(d);
    const auto dim = static_cast<Eigen::Index>(sh.dim());
    CMat g = CMat::Zero(dim, dim);
    const Complex i(0.0, 1.0);
    for (auto [u, v] : copy_pairs(k))
        for (int m = 0; m < n; ++m) {
            CMat au = embed_mode_operator(ops.a.matrix, u * n + m, sh);
            CMat av = embed_mode_operator(ops.a.matrix, v * n + m, sh);
            g += i * (au * av.adjoint() - au.adjoint() * av);
        }
    return {which, n, d, std::move(g)};
}

InvariantProjector invariant_projector(ProjectorVariant variant, int n, int d, std::size_t budget) {
    const int k = (variant == ProjectorVariant::test4 || variant == ProjectorVariant::test5) ? 3 : 2;
    if (n < 1 || d < 2) throw InvalidArgument("invalid modes or cutoff");
    check_dense_budget(n, d, k, budget);
    const auto dim = static_cast<Eigen::Index>(ipow(ipow(d, n), k));
    InvariantProjector out{variant, n, d, CMat::Zero(dim, dim), 1e-10};
    WeightFn weight;
    if (variant == ProjectorVariant::test2) weight = group_average(2, std::numbers::pi / 4, 8);
    if (variant == ProjectorVariant::test5) weight = group_average(3, std::numbers::pi / 3, 6);
    if (variant == ProjectorVariant::test1 || variant == ProjectorVariant::test4)
        weight = kernel_indicator(out.nullspace_rel_tol);

    for_each_complete_sector(k, n, d, [&](const Sector& sec, const std::vector<std::size_t>& grid) {
        CMat v = sec.dense_eigenvectors();
        RVec w = weight(sec.lambda());
        CMat p;
        if (variant == ProjectorVariant::test1) {
            std::vector<Eigen::Index> keep;
            for (Eigen::Index j = 0; j < w.size(); ++j)
                if (w(j) > 0.5) keep.push_back(j);
            if (keep.empty()) return;
            CMat ker(v.rows(), static_cast<Eigen::Index>(keep.size()));
            for (std::size_t q = 0; q < keep.size(); ++q) ker.col(q) = v.col(keep[q]);
            // swap copies 0 and 1 within the sector basis
            CMat fk = CMat::Zero(ker.rows(), ker.cols());
            for (std::size_t j = 0; j < sec.size; ++j) {
                auto b = sec.unrank(j);
                std::vector<int> sb(n);
                for (int i = 0; i < n; ++i) {
                    auto occ = sec.legs[i]->basis[b[i]];
                    std::swap(occ[0], occ[1]);
                    sb[i] = sec.legs[i]->rank_of(occ);
                }
                std::size_t sj = 0;
                for (int i = 0; i < n; ++i) sj = sj * sec.dims[i] + sb[i];
                fk.row(sj) = ker.row(j);
            }
            CMat sym = 0.5 * (ker + fk);
            Eigen::JacobiSVD<CMat> svd(sym, Eigen::ComputeThinU);
            const double top = svd.singularValues()(0);
            Eigen::Index rank = 0;
            while (rank < svd.singularValues().size() && svd.singularValues()(rank) > 1e-8 * std::max(top, 1.0)) ++rank;
            if (rank == 0) return;
            CMat q = svd.matrixU().leftCols(rank);
            p = q * q.adjoint();
        } else {
            p = v * w.cast<Complex>().asDiagonal() * v.adjoint();
        }
        for (std::size_t c = 0; c < grid.size(); ++c)
            for (std::size_t r = 0; r < grid.size(); ++r) out.matrix(grid[r], grid[c]) = p(r, c);
    });
    return out;
}

double acceptance_probability(TestId test, const FockState& state, const AcceptanceOptions& opt) {
    const FockShape sh = shape_of(state);
    if (test == TestId::test3) {
        auto p = std::get_if<PureFockState>(&state);
        if (!p) throw InvalidArgument("test 3 is defined for pure states only");
        return test3_product_check(*p, opt).swap_test_accept_prob;
    }
    Ensemble e = checked_ensemble(state, opt);
    const int k = copies_for(test);
    const std::size_t r = e.vectors.size();
    if (std::pow(static_cast<double>(r), k) > static_cast<double>(opt.max_mixed_terms))
        throw BudgetError("mixed-state expansion needs " + std::to_string(r) + "^" + std::to_string(k) +
                          " product terms, above the limit");
    double total = 0.0;
    std::vector<std::size_t> idx(k, 0);
    while (true) {
        double w = 1.0;
        std::vector<const CVec*> vecs;
        for (int c = 0; c < k; ++c) {
            w *= e.weights[idx[c]];
            vecs.push_back(&e.vectors[idx[c]]);
        }
        if (w > 1e-16) total += w * pure_test_value(test, vecs, sh.modes, sh.cutoff, opt);
        int c = k - 1;
        while (c >= 0 && ++idx[c] == r) idx[c--] = 0;
        if (c < 0) break;
    }
    return std::clamp(total, 0.0, 1.0);
}

Test3Result test3_product_check(const PureFockState& state, const AcceptanceOptions& opt, std::size_t budget) {
    if (state.leakage() > opt.leakage_bound)
        throw LeakageError("state leakage exceeds the budget", state.leakage());
    const int n = state.modes();
    const int d = state.cutoff();
    const int D = 2 * d - 1;
    const std::size_t cd = ipow(D, n);
    if (cd > budget) throw BudgetError("single-copy output dimension " + std::to_string(cd) + " exceeds the budget");
    std::vector<const CVec*> vecs{&state.amplitudes(), &state.amplitudes()};
    const double theta = std::numbers::pi / 4;
    CMat m = CMat::Zero(cd, cd);  // rows: copy 1, columns: copy 2
    SectorWeights ws = sector_weights(vecs, n, d);
    for_each_sector(n, ws.side, [&](const std::vector<int>& nvec) {
        if (ws.at(nvec) < opt.sector_skip * opt.sector_skip) return;
        Sector s(2, nvec);
        CVec t = sector_tensor(s, vecs, d);
        s.apply_legs(t, true);
        RVec lam = s.lambda();
        for (Eigen::Index j = 0; j < t.size(); ++j) t(j) *= std::exp(Complex(0.0, -theta * lam(j)));
        s.apply_legs(t, false);
        for (std::size_t j = 0; j < s.size; ++j) {
            auto b = s.unrank(j);
            m(s.copy_index(b, 0, D), s.copy_index(b, 1, D)) += t(j);
        }
    });
    CMat sigma = m * m.adjoint();
    Test3Result res{MixedFockState(n, D, sigma, state.leakage()), 1.0, 1.0};
    res.purity = std::min(1.0, res.sigma.matrix().cwiseAbs2().sum());
    res.swap_test_accept_prob = 0.5 * (1.0 + res.purity);
    return res;
}

GeneratorMoments generator_moments(const FockState& state, GeneratorKind which, double leakage_bound) {
    const double leak = leakage_of(state);
    if (leak > leakage_bound)
        throw LeakageError("state leakage " + std::to_string(leak) + " exceeds the budget", leak);
    MonomialCache cache(state);
    const int n = cache.modes();
    if (which == GeneratorKind::G) {
        for (int q = 0; q < 2 * n; ++q)
            if (std::abs(cache.get({q})) > 1e-6)
                throw PreconditionError("the G moments require a zero-mean state");
    }
    auto g = generator_terms(which, n);
    auto g2 = multiply(g, g);
    GeneratorMoments out;
    out.g2 = term_expectation(g2, cache);
    out.g4 = term_expectation(multiply(g2, g2), cache);
    // E = (1/2) sum_q R_q^2, so E^2 = (1/4) sum_{q,r} R_q R_q R_r R_r
    Complex e2 = 0.0;
    for (int q = 0; q < 2 * n; ++q)
        for (int r = 0; r < 2 * n; ++r) e2 += cache.get({q, q, r, r});
    out.energy_second_moment = 0.25 * e2.real();
    if (which == GeneratorKind::G) {
        out.bound = std::pow(4.0 * out.energy_second_moment + 2.0 * n, 2);
        out.bound_ok = out.g4 <= out.bound + 1e-6;
    } else {
        out.bound = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

}  // namespace gausstest
