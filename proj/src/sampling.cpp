#include "gausstest/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gausstest/error.hpp"

namespace gausstest {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

std::size_t draw_cdf(const std::vector<double>& cdf, double u) {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

// max_r e^{-beta r^2 / 2} r^k / sqrt(k!)
double envelope_coefficient(int k, double beta) {
    if (k == 0) return 1.0;
    if (beta <= 0.0) return std::numeric_limits<double>::infinity();
    return std::exp(0.5 * k * (std::log(static_cast<double>(k)) - 1.0 - std::log(beta)) - 0.5 * std::lgamma(k + 1.0));
}

bool ensemble_is_number_diagonal(const Ensemble& e) {
    for (const auto& v : e.vectors) {
        int nz = 0;
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (std::abs(v(i)) > 0.0) ++nz;
        if (nz > 1) return false;
    }
    return true;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(seeded_engine(seed, stream)) {}

RngStream RngStream::substream(std::uint64_t id) const {
    return RngStream(seed_, splitmix64(stream_ ^ splitmix64(id + 1)));
}

double RngStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double RngStream::normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

FockSampler::FockSampler(const FockState& state) : shape_(shape_of(state)) {
    RVec diag;
    if (auto p = std::get_if<PureFockState>(&state))
        diag = p->amplitudes().cwiseAbs2();
    else
        diag = std::get<MixedFockState>(state).diagonal_probabilities().cwiseMax(0.0);
    cdf_.resize(diag.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < diag.size(); ++i) cdf_[i] = (acc += diag(i));
}

FockIndex FockSampler::operator()(RngStream& rng) const { return shape_.unindex(draw_cdf(cdf_, rng.uniform())); }

FockIndex fock_sample(const FockState& state, RngStream& rng) { return FockSampler(state)(rng); }

HeterodyneSampler::HeterodyneSampler(const FockState& state, const HeterodyneOptions& opt) : shape_(shape_of(state)) {
    const double leak = leakage_of(state);
    if (leak > opt.leakage_bound)
        throw LeakageError("state leakage " + std::to_string(leak) + " exceeds the sampling budget", leak);
    ens_ = spectral_ensemble(state, 1e-15);
    const int n = shape_.modes;

    if (ensemble_is_number_diagonal(ens_)) {
        method_ = Method::fock_diagonal;
        double acc = 0.0;
        for (double w : ens_.weights) diag_cdf_.push_back(acc += w);
        return;
    }

    double best = std::numeric_limits<double>::infinity();
    for (double s2 : {1.5, 2.0, 3.0, 4.0, 6.0, 8.0}) {
        const double beta = 1.0 - 1.0 / s2;
        std::vector<double> c(shape_.cutoff);
        for (int k = 0; k < shape_.cutoff; ++k) c[k] = envelope_coefficient(k, beta);
        double m = 0.0;
        for (std::size_t j = 0; j < ens_.vectors.size(); ++j) {
            double sum = 0.0;
            for (std::size_t idx = 0; idx < shape_.dim(); ++idx) {
                const double a = std::abs(ens_.vectors[j](idx));
                if (a == 0.0) continue;
                FockIndex k = shape_.unindex(idx);
                double prod = a;
                for (int i = 0; i < n; ++i) prod *= c[k[i]];
                sum += prod;
            }
            m += ens_.weights[j] * sum * sum;
        }
        m *= std::pow(s2, n);
        if (m < best) {
            best = m;
            s2_ = s2;
        }
    }
    envelope_ = best;
    if (envelope_ <= opt.max_envelope) {
        method_ = Method::rejection;
        return;
    }
    if (n == 1) {
        method_ = Method::grid;
        radial_bins_ = opt.radial_bins;
        angular_bins_ = opt.angular_bins;
        const double d = shape_.cutoff;
        grid_rmax_ = std::sqrt(d + 10.0 * std::sqrt(d) + 30.0);
        const double dr = grid_rmax_ / radial_bins_;
        const double dphi = 2.0 * std::numbers::pi / angular_bins_;
        grid_cdf_.resize(static_cast<std::size_t>(radial_bins_) * angular_bins_);
        double acc = 0.0;
        CVec alpha(1);
        for (int ir = 0; ir < radial_bins_; ++ir) {
            const double r = (ir + 0.5) * dr;
            for (int ia = 0; ia < angular_bins_; ++ia) {
                const double phi = (ia + 0.5) * dphi;
                alpha(0) = std::polar(r, phi);
                acc += husimi(alpha) * r * dr * dphi;
                grid_cdf_[static_cast<std::size_t>(ir) * angular_bins_ + ia] = acc;
            }
        }
        return;
    }
    if (envelope_ > opt.hard_envelope)
        throw NumericalError("rejection envelope " + std::to_string(envelope_) +
                             " is too large for multi-mode heterodyne sampling");
    method_ = Method::rejection;
}

double HeterodyneSampler::husimi(const CVec& alpha) const {
    const int n = shape_.modes;
    const int d = shape_.cutoff;
    if (alpha.size() != n) throw InvalidArgument("alpha must have one entry per mode");
    // u_i[k] = conj(alpha_i)^k / sqrt(k!)
    std::vector<CVec> u(n, CVec(d));
    for (int i = 0; i < n; ++i) {
        u[i](0) = 1.0;
        for (int k = 1; k < d; ++k) u[i](k) = u[i](k - 1) * std::conj(alpha(i)) / std::sqrt(static_cast<double>(k));
    }
    double total = 0.0;
    for (std::size_t j = 0; j < ens_.vectors.size(); ++j) {
        CVec t = ens_.vectors[j];
        std::size_t len = t.size();
        for (int i = n - 1; i >= 0; --i) {  // contract the last mode
            const std::size_t rows = len / d;
            CVec next = CVec::Zero(rows);
            for (std::size_t r = 0; r < rows; ++r) next(r) = t.segment(r * d, d).transpose() * u[i];
            t = std::move(next);
            len = rows;
        }
        total += ens_.weights[j] * std::norm(t(0));
    }
    return total * std::exp(-alpha.squaredNorm());
}

HeterodyneSample HeterodyneSampler::from_alpha(const CVec& alpha) const {
    const int n = shape_.modes;
    HeterodyneSample s{RVec(2 * n)};
    for (int i = 0; i < n; ++i) {
        s.outcome(i) = std::sqrt(2.0) * alpha(i).real();
        s.outcome(n + i) = std::sqrt(2.0) * alpha(i).imag();
    }
    return s;
}

HeterodyneSample HeterodyneSampler::sample_diagonal(RngStream& rng) const {
    const std::size_t j = draw_cdf(diag_cdf_, rng.uniform());
    const CVec& v = ens_.vectors[j];
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    FockIndex k = shape_.unindex(static_cast<std::size_t>(idx));
    CVec alpha(shape_.modes);
    for (int i = 0; i < shape_.modes; ++i) {
        // |alpha|^2 ~ Gamma(k+1, 1), phase uniform
        double r2 = 0.0;
        for (int q = 0; q <= k[i]; ++q) r2 -= std::log(1.0 - rng.uniform());
        alpha(i) = std::polar(std::sqrt(r2), 2.0 * std::numbers::pi * rng.uniform());
    }
    return from_alpha(alpha);
}

HeterodyneSample HeterodyneSampler::sample_rejection(RngStream& rng) const {
    const int n = shape_.modes;
    const double s = std::sqrt(s2_);
    const double pref = std::pow(s2_, n);
    CVec alpha(n);
    for (long attempt = 0; attempt < 100000000L; ++attempt) {
        for (int i = 0; i < n; ++i) alpha(i) = Complex(rng.normal(), rng.normal()) * (s / std::sqrt(2.0));
        const double ratio = pref * std::exp(alpha.squaredNorm() / s2_) * husimi(alpha);
        if (rng.uniform() * envelope_ < ratio) return from_alpha(alpha);
    }
    throw NumericalError("heterodyne rejection sampler failed to accept");
}

HeterodyneSample HeterodyneSampler::sample_grid(RngStream& rng) const {
    const std::size_t cell = draw_cdf(grid_cdf_, rng.uniform());
    const int ir = static_cast<int>(cell / angular_bins_);
    const int ia = static_cast<int>(cell % angular_bins_);
    const double dr = grid_rmax_ / radial_bins_;
    const double r0 = ir * dr, r1 = (ir + 1) * dr;
    const double r = std::sqrt(r0 * r0 + rng.uniform() * (r1 * r1 - r0 * r0));
    const double phi = (ia + rng.uniform()) * 2.0 * std::numbers::pi / angular_bins_;
    CVec alpha(1);
    alpha(0) = std::polar(r, phi);
    return from_alpha(alpha);
}

HeterodyneSample HeterodyneSampler::operator()(RngStream& rng) const {
    switch (method_) {
        case Method::fock_diagonal: return sample_diagonal(rng);
        case Method::rejection: return sample_rejection(rng);
        case Method::grid: return sample_grid(rng);
    }
    throw NumericalError("unknown sampling method");
}

HeterodyneSample heterodyne_sample(const FockState& state, RngStream& rng) {
    return HeterodyneSampler(state)(rng);
}

TestRoundSampler::TestRoundSampler(TestId test, const FockState& state, const AcceptanceOptions& opt)
    : p_(acceptance_probability(test, state, opt)) {}

TestRoundSampler::TestRoundSampler(double probability) : p_(probability) {
    if (!(probability >= 0.0 && probability <= 1.0)) throw InvalidArgument("probability must lie in [0,1]");
}

bool TestRoundSampler::operator()(RngStream& rng) const { return rng.uniform() < p_; }

bool test_round_sample(TestId test, const FockState& state, RngStream& rng) {
    return TestRoundSampler(test, state)(rng);
}

}  // namespace gausstest
