#include "gausstest/hardness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "gausstest/bounds.hpp"
#include "gausstest/error.hpp"

namespace gausstest {

namespace {

void check_same_support(const ClassicalDist& p, const ClassicalDist& q) {
    if (p.n != q.n || p.cutoff != q.cutoff || p.probs.size() != q.probs.size())
        throw InvalidArgument("distributions live on different supports");
}

bool tester_says_far(const std::vector<double>& q, const std::vector<double>& r, const std::vector<std::size_t>& cells,
                     double m, double threshold, RngStream& rng) {
    double z = 0.0;
    for (std::size_t i : cells) {
        const double lambda = m * r[i];
        const double x = lambda > 0.0 ? static_cast<double>(std::poisson_distribution<long long>(lambda)(rng.engine())) : 0.0;
        const double e = m * q[i];
        z += ((x - e) * (x - e) - x) / q[i];
    }
    return z >= threshold;
}

}  // namespace

ClassicalDist ClassicalDist::normalized() const {
    ClassicalDist out = *this;
    const double s = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (!(s > 0.0)) throw InvalidArgument("distribution has no mass on its support");
    for (double& x : out.probs) x /= s;
    out.tail_mass = 0.0;
    return out;
}

double ClassicalDist::max_prob() const { return probs.empty() ? 0.0 : *std::max_element(probs.begin(), probs.end()); }

ClassicalDist geometric_distribution(double nu, int n, int cutoff) {
    if (!(nu > 0.0)) throw InvalidArgument("nu must be positive");
    if (n < 1 || cutoff < 1) throw InvalidArgument("n and cutoff must be positive");
    const double r = nu / (nu + 1.0);
    std::vector<double> single(cutoff);
    for (int k = 0; k < cutoff; ++k) single[k] = std::pow(r, k) / (nu + 1.0);
    ClassicalDist out;
    out.n = n;
    out.cutoff = cutoff;
    const FockShape sh{n, cutoff};
    out.probs.resize(sh.dim());
    for (std::size_t i = 0; i < sh.dim(); ++i) {
        FockIndex k = sh.unindex(i);
        double p = 1.0;
        for (int c : k) p *= single[c];
        out.probs[i] = p;
    }
    out.tail_mass = 1.0 - std::pow(1.0 - std::pow(r, cutoff), n);
    return out;
}

int geometric_cutoff(double nu, int n, double tail) {
    if (!(nu > 0.0) || !(tail > 0.0 && tail < 1.0)) throw InvalidArgument("need nu > 0 and tail in (0, 1)");
    const double r = nu / (nu + 1.0);
    // 1 - (1 - r^c)^n <= n r^c
    return std::max(1, static_cast<int>(std::ceil(std::log(tail / n) / std::log(r))));
}

double total_variation(const ClassicalDist& p, const ClassicalDist& q) {
    check_same_support(p, q);
    double s = std::abs(p.tail_mass - q.tail_mass);
    for (std::size_t i = 0; i < p.probs.size(); ++i) s += std::abs(p.probs[i] - q.probs[i]);
    return 0.5 * s;
}

PerturbedMember perturb_with_signs(const ClassicalDist& q, double eps, const std::vector<int>& z) {
    if (!(eps > 0.0 && eps < 0.25)) throw InvalidArgument("eps must lie in (0, 1/4)");
    PerturbedMember m;
    m.base = q.normalized();
    if (z.size() != m.base.probs.size()) throw InvalidArgument("need one sign per support point");
    m.eps = eps;
    m.z = z;
    m.p = m.base;
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] != 1 && z[i] != -1) throw InvalidArgument("signs must be +1 or -1");
        m.p.probs[i] = (1.0 + 4.0 * eps * z[i]) * m.base.probs[i];
        s += m.p.probs[i];
    }
    for (double& x : m.p.probs) x /= s;
    m.tv = total_variation(m.p, m.base);
    return m;
}

PerturbedMember valiant_perturb(const ClassicalDist& q, double eps, std::uint64_t z_seed, int max_resamples) {
    if (!(eps > 0.0 && eps < 0.25)) throw InvalidArgument("eps must lie in (0, 1/4)");
    // the condition is on q itself, not on its renormalized truncation
    if (q.max_prob() > 0.5 + 1e-12) throw InvalidArgument("need max q <= 1/2");
    RngStream rng(z_seed, 0x7a);
    std::vector<int> z(q.probs.size());
    for (int attempt = 0; attempt <= max_resamples; ++attempt) {
        for (int& s : z) s = rng.uniform() < 0.5 ? 1 : -1;
        PerturbedMember m = perturb_with_signs(q, eps, z);
        if (m.tv > eps) {
            m.z_seed = z_seed;
            m.resamples = attempt;
            return m;
        }
    }
    throw InfeasibleError("no family member with TV > eps after " + std::to_string(max_resamples) + " resamples");
}

MixedFockState embed_classical(const ClassicalDist& p, std::optional<int> d, double tail_budget) {
    if (p.tail_mass > tail_budget)
        throw LeakageError("tail mass " + std::to_string(p.tail_mass) + " exceeds the embedding budget", p.tail_mass);
    const int cutoff = d.value_or(p.cutoff);
    if (cutoff < p.cutoff) throw InvalidArgument("target cutoff is smaller than the distribution's");
    const FockShape src = p.shape();
    const FockShape dst{p.n, cutoff};
    RVec probs = RVec::Zero(static_cast<Eigen::Index>(dst.dim()));
    for (std::size_t i = 0; i < p.probs.size(); ++i) probs(dst.index(src.unindex(i))) = p.probs[i];
    return MixedFockState::diagonal(p.n, cutoff, probs, p.tail_mass);
}

double thermal_energy_second_moment(int n, double nu) {
    const double nn = n;
    return nn * (nn + 1.0) * nu * nu + nn * (nn + 1.0) * nu + nn * nn / 4.0;
}

double classical_energy_second_moment(const ClassicalDist& p) {
    const FockShape sh = p.shape();
    double s = 0.0;
    for (std::size_t i = 0; i < p.probs.size(); ++i) {
        const double e = sh.total_photons(i) + 0.5 * p.n;
        s += p.probs[i] * e * e;
    }
    return s;
}

double solve_nu_for_energy(int n, double E, double eps) {
    if (n < 1) throw InvalidArgument("n must be positive");
    if (!(eps > 0.0 && eps < 0.25)) throw InvalidArgument("eps must lie in (0, 1/4)");
    const double nn = n;
    const double rhs = (1.0 - 4.0 * eps) / (1.0 + 4.0 * eps) * nn * nn * E * E;
    const double a = nn * (nn + 1.0);
    const double c = nn * nn / 4.0 - rhs;
    if (!(c < 0.0)) throw InfeasibleError("energy E is too small for a positive thermal solution");
    const double disc = a * a - 4.0 * a * c;
    // stable form of the positive root
    return 2.0 * (-c) / (a + std::sqrt(disc));
}

double distinguishing_samples(const ClassicalDist& q0, const ClassicalDist& p0, double eps, int reps, double success,
                              RngStream& rng) {
    const ClassicalDist q = q0.normalized();
    const ClassicalDist p = p0.normalized();
    check_same_support(p, q);
    const double k = static_cast<double>(q.probs.size());
    std::vector<std::size_t> cells;
    for (std::size_t i = 0; i < q.probs.size(); ++i)
        if (q.probs[i] >= eps / (50.0 * k)) cells.push_back(i);

    auto ok = [&](double m) {
        const double thr = 2.0 * eps * eps * m * m;
        int good_q = 0, good_p = 0;
        for (int r = 0; r < reps; ++r) {
            if (!tester_says_far(q.probs, q.probs, cells, m, thr, rng)) ++good_q;
            if (tester_says_far(q.probs, p.probs, cells, m, thr, rng)) ++good_p;
        }
        return std::min(good_q, good_p) >= success * reps;
    };

    double hi = 1.0;
    while (!ok(hi)) {
        hi *= 2.0;
        if (hi > 1e9) throw NumericalError("distinguishing sample search did not terminate");
    }
    double lo = hi / 2.0;
    if (hi == 1.0) return 1.0;
    for (int it = 0; it < 10; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (ok(mid))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

HardnessReport hardness_experiment(const HardnessConfig& cfg, RngStream& rng) {
    if (cfg.n < 1 || cfg.n > 2) throw InvalidArgument("the hardness lab runs at n = 1 or 2");
    if (cfg.energies.empty()) throw InvalidArgument("energy grid is empty");
    if (cfg.trials < 1 || cfg.members < 1 || cfg.reps < 1) throw InvalidArgument("trials, members and reps must be positive");
    HardnessReport rep;
    rep.n = cfg.n;
    rep.asymptotic_claim =
        "distinguishing rho(p) from rho(q) needs Omega(E^n / eps^2) copies; only monotone growth is checked here";
    for (double E : cfg.energies) {
        double eps = cfg.eps;
        if (cfg.eps_b) {
            const double c = hardness_constant_c_nE(cfg.n * E);
            eps = 8.0 * c * c * *cfg.eps_b;
            if (!(eps > 0.0 && eps < 0.25)) {
                std::ostringstream os;
                os << "eps = 8 c_nE^2 eps_B = " << eps << " is outside (0, 1/4) at E = " << E;
                throw InfeasibleError(os.str());
            }
        }
        if (!(eps > 0.0 && eps < 0.25)) throw InfeasibleError("eps must lie in (0, 1/4)");
        rep.eps = eps;
        HardnessRow row;
        row.E = E;
        row.nu = solve_nu_for_energy(cfg.n, E, eps);
        row.cutoff = geometric_cutoff(row.nu, cfg.n, cfg.tail);
        ClassicalDist q = geometric_distribution(row.nu, cfg.n, row.cutoff);
        row.q_inf = q.max_prob();
        if (row.q_inf > 0.5) throw InfeasibleError("max q > 1/2 at E = " + std::to_string(E));
        row.energy_limit = std::pow(cfg.n * E, 2);
        ClassicalDist qn = q.normalized();
        row.energy_sq_q = classical_energy_second_moment(qn);
        row.tv_min = 1.0;

        std::vector<PerturbedMember> members;
        for (int j = 0; j < cfg.members; ++j) {
            members.push_back(valiant_perturb(q, eps, rng.engine()()));
            const PerturbedMember& m = members.back();
            row.energy_sq_p_max = std::max(row.energy_sq_p_max, classical_energy_second_moment(m.p));
            row.tv_min = std::min(row.tv_min, m.tv);
            row.resamples += m.resamples;
        }
        row.energy_ok = row.energy_sq_q <= row.energy_limit * (1.0 + 1e-9) &&
                        row.energy_sq_p_max <= row.energy_limit * (1.0 + 1e-9);
        if (!row.energy_ok) rep.warnings.push_back("second energy moment above (nE)^2 at E = " + std::to_string(E));
        if (cfg.check_embedding) {
            const PerturbedMember& m = members.front();
            const double d = trace_distance_exact(embed_classical(m.p), embed_classical(m.base));
            row.embed_gap = std::abs(d - m.tv);
        }
        for (int t = 0; t < cfg.trials; ++t) {
            const PerturbedMember& m = members[static_cast<std::size_t>(t) % members.size()];
            row.samples.push_back(distinguishing_samples(m.base, m.p, eps, cfg.reps, cfg.success, rng));
        }
        row.mean_samples = std::accumulate(row.samples.begin(), row.samples.end(), 0.0) / row.samples.size();
        rep.rows.push_back(std::move(row));
    }
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        if (!(rep.rows[i].mean_samples > rep.rows[i - 1].mean_samples)) rep.monotone = false;
    return rep;
}

}  // namespace gausstest
