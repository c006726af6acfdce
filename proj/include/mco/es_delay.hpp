#pragma once

// Edge-server delay model. The server is a single FIFO queue fed by the
// aggregate (assumed Poisson) stream of uploaded tasks, with deterministic
// per-class service q_j / (y f^C). Waiting-time CDFs come from the M/D/1
// closed form for a single service time and from numerical inversion of the
// Pollaczek-Khinchine transform otherwise; sojourn = wait + own service.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <mpfr.h>

#include "markov_channel.hpp"
#include "pmf.hpp"
#include "scenario.hpp"

namespace mco {

inline constexpr int kMaxSojournSlots = 100000;

// --- M/D/1 -----------------------------------------------------------------

namespace detail {

class MpfrValue {
public:
    explicit MpfrValue(mpfr_prec_t bits) { mpfr_init2(v_, bits); }
    ~MpfrValue() { mpfr_clear(v_); }
    MpfrValue(const MpfrValue&) = delete;
    MpfrValue& operator=(const MpfrValue&) = delete;
    mpfr_ptr get() { return v_; }
    mpfr_srcptr get() const { return v_; }

private:
    mpfr_t v_;
};

// Alternating Crommelin sum in a plain floating type.
template <class Real>
Real md1_sum_native(Real lambda, Real mu, Real t, long last)
{
    Real acc = 0;
    for (long z = 0; z <= last; ++z) {
        Real x = lambda * (t - static_cast<Real>(z) / mu);
        Real term;
        if (z == 0)
            term = std::exp(x);
        else if (x <= 0)
            term = 0;
        else
            term = std::exp(static_cast<Real>(z) * std::log(x) - std::lgamma(static_cast<Real>(z) + 1) + x);
        acc += (z % 2 == 0) ? term : -term;
    }
    return acc;
}

inline double md1_sum_mpfr(double lambda, double mu, double t, long last, mpfr_prec_t bits)
{
    MpfrValue lam(bits), m(bits), tt(bits), acc(bits), x(bits), term(bits), fact(bits), e0(bits), ratio(bits),
        rpow(bits), tmp(bits);
    mpfr_set_d(lam.get(), lambda, MPFR_RNDN);
    mpfr_set_d(m.get(), mu, MPFR_RNDN);
    mpfr_set_d(tt.get(), t, MPFR_RNDN);
    // e^{lambda t} * (e^{-lambda/mu})^z replaces a per-term exponential.
    mpfr_mul(e0.get(), lam.get(), tt.get(), MPFR_RNDN);
    mpfr_exp(e0.get(), e0.get(), MPFR_RNDN);
    mpfr_div(ratio.get(), lam.get(), m.get(), MPFR_RNDN);
    mpfr_neg(ratio.get(), ratio.get(), MPFR_RNDN);
    mpfr_exp(ratio.get(), ratio.get(), MPFR_RNDN);
    mpfr_set_ui(rpow.get(), 1, MPFR_RNDN);
    mpfr_set_ui(fact.get(), 1, MPFR_RNDN);
    mpfr_set_zero(acc.get(), 1);
    for (long z = 0; z <= last; ++z) {
        if (z > 0) {
            mpfr_mul_ui(fact.get(), fact.get(), static_cast<unsigned long>(z), MPFR_RNDN);
            mpfr_mul(rpow.get(), rpow.get(), ratio.get(), MPFR_RNDN);
        }
        // x = lambda * (t - z / mu)
        mpfr_ui_div(tmp.get(), static_cast<unsigned long>(z), m.get(), MPFR_RNDN);
        mpfr_sub(x.get(), tt.get(), tmp.get(), MPFR_RNDN);
        mpfr_mul(x.get(), x.get(), lam.get(), MPFR_RNDN);
        if (z > 0 && mpfr_sgn(x.get()) <= 0) continue;
        mpfr_pow_ui(term.get(), x.get(), static_cast<unsigned long>(z), MPFR_RNDN);
        mpfr_div(term.get(), term.get(), fact.get(), MPFR_RNDN);
        mpfr_mul(term.get(), term.get(), e0.get(), MPFR_RNDN);
        mpfr_mul(term.get(), term.get(), rpow.get(), MPFR_RNDN);
        if (z % 2 == 0)
            mpfr_add(acc.get(), acc.get(), term.get(), MPFR_RNDN);
        else
            mpfr_sub(acc.get(), acc.get(), term.get(), MPFR_RNDN);
    }
    return mpfr_get_d(acc.get(), MPFR_RNDN);
}

// Largest log-magnitude among the alternating terms.
inline double md1_max_log_term(double lambda, double mu, double t, long last)
{
    double best = lambda * t;   // z = 0
    for (long z = 1; z <= last; ++z) {
        double x = lambda * (t - static_cast<double>(z) / mu);
        if (x <= 0) continue;
        best = std::max(best, z * std::log(x) - std::lgamma(z + 1.0) + x);
    }
    return best;
}

}  // namespace detail

/// M/D/1 waiting-time CDF Pr[w <= t] (Crommelin's alternating sum). The
/// working precision grows with the largest term so cancellation never eats
/// more than ~1e-13 of the result.
inline double md1_wait_cdf(double lambda, double mu, double t)
{
    if (t < 0.0) return 0.0;
    if (lambda <= 0.0) return 1.0;
    if (!(mu > 0.0) || lambda >= mu) throw NumericError("md1_wait_cdf: unstable queue (rho >= 1)");
    double rho = lambda / mu;
    auto last = static_cast<long>(std::floor(t * mu));
    double max_log = detail::md1_max_log_term(lambda, mu, t, last);
    double amplification = max_log + std::log(static_cast<double>(last) + 1.0);
    constexpr double target = -13.0 * std::numbers::ln10;

    double sum;
    if (amplification + std::log(std::numeric_limits<double>::epsilon()) <= target) {
        sum = detail::md1_sum_native<double>(lambda, mu, t, last);
    } else if (amplification + std::log(static_cast<double>(std::numeric_limits<long double>::epsilon())) <= target) {
        sum = static_cast<double>(detail::md1_sum_native<long double>(lambda, mu, t, last));
    } else {
        auto bits = static_cast<mpfr_prec_t>(std::ceil((amplification - target) / std::numbers::ln2)) + 32;
        sum = detail::md1_sum_mpfr(lambda, mu, t, last, bits);
    }
    return std::clamp((1.0 - rho) * sum, 0.0, 1.0);
}

// --- service-time models -----------------------------------------------------

/// Deterministic service time per class, mixed by class probability.
struct EsServiceModel {
    std::vector<double> times;     // q_j / (y f^C), seconds
    std::vector<double> weights;   // P_j

    double mean() const
    {
        double acc = 0.0;
        for (std::size_t j = 0; j < times.size(); ++j) acc += weights[j] * times[j];
        return acc;
    }

    /// mu^C in tasks/s.
    double rate() const { return 1.0 / mean(); }

    /// Laplace-Stieltjes transform g(s) = sum_j P_j exp(-t_j s).
    std::complex<double> lst(std::complex<double> s) const
    {
        std::complex<double> acc = 0.0;
        for (std::size_t j = 0; j < times.size(); ++j) acc += weights[j] * std::exp(-times[j] * s);
        return acc;
    }

    bool single_time() const
    {
        for (double t : times)
            if (std::abs(t - times.front()) > 1e-12 * times.front()) return false;
        return true;
    }
};

/// Exponential service; used to cross-check the inversion against M/M/1.
struct ExponentialService {
    double service_rate = 1.0;

    double mean() const { return 1.0 / service_rate; }
    std::complex<double> lst(std::complex<double> s) const { return service_rate / (service_rate + s); }
};

inline EsServiceModel es_service_model(const Scenario& sc, double es_fraction)
{
    if (!(es_fraction > 0.0)) throw ValidationError("es_service_model: y must be > 0");
    EsServiceModel m;
    for (const auto& c : sc.classes) {
        m.times.push_back(c.cycles / (es_fraction * sc.es_speed));
        m.weights.push_back(c.probability);
    }
    return m;
}

// --- numerical Laplace inversion -------------------------------------------

/// Euler-summation inversion (Abate-Whitt). Discretization error ~ e^{-A};
/// `terms` partial sums before binomial averaging over `euler_terms` more.
struct EulerParams {
    double a = 18.4;
    int terms = 15;
    int euler_terms = 11;
};

enum class InversionTier { standard, high };

inline EulerParams euler_params(InversionTier tier)
{
    if (tier == InversionTier::high) return {18.4, 38, 11};
    return {};
}

/// f(t) from its Laplace transform fhat(s), t > 0.
template <class Transform>
double euler_invert(Transform&& fhat, double t, const EulerParams& p = {})
{
    using namespace std::complex_literals;
    const double pi = std::numbers::pi;
    const double scale = std::exp(p.a / 2.0) / t;
    const int total = p.terms + p.euler_terms;

    std::vector<double> partial(static_cast<std::size_t>(total) + 1);
    double sum = 0.5 * std::real(fhat(std::complex<double>(p.a / (2.0 * t), 0.0)));
    for (int k = 1; k <= total; ++k) {
        std::complex<double> s(p.a / (2.0 * t), k * pi / t);
        double term = std::real(fhat(s));
        sum += (k % 2 == 0) ? term : -term;
        partial[static_cast<std::size_t>(k)] = sum;
    }
    // Binomial average of partial sums n .. n+m.
    double avg = 0.0;
    double binom = 1.0;
    for (int k = 0; k <= p.euler_terms; ++k) {
        avg += binom * partial[static_cast<std::size_t>(p.terms + k)];
        binom = binom * (p.euler_terms - k) / (k + 1);
    }
    avg /= std::pow(2.0, p.euler_terms);
    return scale * avg;
}

/// M/G/1 waiting-time CDF via inversion of W*(s)/s, where
/// W*(s) = (1 - lambda b) s / (s - lambda (1 - g(s))).
template <class Service>
double mg1_wait_cdf(double lambda, const Service& service, double t, InversionTier tier = InversionTier::standard)
{
    if (t < 0.0) return 0.0;
    if (lambda <= 0.0) return 1.0;
    double rho = lambda * service.mean();
    if (rho >= 1.0) throw NumericError("mg1_wait_cdf: unstable queue (lambda * b >= 1)");
    if (t == 0.0) return 1.0 - rho;
    auto transform = [&](std::complex<double> s) {
        return (1.0 - rho) / (s - lambda * (1.0 - service.lst(s)));
    };
    double v = euler_invert(transform, t, euler_params(tier));
    if (!std::isfinite(v) || v < -1e-6 || v > 1.0 + 1e-6)
        throw NumericError("mg1_wait_cdf: Laplace inversion did not converge at t = " + std::to_string(t));
    return std::clamp(v, 0.0, 1.0);
}

namespace detail {

// Pr[R_1 + ... + R_n <= t] for i.i.d. equilibrium residuals R of a mixture of
// deterministic service times. Each residual is a mixture of uniforms on
// [0, t_j] with weights P_j t_j / b, so every tuple of classes contributes the
// volume of a box cut by the simplex (inclusion-exclusion over corners).
inline double residual_sum_cdf(const EsServiceModel& m, int n, double t)
{
    if (t <= 0.0) return 0.0;
    const double mean = m.mean();
    const std::size_t c = m.times.size();
    std::vector<std::size_t> tuple(static_cast<std::size_t>(n), 0);
    double factorial = std::tgamma(n + 1.0);
    double acc = 0.0;
    for (;;) {
        double weight = 1.0;
        double volume_full = 1.0;
        double span = 0.0;
        for (auto j : tuple) {
            weight *= m.weights[j] / mean;
            volume_full *= m.times[j];
            span += m.times[j];
        }
        if (weight > 0.0) {
            double volume;
            if (t >= span) {
                volume = volume_full;
            } else {
                volume = 0.0;
                for (unsigned mask = 0; mask < (1u << n); ++mask) {
                    double shift = 0.0;
                    int bits = 0;
                    for (int i = 0; i < n; ++i)
                        if (mask & (1u << i)) {
                            shift += m.times[tuple[static_cast<std::size_t>(i)]];
                            ++bits;
                        }
                    double r = t - shift;
                    if (r <= 0.0) continue;
                    double term = std::pow(r, n);
                    volume += (bits % 2 == 0) ? term : -term;
                }
                volume /= factorial;
            }
            acc += weight * volume;
        }
        std::size_t i = 0;
        while (i < tuple.size() && tuple[i] == c - 1) tuple[i++] = 0;
        if (i == tuple.size()) break;
        ++tuple[i];
    }
    return acc;
}

}  // namespace detail

/// Number of leading Benes-series terms evaluated in closed form before the
/// remainder is inverted numerically.
inline constexpr int kExactSeriesTerms = 3;

/// M/G/1 waiting-time CDF for a mixture of deterministic service times.
/// Pr[W <= t] = (1 - rho) sum_n rho^n R^{*n}(t); the first terms carry every
/// low-order kink of the CDF, so they are computed exactly and only the
/// smooth remainder goes through the Laplace inversion.
inline double mg1_wait_cdf(double lambda, const EsServiceModel& service, double t,
                           InversionTier tier = InversionTier::standard)
{
    if (t < 0.0) return 0.0;
    if (lambda <= 0.0) return 1.0;
    const double mean = service.mean();
    const double rho = lambda * mean;
    if (rho >= 1.0) throw NumericError("mg1_wait_cdf: unstable queue (lambda * b >= 1)");
    if (t == 0.0) return 1.0 - rho;

    double head = 1.0;
    double rho_n = 1.0;
    for (int n = 1; n <= kExactSeriesTerms; ++n) {
        rho_n *= rho;
        head += rho_n * detail::residual_sum_cdf(service, n, t);
    }
    head *= 1.0 - rho;

    auto remainder = [&](std::complex<double> s) {
        std::complex<double> r = rho * (1.0 - service.lst(s)) / (s * mean);
        return (1.0 - rho) / s * std::pow(r, kExactSeriesTerms + 1) / (1.0 - r);
    };
    double v = head + euler_invert(remainder, t, euler_params(tier));
    if (!std::isfinite(v) || v < -1e-6 || v > 1.0 + 1e-6)
        throw NumericError("mg1_wait_cdf: Laplace inversion did not converge at t = " + std::to_string(t));
    return std::clamp(v, 0.0, 1.0);
}

// --- delay model -------------------------------------------------------------

/// Waiting and sojourn CDFs of the edge server at a fixed arrival rate.
class DelayModel {
public:
    DelayModel(double arrival_rate, EsServiceModel service, InversionTier tier = InversionTier::standard)
        : lambda_(arrival_rate), service_(std::move(service)), tier_(tier), deterministic_(service_.single_time())
    {
        if (lambda_ < 0.0) throw ValidationError("DelayModel: negative arrival rate");
        if (lambda_ * service_.mean() >= 1.0) throw NumericError("DelayModel: unstable queue (rho >= 1)");
    }

    double arrival_rate() const { return lambda_; }
    double utilization() const { return lambda_ * service_.mean(); }
    const EsServiceModel& service() const { return service_; }
    double service_time(std::size_t cls) const { return service_.times[cls]; }

    /// Pr[w^C <= t].
    double wait_cdf(double t) const
    {
        if (deterministic_) return md1_wait_cdf(lambda_, 1.0 / service_.times.front(), t);
        return mg1_wait_cdf(lambda_, service_, t, tier_);
    }

    /// Pr[t^C_j <= t] with t^C_j = w^C + q_j / (y f^C).
    double sojourn_cdf(std::size_t cls, double t) const
    {
        double u = t - service_.times[cls];
        if (u < 0.0) return 0.0;
        return wait_cdf(u);
    }

private:
    double lambda_;
    EsServiceModel service_;
    InversionTier tier_;
    bool deterministic_;
};

/// Time limit used when comparing against slot boundaries: b slots plus the
/// snap tolerance, so values within 1e-9 slot of a boundary count as inside.
inline double slot_edge(double slots, double tau) { return (slots + kSlotSnap) * tau; }

/// Whole slots covering a duration (ceil, with the same snap tolerance).
inline long slots_ceil(double seconds, double tau) { return static_cast<long>(std::ceil(seconds / tau - kSlotSnap)); }

/// Pr[t^W + t^C_j <= d_j] summed over upload slots l = 1..l_max.
inline double total_delay_prob(const Pmf& upload, std::size_t cls, const DelayModel& delays, const Scenario& sc)
{
    const auto& c = sc.classes[cls];
    double service = delays.service_time(cls);
    auto l_max = static_cast<long>(std::floor((c.deadline - service) / sc.slot + kSlotSnap));
    if (l_max < 1) return 0.0;
    double acc = 0.0;
    for (long l = 1; l <= l_max && l < static_cast<long>(upload.size()); ++l) {
        if (upload.probs[l] == 0.0) continue;
        acc += upload.probs[l] * delays.sojourn_cdf(cls, c.deadline - l * sc.slot + kSlotSnap * sc.slot);
    }
    return acc;
}

/// Slot-discretized sojourn time: Pr[t~ = b] = F(b tau) - F((b-1) tau).
/// Stops once the remaining mass is <= tail, or at `horizon` slots when given;
/// the tail then holds the exact mass beyond the horizon.
inline Pmf discretize_sojourn(const DelayModel& delays, std::size_t cls, double tau, double tail = kTailThreshold,
                              long horizon = -1)
{
    Pmf pmf;
    double prev = delays.sojourn_cdf(cls, slot_edge(0, tau));
    pmf.probs.push_back(prev);
    for (long b = 1;; ++b) {
        if (horizon >= 0 && b > horizon) break;
        if (1.0 - prev <= tail) break;
        if (b > kMaxSojournSlots)
            throw NumericError("discretize_sojourn: tail not reached within " + std::to_string(kMaxSojournSlots) +
                               " slots");
        double cur = delays.sojourn_cdf(cls, slot_edge(static_cast<double>(b), tau));
        cur = std::max(cur, prev);
        pmf.probs.push_back(cur - prev);
        prev = cur;
    }
    pmf.tail_mass = std::max(0.0, 1.0 - prev);
    return pmf;
}

// --- aggregate-rate feasibility search ----------------------------------------

struct LambdaSearchOptions {
    double tolerance = 1e-4;   // fraction of mu^C
    int max_iterations = 40;
};

namespace detail {

// Deadline-probability check for every (n, j, k) at one aggregate rate.
inline bool deadlines_met(const Scenario& sc, const std::vector<BsUploadProfile>& uploads,
                          const EsServiceModel& service, double lambda, InversionTier tier)
{
    DelayModel delays(lambda, service, tier);
    for (std::size_t j = 0; j < sc.num_classes(); ++j) {
        const auto& c = sc.classes[j];
        double need = 1.0 - c.max_violation.value_or(1.0);
        double svc = delays.service_time(j);
        auto l_max = static_cast<long>(std::floor((c.deadline - svc) / sc.slot + kSlotSnap));
        std::vector<double> cdf;
        for (long l = 1; l <= l_max; ++l)
            cdf.push_back(delays.sojourn_cdf(j, c.deadline - l * sc.slot + kSlotSnap * sc.slot));
        for (std::size_t n = 0; n < sc.num_bs(); ++n) {
            for (std::size_t k = 0; k < uploads[n].pmfs[j].size(); ++k) {
                if (sc.base_stations[n].channel_mix[j][k].probability <= 0.0) continue;
                const Pmf& up = uploads[n].pmfs[j][k];
                double p = 0.0;
                for (long l = 1; l <= l_max && l < static_cast<long>(up.size()); ++l)
                    p += up.probs[l] * cdf[static_cast<std::size_t>(l - 1)];
                if (p < need) return false;
            }
        }
    }
    return true;
}

}  // namespace detail

/// Largest aggregate ES arrival rate in [0, y f^C / sum_j P_j q_j] at which
/// every (BS, class, channel model) still meets its deadline with probability
/// >= 1 - eps_j. Returns 0 when even an idle server is not good enough.
inline double feasible_lambda_star(const Scenario& sc, double es_fraction, const std::vector<BsUploadProfile>& uploads,
                                   const LambdaSearchOptions& opt = {},
                                   InversionTier tier = InversionTier::standard)
{
    if (!(es_fraction > 0.0)) return 0.0;
    EsServiceModel service = es_service_model(sc, es_fraction);
    double mu = service.rate();
    if (!detail::deadlines_met(sc, uploads, service, 0.0, tier)) return 0.0;
    double lo = 0.0;
    double hi = mu;
    for (int it = 0; it < opt.max_iterations && hi - lo > opt.tolerance * mu; ++it) {
        double mid = 0.5 * (lo + hi);
        if (detail::deadlines_met(sc, uploads, service, mid, tier))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

}  // namespace mco
