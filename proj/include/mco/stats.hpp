#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace mco {

/// One-sample Kolmogorov-Smirnov distance between samples and a CDF that may
/// carry atoms. Tied samples are grouped; at each distinct value v the
/// empirical CDF is compared with F(v) on the right and with F(v-) on the left.
/// `cdf_left` defaults to F itself (continuous away from the samples' atoms).
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf,
                           const std::function<double(double)>& cdf_left = {})
{
    if (samples.empty()) throw std::invalid_argument("ks_statistic: no samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double worst = 0.0;
    std::size_t i = 0;
    while (i < samples.size()) {
        std::size_t j = i;
        while (j < samples.size() && samples[j] == samples[i]) ++j;
        double v = samples[i];
        double right = cdf(v);
        double left = cdf_left ? cdf_left(v) : right;
        worst = std::max({worst, std::abs(static_cast<double>(j) / n - right), std::abs(static_cast<double>(i) / n - left)});
        i = j;
    }
    return worst;
}

/// Standard deviation of a binomial proportion.
inline double binomial_sigma(double p, double trials)
{
    if (trials <= 0.0) return 0.0;
    return std::sqrt(std::max(p * (1.0 - p), 0.0) / trials);
}

/// Coefficient of determination of the least-squares line through (x, y).
inline double r_squared(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("r_squared: need >= 2 paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (syy == 0.0) return 1.0;
    if (sxx == 0.0) return 0.0;
    return sxy * sxy / (sxx * syy);
}

}  // namespace mco
