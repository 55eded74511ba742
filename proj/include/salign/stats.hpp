#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "salign/error.hpp"
#include "salign/metrics.hpp"

namespace salign {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    enum class Method { Exact, NormalApproximation } method = Method::NormalApproximation;
};

inline double median(std::vector<double> values) {
    if (values.empty()) throw DataError("median: empty input");
    size_t n = values.size();
    std::nth_element(values.begin(), values.begin() + n / 2, values.end());
    double hi = values[n / 2];
    if (n % 2 == 1) return hi;
    double lo = *std::max_element(values.begin(), values.begin() + n / 2);
    return 0.5 * (lo + hi);
}

inline double attn_ratio(double attentive_median, double inattentive_median) {
    if (inattentive_median == 0.0) throw DataError("attn_ratio: zero inattentive median");
    return attentive_median / inattentive_median;
}

// ---------------------------------------------------------------------------
// Regularized incomplete beta I_x(a, b), continued fraction per the modified
// Lentz scheme; relative accuracy ~1e-12.
// ---------------------------------------------------------------------------
namespace detail {

inline double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-14;
    constexpr double kTiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw InternalError("incomplete beta: continued fraction did not converge");
}

}  // namespace detail

inline double incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw DataError("incomplete_beta: a, b must be positive");
    if (x < 0.0 || x > 1.0) throw DataError("incomplete_beta: x must be in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                      b * std::log1p(-x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

// P(F > f) for an F distribution with (d1, d2) degrees of freedom.
inline double f_survival(double f, double d1, double d2) {
    if (f <= 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    return incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

inline double normal_survival_two_sided(double z) {
    return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

// ---------------------------------------------------------------------------
// Mann-Whitney U, two-sided. Exact enumeration (rank-sum distribution over all
// C(n+m, n) labelings) for tie-free samples with n+m <= exact_limit; normal
// approximation with tie and continuity correction otherwise.
// ---------------------------------------------------------------------------
inline TestResult mann_whitney_two_sided(const std::vector<double>& x,
                                         const std::vector<double>& y, int exact_limit = 16) {
    if (x.empty() || y.empty()) throw DataError("mann_whitney: empty sample");
    const size_t n = x.size(), m = y.size(), total = n + m;

    std::vector<double> pooled(x);
    pooled.insert(pooled.end(), y.begin(), y.end());
    std::vector<double> ranks = average_ranks(pooled);
    double rank_sum_x = 0.0;
    for (size_t i = 0; i < n; ++i) rank_sum_x += ranks[i];
    double u_x = rank_sum_x - static_cast<double>(n) * (n + 1) / 2.0;
    double nm = static_cast<double>(n) * static_cast<double>(m);

    // tie groups over the pooled sample
    std::vector<double> sorted(pooled);
    std::sort(sorted.begin(), sorted.end());
    bool has_ties = std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();

    TestResult res;
    res.statistic = u_x;
    if (!has_ties && total <= static_cast<size_t>(exact_limit)) {
        // count[k][s]: k-subsets of ranks {1..total} with rank sum s
        size_t max_sum = total * (total + 1) / 2;
        std::vector<std::vector<double>> count(n + 1, std::vector<double>(max_sum + 1, 0.0));
        count[0][0] = 1.0;
        for (size_t r = 1; r <= total; ++r)
            for (size_t k = std::min(n, r); k >= 1; --k)
                for (size_t s = max_sum; s >= r; --s)
                    if (count[k - 1][s - r] > 0.0) count[k][s] += count[k - 1][s - r];
        double total_count = 0.0, le = 0.0, ge = 0.0;
        double base = static_cast<double>(n) * (n + 1) / 2.0;
        for (size_t s = 0; s <= max_sum; ++s) {
            double c = count[n][s];
            if (c == 0.0) continue;
            total_count += c;
            double u = static_cast<double>(s) - base;
            if (u <= u_x) le += c;
            if (u >= u_x) ge += c;
        }
        res.p_value = std::min(1.0, 2.0 * std::min(le, ge) / total_count);
        res.method = TestResult::Method::Exact;
        return res;
    }

    double tie_term = 0.0;
    for (size_t i = 0; i < sorted.size();) {
        size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    double nt = static_cast<double>(total);
    double var = nm / 12.0 * ((nt + 1.0) - tie_term / (nt * (nt - 1.0)));
    res.method = TestResult::Method::NormalApproximation;
    if (var <= 0.0) {
        res.p_value = 1.0;
        return res;
    }
    double dev = std::max(std::fabs(u_x - nm / 2.0) - 0.5, 0.0);  // continuity correction
    res.p_value = std::min(1.0, normal_survival_two_sided(dev / std::sqrt(var)));
    return res;
}

// One-way ANOVA: F = between-group mean square / within-group mean square.
inline TestResult anova_oneway(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw DataError("anova: need at least 2 groups");
    size_t total_n = 0;
    double grand_sum = 0.0;
    for (const auto& g : groups) {
        if (g.size() < 2) throw DataError("anova: every group needs at least 2 values");
        total_n += g.size();
        for (double v : g) grand_sum += v;
    }
    double grand_mean = grand_sum / static_cast<double>(total_n);
    double ssb = 0.0, ssw = 0.0;
    for (const auto& g : groups) {
        double mean = 0.0;
        for (double v : g) mean += v;
        mean /= static_cast<double>(g.size());
        ssb += static_cast<double>(g.size()) * (mean - grand_mean) * (mean - grand_mean);
        for (double v : g) ssw += (v - mean) * (v - mean);
    }
    double d1 = static_cast<double>(groups.size() - 1);
    double d2 = static_cast<double>(total_n - groups.size());
    double msb = ssb / d1, msw = ssw / d2;
    TestResult res;
    res.method = TestResult::Method::Exact;
    if (msw == 0.0) {
        if (msb == 0.0) throw DataError("anova: zero between- and within-group variance");
        res.statistic = std::numeric_limits<double>::infinity();
        res.p_value = 0.0;
        return res;
    }
    res.statistic = msb / msw;
    res.p_value = f_survival(res.statistic, d1, d2);
    return res;
}

}  // namespace salign
