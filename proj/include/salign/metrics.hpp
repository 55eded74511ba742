#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "salign/error.hpp"
#include "salign/heatmap.hpp"

namespace salign {

// Raised when a metric is undefined for the inputs (zero vector, zero rank
// variance); callers skip and count the frame instead of scoring it 0.
class MetricUndefined : public DataError {
public:
    explicit MetricUndefined(const std::string& msg) : DataError(msg) {}
};

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw MetricUndefined("cosine: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Average ranks (1-based), ties share the mean of their rank range.
inline std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t i, size_t j) { return v[i] < v[j]; });
    std::vector<double> ranks(v.size());
    size_t i = 0;
    while (i < idx.size()) {
        size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw MetricUndefined("pearson: zero variance");
    return sxy / (std::sqrt(sxx) * std::sqrt(syy));
}

// Pearson correlation of the average-rank vectors.
inline double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("spearman: dimension mismatch");
    if (a.size() < 2) throw DataError("spearman: need at least 2 elements");
    std::vector<double> ra = average_ranks(a);
    std::vector<double> rb = average_ranks(b);
    try {
        return pearson(ra, rb);
    } catch (const MetricUndefined&) {
        throw MetricUndefined("spearman: zero rank variance");
    }
}

inline double cosine_similarity(const Heatmap& a, const Heatmap& b) {
    if (!a.same_shape(b)) throw DataError("cosine: dimension mismatch");
    return cosine_similarity(std::span<const double>(a.values), std::span<const double>(b.values));
}

inline double spearman(const Heatmap& a, const Heatmap& b) {
    if (!a.same_shape(b)) throw DataError("spearman: dimension mismatch");
    return spearman(std::span<const double>(a.values), std::span<const double>(b.values));
}

struct SimilarityScore {
    std::string frame_id;
    std::string method;
    double cosine = 0.0;
    double spearman = 0.0;
};

}  // namespace salign
