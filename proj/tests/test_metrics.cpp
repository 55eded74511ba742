#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "salign/metrics.hpp"

using namespace salign;

namespace {

// Brute-force rank oracle: sort-based ranks with explicit tie averaging,
// then Pearson computed from raw sums.
std::vector<double> ranks_oracle(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        size_t less = 0, equal = 0;
        for (size_t j = 0; j < v.size(); ++j) {
            if (v[j] < v[i]) ++less;
            if (v[j] == v[i]) ++equal;
        }
        // average of ranks less+1 .. less+equal
        r[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
    }
    return r;
}

double spearman_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> ra = ranks_oracle(a), rb = ranks_oracle(b);
    double n = static_cast<double>(a.size());
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        sa += ra[i];
        sb += rb[i];
        saa += ra[i] * ra[i];
        sbb += rb[i] * rb[i];
        sab += ra[i] * rb[i];
    }
    double cov = sab / n - (sa / n) * (sb / n);
    double va = saa / n - (sa / n) * (sa / n);
    double vb = sbb / n - (sb / n) * (sb / n);
    return cov / std::sqrt(va * vb);
}

double cosine_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na) / std::sqrt(nb);
}

}  // namespace

TEST_CASE("cosine basics") {
    std::vector<double> a = {1, 2, 3}, b = {3, 2, 1};
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
    CHECK(cosine_similarity(a, b) == doctest::Approx(10.0 / 14.0).epsilon(1e-12));
    CHECK_THROWS_AS(cosine_similarity(a, std::vector<double>{1, 2}), DataError);
    CHECK_THROWS_AS(cosine_similarity(std::vector<double>{0, 0, 0}, a), MetricUndefined);
}

TEST_CASE("cosine scale invariance and symmetry") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int iter = 0; iter < 50; ++iter) {
        std::vector<double> a(40), b(40);
        for (auto& v : a) v = u(rng);
        for (auto& v : b) v = u(rng);
        std::vector<double> ka = a;
        for (auto& v : ka) v *= 17.25;
        CHECK(cosine_similarity(ka, b) == doctest::Approx(cosine_similarity(a, b)).epsilon(1e-12));
        CHECK(cosine_similarity(a, b) == doctest::Approx(cosine_similarity(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("spearman basics and tie handling") {
    std::vector<double> a = {1, 2, 2, 4}, b = {10, 20, 30, 40};
    CHECK(spearman(b, b) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> rev = {40, 30, 20, 10};
    CHECK(spearman(b, rev) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(spearman(a, b) == doctest::Approx(spearman_oracle(a, b)).epsilon(1e-12));
    // frozen from the oracle: ranks [1, 2.5, 2.5, 4] vs [1, 2, 3, 4]
    CHECK(average_ranks(a) == std::vector<double>{1.0, 2.5, 2.5, 4.0});
    CHECK_THROWS_AS(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}),
                    MetricUndefined);
    CHECK_THROWS_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), DataError);
}

TEST_CASE("spearman is invariant under strictly increasing transforms") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int iter = 0; iter < 20; ++iter) {
        std::vector<double> a(30), b(30);
        for (auto& v : a) v = u(rng);
        for (auto& v : b) v = u(rng);
        std::vector<double> ta = a;
        for (auto& v : ta) v = std::exp(v) + 3.0;
        CHECK(spearman(ta, b) == doctest::Approx(spearman(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("fast ranking path matches brute-force oracle with ties") {
    std::mt19937_64 rng(3);
    for (int iter = 0; iter < 30; ++iter) {
        size_t n = 5 + static_cast<size_t>(rng() % 200);
        // coarse quantization forces heavy ties
        std::uniform_int_distribution<int> q(0, 7);
        std::vector<double> a(n), b(n);
        for (auto& v : a) v = q(rng);
        for (auto& v : b) v = q(rng);
        // guarantee >= 2 distinct values
        a[0] = -1;
        b[0] = -1;
        CHECK(spearman(a, b) == doctest::Approx(spearman_oracle(a, b)).epsilon(1e-10));
        CHECK(cosine_similarity(a, b) == doctest::Approx(cosine_oracle(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("heatmap overloads check shapes") {
    Heatmap a(2, 2, {1, 2, 3, 4}), b(2, 2, {4, 3, 2, 1}), c(4, 1, {1, 2, 3, 4});
    CHECK(cosine_similarity(a, b) == doctest::Approx(cosine_oracle(a.values, b.values)));
    CHECK_THROWS_AS(cosine_similarity(a, c), DataError);
    CHECK_THROWS_AS(spearman(a, c), DataError);
}
