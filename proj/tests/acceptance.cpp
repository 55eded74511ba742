// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "salign/emphasis.hpp"
#include "salign/fixtures.hpp"
#include "salign/lrp.hpp"
#include "salign/metrics.hpp"
#include "salign/pipeline.hpp"
#include "salign/spectral.hpp"
#include "salign/stats.hpp"
#include "salign/train.hpp"
#include "test_util.hpp"

#ifndef SALIGN_CLI_PATH
#error "SALIGN_CLI_PATH must point at the built CLI binary"
#endif

using namespace salign;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int id;
    std::string name;
    bool passed = true;
    std::string detail;
    double seconds = 0.0;

    void fail(const std::string& why) {
        passed = false;
        if (!detail.empty()) detail += "; ";
        detail += why;
    }
    void expect(bool ok, const std::string& why) {
        if (!ok) fail(why);
    }
};

double now_seconds() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

double tensor_sum(const Tensor3& t) {
    double s = 0.0;
    for (double v : t.values) s += v;
    return s;
}

// ---- shared generators ------------------------------------------------------

ModelSpec random_toy_cnn(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> size_d(6, 16), chan_d(1, 3), out_d(2, 4);
    std::normal_distribution<double> n(0.0, 0.5);
    int size = size_d(rng), in_c = chan_d(rng), conv_c = chan_d(rng);
    ModelSpec m;
    m.input = Shape{size, size, in_c, true};
    LayerSpec conv;
    conv.kind = LayerKind::Conv2d;
    conv.kh = conv.kw = 3;
    conv.in_channels = in_c;
    conv.out_channels = conv_c;
    conv.stride = 1;
    conv.same_pad = true;
    conv.weights.resize(conv.weight_count());
    for (auto& w : conv.weights) w = n(rng);
    conv.bias.assign(conv.bias_count(), 0.0);
    m.layers.push_back(conv);
    m.layers.push_back({.kind = LayerKind::Relu});
    m.layers.push_back({.kind = LayerKind::GlobalAveragePool});
    LayerSpec dense;
    dense.kind = LayerKind::Dense;
    dense.in_features = conv_c;
    dense.out_features = out_d(rng);
    dense.weights.resize(dense.weight_count());
    for (auto& w : dense.weights) w = n(rng);
    dense.bias.assign(dense.bias_count(), 0.0);
    m.layers.push_back(dense);
    return m;
}

Tensor3 random_input(const Shape& s, std::mt19937_64& rng) {
    Tensor3 t(s.h, s.w, s.c);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : t.values) v = u(rng);
    return t;
}

// ---- independent metric oracles ---------------------------------------------

// O(n log n) rank oracle via binary search on a sorted copy: the average rank
// of value v is the midpoint of its index range in sort order.
std::vector<double> ranks_oracle(const std::vector<double>& v) {
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> r(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        auto lo = std::lower_bound(sorted.begin(), sorted.end(), v[i]) - sorted.begin();
        auto hi = std::upper_bound(sorted.begin(), sorted.end(), v[i]) - sorted.begin();
        r[i] = 0.5 * (static_cast<double>(lo) + static_cast<double>(hi) + 1.0);
    }
    return r;
}

double pearson_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    long double n = static_cast<long double>(a.size());
    long double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
        saa += static_cast<long double>(a[i]) * a[i];
        sbb += static_cast<long double>(b[i]) * b[i];
        sab += static_cast<long double>(a[i]) * b[i];
    }
    long double cov = sab / n - (sa / n) * (sb / n);
    long double va = saa / n - (sa / n) * (sa / n);
    long double vb = sbb / n - (sb / n) * (sb / n);
    return static_cast<double>(cov / std::sqrt(va * vb));
}

double cosine_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    long double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<long double>(a[i]) * b[i];
        na += static_cast<long double>(a[i]) * a[i];
        nb += static_cast<long double>(b[i]) * b[i];
    }
    return static_cast<double>(dot / std::sqrt(na) / std::sqrt(nb));
}

// ---- Mann-Whitney enumeration oracle -----------------------------------------

double u_stat(const std::vector<double>& x, const std::vector<double>& y) {
    double u = 0.0;
    for (double a : x)
        for (double b : y) u += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    return u;
}

double mw_enumeration(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> pooled(x);
    pooled.insert(pooled.end(), y.begin(), y.end());
    size_t n = x.size(), total = pooled.size();
    double u_obs = u_stat(x, y);
    std::vector<bool> mask(total, false);
    std::fill(mask.begin(), mask.begin() + n, true);
    std::sort(mask.begin(), mask.end());
    double count = 0, le = 0, ge = 0;
    do {
        std::vector<double> xs, ys;
        for (size_t i = 0; i < total; ++i) (mask[i] ? xs : ys).push_back(pooled[i]);
        double u = u_stat(xs, ys);
        count += 1;
        if (u <= u_obs) le += 1;
        if (u >= u_obs) ge += 1;
    } while (std::next_permutation(mask.begin(), mask.end()));
    return std::min(1.0, 2.0 * std::min(le, ge) / count);
}

// ---- least-squares oracle -----------------------------------------------------

// Normal equations with a bias column, Gaussian elimination, partial pivoting.
std::pair<std::vector<double>, std::vector<double>> normal_equations(
    const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& y) {
    size_t n = x.size(), d = x[0].size() + 1, k = y[0].size();
    std::vector<std::vector<double>> a(d, std::vector<double>(d, 0.0));
    std::vector<std::vector<double>> rhs(d, std::vector<double>(k, 0.0));
    auto aug = [&](size_t s, size_t i) { return i < d - 1 ? x[s][i] : 1.0; };
    for (size_t s = 0; s < n; ++s)
        for (size_t i = 0; i < d; ++i) {
            for (size_t j = 0; j < d; ++j) a[i][j] += aug(s, i) * aug(s, j);
            for (size_t j = 0; j < k; ++j) rhs[i][j] += aug(s, i) * y[s][j];
        }
    for (size_t col = 0; col < d; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < d; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        std::swap(rhs[col], rhs[piv]);
        for (size_t r = 0; r < d; ++r) {
            if (r == col) continue;
            double f = a[r][col] / a[col][col];
            for (size_t j = 0; j < d; ++j) a[r][j] -= f * a[col][j];
            for (size_t j = 0; j < k; ++j) rhs[r][j] -= f * rhs[col][j];
        }
    }
    std::vector<double> weights((d - 1) * k), bias(k);
    for (size_t i = 0; i + 1 < d; ++i)
        for (size_t j = 0; j < k; ++j) weights[i * k + j] = rhs[i][j] / a[i][i];
    for (size_t j = 0; j < k; ++j) bias[j] = rhs[d - 1][j] / a[d - 1][d - 1];
    return {weights, bias};
}

// ---- criteria -----------------------------------------------------------------

void crit1_lrp_conservation(Criterion& c) {
    std::mt19937_64 rng(101);
    for (int iter = 0; iter < 100; ++iter) {
        ModelSpec m = random_toy_cnn(rng);
        Tensor3 in = random_input(m.input, rng);
        size_t outputs = shape_chain(m).back().count();
        std::vector<double> mask(outputs, 0.0);
        mask[iter % outputs] = 1.0;
        RelevanceMap rm = lrp(m, in, mask, {LrpRule::Z, 0.0});
        double seed = tensor_sum(rm.per_layer.back());
        for (size_t k = 0; k < rm.per_layer.size(); ++k) {
            double s = tensor_sum(rm.per_layer[k]);
            if (std::fabs(s - seed) > 1e-6 * std::fabs(seed) + 1e-15) {
                std::ostringstream os;
                os << "iter " << iter << " layer " << k << ": sum " << s << " vs seed " << seed;
                c.fail(os.str());
                return;
            }
        }
    }
}

void crit2_lrp_closed_form(Criterion& c) {
    ModelSpec m;
    m.input = Shape{1, 1, 2, true};
    m.layers.push_back({.kind = LayerKind::Flatten});
    LayerSpec dense;
    dense.kind = LayerKind::Dense;
    dense.in_features = 2;
    dense.out_features = 1;
    dense.weights = {1.0, 3.0};
    dense.bias = {0.0};
    m.layers.push_back(dense);
    Tensor3 in(1, 1, 2);
    in.values = {1.0, 2.0};
    RelevanceMap rm = lrp(m, in, {1.0}, {LrpRule::Z, 0.0});
    c.expect(std::fabs(rm.per_layer[0].values[0] - 1.0) <= 1e-12, "first input relevance != 1");
    c.expect(std::fabs(rm.per_layer[0].values[1] - 6.0) <= 1e-12, "second input relevance != 6");
}

void crit3_metric_oracles(Criterion& c) {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> u(0.0, 255.0);
    int tied_pairs = 0;
    for (int iter = 0; iter < 1000; ++iter) {
        // log-uniform lengths, up to 10,000
        double le = std::uniform_real_distribution<double>(std::log(4.0), std::log(10000.0))(rng);
        size_t n = static_cast<size_t>(std::exp(le));
        bool tied = iter % 5 < 2;  // 40% of pairs from a small alphabet
        if (tied) ++tied_pairs;
        std::vector<double> a(n), b(n);
        if (tied) {
            std::uniform_int_distribution<int> q(0, 9);
            for (auto& v : a) v = q(rng);
            for (auto& v : b) v = q(rng);
            a[0] = -1;  // keep at least two distinct values
            b[0] = -1;
        } else {
            for (auto& v : a) v = u(rng);
            for (auto& v : b) v = u(rng);
        }
        double cos_ref = cosine_oracle(a, b);
        double sp_ref = pearson_oracle(ranks_oracle(a), ranks_oracle(b));
        if (std::fabs(cosine_similarity(a, b) - cos_ref) > 1e-10) {
            c.fail("cosine mismatch at iter " + std::to_string(iter));
            return;
        }
        if (std::fabs(spearman(a, b) - sp_ref) > 1e-10) {
            c.fail("spearman mismatch at iter " + std::to_string(iter));
            return;
        }
    }
    c.expect(tied_pairs >= 300, "fewer than 30% tied pairs");
    std::vector<double> ea = {1, 2, 3}, eb = {3, 2, 1};
    c.expect(std::fabs(cosine_similarity(ea, eb) - 10.0 / 14.0) <= 1e-15,
             "cosine example != 10/14");
    std::vector<double> tie_case = {1, 2, 2, 4};
    c.expect(average_ranks(tie_case) == std::vector<double>{1.0, 2.5, 2.5, 4.0},
             "tie-case ranks != [1, 2.5, 2.5, 4]");
}

void crit4_mann_whitney(Criterion& c) {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int iter = 0; iter < 60; ++iter) {
        size_t n = 2 + rng() % 5, m = 2 + rng() % 5;
        while (n + m > 10) m = 2 + rng() % 5;
        std::vector<double> x(n), y(m);
        for (auto& v : x) v = u(rng);
        for (auto& v : y) v = u(rng);
        TestResult r = mann_whitney_two_sided(x, y);
        if (r.method != TestResult::Method::Exact) {
            c.fail("tie-free small sample did not take the exact path");
            return;
        }
        if (std::fabs(r.p_value - mw_enumeration(x, y)) > 1e-12) {
            c.fail("exact p differs from enumeration at iter " + std::to_string(iter));
            return;
        }
        if (std::fabs(u_stat(x, y) + u_stat(y, x) - double(n * m)) > 1e-12) {
            c.fail("U_x + U_y != n*m");
            return;
        }
    }
    // rank invariance under log transform on positive samples
    for (int iter = 0; iter < 20; ++iter) {
        std::vector<double> x(14), y(11);
        std::uniform_real_distribution<double> up(0.1, 10.0);
        for (auto& v : x) v = up(rng);
        for (auto& v : y) v = 1.4 * up(rng);
        TestResult raw = mann_whitney_two_sided(x, y);
        std::vector<double> lx = x, ly = y;
        for (auto& v : lx) v = std::log(v);
        for (auto& v : ly) v = std::log(v);
        TestResult logged = mann_whitney_two_sided(lx, ly);
        if (std::fabs(raw.statistic - logged.statistic) > 1e-12 ||
            std::fabs(raw.p_value - logged.p_value) > 1e-12) {
            c.fail("log transform changed the test result");
            return;
        }
    }
}

void crit5_anova(Criterion& c) {
    TestResult hand = anova_oneway({{1, 2, 3}, {2, 3, 4}, {6, 7, 8}});
    c.expect(std::fabs(hand.statistic - 21.0) <= 1e-9, "hand example F != 21.0");
    c.expect(hand.p_value >= 0.0 && hand.p_value <= 1.0, "hand example p outside [0,1]");
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int iter = 0; iter < 100; ++iter) {
        size_t n = 3 + rng() % 12, m = 3 + rng() % 12;
        std::vector<double> x(n), y(m);
        for (auto& v : x) v = u(rng);
        for (auto& v : y) v = u(rng) + 0.25;
        double mx = 0, my = 0;
        for (double v : x) mx += v;
        for (double v : y) my += v;
        mx /= n;
        my /= m;
        double ss = 0;
        for (double v : x) ss += (v - mx) * (v - mx);
        for (double v : y) ss += (v - my) * (v - my);
        double sp2 = ss / (n + m - 2.0);
        double t = (mx - my) / std::sqrt(sp2 * (1.0 / n + 1.0 / m));
        TestResult r = anova_oneway({x, y});
        if (std::fabs(r.statistic - t * t) > 1e-9 * std::max(1.0, t * t)) {
            c.fail("F != t^2 at iter " + std::to_string(iter));
            return;
        }
        if (r.p_value < 0.0 || r.p_value > 1.0) {
            c.fail("p outside [0,1]");
            return;
        }
    }
}

void crit6_spectral(Criterion& c) {
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<int> pos(8, 55);
    for (int iter = 0; iter < 20; ++iter) {
        Tensor3 img(64, 64, 1);
        int px = pos(rng), py = pos(rng);
        img.at(py, px, 0) = 255.0;
        Heatmap hm = spectral_residual(img);
        int bx = 0, by = 0;
        double best = -1.0;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
                if (hm.at(x, y) > best) {
                    best = hm.at(x, y);
                    bx = x;
                    by = y;
                }
        if (std::hypot(bx - px, by - py) > 3.0) {
            c.fail("impulse argmax off by > 3 px at iter " + std::to_string(iter));
            break;
        }
    }
    std::uniform_int_distribution<int> bpos(1, 4);
    for (int iter = 0; iter < 20; ++iter) {
        // noisy vertical grating with a 16x16 orthogonal-texture defect block
        Tensor3 img(64, 64, 1);
        std::uniform_real_distribution<double> gnoise(0.0, 20.0);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
                img.at(y, x, 0) = ((x / 4) % 2 ? 170.0 : 70.0) + gnoise(rng);
        int ox = bpos(rng) * 12, oy = bpos(rng) * 12;
        for (int y = oy; y < oy + 16; ++y)
            for (int x = ox; x < ox + 16; ++x)
                img.at(y, x, 0) = ((y / 4) % 2 ? 170.0 : 70.0) + gnoise(rng);
        Heatmap hm = spectral_residual(img);
        double inside = 0, outside = 0;
        int n_in = 0, n_out = 0;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                bool in = x >= ox && x < ox + 16 && y >= oy && y < oy + 16;
                (in ? inside : outside) += hm.at(x, y);
                (in ? n_in : n_out) += 1;
            }
        if (inside / n_in < 2.0 * (outside / n_out)) {
            c.fail("grating-defect contrast < 2 at iter " + std::to_string(iter));
            break;
        }
    }
    std::uniform_real_distribution<double> u(0.0, 255.0);
    for (int iter = 0; iter < 20; ++iter) {
        Tensor3 img(48, 48, 1);
        for (auto& v : img.values) v = u(rng);
        Tensor3 scaled = img;
        double k = iter % 2 ? 3.0 : 0.25;
        for (auto& v : scaled.values) v *= k;
        Heatmap a = spectral_residual(img), b = spectral_residual(scaled);
        for (size_t i = 0; i < a.values.size(); ++i)
            if (std::fabs(a.values[i] - b.values[i]) > 1e-6 * 255.0) {
                c.fail("brightness invariance broken at iter " + std::to_string(iter));
                return;
            }
    }
}

void crit7_head_trainer(Criterion& c) {
    std::mt19937_64 rng(707);
    std::uniform_real_distribution<double> u(0.0, 1.0), w(-1.0, 1.0);
    size_t n = 128, d = 6, k = 2;
    std::vector<std::vector<double>> x(n, std::vector<double>(d));
    std::vector<double> true_w(d * k), true_b(k);
    for (auto& v : true_w) v = w(rng);
    for (auto& v : true_b) v = w(rng);
    std::vector<std::vector<double>> y(n, std::vector<double>(k));
    for (size_t s = 0; s < n; ++s) {
        for (auto& v : x[s]) v = u(rng);
        for (size_t j = 0; j < k; ++j) {
            y[s][j] = true_b[j];
            for (size_t i = 0; i < d; ++i) y[s][j] += x[s][i] * true_w[i * k + j];
        }
    }
    auto [ow, ob] = normal_equations(x, y);
    HeadTrainConfig cfg;
    cfg.epochs = 20000;
    cfg.batch_size = static_cast<int>(n);  // full batch
    cfg.learning_rate = 0.2;
    cfg.seed = 7;
    HeadTrainResult res = train_head_raw(x, y, k, cfg);
    for (size_t i = 0; i < ow.size(); ++i)
        if (std::fabs(res.weights[i] - ow[i]) > 1e-3) {
            c.fail("weight " + std::to_string(i) + " off the least-squares oracle");
            break;
        }
    for (size_t j = 0; j < k; ++j)
        if (std::fabs(res.bias[j] - ob[j]) > 1e-3) c.fail("bias off the least-squares oracle");
    for (size_t e = 1; e < res.loss_trace.size(); ++e)
        if (res.loss_trace[e] > res.loss_trace[e - 1] + 1e-12) {
            c.fail("full-batch loss trace increased at epoch " + std::to_string(e));
            break;
        }
    // finite-difference gradient check at a random point
    std::vector<double> wt(d * k), bt(k);
    for (auto& v : wt) v = w(rng);
    for (auto& v : bt) v = w(rng);
    std::vector<size_t> batch(n);
    std::iota(batch.begin(), batch.end(), 0);
    std::vector<double> gw, gb;
    head_gradient(wt, bt, x, y, batch, gw, gb);
    const double h = 1e-4;
    for (size_t i = 0; i < wt.size(); ++i) {
        std::vector<double> wp = wt, wm = wt;
        wp[i] += h;
        wm[i] -= h;
        double fd = (head_loss(wp, bt, x, y) - head_loss(wm, bt, x, y)) / (2 * h);
        if (std::fabs(fd - gw[i]) > 1e-4 * std::max(1.0, std::fabs(fd))) {
            c.fail("finite-difference check failed for weight " + std::to_string(i));
            return;
        }
    }
    for (size_t j = 0; j < bt.size(); ++j) {
        std::vector<double> bp = bt, bm = bt;
        bp[j] += h;
        bm[j] -= h;
        double fd = (head_loss(wt, bp, x, y) - head_loss(wt, bm, x, y)) / (2 * h);
        if (std::fabs(fd - gb[j]) > 1e-4 * std::max(1.0, std::fabs(fd)))
            c.fail("finite-difference check failed for bias " + std::to_string(j));
    }
}

// Shared by criteria 8 and 9: the standard fixture set plus a full pipeline run.
struct EndToEnd {
    testutil::TempDir dir{"accept_e2e"};
    FixtureSummary fx;
    PipelineResult res;

    EndToEnd() {
        FixtureSpec spec;
        spec.frames = 500;
        spec.image_size = 32;
        // majority-attentive mix keeps the all-frames median inside the
        // attentive population instead of at the boundary between classes
        spec.attentive_fraction = 0.6;
        fx = generate_fixtures(spec, 2024, dir.file("data"));
        PipelineConfig cfg;
        cfg.manifest_path = fx.manifest_path;
        cfg.methods = {"lrp_random", "lrp_imagenet", "lrp_driving"};
        for (const auto& [name, path] : fx.model_paths) cfg.model_paths[name] = path;
        cfg.train_labels_path = fx.labels_path;
        cfg.train.epochs = 200;
        cfg.train.batch_size = 16;
        cfg.train.learning_rate = 0.2;
        cfg.train.seed = 2024;
        cfg.out_dir = dir.file("out");
        res = run_pipeline(cfg);
    }

    const MethodReport& row(const std::string& m) const {
        for (const auto& r : res.rows)
            if (r.method == m) return r;
        throw InternalError("missing method row " + m);
    }
};

void crit8_end_to_end(Criterion& c, const EndToEnd& e2e) {
    const MethodReport& rnd = e2e.row("lrp_random");
    const MethodReport& drv = e2e.row("lrp_driving");
    {
        std::ostringstream os;
        os << "median cosine driving=" << drv.median_all[0] << " random=" << rnd.median_all[0]
           << ", ratio driving=" << drv.ratio[0] << " random=" << rnd.ratio[0]
           << ", mw p=" << drv.mann_whitney.p_value;
        c.detail = os.str();
    }
    c.expect(drv.median_all[0] > rnd.median_all[0],
             "task-trained median cosine not above random");
    c.expect(drv.ratio[0] > 1.0, "task-trained attentive/inattentive ratio <= 1");
    c.expect(rnd.ratio[0] - 0.15 < 1.0, "random-regime ratio too far above 1");
    c.expect(drv.mann_whitney.p_value < 0.05, "mann-whitney p >= 0.05 for task-trained regime");
}

void crit9_emphasis(Criterion& c, const EndToEnd& e2e) {
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> u(0.0, 255.0), pos(-5.0, 20.0), len(1.0, 15.0);
    for (int iter = 0; iter < 1000; ++iter) {
        Heatmap hm(16, 14);
        for (double& v : hm.values) v = u(rng);
        BBox b{pos(rng), pos(rng), len(rng), len(rng)};
        double inside;
        try {
            inside = emphasis_proportion(hm, b);
        } catch (const DataError&) {
            continue;
        }
        Heatmap masked = hm;
        int x0 = std::max(0, (int)std::floor(b.x)), y0 = std::max(0, (int)std::floor(b.y));
        int x1 = std::min(hm.width, (int)std::ceil(b.x + b.w));
        int y1 = std::min(hm.height, (int)std::ceil(b.y + b.h));
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) masked.at(x, y) = 0.0;
        double outside = total_mass(masked) / total_mass(hm);
        if (std::fabs(inside + outside - 1.0) > 1e-9) {
            c.fail("inside + outside != 1 at iter " + std::to_string(iter));
            return;
        }
    }

    // Task-concentrating model (matched backbone, task-channel-only head) vs a
    // uniform baseline: the task class must rank first.
    ModelSpec model = load_model(e2e.fx.model_paths.at("lrp_imagenet"));
    LayerSpec& dense = model.layers.back();
    // flatten layout is (y, x, channel); channel 0 is the task matched filter
    for (int i = 0; i < dense.in_features; ++i)
        for (int j = 0; j < dense.out_features; ++j)
            dense.weights[static_cast<size_t>(i) * dense.out_features + j] =
                i % 2 == 0 ? 1.0 : 0.0;
    dense.bias.assign(dense.bias_count(), 0.0);

    auto records = load_manifest(e2e.fx.manifest_path);
    auto detections = load_detections(e2e.fx.detections_path);
    std::map<std::string, Heatmap> task_maps, baseline;
    int used = 0;
    for (const auto& r : records) {
        if (used >= 60) break;
        Tensor3 img = tensor_from_heatmap(load_grayscale(r.image_path));
        std::vector<double> mask(2, 1.0);
        Heatmap hm = lrp(model, img, mask).input_heatmap;
        if (total_mass(hm) <= 0.0) continue;
        Heatmap flat(hm.width, hm.height);
        for (double& v : flat.values) v = 1.0;
        task_maps.emplace(r.frame_id(), std::move(hm));
        baseline.emplace(r.frame_id(), std::move(flat));
        ++used;
    }
    auto ranking = class_emphasis_diff(task_maps, baseline, detections);
    if (ranking.empty() || ranking[0].class_name != "traffic light")
        c.fail("task class not ranked first (got '" +
               (ranking.empty() ? std::string("<none>") : ranking[0].class_name) + "')");
    else if (ranking[0].mean_diff <= 0.0)
        c.fail("task class diff not positive");
}

void crit10_attn_ratio(Criterion& c) {
    c.expect(std::fabs(attn_ratio(0.01337, 0.01297) - 1.03069) <= 0.001,
             "attn_ratio(0.01337, 0.01297) not within 0.001 of 1.03069");
    c.expect(std::fabs(attn_ratio(0.01319, 0.01422) - 0.92707) <= 0.001,
             "attn_ratio(0.01319, 0.01422) not within 0.001 of 0.92707");
}

void crit11_determinism(Criterion& c) {
    testutil::TempDir td("accept_det");
    FixtureSpec spec;
    spec.frames = 40;
    spec.image_size = 32;
    FixtureSummary fx = generate_fixtures(spec, 77, td.file("data"));
    {
        std::ofstream f(td.file("fixture.cfg"));
        f << "manifest = data/manifest.tsv\n";
        f << "methods = spectral,lrp_imagenet,lrp_driving\n";
        f << "model_lrp_imagenet = data/models/lrp_imagenet.model\n";
        f << "model_lrp_driving = data/models/lrp_driving.model\n";
        f << "train_labels = data/labels.tsv\n";
        f << "train_epochs = 20\n";
        f << "seed = 9\n";
        f << "emphasis_pairs = lrp_driving-lrp_imagenet\n";
        f << "emergent_pairs = lrp_driving-lrp_imagenet\n";
        f << "emergent_max_frames = 2\n";
    }
    auto run_once = [&](const char* threads, const std::string& out) {
        setenv("SALIENCE_ALIGN_THREADS", threads, 1);
        // same base config per run, only out_dir appended
        std::string cfg2 = out + ".cfg";
        {
            std::ofstream f(cfg2);
            f << slurp(td.file("fixture.cfg")) << "out_dir = " << out << "\n";
        }
        std::string cmd =
            std::string(SALIGN_CLI_PATH) + " run --config " + cfg2 + " >/dev/null 2>&1";
        int status = std::system(cmd.c_str());
        unsetenv("SALIENCE_ALIGN_THREADS");
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    if (run_once("1", td.file("out_a")) != 0 || run_once("1", td.file("out_b")) != 0 ||
        run_once("4", td.file("out_c")) != 0) {
        c.fail("pipeline run via the CLI failed");
        return;
    }
    for (const char* f : {"report.tsv", "report.txt", "scores.tsv", "skips.tsv",
                          "emphasis_lrp_driving-lrp_imagenet.tsv"}) {
        std::string a = slurp(fs::path(td.file("out_a")) / f);
        if (a.empty()) {
            c.fail(std::string("missing or empty report file ") + f);
            return;
        }
        if (a != slurp(fs::path(td.file("out_b")) / f)) {
            c.fail(std::string("same-seed reruns differ in ") + f);
            return;
        }
        if (a != slurp(fs::path(td.file("out_c")) / f)) {
            c.fail(std::string("worker count changed ") + f);
            return;
        }
    }
}

}  // namespace

int main() {
    std::vector<Criterion> criteria = {
        {1, "LRP z-rule conservation on 100 random bias-free CNNs (rel 1e-6, < 30 s)"},
        {2, "LRP single-dense closed form [1, 6] to 1e-12"},
        {3, "cosine/Spearman vs brute-force oracles, 1000 pairs, 1e-10, >= 30% ties"},
        {4, "Mann-Whitney exact == enumeration (n+m <= 10), U identity, log invariance"},
        {5, "ANOVA F = 21.0 to 1e-9; two-group F == t^2 on 100 instances; p in [0, 1]"},
        {6, "spectral residual: impulse <= 3 px, defect contrast >= 2, brightness inv. (< 10 s)"},
        {7, "head trainer: least-squares oracle 1e-3, monotone loss, FD gradient 1e-4"},
        {8, "end-to-end ordering: task-trained > random, ratio > 1, MW p < 0.05 (< 5 min)"},
        {9, "emphasis: inside + outside == 1 on 1000 pairs; task class ranked first"},
        {10, "attentive/inattentive ratio matches reported 1.03069 and 0.92707 within 0.001"},
        {11, "byte-identical reports across reruns and worker counts"},
    };

    int failures = 0;
    auto run = [&](Criterion& c, auto&& fn, double budget) {
        double t0 = now_seconds();
        try {
            fn(c);
        } catch (const std::exception& e) {
            c.fail(std::string("exception: ") + e.what());
        }
        c.seconds = now_seconds() - t0;
        if (budget > 0.0 && c.seconds > budget) {
            std::ostringstream os;
            os << "runtime " << c.seconds << " s exceeds " << budget << " s budget";
            c.fail(os.str());
        }
        std::ostringstream line;
        line << (c.passed ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": " << c.name;
        if (!c.detail.empty()) line << " -- " << c.detail;
        line << " (" << std::fixed << std::setprecision(1) << c.seconds << " s)";
        std::cout << line.str() << std::endl;
        if (!c.passed) ++failures;
    };

    run(criteria[0], crit1_lrp_conservation, 30.0);
    run(criteria[1], crit2_lrp_closed_form, 0.0);
    run(criteria[2], crit3_metric_oracles, 0.0);
    run(criteria[3], crit4_mann_whitney, 0.0);
    run(criteria[4], crit5_anova, 0.0);
    run(criteria[5], crit6_spectral, 10.0);
    run(criteria[6], crit7_head_trainer, 0.0);

    double t_fix = now_seconds();
    std::unique_ptr<EndToEnd> e2e;
    std::string e2e_error;
    try {
        e2e = std::make_unique<EndToEnd>();
    } catch (const std::exception& e) {
        e2e_error = e.what();
    }
    double fixture_seconds = now_seconds() - t_fix;
    run(criteria[7],
        [&](Criterion& c) {
            if (!e2e) {
                c.fail("fixture pipeline failed: " + e2e_error);
                return;
            }
            crit8_end_to_end(c, *e2e);
        },
        0.0);
    if (criteria[7].passed && fixture_seconds > 300.0) {
        std::cout << "[FAIL] criterion 8 runtime " << fixture_seconds << " s exceeds 300 s"
                  << std::endl;
        ++failures;
    }
    run(criteria[8],
        [&](Criterion& c) {
            if (!e2e) {
                c.fail("fixture pipeline failed: " + e2e_error);
                return;
            }
            crit9_emphasis(c, *e2e);
        },
        0.0);
    run(criteria[9], crit10_attn_ratio, 0.0);
    run(criteria[10], crit11_determinism, 0.0);

    std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: " + std::to_string(failures))
              << std::endl;
    return failures == 0 ? 0 : 1;
}
