#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "salign/dataset.hpp"
#include "salign/emphasis.hpp"
#include "salign/error.hpp"
#include "salign/heatmap.hpp"
#include "salign/model.hpp"
#include "salign/pgm.hpp"

namespace salign {

// Desk-scale stand-in for a naturalistic driving dataset: parameterized scenes
// with one task object (drives the label and the attentive gaze blob) plus
// distractor shapes (inattentive gaze lands on one of them).
struct FixtureSpec {
    int frames = 500;
    int image_size = 64;
    double attentive_fraction = 0.5;
    int distractors = 2;
    double gaze_sigma = 4.0;
    double train_ratio = 0.8;
    double trivial_fraction = 0.0;
    double nighttime_fraction = 0.0;
};

struct FixtureSummary {
    std::string manifest_path;
    std::string labels_path;
    std::string detections_path;
    std::map<std::string, std::string> model_paths;  // regime name -> manifest path
    int frames = 0;
    int attentive = 0;
};

namespace detail {

constexpr int kPatternSize = 5;

// Task object: a plus/cross shape. Distractor: a hollow square.
inline bool cross_cell(int y, int x) { return y == 2 || x == 2; }
inline bool ring_cell(int y, int x) {
    return y == 0 || y == kPatternSize - 1 || x == 0 || x == kPatternSize - 1;
}

template <typename Cell>
inline std::vector<double> matched_kernel(Cell cell) {
    std::vector<double> k(kPatternSize * kPatternSize);
    double mean = 0.0;
    for (int y = 0; y < kPatternSize; ++y)
        for (int x = 0; x < kPatternSize; ++x) {
            k[y * kPatternSize + x] = cell(y, x) ? 1.0 : 0.0;
            mean += k[y * kPatternSize + x];
        }
    mean /= k.size();
    double norm = 0.0;
    for (double& v : k) {
        v -= mean;
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : k) v /= norm;
    return k;
}

template <typename Cell>
inline void stamp(Heatmap& img, int ox, int oy, double intensity, Cell cell) {
    for (int y = 0; y < kPatternSize; ++y)
        for (int x = 0; x < kPatternSize; ++x)
            if (cell(y, x)) img.at(ox + x, oy + y) = intensity;
}

inline Heatmap gaussian_blob(int size, double cx, double cy, double sigma) {
    Heatmap g(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            g.at(x, y) = 255.0 * std::exp(-0.5 * d2 / (sigma * sigma));
        }
    return g;
}

// Fixture CNN: matched-filter conv (task channel + distractor channel),
// relu, 2x2 maxpool, flatten, dense head with 2 outputs.
inline ModelSpec fixture_architecture(int size) {
    ModelSpec m;
    m.input = Shape{size, size, 1, true};
    m.pre_scale = {1.0 / 255.0};
    m.pre_shift = {0.0};
    LayerSpec conv;
    conv.kind = LayerKind::Conv2d;
    conv.kh = conv.kw = kPatternSize;
    conv.in_channels = 1;
    conv.out_channels = 2;
    conv.stride = 1;
    conv.same_pad = true;
    m.layers.push_back(conv);
    m.layers.push_back({.kind = LayerKind::Relu});
    // coarse pooling keeps the head small enough that a modest training set
    // covers every spatial cell; LRP still routes through the pool argmax
    LayerSpec pool;
    pool.kind = LayerKind::MaxPool2d;
    pool.kh = pool.kw = 4;
    pool.stride = 4;
    m.layers.push_back(pool);
    m.layers.push_back({.kind = LayerKind::Flatten});
    LayerSpec dense;
    dense.kind = LayerKind::Dense;
    dense.in_features = (size / 4) * (size / 4) * 2;
    dense.out_features = 2;
    m.layers.push_back(dense);
    return m;
}

inline void fill_matched_backbone(ModelSpec& m) {
    auto task_k = matched_kernel(cross_cell);
    auto dist_k = matched_kernel(ring_cell);
    LayerSpec& conv = m.layers[0];
    conv.weights.assign(conv.weight_count(), 0.0);
    for (int ky = 0; ky < kPatternSize; ++ky)
        for (int kx = 0; kx < kPatternSize; ++kx) {
            size_t base = (static_cast<size_t>(ky) * kPatternSize + kx) * 2;
            conv.weights[base + 0] = task_k[ky * kPatternSize + kx];
            conv.weights[base + 1] = dist_k[ky * kPatternSize + kx];
        }
    // thresholds sit between the strongest off-target response (~1.25) and the
    // weakest on-target peak (~1.9), so each channel fires only on its pattern
    conv.bias = {-1.6, -1.55};
}

inline void fill_random_params(ModelSpec& m, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    for (auto& l : m.layers) {
        l.weights.resize(l.weight_count());
        for (auto& w : l.weights) w = n(rng);
        l.bias.assign(l.bias_count(), 0.0);
    }
}

inline void fill_random_head(ModelSpec& m, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    LayerSpec& dense = m.layers.back();
    dense.weights.resize(dense.weight_count());
    for (auto& w : dense.weights) w = n(rng);
    dense.bias.assign(dense.bias_count(), 0.0);
}

}  // namespace detail

inline FixtureSummary generate_fixtures(const FixtureSpec& spec, uint64_t seed,
                                        const std::string& out_dir) {
    if (spec.frames <= 0 || spec.image_size < 16) throw DataError("fixtures: invalid spec");
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "images");
    fs::create_directories(fs::path(out_dir) / "gaze");
    fs::create_directories(fs::path(out_dir) / "models");

    std::mt19937_64 rng(seed);
    const int s = spec.image_size;
    const int place_max = s - detail::kPatternSize;
    std::uniform_int_distribution<int> pos(0, place_max);
    std::uniform_real_distribution<double> noise(0.0, 40.0);

    std::vector<FrameRecord> records;
    std::map<std::string, DriveLabel> labels;
    std::map<std::string, std::vector<Detection>> detections;
    const char* distractor_classes[] = {"car", "person", "stop sign"};

    // error-diffusion interleaving gives exact per-class counts
    double attn_acc = 0.0, triv_acc = 0.0, night_acc = 0.0;
    int n_attentive = 0;
    for (int i = 0; i < spec.frames; ++i) {
        attn_acc += spec.attentive_fraction;
        bool attentive = attn_acc >= 1.0;
        if (attentive) attn_acc -= 1.0;
        triv_acc += spec.trivial_fraction;
        bool trivial = triv_acc >= 1.0;
        if (trivial) triv_acc -= 1.0;
        night_acc += spec.nighttime_fraction;
        bool night = night_acc >= 1.0;
        if (night) night_acc -= 1.0;
        if (attentive) ++n_attentive;

        Heatmap img(s, s);
        for (double& v : img.values) v = noise(rng);

        int ox = pos(rng), oy = pos(rng);
        detail::stamp(img, ox, oy, 255.0, detail::cross_cell);
        double cx = ox + 2.0, cy = oy + 2.0;

        std::vector<std::pair<int, int>> dist_pos;
        for (int d = 0; d < spec.distractors; ++d) {
            int dx = 0, dy = 0;
            for (int attempt = 0; attempt < 100; ++attempt) {
                dx = pos(rng);
                dy = pos(rng);
                bool clear = std::abs(dx - ox) > 6 || std::abs(dy - oy) > 6;
                for (const auto& [px, py] : dist_pos)
                    if (std::abs(dx - px) <= 6 && std::abs(dy - py) <= 6) clear = false;
                if (clear) break;
            }
            dist_pos.push_back({dx, dy});
            detail::stamp(img, dx, dy, 230.0, detail::ring_cell);
        }

        double gaze_cx = cx, gaze_cy = cy;
        if (!attentive && !dist_pos.empty()) {
            std::uniform_int_distribution<size_t> pick(0, dist_pos.size() - 1);
            auto [px, py] = dist_pos[pick(rng)];
            gaze_cx = px + 2.0;
            gaze_cy = py + 2.0;
        }
        Heatmap gaze = detail::gaussian_blob(s, gaze_cx, gaze_cy, spec.gaze_sigma);

        std::string frame_name = "fixture_" + std::to_string(i);
        std::string img_rel = "images/" + frame_name + ".pgm";
        std::string gaze_rel = "gaze/" + frame_name + ".pgm";
        save_grayscale(img, (fs::path(out_dir) / img_rel).string());
        save_grayscale(gaze, (fs::path(out_dir) / gaze_rel).string());

        FrameRecord rec;
        rec.run_id = "fixture";
        rec.frame_idx = i;
        rec.attentive = attentive;
        rec.trivial = trivial;
        rec.daytime = !night;
        rec.image_path = img_rel;
        rec.gaze_path = gaze_rel;
        rec.detections_path = "detections.tsv";
        records.push_back(rec);

        labels[rec.frame_id()] = DriveLabel{0.2 + 0.6 * cx / s, 0.2 + 0.6 * cy / s};

        auto& dets = detections[rec.frame_id()];
        dets.push_back({"traffic light", {double(ox), double(oy), 5.0, 5.0}, 0.9});
        for (size_t d = 0; d < dist_pos.size(); ++d)
            dets.push_back({distractor_classes[d % 3],
                            {double(dist_pos[d].first), double(dist_pos[d].second), 5.0, 5.0},
                            0.8});
    }

    records = split_train_test(std::move(records), spec.train_ratio, seed + 1);

    FixtureSummary summary;
    summary.frames = spec.frames;
    summary.attentive = n_attentive;
    summary.manifest_path = (fs::path(out_dir) / "manifest.tsv").string();
    summary.labels_path = (fs::path(out_dir) / "labels.tsv").string();
    summary.detections_path = (fs::path(out_dir) / "detections.tsv").string();

    {
        std::ofstream mf(summary.manifest_path);
        for (const auto& r : records)
            mf << r.run_id << '\t' << r.frame_idx << '\t'
               << (r.attentive ? "attentive" : "inattentive") << '\t' << (r.trivial ? 1 : 0)
               << '\t' << (r.daytime ? 1 : 0) << '\t'
               << (r.split == Split::Train ? "train" : "test") << '\t' << r.image_path << '\t'
               << r.gaze_path << '\t' << r.detections_path << "\n";
        if (!mf) throw DataError("fixtures: manifest write failed");
    }
    {
        std::ofstream lf(summary.labels_path);
        for (const auto& r : records) {
            const DriveLabel& l = labels[r.frame_id()];
            lf << r.run_id << '\t' << r.frame_idx << '\t' << l.yaw << '\t' << l.translation
               << "\n";
        }
    }
    save_detections(detections, summary.detections_path);

    // Three weight regimes over the same architecture: fully random, matched
    // backbone with an untrained head, and matched backbone whose head the
    // pipeline fine-tunes on the fixture labels.
    ModelSpec random_model = detail::fixture_architecture(s);
    random_model.name = "lrp_random";
    detail::fill_random_params(random_model, rng, 0.1);
    ModelSpec pretrained = detail::fixture_architecture(s);
    pretrained.name = "lrp_imagenet";
    detail::fill_matched_backbone(pretrained);
    detail::fill_random_head(pretrained, rng, 0.1);
    ModelSpec driving = pretrained;
    driving.name = "lrp_driving";

    for (const auto& [name, model] :
         std::initializer_list<std::pair<std::string, const ModelSpec*>>{
             {"lrp_random", &random_model}, {"lrp_imagenet", &pretrained},
             {"lrp_driving", &driving}}) {
        std::string p = (fs::path(out_dir) / "models" / (name + ".model")).string();
        save_model(*model, p);
        summary.model_paths[name] = p;
    }
    return summary;
}

// Fixture spec file: 'key = value' lines matching the FixtureSpec fields.
inline FixtureSpec parse_fixture_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("fixtures: cannot open spec '" + path + "'");
    FixtureSpec spec;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string key, eq, value;
        if (!(ls >> key)) continue;
        if (!(ls >> eq >> value) || eq != "=") {
            std::ostringstream os;
            os << "fixtures: " << path << ":" << lineno << ": expected 'key = value'";
            throw DataError(os.str());
        }
        try {
            if (key == "frames") spec.frames = std::stoi(value);
            else if (key == "image_size") spec.image_size = std::stoi(value);
            else if (key == "attentive_fraction") spec.attentive_fraction = std::stod(value);
            else if (key == "distractors") spec.distractors = std::stoi(value);
            else if (key == "gaze_sigma") spec.gaze_sigma = std::stod(value);
            else if (key == "train_ratio") spec.train_ratio = std::stod(value);
            else if (key == "trivial_fraction") spec.trivial_fraction = std::stod(value);
            else if (key == "nighttime_fraction") spec.nighttime_fraction = std::stod(value);
            else throw DataError("unknown key '" + key + "'");
        } catch (const std::exception& e) {
            std::ostringstream os;
            os << "fixtures: " << path << ":" << lineno << ": " << e.what();
            throw DataError(os.str());
        }
    }
    return spec;
}

}  // namespace salign
