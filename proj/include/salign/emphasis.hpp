#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "salign/error.hpp"
#include "salign/heatmap.hpp"
#include "salign/metrics.hpp"

namespace salign {

struct BBox {
    double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
};

struct Detection {
    std::string class_name;  // COCO label vocabulary; may contain spaces
    BBox bbox;               // pixels, image coordinates
    double confidence = 1.0;
};

struct ClassEmphasisDiff {
    std::string class_name;
    double mean_diff = 0.0;
    size_t n_observations = 0;
};

// Fraction of total heatmap mass inside the bbox (clamped to image bounds).
inline double emphasis_proportion(const Heatmap& hm, const BBox& box) {
    double total = total_mass(hm);
    if (total <= 0.0) throw MetricUndefined("emphasis: zero-total heatmap");
    int x0 = std::max(0, static_cast<int>(std::floor(box.x)));
    int y0 = std::max(0, static_cast<int>(std::floor(box.y)));
    int x1 = std::min(hm.width, static_cast<int>(std::ceil(box.x + box.w)));
    int y1 = std::min(hm.height, static_cast<int>(std::ceil(box.y + box.h)));
    if (x0 >= x1 || y0 >= y1) throw DataError("emphasis: empty clamped bbox");
    double inside = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) inside += hm.at(x, y);
    return inside / total;
}

// Per-detection emphasis difference between two methods, averaged per class
// over all frames. Frames are keyed by id; both map sets must cover the same
// frames, detections may cover a subset.
inline std::vector<ClassEmphasisDiff> class_emphasis_diff(
    const std::map<std::string, Heatmap>& maps_a, const std::map<std::string, Heatmap>& maps_b,
    const std::map<std::string, std::vector<Detection>>& detections) {
    for (const auto& [id, hm] : maps_a)
        if (!maps_b.count(id)) throw DataError("class_emphasis_diff: frame set mismatch at " + id);
    if (maps_a.size() != maps_b.size())
        throw DataError("class_emphasis_diff: frame set mismatch");
    std::map<std::string, std::pair<double, size_t>> acc;  // class -> (sum, count)
    for (const auto& [id, dets] : detections) {
        auto ia = maps_a.find(id);
        auto ib = maps_b.find(id);
        if (ia == maps_a.end() || ib == maps_b.end()) continue;
        for (const auto& det : dets) {
            double pa, pb;
            try {
                pa = emphasis_proportion(ia->second, det.bbox);
                pb = emphasis_proportion(ib->second, det.bbox);
            } catch (const DataError&) {
                continue;  // zero-mass map or degenerate box: skip the observation
            }
            auto& slot = acc[det.class_name];
            slot.first += pa - pb;
            slot.second += 1;
        }
    }
    std::vector<ClassEmphasisDiff> out;
    for (const auto& [cls, slot] : acc)
        out.push_back({cls, slot.first / static_cast<double>(slot.second), slot.second});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.mean_diff != b.mean_diff) return a.mean_diff > b.mean_diff;
        return a.class_name < b.class_name;
    });
    return out;
}

// Normalize both maps to [0, 255], clip to [0, 100], subtract the reference
// from the task map, clamp negatives for display.
inline Heatmap emergent_feature_map(const Heatmap& driving, const Heatmap& imagenet) {
    if (!driving.same_shape(imagenet)) throw DataError("emergent_feature_map: dimension mismatch");
    Heatmap a = clip(normalize_max(driving), 0.0, 100.0);
    Heatmap b = clip(normalize_max(imagenet), 0.0, 100.0);
    return clamp_negative(subtract(a, b));
}

// ---------------------------------------------------------------------------
// Detections file: tab-separated, one record per line:
//   frame_id <TAB> class_name <TAB> confidence <TAB> x <TAB> y <TAB> w <TAB> h
// Tabs keep multi-word COCO labels ("traffic light") intact.
// ---------------------------------------------------------------------------
inline std::map<std::string, std::vector<Detection>> load_detections(
    const std::string& path, double confidence_threshold = 0.3) {
    std::ifstream in(path);
    if (!in) throw DataError("detections: cannot open '" + path + "'");
    std::map<std::string, std::vector<Detection>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ls(line);
        std::string f;
        while (std::getline(ls, f, '\t')) fields.push_back(f);
        if (fields.size() != 7) {
            std::ostringstream os;
            os << "detections: " << path << ":" << lineno << ": expected 7 tab-separated fields";
            throw DataError(os.str());
        }
        try {
            Detection d;
            d.class_name = fields[1];
            d.confidence = std::stod(fields[2]);
            d.bbox = {std::stod(fields[3]), std::stod(fields[4]), std::stod(fields[5]),
                      std::stod(fields[6])};
            if (d.bbox.w <= 0.0 || d.bbox.h <= 0.0)
                throw DataError("non-positive box dimensions");
            if (d.confidence >= confidence_threshold) out[fields[0]].push_back(d);
        } catch (const std::exception& e) {
            std::ostringstream os;
            os << "detections: " << path << ":" << lineno << ": " << e.what();
            throw DataError(os.str());
        }
    }
    return out;
}

inline void save_detections(const std::map<std::string, std::vector<Detection>>& dets,
                            const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("detections: cannot write '" + path + "'");
    for (const auto& [id, v] : dets)
        for (const auto& d : v)
            out << id << '\t' << d.class_name << '\t' << d.confidence << '\t' << d.bbox.x << '\t'
                << d.bbox.y << '\t' << d.bbox.w << '\t' << d.bbox.h << "\n";
}

}  // namespace salign
