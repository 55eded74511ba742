#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "salign/error.hpp"
#include "salign/train.hpp"

namespace salign {

enum class Split { Train, Test, Unassigned };

struct FrameRecord {
    std::string run_id;
    int frame_idx = 0;
    bool attentive = false;
    bool trivial = false;
    bool daytime = true;
    Split split = Split::Unassigned;
    std::string image_path;
    std::string gaze_path;
    std::string detections_path;  // empty when absent

    std::string frame_id() const { return run_id + "_" + std::to_string(frame_idx); }
};

// ---------------------------------------------------------------------------
// Frame manifest: tab-separated, one frame per line:
//   run_id frame_idx attention trivial daytime split image_path gaze_path detections_path
// attention is attentive|inattentive, trivial/daytime are 0|1, split is
// train|test|-, detections_path is '-' when absent. Relative paths resolve
// against the manifest's directory.
// ---------------------------------------------------------------------------
inline std::vector<FrameRecord> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("manifest: cannot open '" + path + "'");
    std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        if (p.empty() || p == "-") return std::string();
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };

    std::vector<FrameRecord> records;
    std::set<std::pair<std::string, int>> seen;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& why) {
        std::ostringstream os;
        os << "manifest: " << path << ":" << lineno << ": " << why;
        throw DataError(os.str());
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string tok;
        while (std::getline(ls, tok, '\t')) f.push_back(tok);
        if (f.size() != 9) fail("expected 9 tab-separated fields");
        FrameRecord r;
        r.run_id = f[0];
        try {
            r.frame_idx = std::stoi(f[1]);
        } catch (const std::exception&) {
            fail("bad frame index '" + f[1] + "'");
        }
        if (f[2] == "attentive") r.attentive = true;
        else if (f[2] == "inattentive") r.attentive = false;
        else fail("attention must be attentive|inattentive");
        if (f[3] != "0" && f[3] != "1") fail("trivial must be 0|1");
        r.trivial = f[3] == "1";
        if (f[4] != "0" && f[4] != "1") fail("daytime must be 0|1");
        r.daytime = f[4] == "1";
        if (f[5] == "train") r.split = Split::Train;
        else if (f[5] == "test") r.split = Split::Test;
        else if (f[5] == "-") r.split = Split::Unassigned;
        else fail("split must be train|test|-");
        r.image_path = resolve(f[6]);
        r.gaze_path = resolve(f[7]);
        r.detections_path = resolve(f[8]);
        if (r.image_path.empty() || r.gaze_path.empty()) fail("image and gaze paths are required");
        if (!seen.insert({r.run_id, r.frame_idx}).second)
            fail("duplicate frame key " + r.frame_id());
        records.push_back(std::move(r));
    }

    std::vector<std::string> missing;
    for (const auto& r : records) {
        if (!std::filesystem::exists(r.image_path)) missing.push_back(r.image_path);
        if (!std::filesystem::exists(r.gaze_path)) missing.push_back(r.gaze_path);
        if (!r.detections_path.empty() && !std::filesystem::exists(r.detections_path))
            missing.push_back(r.detections_path);
    }
    if (!missing.empty()) {
        std::ostringstream os;
        os << "manifest: " << missing.size() << " referenced file(s) missing:";
        for (const auto& m : missing) os << "\n  " << m;
        throw DataError(os.str());
    }
    return records;
}

struct FilterPolicy {
    bool require_non_trivial = true;
    bool require_daytime = true;
    bool require_test_split = true;
    // The headline analysis keeps both attentive and inattentive frames so the
    // ratio statistic is computable; set to restrict to one class.
    bool require_attentive = false;

    std::string describe() const {
        std::string s;
        if (require_non_trivial) s += "non-trivial ";
        if (require_daytime) s += "daytime ";
        if (require_test_split) s += "test-split ";
        if (require_attentive) s += "attentive ";
        if (s.empty()) s = "all ";
        s.pop_back();
        return s;
    }
};

inline std::vector<FrameRecord> filter_frames(const std::vector<FrameRecord>& records,
                                              const FilterPolicy& policy = {}) {
    std::vector<FrameRecord> out;
    for (const auto& r : records) {
        if (policy.require_non_trivial && r.trivial) continue;
        if (policy.require_daytime && !r.daytime) continue;
        if (policy.require_test_split && r.split != Split::Test) continue;
        if (policy.require_attentive && !r.attentive) continue;
        out.push_back(r);
    }
    return out;
}

// Deterministic shuffle from the seed; first floor(ratio * N) become train.
inline std::vector<FrameRecord> split_train_test(std::vector<FrameRecord> records, double ratio,
                                                 uint64_t seed) {
    if (ratio <= 0.0 || ratio >= 1.0) throw DataError("split: ratio must be in (0, 1)");
    std::vector<size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    size_t n_train = static_cast<size_t>(ratio * static_cast<double>(records.size()));
    for (size_t i = 0; i < order.size(); ++i)
        records[order[i]].split = i < n_train ? Split::Train : Split::Test;
    return records;
}

// Labels file: tab-separated run_id, frame_idx, yaw, translation (both in [0,1]).
inline std::map<std::string, DriveLabel> load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("labels: cannot open '" + path + "'");
    std::map<std::string, DriveLabel> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ls(line);
        std::string run, idx, yaw, trans, extra;
        if (!std::getline(ls, run, '\t') || !std::getline(ls, idx, '\t') ||
            !std::getline(ls, yaw, '\t') || !std::getline(ls, trans, '\t')) {
            std::ostringstream os;
            os << "labels: " << path << ":" << lineno << ": expected 4 tab-separated fields";
            throw DataError(os.str());
        }
        try {
            DriveLabel l{std::stod(yaw), std::stod(trans)};
            if (l.yaw < 0.0 || l.yaw > 1.0 || l.translation < 0.0 || l.translation > 1.0)
                throw DataError("label components must be in [0, 1]");
            out[run + "_" + idx] = l;
        } catch (const std::exception& e) {
            std::ostringstream os;
            os << "labels: " << path << ":" << lineno << ": " << e.what();
            throw DataError(os.str());
        }
    }
    return out;
}

}  // namespace salign
