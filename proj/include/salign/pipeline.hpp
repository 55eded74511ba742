#pragma once

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "salign/dataset.hpp"
#include "salign/emphasis.hpp"
#include "salign/error.hpp"
#include "salign/fixtures.hpp"
#include "salign/lrp.hpp"
#include "salign/metrics.hpp"
#include "salign/model.hpp"
#include "salign/nn.hpp"
#include "salign/pgm.hpp"
#include "salign/spectral.hpp"
#include "salign/stats.hpp"
#include "salign/train.hpp"

namespace salign {

struct PipelineConfig {
    std::string manifest_path;
    std::vector<std::string> methods;                  // run order = report row order
    std::map<std::string, std::string> model_paths;    // lrp regime -> manifest path
    std::map<std::string, std::string> external_dirs;  // method name -> precomputed map dir
    std::string out_dir = "out";
    uint64_t seed = 0;
    double confidence_threshold = 0.3;
    int compare_downsample = 1;  // divides the gaze resolution before scoring
    FilterPolicy filter;
    LrpRuleSpec lrp_rule;                 // epsilon rule, eps = 1e-7 by default
    std::vector<double> output_mask;      // empty = all ones
    std::string train_labels_path;        // fine-tune lrp_driving head when set
    HeadTrainConfig train;
    std::vector<std::pair<std::string, std::string>> emphasis_pairs;
    std::vector<std::pair<std::string, std::string>> emergent_pairs;
    int emergent_max_frames = 8;
};

struct MethodReport {
    std::string method;
    // [0] = cosine, [1] = spearman
    double median_all[2] = {0.0, 0.0};
    double median_attentive[2] = {0.0, 0.0};
    double median_inattentive[2] = {0.0, 0.0};
    double ratio[2] = {0.0, 0.0};
    TestResult mann_whitney;  // two-sided, on log cosine, attentive vs inattentive
    size_t scored = 0;
    size_t skipped = 0;
    size_t log_excluded = 0;  // non-positive scores dropped before the log transform
};

struct FrameScore {
    std::string frame_id;
    std::string method;
    double cosine = 0.0;
    double spearman = 0.0;
    bool attentive = false;
};

struct PipelineResult {
    std::vector<MethodReport> rows;
    std::optional<TestResult> anova_cosine;  // across methods, all frames
    std::vector<FrameScore> scores;
    std::vector<std::string> skips;  // "frame_id<TAB>method<TAB>reason"
    std::map<std::string, std::vector<ClassEmphasisDiff>> emphasis;  // "a-b" -> ranking
    size_t filtered_frames = 0;
    std::string filter_description;
};

namespace detail {

inline int worker_count() {
    if (const char* env = std::getenv("SALIENCE_ALIGN_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

template <typename Fn>
inline void parallel_for(size_t n, Fn&& fn) {
    int workers = std::min<size_t>(worker_count(), n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

}  // namespace detail

// 'key = value' config file; relative paths resolve against the config's dir.
inline PipelineConfig parse_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("config: cannot open '" + path + "'");
    std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };
    auto split_list = [](const std::string& s, char sep) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, sep))
            if (!item.empty()) out.push_back(item);
        return out;
    };
    auto split_pairs = [&](const std::string& s) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& item : split_list(s, ',')) {
            auto dash = item.find('-');
            if (dash == std::string::npos)
                throw DataError("config: pair '" + item + "' must be 'a-b'");
            out.push_back({item.substr(0, dash), item.substr(dash + 1)});
        }
        return out;
    };

    PipelineConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string key, eq;
        if (!(ls >> key)) continue;
        std::string value;
        if (!(ls >> eq) || eq != "=" || !std::getline(ls, value)) {
            std::ostringstream os;
            os << "config: " << path << ":" << lineno << ": expected 'key = value'";
            throw DataError(os.str());
        }
        value.erase(0, value.find_first_not_of(" \t"));
        value.erase(value.find_last_not_of(" \t") + 1);
        try {
            if (key == "manifest") cfg.manifest_path = resolve(value);
            else if (key == "methods") cfg.methods = split_list(value, ',');
            else if (key.rfind("model_", 0) == 0) cfg.model_paths[key.substr(6)] = resolve(value);
            else if (key.rfind("external_", 0) == 0)
                cfg.external_dirs[key.substr(9)] = resolve(value);
            else if (key == "out_dir") cfg.out_dir = resolve(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "confidence_threshold") cfg.confidence_threshold = std::stod(value);
            else if (key == "compare_downsample") cfg.compare_downsample = std::stoi(value);
            else if (key == "filter_non_trivial") cfg.filter.require_non_trivial = value == "1";
            else if (key == "filter_daytime") cfg.filter.require_daytime = value == "1";
            else if (key == "filter_test_split") cfg.filter.require_test_split = value == "1";
            else if (key == "lrp_rule") {
                if (value == "z") cfg.lrp_rule.rule = LrpRule::Z;
                else if (value == "epsilon") cfg.lrp_rule.rule = LrpRule::Epsilon;
                else throw DataError("lrp_rule must be z|epsilon");
            } else if (key == "lrp_epsilon") cfg.lrp_rule.epsilon = std::stod(value);
            else if (key == "output_mask") {
                for (const auto& v : split_list(value, ','))
                    cfg.output_mask.push_back(std::stod(v));
            } else if (key == "train_labels") cfg.train_labels_path = resolve(value);
            else if (key == "train_epochs") cfg.train.epochs = std::stoi(value);
            else if (key == "train_batch_size") cfg.train.batch_size = std::stoi(value);
            else if (key == "train_learning_rate") cfg.train.learning_rate = std::stod(value);
            else if (key == "emphasis_pairs") cfg.emphasis_pairs = split_pairs(value);
            else if (key == "emergent_pairs") cfg.emergent_pairs = split_pairs(value);
            else if (key == "emergent_max_frames") cfg.emergent_max_frames = std::stoi(value);
            else throw DataError("unknown key '" + key + "'");
        } catch (const DataError&) {
            throw;
        } catch (const std::exception& e) {
            std::ostringstream os;
            os << "config: " << path << ":" << lineno << ": " << e.what();
            throw DataError(os.str());
        }
    }
    cfg.train.seed = cfg.seed;
    if (cfg.manifest_path.empty()) throw DataError("config: 'manifest' is required");
    if (cfg.methods.empty()) throw DataError("config: 'methods' is required");
    if (cfg.compare_downsample < 1) throw DataError("config: compare_downsample must be >= 1");
    for (const auto& m : cfg.methods) {
        bool is_lrp = m.rfind("lrp_", 0) == 0;
        if (m == "spectral") continue;
        if (is_lrp && !cfg.model_paths.count(m))
            throw DataError("config: LRP regime '" + m + "' needs model_" + m);
        if (!is_lrp && !cfg.external_dirs.count(m))
            throw DataError("config: method '" + m + "' needs external_" + m + " map directory");
    }
    return cfg;
}

namespace detail {

// Fine-tunes the dense head of the driving regime on frozen backbone features
// from the train split.
inline void finetune_driving_head(ModelSpec& model, const std::vector<FrameRecord>& all_records,
                                  const PipelineConfig& cfg) {
    auto labels = load_labels(cfg.train_labels_path);
    std::vector<FrameRecord> train_frames;
    for (const auto& r : all_records)
        if (r.split == Split::Train && !r.trivial && r.daytime && labels.count(r.frame_id()))
            train_frames.push_back(r);
    if (train_frames.empty()) throw DataError("pipeline: no usable training frames");

    std::vector<std::vector<double>> features(train_frames.size());
    std::vector<DriveLabel> targets(train_frames.size());
    parallel_for(train_frames.size(), [&](size_t i) {
        Tensor3 img = tensor_from_heatmap(load_grayscale(train_frames[i].image_path));
        auto acts = forward(model, img);
        features[i] = acts[acts.size() - 2].values;  // dense input
        targets[i] = labels.at(train_frames[i].frame_id());
    });

    HeadTrainResult trained = train_head(features, targets, cfg.train);
    LayerSpec& dense = model.layers.back();
    if (dense.kind != LayerKind::Dense)
        throw DataError("pipeline: driving model must end in a dense layer");
    dense.weights = trained.weights;
    dense.bias = trained.bias;
}

}  // namespace detail

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    std::vector<FrameRecord> all_records = load_manifest(cfg.manifest_path);
    std::vector<FrameRecord> frames = filter_frames(all_records, cfg.filter);

    PipelineResult result;
    result.filtered_frames = frames.size();
    result.filter_description = cfg.filter.describe();
    if (frames.empty()) return result;

    // Models per LRP regime; the driving head is fine-tuned when labels are given.
    std::map<std::string, ModelSpec> models;
    for (const auto& m : cfg.methods) {
        if (m.rfind("lrp_", 0) != 0) continue;
        ModelSpec model = load_model(cfg.model_paths.at(m));
        if (m == "lrp_driving" && !cfg.train_labels_path.empty())
            detail::finetune_driving_head(model, all_records, cfg);
        models.emplace(m, std::move(model));
    }

    bool keep_maps = !cfg.emphasis_pairs.empty() || !cfg.emergent_pairs.empty();

    struct FrameOutcome {
        bool ok = false;
        double cosine = 0.0, spearman_v = 0.0;
        std::string skip_reason;
        Heatmap map;  // at comparison resolution, only when keep_maps
    };
    // outcome[method][frame]
    std::map<std::string, std::vector<FrameOutcome>> outcomes;
    for (const auto& m : cfg.methods) outcomes[m].resize(frames.size());

    detail::parallel_for(frames.size(), [&](size_t fi) {
        const FrameRecord& rec = frames[fi];
        Heatmap gaze;
        std::string frame_error;
        Tensor3 img;
        try {
            gaze = load_grayscale(rec.gaze_path);
            if (cfg.compare_downsample > 1)
                gaze = resize_bilinear(gaze, std::max(1, gaze.width / cfg.compare_downsample),
                                       std::max(1, gaze.height / cfg.compare_downsample));
            img = tensor_from_heatmap(load_grayscale(rec.image_path));
        } catch (const std::exception& e) {
            frame_error = e.what();
        }
        for (const auto& m : cfg.methods) {
            FrameOutcome& out = outcomes[m][fi];
            if (!frame_error.empty()) {
                out.skip_reason = frame_error;
                continue;
            }
            try {
                Heatmap hm;
                if (m == "spectral") {
                    hm = spectral_residual(img);
                } else if (m.rfind("lrp_", 0) == 0) {
                    const ModelSpec& model = models.at(m);
                    std::vector<double> mask = cfg.output_mask;
                    if (mask.empty())
                        mask.assign(shape_chain(model).back().count(), 1.0);
                    hm = lrp(model, img, mask, cfg.lrp_rule).input_heatmap;
                } else {
                    hm = load_grayscale((fs::path(cfg.external_dirs.at(m)) /
                                         (rec.frame_id() + ".pgm")).string());
                }
                hm = resize_bilinear(hm, gaze.width, gaze.height);
                out.cosine = cosine_similarity(hm, gaze);
                out.spearman_v = spearman(hm, gaze);
                out.ok = true;
                if (keep_maps) out.map = std::move(hm);
            } catch (const std::exception& e) {
                out.skip_reason = e.what();
            }
        }
    });

    // Aggregate in frame order so output is independent of worker scheduling.
    for (const auto& m : cfg.methods) {
        const auto& outs = outcomes[m];
        MethodReport row;
        row.method = m;
        std::vector<double> cos_all, cos_att, cos_inatt, sp_all, sp_att, sp_inatt;
        for (size_t fi = 0; fi < frames.size(); ++fi) {
            const FrameOutcome& o = outs[fi];
            if (!o.ok) {
                ++row.skipped;
                result.skips.push_back(frames[fi].frame_id() + "\t" + m + "\t" + o.skip_reason);
                continue;
            }
            ++row.scored;
            result.scores.push_back(
                {frames[fi].frame_id(), m, o.cosine, o.spearman_v, frames[fi].attentive});
            cos_all.push_back(o.cosine);
            sp_all.push_back(o.spearman_v);
            (frames[fi].attentive ? cos_att : cos_inatt).push_back(o.cosine);
            (frames[fi].attentive ? sp_att : sp_inatt).push_back(o.spearman_v);
        }
        if (row.skipped * 2 > frames.size()) {
            std::ostringstream os;
            os << "pipeline: method '" << m << "' failed on " << row.skipped << " of "
               << frames.size() << " frames; first reason: "
               << (result.skips.empty() ? "?" : result.skips.back());
            throw DataError(os.str());
        }
        if (!cos_all.empty()) {
            row.median_all[0] = median(cos_all);
            row.median_all[1] = median(sp_all);
        }
        if (!cos_att.empty() && !cos_inatt.empty()) {
            row.median_attentive[0] = median(cos_att);
            row.median_attentive[1] = median(sp_att);
            row.median_inattentive[0] = median(cos_inatt);
            row.median_inattentive[1] = median(sp_inatt);
            row.ratio[0] = attn_ratio(row.median_attentive[0], row.median_inattentive[0]);
            if (row.median_inattentive[1] != 0.0)
                row.ratio[1] = attn_ratio(row.median_attentive[1], row.median_inattentive[1]);
            auto log_positive = [&](const std::vector<double>& v) {
                std::vector<double> out;
                for (double x : v) {
                    if (x > 0.0) out.push_back(std::log(x));
                    else ++row.log_excluded;
                }
                return out;
            };
            std::vector<double> la = log_positive(cos_att), li = log_positive(cos_inatt);
            if (!la.empty() && !li.empty()) row.mann_whitney = mann_whitney_two_sided(la, li);
        }
        result.rows.push_back(std::move(row));
    }

    // One-way ANOVA across methods on all cosine scores.
    {
        std::vector<std::vector<double>> groups;
        for (const auto& m : cfg.methods) {
            std::vector<double> g;
            for (const auto& o : outcomes[m])
                if (o.ok) g.push_back(o.cosine);
            if (g.size() >= 2) groups.push_back(std::move(g));
        }
        if (groups.size() >= 2) result.anova_cosine = anova_oneway(groups);
    }

    // Object-emphasis rankings and emergent-feature maps for configured pairs.
    if (keep_maps) {
        std::map<std::string, std::vector<Detection>> detections;
        for (const auto& rec : frames) {
            if (rec.detections_path.empty()) continue;
            auto dets = load_detections(rec.detections_path, cfg.confidence_threshold);
            auto it = dets.find(rec.frame_id());
            if (it != dets.end()) detections[rec.frame_id()] = it->second;
        }
        auto maps_of = [&](const std::string& m) {
            std::map<std::string, Heatmap> out;
            const auto& outs = outcomes.at(m);
            for (size_t fi = 0; fi < frames.size(); ++fi)
                if (outs[fi].ok) out.emplace(frames[fi].frame_id(), outs[fi].map);
            return out;
        };
        for (const auto& [a, b] : cfg.emphasis_pairs) {
            if (!outcomes.count(a) || !outcomes.count(b))
                throw DataError("pipeline: emphasis pair references unknown method");
            auto ma = maps_of(a), mb = maps_of(b);
            // restrict to frames both methods scored
            for (auto it = ma.begin(); it != ma.end();)
                it = mb.count(it->first) ? std::next(it) : ma.erase(it);
            for (auto it = mb.begin(); it != mb.end();)
                it = ma.count(it->first) ? std::next(it) : mb.erase(it);
            result.emphasis[a + "-" + b] = class_emphasis_diff(ma, mb, detections);
        }
        for (const auto& [a, b] : cfg.emergent_pairs) {
            if (!outcomes.count(a) || !outcomes.count(b))
                throw DataError("pipeline: emergent pair references unknown method");
            fs::path dir = fs::path(cfg.out_dir) / "emergent" / (a + "-" + b);
            fs::create_directories(dir);
            int written = 0;
            for (size_t fi = 0; fi < frames.size() && written < cfg.emergent_max_frames; ++fi) {
                const auto& oa = outcomes.at(a)[fi];
                const auto& ob = outcomes.at(b)[fi];
                if (!oa.ok || !ob.ok) continue;
                Heatmap em = emergent_feature_map(oa.map, ob.map);
                save_grayscale(em, (dir / (frames[fi].frame_id() + ".pgm")).string());
                ++written;
            }
        }
    }
    return result;
}

inline void write_reports(const PipelineResult& res, const PipelineConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const char* metric_names[2] = {"cosine", "spearman"};

    {
        std::ofstream out((fs::path(cfg.out_dir) / "scores.tsv").string());
        out << "frame_id\tmethod\tcosine\tspearman\tattention\n";
        for (const auto& s : res.scores)
            out << s.frame_id << '\t' << s.method << '\t' << detail::fmt(s.cosine) << '\t'
                << detail::fmt(s.spearman) << '\t' << (s.attentive ? "attentive" : "inattentive")
                << "\n";
    }
    {
        std::ofstream out((fs::path(cfg.out_dir) / "skips.tsv").string());
        out << "frame_id\tmethod\treason\n";
        for (const auto& s : res.skips) out << s << "\n";
    }
    {
        std::ofstream out((fs::path(cfg.out_dir) / "report.tsv").string());
        out << "metric\tmethod\tall\tattentive\tinattentive\tratio\tmw_u\tmw_p\tmw_method\t"
               "scored\tskipped\n";
        for (int metric = 0; metric < 2; ++metric)
            for (const auto& r : res.rows)
                out << metric_names[metric] << '\t' << r.method << '\t'
                    << detail::fmt(r.median_all[metric]) << '\t'
                    << detail::fmt(r.median_attentive[metric]) << '\t'
                    << detail::fmt(r.median_inattentive[metric]) << '\t'
                    << detail::fmt(r.ratio[metric]) << '\t'
                    << detail::fmt(r.mann_whitney.statistic) << '\t'
                    << detail::fmt(r.mann_whitney.p_value) << '\t'
                    << (r.mann_whitney.method == TestResult::Method::Exact
                            ? "exact"
                            : "normal_approximation")
                    << '\t' << r.scored << '\t' << r.skipped << "\n";
    }
    {
        std::ofstream out((fs::path(cfg.out_dir) / "report.txt").string());
        out << "frames: " << res.filtered_frames << " (filter: " << res.filter_description
            << "); comparison at gaze resolution / " << cfg.compare_downsample << "\n";
        for (int metric = 0; metric < 2; ++metric) {
            out << "\n== " << metric_names[metric] << " similarity, median ==\n";
            out << std::left << std::setw(16) << "Method" << std::setw(14) << "All"
                << std::setw(14) << "Attentive" << std::setw(14) << "Inattentive" << std::setw(14)
                << "Ratio" << "\n";
            for (const auto& r : res.rows)
                out << std::left << std::setw(16) << r.method << std::setw(14)
                    << detail::fmt(r.median_all[metric]) << std::setw(14)
                    << detail::fmt(r.median_attentive[metric]) << std::setw(14)
                    << detail::fmt(r.median_inattentive[metric]) << std::setw(14)
                    << detail::fmt(r.ratio[metric]) << "\n";
        }
        out << "\n== tests ==\n";
        if (res.anova_cosine)
            out << "anova cosine across methods: F=" << detail::fmt(res.anova_cosine->statistic)
                << " p=" << detail::fmt(res.anova_cosine->p_value) << "\n";
        for (const auto& r : res.rows)
            out << "mann-whitney log-cosine " << r.method << ": U="
                << detail::fmt(r.mann_whitney.statistic)
                << " p=" << detail::fmt(r.mann_whitney.p_value) << " ("
                << (r.mann_whitney.method == TestResult::Method::Exact ? "exact"
                                                                       : "normal_approximation")
                << ", " << r.log_excluded << " non-positive excluded)\n";
    }
    for (const auto& [pair, ranking] : res.emphasis) {
        std::ofstream out((fs::path(cfg.out_dir) / ("emphasis_" + pair + ".tsv")).string());
        out << "class\tmean_diff\tn\n";
        for (const auto& c : ranking)
            out << c.class_name << '\t' << detail::fmt(c.mean_diff) << '\t' << c.n_observations
                << "\n";
    }
}

}  // namespace salign
