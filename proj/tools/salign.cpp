// salign: saliency-attribution and gaze-alignment toolkit CLI.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "salign/emphasis.hpp"
#include "salign/fixtures.hpp"
#include "salign/heatmap.hpp"
#include "salign/lrp.hpp"
#include "salign/metrics.hpp"
#include "salign/model.hpp"
#include "salign/pgm.hpp"
#include "salign/pipeline.hpp"
#include "salign/spectral.hpp"
#include "salign/stats.hpp"

namespace {

using namespace salign;

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

std::map<std::string, Heatmap> load_map_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("not a directory: '" + dir + "'");
    std::map<std::string, Heatmap> maps;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".pgm")
            maps.emplace(entry.path().stem().string(), load_grayscale(entry.path().string()));
    if (maps.empty()) throw DataError("no .pgm maps in '" + dir + "'");
    return maps;
}

struct ScoreRow {
    std::string method;
    double cosine, spearman;
    bool attentive;
};

std::vector<ScoreRow> load_score_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open score log '" + path + "'");
    std::vector<ScoreRow> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.rfind("frame_id\t", 0) == 0) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string tok;
        while (std::getline(ls, tok, '\t')) f.push_back(tok);
        if (f.size() != 5) {
            std::ostringstream os;
            os << "score log " << path << ":" << lineno << ": expected 5 tab-separated fields";
            throw DataError(os.str());
        }
        rows.push_back({f[1], std::stod(f[2]), std::stod(f[3]), f[4] == "attentive"});
    }
    if (rows.empty()) throw DataError("score log '" + path + "' has no rows");
    return rows;
}

// Medians, ratios, and tests per method; field order documented in --help.
void print_stats(const std::vector<ScoreRow>& rows, std::ostream& out) {
    std::vector<std::string> methods;
    for (const auto& r : rows)
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
            methods.push_back(r.method);
    out << "method\tmetric\tall\tattentive\tinattentive\tratio\tmw_u\tmw_p\tmw_method\n";
    std::vector<std::vector<double>> anova_groups;
    for (const auto& m : methods) {
        for (int metric = 0; metric < 2; ++metric) {
            std::vector<double> all, att, inatt;
            for (const auto& r : rows) {
                if (r.method != m) continue;
                double v = metric == 0 ? r.cosine : r.spearman;
                all.push_back(v);
                (r.attentive ? att : inatt).push_back(v);
            }
            if (metric == 0) anova_groups.push_back(all);
            out << m << '\t' << (metric == 0 ? "cosine" : "spearman") << '\t'
                << fmt(median(all)) << '\t';
            if (att.empty() || inatt.empty()) {
                out << "-\t-\t-\t-\t-\t-\n";
                continue;
            }
            double ma = median(att), mi = median(inatt);
            out << fmt(ma) << '\t' << fmt(mi) << '\t'
                << (mi != 0.0 ? fmt(attn_ratio(ma, mi)) : "-") << '\t';
            std::vector<double> la, li;
            for (double v : att)
                if (v > 0.0) la.push_back(std::log(v));
            for (double v : inatt)
                if (v > 0.0) li.push_back(std::log(v));
            if (metric == 0 && !la.empty() && !li.empty()) {
                TestResult mw = mann_whitney_two_sided(la, li);
                out << fmt(mw.statistic) << '\t' << fmt(mw.p_value) << '\t'
                    << (mw.method == TestResult::Method::Exact ? "exact"
                                                               : "normal_approximation")
                    << "\n";
            } else {
                out << "-\t-\t-\n";
            }
        }
    }
    bool all_big = anova_groups.size() >= 2;
    for (const auto& g : anova_groups)
        if (g.size() < 2) all_big = false;
    if (all_big) {
        TestResult a = anova_oneway(anova_groups);
        out << "anova\tcosine\tF=" << fmt(a.statistic) << "\tp=" << fmt(a.p_value) << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"salign: explanation-heatmap generation and gaze-alignment analysis"};
    app.require_subcommand(1);

    // saliency
    auto* sal = app.add_subcommand("saliency", "Spectral-residual saliency map from an image");
    std::string sal_in, sal_out;
    SpectralParams sal_params;
    sal->add_option("--in", sal_in, "Input grayscale PGM image")->required();
    sal->add_option("--out", sal_out, "Output saliency PGM")->required();
    sal->add_option("--size", sal_params.internal_size, "Internal working resolution (power of two)");
    sal->add_option("--kernel", sal_params.avg_kernel, "Log-amplitude mean filter width (odd)");
    sal->add_option("--sigma", sal_params.blur_sigma, "Gaussian blur sigma, internal pixels");

    // lrp
    auto* lrp_cmd = app.add_subcommand("lrp", "LRP input-space heatmap for a model and image");
    std::string lrp_model, lrp_in, lrp_out, lrp_rule_name = "epsilon", lrp_mask;
    double lrp_eps = 1e-7;
    lrp_cmd->add_option("--model", lrp_model, "Model manifest (.model, with .bin weight blob)")
        ->required();
    lrp_cmd->add_option("--in", lrp_in, "Input grayscale PGM image")->required();
    lrp_cmd->add_option("--out", lrp_out, "Output heatmap PGM")->required();
    lrp_cmd->add_option("--mask", lrp_mask, "Output mask, comma-separated (default: all ones)");
    lrp_cmd->add_option("--rule", lrp_rule_name, "Propagation rule: epsilon|z");
    lrp_cmd->add_option("--epsilon", lrp_eps, "Stabilizer for the epsilon rule");

    // compare
    auto* cmp = app.add_subcommand("compare", "Cosine and Spearman similarity of two maps; "
                                              "prints 'cosine <v>' and 'spearman <v>'");
    std::string cmp_a, cmp_b;
    cmp->add_option("--a", cmp_a, "First heatmap PGM")->required();
    cmp->add_option("--b", cmp_b, "Second heatmap PGM")->required();

    // emphasis
    auto* emp = app.add_subcommand("emphasis", "Per-class emphasis difference ranking between "
                                               "two heatmap directories");
    std::string emp_a, emp_b, emp_det;
    double emp_threshold = 0.3;
    emp->add_option("--a", emp_a, "Directory of <frame_id>.pgm maps, method A")->required();
    emp->add_option("--b", emp_b, "Directory of <frame_id>.pgm maps, method B")->required();
    emp->add_option("--det", emp_det, "Detections file (tab-separated)")->required();
    emp->add_option("--threshold", emp_threshold, "Confidence threshold for detections");

    // subtract
    auto* sub = app.add_subcommand("subtract", "Emergent-feature map: normalize, clip to 0-100, "
                                               "subtract, clamp negatives");
    std::string sub_driving, sub_imagenet, sub_out;
    sub->add_option("--driving", sub_driving, "Task-trained heatmap PGM")->required();
    sub->add_option("--imagenet", sub_imagenet, "Reference heatmap PGM")->required();
    sub->add_option("--out", sub_out, "Output PGM")->required();

    // stats
    auto* st = app.add_subcommand("stats", "Medians, attentive/inattentive ratios, Mann-Whitney "
                                           "and ANOVA from a per-frame score log");
    std::string st_scores;
    st->add_option("--scores", st_scores, "Score log (scores.tsv from 'run')")->required();

    // fixtures
    auto* fx = app.add_subcommand("fixtures", "Generate a seeded synthetic dataset with gaze, "
                                              "labels, detections, and model regimes");
    std::string fx_spec, fx_out;
    uint64_t fx_seed = 0;
    fx->add_option("--spec", fx_spec, "Fixture spec file (key = value); defaults when omitted");
    fx->add_option("--seed", fx_seed, "Random seed")->required();
    fx->add_option("--out", fx_out, "Output directory")->required();

    // run
    auto* run = app.add_subcommand("run", "End-to-end pipeline from a config file");
    std::string run_config;
    run->add_option("--config", run_config, "Pipeline config file (key = value)")->required();

    // report
    auto* rep = app.add_subcommand("report", "Re-render the stats table from a score log into "
                                             "a file");
    std::string rep_scores, rep_out;
    rep->add_option("--scores", rep_scores, "Score log (scores.tsv from 'run')")->required();
    rep->add_option("--out", rep_out, "Output report path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (*sal) {
            save_grayscale(spectral_residual(tensor_from_heatmap(load_grayscale(sal_in)),
                                             sal_params),
                           sal_out);
        } else if (*lrp_cmd) {
            ModelSpec model = load_model(lrp_model);
            LrpRuleSpec rule;
            if (lrp_rule_name == "z") rule.rule = LrpRule::Z;
            else if (lrp_rule_name == "epsilon") rule.rule = LrpRule::Epsilon;
            else throw DataError("rule must be epsilon|z");
            rule.epsilon = lrp_eps;
            std::vector<double> mask;
            if (!lrp_mask.empty()) {
                std::stringstream ms(lrp_mask);
                std::string tok;
                while (std::getline(ms, tok, ',')) mask.push_back(std::stod(tok));
            } else {
                mask.assign(shape_chain(model).back().count(), 1.0);
            }
            Tensor3 img = tensor_from_heatmap(load_grayscale(lrp_in));
            save_grayscale(lrp(model, img, mask, rule).input_heatmap, lrp_out);
        } else if (*cmp) {
            Heatmap a = load_grayscale(cmp_a), b = load_grayscale(cmp_b);
            std::cout << "cosine " << fmt(cosine_similarity(a, b)) << "\n";
            std::cout << "spearman " << fmt(spearman(a, b)) << "\n";
        } else if (*emp) {
            auto dets = load_detections(emp_det, emp_threshold);
            auto ranking = class_emphasis_diff(load_map_dir(emp_a), load_map_dir(emp_b), dets);
            std::cout << "class\tmean_diff\tn\n";
            for (const auto& c : ranking)
                std::cout << c.class_name << '\t' << fmt(c.mean_diff) << '\t' << c.n_observations
                          << "\n";
        } else if (*sub) {
            save_grayscale(
                emergent_feature_map(load_grayscale(sub_driving), load_grayscale(sub_imagenet)),
                sub_out);
        } else if (*st) {
            print_stats(load_score_log(st_scores), std::cout);
        } else if (*fx) {
            FixtureSpec spec = fx_spec.empty() ? FixtureSpec{} : parse_fixture_spec(fx_spec);
            FixtureSummary s = generate_fixtures(spec, fx_seed, fx_out);
            std::cerr << "fixtures: " << s.frames << " frames (" << s.attentive
                      << " attentive) under " << fx_out << "\n";
        } else if (*run) {
            PipelineConfig cfg = parse_pipeline_config(run_config);
            PipelineResult res = run_pipeline(cfg);
            write_reports(res, cfg);
            std::cerr << "run: " << res.filtered_frames << " frames, " << res.rows.size()
                      << " methods -> " << cfg.out_dir << "\n";
        } else if (*rep) {
            std::ofstream out(rep_out);
            if (!out) throw DataError("cannot write '" + rep_out + "'");
            print_stats(load_score_log(rep_scores), out);
        }
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
