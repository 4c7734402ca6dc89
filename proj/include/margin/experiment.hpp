#pragma once

// Experiment harness: read a config file, build the model and dataset it
// describes, run every configured attack over the evaluation inputs, and
// write margins.csv / summary.json (plus optional per-run convergence
// traces) into the output directory.
//
// Everything except wall-clock timings is deterministic for a fixed config.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "margin/attack.hpp"
#include "margin/baselines.hpp"
#include "margin/classifier.hpp"
#include "margin/config.hpp"
#include "margin/constraint.hpp"
#include "margin/data.hpp"
#include "margin/dense_net.hpp"
#include "margin/errors.hpp"
#include "margin/report.hpp"
#include "margin/train.hpp"

namespace margin {

enum class AttackKind { Margin, Deepfool, Fgsm, Pgd, Cw };

inline const char* attack_kind_name(AttackKind k) {
    switch (k) {
        case AttackKind::Margin: return "margin";
        case AttackKind::Deepfool: return "deepfool";
        case AttackKind::Fgsm: return "fgsm";
        case AttackKind::Pgd: return "pgd";
        default: return "cw";
    }
}

// One attack entry from the config. Only the config struct matching `kind`
// is consulted when the attack runs.
struct AttackEntry {
    std::string name;
    AttackKind kind = AttackKind::Margin;
    NormKind norm = NormKind::L2; // norm its margins are reported in
    AttackConfig margin_cfg;
    DeepfoolConfig deepfool_cfg;
    FgsmConfig fgsm_cfg;
    PgdConfig pgd_cfg;
    CwConfig cw_cfg;
};

struct ModelSpec {
    enum class Kind { Circle, Polynomial, Piecewise, Affine, Checkpoint, Train } kind = Kind::Circle;
    double radius = 1.0;                  // circle
    Vec coeffs;                           // polynomial
    Vec knots_x, knots_y;                 // piecewise
    Matrix affine_w;                      // affine
    Vec affine_b;
    std::string checkpoint_path;          // checkpoint
    std::vector<int> layers = {2, 16, 2}; // train
    int epochs = 40;
    double learning_rate = 0.05;
    std::string save_path; // optional: persist the trained net
};

struct DataSpec {
    enum class Kind { TwoMoons, Blobs, Idx, Inline } kind = Kind::TwoMoons;
    int count = 400;     // generated training points
    double noise = 0.1;
    std::string images_path, labels_path; // idx
    int idx_limit = -1;
    Dataset inline_points;
};

struct ExperimentSpec {
    std::uint64_t seed = 0;
    double epsilon = -0.01;
    int eval_count = 50; // attack the first N evaluation inputs (<= 0: all)
    std::optional<BoxBounds> box;
    bool export_traces = false;
    std::string output_dir = "out";
    ModelSpec model;
    DataSpec data;
    std::vector<double> levels_l2;   // empty: derived from the first l2 attack
    std::vector<double> levels_linf; // likewise
    std::vector<AttackEntry> attacks;
};

// One margins.csv row.
struct AttackRunRow {
    int input_id = 0;
    std::string attack;
    bool success = false;
    double margin = 0.0;
    int moves = 0;
    double wall_ms = 0.0;
};

struct ExperimentReport {
    std::vector<AttackRunRow> rows;
    nlohmann::ordered_json summary;
    std::vector<double> levels_l2, levels_linf;
    int num_inputs = 0;
    int already_misclassified = 0;
};

// ---- config file -> ExperimentSpec ----------------------------------------

namespace detail {

inline NormKind parse_norm(const std::string& s, const std::string& where) {
    if (s == "l2") return NormKind::L2;
    if (s == "linf") return NormKind::Linf;
    throw ConfigError("config: unknown norm '" + s + "' in [" + where + "]");
}

inline void fill_margin_config(const ConfigSection& sec, AttackConfig& cfg) {
    cfg.norm = parse_norm(sec.get_string("norm", norm_name(cfg.norm)), sec.name);
    // re-derive norm-appropriate defaults, then apply overrides
    AttackConfig base = cfg.norm == NormKind::L2 ? AttackConfig::l2_defaults()
                                                 : AttackConfig::linf_defaults();
    base.norm = cfg.norm;
    base.box = cfg.box;
    base.epsilon = cfg.epsilon;
    base.seed = cfg.seed;
    base.alpha = sec.get_double("alpha", base.alpha);
    base.beta_base = sec.get_double("beta_base", base.beta_base);
    base.nu = sec.get_double("nu", base.nu);
    base.k0 = static_cast<int>(sec.get_int("k0", base.k0));
    if (sec.has("ab_design")) {
        std::string d = sec.get_string("ab_design");
        if (d == "constraint_preserving")
            base.ab_design = AbDesign::ConstraintPreserving;
        else if (d == "norm_reducing")
            base.ab_design = AbDesign::NormReducing;
        else
            throw ConfigError("config: unknown ab_design '" + d + "' in [" + sec.name + "]");
    }
    base.a_const = sec.get_double("a_const", base.a_const);
    base.init_range = sec.get_double("init_range", base.init_range);
    base.total_moves = static_cast<int>(sec.get_int("moves", base.total_moves));
    // scan / tuning phase lengths scale with the move budget unless given
    base.target_scan_moves =
        static_cast<int>(sec.get_int("target_scan_moves", std::min(10, base.total_moves)));
    base.final_tuning_start = static_cast<int>(
        sec.get_int("final_tuning_start", std::max(0, base.total_moves - 20)));
    base.restarts = static_cast<int>(sec.get_int("restarts", base.restarts));
    cfg = base;
}

} // namespace detail

inline ExperimentSpec parse_experiment_spec(const ConfigFile& file) {
    ExperimentSpec spec;
    const ConfigSection& top = file.top();
    spec.seed = static_cast<std::uint64_t>(top.get_int("seed", 0));
    spec.epsilon = top.get_double("epsilon", -0.01);
    spec.eval_count = static_cast<int>(top.get_int("eval_count", 50));
    spec.export_traces = top.get_bool("export_traces", false);
    spec.output_dir = top.get_string("output_dir", "out");
    if (top.has("box")) {
        std::vector<double> b = top.get_double_list("box");
        if (b.size() != 2 || !(b[0] < b[1]))
            throw ConfigError("config: box must be 'lo, hi' with lo < hi");
        spec.box = BoxBounds{b[0], b[1]};
    }

    const ConfigSection& model = file.require("model");
    std::string mk = model.get_string("kind");
    if (mk == "circle") {
        spec.model.kind = ModelSpec::Kind::Circle;
        spec.model.radius = model.get_double("radius", 1.0);
    } else if (mk == "polynomial") {
        spec.model.kind = ModelSpec::Kind::Polynomial;
        spec.model.coeffs = model.get_double_list("coeffs");
    } else if (mk == "piecewise") {
        spec.model.kind = ModelSpec::Kind::Piecewise;
        spec.model.knots_x = model.get_double_list("knots_x");
        spec.model.knots_y = model.get_double_list("knots_y");
    } else if (mk == "affine") {
        spec.model.kind = ModelSpec::Kind::Affine;
        std::vector<double> flat = model.get_double_list("weights");
        spec.model.affine_b = model.get_double_list("bias");
        int rows = static_cast<int>(spec.model.affine_b.size());
        if (rows == 0 || flat.size() % rows != 0)
            throw ConfigError("config: affine weights size must be a multiple of bias size");
        int cols = static_cast<int>(flat.size()) / rows;
        spec.model.affine_w = Matrix(rows, cols);
        spec.model.affine_w.data = flat;
    } else if (mk == "checkpoint") {
        spec.model.kind = ModelSpec::Kind::Checkpoint;
        spec.model.checkpoint_path = model.get_string("path");
    } else if (mk == "train") {
        spec.model.kind = ModelSpec::Kind::Train;
        if (model.has("layers")) spec.model.layers = model.get_int_list("layers");
        spec.model.epochs = static_cast<int>(model.get_int("epochs", 40));
        spec.model.learning_rate = model.get_double("learning_rate", 0.05);
        spec.model.save_path = model.get_string("save_path", "");
    } else {
        throw ConfigError("config: unknown model kind '" + mk + "'");
    }

    if (const ConfigSection* data = file.find("dataset")) {
        std::string dk = data->get_string("kind", "two_moons");
        if (dk == "two_moons")
            spec.data.kind = DataSpec::Kind::TwoMoons;
        else if (dk == "blobs")
            spec.data.kind = DataSpec::Kind::Blobs;
        else if (dk == "idx")
            spec.data.kind = DataSpec::Kind::Idx;
        else if (dk == "inline")
            spec.data.kind = DataSpec::Kind::Inline;
        else
            throw ConfigError("config: unknown dataset kind '" + dk + "'");
        spec.data.count = static_cast<int>(data->get_int("count", 400));
        spec.data.noise = data->get_double("noise", 0.1);
        if (spec.data.kind == DataSpec::Kind::Idx) {
            spec.data.images_path = data->get_string("images");
            spec.data.labels_path = data->get_string("labels");
            spec.data.idx_limit = static_cast<int>(data->get_int("limit", -1));
        }
        if (spec.data.kind == DataSpec::Kind::Inline) {
            // points = x y label; x y label; ...
            std::istringstream pts(data->get_string("points"));
            std::string chunk;
            while (std::getline(pts, chunk, ';')) {
                std::istringstream nums(chunk);
                std::vector<double> vals;
                double v;
                while (nums >> v) vals.push_back(v);
                if (vals.empty()) continue;
                if (vals.size() < 2)
                    throw ConfigError("config: inline point needs coordinates and a label");
                LabeledPoint p;
                p.x.assign(vals.begin(), vals.end() - 1);
                p.label = static_cast<int>(vals.back());
                spec.data.inline_points.push_back(std::move(p));
            }
            if (spec.data.inline_points.empty())
                throw ConfigError("config: inline dataset has no points");
        }
    } else if (spec.model.kind == ModelSpec::Kind::Train) {
        throw ConfigError("config: model kind 'train' needs a [dataset] section");
    }

    if (const ConfigSection* levels = file.find("levels")) {
        if (levels->has("l2")) spec.levels_l2 = levels->get_double_list("l2");
        if (levels->has("linf")) spec.levels_linf = levels->get_double_list("linf");
    }

    for (const ConfigSection& sec : file.sections) {
        if (sec.name.rfind("attack.", 0) != 0) continue;
        AttackEntry entry;
        entry.name = sec.name.substr(7);
        if (entry.name.empty()) throw ConfigError("config: attack section needs a name");
        std::string kind = sec.get_string("kind", "margin");
        if (kind == "margin") {
            entry.kind = AttackKind::Margin;
            entry.margin_cfg.box = spec.box;
            entry.margin_cfg.epsilon = spec.epsilon;
            entry.margin_cfg.seed = spec.seed;
            detail::fill_margin_config(sec, entry.margin_cfg);
            entry.norm = entry.margin_cfg.norm;
        } else if (kind == "deepfool") {
            entry.kind = AttackKind::Deepfool;
            entry.norm = NormKind::L2;
            entry.deepfool_cfg.max_iters = static_cast<int>(sec.get_int("max_iters", 100));
            entry.deepfool_cfg.overshoot = sec.get_double("overshoot", 0.02);
        } else if (kind == "fgsm") {
            entry.kind = AttackKind::Fgsm;
            entry.norm = NormKind::Linf;
            entry.fgsm_cfg.grid_min = sec.get_double("grid_min", 1e-4);
            entry.fgsm_cfg.grid_max = sec.get_double("grid_max", 1.0);
            entry.fgsm_cfg.grid_count = static_cast<int>(sec.get_int("grid_count", 64));
        } else if (kind == "pgd") {
            entry.kind = AttackKind::Pgd;
            entry.norm = NormKind::Linf;
            entry.pgd_cfg.eps = sec.get_double("eps", 0.1);
            entry.pgd_cfg.step = sec.get_double("step", 0.01);
            entry.pgd_cfg.iters = static_cast<int>(sec.get_int("iters", 100));
            entry.pgd_cfg.restarts = static_cast<int>(sec.get_int("restarts", 5));
            entry.pgd_cfg.seed = spec.seed;
        } else if (kind == "cw") {
            entry.kind = AttackKind::Cw;
            entry.norm = NormKind::L2;
            entry.cw_cfg.confidence = sec.get_double("confidence", 0.0);
            entry.cw_cfg.learning_rate = sec.get_double("learning_rate", 0.01);
            entry.cw_cfg.opt_steps = static_cast<int>(sec.get_int("opt_steps", 300));
            entry.cw_cfg.binary_steps = static_cast<int>(sec.get_int("binary_steps", 5));
            entry.cw_cfg.lambda_lo = sec.get_double("lambda_lo", 1e-3);
            entry.cw_cfg.lambda_hi = sec.get_double("lambda_hi", 1e6);
        } else {
            throw ConfigError("config: unknown attack kind '" + kind + "' in [" + sec.name + "]");
        }
        spec.attacks.push_back(std::move(entry));
    }
    if (spec.attacks.empty()) throw ConfigError("config: no [attack.*] sections");
    return spec;
}

inline ExperimentSpec parse_experiment_file(const std::string& path) {
    return parse_experiment_spec(parse_config_file(path));
}

// ---- running ---------------------------------------------------------------

namespace detail {

struct BuiltExperiment {
    std::unique_ptr<Classifier> model;
    std::string model_desc;
    Dataset eval_points;
    std::string data_desc;
};

inline BuiltExperiment build_experiment(const ExperimentSpec& spec) {
    BuiltExperiment built;

    // dataset: generated kinds train on one stream and evaluate on a second,
    // so evaluation points are held out; file/inline kinds use the points as
    // given (training, if any, sees all of them).
    Dataset train_data;
    std::ostringstream data_desc;
    switch (spec.data.kind) {
        case DataSpec::Kind::TwoMoons:
        case DataSpec::Kind::Blobs: {
            DatasetKind k = spec.data.kind == DataSpec::Kind::TwoMoons ? DatasetKind::TwoMoons
                                                                       : DatasetKind::GaussianBlobs;
            train_data = generate_dataset(k, spec.data.count, spec.data.noise,
                                          derive_seed(spec.seed, 10));
            int n_eval = spec.eval_count > 0 ? spec.eval_count : spec.data.count;
            built.eval_points =
                generate_dataset(k, n_eval, spec.data.noise, derive_seed(spec.seed, 11));
            data_desc << (k == DatasetKind::TwoMoons ? "two_moons" : "blobs") << "(count="
                      << spec.data.count << ",noise=" << spec.data.noise << ")";
            break;
        }
        case DataSpec::Kind::Idx:
            train_data = load_idx_images(spec.data.images_path, spec.data.labels_path,
                                         spec.data.idx_limit);
            built.eval_points = train_data;
            data_desc << "idx(" << spec.data.images_path << ")";
            break;
        case DataSpec::Kind::Inline:
            train_data = spec.data.inline_points;
            built.eval_points = train_data;
            data_desc << "inline(count=" << train_data.size() << ")";
            break;
    }
    if (spec.eval_count > 0 &&
        built.eval_points.size() > static_cast<std::size_t>(spec.eval_count))
        built.eval_points.resize(spec.eval_count);

    std::ostringstream model_desc;
    switch (spec.model.kind) {
        case ModelSpec::Kind::Circle:
            built.model = std::make_unique<CircleModel>(spec.model.radius);
            model_desc << "circle(radius=" << spec.model.radius << ")";
            break;
        case ModelSpec::Kind::Polynomial:
            built.model = std::make_unique<PolynomialModel>(spec.model.coeffs);
            model_desc << "polynomial(degree=" << spec.model.coeffs.size() - 1 << ")";
            break;
        case ModelSpec::Kind::Piecewise:
            built.model = std::make_unique<PiecewiseLinearModel>(spec.model.knots_x,
                                                                 spec.model.knots_y);
            model_desc << "piecewise(knots=" << spec.model.knots_x.size() << ")";
            break;
        case ModelSpec::Kind::Affine:
            built.model = std::make_unique<AffineClassifier>(spec.model.affine_w,
                                                             spec.model.affine_b);
            model_desc << "affine(" << spec.model.affine_w.rows << "x"
                       << spec.model.affine_w.cols << ")";
            break;
        case ModelSpec::Kind::Checkpoint:
            built.model = std::make_unique<DenseNet>(load_checkpoint(spec.model.checkpoint_path));
            model_desc << "checkpoint(" << spec.model.checkpoint_path << ")";
            break;
        case ModelSpec::Kind::Train: {
            if (train_data.empty()) throw ConfigError("config: training needs a dataset");
            TrainResult tr = train_dense_net(train_data, spec.model.layers, spec.model.epochs,
                                             spec.model.learning_rate, derive_seed(spec.seed, 20));
            model_desc << "train(";
            for (std::size_t i = 0; i < spec.model.layers.size(); ++i)
                model_desc << (i ? "-" : "") << spec.model.layers[i];
            model_desc << ",acc=" << tr.final_accuracy << ")";
            if (!spec.model.save_path.empty()) save_checkpoint(tr.net, spec.model.save_path);
            built.model = std::make_unique<DenseNet>(std::move(tr.net));
            break;
        }
    }
    built.model_desc = model_desc.str();
    built.data_desc = data_desc.str();
    return built;
}

// `input_seed` keys the stochastic attacks so each input draws its own
// jitter stream while staying reproducible.
inline AttackResult run_entry(const Classifier& model, const Vec& x0, const AttackObjective& obj,
                              const AttackEntry& entry, const std::optional<BoxBounds>& box,
                              std::uint64_t input_seed) {
    switch (entry.kind) {
        case AttackKind::Margin: {
            AttackConfig cfg = entry.margin_cfg;
            cfg.seed = input_seed;
            return margin_attack(model, x0, obj, cfg);
        }
        case AttackKind::Deepfool: return deepfool(model, x0, obj, entry.deepfool_cfg);
        case AttackKind::Fgsm: return fgsm_step_search(model, x0, obj, entry.fgsm_cfg, box);
        case AttackKind::Pgd: {
            PgdConfig cfg = entry.pgd_cfg;
            cfg.seed = input_seed;
            return pgd(model, x0, obj, cfg, box);
        }
        default: return cw_l2(model, x0, obj, entry.cw_cfg, box);
    }
}

} // namespace detail

inline void write_margins_csv(const std::vector<AttackRunRow>& rows, std::ostream& out) {
    out << "input_id,attack,success,margin,moves,wall_ms\n";
    for (const AttackRunRow& r : rows)
        out << r.input_id << ',' << r.attack << ',' << (r.success ? 1 : 0) << ','
            << format_double(r.margin) << ',' << r.moves << ',' << format_double(r.wall_ms)
            << '\n';
}

inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
    detail::BuiltExperiment built = detail::build_experiment(spec);
    const Classifier& model = *built.model;

    ExperimentReport report;
    report.num_inputs = static_cast<int>(built.eval_points.size());

    std::filesystem::create_directories(spec.output_dir);

    struct PerAttack {
        std::vector<MarginOutcome> outcomes;
        double margin_sum = 0.0, moves_sum = 0.0, wall_sum = 0.0;
        int successes = 0;
    };
    std::vector<PerAttack> stats(spec.attacks.size());

    for (int id = 0; id < report.num_inputs; ++id) {
        const LabeledPoint& pt = built.eval_points[id];
        AttackObjective obj;
        obj.true_label = pt.label;
        obj.epsilon = spec.epsilon;
        bool misclassified = argmax_index(model.logits(pt.x)) != pt.label;
        if (misclassified) ++report.already_misclassified;

        for (std::size_t a = 0; a < spec.attacks.size(); ++a) {
            const AttackEntry& entry = spec.attacks[a];
            AttackRunRow row;
            row.input_id = id;
            row.attack = entry.name;
            if (misclassified) {
                // nothing to do: the model already errs here
                row.success = true;
                row.margin = 0.0;
                row.moves = 0;
                row.wall_ms = 0.0;
            } else {
                auto t0 = std::chrono::steady_clock::now();
                AttackResult result = detail::run_entry(
                    model, pt.x, obj, entry, spec.box,
                    derive_seed(spec.seed, 1000 + static_cast<std::uint64_t>(id)));
                auto t1 = std::chrono::steady_clock::now();
                row.success = result.success;
                row.margin = result.margin;
                row.moves = result.moves;
                row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
                if (spec.export_traces && !result.trace.empty()) {
                    std::filesystem::path p = std::filesystem::path(spec.output_dir) /
                                              ("trace_" + entry.name + "_" + std::to_string(id) +
                                               ".csv");
                    export_convergence(result.trace, p.string());
                }
            }
            stats[a].outcomes.push_back({row.success, row.margin});
            if (row.success) {
                ++stats[a].successes;
                stats[a].margin_sum += row.margin;
            }
            stats[a].moves_sum += row.moves;
            stats[a].wall_sum += row.wall_ms;
            report.rows.push_back(std::move(row));
        }
    }

    // success-at-level tables; absent levels come from the 20/40/60/80 %
    // quantiles of the first attack of that norm (successful margins only)
    auto auto_levels = [&](NormKind norm) -> std::vector<double> {
        for (std::size_t a = 0; a < spec.attacks.size(); ++a) {
            if (spec.attacks[a].norm != norm) continue;
            if (spec.attacks[a].kind != AttackKind::Margin) continue;
            std::vector<double> margins;
            for (const MarginOutcome& o : stats[a].outcomes)
                if (o.success) margins.push_back(o.margin);
            if (margins.empty()) return {};
            return {quantile(margins, 0.2), quantile(margins, 0.4), quantile(margins, 0.6),
                    quantile(margins, 0.8)};
        }
        return {};
    };
    report.levels_l2 = spec.levels_l2.empty() ? auto_levels(NormKind::L2) : spec.levels_l2;
    report.levels_linf = spec.levels_linf.empty() ? auto_levels(NormKind::Linf) : spec.levels_linf;

    nlohmann::ordered_json summary;
    summary["seed"] = spec.seed;
    summary["epsilon"] = spec.epsilon;
    summary["model"] = built.model_desc;
    summary["dataset"] = built.data_desc;
    summary["num_inputs"] = report.num_inputs;
    summary["already_misclassified"] = report.already_misclassified;
    summary["levels"] = {{"l2", report.levels_l2}, {"linf", report.levels_linf}};
    nlohmann::ordered_json attacks = nlohmann::ordered_json::array();
    for (std::size_t a = 0; a < spec.attacks.size(); ++a) {
        const AttackEntry& entry = spec.attacks[a];
        const PerAttack& st = stats[a];
        const std::vector<double>& levels =
            entry.norm == NormKind::L2 ? report.levels_l2 : report.levels_linf;
        nlohmann::ordered_json j;
        j["name"] = entry.name;
        j["kind"] = attack_kind_name(entry.kind);
        j["norm"] = norm_name(entry.norm);
        j["num_success"] = st.successes;
        int n = report.num_inputs;
        j["success_rate_pct"] = round_rate(n ? 100.0 * st.successes / n : 0.0);
        j["mean_margin_success"] = st.successes ? st.margin_sum / st.successes : 0.0;
        std::vector<double> rates = levels.empty()
                                        ? std::vector<double>{}
                                        : success_rate_table(st.outcomes, levels);
        for (double& r : rates) r = round_rate(r);
        j["rate_at_level_pct"] = rates;
        j["mean_moves"] = n ? st.moves_sum / n : 0.0;
        j["mean_wall_ms"] = n ? st.wall_sum / n : 0.0;
        attacks.push_back(std::move(j));
    }
    summary["attacks"] = std::move(attacks);
    report.summary = std::move(summary);

    std::ofstream csv(std::filesystem::path(spec.output_dir) / "margins.csv");
    if (!csv) throw FormatError("run_experiment: cannot write margins.csv");
    write_margins_csv(report.rows, csv);
    std::ofstream js(std::filesystem::path(spec.output_dir) / "summary.json");
    if (!js) throw FormatError("run_experiment: cannot write summary.json");
    js << report.summary.dump(2) << "\n";

    return report;
}

} // namespace margin
