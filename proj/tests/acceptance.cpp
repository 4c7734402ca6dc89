// Acceptance gate for the attack engine: eight end-to-end checks, one
// PASS/FAIL line each, exit code = number of failures.
//
// The checks pin exact tolerances. 1: the attack recovers the closed-form
// margin on affine classifiers. 2: it lands on the known boundary point of a
// circular boundary. 3: it matches an exhaustive 2-D oracle on a trained
// net. 4: it dominates DeepFool and FGSM on that net. 5: every recorded
// move of checks 1-4 replays against the move-level identities. 6: analytic
// gradients match finite differences. 7: the constraint decays inside a
// fitted envelope proportional to the step-size schedule. 8: a full
// benchmark run is byte-reproducible.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "margin/margin.hpp"

namespace {

using namespace margin;
using Clock = std::chrono::steady_clock;

double secs_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Everything needed to replay one attack run in check 5.
struct TracedRun {
    const Classifier* model;
    Vec x0; // clean input; distances are measured from here, not the jittered start
    AttackObjective obj;
    AttackConfig cfg;
    AttackResult result;
};

std::deque<AffineClassifier> g_affine_models; // deque: stable addresses
std::vector<TracedRun> g_runs;
std::vector<AttackResult> g_ma_l2, g_ma_linf;

struct Fixture {
    DenseNet net;
    std::vector<Vec> points;
    std::vector<int> labels;
};

// Two-moons victim shared by checks 3-5: trained once, then the first 50
// correctly classified points of a held-out stream.
Fixture make_fixture() {
    Dataset data = generate_dataset(DatasetKind::TwoMoons, 400, 0.1, 7);
    TrainResult tr = train_dense_net(data, {2, 16, 2}, 40, 0.05, 7);
    Fixture f{std::move(tr.net), {}, {}};
    Dataset eval = generate_dataset(DatasetKind::TwoMoons, 200, 0.1, 99);
    for (const auto& p : eval) {
        if (f.points.size() >= 50) break;
        if (argmax_index(f.net.logits(p.x)) == p.label) {
            f.points.push_back(p.x);
            f.labels.push_back(p.label);
        }
    }
    return f;
}

AttackConfig affine_config(NormKind norm) {
    AttackConfig cfg = norm == NormKind::L2 ? AttackConfig::l2_defaults()
                                            : AttackConfig::linf_defaults();
    cfg.norm = norm;
    cfg.alpha = 1.0;      // full restoration hop: exact on an affine constraint
    cfg.init_range = 0.0; // deterministic start at x0
    cfg.total_moves = 5;
    cfg.target_scan_moves = 0;
    cfg.final_tuning_start = 3;
    return cfg;
}

// ---- 1: affine exactness ---------------------------------------------------

bool check1(std::string& detail) {
    auto t0 = Clock::now();
    Rng rng(42);
    double worst = 0.0;
    int worst_moves = 0;
    for (int trial = 0; trial < 100; ++trial) {
        int n = rng.uniform_int(2, 20);
        Matrix w(2, n);
        Vec b(2);
        for (double& v : w.data) v = rng.uniform(-1.0, 1.0);
        for (double& v : b) v = rng.uniform(-1.0, 1.0);
        g_affine_models.emplace_back(w, b);
        const AffineClassifier& model = g_affine_models.back();
        Vec x0(n);
        for (double& v : x0) v = rng.uniform(-2.0, 2.0);
        AttackObjective obj;
        obj.true_label = static_cast<int>(argmax_index(model.logits(x0)));
        for (NormKind norm : {NormKind::L2, NormKind::Linf}) {
            AttackConfig cfg = affine_config(norm);
            AttackResult res = margin_attack(model, x0, obj, cfg);
            double c0 = constraint_value(model, x0, obj);
            Vec g = constraint_gradient(model, x0, obj);
            double expected =
                std::fabs(c0) / (norm == NormKind::L2 ? l2_norm(g) : l1_norm(g));
            double rel = std::fabs(res.margin - expected) / expected;
            worst = std::max(worst, rel);
            worst_moves = std::max(worst_moves, res.moves);
            if (!res.success) {
                detail = "trial " + std::to_string(trial) + " did not succeed";
                return false;
            }
            g_runs.push_back({&model, x0, obj, cfg, std::move(res)});
        }
    }
    double t = secs_since(t0);
    std::ostringstream msg;
    msg << "100 models x 2 norms, worst relative error " << worst << " (limit 1e-6), moves <= "
        << worst_moves << " (limit 5), " << t << "s (limit 1)";
    detail = msg.str();
    return worst <= 1e-6 && worst_moves <= 5 && t < 1.0;
}

// ---- 2: circle convergence -------------------------------------------------

bool check2(const CircleModel& circle, std::string& detail) {
    auto t0 = Clock::now();
    AttackObjective obj;
    obj.true_label = 0;
    obj.epsilon = 0.0; // aim at the boundary itself so the target point is (1, 0)
    AttackConfig cfg = AttackConfig::l2_defaults();
    cfg.epsilon = 0.0;
    cfg.seed = 5;
    AttackResult res = margin_attack(circle, {2.0, 0.0}, obj, cfg);
    double t = secs_since(t0);
    double pt_err = l2_norm(sub(res.adversarial, {1.0, 0.0}));
    std::ostringstream msg;
    msg << "margin " << res.margin << " (target 1 +- 1e-3), point error " << pt_err
        << " (limit 1e-3), " << res.moves << " moves, " << t << "s (limit 1)";
    detail = msg.str();
    g_runs.push_back({&circle, {2.0, 0.0}, obj, cfg, std::move(res)});
    const AttackResult& r = g_runs.back().result;
    return std::fabs(r.margin - 1.0) <= 1e-3 && pt_err <= 1e-3 && r.moves <= 200 && t < 1.0;
}

// ---- 3: oracle agreement ---------------------------------------------------

bool check3(const Fixture& f, std::string& detail) {
    auto t0 = Clock::now();
    AttackConfig cfg = AttackConfig::l2_defaults();
    cfg.total_moves = 400; // the step-size schedule needs the longer budget here
    cfg.final_tuning_start = 380;
    cfg.restarts = 10;
    int within = 0, below = 0, success = 0;
    double worst = -1.0;
    for (std::size_t i = 0; i < f.points.size(); ++i) {
        AttackObjective obj;
        obj.true_label = f.labels[i];
        cfg.seed = derive_seed(123, i);
        AttackResult res = margin_attack(f.net, f.points[i], obj, cfg);
        g_ma_l2.push_back(res);
        g_runs.push_back({&f.net, f.points[i], obj, cfg, std::move(res)});
        const AttackResult& r = g_runs.back().result;
        if (!r.success) continue;
        ++success;
        double oracle = brute_force_margin_2d(f.net, f.points[i], obj, NormKind::L2);
        worst = std::max(worst, (r.margin - oracle) / oracle);
        if (r.margin <= oracle * 1.02) ++within;
        if (r.margin < oracle - 1e-4) ++below;
    }
    double t = secs_since(t0);
    std::ostringstream msg;
    msg << success << "/50 succeed, " << within << "/50 within 2% of the ray oracle (need >= 48), "
        << below << " below oracle - 1e-4 (need 0), worst relative gap " << worst << ", " << t
        << "s (limit 30)";
    detail = msg.str();
    return within >= 48 && below == 0 && t < 30.0;
}

// ---- 4: baseline dominance -------------------------------------------------

std::vector<double> successful_margins(const std::vector<AttackResult>& v) {
    std::vector<double> out;
    for (const auto& r : v)
        if (r.success) out.push_back(r.margin);
    return out;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double rate_at(const std::vector<AttackResult>& v, double level, std::size_t total) {
    std::size_t n = 0;
    for (const auto& r : v)
        if (r.success && r.margin <= level) ++n;
    return 100.0 * static_cast<double>(n) / static_cast<double>(total);
}

bool check4(const Fixture& f, std::string& detail) {
    AttackConfig li = AttackConfig::linf_defaults();
    li.final_tuning_start = 150; // alpha 0.2 contracts slowly; give the polish phase 50 moves
    li.restarts = 10;
    std::vector<AttackResult> df, fg;
    for (std::size_t i = 0; i < f.points.size(); ++i) {
        AttackObjective obj;
        obj.true_label = f.labels[i];
        li.seed = derive_seed(123, i);
        g_ma_linf.push_back(margin_attack(f.net, f.points[i], obj, li));
        g_runs.push_back({&f.net, f.points[i], obj, li, g_ma_linf.back()});
        df.push_back(deepfool(f.net, f.points[i], obj));
        fg.push_back(fgsm_step_search(f.net, f.points[i], obj));
    }
    bool ok = true;
    std::ostringstream msg;
    double ma2_mean = mean(successful_margins(g_ma_l2));
    double df_mean = mean(successful_margins(df));
    msg << "mean margin l2 " << ma2_mean << " vs DeepFool " << df_mean << "; rates";
    ok = ok && ma2_mean <= df_mean;
    std::vector<double> m2 = successful_margins(g_ma_l2);
    std::vector<double> mi = successful_margins(g_ma_linf);
    for (double q : {0.2, 0.4, 0.6, 0.8}) {
        double lv2 = quantile(m2, q);
        double r_ma = rate_at(g_ma_l2, lv2, f.points.size());
        double r_df = rate_at(df, lv2, f.points.size());
        double lvi = quantile(mi, q);
        double s_ma = rate_at(g_ma_linf, lvi, f.points.size());
        double s_fg = rate_at(fg, lvi, f.points.size());
        msg << " [q" << q << " l2 " << r_ma << ">=" << r_df << " linf " << s_ma << ">=" << s_fg
            << "]";
        ok = ok && r_ma >= r_df && s_ma >= s_fg;
    }
    detail = msg.str();
    return ok;
}

// ---- 5: move-level contracts -----------------------------------------------

struct ReplayStats {
    double worst_restoration = 0.0; // |grad_c(x)^T (z - x) + alpha c(x)| / (1 + |alpha c|)
    double worst_tangency = 0.0;    // normalized vs 1e-9 |delta| + machine-noise floor
    double worst_identity = 0.0;    // |grad_d^T delta + beta |grad_d|^2| / max(1, |rhs|)
    double worst_recorded = 0.0;    // recorded c / distance vs recomputation
    long moves = 0;
    bool box_ok = true;
};

void replay(const TracedRun& run, ReplayStats& st) {
    const Classifier& model = *run.model;
    AttackObjective obj = run.obj;
    obj.epsilon = run.cfg.epsilon; // the engine applies the config offset
    Vec prev = run.result.start_point;
    for (const auto& rec : run.result.trace) {
        double c_now = constraint_value(model, rec.point, obj);
        double d_now = norm_value(sub(rec.point, run.x0), run.cfg.norm);
        st.worst_recorded =
            std::max(st.worst_recorded,
                     std::fabs(c_now - rec.c_value) / (1.0 + std::fabs(rec.c_value)));
        st.worst_recorded = std::max(st.worst_recorded,
                                     std::fabs(d_now - rec.distance) / (1.0 + rec.distance));
        if (rec.phase == Phase::Projection) {
            if (!(rec.flags & kFlagProjectionSkipped)) {
                Vec delta = sub(rec.point, prev);
                double nd = l2_norm(delta);
                if (nd > 0.0) {
                    if (run.cfg.ab_design == AbDesign::ConstraintPreserving) {
                        // tangent to the linearized constraint at z; the additive
                        // term keeps the test meaningful when the iterate has
                        // converged and delta is pure rounding noise
                        Vec g_z = constraint_gradient(model, prev, obj);
                        double bound =
                            l2_norm(g_z) * (1e-9 * nd + 1e-13 * (1.0 + l2_norm(prev)));
                        st.worst_tangency =
                            std::max(st.worst_tangency, std::fabs(dot(g_z, delta)) / bound);
                    } else {
                        Vec gd = norm_subgradient(sub(prev, run.x0), run.cfg.norm);
                        double rhs = -rec.beta * dot(gd, gd);
                        st.worst_identity =
                            std::max(st.worst_identity, std::fabs(dot(gd, delta) - rhs) /
                                                            std::max(1.0, std::fabs(rhs)));
                    }
                }
            }
        } else { // restoration / final tuning
            double c_prev;
            Vec g_prev;
            if (rec.scanned_class >= 0) {
                auto pc = pairwise_constraint(model, prev, obj.true_label, rec.scanned_class,
                                              obj.epsilon);
                c_prev = pc.first;
                g_prev = pc.second;
            } else {
                c_prev = constraint_value(model, prev, obj);
                g_prev = constraint_gradient(model, prev, obj);
            }
            if (!(rec.flags & kFlagBoxInfeasible)) {
                double resid =
                    std::fabs(dot(g_prev, sub(rec.point, prev)) + run.cfg.alpha * c_prev);
                st.worst_restoration = std::max(
                    st.worst_restoration, resid / (1.0 + std::fabs(run.cfg.alpha * c_prev)));
            }
            // restoration output must respect the box exactly (projection
            // iterates may wander; feasibility is restored next move)
            if (run.cfg.box)
                for (double v : rec.point)
                    if (v < run.cfg.box->lo || v > run.cfg.box->hi) st.box_ok = false;
        }
        prev = rec.point;
        ++st.moves;
    }
    if (run.cfg.box)
        for (double v : run.result.adversarial)
            if (v < run.cfg.box->lo || v > run.cfg.box->hi) st.box_ok = false;
}

bool check5(const CircleModel& circle, std::string& detail) {
    // add a boxed run so the feasibility contract is exercised
    AttackObjective obj;
    obj.true_label = 0;
    AttackConfig cfg = AttackConfig::l2_defaults();
    cfg.box = BoxBounds{0.0, 2.0};
    cfg.seed = 11;
    g_runs.push_back({&circle, {2.0, 0.0}, obj, cfg, margin_attack(circle, {2.0, 0.0}, obj, cfg)});

    ReplayStats st;
    for (const TracedRun& run : g_runs) replay(run, st);

    // exact fixed point: c(x) = 0 keeps x bit-identical
    Matrix w(2, 2);
    w.data = {1.0, 0.0, 0.0, 0.0};
    AffineClassifier fixed_model(w, {0.0, 0.0});
    Vec fx = {0.0, 0.7};
    Vec fz = restoration_step(fx, 0.0, constraint_gradient(fixed_model, fx, {0, 0.0}), 1.0,
                              NormKind::L2);
    bool fixed_ok = fz.size() == fx.size() && fz[0] == fx[0] && fz[1] == fx[1];

    std::ostringstream msg;
    msg << st.moves << " recorded moves: restoration residual " << st.worst_restoration
        << " (limit 1e-10), tangency ratio " << st.worst_tangency
        << " (limit 1), step identity " << st.worst_identity << " (limit 1e-9), record drift "
        << st.worst_recorded << " (limit 1e-12), box " << (st.box_ok ? "ok" : "VIOLATED")
        << ", fixed point " << (fixed_ok ? "bit-exact" : "MOVED");
    detail = msg.str();
    return st.worst_restoration <= 1e-10 && st.worst_tangency <= 1.0 &&
           st.worst_identity <= 1e-9 && st.worst_recorded <= 1e-12 && st.box_ok && fixed_ok;
}

// ---- 6: gradient oracle ----------------------------------------------------

bool check6(std::string& detail) {
    Rng rng(606);
    CircleModel circle(1.0);
    PolynomialModel poly({0.3, -1.0, 0.25, 0.15});
    PiecewiseLinearModel pw({-2.0, -1.0, 0.5, 2.0}, {0.3, -0.4, 0.8, 0.1});
    Matrix w(3, 8);
    Vec b(3);
    for (double& v : w.data) v = rng.uniform(-1.0, 1.0);
    for (double& v : b) v = rng.uniform(-1.0, 1.0);
    AffineClassifier affine(w, b);
    DenseNet net = DenseNet::glorot_init({3, 32, 4}, 99);
    const Classifier* models[] = {&affine, &circle, &poly, &pw, &net};
    double worst = 0.0;
    for (const Classifier* model : models) {
        for (int trial = 0; trial < 20; ++trial) {
            Vec x(model->input_dim());
            for (double& v : x) v = rng.uniform(-1.8, 1.8);
            int cls = rng.uniform_int(0, model->num_classes() - 1);
            Vec g = model->logit_gradient(x, cls);
            Vec fd = finite_diff_gradient(*model, x, cls, 1e-5);
            double denom = l2_norm(fd);
            double err = denom > 0.0 ? l2_norm(sub(g, fd)) / denom : l2_norm(g);
            worst = std::max(worst, err);
        }
    }
    std::ostringstream msg;
    msg << "5 model families x 20 probes, max relative error " << worst << " (limit 1e-4)";
    detail = msg.str();
    return worst < 1e-4;
}

// ---- 7: rate envelope ------------------------------------------------------

bool check7(const CircleModel& circle, std::string& detail) {
    AttackObjective obj;
    obj.true_label = 0;
    AttackConfig cfg = AttackConfig::l2_defaults();
    std::vector<std::vector<MoveRecord>> traces;
    for (int s = 0; s < 20; ++s) {
        cfg.seed = derive_seed(777, s);
        traces.push_back(margin_attack(circle, {2.0, 0.0}, obj, cfg).trace);
    }
    // median |c| across seeds per move; kappa fitted on the first half must
    // bound the second half at >= 90% of moves
    std::size_t records = traces[0].size();
    for (const auto& t : traces)
        if (t.size() != records) {
            detail = "trace lengths differ across seeds";
            return false;
        }
    double kappa = 0.0;
    int checked = 0, ok = 0;
    for (std::size_t j = 0; j < records; ++j) {
        std::vector<double> cc;
        cc.reserve(traces.size());
        for (const auto& t : traces) cc.push_back(std::fabs(t[j].c_value));
        std::sort(cc.begin(), cc.end());
        double med = 0.5 * (cc[cc.size() / 2] + cc[(cc.size() - 1) / 2]);
        double beta = beta_schedule(traces[0][j].k, cfg.beta_base, cfg.nu, cfg.k0);
        if (traces[0][j].k < cfg.total_moves / 2) {
            kappa = std::max(kappa, med / beta);
        } else {
            ++checked;
            if (med <= kappa * beta + 1e-15) ++ok;
        }
    }
    std::ostringstream msg;
    msg << "kappa " << kappa << ", second half inside envelope " << ok << "/" << checked
        << " (need >= 90%)";
    detail = msg.str();
    return ok * 10 >= checked * 9;
}

// ---- 8: determinism --------------------------------------------------------

std::string strip_last_column(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        std::size_t pos = line.rfind(',');
        out << (pos == std::string::npos ? line : line.substr(0, pos)) << '\n';
    }
    return out.str();
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

bool check8(std::string& detail) {
    namespace fs = std::filesystem;
    const std::string config_text = R"(seed = 31
epsilon = -0.01
eval_count = 12
export_traces = true

[model]
kind = circle
radius = 1.0

[dataset]
kind = inline
points = 1.5 0.2 0; 0.3 1.4 0; -1.2 0.8 0; 1.1 -0.9 0; -0.4 -1.3 0; 1.8 0.1 0; 0.2 0.1 1; -0.3 0.4 1; 0.5 -0.2 1; 0.1 -0.6 1; 0.5 0.5 0; -0.2 -0.1 0

[attack.margin_l2]
kind = margin
norm = l2

[attack.margin_linf]
kind = margin
norm = linf

[attack.deepfool]
kind = deepfool

[attack.fgsm]
kind = fgsm

[attack.pgd]
kind = pgd
eps = 1.2
step = 0.05

[attack.cw]
kind = cw
)";
    fs::path base = fs::temp_directory_path() / "margin_acceptance";
    fs::remove_all(base);
    std::vector<fs::path> dirs = {base / "run_a", base / "run_b"};
    for (const fs::path& dir : dirs) {
        std::istringstream in(config_text);
        ExperimentSpec spec = parse_experiment_spec(parse_config(in));
        spec.output_dir = dir.string();
        run_experiment(spec);
    }
    // margins.csv must match byte for byte once the wall-clock column is gone
    std::string ma = strip_last_column(read_file(dirs[0] / "margins.csv"));
    std::string mb = strip_last_column(read_file(dirs[1] / "margins.csv"));
    bool margins_ok = !ma.empty() && ma == mb;
    // summary.json likewise, with the wall-clock means removed
    auto scrub = [](const fs::path& p) {
        nlohmann::ordered_json j = nlohmann::ordered_json::parse(read_file(p));
        for (auto& atk : j["attacks"]) atk.erase("mean_wall_ms");
        return j.dump(2);
    };
    bool summary_ok = scrub(dirs[0] / "summary.json") == scrub(dirs[1] / "summary.json");
    // exported traces carry no timing at all: bytes must match exactly
    int traces = 0;
    bool traces_ok = true;
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
        std::string name = entry.path().filename().string();
        if (name.rfind("trace_", 0) != 0) continue;
        ++traces;
        if (read_file(entry.path()) != read_file(dirs[1] / name)) traces_ok = false;
    }
    std::ostringstream msg;
    msg << "margins.csv " << (margins_ok ? "identical" : "DIFFER") << ", summary.json "
        << (summary_ok ? "identical" : "DIFFER") << ", " << traces << " trace files "
        << (traces_ok ? "identical" : "DIFFER") << " (timing columns excluded)";
    detail = msg.str();
    return margins_ok && summary_ok && traces > 0 && traces_ok;
}

} // namespace

int main() {
    CircleModel circle(1.0);
    Fixture fixture = make_fixture();
    if (fixture.points.size() != 50) {
        std::printf("FAIL fixture: expected 50 correctly classified points, got %zu\n",
                    fixture.points.size());
        return 8;
    }

    struct Entry {
        const char* name;
        bool ok;
        std::string detail;
    };
    std::vector<Entry> entries;
    std::string d;
    entries.push_back({"1 affine exactness", check1(d), d});
    entries.push_back({"2 circle convergence", check2(circle, d), d});
    entries.push_back({"3 oracle agreement", check3(fixture, d), d});
    entries.push_back({"4 baseline dominance", check4(fixture, d), d});
    entries.push_back({"5 move contracts", check5(circle, d), d});
    entries.push_back({"6 gradient oracle", check6(d), d});
    entries.push_back({"7 rate envelope", check7(circle, d), d});
    entries.push_back({"8 determinism", check8(d), d});

    int failures = 0;
    for (const Entry& e : entries) {
        std::printf("%s %s: %s\n", e.ok ? "PASS" : "FAIL", e.name, e.detail.c_str());
        if (!e.ok) ++failures;
    }
    return failures;
}
