// marginattack: command-line front end for the attack library.
//
//   marginattack attack    --model M --point X [...]   run the core attack
//   marginattack oracle    --model M --point X [...]   exhaustive 2-D margin
//   marginattack benchmark --config FILE               full experiment run
//   marginattack train     --out FILE [...]            train a dense net
//   marginattack gradcheck --model M [...]             backprop vs finite diff
//
// Exit codes: 0 success, 1 the requested check/attack failed, 2 bad usage or
// bad configuration.

#include <cstdio>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "margin/margin.hpp"

namespace {

using namespace margin;

Vec parse_point(const std::string& s) {
    Vec out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw InvalidInput("bad coordinate in point: " + item);
        }
    }
    if (out.empty()) throw InvalidInput("empty point");
    return out;
}

// "circle", "circle:R", or a path to a dense-net checkpoint.
std::unique_ptr<Classifier> build_model(const std::string& spec) {
    if (spec == "circle") return std::make_unique<CircleModel>(1.0);
    if (spec.rfind("circle:", 0) == 0)
        return std::make_unique<CircleModel>(std::stod(spec.substr(7)));
    return std::make_unique<DenseNet>(load_checkpoint(spec));
}

NormKind parse_norm_flag(const std::string& s) {
    if (s == "l2") return NormKind::L2;
    if (s == "linf") return NormKind::Linf;
    throw ConfigError("unknown norm: " + s + " (want l2 or linf)");
}

struct SharedArgs {
    std::string model = "circle";
    std::string point;
    std::string norm = "l2";
    double eps = -0.01;
    int label = -1; // -1: use the model's own prediction
    int target = -1;
};

AttackObjective make_objective(const Classifier& model, const Vec& x0, const SharedArgs& args) {
    AttackObjective obj;
    obj.true_label = args.label >= 0 ? args.label : argmax_index(model.logits(x0));
    obj.epsilon = args.eps;
    if (args.target >= 0) obj.target = args.target;
    return obj;
}

int cmd_attack(const SharedArgs& shared, const std::string& box_arg, const std::string& trace_path,
               int moves, int restarts, double init_range, long long seed, double alpha_override) {
    std::unique_ptr<Classifier> model = build_model(shared.model);
    Vec x0 = parse_point(shared.point);
    NormKind norm = parse_norm_flag(shared.norm);
    AttackConfig cfg = norm == NormKind::L2 ? AttackConfig::l2_defaults()
                                            : AttackConfig::linf_defaults();
    cfg.epsilon = shared.eps;
    cfg.total_moves = moves;
    cfg.final_tuning_start = std::max(0, moves - 20);
    cfg.target_scan_moves = std::min(10, cfg.final_tuning_start);
    cfg.restarts = restarts;
    cfg.init_range = init_range;
    cfg.seed = static_cast<std::uint64_t>(seed);
    if (alpha_override > 0.0) cfg.alpha = alpha_override;
    if (!box_arg.empty()) {
        Vec b = parse_point(box_arg);
        if (b.size() != 2) throw ConfigError("box must be lo,hi");
        cfg.box = BoxBounds{b[0], b[1]};
    }
    AttackObjective obj = make_objective(*model, x0, shared);

    AttackResult res = margin_attack(*model, x0, obj, cfg);
    if (!trace_path.empty()) export_convergence(res.trace, trace_path);
    std::printf("success %d\n", res.success ? 1 : 0);
    std::printf("margin %.6f\n", res.margin);
    std::printf("final_constraint %.6g\n", res.final_constraint);
    std::printf("restarts_used %d\n", res.restarts_used);
    return res.success ? 0 : 1;
}

int cmd_oracle(const SharedArgs& shared, int rays, double tol, double max_radius) {
    std::unique_ptr<Classifier> model = build_model(shared.model);
    Vec x0 = parse_point(shared.point);
    NormKind norm = parse_norm_flag(shared.norm);
    AttackObjective obj = make_objective(*model, x0, shared);
    double margin = brute_force_margin_2d(*model, x0, obj, norm, rays, tol, max_radius);
    std::printf("%.6f\n", margin);
    return 0;
}

int cmd_train(const std::string& dataset, int count, double noise, long long seed,
              const std::string& layers_arg, int epochs, double lr, const std::string& out_path) {
    DatasetKind kind;
    if (dataset == "two_moons")
        kind = DatasetKind::TwoMoons;
    else if (dataset == "blobs")
        kind = DatasetKind::GaussianBlobs;
    else
        throw ConfigError("unknown dataset: " + dataset);
    std::vector<int> layers;
    for (double v : parse_point(layers_arg)) layers.push_back(static_cast<int>(v));
    Dataset data = generate_dataset(kind, count, noise, static_cast<std::uint64_t>(seed));
    TrainResult tr = train_dense_net(data, layers, epochs, lr, static_cast<std::uint64_t>(seed));
    save_checkpoint(tr.net, out_path);
    std::printf("accuracy %.4f\n", tr.final_accuracy);
    std::printf("saved %s\n", out_path.c_str());
    return 0;
}

int cmd_gradcheck(const std::string& model_spec, int trials, double h, long long seed,
                  double range) {
    std::unique_ptr<Classifier> model = build_model(model_spec);
    Rng rng(static_cast<std::uint64_t>(seed));
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        Vec x(model->input_dim());
        for (double& v : x) v = rng.uniform(-range, range);
        int cls = rng.uniform_int(0, model->num_classes() - 1);
        Vec g = model->logit_gradient(x, cls);
        Vec fd = finite_diff_gradient(*model, x, cls, h);
        double denom = l2_norm(fd);
        double err = denom > 0.0 ? l2_norm(sub(g, fd)) / denom : l2_norm(g);
        if (err > worst) worst = err;
    }
    std::printf("max_rel_err %.3e\n", worst);
    return worst < 1e-4 ? 0 : 1;
}

int cmd_benchmark(const std::string& config_path) {
    ExperimentSpec spec = parse_experiment_file(config_path);
    ExperimentReport report = run_experiment(spec);
    std::printf("inputs %d (already misclassified %d)\n", report.num_inputs,
                report.already_misclassified);
    for (const auto& atk : report.summary["attacks"])
        std::printf("%-16s %-5s success %5.1f%%  mean margin %.5f\n",
                    atk["name"].get<std::string>().c_str(),
                    atk["norm"].get<std::string>().c_str(), atk["success_rate_pct"].get<double>(),
                    atk["mean_margin_success"].get<double>());
    std::printf("wrote %s/margins.csv and summary.json\n", spec.output_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"minimum-margin adversarial attack toolkit"};
    app.require_subcommand(1);

    SharedArgs shared;
    std::string box_arg, trace_path, config_path, out_path = "net.json";
    std::string dataset = "two_moons", layers_arg = "2,16,2", gradcheck_model;
    int moves = 200, restarts = 1, rays = 3600, count = 400, epochs = 40, trials = 100;
    double init_range = 0.05, tol = 1e-5, max_radius = 8.0, noise = 0.1, lr = 0.05, h = 1e-5,
           range = 2.0, alpha_override = 0.0;
    long long seed = 0;

    CLI::App* attack = app.add_subcommand("attack", "run the minimum-margin attack");
    attack->add_option("--model", shared.model, "circle, circle:R, or checkpoint path");
    attack->add_option("--point", shared.point, "input point, comma separated")->required();
    attack->add_option("--norm", shared.norm, "l2 or linf");
    attack->add_option("--eps", shared.eps, "constraint offset");
    attack->add_option("--label", shared.label, "true label (default: model prediction)");
    attack->add_option("--target", shared.target, "targeted attack class");
    attack->add_option("--moves", moves, "total moves");
    attack->add_option("--restarts", restarts, "random restarts");
    attack->add_option("--init-range", init_range, "start jitter half-width");
    attack->add_option("--seed", seed, "random seed");
    attack->add_option("--alpha", alpha_override, "restoration step scale");
    attack->add_option("--box", box_arg, "coordinate bounds lo,hi");
    attack->add_option("--trace", trace_path, "write convergence CSV here");

    // The oracle reports the geometric distance to the decision boundary, so its
    // offset defaults to zero rather than the attack's strictly-inside -0.01.
    double oracle_eps = 0.0;
    CLI::App* oracle = app.add_subcommand("oracle", "exhaustive 2-D margin oracle");
    oracle->add_option("--model", shared.model, "circle, circle:R, or checkpoint path");
    oracle->add_option("--point", shared.point, "input point, comma separated")->required();
    oracle->add_option("--norm", shared.norm, "l2 or linf");
    oracle->add_option("--eps", oracle_eps, "constraint offset");
    oracle->add_option("--label", shared.label, "true label (default: model prediction)");
    oracle->add_option("--target", shared.target, "targeted attack class");
    oracle->add_option("--rays", rays, "angular resolution");
    oracle->add_option("--tol", tol, "bisection tolerance");
    oracle->add_option("--max-radius", max_radius, "search radius");

    CLI::App* benchmark = app.add_subcommand("benchmark", "run an experiment config");
    benchmark->add_option("--config", config_path, "experiment config file")->required();

    CLI::App* train = app.add_subcommand("train", "train a dense net on a toy dataset");
    train->add_option("--dataset", dataset, "two_moons or blobs");
    train->add_option("--count", count, "training points");
    train->add_option("--noise", noise, "dataset noise");
    train->add_option("--seed", seed, "random seed");
    train->add_option("--layers", layers_arg, "layer sizes, comma separated");
    train->add_option("--epochs", epochs, "training epochs");
    train->add_option("--lr", lr, "learning rate");
    train->add_option("--out", out_path, "checkpoint output path");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "compare backprop to finite differences");
    gradcheck->add_option("--model", gradcheck_model, "checkpoint path or builtin")->required();
    gradcheck->add_option("--trials", trials, "random probes");
    gradcheck->add_option("--step", h, "finite-difference step");
    gradcheck->add_option("--seed", seed, "random seed");
    gradcheck->add_option("--range", range, "probe coordinates drawn from [-range, range]");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*attack)
            return cmd_attack(shared, box_arg, trace_path, moves, restarts, init_range, seed,
                              alpha_override);
        if (*oracle) {
            shared.eps = oracle_eps;
            return cmd_oracle(shared, rays, tol, max_radius);
        }
        if (*benchmark) return cmd_benchmark(config_path);
        if (*train) return cmd_train(dataset, count, noise, seed, layers_arg, epochs, lr, out_path);
        if (*gradcheck) return cmd_gradcheck(gradcheck_model, trials, h, seed, range);
    } catch (const NoBoundaryFound& e) {
        std::fprintf(stderr, "no boundary: %s\n", e.what());
        return 1;
    } catch (const DegenerateGradient& e) {
        std::fprintf(stderr, "degenerate gradient: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
