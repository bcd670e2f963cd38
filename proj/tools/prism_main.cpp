// prism: synthetic-log generation, training, evaluation, inspection and
// benchmark suites for the preference-relevance click model.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prism/bench.hpp"
#include "prism/pipeline.hpp"

namespace {

using namespace prism;

// Config file support: plain `key = value` lines where keys are long option
// names without the leading dashes. Command-line flags win over file keys,
// file keys win over defaults.
void apply_config_file(CLI::App* sub, const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--config", path + ":" + std::to_string(line_no) +
                                                       ": expected 'key = value'");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (!opt || opt->get_name() == "--config")
            throw CLI::ValidationError("--config", path + ":" + std::to_string(line_no) +
                                                       ": unknown key '" + key + "'");
        if (opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

struct SynthArgs {
    SynthConfig cfg;
    int proto_dim = 64;
    std::string out_dir;
};

struct TrainArgs {
    RunSettings settings;
    std::vector<std::string> ablate;
    std::string pm = "mlp", rm = "two_tower", fusion = "learned";
    std::string out_dir;
};

struct EvalArgs {
    std::string checkpoint, data, out_dir;
    double hot_quantile = 0.2;
    int k = 10;
};

struct InspectArgs {
    std::string checkpoint, data, out_dir, split = "test";
    bool dump_repr = false;
};

void apply_common_model_flags(TrainArgs& a) {
    a.settings.train.model.pm_kind = preference_kind_from(a.pm);
    a.settings.train.model.rm_kind = relevance_kind_from(a.rm);
    a.settings.train.model.fusion = fusion_kind_from(a.fusion);
    for (const auto& target : a.ablate) {
        if (target == "rectify") a.settings.train.model.use_rectify = false;
        else if (target == "anchor") a.settings.train.model.use_anchor = false;
        else if (target == "route") a.settings.train.model.use_route = false;
        else throw CLI::ValidationError("--ablate", "unknown module '" + target + "'");
    }
}

int cmd_synth(const SynthArgs& a) {
    ensure_dir(a.out_dir);
    Dataset ds = generate_synthetic(a.cfg);
    write_impressions(ds, a.out_dir + "/impressions.jsonl");
    save_prototypes(make_prototypes(a.proto_dim, a.cfg.seed), a.out_dir + "/prototypes.json");
    std::cout << "wrote " << ds.impressions.size() << " impressions over " << a.cfg.n_sessions
              << " sessions (" << ds.users.size() << " users, " << ds.queries.size()
              << " queries, " << ds.items.size() << " items) to " << a.out_dir << "\n";
    return 0;
}

int cmd_train(TrainArgs& a) {
    apply_common_model_flags(a);
    RunArtifacts art = run_job(a.settings, a.out_dir);
    const auto& overall = art.test_report.at("overall");
    std::cout << "best val AUC " << art.checkpoint.best_val_auc << " at epoch "
              << art.checkpoint.epoch << "; test AUC "
              << (overall.auc ? std::to_string(*overall.auc) : std::string("n/a")) << "\n";
    std::cout << "wrote " << a.out_dir << "/checkpoint.json, history.csv, report.csv\n";
    return 0;
}

int cmd_eval(const EvalArgs& a) {
    Checkpoint ckpt = load_checkpoint(a.checkpoint);
    PrismModel model = model_from_checkpoint(ckpt);
    Dataset full = load_impressions(a.data);
    auto splits = temporal_split(full);
    MetricReport report = evaluate_split(model, splits[0], splits[2], a.hot_quantile, a.k);
    ensure_dir(a.out_dir);
    write_report_csv(report, a.out_dir + "/report.csv");
    const auto& overall = report.at("overall");
    std::cout << "test impressions " << overall.n_impressions << ", AUC "
              << (overall.auc ? std::to_string(*overall.auc) : std::string("n/a")) << ", logloss "
              << (overall.logloss ? std::to_string(*overall.logloss) : std::string("n/a")) << "\n";
    std::cout << "wrote " << a.out_dir << "/report.csv\n";
    return 0;
}

int cmd_inspect(const InspectArgs& a) {
    Checkpoint ckpt = load_checkpoint(a.checkpoint);
    PrismModel model = model_from_checkpoint(ckpt);
    Dataset full = load_impressions(a.data);
    Dataset target;
    if (a.split == "all") {
        target = std::move(full);
    } else {
        auto splits = temporal_split(full);
        target = a.split == "train" ? std::move(splits[0])
               : a.split == "valid" ? std::move(splits[1])
                                    : std::move(splits[2]);
    }
    ensure_dir(a.out_dir);
    write_inspect_csv(model, target, a.out_dir + "/inspect.csv", a.dump_repr);
    std::cout << "wrote " << a.out_dir << "/inspect.csv (" << target.impressions.size()
              << " rows)\n";
    return 0;
}

int cmd_bench(const std::string& suite_path, const std::string& out_dir) {
    auto entries = load_suite(suite_path);
    ensure_dir(out_dir);
    SuiteResult result = run_suite(entries, out_dir);
    write_aggregate_csv(result, entries, out_dir + "/aggregate.csv");
    size_t failed = 0;
    for (const auto& r : result.runs) failed += !r.ok;
    std::cout << "suite finished: " << result.runs.size() << " runs, " << failed << " failed; wrote "
              << out_dir << "/aggregate.csv\n";
    return failed == result.runs.size() && !result.runs.empty() ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PRISM preference-relevance click model"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic confounded search log");
    s->add_option("--out", synth.out_dir, "output directory");
    s->add_option("--sessions", synth.cfg.n_sessions, "number of sessions")
        ->check(CLI::PositiveNumber);
    s->add_option("--users", synth.cfg.n_users)->check(CLI::PositiveNumber);
    s->add_option("--items", synth.cfg.n_items)->check(CLI::PositiveNumber);
    s->add_option("--queries", synth.cfg.n_queries)->check(CLI::PositiveNumber);
    s->add_option("--items-per-session", synth.cfg.items_per_session)->check(CLI::Range(2, 1 << 20));
    s->add_option("--latent-dim", synth.cfg.latent_dim)->check(CLI::PositiveNumber);
    s->add_option("--confound", synth.cfg.confound_strength, "confounding strength c")
        ->check(CLI::NonNegativeNumber);
    s->add_option("--rel-weight", synth.cfg.relevance_weight);
    s->add_option("--pref-weight", synth.cfg.preference_weight);
    s->add_option("--proto-dim", synth.proto_dim, "dimension of the emitted prototype file")
        ->check(CLI::Range(2, 1 << 16));
    s->add_option("--seed", synth.cfg.seed)->envname("PRISM_SEED");

    TrainArgs train_args;
    auto* t = app.add_subcommand("train", "train a model on an impression log");
    t->add_option("--data", train_args.settings.data_path, "impressions JSONL");
    t->add_option("--protos", train_args.settings.protos_path, "prototype JSON");
    t->add_option("--out", train_args.out_dir, "output directory");
    t->add_option("--seed", train_args.settings.train.seed)->envname("PRISM_SEED");
    t->add_option("--max-epochs", train_args.settings.train.max_epochs)
        ->check(CLI::Range(1, 1 << 20));
    t->add_option("--lr", train_args.settings.train.learning_rate)->check(CLI::PositiveNumber);
    t->add_option("--batch-size", train_args.settings.train.batch_size)
        ->check(CLI::PositiveNumber);
    t->add_option("--patience", train_args.settings.train.patience)->check(CLI::PositiveNumber);
    t->add_option("--weight-decay", train_args.settings.train.weight_decay)
        ->check(CLI::NonNegativeNumber);
    t->add_option("--embed-dim", train_args.settings.train.model.embed_dim)
        ->check(CLI::PositiveNumber);
    t->add_option("--proto-dim", train_args.settings.train.model.proto_dim)
        ->check(CLI::PositiveNumber);
    t->add_option("--pm", train_args.pm, "preference backbone: mlp|cross");
    t->add_option("--rm", train_args.rm, "relevance backbone: two_tower|personalized");
    t->add_option("--fusion", train_args.fusion, "interaction head: learned|product");
    t->add_option("--ablate", train_args.ablate, "disable a module: rectify|anchor|route")
        ->allow_extra_args(false);
    t->add_option("--rectify-iters", train_args.settings.train.model.rectify_iters)
        ->check(CLI::PositiveNumber);
    t->add_option("--tau", train_args.settings.train.model.tau)->check(CLI::PositiveNumber);
    t->add_option("--t-proto", train_args.settings.train.model.T_proto)
        ->check(CLI::PositiveNumber);
    t->add_option("--gamma", train_args.settings.train.model.gamma)->check(CLI::NonNegativeNumber);
    t->add_option("--lambda-mag", train_args.settings.train.weights.lambda_mag)
        ->check(CLI::NonNegativeNumber);
    t->add_option("--lambda-dir", train_args.settings.train.weights.lambda_dir)
        ->check(CLI::NonNegativeNumber);
    t->add_option("--lambda-pr", train_args.settings.train.weights.lambda_pr)
        ->check(CLI::NonNegativeNumber);
    t->add_option("--lambda-att", train_args.settings.train.weights.lambda_att)
        ->check(CLI::NonNegativeNumber);
    t->add_option("--lambda-rel-aux", train_args.settings.train.weights.lambda_rel_aux)
        ->check(CLI::NonNegativeNumber);
    t->add_option("--hot-quantile", train_args.settings.hot_quantile)
        ->check(CLI::Range(0.0, 1.0));

    EvalArgs eval_args;
    auto* e = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    e->add_option("--checkpoint", eval_args.checkpoint);
    e->add_option("--data", eval_args.data);
    e->add_option("--out", eval_args.out_dir);
    e->add_option("--hot-quantile", eval_args.hot_quantile)->check(CLI::Range(0.0, 1.0));
    e->add_option("--k", eval_args.k)->check(CLI::PositiveNumber);

    InspectArgs inspect_args;
    auto* i = app.add_subcommand("inspect", "dump per-impression forward artifacts");
    i->add_option("--checkpoint", inspect_args.checkpoint);
    i->add_option("--data", inspect_args.data);
    i->add_option("--out", inspect_args.out_dir);
    i->add_option("--split", inspect_args.split)
        ->check(CLI::IsMember({"train", "valid", "test", "all"}));
    i->add_flag("--dump-repr", inspect_args.dump_repr, "append the relevance representation");

    std::string suite_path, bench_out;
    auto* b = app.add_subcommand("bench", "run a multi-seed experiment suite");
    b->add_option("--suite", suite_path, "suite spec JSON");
    b->add_option("--out", bench_out);

    std::map<CLI::App*, std::string> config_paths;
    for (CLI::App* sub : {s, t, e, i, b}) {
        config_paths[sub] = "";
        sub->add_option("--config", config_paths[sub], "flags file (key = value lines)");
    }

    // requiredness is enforced after the config file is folded in, so required
    // values may come from either source
    const std::map<CLI::App*, std::vector<std::string>> required = {
        {s, {"--out"}},
        {t, {"--data", "--out"}},
        {e, {"--checkpoint", "--data", "--out"}},
        {i, {"--checkpoint", "--data", "--out"}},
        {b, {"--suite", "--out"}},
    };
    try {
        app.parse(argc, argv);
        for (auto& [sub, path] : config_paths)
            if (sub->parsed()) apply_config_file(sub, path);
        for (auto& [sub, names] : required)
            if (sub->parsed())
                for (const auto& name : names)
                    if (sub->get_option(name)->count() == 0)
                        throw CLI::RequiredError(sub->get_name() + " " + name);
    } catch (const CLI::ParseError& ex) {
        if (ex.get_exit_code() == 0) return app.exit(ex);
        app.exit(ex);
        return 2;
    }

    try {
        if (s->parsed()) return cmd_synth(synth);
        if (t->parsed()) return cmd_train(train_args);
        if (e->parsed()) return cmd_eval(eval_args);
        if (i->parsed()) return cmd_inspect(inspect_args);
        if (b->parsed()) return cmd_bench(suite_path, bench_out);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
