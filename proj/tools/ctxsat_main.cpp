// ctxsat command-line driver: generate, learn, evaluate, encode-milp, trends.
// Exit codes: 0 success, 1 validation, 2 runtime, 3 external solver.
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "ctxsat/experiment.hpp"
#include "ctxsat/io.hpp"
#include "json.hpp"

using namespace ctxsat;
namespace fs = std::filesystem;

namespace {

// Flags recorded at parse time and applied over the config afterwards (flags > config > defaults).
class Overrides {
public:
    template <typename T>
    CLI::Option* add(CLI::App* app, const std::string& name, std::function<void(ExperimentConfig&, const T&)> set,
                     const std::string& help) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app->add_option(name, *value, help);
        appliers_.push_back([opt, value, set](ExperimentConfig& c) {
            if (opt->count() > 0) set(c, *value);
        });
        return opt;
    }
    void apply(ExperimentConfig& c) const {
        for (const auto& f : appliers_) f(c);
    }

private:
    std::vector<std::function<void(ExperimentConfig&)>> appliers_;
};

ExperimentConfig load_config(const std::string& path, const Overrides& ov) {
    ExperimentConfig c = path.empty() ? ExperimentConfig{} : config_from_json(read_file(path));
    ov.apply(c);
    c.learner.solver = c.generation.solver;
    c.validate();
    return c;
}

std::string in_dir(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

void add_generation_flags(CLI::App* app, Overrides& ov) {
    ov.add<int>(app, "--n", [](auto& c, int v) { c.generation.n = v; }, "variable count");
    ov.add<int>(app, "--m-hard", [](auto& c, int v) { c.generation.m_hard = v; }, "hard constraints in the truth");
    ov.add<int>(app, "--m-soft", [](auto& c, int v) { c.generation.m_soft = v; }, "soft constraints in the truth");
    ov.add<int>(app, "--clause-len", [](auto& c, int v) { c.generation.max_clause_len = v; }, "maximum clause length");
    ov.add<int>(app, "--contexts", [](auto& c, int v) { c.generation.context_count = v; }, "number of contexts");
    ov.add<int>(app, "--context-len", [](auto& c, int v) { c.generation.context_len = v; }, "literals per context");
    ov.add<int>(app, "--pos", [](auto& c, int v) { c.generation.pos_per_context = v; }, "positives per context");
    ov.add<int>(app, "--neg", [](auto& c, int v) { c.generation.neg_per_context = v; }, "negatives per context");
    ov.add<double>(app, "--neg-split", [](auto& c, double v) { c.generation.neg_split = v; },
                   "fraction of negatives that are infeasible");
    ov.add<double>(app, "--noise", [](auto& c, double v) { c.generation.noise_p = v; }, "label flip probability");
}

void add_learner_flags(CLI::App* app, Overrides& ov) {
    ov.add<std::string>(app, "--strategy", [](auto& c, const std::string& v) { c.learner.strategy = strategy_from_string(v); },
                        "walksat | novelty | novelty+ | adaptive-novelty+");
    ov.add<double>(app, "--cutoff-time", [](auto& c, double v) { c.learner.cutoff_time_s = v; }, "seconds");
    ov.add<int>(app, "--cutoff-score", [](auto& c, int v) { c.learner.cutoff_score = v; }, "stop at this score");
    ov.add<long long>(app, "--max-steps", [](auto& c, long long v) { c.learner.max_steps = v; },
                      "step budget (0 = none)");
    ov.add<double>(app, "--walk-prob", [](auto& c, double v) { c.learner.walk_probability = v; }, "random walk probability");
    ov.add<double>(app, "--restart-prob", [](auto& c, double v) { c.learner.restart_probability = v; },
                   "restart probability");
    ov.add<int>(app, "--workers", [](auto& c, int v) { c.learner.workers = v; }, "neighbour scoring threads");
    ov.add<int>(app, "--m", [](auto& c, int v) { c.hint.m = v; }, "constraints in learned models");
    ov.add<int>(app, "--learn-clause-len", [](auto& c, int v) { c.hint.max_clause_len = v; },
                "maximum clause length of learned models");
}

int run(int argc, char** argv) {
    CLI::App app{"Learn contextual MAX-SAT models from examples"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);

    // generate
    Overrides gen_ov;
    auto* gen = app.add_subcommand("generate", "sample a ground-truth model and a contextual dataset");
    add_generation_flags(gen, gen_ov);
    gen_ov.add<std::uint64_t>(gen, "--seed", [](auto& c, std::uint64_t v) { c.generation.seed = v; }, "master seed");
    gen_ov.add<std::string>(gen, "--out", [](auto& c, const std::string& v) { c.output_dir = v; }, "output directory");

    // learn
    Overrides learn_ov;
    std::string learn_data, learn_model, learn_trace, learn_manifest_path;
    auto* lrn = app.add_subcommand("learn", "run stochastic local search on a dataset");
    lrn->add_option("--data", learn_data, "dataset file")->required()->check(CLI::ExistingFile);
    lrn->add_option("--model-out", learn_model, "learned model path (default <out>/learned.json)");
    lrn->add_option("--trace", learn_trace, "trace CSV path (default <out>/trace.csv)");
    lrn->add_option("--manifest", learn_manifest_path, "manifest path (default <out>/learn.manifest.json)");
    add_learner_flags(lrn, learn_ov);
    learn_ov.add<std::uint64_t>(lrn, "--seed", [](auto& c, std::uint64_t v) { c.learner.seed = v; }, "learner seed");
    learn_ov.add<std::string>(lrn, "--out", [](auto& c, const std::string& v) { c.output_dir = v; }, "output directory");

    // evaluate
    Overrides eval_ov;
    std::string ev_learned, ev_truth, ev_data, ev_manifest, ev_csv;
    auto* ev = app.add_subcommand("evaluate", "score a learned model against the ground truth");
    ev->add_option("--learned", ev_learned, "learned model")->required()->check(CLI::ExistingFile);
    ev->add_option("--truth", ev_truth, "ground-truth model")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", ev_data, "training dataset")->required()->check(CLI::ExistingFile);
    ev->add_option("--manifest", ev_manifest, "learn manifest supplying seed/strategy/cutoff/elapsed")
        ->check(CLI::ExistingFile);
    ev->add_option("--csv", ev_csv, "CSV file to append to (default <out>/results.csv)");
    eval_ov.add<std::size_t>(ev, "--regret-samples", [](auto& c, std::size_t v) { c.metrics.regret_samples = v; },
                             "regret sample count (0 = all)");
    eval_ov.add<std::string>(ev, "--out", [](auto& c, const std::string& v) { c.output_dir = v; }, "output directory");

    // encode-milp
    Overrides milp_ov;
    std::string mi_data, mi_out, mi_model, mi_report;
    bool mi_fallback = false;
    auto* mi = app.add_subcommand("encode-milp", "write the MILP encoding and optionally solve it");
    mi->add_option("--data", mi_data, "dataset file")->required()->check(CLI::ExistingFile);
    mi->add_option("--out", mi_out, "LP output path")->required();
    milp_ov.add<int>(mi, "--m", [](auto& c, int v) { c.milp.m = v; }, "constraints in the learned model");
    milp_ov.add<std::string>(mi, "--solver-cmd", [](auto& c, const std::string& v) { c.milp.solver_cmd = v; },
                             "solver command template with {lp} and {sol}");
    milp_ov.add<int>(mi, "--refine-rounds", [](auto& c, int v) { c.milp.refine_rounds = v; }, "refinement rounds");
    mi->add_flag("--fallback", mi_fallback, "solve with the built-in exhaustive solver");
    mi->add_option("--model-out", mi_model, "decoded model path (default <lp>.model.json)");
    mi->add_option("--report", mi_report, "mismatch report path (default <lp>.report.txt)");

    // trends
    Overrides tr_ov;
    std::string suite;
    auto* tr = app.add_subcommand("trends", "run a desk-scale experiment suite across seeds");
    tr->add_option("--suite", suite, "neg-type | noise | context-ablation | scaling")
        ->required()
        ->check(CLI::IsMember(trend_suites()));
    add_generation_flags(tr, tr_ov);
    add_learner_flags(tr, tr_ov);
    tr_ov.add<std::vector<std::uint64_t>>(tr, "--seeds", [](auto& c, const auto& v) { c.seeds = v; }, "seed list")
        ->delimiter(',');
    tr_ov.add<int>(tr, "--jobs", [](auto& c, int v) { c.jobs = v; }, "parallel runs");
    tr_ov.add<std::string>(tr, "--out", [](auto& c, const std::string& v) { c.output_dir = v; }, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (gen->parsed()) {
        const auto cfg = load_config(config_path, gen_ov);
        const auto inst = generate_instance(cfg.generation);
        fs::create_directories(cfg.output_dir);
        write_file(in_dir(cfg.output_dir, "truth.json"), serialize_model(inst.model));
        write_file(in_dir(cfg.output_dir, "dataset.jsonl"), serialize_dataset(inst.data));
        nlohmann::json manifest = {{"code", code_identity()},
                                   {"command", "generate"},
                                   {"seed", cfg.generation.seed},
                                   {"model_redraws", inst.model_redraws},
                                   {"config", nlohmann::json::parse(config_to_json(cfg))}};
        write_file(in_dir(cfg.output_dir, "generate.manifest.json"), manifest.dump(2) + "\n");
        std::cout << generation_summary(inst);
        return 0;
    }
    if (lrn->parsed()) {
        const auto cfg = load_config(config_path, learn_ov);
        const auto data = deserialize_dataset(read_file(learn_data));
        if (data.n < cfg.hint.max_clause_len) throw ArgumentError("learner clause length exceeds dataset n");
        const auto result = learn(data, cfg.hint, cfg.learner);
        if (learn_model.empty()) learn_model = in_dir(cfg.output_dir, "learned.json");
        if (learn_trace.empty()) learn_trace = in_dir(cfg.output_dir, "trace.csv");
        if (learn_manifest_path.empty()) learn_manifest_path = in_dir(cfg.output_dir, "learn.manifest.json");
        for (const auto& p : {learn_model, learn_trace, learn_manifest_path})
            if (auto dir = fs::path(p).parent_path(); !dir.empty()) fs::create_directories(dir);
        write_file(learn_model, serialize_model(result.model));
        write_file(learn_trace, trace_csv(result));
        write_file(learn_manifest_path, learn_manifest(cfg, result, learn_data));
        std::cout << "score " << result.score << "/" << data.size() << " after " << result.steps << " steps ("
                  << to_string(result.reason) << ")\n";
        return 0;
    }
    if (ev->parsed()) {
        auto cfg = load_config(config_path, eval_ov);
        const auto learned = deserialize_model(read_file(ev_learned));
        const auto truth = deserialize_model(read_file(ev_truth));
        const auto data = deserialize_dataset(read_file(ev_data));
        if (learned.n() != truth.n() || data.n != truth.n())
            throw ArgumentError("learned model, truth and dataset disagree on n");
        RunRow row;
        row.n = truth.n();
        row.m_hard = static_cast<int>(truth.hard_count());
        row.m_soft = static_cast<int>(truth.soft_count());
        row.contexts = data.unique_contexts().size();
        row.strategy = "NA";
        const auto data_seed = data.metadata.find("seed");
        if (data_seed != data.metadata.end()) row.seed = std::stoull(data_seed->second);
        if (!ev_manifest.empty()) {
            const auto m = nlohmann::json::parse(read_file(ev_manifest));
            if (data_seed == data.metadata.end()) row.seed = m.value("seed", row.seed);
            row.strategy = m.value("strategy", std::string("NA"));
            row.cutoff = m["config"]["learner"].value("cutoff_time_s", 0.0);
            if (m.contains("elapsed_s")) row.elapsed = m["elapsed_s"].get<double>();
        }
        row.report = evaluate_run(learned, truth, data, cfg, row.seed);
        if (ev_csv.empty()) ev_csv = in_dir(cfg.output_dir, "results.csv");
        append_csv(ev_csv, csv_header(), {csv_row(row)});
        std::cout << csv_header() << "\n" << csv_row(row) << "\n";
        for (const auto& f : row.report.flags) std::cout << "flag: " << f << "\n";
        return 0;
    }
    if (mi->parsed()) {
        auto cfg = load_config(config_path, milp_ov);
        const auto data = deserialize_dataset(read_file(mi_data));
        if (auto dir = fs::path(mi_out).parent_path(); !dir.empty()) fs::create_directories(dir);
        if (cfg.milp.solver_cmd.empty() && !mi_fallback) {
            const auto problem = milp::build_encoding(data, cfg.milp.m);
            write_file(mi_out, milp::emit_lp(problem));
            std::cout << "wrote " << mi_out << ": " << problem.variables().size() << " variables, "
                      << problem.constraints().size() << " constraints\n";
            return 0;
        }
        if (mi_fallback) cfg.milp.solver_cmd.clear();
        const std::string stem = (fs::path(mi_out).parent_path() / fs::path(mi_out).stem()).string();
        const auto outcome = run_milp(data, cfg.milp, stem, cfg.generation.solver);
        write_file(mi_out, outcome.lp);
        if (mi_report.empty()) mi_report = mi_out + ".report.txt";
        write_file(mi_report, outcome.report);
        std::cout << outcome.report;
        if (!outcome.model) throw Error("MILP encoding has no feasible solution");
        if (mi_model.empty()) mi_model = mi_out + ".model.json";
        write_file(mi_model, serialize_model(*outcome.model));
        std::cout << "model " << mi_model << ": score " << outcome.score << "/" << data.size() << "\n";
        return 0;
    }
    if (tr->parsed()) {
        const auto cfg = load_config(config_path, tr_ov);
        fs::create_directories(cfg.output_dir);
        const auto result = run_trends(suite, cfg, [](const TrendRow& r) {
            std::cerr << r.suite << " " << r.level << " seed " << r.run.seed << ": score "
                      << format_metric(r.run.report.training_score_fraction) << "\n";
        });
        std::vector<std::string> rows, aggs;
        for (const auto& r : result.rows) rows.push_back(trend_row(r));
        for (const auto& a : result.aggregates) aggs.push_back(aggregate_row(a));
        append_csv(in_dir(cfg.output_dir, "trends_" + suite + ".csv"), trend_header(), rows);
        append_csv(in_dir(cfg.output_dir, "trends_" + suite + "_summary.csv"), aggregate_header(), aggs);
        std::cout << aggregate_header() << "\n";
        for (const auto& a : aggs) std::cout << a << "\n";
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ExternalSolverError& e) {
        std::cerr << "error: external solver: " << e.what() << "\n";
        return 3;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const StructuralError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const CapacityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed JSON: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
