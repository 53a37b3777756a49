#include "ctxsat/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "ctxsat/io.hpp"
#include "json.hpp"

namespace ctxsat {

using nlohmann::json;

namespace {

std::string fmt(double v, const char* spec = "%.6f") {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    if (!obj.is_object()) throw ArgumentError("config: '" + where + "' must be an object");
    for (const auto& [key, _] : obj.items())
        if (!known.count(key)) throw ArgumentError("config: unknown key '" + where + "." + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ArgumentError(std::string("config: bad value for '") + key + "'");
    }
}

template <typename T>
void read_opt(const json& obj, const char* key, std::optional<T>& out) {
    if (!obj.contains(key)) return;
    if (obj.at(key).is_null()) {
        out.reset();
        return;
    }
    T v{};
    read(obj, key, v);
    out = v;
}

template <typename T>
json opt_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

}  // namespace

std::string code_identity() { return "ctxsat 1.0.0"; }

void ExperimentConfig::validate() const {
    generation.validate();
    learner.validate();
    if (hint.m < 1) throw ArgumentError("learner m must be at least 1");
    if (hint.max_clause_len < 1) throw ArgumentError("learner max_clause_len must be at least 1");
    if (milp.m < 1) throw ArgumentError("milp m must be at least 1");
    if (milp.refine_rounds < 0) throw ArgumentError("milp refine_rounds must be non-negative");
    if (metrics.r_max && !(*metrics.r_max >= 0.0)) throw ArgumentError("r_max must be non-negative");
    if (seeds.empty()) throw ArgumentError("at least one seed is required");
    if (jobs < 1) throw ArgumentError("jobs must be at least 1");
}

ExperimentConfig config_from_json(const std::string& text, ExperimentConfig c) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    reject_unknown(doc, {"generation", "learner", "milp", "metrics", "solver", "output_dir", "seeds", "jobs"}, "");
    if (doc.contains("generation")) {
        const auto& g = doc["generation"];
        reject_unknown(g,
                       {"n", "m_hard", "m_soft", "max_clause_len", "context_count", "context_len", "pos_per_context",
                        "neg_per_context", "neg_split", "noise_p", "seed"},
                       "generation");
        auto& s = c.generation;
        read(g, "n", s.n);
        read(g, "m_hard", s.m_hard);
        read(g, "m_soft", s.m_soft);
        read_opt(g, "max_clause_len", s.max_clause_len);
        read(g, "context_count", s.context_count);
        read_opt(g, "context_len", s.context_len);
        read(g, "pos_per_context", s.pos_per_context);
        read(g, "neg_per_context", s.neg_per_context);
        read(g, "neg_split", s.neg_split);
        read(g, "noise_p", s.noise_p);
        read(g, "seed", s.seed);
    }
    if (doc.contains("learner")) {
        const auto& l = doc["learner"];
        reject_unknown(l,
                       {"m", "max_clause_len", "strategy", "restart_probability", "walk_probability", "cutoff_score",
                        "cutoff_time_s", "max_steps", "stagnation_fraction", "seed", "tabu_capacity", "noise_phi",
                        "noise_theta", "workers", "trace_interval"},
                       "learner");
        auto& s = c.learner;
        read(l, "m", c.hint.m);
        read(l, "max_clause_len", c.hint.max_clause_len);
        if (l.contains("strategy")) {
            std::string name;
            read(l, "strategy", name);
            s.strategy = strategy_from_string(name);
        }
        read(l, "restart_probability", s.restart_probability);
        read(l, "walk_probability", s.walk_probability);
        read_opt(l, "cutoff_score", s.cutoff_score);
        read(l, "cutoff_time_s", s.cutoff_time_s);
        read(l, "max_steps", s.max_steps);
        read(l, "stagnation_fraction", s.stagnation_fraction);
        read(l, "seed", s.seed);
        read(l, "tabu_capacity", s.tabu_capacity);
        read(l, "noise_phi", s.noise_phi);
        read(l, "noise_theta", s.noise_theta);
        read(l, "workers", s.workers);
        read(l, "trace_interval", s.trace_interval);
    }
    if (doc.contains("milp")) {
        const auto& m = doc["milp"];
        reject_unknown(m, {"m", "refine_rounds", "solver_cmd"}, "milp");
        read(m, "m", c.milp.m);
        read(m, "refine_rounds", c.milp.refine_rounds);
        read(m, "solver_cmd", c.milp.solver_cmd);
    }
    if (doc.contains("metrics")) {
        const auto& m = doc["metrics"];
        reject_unknown(m, {"regret_samples", "r_max"}, "metrics");
        read(m, "regret_samples", c.metrics.regret_samples);
        read_opt(m, "r_max", c.metrics.r_max);
    }
    if (doc.contains("solver")) {
        const auto& s = doc["solver"];
        reject_unknown(s, {"enumeration_limit"}, "solver");
        read(s, "enumeration_limit", c.generation.solver.enumeration_limit);
        c.learner.solver = c.generation.solver;
    }
    read(doc, "output_dir", c.output_dir);
    read(doc, "seeds", c.seeds);
    read(doc, "jobs", c.jobs);
    c.validate();
    return c;
}

std::string config_to_json(const ExperimentConfig& c) {
    const auto& g = c.generation;
    const auto& l = c.learner;
    json doc = {
        {"generation",
         {{"n", g.n},
          {"m_hard", g.m_hard},
          {"m_soft", g.m_soft},
          {"max_clause_len", opt_json(g.max_clause_len)},
          {"context_count", g.context_count},
          {"context_len", opt_json(g.context_len)},
          {"pos_per_context", g.pos_per_context},
          {"neg_per_context", g.neg_per_context},
          {"neg_split", g.neg_split},
          {"noise_p", g.noise_p},
          {"seed", g.seed}}},
        {"learner",
         {{"m", c.hint.m},
          {"max_clause_len", c.hint.max_clause_len},
          {"strategy", to_string(l.strategy)},
          {"restart_probability", l.restart_probability},
          {"walk_probability", l.walk_probability},
          {"cutoff_score", opt_json(l.cutoff_score)},
          {"cutoff_time_s", l.cutoff_time_s},
          {"max_steps", l.max_steps},
          {"stagnation_fraction", l.stagnation_fraction},
          {"seed", l.seed},
          {"tabu_capacity", l.tabu_capacity},
          {"noise_phi", l.noise_phi},
          {"noise_theta", l.noise_theta},
          {"workers", l.workers},
          {"trace_interval", l.trace_interval}}},
        {"milp", {{"m", c.milp.m}, {"refine_rounds", c.milp.refine_rounds}, {"solver_cmd", c.milp.solver_cmd}}},
        {"metrics", {{"regret_samples", c.metrics.regret_samples}, {"r_max", opt_json(c.metrics.r_max)}}},
        {"solver", {{"enumeration_limit", g.solver.enumeration_limit}}},
        {"output_dir", c.output_dir},
        {"seeds", c.seeds},
        {"jobs", c.jobs}};
    return doc.dump(2) + "\n";
}

std::string generation_summary(const GeneratedInstance& inst) {
    std::ostringstream out;
    const auto contexts = inst.data.unique_contexts();
    std::size_t pos = 0, inf = 0, sub = 0;
    for (const auto& e : inst.data.examples) {
        pos += e.label;
        inf += e.kind == ExampleKind::Infeasible;
        sub += e.kind == ExampleKind::Suboptimal;
    }
    out << "model: " << inst.model.hard_count() << " hard, " << inst.model.soft_count() << " soft, n=" << inst.model.n()
        << " (redraws " << inst.model_redraws << ")\n";
    out << "dataset: " << inst.data.size() << " examples over " << contexts.size() << " contexts; " << pos
        << " positive, " << inf << " infeasible, " << sub << " sub-optimal\n";
    for (const auto& psi : contexts) {
        std::size_t p = 0, q = 0;
        for (const auto& e : inst.data.examples)
            if (e.context == psi) (e.label ? p : q) += 1;
        out << "  " << psi.to_string() << ": " << p << "+ " << q << "-\n";
    }
    return out.str();
}

std::string trace_csv(const LearnResult& r) {
    std::string out = "step,current_score,best_score,wp,elapsed_ms\n";
    for (const auto& t : r.trace)
        out += std::to_string(t.step) + "," + std::to_string(t.current_score) + "," + std::to_string(t.best_score) +
               "," + fmt(t.wp) + "," + fmt(t.elapsed_ms, "%.3f") + "\n";
    return out;
}

std::string learn_manifest(const ExperimentConfig& config, const LearnResult& r, const std::string& dataset) {
    json doc = {{"code", code_identity()},
                {"command", "learn"},
                {"dataset", dataset},
                {"config", json::parse(config_to_json(config))},
                {"seed", config.learner.seed},
                {"strategy", to_string(config.learner.strategy)},
                {"score", r.score},
                {"steps", r.steps},
                {"restarts", r.restarts},
                {"stop_reason", to_string(r.reason)},
                {"elapsed_s", r.elapsed_s}};
    return doc.dump(2) + "\n";
}

std::string csv_header() {
    return "seed,n,m_hard,m_soft,contexts,strategy,cutoff,score,accuracy,infeasibility,regret,elapsed";
}

std::string csv_row(const RunRow& r) {
    const auto& e = r.report;
    return std::to_string(r.seed) + "," + std::to_string(r.n) + "," + std::to_string(r.m_hard) + "," +
           std::to_string(r.m_soft) + "," + std::to_string(r.contexts) + "," + r.strategy + "," +
           fmt(r.cutoff, "%g") + "," + format_metric(e.training_score_fraction) + "," +
           format_metric(e.global_accuracy) + "," + format_metric(e.infeasibility) + "," +
           (e.regret_mean ? format_metric(*e.regret_mean) : "NA") + "," +
           (r.elapsed ? fmt(*r.elapsed, "%.3f") : "NA");
}

void append_csv(const std::string& path, const std::string& header, const std::vector<std::string>& lines) {
    namespace fs = std::filesystem;
    const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
    if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for appending");
    if (fresh) out << header << "\n";
    for (const auto& l : lines) out << l << "\n";
    if (!out) throw Error("write failed for '" + path + "'");
}

EvalReport evaluate_run(const MaxSatModel& learned, const MaxSatModel& truth, const Dataset& data,
                        const ExperimentConfig& config, std::uint64_t seed) {
    EvalConfig ec;
    ec.regret_samples = config.metrics.regret_samples;
    ec.seed = seed;
    ec.solver = config.generation.solver;
    return report(learned, truth, data, ec);
}

// ---- MILP driver ----

namespace {

std::string substitute(std::string tpl, const std::string& key, const std::string& value) {
    for (std::size_t pos = 0; (pos = tpl.find(key, pos)) != std::string::npos; pos += value.size())
        tpl.replace(pos, key.size(), value);
    return tpl;
}

milp::Solution external_solve(const milp::MilpProblem& p, const std::string& cmd_tpl, const std::string& stem,
                              std::vector<std::string>& warnings) {
    const std::string lp = stem + ".lp", sol = stem + ".sol", log = stem + ".log";
    write_file(lp, milp::emit_lp(p));
    std::filesystem::remove(sol);
    const std::string cmd = substitute(substitute(cmd_tpl, "{lp}", lp), "{sol}", sol) + " > " + log + " 2>&1";
    const int rc = std::system(cmd.c_str());
    std::string captured;
    try {
        captured = read_file(log);
    } catch (const Error&) {
    }
    if (rc != 0) throw ExternalSolverError("solver command failed (status " + std::to_string(rc) + "): " + captured);
    std::string text;
    try {
        text = read_file(sol);
    } catch (const Error&) {
        throw ExternalSolverError("solver wrote no solution file '" + sol + "': " + captured);
    }
    try {
        auto parsed = milp::parse_solution(text, p);
        warnings = parsed.warnings;
        if (parsed.values.empty()) throw ExternalSolverError("solution file '" + sol + "' holds no known variable");
        return parsed.values;
    } catch (const ParseError& e) {
        throw ExternalSolverError(std::string("unparsable solution: ") + e.what());
    }
}

}  // namespace

MilpOutcome run_milp(const Dataset& data, const MilpSettings& settings, const std::string& stem,
                     const SolverOptions& opts) {
    MilpOutcome out;
    auto problem = milp::build_encoding(data, settings.m);
    std::ostringstream rep;
    for (int round = 0; round <= settings.refine_rounds; ++round) {
        MilpRound r;
        milp::Solution sol;
        if (settings.solver_cmd.empty()) {
            const auto fb = milp::solve_exhaustive(problem);
            if (!fb.feasible) {
                out.lp = milp::emit_lp(problem);
                rep << "round " << round << ": encoding infeasible\n";
                break;
            }
            sol = fb.solution;
        } else {
            sol = external_solve(problem, settings.solver_cmd, stem + ".r" + std::to_string(round), r.warnings);
        }
        out.lp = milp::emit_lp(problem);
        // Objective from the reported values of the objective variables.
        for (const auto& t : problem.objective) {
            auto it = sol.find(problem.variables()[t.var].name);
            if (it != sol.end()) r.objective += t.coef * it->second;
        }
        auto decoded = milp::decode(problem, sol);
        out.model = decoded.model;
        out.score = score(decoded.model, data, opts);
        r.mismatches = milp::detect_mismatch(decoded.model, data, opts);
        rep << "round " << round << ": objective " << fmt(r.objective, "%.9g") << ", score " << out.score << "/"
            << data.size() << ", mismatches " << r.mismatches.size() << "\n";
        for (const auto& m : r.mismatches)
            rep << "  context " << m.psi.to_string() << ": x' " << m.x_prime.to_string() << " beats positive "
                << m.x_plus.to_string() << "\n";
        for (const auto& w : r.warnings) rep << "  warning: " << w << "\n";
        const bool done = r.mismatches.empty();
        out.rounds.push_back(std::move(r));
        if (done || round == settings.refine_rounds) break;
        problem = milp::refine(problem, out.rounds.back().mismatches);
    }
    out.report = rep.str();
    return out;
}

// ---- trends ----

std::vector<std::string> trend_suites() { return {"neg-type", "noise", "context-ablation", "scaling"}; }

namespace {

struct Level {
    std::string name;
    std::function<void(ExperimentConfig&)> apply;
    bool strip_contexts = false;
};

std::vector<Level> suite_levels(const std::string& suite, const ExperimentConfig& base) {
    if (suite == "neg-type")
        return {{"infeasible", [](ExperimentConfig& c) { c.generation.neg_split = 1.0; }},
                {"sub-optimal", [](ExperimentConfig& c) { c.generation.neg_split = 0.0; }},
                {"both", [](ExperimentConfig& c) { c.generation.neg_split = 0.5; }}};
    if (suite == "noise") {
        std::vector<Level> out;
        for (double p : {0.0, 0.05, 0.1, 0.2})
            out.push_back({fmt(p, "%g"), [p](ExperimentConfig& c) { c.generation.noise_p = p; }});
        return out;
    }
    if (suite == "context-ablation")
        return {{"contextual", [](ExperimentConfig&) {}}, {"global", [](ExperimentConfig&) {}, true}};
    if (suite == "scaling") {
        std::vector<Level> out;
        for (int n : {base.generation.n - 2, base.generation.n, base.generation.n + 2}) {
            if (n < 2 || n > base.generation.solver.enumeration_limit) continue;
            out.push_back({std::to_string(n), [n](ExperimentConfig& c) {
                               c.generation.n = n;
                               c.generation.max_clause_len.reset();
                               c.generation.context_len.reset();
                               c.hint.max_clause_len = std::min(c.hint.max_clause_len, n);
                           }});
        }
        return out;
    }
    throw ArgumentError("unknown trends suite '" + suite + "'");
}

Dataset strip_contexts(const Dataset& d) {
    std::vector<ContextualExample> ex;
    for (const auto& e : d.examples) ex.emplace_back(Context(), e.assignment, e.label, e.kind);
    auto meta = d.metadata;
    meta["contexts_stripped"] = "1";
    return Dataset(d.n, std::move(ex), std::move(meta));
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TrendResult run_trends(const std::string& suite, const ExperimentConfig& base,
                       const std::function<void(const TrendRow&)>& progress) {
    base.validate();
    const auto levels = suite_levels(suite, base);
    struct Task {
        std::size_t level;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (std::size_t l = 0; l < levels.size(); ++l)
        for (auto s : base.seeds) tasks.push_back({l, s});
    std::vector<std::optional<TrendRow>> rows(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};
    std::mutex report_mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) {
            try {
                ExperimentConfig c = base;
                levels[tasks[i].level].apply(c);
                c.generation.seed = tasks[i].seed;
                c.learner.seed = tasks[i].seed;
                c.hint.max_clause_len = std::min(c.hint.max_clause_len, c.generation.n);
                const auto inst = generate_instance(c.generation);
                const Dataset train = levels[tasks[i].level].strip_contexts ? strip_contexts(inst.data) : inst.data;
                const auto learned = learn(train, c.hint, c.learner);
                TrendRow row;
                row.suite = suite;
                row.level = levels[tasks[i].level].name;
                row.run = {tasks[i].seed, c.generation.n, c.generation.m_hard, c.generation.m_soft,
                           inst.data.unique_contexts().size(), to_string(c.learner.strategy), c.learner.cutoff_time_s,
                           evaluate_run(learned.model, inst.model, inst.data, c, tasks[i].seed), learned.elapsed_s};
                rows[i] = row;
                if (progress) {
                    std::lock_guard lock(report_mutex);
                    progress(row);
                }
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const std::size_t jobs = std::min<std::size_t>(static_cast<std::size_t>(base.jobs), tasks.size());
        for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
        worker();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    TrendResult out;
    for (auto& r : rows) out.rows.push_back(std::move(*r));
    for (const auto& level : levels) {
        std::vector<double> sc, acc, inf, reg, el;
        for (const auto& r : out.rows) {
            if (r.level != level.name) continue;
            sc.push_back(r.run.report.training_score_fraction);
            acc.push_back(r.run.report.global_accuracy);
            inf.push_back(r.run.report.infeasibility);
            if (r.run.report.regret_mean) reg.push_back(*r.run.report.regret_mean);
            el.push_back(r.run.elapsed.value_or(0.0));
        }
        TrendAggregate a;
        a.suite = suite;
        a.level = level.name;
        a.runs = sc.size();
        a.score_mean = mean(sc), a.score_sd = stddev(sc);
        a.accuracy_mean = mean(acc), a.accuracy_sd = stddev(acc);
        a.infeasibility_mean = mean(inf), a.infeasibility_sd = stddev(inf);
        if (!reg.empty()) a.regret_mean = mean(reg), a.regret_sd = stddev(reg);
        a.elapsed_mean = mean(el);
        out.aggregates.push_back(a);
    }
    return out;
}

std::string trend_header() { return "suite,level," + csv_header(); }

std::string trend_row(const TrendRow& r) { return r.suite + "," + r.level + "," + csv_row(r.run); }

std::string aggregate_header() {
    return "suite,level,runs,score_mean,score_sd,accuracy_mean,accuracy_sd,infeasibility_mean,infeasibility_sd,"
           "regret_mean,regret_sd,elapsed_mean";
}

std::string aggregate_row(const TrendAggregate& a) {
    auto opt = [](const std::optional<double>& v) { return v ? format_metric(*v) : std::string("NA"); };
    return a.suite + "," + a.level + "," + std::to_string(a.runs) + "," + format_metric(a.score_mean) + "," +
           format_metric(a.score_sd) + "," + format_metric(a.accuracy_mean) + "," + format_metric(a.accuracy_sd) +
           "," + format_metric(a.infeasibility_mean) + "," + format_metric(a.infeasibility_sd) + "," +
           opt(a.regret_mean) + "," + opt(a.regret_sd) + "," + fmt(a.elapsed_mean, "%.3f");
}

}  // namespace ctxsat
