// One PASS/FAIL line per acceptance criterion. Usage: acceptance [criterion...]; no argument runs all.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>

#include "cli_harness.hpp"
#include "fixtures.hpp"
#include "neighbour_oracle.hpp"
#include "oracle.hpp"

#include "ctxsat/datagen.hpp"
#include "ctxsat/eval.hpp"
#include "ctxsat/experiment.hpp"
#include "ctxsat/milp.hpp"
#include "ctxsat/sls.hpp"
#include "ctxsat/solver.hpp"

using namespace ctxsat;
using fixtures::A;
using fixtures::C;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// 1: solver, optimum set, classifier and model counter against brute force.
Outcome oracle_equivalence() {
    std::mt19937_64 rng(1001);
    int mismatches = 0, pairs = 0;
    for (int n : {6, 8, 10, 12})
        for (int t = 0; t < 200; ++t, ++pairs) {
            const auto model = oracle::random_model(n, 2 + t % 6, rng, 4, 0.4);
            const auto psi = oracle::random_context(n, 3, rng);
            const auto om = oracle::from(model);
            const auto ctx = psi.to_dimacs();
            const auto opt = oracle::optimum(om, ctx);
            bool ok = true;
            const auto r = solve(model, psi);
            ok = ok && r.feasible == opt.feasible;
            if (opt.feasible && r.feasible) {
                ok = ok && std::abs(r.value - opt.value) < 1e-9;
                ok = ok && std::find(opt.optima.begin(), opt.optima.end(), r.witness->code()) != opt.optima.end();
            }
            std::vector<std::uint64_t> got;
            for (const auto& a : optimum_set(model, psi)) got.push_back(a.code());
            ok = ok && got == opt.optima;
            for (int q = 0; q < 16; ++q) {
                const auto x = oracle::random_in(n, psi, rng);
                ok = ok && classify(model, psi, x) == oracle::positive(om, ctx, x.code());
            }
            for (auto i : opt.optima) ok = ok && classify(model, psi, Assignment(n, i));
            std::vector<std::vector<int>> hard;
            for (const auto& c : model.constraints())
                if (c.hard) hard.push_back(c.clause.to_dimacs());
            const auto hc = model.hard_clauses();
            ok = ok && model_count(n, hc, psi) == oracle::count(n, hard, ctx);
            mismatches += !ok;
        }
    return {mismatches == 0, std::to_string(pairs) + " pairs, " + std::to_string(mismatches) + " mismatches"};
}

// 2: the three-variable worked example.
Outcome golden() {
    using namespace milp;
    const auto d = fixtures::worked_data();
    const auto p = build_encoding(d, 2);
    const std::vector<Assignment> xt = {A("000"), A("101"), A("010"), A("000")};
    const std::vector<Assignment> xl = {A("000"), A("111"), A("010"), A("000")};
    const std::vector<double> gt = {1, 0, 1, 1}, gl = {2, 1, 2, 2};
    const auto ct = check_solution(p, lift(p, EncodedModel::from(fixtures::worked_target()), gt, xt));
    const auto cl = check_solution(p, lift(p, EncodedModel::from(fixtures::worked_wrong()), gl, xl));
    const bool a = ct.feasible && ct.objective == 3.0 && cl.feasible && cl.objective == 7.0;

    const auto mm = detect_mismatch(fixtures::worked_wrong(), d);
    std::set<Assignment> flagged;
    bool in_x3 = true;
    for (const auto& v : mm) {
        flagged.insert(v.x_plus);
        in_x3 = in_x3 && v.psi == C({3});
    }
    const bool b = mm.size() == 2 && in_x3 && flagged == std::set<Assignment>{A("111"), A("101")};

    const auto r = refine(p, mm);
    const bool c = !check_solution(r, lift(r, EncodedModel::from(fixtures::worked_wrong()), gl, xl)).feasible &&
                   check_solution(r, lift(r, EncodedModel::from(fixtures::worked_target()), gt, xt)).feasible;
    return {a && b && c, "objectives " + fmt("%g", ct.objective) + "/" + fmt("%g", cl.objective) + ", flagged " +
                             std::to_string(flagged.size()) + ", refined excludes wrong model: " + (c ? "yes" : "no")};
}

// True when the truth, weights rescaled to max 1, is a feasible point of the encoding.
bool realizable(const MaxSatModel& truth, const Dataset& data) {
    using namespace milp;
    double top = 0.0;
    for (const auto& c : truth.constraints()) top = std::max(top, c.hard ? 0.0 : c.weight);
    const MaxSatModel scaled = top > 0.0 ? truth.with_scaled_weights(1.0 / top) : truth;
    for (const auto& c : scaled.constraints())
        if (!c.hard && c.weight < 3 * kEpsilon) return false;
    const auto p = build_encoding(data, static_cast<int>(scaled.size()));
    std::vector<double> g;
    std::vector<Assignment> xs;
    for (const auto& psi : p.contexts) {
        const auto s = solve(scaled, psi);
        if (!s.feasible) return false;
        g.push_back(s.value);
        xs.push_back(*s.witness);
    }
    return check_solution(p, lift(p, EncodedModel::from(scaled), g, xs)).feasible;
}

// 3: exhaustive MILP plus refinement reaches a perfect training score.
Outcome milp_soundness() {
    int perfect = 0, redraws = 0, total_rounds = 0;
    std::uint64_t seed = 0;
    for (int t = 0; t < 50; ++t) {
        for (;;) {
            GenSpec spec;
            spec.n = 2 + static_cast<int>(seed % 2);
            spec.m_hard = static_cast<int>(seed % 3 == 0);
            spec.m_soft = 2 - spec.m_hard - static_cast<int>(seed % 5 == 0 && spec.m_hard == 1);
            spec.context_count = 1 + static_cast<int>((seed / 2) % 2);
            spec.context_len = 1;
            spec.pos_per_context = 1;
            spec.neg_per_context = 1;
            spec.seed = 5000 + seed++;
            try {
                const auto inst = generate_instance(spec, 20);
                if (inst.data.size() > 4 || !realizable(inst.model, inst.data)) {
                    ++redraws;
                    continue;
                }
                MilpSettings ms;
                ms.m = static_cast<int>(inst.model.size());
                ms.refine_rounds = 3;
                const auto out = run_milp(inst.data, ms, "");
                total_rounds += static_cast<int>(out.rounds.size());
                perfect += out.model && out.score == static_cast<int>(inst.data.size());
                break;
            } catch (const GenerationError&) {
                ++redraws;
            }
        }
    }
    return {perfect == 50, std::to_string(perfect) + "/50 perfect, " + std::to_string(redraws) +
                               " non-realizable truths redrawn, " + std::to_string(total_rounds) + " solver rounds"};
}

// 4: WalkSAT recovers realizable n = 8 tasks.
Outcome sls_recovery() {
    int perfect = 0;
    std::string scores;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        GenSpec spec;
        spec.n = 8;
        spec.m_hard = spec.m_soft = 2;
        spec.context_count = 25;
        spec.seed = seed;
        const auto inst = generate_instance(spec);
        SlsConfig c;
        c.strategy = Strategy::WalkSAT;
        c.cutoff_time_s = 60;
        c.seed = seed;
        const auto r = learn(inst.data, {4, 4}, c);
        perfect += r.score == static_cast<int>(inst.data.size());
        scores += (scores.empty() ? "" : " ") + std::to_string(r.score) + "/" + std::to_string(inst.data.size());
    }
    return {perfect >= 8, std::to_string(perfect) + "/10 seeds perfect (" + scores + ")"};
}

ExperimentConfig desk_config() {
    ExperimentConfig c;
    c.generation.n = 8;
    c.generation.m_hard = c.generation.m_soft = 5;
    c.generation.context_count = 50;
    c.learner.cutoff_time_s = 120;
    c.hint = {10, 4};
    c.seeds = {1, 2, 3, 4, 5};
    c.metrics.regret_samples = 1000;
    return c;
}

std::map<std::string, TrendAggregate> by_level(const TrendResult& r) {
    std::map<std::string, TrendAggregate> out;
    for (const auto& a : r.aggregates) out[a.level] = a;
    return out;
}

// 5: infeasible-only negatives teach less than sub-optimal ones.
Outcome neg_type() {
    const auto r = run_trends("neg-type", desk_config());
    auto lv = by_level(r);
    const double inf = lv["infeasible"].accuracy_mean, sub = lv["sub-optimal"].accuracy_mean,
                 both = lv["both"].accuracy_mean;
    return {inf <= sub - 0.10, "accuracy infeasible " + fmt("%.3f", inf) + ", sub-optimal " + fmt("%.3f", sub) +
                                   ", both " + fmt("%.3f", both)};
}

// 6: training score falls as label noise rises.
Outcome noise() {
    const auto r = run_trends("noise", desk_config());
    std::vector<double> s;
    std::string detail;
    for (const auto& a : r.aggregates) {
        s.push_back(a.score_mean);
        detail += (detail.empty() ? "score " : ", ") + a.level + ": " + fmt("%.3f", a.score_mean);
    }
    bool ok = r.rows.size() == 20 && s.size() == 4;
    for (std::size_t i = 1; i < s.size(); ++i) ok = ok && s[i] < s[i - 1] + 0.01;
    return {ok, detail + ", " + std::to_string(r.rows.size()) + " runs"};
}

// 7: empirical regret bound under uniform D.
Outcome regret_bound() {
    Rng rng(7007);
    int checked = 0, violations = 0, skipped = 0;
    double worst = -1e300;
    while (checked < 200) {
        const int n = 3 + static_cast<int>(rng() % 6);
        GenSpec spec;
        spec.n = n;
        spec.m_hard = 1 + static_cast<int>(rng() % 3);
        spec.m_soft = 1 + static_cast<int>(rng() % 4);
        const auto truth = gen_model(spec, rng);
        const auto h = random_model(n, {1 + static_cast<int>(rng() % 6), std::min(n, 3)}, rng);
        const auto psi = oracle::random_context(n, 2, rng);
        const auto b = regret_bound_check(h, truth, psi);
        if (b.degenerate) {
            ++skipped;
            continue;
        }
        ++checked;
        violations += !(b.lhs <= b.rhs + 1e-9);
        worst = std::max(worst, b.lhs - b.rhs);
    }
    return {violations == 0, std::to_string(checked) + " triples, " + std::to_string(violations) +
                                 " violations, max lhs-rhs " + fmt("%.4g", worst) + ", " + std::to_string(skipped) +
                                 " skipped (h infeasible in context)"};
}

// 8: the representativeness example.
Outcome representativeness_example() {
    const auto t = fixtures::rep_truth(), h = fixtures::rep_faulty();
    std::vector<Context> ctx = {C({1}), C({-1})};
    const auto two = representativeness(h, t, ctx, Context{});
    ctx.push_back(C({2, 3}));
    const auto three = representativeness(h, t, ctx, Context{});
    const std::size_t c2 = two.counts.at(A("011"));
    return {!two.representative && c2 == 0 && three.representative,
            std::string("{psi1,psi2}: ") + (two.representative ? "representative" : "not representative") +
                " with #(T,011) = " + std::to_string(c2) + "; with psi3: " +
                (three.representative ? "representative" : "not representative")};
}

// 9: pruned neighbourhoods are rule-checked subsets of the naive one.
Outcome pruning() {
    std::mt19937_64 rng(9009);
    int bad = 0, fallbacks = 0;
    double ratio_sum = 0.0;
    int cases = 0;
    std::string detail;
    for (auto d : {Diagnosis::PosPredictedInfeasible, Diagnosis::PosPredictedSuboptimal,
                   Diagnosis::NegPredictedPositive}) {
        double dsum = 0.0;
        for (int t = 0; t < 100; ++t) {
            const auto c = oracle::draw_case(d, rng);
            const auto nh = neighbours(c.model, c.example, d, c.x_star);
            const auto naive = naive_neighbours(c.model);
            std::set<std::uint64_t> naive_sigs;
            for (const auto& nb : naive) naive_sigs.insert(signature(nb.model));
            fallbacks += nh.fallback;
            for (const auto& nb : nh.models) {
                const auto mv = oracle::single_move(c.model, nb.model);
                const bool member = naive_sigs.count(signature(nb.model)) && mv.has_value();
                const bool rule = nh.fallback ||
                                  (mv && oracle::rule_applies(nb.rule, c.model[mv->j], *mv, c.example.assignment, c.x_star));
                bad += !(member && rule);
            }
            const double ratio = static_cast<double>(nh.models.size()) / static_cast<double>(naive.size());
            dsum += ratio;
            ratio_sum += ratio;
            ++cases;
        }
        detail += std::string(detail.empty() ? "" : ", ") + to_string(d) + " " + fmt("%.3f", dsum / 100);
    }
    const double mean = ratio_sum / cases;
    return {bad == 0 && mean < 1.0, std::to_string(bad) + " bad neighbours, mean pruned/naive " + fmt("%.3f", mean) +
                                        " (" + detail + "), " + std::to_string(fallbacks) + " fallbacks"};
}

// 10: the command-line pipeline reruns byte for byte, whatever the worker count.
Outcome determinism() {
    cli::Scratch s("accept");
    using cli::run;
    using cli::slurp;
    bool ok = true;
    std::vector<std::string> diffs;
    auto same = [&](const std::string& what, const std::string& a, const std::string& b) {
        if (a != b || a.empty()) ok = false, diffs.push_back(what);
    };
    for (const char* dir : {"g1", "g2"})
        ok = ok && run({"generate", "--n", "8", "--contexts", "25", "--noise", "0.05", "--seed", "11", "--out", s / dir},
                       s / (std::string(dir) + "_log")) == 0;
    for (const char* f : {"truth.json", "dataset.jsonl"}) same(f, slurp(s / "g1/" + f), slurp(s / "g2/" + f));
    same("generate manifest", cli::drop_keys(slurp(s / "g1/generate.manifest.json"), {"config"}),
         cli::drop_keys(slurp(s / "g2/generate.manifest.json"), {"config"}));
    auto learn = [&](const std::string& dir, const std::string& workers) {
        return run({"learn", "--data", s / "g1/dataset.jsonl", "--max-steps", "3000", "--seed", "5", "--workers",
                    workers, "--out", s / dir},
                   s / (dir + "_log"));
    };
    ok = ok && learn("l1", "1") == 0 && learn("l4", "4") == 0 && learn("l1b", "1") == 0;
    same("learned model (1 vs 4 workers)", slurp(s / "l1/learned.json"), slurp(s / "l4/learned.json"));
    same("learned model (rerun)", slurp(s / "l1/learned.json"), slurp(s / "l1b/learned.json"));
    same("trace", cli::drop_columns(slurp(s / "l1/trace.csv"), {"elapsed_ms"}),
         cli::drop_columns(slurp(s / "l4/trace.csv"), {"elapsed_ms"}));
    auto manifest = [&](const std::string& dir) {
        auto j = nlohmann::json::parse(slurp(s / (dir + "/learn.manifest.json")));
        j.erase("elapsed_s");
        j["config"].erase("output_dir");
        j["config"]["learner"].erase("workers");
        return j.dump(1);
    };
    same("learn manifest", manifest("l1"), manifest("l4"));
    for (const char* dir : {"l1", "l4"})
        ok = ok && run({"evaluate", "--learned", s / (std::string(dir) + "/learned.json"), "--truth",
                        s / "g1/truth.json", "--data", s / "g1/dataset.jsonl", "--csv",
                        s / (std::string(dir) + "/results.csv")},
                       s / (std::string(dir) + "_eval")) == 0;
    same("evaluation row", cli::drop_columns(slurp(s / "l1/results.csv"), {"elapsed"}),
         cli::drop_columns(slurp(s / "l4/results.csv"), {"elapsed"}));
    std::string detail = "generate/learn/evaluate outputs identical across reruns and 1 vs 4 workers";
    if (!ok) {
        detail = "differences:";
        for (const auto& d : diffs) detail += " [" + d + "]";
    }
    return {ok, detail};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>> kCriteria = {
    {"oracle equivalence", oracle_equivalence},
    {"worked MILP example", golden},
    {"tiny-instance MILP soundness", milp_soundness},
    {"realizable SLS recovery", sls_recovery},
    {"negative-type ordering", neg_type},
    {"noise monotonicity", noise},
    {"regret bound", regret_bound},
    {"representativeness example", representativeness_example},
    {"neighbourhood pruning", pruning},
    {"determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
    if (which.empty())
        for (int i = 1; i <= static_cast<int>(kCriteria.size()); ++i) which.push_back(i);
    int failed = 0;
    for (int k : which) {
        if (k < 1 || k > static_cast<int>(kCriteria.size())) {
            std::fprintf(stderr, "no criterion %d\n", k);
            return 2;
        }
        const auto& [name, fn] = kCriteria[k - 1];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %d (%s): %s - %s [%.1f s]\n", k, name.c_str(), o.pass ? "PASS" : "FAIL",
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
