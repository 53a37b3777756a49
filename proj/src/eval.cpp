#include "ctxsat/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

#include "ctxsat/sls.hpp"

namespace ctxsat {

namespace {

std::optional<OptimalRegion> region_or_empty(const MaxSatModel& m, const SolverOptions& opts) {
    if (!solve(m, Context(), opts).feasible) return std::nullopt;
    return optimal_region_formula(m, opts);
}

// Exact-pattern clause split of one optimal subset.
void split(const OptimalRegion& r, const std::vector<int>& subset, std::vector<Clause>& sat,
           std::vector<Clause>& unsat) {
    std::size_t next = 0;
    for (int j = 0; j < static_cast<int>(r.soft.size()); ++j) {
        if (next < subset.size() && subset[next] == j) {
            sat.push_back(r.soft[j]);
            ++next;
        } else {
            unsat.push_back(r.soft[j]);
        }
    }
}

// MC(theta_a and theta_b); the subsets of one region are disjoint cells, so counts add.
std::uint64_t joint_count(const OptimalRegion& a, const OptimalRegion& b, const SolverOptions& opts) {
    std::uint64_t total = 0;
    for (const auto& sa : a.optimal_subsets)
        for (const auto& sb : b.optimal_subsets) {
            std::vector<Clause> sat = a.hard, unsat;
            sat.insert(sat.end(), b.hard.begin(), b.hard.end());
            split(a, sa, sat, unsat);
            split(b, sb, sat, unsat);
            total += count_with_falsified(a.n, sat, unsat, opts);
        }
    return total;
}

void check_pair(const MaxSatModel& a, const MaxSatModel& b, const SolverOptions& opts) {
    if (a.n() != b.n()) throw ArgumentError("models disagree on n");
    if (a.n() > opts.enumeration_limit)
        throw CapacityError("n = " + std::to_string(a.n()) + " exceeds the enumeration limit " +
                            std::to_string(opts.enumeration_limit));
}

double soft_value(const MaxSatModel& m, const Assignment& a) { return evaluate(m, a); }

}  // namespace

std::string format_metric(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

double global_accuracy(const MaxSatModel& learned, const MaxSatModel& truth, const SolverOptions& opts) {
    check_pair(learned, truth, opts);
    const auto rl = region_or_empty(learned, opts);
    const auto rt = region_or_empty(truth, opts);
    const std::uint64_t total = std::uint64_t{1} << learned.n();
    const std::uint64_t cl = rl ? rl->count(opts) : 0;
    const std::uint64_t ct = rt ? rt->count(opts) : 0;
    const std::uint64_t both = (rl && rt) ? joint_count(*rl, *rt, opts) : 0;
    const std::uint64_t neither = total - cl - ct + both;
    return static_cast<double>(both + neither) / static_cast<double>(total);
}

double global_accuracy_enumerated(const MaxSatModel& learned, const MaxSatModel& truth, const SolverOptions& opts) {
    check_pair(learned, truth, opts);
    const auto sl = solve(learned, Context(), opts);
    const auto st = solve(truth, Context(), opts);
    const std::uint64_t total = std::uint64_t{1} << learned.n();
    std::uint64_t agree = 0;
    for (std::uint64_t code = 0; code < total; ++code) {
        const Assignment a(learned.n(), code);
        const bool pl = sl.feasible && is_feasible(learned, Context(), a) &&
                        evaluate(learned, a) >= sl.value - kOptimumTol;
        const bool pt = st.feasible && is_feasible(truth, Context(), a) &&
                        evaluate(truth, a) >= st.value - kOptimumTol;
        agree += pl == pt;
    }
    return static_cast<double>(agree) / static_cast<double>(total);
}

InfeasibilityResult infeasibility(const MaxSatModel& learned, const MaxSatModel& truth, const SolverOptions& opts) {
    check_pair(learned, truth, opts);
    InfeasibilityResult out;
    const auto rl = region_or_empty(learned, opts);
    if (!rl) {
        out.degenerate = true;
        out.value = 1.0;
        return out;
    }
    out.optima = rl->count(opts);
    std::uint64_t feasible = 0;
    const auto truth_hard = truth.hard_clauses();
    for (const auto& s : rl->optimal_subsets) {
        std::vector<Clause> sat = rl->hard, unsat;
        sat.insert(sat.end(), truth_hard.begin(), truth_hard.end());
        split(*rl, s, sat, unsat);
        feasible += count_with_falsified(rl->n, sat, unsat, opts);
    }
    out.violating = out.optima - feasible;
    out.value = static_cast<double>(out.violating) / static_cast<double>(out.optima);
    return out;
}

RegretResult regret(const MaxSatModel& learned, const MaxSatModel& truth, std::size_t k, std::mt19937_64& rng,
                    const SolverOptions& opts) {
    check_pair(learned, truth, opts);
    RegretResult out;
    const auto st = solve(truth, Context(), opts);
    if (!st.feasible) {
        out.flags.push_back("truth infeasible");
        return out;
    }
    out.normalizer = st.value;
    const auto optima = optimum_set(learned, Context(), opts);
    if (optima.empty()) {
        out.flags.push_back("learned infeasible");
        return out;
    }
    std::vector<Assignment> pool;
    for (const auto& a : optima)
        if (is_feasible(truth, Context(), a)) pool.push_back(a);
    out.pool = pool.size();
    out.coverage = static_cast<double>(pool.size()) / static_cast<double>(optima.size());
    if (pool.empty()) {
        out.flags.push_back("no truth-feasible learned optimum");
        return out;
    }
    std::vector<Assignment> chosen;
    if (k == 0 || k >= pool.size()) chosen = pool;
    else std::sample(pool.begin(), pool.end(), std::back_inserter(chosen), k, rng);
    out.samples = chosen.size();
    if (out.normalizer <= 0.0) {
        out.flags.push_back("zero regret normaliser");
        out.mean = 0.0;
        return out;
    }
    double sum = 0.0;
    for (const auto& a : chosen) sum += std::max(0.0, st.value - soft_value(truth, a));
    out.mean = sum / static_cast<double>(chosen.size()) / out.normalizer;
    return out;
}

Representativeness representativeness(const MaxSatModel& h, const MaxSatModel& h_star,
                                      const std::vector<Context>& contexts, const Context& target,
                                      const SolverOptions& opts) {
    check_pair(h, h_star, opts);
    // Classification tables per context, built once.
    auto positives = [&](const MaxSatModel& m, const Context& psi) {
        const auto opt = optimum_set(m, psi, opts);
        return std::set<Assignment>(opt.begin(), opt.end());
    };
    const auto h_t = positives(h, target), s_t = positives(h_star, target);
    std::vector<std::set<Assignment>> h_c, s_c;
    for (const auto& c : contexts) {
        h_c.push_back(positives(h, c));
        s_c.push_back(positives(h_star, c));
    }
    Representativeness out;
    ContextSpace space(h.n(), target, opts);
    std::size_t best = std::numeric_limits<std::size_t>::max();
    space.for_each_chunk([&](std::span<const std::uint32_t> codes) {
        for (auto code : codes) {
            const Assignment x(h.n(), code);
            const bool errs = h_t.count(x) != s_t.count(x);
            std::size_t count = 0;
            for (std::size_t i = 0; i < contexts.size(); ++i) {
                if (!satisfies_context(x, contexts[i])) continue;
                if (!errs || h_c[i].count(x) != s_c[i].count(x)) ++count;
            }
            out.counts.emplace(x, count);
            if (count < best) best = count, out.weakest = x;
        }
    });
    out.representative = best > 0;
    return out;
}

RegretBound regret_bound_check(const MaxSatModel& h, const MaxSatModel& truth, const Context& psi,
                               std::optional<double> r_max, const SolverOptions& opts) {
    check_pair(h, truth, opts);
    RegretBound out;
    out.r_max = r_max.value_or(truth.soft_weight_l1());
    if (out.r_max < 0.0 || !std::isfinite(out.r_max)) throw ArgumentError("r_max must be finite and non-negative");
    const ContextSpace space(h.n(), psi, opts);
    out.eta = 1.0 / static_cast<double>(space.size());
    const auto opt_h = optimum_set(h, psi, opts);
    const auto opt_t = optimum_set(truth, psi, opts);
    out.opt_count = opt_h.size();
    const std::set<Assignment> pos_h(opt_h.begin(), opt_h.end()), pos_t(opt_t.begin(), opt_t.end());
    std::uint64_t errors = 0;
    space.for_each_chunk([&](std::span<const std::uint32_t> codes) {
        for (auto code : codes) {
            const Assignment x(h.n(), code);
            errors += pos_h.count(x) != pos_t.count(x);
        }
    });
    out.risk = static_cast<double>(errors) * out.eta;
    if (opt_h.empty()) {
        out.degenerate = true;
        out.flags.push_back("h has no optimum in context");
        return out;
    }
    if (opt_t.empty()) out.flags.push_back("truth has no optimum in context");
    const double best = opt_t.empty() ? 0.0 : evaluate(truth, opt_t.front());
    double sum = 0.0;
    for (const auto& x : opt_h) {
        if (opt_t.empty() || !is_feasible(truth, psi, x)) sum += out.r_max;
        else sum += std::max(0.0, best - evaluate(truth, x));
    }
    out.lhs = sum / static_cast<double>(opt_h.size());
    out.rhs = (truth.soft_weight_l1() + out.r_max) / (out.eta * static_cast<double>(opt_h.size())) * out.risk;
    out.holds = out.lhs <= out.rhs + 1e-9;
    return out;
}

std::vector<std::pair<std::string, std::string>> EvalReport::to_record() const {
    std::string joined;
    for (const auto& f : flags) joined += (joined.empty() ? "" : ";") + f;
    return {{"score", format_metric(training_score_fraction)},
            {"accuracy", format_metric(global_accuracy)},
            {"infeasibility", format_metric(infeasibility)},
            {"regret", regret_mean ? format_metric(*regret_mean) : "NA"},
            {"regret_normalizer", format_metric(regret_normalizer)},
            {"regret_coverage", format_metric(regret_coverage)},
            {"regret_samples", std::to_string(sample_count)},
            {"flags", joined}};
}

EvalReport report(const MaxSatModel& learned, const MaxSatModel& truth, const Dataset& data,
                  const EvalConfig& config) {
    check_pair(learned, truth, config.solver);
    if (data.n != learned.n()) throw ArgumentError("dataset and models disagree on n");
    EvalReport r;
    r.training_score_fraction =
        data.examples.empty() ? 1.0 : static_cast<double>(score(learned, data, config.solver)) / data.size();
    r.global_accuracy = global_accuracy(learned, truth, config.solver);
    const auto inf = infeasibility(learned, truth, config.solver);
    r.infeasibility = inf.value;
    if (inf.degenerate) r.flags.push_back("learned model infeasible");
    std::mt19937_64 rng(config.seed);
    const auto reg = regret(learned, truth, config.regret_samples, rng, config.solver);
    r.regret_mean = reg.mean;
    r.regret_normalizer = reg.normalizer;
    r.regret_coverage = reg.coverage;
    r.sample_count = reg.samples;
    for (const auto& f : reg.flags)
        if (std::find(r.flags.begin(), r.flags.end(), f) == r.flags.end() && f != "learned infeasible")
            r.flags.push_back(f);
    return r;
}

}  // namespace ctxsat
