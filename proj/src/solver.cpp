#include "ctxsat/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ctxsat/kernels.hpp"

namespace ctxsat {

namespace {

void check_limit(int n, const SolverOptions& opts) {
    if (opts.enumeration_limit < 0 || opts.enumeration_limit > kMaxEnumerationLimit)
        throw ArgumentError("enumeration limit must lie in [0, " + std::to_string(kMaxEnumerationLimit) + "]");
    if (n > opts.enumeration_limit)
        throw CapacityError("n=" + std::to_string(n) + " exceeds the enumeration limit " +
                            std::to_string(opts.enumeration_limit));
}

void check_dims(const MaxSatModel& model, const Assignment& a) {
    if (a.n() != model.n())
        throw StructuralError("assignment width " + std::to_string(a.n()) + " does not match model n=" +
                              std::to_string(model.n()));
}

struct Scan {
    bool feasible = false;
    double value = -std::numeric_limits<double>::infinity();
};

Scan scan_max(const kernels::CompiledModel& cm, const ContextSpace& space) {
    Scan out;
    std::vector<double> vals;
    std::vector<std::uint8_t> feas;
    space.for_each_chunk([&](std::span<const std::uint32_t> codes) {
        vals.resize(codes.size());
        feas.resize(codes.size());
        kernels::evaluate_block(cm, codes, vals.data(), feas.data());
        for (std::size_t i = 0; i < codes.size(); ++i)
            if (feas[i] && vals[i] > out.value) {
                out.value = vals[i];
                out.feasible = true;
            }
    });
    return out;
}

// Calls fn(code) for every feasible code at value >= threshold, in order; stops when fn returns false.
template <typename Fn>
void scan_at_least(const kernels::CompiledModel& cm, const ContextSpace& space, double threshold, Fn&& fn) {
    std::vector<double> vals;
    std::vector<std::uint8_t> feas;
    bool go = true;
    space.for_each_chunk([&](std::span<const std::uint32_t> codes) {
        if (!go) return;
        vals.resize(codes.size());
        feas.resize(codes.size());
        kernels::evaluate_block(cm, codes, vals.data(), feas.data());
        for (std::size_t i = 0; i < codes.size() && go; ++i)
            if (feas[i] && vals[i] >= threshold) go = fn(codes[i]);
    });
}

}  // namespace

ContextSpace::ContextSpace(int n, const Context& psi, const SolverOptions& opts) : n_(n) {
    check_limit(n, opts);
    if (psi.max_var() > n) throw StructuralError("context mentions a variable above n");
    std::uint32_t fixed_mask = 0;
    for (const auto& l : psi.literals()) {
        const auto bit = static_cast<std::uint32_t>(var_bit(n, l.var));
        fixed_mask |= bit;
        if (l.positive) fixed_ |= bit;
    }
    const std::uint32_t all = n == 32 ? ~0u : ((1u << n) - 1u);
    free_ = all & ~fixed_mask;
    free_count_ = n - static_cast<int>(psi.size());
}

void ContextSpace::codes(std::vector<std::uint32_t>& out) const {
    out.reserve(out.size() + size());
    for_each_chunk([&](std::span<const std::uint32_t> c) { out.insert(out.end(), c.begin(), c.end()); });
}

std::uint64_t ContextSpace::index_of(std::uint32_t code) const {
    std::uint64_t idx = 0;
    int k = 0;
    for (int b = 0; b < n_; ++b) {
        if (!((free_ >> b) & 1u)) continue;
        idx |= static_cast<std::uint64_t>((code >> b) & 1u) << k;
        ++k;
    }
    return idx;
}

double evaluate(const MaxSatModel& model, const Assignment& a) {
    check_dims(model, a);
    double v = 0.0;
    for (const auto& c : model.constraints())
        if (!c.hard && satisfies_clause(a, c.clause)) v += c.weight;
    return v;
}

bool is_feasible(const MaxSatModel& model, const Context& psi, const Assignment& a) {
    check_dims(model, a);
    if (!satisfies_context(a, psi)) return false;
    for (const auto& c : model.constraints())
        if (c.hard && !satisfies_clause(a, c.clause)) return false;
    return true;
}

SolveResult solve(const MaxSatModel& model, const Context& psi, const SolverOptions& opts) {
    const ContextSpace space(model.n(), psi, opts);
    const auto cm = kernels::compile(model);
    const Scan s = scan_max(cm, space);
    SolveResult r;
    if (!s.feasible) return r;
    r.feasible = true;
    scan_at_least(cm, space, s.value - kOptimumTol, [&](std::uint32_t code) {
        r.witness = Assignment(model.n(), code);
        return false;
    });
    r.value = evaluate(model, *r.witness);
    return r;
}

std::vector<Assignment> optimum_set(const MaxSatModel& model, const Context& psi, const SolverOptions& opts) {
    const ContextSpace space(model.n(), psi, opts);
    const auto cm = kernels::compile(model);
    const Scan s = scan_max(cm, space);
    std::vector<Assignment> out;
    if (!s.feasible) return out;
    scan_at_least(cm, space, s.value - kOptimumTol, [&](std::uint32_t code) {
        out.emplace_back(model.n(), code);
        return true;
    });
    return out;
}

Classification classify_checked(const MaxSatModel& model, const Context& psi, const Assignment& a,
                                const SolverOptions& opts) {
    check_dims(model, a);
    Classification c;
    if (!satisfies_context(a, psi)) {
        c.context_violated = true;
        return c;
    }
    const ContextSpace space(model.n(), psi, opts);
    const Scan s = scan_max(kernels::compile(model), space);
    if (!s.feasible) {
        c.context_infeasible = true;
        return c;
    }
    c.positive = is_feasible(model, psi, a) && evaluate(model, a) >= s.value - kOptimumTol;
    return c;
}

bool classify(const MaxSatModel& model, const Context& psi, const Assignment& a, const SolverOptions& opts) {
    return classify_checked(model, psi, a, opts).positive;
}

std::uint64_t model_count(int n, std::span<const Clause> clauses, const Context& psi, const SolverOptions& opts) {
    const ContextSpace space(n, psi, opts);
    const auto cm = kernels::compile_hard(n, clauses);
    std::uint64_t count = 0;
    std::vector<double> vals;
    std::vector<std::uint8_t> feas;
    space.for_each_chunk([&](std::span<const std::uint32_t> codes) {
        vals.resize(codes.size());
        feas.resize(codes.size());
        kernels::evaluate_block(cm, codes, vals.data(), feas.data());
        for (std::size_t i = 0; i < codes.size(); ++i) count += feas[i];
    });
    return count;
}

std::uint64_t count_with_falsified(int n, std::span<const Clause> sat, std::span<const Clause> unsat,
                                   const SolverOptions& opts) {
    // Falsifying a clause fixes every one of its variables to the opposite polarity.
    std::set<Literal> forced;
    for (const auto& c : unsat)
        for (const auto& l : c.literals()) {
            if (forced.count(l)) return 0;
            forced.insert(l.negated());
        }
    return model_count(n, sat, Context(std::vector<Literal>(forced.begin(), forced.end())), opts);
}

bool OptimalRegion::contains(const Assignment& a) const {
    if (a.n() != n) throw StructuralError("assignment width does not match region");
    for (const auto& c : hard)
        if (!satisfies_clause(a, c)) return false;
    std::vector<int> pattern;
    for (int j = 0; j < static_cast<int>(soft.size()); ++j)
        if (satisfies_clause(a, soft[j])) pattern.push_back(j);
    return std::find(optimal_subsets.begin(), optimal_subsets.end(), pattern) != optimal_subsets.end();
}

std::uint64_t OptimalRegion::count(const SolverOptions& opts) const {
    std::uint64_t total = 0;
    for (const auto& subset : optimal_subsets) {
        std::vector<Clause> sat = hard, unsat;
        std::size_t next = 0;
        for (int j = 0; j < static_cast<int>(soft.size()); ++j) {
            if (next < subset.size() && subset[next] == j) {
                sat.push_back(soft[j]);
                ++next;
            } else {
                unsat.push_back(soft[j]);
            }
        }
        total += count_with_falsified(n, sat, unsat, opts);
    }
    return total;
}

OptimalRegion optimal_region_formula(const MaxSatModel& model, const SolverOptions& opts) {
    OptimalRegion r;
    r.n = model.n();
    std::vector<double> w;
    for (const auto& c : model.constraints()) {
        if (c.hard) {
            r.hard.push_back(c.clause);
        } else {
            r.soft.push_back(c.clause);
            w.push_back(c.weight);
        }
    }
    if (r.soft.size() > static_cast<std::size_t>(kMaxRegionSoft))
        throw CapacityError(std::to_string(r.soft.size()) + " soft constraints exceed the subset limit " +
                            std::to_string(kMaxRegionSoft));
    const SolveResult s = solve(model, Context{}, opts);
    if (!s.feasible) throw ArgumentError("optimal region of a globally infeasible model is undefined");
    r.optimum = s.value;
    const std::uint32_t subsets = 1u << w.size();
    for (std::uint32_t mask = 0; mask < subsets; ++mask) {
        double sum = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j)
            if ((mask >> j) & 1u) sum += w[j];
        if (std::abs(sum - r.optimum) > kOptimumTol) continue;
        std::vector<int> idx;
        for (std::size_t j = 0; j < w.size(); ++j)
            if ((mask >> j) & 1u) idx.push_back(static_cast<int>(j));
        r.optimal_subsets.push_back(std::move(idx));
    }
    std::sort(r.optimal_subsets.begin(), r.optimal_subsets.end());
    return r;
}

}  // namespace ctxsat
