#include "ctxsat/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ctxsat/io.hpp"
#include "ctxsat/kernels.hpp"

namespace ctxsat {

namespace {

constexpr int kModelRetries = 1000;
constexpr int kContextRetries = 10000;
constexpr int kDrawsPerExample = 10000;

double unit_weight(Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return 1.0 - u(rng);  // (0, 1]
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void GenSpec::validate() const {
    if (n < 1 || n > kMaxVars) throw ArgumentError("n must lie in [1, " + std::to_string(kMaxVars) + "]");
    if (m_hard < 0 || m_soft < 0) throw ArgumentError("constraint counts must be non-negative");
    if (clause_len() < 1 || clause_len() > n) throw ArgumentError("max_clause_len must lie in [1, n]");
    if (ctx_len() < 0 || ctx_len() > n) throw ArgumentError("context_len must lie in [0, n]");
    if (context_count < 0) throw ArgumentError("context_count must be non-negative");
    if (pos_per_context < 0 || neg_per_context < 0) throw ArgumentError("example counts must be non-negative");
    if (!(neg_split >= 0.0 && neg_split <= 1.0)) throw ArgumentError("neg_split must lie in [0,1]");
    if (!(noise_p >= 0.0 && noise_p < 0.5)) throw ArgumentError("noise_p must lie in [0, 0.5)");
}

std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

long double clause_space_size(int n, int max_len) {
    long double total = 0, binom = 1;
    for (int k = 1; k <= max_len && k <= n; ++k) {
        binom = binom * (n - k + 1) / k;
        total += binom * std::pow(2.0L, k);
    }
    return total;
}

Clause random_clause(int n, int max_len, Rng& rng) {
    // Length k is drawn with weight C(n,k) 2^k, so the clause is uniform over all clauses of length <= max_len.
    std::vector<double> weights;
    long double binom = 1;
    for (int k = 1; k <= max_len; ++k) {
        binom = binom * (n - k + 1) / k;
        weights.push_back(static_cast<double>(binom * std::pow(2.0L, k)));
    }
    std::discrete_distribution<int> len_dist(weights.begin(), weights.end());
    const int len = len_dist(rng) + 1;
    std::vector<int> vars(n);
    for (int v = 0; v < n; ++v) vars[v] = v + 1;
    std::bernoulli_distribution coin(0.5);
    std::vector<Literal> lits;
    for (int i = 0; i < len; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(vars[i], vars[pick(rng)]);
        lits.push_back({vars[i], coin(rng)});
    }
    return Clause(std::move(lits));
}

MaxSatModel gen_model(const GenSpec& spec, Rng& rng) {
    spec.validate();
    const int m = spec.m_hard + spec.m_soft;
    if (static_cast<long double>(m) > clause_space_size(spec.n, spec.clause_len()))
        throw ArgumentError("requested " + std::to_string(m) + " distinct clauses but only " +
                            std::to_string(static_cast<long long>(clause_space_size(spec.n, spec.clause_len()))) +
                            " exist");
    for (int attempt = 0; attempt < kModelRetries; ++attempt) {
        std::set<std::vector<int>> seen;
        std::vector<Constraint> cons;
        while (static_cast<int>(cons.size()) < m) {
            Clause c = random_clause(spec.n, spec.clause_len(), rng);
            if (!seen.insert(c.to_dimacs()).second) continue;
            const bool hard = static_cast<int>(cons.size()) < spec.m_hard;
            cons.push_back({std::move(c), hard, hard ? 0.0 : unit_weight(rng)});
        }
        MaxSatModel model(spec.n, std::move(cons));
        const auto hard = model.hard_clauses();
        if (model_count(spec.n, hard, Context{}, spec.solver) > 0) return model;
    }
    throw GenerationError("no satisfiable hard-constraint set found within the retry budget");
}

std::vector<Context> gen_contexts(const MaxSatModel& model, const GenSpec& spec, Rng& rng) {
    spec.validate();
    const SolveResult global = solve(model, Context{}, spec.solver);
    if (!global.feasible) throw ArgumentError("gen_contexts needs a feasible model");
    const auto global_opt = optimum_set(model, Context{}, spec.solver);
    const int len = spec.ctx_len();

    std::vector<Context> out;
    std::set<Context> seen, rejected;
    long double space = 1;
    for (int k = 1; k <= len; ++k) space = space * (spec.n - k + 1) / k * 2;
    int duplicate = 0, infeasible = 0, no_impact = 0, no_negative = 0;
    std::vector<int> vars(spec.n);
    std::bernoulli_distribution coin(0.5);
    for (int attempt = 0; static_cast<int>(out.size()) < spec.context_count; ++attempt) {
        if (attempt >= kContextRetries * std::max(1, spec.context_count) ||
            static_cast<long double>(seen.size() + rejected.size()) >= space)
            throw GenerationError("context retry budget exhausted after " + std::to_string(out.size()) + " of " +
                                  std::to_string(spec.context_count) + " contexts (duplicate " +
                                  std::to_string(duplicate) + ", infeasible " + std::to_string(infeasible) +
                                  ", no impact " + std::to_string(no_impact) + ", no negative " +
                                  std::to_string(no_negative) + ")");
        for (int v = 0; v < spec.n; ++v) vars[v] = v + 1;
        std::vector<Literal> lits;
        for (int i = 0; i < len; ++i) {
            std::uniform_int_distribution<int> pick(i, spec.n - 1);
            std::swap(vars[i], vars[pick(rng)]);
            lits.push_back({vars[i], coin(rng)});
        }
        Context psi(std::move(lits));
        if (seen.count(psi) || rejected.count(psi)) {
            ++duplicate;
            continue;
        }
        rejected.insert(psi);  // moved to `seen` on acceptance
        const SolveResult local = solve(model, psi, spec.solver);
        if (!local.feasible) {
            ++infeasible;
            continue;
        }
        const bool value_moved = std::abs(local.value - global.value) > kOptimumTol;
        const bool optima_excluded = std::none_of(global_opt.begin(), global_opt.end(),
                                                  [&](const Assignment& a) { return satisfies_context(a, psi); });
        if (!value_moved && !optima_excluded) {
            ++no_impact;
            continue;
        }
        const auto opt = optimum_set(model, psi, spec.solver);
        if (opt.size() == ContextSpace(spec.n, psi, spec.solver).size()) {
            ++no_negative;
            continue;
        }
        rejected.erase(psi);
        seen.insert(psi);
        out.push_back(std::move(psi));
    }
    return out;
}

PositiveSample sample_positives(const MaxSatModel& model, const Context& psi, int k, Rng& rng,
                                const SolverOptions& opts) {
    if (k < 0) throw ArgumentError("k must be non-negative");
    const auto opt = optimum_set(model, psi, opts);
    if (opt.empty()) throw GenerationError("context " + psi.to_string() + " is infeasible");
    const std::size_t cap = std::min(opt.size(), static_cast<std::size_t>(10) * static_cast<std::size_t>(k));
    PositiveSample out;
    // Reservoir sampling over the first `cap` optima in enumeration order.
    for (std::size_t i = 0; i < cap; ++i) {
        if (out.assignments.size() < static_cast<std::size_t>(k)) {
            out.assignments.push_back(opt[i]);
            continue;
        }
        std::uniform_int_distribution<std::size_t> pick(0, i);
        const std::size_t r = pick(rng);
        if (r < static_cast<std::size_t>(k)) out.assignments[r] = opt[i];
    }
    out.truncated = out.assignments.size() < static_cast<std::size_t>(k);
    return out;
}

NegativeSample sample_negatives(const MaxSatModel& model, const Context& psi, int k, double split, Rng& rng,
                                const SolverOptions& opts) {
    if (k < 0) throw ArgumentError("k must be non-negative");
    if (!(split >= 0.0 && split <= 1.0)) throw ArgumentError("split must lie in [0,1]");
    const ContextSpace space(model.n(), psi, opts);
    const SolveResult s = solve(model, psi, opts);
    if (!s.feasible) throw GenerationError("context " + psi.to_string() + " is infeasible");

    std::vector<std::uint32_t> codes;
    space.codes(codes);
    std::vector<double> vals(codes.size());
    std::vector<std::uint8_t> feas(codes.size());
    kernels::evaluate_block(kernels::compile(model), codes, vals.data(), feas.data());
    std::vector<ExampleKind> kind_of(codes.size(), ExampleKind::Positive);
    std::vector<std::uint32_t> infeasible, suboptimal;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (!feas[i]) {
            kind_of[i] = ExampleKind::Infeasible;
            infeasible.push_back(codes[i]);
        } else if (vals[i] < s.value - kOptimumTol) {
            kind_of[i] = ExampleKind::Suboptimal;
            suboptimal.push_back(codes[i]);
        }
    }
    NegativeSample out;
    int n_inf = static_cast<int>(std::ceil(k * split - 1e-12));
    int n_sub = k - n_inf;
    if (infeasible.empty() && n_inf > 0) {
        out.infeasible_fallback = true;
        n_sub += n_inf;
        n_inf = 0;
    }
    if (suboptimal.empty() && n_sub > 0) {
        out.suboptimal_fallback = true;
        n_inf += n_sub;
        n_sub = 0;
    }
    if ((n_inf > 0 && infeasible.empty()) || (n_sub > 0 && suboptimal.empty()))
        throw GenerationError("context " + psi.to_string() + " admits no negative examples");

    std::uniform_int_distribution<std::uint64_t> draw(0, codes.size() - 1);
    auto take = [&](ExampleKind want, const std::vector<std::uint32_t>& pool) {
        for (int d = 0; d < kDrawsPerExample; ++d) {
            const auto i = draw(rng);
            if (kind_of[i] == want) {
                out.assignments.emplace_back(model.n(), codes[i]);
                out.kinds.push_back(want);
                return;
            }
        }
        // Budget exhausted: draw directly from the kind's pool (same conditional distribution).
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        out.assignments.emplace_back(model.n(), pool[pick(rng)]);
        out.kinds.push_back(want);
    };
    for (int i = 0; i < n_inf; ++i) take(ExampleKind::Infeasible, infeasible);
    for (int i = 0; i < n_sub; ++i) take(ExampleKind::Suboptimal, suboptimal);
    return out;
}

Dataset add_noise(const Dataset& data, double p, std::uint64_t seed) {
    if (!(p >= 0.0 && p < 0.5)) throw ArgumentError("noise p must lie in [0, 0.5)");
    Dataset out = data;
    Rng rng(seed);
    std::bernoulli_distribution flip(p);
    std::size_t flipped = 0;
    for (auto& e : out.examples)
        if (flip(rng)) {
            e.label = !e.label;
            ++flipped;
        }
    out.metadata["noise_p"] = fmt_double(p);
    out.metadata["noise_seed"] = std::to_string(seed);
    out.metadata["noise_flipped"] = std::to_string(flipped);
    return out;
}

MaxSatModel import_benchmark(const std::string& cnf_text, int keep, double soft_fraction, Rng& rng,
                             const SolverOptions& opts) {
    const CnfFormula f = parse_dimacs_cnf(cnf_text);
    if (keep < 0 || keep > static_cast<int>(f.clauses.size()))
        throw ArgumentError("keep=" + std::to_string(keep) + " exceeds the " + std::to_string(f.clauses.size()) +
                            " clauses available");
    if (!(soft_fraction >= 0.0 && soft_fraction <= 1.0)) throw ArgumentError("soft_fraction must lie in [0,1]");
    const int n_soft = static_cast<int>(std::floor(keep * soft_fraction + 1e-12));
    std::vector<std::size_t> idx(f.clauses.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (int attempt = 0; attempt < kModelRetries; ++attempt) {
        for (int i = 0; i < keep; ++i) {
            std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), idx.size() - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }
        std::vector<Constraint> cons;
        for (int i = 0; i < keep; ++i) {
            const bool soft = i < n_soft;
            cons.push_back({f.clauses[idx[i]], !soft, soft ? unit_weight(rng) : 0.0});
        }
        MaxSatModel model(f.n, std::move(cons));
        if (model_count(f.n, model.hard_clauses(), Context{}, opts) > 0) return model;
    }
    throw GenerationError("no satisfiable hard subset found within the retry budget");
}

GeneratedInstance generate_instance(const GenSpec& spec, int max_redraws) {
    spec.validate();
    Rng model_rng(split_seed(spec.seed, 0));
    Rng data_rng(split_seed(spec.seed, 1));
    std::string last;
    for (int redraw = 0; redraw <= max_redraws; ++redraw) {
        MaxSatModel model = gen_model(spec, model_rng);
        try {
            Dataset data = build_dataset(model, spec, data_rng);
            data.metadata["model_redraws"] = std::to_string(redraw);
            return {std::move(model), std::move(data), redraw};
        } catch (const GenerationError& e) {
            last = e.what();
        }
    }
    throw GenerationError("no ground truth admitted the requested contexts after " + std::to_string(max_redraws) +
                          " redraws; last failure: " + last);
}

Dataset build_dataset(const MaxSatModel& model, const GenSpec& spec, Rng& rng) {
    spec.validate();
    if (model.n() != spec.n) throw ArgumentError("model n does not match the generation spec");
    const auto contexts = gen_contexts(model, spec, rng);
    const std::uint64_t base = rng();
    std::vector<ContextualExample> examples;
    int truncated = 0, kind_fallbacks = 0;
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        Rng local(split_seed(base, i));
        const auto& psi = contexts[i];
        const auto pos = sample_positives(model, psi, spec.pos_per_context, local, spec.solver);
        const auto neg = sample_negatives(model, psi, spec.neg_per_context, spec.neg_split, local, spec.solver);
        truncated += pos.truncated;
        kind_fallbacks += neg.infeasible_fallback + neg.suboptimal_fallback;
        for (const auto& a : pos.assignments) examples.emplace_back(psi, a, true, ExampleKind::Positive);
        for (std::size_t t = 0; t < neg.assignments.size(); ++t)
            examples.emplace_back(psi, neg.assignments[t], false, neg.kinds[t]);
    }
    std::map<std::string, std::string> meta = {
        {"generator", "ctxsat-datagen"},
        {"seed", std::to_string(spec.seed)},
        {"n", std::to_string(spec.n)},
        {"m_hard", std::to_string(model.hard_count())},
        {"m_soft", std::to_string(model.soft_count())},
        {"max_clause_len", std::to_string(spec.clause_len())},
        {"contexts", std::to_string(contexts.size())},
        {"context_len", std::to_string(spec.ctx_len())},
        {"pos_per_context", std::to_string(spec.pos_per_context)},
        {"neg_per_context", std::to_string(spec.neg_per_context)},
        {"neg_split", fmt_double(spec.neg_split)},
        {"truncated_positive_contexts", std::to_string(truncated)},
        {"negative_kind_fallbacks", std::to_string(kind_fallbacks)},
    };
    Dataset data(model.n(), std::move(examples), std::move(meta));
    if (spec.noise_p > 0.0) return add_noise(data, spec.noise_p, split_seed(base, contexts.size()));
    data.metadata["noise_p"] = "0";
    return data;
}

}  // namespace ctxsat
