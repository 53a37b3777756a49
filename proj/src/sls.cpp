#include "ctxsat/sls.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <thread>

#include "ctxsat/kernels.hpp"

namespace ctxsat {

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::WalkSAT: return "walksat";
        case Strategy::Novelty: return "novelty";
        case Strategy::NoveltyPlus: return "novelty+";
        case Strategy::AdaptiveNoveltyPlus: return "adaptive-novelty+";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& raw) {
    std::string s;
    for (char ch : raw) s += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (s == "walksat") return Strategy::WalkSAT;
    if (s == "novelty") return Strategy::Novelty;
    if (s == "novelty+" || s == "noveltyplus" || s == "novelty-plus") return Strategy::NoveltyPlus;
    if (s == "adaptive-novelty+" || s == "adaptivenoveltyplus" || s == "adaptive" ||
        s == "adaptive-novelty-plus")
        return Strategy::AdaptiveNoveltyPlus;
    throw ArgumentError("unknown strategy '" + raw + "'");
}

void SlsConfig::validate() const {
    auto prob = [](double p, const char* what) {
        if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError(std::string(what) + " must lie in [0,1]");
    };
    prob(restart_probability, "restart_probability");
    prob(walk_probability, "walk_probability");
    prob(stagnation_fraction, "stagnation_fraction");
    prob(noise_phi, "noise_phi");
    if (!(cutoff_time_s > 0.0)) throw ArgumentError("cutoff_time must be positive");
    if (max_steps < 0) throw ArgumentError("max_steps must be non-negative");
    if (tabu_capacity < 1) throw ArgumentError("tabu_capacity must be at least 1");
    if (workers < 1) throw ArgumentError("workers must be at least 1");
    if (trace_interval < 1) throw ArgumentError("trace_interval must be at least 1");
    if (!(noise_theta >= 0.0)) throw ArgumentError("noise_theta must be non-negative");
}

// ---- scoring ----

ScoringIndex::ScoringIndex(const Dataset& data, const SolverOptions& opts) : n_(data.n) {
    std::map<Context, std::size_t> slot;
    for (std::size_t k = 0; k < data.examples.size(); ++k) {
        const auto& e = data.examples[k];
        auto [it, fresh] = slot.emplace(e.context, blocks_.size());
        if (fresh) {
            blocks_.emplace_back();
            ContextSpace(n_, e.context, opts).codes(blocks_.back().codes);
        }
        auto& b = blocks_[it->second];
        const ContextSpace space(n_, e.context, opts);
        b.examples.push_back(k);
        b.local.push_back(static_cast<std::uint32_t>(space.index_of(static_cast<std::uint32_t>(e.assignment.code()))));
        labels_.push_back(e.label);
    }
}

template <typename Fn>
void ScoringIndex::run(const MaxSatModel& model, Fn&& on_example) const {
    if (model.n() != n_) throw StructuralError("model and dataset widths differ");
    const auto cm = kernels::compile(model);
    thread_local std::vector<double> vals;
    thread_local std::vector<std::uint8_t> feas;
    for (const auto& b : blocks_) {
        vals.resize(b.codes.size());
        feas.resize(b.codes.size());
        kernels::evaluate_block(cm, b.codes, vals.data(), feas.data());
        bool any = false;
        double best = 0.0;
        for (std::size_t i = 0; i < b.codes.size(); ++i)
            if (feas[i] && (!any || vals[i] > best)) {
                best = vals[i];
                any = true;
            }
        for (std::size_t t = 0; t < b.examples.size(); ++t) {
            const auto li = b.local[t];
            Prediction p = Prediction::Positive;
            if (!feas[li]) p = Prediction::Infeasible;
            else if (vals[li] < best - kOptimumTol) p = Prediction::Suboptimal;
            on_example(b.examples[t], p);
        }
    }
}

int ScoringIndex::score(const MaxSatModel& model) const {
    int correct = 0;
    run(model, [&](std::size_t k, Prediction p) { correct += ((p == Prediction::Positive) == labels_[k]); });
    return correct;
}

std::vector<Prediction> ScoringIndex::predict(const MaxSatModel& model) const {
    std::vector<Prediction> out(labels_.size());
    run(model, [&](std::size_t k, Prediction p) { out[k] = p; });
    return out;
}

int score(const MaxSatModel& model, const Dataset& data, const SolverOptions& opts) {
    return ScoringIndex(data, opts).score(model);
}

// ---- misclassification ----

const char* to_string(Diagnosis d) {
    switch (d) {
        case Diagnosis::PosPredictedInfeasible: return "pos-predicted-infeasible";
        case Diagnosis::PosPredictedSuboptimal: return "pos-predicted-suboptimal";
        case Diagnosis::NegPredictedPositive: return "neg-predicted-positive";
    }
    return "?";
}

std::optional<Diagnosis> diagnose(bool label, Prediction p) {
    if (label && p == Prediction::Infeasible) return Diagnosis::PosPredictedInfeasible;
    if (label && p == Prediction::Suboptimal) return Diagnosis::PosPredictedSuboptimal;
    if (!label && p == Prediction::Positive) return Diagnosis::NegPredictedPositive;
    return std::nullopt;
}

Misclassified pick_misclassified(std::span<const Prediction> predictions, const Dataset& data, Rng& rng) {
    std::vector<Misclassified> wrong;
    for (std::size_t k = 0; k < data.examples.size(); ++k)
        if (auto d = diagnose(data.examples[k].label, predictions[k])) wrong.push_back({k, *d});
    if (wrong.empty()) throw ArgumentError("model classifies every example correctly");
    std::uniform_int_distribution<std::size_t> pick(0, wrong.size() - 1);
    return wrong[pick(rng)];
}

Misclassified pick_misclassified(const MaxSatModel& model, const Dataset& data, Rng& rng, const SolverOptions& opts) {
    const auto preds = ScoringIndex(data, opts).predict(model);
    return pick_misclassified(preds, data, rng);
}

// ---- neighbourhood ----

const char* to_string(Move m) {
    switch (m) {
        case Move::ToHard: return "to-hard";
        case Move::ToSoft: return "to-soft";
        case Move::RaiseWeight: return "raise-weight";
        case Move::HalveWeight: return "halve-weight";
        case Move::AddLiteral: return "add-literal";
        case Move::RemoveLiteral: return "remove-literal";
        case Move::FlipLiteral: return "flip-literal";
    }
    return "?";
}

const char* to_string(Rule r) {
    switch (r) {
        case Rule::InfeasibleHardEdit: return "infeasible-hard-edit";
        case Rule::SubHardRemove: return "sub-hard-remove";
        case Rule::SubSoftHardenOrRaise: return "sub-soft-harden-or-raise";
        case Rule::SubSoftAddRemoveHalve: return "sub-soft-add-remove-halve";
        case Rule::SubSoftAddSplit: return "sub-soft-add-split";
        case Rule::SubSoftAddCover: return "sub-soft-add-cover";
        case Rule::NegHardRemove: return "neg-hard-remove";
        case Rule::NegSoftHardenOrRaise: return "neg-soft-harden-or-raise";
        case Rule::NegSoftRemoveOrHalve: return "neg-soft-remove-or-halve";
        case Rule::Unpruned: return "unpruned";
    }
    return "?";
}

namespace {

class Builder {
public:
    Builder(const MaxSatModel& m, std::vector<Neighbour>& out) : m_(m), out_(out) {}

    void to_hard(std::size_t j, Rule r) { emit(j, Move::ToHard, std::nullopt, r, {m_[j].clause, true, 0.0}); }
    void to_soft(std::size_t j, Rule r) { emit(j, Move::ToSoft, std::nullopt, r, {m_[j].clause, false, 1.0}); }
    void raise(std::size_t j, Rule r) {
        const double w = (1.0 + m_[j].weight) / 2.0;
        if (w != m_[j].weight) emit(j, Move::RaiseWeight, std::nullopt, r, {m_[j].clause, false, w});
    }
    void halve(std::size_t j, Rule r) {
        const double w = m_[j].weight / 2.0;
        if (w != m_[j].weight) emit(j, Move::HalveWeight, std::nullopt, r, {m_[j].clause, false, w});
    }
    void add(std::size_t j, Literal l, Rule r) {
        if (m_[j].clause.has_var(l.var)) return;
        emit(j, Move::AddLiteral, l, r, {m_[j].clause.with_literal(l), m_[j].hard, m_[j].weight});
    }
    void remove(std::size_t j, Literal l, Rule r) {
        if (m_[j].clause.size() < 2 || !m_[j].clause.contains(l)) return;
        emit(j, Move::RemoveLiteral, l, r, {m_[j].clause.without_literal(l), m_[j].hard, m_[j].weight});
    }
    void flip(std::size_t j, Literal l, Rule r) {
        emit(j, Move::FlipLiteral, l, r, {m_[j].clause.with_flipped(l), m_[j].hard, m_[j].weight});
    }

    // Every move the catalogue allows on constraint j.
    void all(std::size_t j, Rule r) {
        const auto& c = m_[j];
        if (c.hard) {
            to_soft(j, r);
        } else {
            to_hard(j, r);
            raise(j, r);
            halve(j, r);
        }
        for (int v = 1; v <= m_.n(); ++v) {
            if (c.clause.has_var(v)) continue;
            add(j, {v, true}, r);
            add(j, {v, false}, r);
        }
        const std::vector<Literal> lits(c.clause.literals().begin(), c.clause.literals().end());
        for (const auto& l : lits) remove(j, l, r);
        for (const auto& l : lits) flip(j, l, r);
    }

private:
    void emit(std::size_t j, Move mv, std::optional<Literal> l, Rule r, Constraint c) {
        out_.push_back({m_.with_constraint(j, std::move(c)), j, mv, l, r});
    }

    const MaxSatModel& m_;
    std::vector<Neighbour>& out_;
};

// The literal over var that a satisfies.
Literal literal_of(const Assignment& a, int var) { return {var, a.get(var)}; }

}  // namespace

std::vector<Neighbour> naive_neighbours(const MaxSatModel& model) {
    std::vector<Neighbour> out;
    Builder b(model, out);
    for (std::size_t j = 0; j < model.size(); ++j) b.all(j, Rule::Unpruned);
    return out;
}

Neighbourhood neighbours(const MaxSatModel& model, const ContextualExample& example, Diagnosis diagnosis,
                         const std::optional<Assignment>& x_star) {
    const Assignment& x = example.assignment;
    if (x.n() != model.n()) throw StructuralError("example width does not match model");
    if (x_star && x_star->n() != model.n()) throw StructuralError("x* width does not match model");
    Neighbourhood nh;
    Builder b(model, nh.models);
    if (diagnosis != Diagnosis::PosPredictedInfeasible && !x_star) {
        nh.missing_optimum = true;
        diagnosis = Diagnosis::PosPredictedInfeasible;
    }
    for (std::size_t j = 0; j < model.size(); ++j) {
        const auto& c = model[j];
        const bool xs = satisfies_clause(x, c.clause);
        const std::vector<Literal> lits(c.clause.literals().begin(), c.clause.literals().end());
        if (diagnosis == Diagnosis::PosPredictedInfeasible) {
            if (c.hard && !xs) b.all(j, Rule::InfeasibleHardEdit);
            continue;
        }
        const Assignment& xo = *x_star;
        const bool os = satisfies_clause(xo, c.clause);
        if (diagnosis == Diagnosis::PosPredictedSuboptimal) {
            if (c.hard) {
                if (xs)
                    for (const auto& l : lits)
                        if (xo.satisfies(l)) b.remove(j, l, Rule::SubHardRemove);
            } else if (xs && !os) {
                b.to_hard(j, Rule::SubSoftHardenOrRaise);
                b.raise(j, Rule::SubSoftHardenOrRaise);
            } else if (!xs && os) {
                for (int v = 1; v <= model.n(); ++v) b.add(j, literal_of(x, v), Rule::SubSoftAddRemoveHalve);
                for (const auto& l : lits)
                    if (xo.satisfies(l)) b.remove(j, l, Rule::SubSoftAddRemoveHalve);
                b.halve(j, Rule::SubSoftAddRemoveHalve);
            } else if (!xs && !os) {
                for (int v = 1; v <= model.n(); ++v)
                    if (x.get(v) != xo.get(v)) b.add(j, literal_of(x, v), Rule::SubSoftAddSplit);
            } else {
                for (int v = 1; v <= model.n(); ++v)
                    if (x.get(v) != xo.get(v)) b.add(j, literal_of(xo, v), Rule::SubSoftAddCover);
            }
        } else {
            if (c.hard) {
                if (xs)
                    for (const auto& l : lits)
                        if (x.satisfies(l)) b.remove(j, l, Rule::NegHardRemove);
            } else if (!xs && !os) {
                b.to_hard(j, Rule::NegSoftHardenOrRaise);
                b.raise(j, Rule::NegSoftHardenOrRaise);
            } else if (xs && os) {
                for (const auto& l : lits)
                    if (x.satisfies(l)) b.remove(j, l, Rule::NegSoftRemoveOrHalve);
                b.halve(j, Rule::NegSoftRemoveOrHalve);
            }
        }
    }
    if (nh.models.empty()) {
        nh.models = naive_neighbours(model);
        nh.fallback = true;
    }
    return nh;
}

std::uint64_t signature(const MaxSatModel& model) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::int64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= static_cast<std::uint64_t>(v >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    mix(model.n());
    for (const auto& c : model.constraints()) {
        mix(static_cast<std::int64_t>(c.clause.size()));
        for (int v : c.clause.to_dimacs()) mix(v);
        mix(c.hard ? 1 : 0);
        mix(std::llround(c.weight * 1e6));
    }
    return h;
}

void VisitMemory::record(std::uint64_t sig, long long step) {
    if (capacity_ == 0) return;
    if (items_.size() == capacity_) items_.pop_front();
    items_.emplace_back(sig, step);
}

std::optional<long long> VisitMemory::last_visit(std::uint64_t sig) const {
    for (auto it = items_.rbegin(); it != items_.rend(); ++it)
        if (it->first == sig) return it->second;
    return std::nullopt;
}

// ---- selection ----

namespace {

std::size_t uniform_argmax(std::span<const ScoredModel> scored, std::optional<std::size_t> exclude, Rng& rng) {
    int best = 0;
    bool any = false;
    for (std::size_t i = 0; i < scored.size(); ++i)
        if (i != exclude && (!any || scored[i].score > best)) {
            best = scored[i].score;
            any = true;
        }
    std::vector<std::size_t> ties;
    for (std::size_t i = 0; i < scored.size(); ++i)
        if (i != exclude && scored[i].score == best) ties.push_back(i);
    std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
    return ties[pick(rng)];
}

std::size_t novelty(std::span<const ScoredModel> scored, const SlsState& state, Rng& rng) {
    const std::size_t best = uniform_argmax(scored, std::nullopt, rng);
    if (scored.size() < 2) return best;
    std::optional<long long> newest;
    std::vector<std::optional<long long>> seen(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
        seen[i] = state.visited.last_visit(signature(*scored[i].model));
        if (seen[i] && (!newest || *seen[i] > *newest)) newest = seen[i];
    }
    if (newest && seen[best] == newest) return uniform_argmax(scored, best, rng);
    return best;
}

}  // namespace

std::size_t select_neighbour(Strategy strategy, std::span<const ScoredModel> scored, const SlsState& state,
                             Rng& rng) {
    if (scored.empty()) throw ArgumentError("select_neighbour needs at least one candidate");
    switch (strategy) {
        case Strategy::WalkSAT: return uniform_argmax(scored, std::nullopt, rng);
        case Strategy::Novelty: return novelty(scored, state, rng);
        case Strategy::NoveltyPlus:
        case Strategy::AdaptiveNoveltyPlus: {
            std::bernoulli_distribution walk(std::clamp(state.wp_current, 0.0, 1.0));
            if (walk(rng)) {
                std::uniform_int_distribution<std::size_t> pick(0, scored.size() - 1);
                return pick(rng);
            }
            return novelty(scored, state, rng);
        }
    }
    return 0;
}

double update_noise(SlsState& state, const SlsConfig& config, std::size_t data_size, bool improved) {
    double wp = state.wp_current;
    if (improved) {
        wp -= wp * config.noise_phi / 2.0;
        state.last_noise_step = state.step;
    } else if (static_cast<double>(state.step - std::max(state.last_improvement_step, state.last_noise_step)) >
               config.noise_theta * static_cast<double>(data_size)) {
        wp += (1.0 - wp) * config.noise_phi;
        state.last_noise_step = state.step;
    }
    state.wp_current = std::clamp(wp, 0.0, 1.0);
    return state.wp_current;
}

// ---- search ----

MaxSatModel random_model(int n, const CandidateHint& hint, Rng& rng) {
    if (hint.m < 1) throw ArgumentError("constraint count m must be at least 1");
    if (hint.max_clause_len < 1 || hint.max_clause_len > n)
        throw ArgumentError("max_clause_len must lie in [1, n]");
    static constexpr double kWeights[] = {1.0, 0.5, 0.25, 0.125};
    std::uniform_int_distribution<int> len_dist(1, hint.max_clause_len);
    std::uniform_int_distribution<int> w_dist(0, 3);
    std::bernoulli_distribution coin(0.5);
    std::vector<int> vars(n);
    std::vector<Constraint> cons;
    for (int j = 0; j < hint.m; ++j) {
        for (int v = 0; v < n; ++v) vars[v] = v + 1;
        const int len = len_dist(rng);
        std::vector<Literal> lits;
        for (int i = 0; i < len; ++i) {
            std::uniform_int_distribution<int> pick(i, n - 1);
            std::swap(vars[i], vars[pick(rng)]);
            lits.push_back({vars[i], coin(rng)});
        }
        const bool hard = coin(rng);
        const double w = kWeights[w_dist(rng)];
        cons.push_back({Clause(std::move(lits)), hard, hard ? 0.0 : w});
    }
    return MaxSatModel(n, std::move(cons));
}

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::CutoffScore: return "cutoff-score";
        case StopReason::CutoffTime: return "cutoff-time";
        case StopReason::MaxSteps: return "max-steps";
    }
    return "?";
}

namespace {

std::vector<int> score_all(const ScoringIndex& index, const std::vector<Neighbour>& nbrs, int workers) {
    std::vector<int> out(nbrs.size());
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), nbrs.size());
    if (w <= 1) {
        for (std::size_t i = 0; i < nbrs.size(); ++i) out[i] = index.score(nbrs[i].model);
        return out;
    }
    std::vector<std::jthread> pool;
    const std::size_t chunk = (nbrs.size() + w - 1) / w;
    for (std::size_t t = 0; t < w; ++t)
        pool.emplace_back([&, t] {
            const std::size_t lo = t * chunk, hi = std::min(nbrs.size(), lo + chunk);
            for (std::size_t i = lo; i < hi; ++i) out[i] = index.score(nbrs[i].model);
        });
    pool.clear();  // joins
    return out;
}

}  // namespace

LearnResult learn(const Dataset& data, const CandidateHint& hint, const SlsConfig& config) {
    using Clock = std::chrono::steady_clock;
    config.validate();
    if (hint.m < 1) throw ArgumentError("constraint count m must be at least 1");
    if (data.examples.empty()) throw ArgumentError("cannot learn from an empty dataset");
    const int total = static_cast<int>(data.size());
    const int target = config.cutoff_score.value_or(total);
    if (target > total) throw ArgumentError("cutoff_score exceeds the dataset size");

    const auto start = Clock::now();
    const auto elapsed_s = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };
    const ScoringIndex index(data, config.solver);
    Rng rng(config.seed);
    std::bernoulli_distribution restart(config.restart_probability);

    SlsState st;
    st.visited = VisitMemory(static_cast<std::size_t>(config.tabu_capacity));
    st.wp_current = config.walk_probability;
    st.current = random_model(data.n, hint, rng);
    st.current_score = index.score(st.current);
    st.best = st.current;
    st.best_score = st.current_score;

    LearnResult res;
    auto trace = [&] {
        res.trace.push_back({st.step, elapsed_s() * 1e3, st.current_score, st.best_score, st.wp_current});
    };
    trace();
    const double stagnation_time = config.stagnation_fraction * config.cutoff_time_s;
    const double stagnation_steps = config.stagnation_fraction * static_cast<double>(config.max_steps);
    double last_improvement_time = 0.0;

    res.reason = StopReason::CutoffScore;
    while (st.best_score < target) {
        if (elapsed_s() >= config.cutoff_time_s) {
            res.reason = StopReason::CutoffTime;
            break;
        }
        if (config.max_steps > 0 && st.step >= config.max_steps) {
            res.reason = StopReason::MaxSteps;
            break;
        }
        ++st.step;
        if (restart(rng)) {
            st.current = random_model(data.n, hint, rng);
            st.current_score = index.score(st.current);
            ++res.restarts;
        } else {
            const auto preds = index.predict(st.current);
            const auto pick = pick_misclassified(preds, data, rng);
            const auto& ex = data.examples[pick.index];
            std::optional<Assignment> x_star;
            if (pick.diagnosis != Diagnosis::PosPredictedInfeasible)
                x_star = solve(st.current, ex.context, config.solver).witness;
            const auto nh = neighbours(st.current, ex, pick.diagnosis, x_star);
            const auto scores = score_all(index, nh.models, config.workers);
            std::vector<ScoredModel> scored(nh.models.size());
            for (std::size_t i = 0; i < scored.size(); ++i) scored[i] = {&nh.models[i].model, scores[i]};
            const std::size_t sel = select_neighbour(config.strategy, scored, st, rng);
            st.current = nh.models[sel].model;
            st.current_score = scores[sel];
        }
        const bool improved = st.current_score > st.best_score;
        if (improved) {
            st.best = st.current;
            st.best_score = st.current_score;
            st.last_improvement_step = st.step;
            last_improvement_time = elapsed_s();
        }
        if (config.strategy == Strategy::AdaptiveNoveltyPlus) update_noise(st, config, data.size(), improved);
        st.visited.record(signature(st.current), st.step);

        const bool stale_time = elapsed_s() - last_improvement_time > stagnation_time;
        const bool stale_steps =
            config.max_steps > 0 && static_cast<double>(st.step - st.last_improvement_step) > stagnation_steps;
        if (st.best_score < target && (stale_time || stale_steps)) {
            st.current = random_model(data.n, hint, rng);
            st.current_score = index.score(st.current);
            st.visited.clear();
            last_improvement_time = elapsed_s();
            st.last_improvement_step = st.step;
            ++res.restarts;
            if (st.current_score > st.best_score) {
                st.best = st.current;
                st.best_score = st.current_score;
            }
        }
        if (improved || st.step % config.trace_interval == 0) trace();
    }
    if (res.trace.back().step != st.step) trace();
    res.model = st.best;
    res.score = st.best_score;
    res.steps = st.step;
    res.elapsed_s = elapsed_s();
    return res;
}

}  // namespace ctxsat
