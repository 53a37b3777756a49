#include <cmath>
#include <map>

#include "doctest.h"
#include "fixtures.hpp"
#include "neighbour_oracle.hpp"
#include "oracle.hpp"

#include "ctxsat/datagen.hpp"
#include "ctxsat/sls.hpp"

using namespace ctxsat;
using fixtures::A;
using fixtures::C;

namespace {

int oracle_score(const MaxSatModel& m, const Dataset& d) {
    const auto om = oracle::from(m);
    int s = 0;
    for (const auto& e : d.examples)
        s += oracle::positive(om, e.context.to_dimacs(), e.assignment.code()) == e.label;
    return s;
}

Dataset labelled_data(int n, std::mt19937_64& rng, int k) {
    std::vector<ContextualExample> ex;
    for (int i = 0; i < k; ++i) {
        const auto psi = oracle::random_context(n, 3, rng);
        ex.emplace_back(psi, oracle::random_in(n, psi, rng), rng() % 2 == 0);
    }
    return Dataset(n, ex);
}

std::vector<std::pair<long long, int>> trace_key(const LearnResult& r) {
    std::vector<std::pair<long long, int>> out;
    for (const auto& t : r.trace) out.emplace_back(t.step, t.current_score * 1000 + t.best_score);
    return out;
}

}  // namespace

TEST_SUITE("sls") {
    TEST_CASE("score examples") {
        CHECK(score(fixtures::worked_target(), fixtures::worked_data()) == 7);
        CHECK(score(fixtures::worked_wrong(), fixtures::worked_data()) == 5);
        const auto pred = ScoringIndex(fixtures::worked_data()).predict(fixtures::worked_wrong());
        CHECK(pred[2] == Prediction::Suboptimal);
        CHECK(pred[3] == Prediction::Suboptimal);
    }

    TEST_CASE("score matches the per-example oracle") {
        std::mt19937_64 rng(2);
        for (int t = 0; t < 150; ++t) {
            const int n = 3 + t % 8;
            const auto m = oracle::random_model(n, 1 + t % 6, rng);
            const auto d = labelled_data(n, rng, 1 + t % 30);
            REQUIRE(score(m, d) == oracle_score(m, d));
        }
    }

    TEST_CASE("ground truth scores perfectly on its noiseless data") {
        GenSpec spec;
        spec.n = 6;
        spec.context_count = 8;
        spec.seed = 12;
        const auto inst = generate_instance(spec);
        CHECK(score(inst.model, inst.data) == static_cast<int>(inst.data.size()));
    }

    TEST_CASE("misclassified pick and diagnoses") {
        Rng rng(1);
        const auto d = fixtures::worked_data();
        for (int t = 0; t < 50; ++t) {
            const auto p = pick_misclassified(fixtures::worked_wrong(), d, rng);
            CHECK((p.index == 2 || p.index == 3));
            CHECK(p.diagnosis == Diagnosis::PosPredictedSuboptimal);
        }
        const MaxSatModel hard_x2(3, {{Clause::from_dimacs({2}), true, 0.0}});
        const Dataset one(3, {ContextualExample(C({}), A("101"), true)});
        const auto p = pick_misclassified(hard_x2, one, rng);
        CHECK(p.index == 0);
        CHECK(p.diagnosis == Diagnosis::PosPredictedInfeasible);
        CHECK_THROWS_AS(pick_misclassified(fixtures::worked_target(), d, rng), ArgumentError);
    }

    TEST_CASE("misclassified pick is uniform") {
        std::mt19937_64 gen(40);
        const auto d = labelled_data(5, gen, 40);
        const auto m = oracle::random_model(5, 4, gen);
        const auto pred = ScoringIndex(d).predict(m);
        std::vector<std::size_t> wrong;
        for (std::size_t k = 0; k < d.size(); ++k)
            if (diagnose(d.examples[k].label, pred[k])) wrong.push_back(k);
        REQUIRE(wrong.size() >= 5);
        Rng rng(3);
        std::map<std::size_t, int> hits;
        const int draws = 10000;
        for (int t = 0; t < draws; ++t) ++hits[pick_misclassified(pred, d, rng).index];
        const double expect = static_cast<double>(draws) / wrong.size();
        double chi2 = 0.0;
        for (auto k : wrong) chi2 += std::pow(hits[k] - expect, 2) / expect;
        CHECK(hits.size() == wrong.size());
        // dof + 3 sigma of the chi-square distribution.
        const double dof = static_cast<double>(wrong.size() - 1);
        CHECK(chi2 < dof + 3.0 * std::sqrt(2.0 * dof));
    }

    TEST_CASE("infeasible-positive neighbours only edit falsified hard clauses") {
        const MaxSatModel m(3, {{Clause::from_dimacs({2}), true, 0.0}, {Clause::from_dimacs({1, 3}), false, 0.5}});
        const ContextualExample e(C({}), A("101"), true);
        const auto nh = neighbours(m, e, Diagnosis::PosPredictedInfeasible, std::nullopt);
        REQUIRE(!nh.models.empty());
        for (const auto& nb : nh.models) {
            CHECK(nb.constraint == 0);
            CHECK(nb.model[1] == m[1]);
        }
    }

    TEST_CASE("negative-predicted-positive removes a literal x satisfies from a hard clause") {
        const MaxSatModel m(3, {{Clause::from_dimacs({1, 2}), true, 0.0}, {Clause::from_dimacs({3}), false, 1.0}});
        const ContextualExample e(C({}), A("101"), false);
        const auto nh = neighbours(m, e, Diagnosis::NegPredictedPositive, A("101"));
        const MaxSatModel want = m.with_constraint(0, {Clause::from_dimacs({2}), true, 0.0});
        bool found = false;
        for (const auto& nb : nh.models) found = found || nb.model == want;
        CHECK(found);
    }

    TEST_CASE("pruned neighbourhoods equal the rule-filtered naive moves") {
        std::mt19937_64 rng(17);
        for (auto d : {Diagnosis::PosPredictedInfeasible, Diagnosis::PosPredictedSuboptimal,
                       Diagnosis::NegPredictedPositive}) {
            for (int t = 0; t < 100; ++t) {
                const auto c = oracle::draw_case(d, rng);
                const auto nh = neighbours(c.model, c.example, d, c.x_star);
                const auto naive = naive_neighbours(c.model);
                std::vector<MaxSatModel> expected;
                for (const auto& nb : naive) {
                    const auto mv = oracle::single_move(c.model, nb.model);
                    REQUIRE(mv.has_value());
                    for (auto r : oracle::rules_for(d))
                        if (oracle::rule_applies(r, c.model[mv->j], *mv, c.example.assignment, c.x_star)) {
                            expected.push_back(nb.model);
                            break;
                        }
                }
                for (const auto& nb : nh.models) {
                    REQUIRE(std::find_if(naive.begin(), naive.end(),
                                         [&](const Neighbour& q) { return q.model == nb.model; }) != naive.end());
                    const auto mv = oracle::single_move(c.model, nb.model);
                    REQUIRE(mv.has_value());
                    CHECK(mv->j == nb.constraint);
                    CHECK(mv->move == nb.move);
                    if (!nh.fallback)
                        REQUIRE(oracle::rule_applies(nb.rule, c.model[mv->j], *mv, c.example.assignment, c.x_star));
                }
                REQUIRE(nh.fallback == expected.empty());
                if (nh.fallback) {
                    REQUIRE(nh.models.size() == naive.size());
                    continue;
                }
                // Same multiset of models, order aside.
                std::vector<std::uint64_t> got_sigs, want_sigs;
                for (const auto& nb : nh.models) got_sigs.push_back(signature(nb.model));
                for (const auto& m : expected) want_sigs.push_back(signature(m));
                std::sort(got_sigs.begin(), got_sigs.end());
                std::sort(want_sigs.begin(), want_sigs.end());
                got_sigs.erase(std::unique(got_sigs.begin(), got_sigs.end()), got_sigs.end());
                want_sigs.erase(std::unique(want_sigs.begin(), want_sigs.end()), want_sigs.end());
                REQUIRE(got_sigs == want_sigs);
            }
        }
    }

    TEST_CASE("naive neighbourhood size matches the move catalogue count") {
        std::mt19937_64 rng(5);
        for (int t = 0; t < 100; ++t) {
            const int n = 3 + t % 6;
            const auto m = oracle::random_model(n, 1 + t % 5, rng);
            std::size_t want = 0;
            for (const auto& c : m.constraints()) {
                const std::size_t k = c.clause.size();
                want += c.hard ? 1 : 1 + (c.weight < 1.0) + (c.weight > 0.0);
                want += 2 * (static_cast<std::size_t>(n) - k) + (k > 1 ? k : 0) + k;
            }
            REQUIRE(naive_neighbours(m).size() == want);
        }
    }

    TEST_CASE("neighbours satisfy core invariants") {
        std::mt19937_64 rng(8);
        for (int t = 0; t < 200; ++t) {
            const auto c = oracle::draw_case(static_cast<Diagnosis>(t % 3), rng);
            for (const auto& nb : neighbours(c.model, c.example, static_cast<Diagnosis>(t % 3), c.x_star).models)
                for (const auto& con : nb.model.constraints()) {
                    REQUIRE(!con.clause.empty());
                    REQUIRE((!con.hard || con.weight == 0.0));
                    REQUIRE((con.weight >= 0.0 && con.weight <= 1.0));
                }
        }
    }

    TEST_CASE("missing optimum falls back to the infeasible-edit family") {
        const MaxSatModel m(3, {{Clause::from_dimacs({2}), true, 0.0}});
        const auto nh = neighbours(m, ContextualExample(C({}), A("101"), true), Diagnosis::PosPredictedSuboptimal,
                                   std::nullopt);
        CHECK(nh.missing_optimum);
        for (const auto& nb : nh.models) CHECK((nb.rule == Rule::InfeasibleHardEdit || nb.rule == Rule::Unpruned));
    }

    TEST_CASE("selection rules") {
        const MaxSatModel a = fixtures::worked_target(), b = fixtures::worked_wrong();
        const MaxSatModel c = b.with_scaled_weights(0.5);
        SlsState st;
        st.wp_current = 0.1;
        Rng rng(2);
        const std::vector<ScoredModel> single = {{&a, 1}};
        for (auto s : {Strategy::WalkSAT, Strategy::Novelty, Strategy::NoveltyPlus, Strategy::AdaptiveNoveltyPlus})
            CHECK(select_neighbour(s, single, st, rng) == 0);
        const std::vector<ScoredModel> three = {{&a, 3}, {&b, 7}, {&c, 7}};
        std::map<std::size_t, int> hits;
        for (int t = 0; t < 2000; ++t) ++hits[select_neighbour(Strategy::WalkSAT, three, st, rng)];
        CHECK(hits[0] == 0);
        CHECK(hits[1] > 800);
        CHECK(hits[2] > 800);
        // Novelty avoids the best model when it is the most recently visited.
        const std::vector<ScoredModel> two = {{&a, 3}, {&b, 7}};
        st.visited.record(signature(a), 1);
        st.visited.record(signature(b), 2);
        CHECK(select_neighbour(Strategy::Novelty, two, st, rng) == 0);
        st.visited.record(signature(a), 3);
        CHECK(select_neighbour(Strategy::Novelty, two, st, rng) == 1);
        CHECK_THROWS_AS(select_neighbour(Strategy::WalkSAT, {}, st, rng), ArgumentError);
    }

    TEST_CASE("novelty+ with wp=1 picks uniformly") {
        std::vector<MaxSatModel> ms;
        std::mt19937_64 gen(4);
        for (int i = 0; i < 6; ++i) ms.push_back(oracle::random_model(4, 2, gen));
        std::vector<ScoredModel> scored;
        for (int i = 0; i < 6; ++i) scored.push_back({&ms[i], i});
        SlsState st;
        st.wp_current = 1.0;
        Rng rng(9);
        std::vector<int> hits(6, 0);
        const int draws = 10000;
        for (int t = 0; t < draws; ++t) ++hits[select_neighbour(Strategy::NoveltyPlus, scored, st, rng)];
        const double p = 1.0 / 6.0, sigma = std::sqrt(draws * p * (1 - p));
        for (int h : hits) CHECK(std::abs(h - draws * p) < 3 * sigma);
    }

    TEST_CASE("adaptive noise updates") {
        SlsConfig cfg;
        cfg.noise_phi = 0.2;
        SlsState st;
        st.wp_current = 0.0;
        st.step = 100;
        CHECK(update_noise(st, cfg, 12, false) == doctest::Approx(0.2));
        st.wp_current = 0.5;
        CHECK(update_noise(st, cfg, 12, true) == doctest::Approx(0.45));
        Rng rng(6);
        std::bernoulli_distribution coin(0.3);
        for (int t = 0; t < 100000; ++t) {
            st.step += 1 + static_cast<long long>(rng() % 5);
            if (coin(rng)) st.last_improvement_step = st.step;
            const double wp = update_noise(st, cfg, 1 + rng() % 20, coin(rng));
            REQUIRE((wp >= 0.0 && wp <= 1.0));
        }
    }

    TEST_CASE("config validation") {
        SlsConfig c;
        c.walk_probability = 1.5;
        CHECK_THROWS_AS(c.validate(), ArgumentError);
        c = {};
        c.restart_probability = -0.1;
        CHECK_THROWS_AS(c.validate(), ArgumentError);
        Dataset empty(3, {});
        CHECK_THROWS_AS(learn(empty, {2, 2}, SlsConfig{}), ArgumentError);
        CHECK_THROWS_AS(learn(fixtures::worked_data(), {0, 2}, SlsConfig{}), ArgumentError);
        SlsConfig over;
        over.cutoff_score = 8;
        CHECK_THROWS_AS(learn(fixtures::worked_data(), {2, 2}, over), ArgumentError);
    }

    TEST_CASE("reached cutoff score returns immediately") {
        SlsConfig c;
        c.cutoff_score = 0;
        const auto r = learn(fixtures::worked_data(), {2, 2}, c);
        CHECK(r.steps == 0);
        CHECK(r.reason == StopReason::CutoffScore);
    }

    TEST_CASE("learning recovers a small realizable task and is deterministic") {
        GenSpec spec;
        spec.n = 6;
        spec.context_count = 10;
        spec.seed = 5;
        const auto inst = generate_instance(spec);
        SlsConfig c;
        c.seed = 3;
        c.max_steps = 20000;
        c.cutoff_time_s = 60;
        for (auto s : {Strategy::WalkSAT, Strategy::Novelty, Strategy::NoveltyPlus, Strategy::AdaptiveNoveltyPlus}) {
            c.strategy = s;
            c.workers = 1;
            const auto r1 = learn(inst.data, {4, 3}, c);
            c.workers = 3;
            const auto r2 = learn(inst.data, {4, 3}, c);
            CHECK(r1.model == r2.model);
            CHECK(trace_key(r1) == trace_key(r2));
            CHECK(r1.score == score(r1.model, inst.data));
            for (std::size_t i = 1; i < r1.trace.size(); ++i) REQUIRE(r1.trace[i].best_score >= r1.trace[i - 1].best_score);
            if (s == Strategy::WalkSAT) CHECK(r1.score == static_cast<int>(inst.data.size()));
        }
    }

    TEST_CASE("noisy data still yields a model") {
        GenSpec spec;
        spec.n = 6;
        spec.context_count = 10;
        spec.seed = 9;
        spec.noise_p = 0.3;
        const auto inst = generate_instance(spec);
        SlsConfig c;
        c.max_steps = 2000;
        const auto r = learn(inst.data, {4, 3}, c);
        CHECK(r.model.size() == 4);
        CHECK(r.reason != StopReason::CutoffTime);
        CHECK(r.score == score(r.model, inst.data));
    }

    TEST_CASE("random initial models follow the documented distribution") {
        Rng rng(10);
        int hard = 0, total = 0;
        for (int t = 0; t < 2000; ++t) {
            const auto m = random_model(6, {3, 4}, rng);
            for (const auto& c : m.constraints()) {
                ++total;
                hard += c.hard;
                REQUIRE((c.clause.size() >= 1 && c.clause.size() <= 4));
                if (!c.hard)
                    REQUIRE((c.weight == 1.0 || c.weight == 0.5 || c.weight == 0.25 || c.weight == 0.125));
            }
        }
        CHECK(std::abs(hard - total / 2.0) < 3 * std::sqrt(total * 0.25));
    }
}
