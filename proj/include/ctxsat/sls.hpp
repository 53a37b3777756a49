#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ctxsat/core.hpp"
#include "ctxsat/solver.hpp"

namespace ctxsat {

using Rng = std::mt19937_64;

enum class Strategy { WalkSAT, Novelty, NoveltyPlus, AdaptiveNoveltyPlus };
const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct SlsConfig {
    Strategy strategy = Strategy::WalkSAT;
    double restart_probability = 0.001;
    double walk_probability = 0.1;
    std::optional<int> cutoff_score;  // defaults to |S|
    double cutoff_time_s = 60.0;
    long long max_steps = 0;  // 0 = unbounded
    double stagnation_fraction = 0.25;
    std::uint64_t seed = 0;
    int tabu_capacity = 50;
    double noise_phi = 0.2;
    double noise_theta = 1.0 / 6.0;
    int workers = 1;
    long long trace_interval = 100;
    SolverOptions solver;

    void validate() const;
};

struct CandidateHint {
    int m = 1;
    int max_clause_len = 1;
};

enum class Prediction : std::uint8_t { Positive, Infeasible, Suboptimal };

// Examples grouped by context with each context's assignment space precomputed, so one kernel
// pass per context classifies all of its examples.
class ScoringIndex {
public:
    explicit ScoringIndex(const Dataset& data, const SolverOptions& opts = {});

    std::size_t size() const { return labels_.size(); }
    int score(const MaxSatModel& model) const;
    std::vector<Prediction> predict(const MaxSatModel& model) const;

private:
    struct Block {
        std::vector<std::uint32_t> codes;
        std::vector<std::size_t> examples;
        std::vector<std::uint32_t> local;
    };
    template <typename Fn>
    void run(const MaxSatModel& model, Fn&& on_example) const;

    int n_;
    std::vector<Block> blocks_;
    std::vector<bool> labels_;
};

int score(const MaxSatModel& model, const Dataset& data, const SolverOptions& opts = {});

enum class Diagnosis { PosPredictedInfeasible, PosPredictedSuboptimal, NegPredictedPositive };
const char* to_string(Diagnosis d);

struct Misclassified {
    std::size_t index = 0;
    Diagnosis diagnosis = Diagnosis::PosPredictedInfeasible;
};
std::optional<Diagnosis> diagnose(bool label, Prediction p);
Misclassified pick_misclassified(const MaxSatModel& model, const Dataset& data, Rng& rng,
                                 const SolverOptions& opts = {});
Misclassified pick_misclassified(std::span<const Prediction> predictions, const Dataset& data, Rng& rng);

enum class Move { ToHard, ToSoft, RaiseWeight, HalveWeight, AddLiteral, RemoveLiteral, FlipLiteral };
const char* to_string(Move m);

// Pruning rules, one per case of the neighbour-generation analysis; Unpruned marks the fallback.
enum class Rule {
    InfeasibleHardEdit,     // hard phi, x falsifies phi: any edit
    SubHardRemove,          // hard phi, x |= phi: drop l with x* |= l
    SubSoftHardenOrRaise,   // soft phi, x |= phi, x* falsifies phi
    SubSoftAddRemoveHalve,  // soft phi, x falsifies phi, x* |= phi
    SubSoftAddSplit,        // soft phi, both falsify: add l with x |= l, x* falsifies l
    SubSoftAddCover,        // soft phi, both satisfy: add l with x falsifies l, x* |= l
    NegHardRemove,          // hard phi, x |= phi: drop l with x |= l
    NegSoftHardenOrRaise,   // soft phi, both falsify
    NegSoftRemoveOrHalve,   // soft phi, both satisfy: drop l with x |= l, or halve
    Unpruned,
};
const char* to_string(Rule r);

struct Neighbour {
    MaxSatModel model;
    std::size_t constraint = 0;
    Move move = Move::ToHard;
    std::optional<Literal> literal;
    Rule rule = Rule::Unpruned;
};

struct Neighbourhood {
    std::vector<Neighbour> models;
    bool fallback = false;         // rule set was empty; full move set used
    bool missing_optimum = false;  // x* required but absent; infeasible-edit family used
};

Neighbourhood neighbours(const MaxSatModel& model, const ContextualExample& example, Diagnosis diagnosis,
                         const std::optional<Assignment>& x_star);
std::vector<Neighbour> naive_neighbours(const MaxSatModel& model);

std::uint64_t signature(const MaxSatModel& model);

// FIFO of (signature, step) pairs.
class VisitMemory {
public:
    explicit VisitMemory(std::size_t capacity = 50) : capacity_(capacity) {}
    void record(std::uint64_t sig, long long step);
    std::optional<long long> last_visit(std::uint64_t sig) const;
    void clear() { items_.clear(); }
    std::size_t size() const { return items_.size(); }

private:
    std::size_t capacity_;
    std::deque<std::pair<std::uint64_t, long long>> items_;
};

struct SlsState {
    MaxSatModel current;
    MaxSatModel best;
    int current_score = 0;
    int best_score = 0;
    VisitMemory visited;
    long long step = 0;
    long long last_improvement_step = 0;
    long long last_noise_step = 0;
    double wp_current = 0.0;
};

struct ScoredModel {
    const MaxSatModel* model = nullptr;
    int score = 0;
};

std::size_t select_neighbour(Strategy strategy, std::span<const ScoredModel> scored, const SlsState& state,
                             Rng& rng);
double update_noise(SlsState& state, const SlsConfig& config, std::size_t data_size, bool improved);

MaxSatModel random_model(int n, const CandidateHint& hint, Rng& rng);

struct TraceRecord {
    long long step = 0;
    double elapsed_ms = 0.0;
    int current_score = 0;
    int best_score = 0;
    double wp = 0.0;
};

enum class StopReason { CutoffScore, CutoffTime, MaxSteps };
const char* to_string(StopReason r);

struct LearnResult {
    MaxSatModel model;
    int score = 0;
    std::vector<TraceRecord> trace;
    long long steps = 0;
    long long restarts = 0;
    StopReason reason = StopReason::CutoffScore;
    double elapsed_s = 0.0;
};

LearnResult learn(const Dataset& data, const CandidateHint& hint, const SlsConfig& config);

}  // namespace ctxsat
