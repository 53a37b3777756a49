#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ctxsat/core.hpp"
#include "ctxsat/solver.hpp"

namespace ctxsat {

// Agreement of the global-context classifiers, counted through theta_L and theta_T.
double global_accuracy(const MaxSatModel& learned, const MaxSatModel& truth, const SolverOptions& opts = {});
// Same quantity by classifying every assignment directly.
double global_accuracy_enumerated(const MaxSatModel& learned, const MaxSatModel& truth,
                                  const SolverOptions& opts = {});

struct InfeasibilityResult {
    double value = 0.0;
    bool degenerate = false;  // learned has no global optimum; value is 1.0
    std::uint64_t optima = 0;
    std::uint64_t violating = 0;
};
InfeasibilityResult infeasibility(const MaxSatModel& learned, const MaxSatModel& truth,
                                  const SolverOptions& opts = {});

struct RegretResult {
    std::optional<double> mean;  // normalised; absent when no learned optimum is truth-feasible
    double normalizer = 0.0;     // truth's global optimum value
    double coverage = 0.0;       // truth-feasible share of the learned optima
    std::size_t samples = 0;
    std::size_t pool = 0;
    std::vector<std::string> flags;
};
// Draws min(k, pool) truth-feasible learned optima without replacement; k = 0 uses the whole pool.
RegretResult regret(const MaxSatModel& learned, const MaxSatModel& truth, std::size_t k, std::mt19937_64& rng,
                    const SolverOptions& opts = {});

struct Representativeness {
    std::map<Assignment, std::size_t> counts;  // #(target, x) for every x satisfying target
    bool representative = false;
    std::optional<Assignment> weakest;  // an x attaining the minimum count
};
Representativeness representativeness(const MaxSatModel& h, const MaxSatModel& h_star,
                                      const std::vector<Context>& contexts, const Context& target,
                                      const SolverOptions& opts = {});

struct RegretBound {
    double lhs = 0.0;   // mean regret over opt_h(psi), infeasible optima cost r_max
    double rhs = 0.0;
    double risk = 0.0;  // L_{D,psi}(h) under uniform D
    double eta = 0.0;
    double r_max = 0.0;
    std::uint64_t opt_count = 0;
    bool holds = true;
    bool degenerate = false;
    std::vector<std::string> flags;
};
// r_max defaults to the L1 norm of truth's soft weights.
RegretBound regret_bound_check(const MaxSatModel& h, const MaxSatModel& truth, const Context& psi,
                               std::optional<double> r_max = std::nullopt, const SolverOptions& opts = {});

struct EvalConfig {
    std::size_t regret_samples = 1000;
    std::uint64_t seed = 0;
    SolverOptions solver;
};

struct EvalReport {
    double training_score_fraction = 0.0;
    double global_accuracy = 0.0;
    double infeasibility = 0.0;
    std::optional<double> regret_mean;
    double regret_normalizer = 0.0;
    double regret_coverage = 0.0;
    std::size_t sample_count = 0;
    std::vector<std::string> flags;

    // Flat key/value view; a missing regret prints as "NA".
    std::vector<std::pair<std::string, std::string>> to_record() const;
};
EvalReport report(const MaxSatModel& learned, const MaxSatModel& truth, const Dataset& data,
                  const EvalConfig& config = {});

std::string format_metric(double v);

}  // namespace ctxsat
