#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctxsat/core.hpp"
#include "ctxsat/sls.hpp"
#include "ctxsat/solver.hpp"

namespace ctxsat {

struct GenSpec {
    int n = 8;
    int m_hard = 2;
    int m_soft = 2;
    std::optional<int> max_clause_len;  // defaults to ceil(n/2)
    int context_count = 25;
    std::optional<int> context_len;  // defaults to ceil(n/2)
    int pos_per_context = 2;
    int neg_per_context = 2;
    double neg_split = 0.5;  // fraction of negatives that are infeasible
    double noise_p = 0.0;
    std::uint64_t seed = 0;
    SolverOptions solver;

    int clause_len() const { return max_clause_len.value_or((n + 1) / 2); }
    int ctx_len() const { return context_len.value_or((n + 1) / 2); }
    void validate() const;
};

// Independent stream seed derived from a master seed (splitmix64 finaliser).
std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream);

// Number of distinct clauses over n variables with 1..max_len literals.
long double clause_space_size(int n, int max_len);
Clause random_clause(int n, int max_len, Rng& rng);

MaxSatModel gen_model(const GenSpec& spec, Rng& rng);
std::vector<Context> gen_contexts(const MaxSatModel& model, const GenSpec& spec, Rng& rng);

struct PositiveSample {
    std::vector<Assignment> assignments;
    bool truncated = false;  // fewer optima than requested
};
PositiveSample sample_positives(const MaxSatModel& model, const Context& psi, int k, Rng& rng,
                                const SolverOptions& opts = {});

struct NegativeSample {
    std::vector<Assignment> assignments;
    std::vector<ExampleKind> kinds;
    bool infeasible_fallback = false;  // no infeasible psi-assignment existed
    bool suboptimal_fallback = false;  // no sub-optimal psi-assignment existed
};
NegativeSample sample_negatives(const MaxSatModel& model, const Context& psi, int k, double split, Rng& rng,
                                const SolverOptions& opts = {});

Dataset add_noise(const Dataset& data, double p, std::uint64_t seed);

MaxSatModel import_benchmark(const std::string& cnf_text, int keep, double soft_fraction, Rng& rng,
                             const SolverOptions& opts = {});

Dataset build_dataset(const MaxSatModel& model, const GenSpec& spec, Rng& rng);

struct GeneratedInstance {
    MaxSatModel model;
    Dataset data;
    int model_redraws = 0;
};
// gen_model + build_dataset from spec.seed; redraws the ground truth when its contexts cannot be generated.
GeneratedInstance generate_instance(const GenSpec& spec, int max_redraws = 100);

}  // namespace ctxsat
