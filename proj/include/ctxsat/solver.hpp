#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ctxsat/core.hpp"

namespace ctxsat {

// Absolute tolerance for "attains the optimal value".
inline constexpr double kOptimumTol = 1e-9;
// Largest enumeration limit accepted at all.
inline constexpr int kMaxEnumerationLimit = 30;

struct SolverOptions {
    int enumeration_limit = 20;
};

// The assignments satisfying a context, in increasing code order.
class ContextSpace {
public:
    ContextSpace(int n, const Context& psi, const SolverOptions& opts = {});

    int n() const { return n_; }
    std::uint64_t size() const { return std::uint64_t{1} << free_count_; }
    std::uint32_t fixed_bits() const { return fixed_; }
    std::uint32_t free_mask() const { return free_; }
    // Appends every code of the space to out.
    void codes(std::vector<std::uint32_t>& out) const;
    // Rank of a member code within codes().
    std::uint64_t index_of(std::uint32_t code) const;
    bool contains(std::uint32_t code) const { return (code & ~free_) == fixed_; }

    template <typename Fn>  // fn(std::span<const std::uint32_t>) per chunk, in order
    void for_each_chunk(Fn&& fn, std::size_t chunk = 4096) const;

private:
    int n_;
    int free_count_ = 0;
    std::uint32_t fixed_ = 0;
    std::uint32_t free_ = 0;
};

struct SolveResult {
    bool feasible = false;
    double value = 0.0;
    std::optional<Assignment> witness;
};

double evaluate(const MaxSatModel& model, const Assignment& a);
bool is_feasible(const MaxSatModel& model, const Context& psi, const Assignment& a);

// Optimum of the model restricted to psi; ties go to the lowest code.
SolveResult solve(const MaxSatModel& model, const Context& psi, const SolverOptions& opts = {});
std::vector<Assignment> optimum_set(const MaxSatModel& model, const Context& psi, const SolverOptions& opts = {});

struct Classification {
    bool positive = false;
    bool context_violated = false;    // a does not satisfy psi
    bool context_infeasible = false;  // no feasible assignment in psi; h is 0 there
};
Classification classify_checked(const MaxSatModel& model, const Context& psi, const Assignment& a,
                                const SolverOptions& opts = {});
bool classify(const MaxSatModel& model, const Context& psi, const Assignment& a, const SolverOptions& opts = {});

std::uint64_t model_count(int n, std::span<const Clause> clauses, const Context& psi, const SolverOptions& opts = {});
// Assignments satisfying every clause of `sat` and falsifying every clause of `unsat`.
std::uint64_t count_with_falsified(int n, std::span<const Clause> sat, std::span<const Clause> unsat,
                                   const SolverOptions& opts = {});

// theta_M: hard clauses plus the soft-index sets whose weight sum equals the global optimum.
struct OptimalRegion {
    int n = 0;
    std::vector<Clause> hard;
    std::vector<Clause> soft;  // soft clauses in model order; subsets index into this list
    double optimum = 0.0;
    std::vector<std::vector<int>> optimal_subsets;

    bool contains(const Assignment& a) const;
    std::uint64_t count(const SolverOptions& opts = {}) const;
};
inline constexpr int kMaxRegionSoft = 20;
OptimalRegion optimal_region_formula(const MaxSatModel& model, const SolverOptions& opts = {});

template <typename Fn>
void ContextSpace::for_each_chunk(Fn&& fn, std::size_t chunk) const {
    std::vector<std::uint32_t> buf;
    buf.reserve(chunk);
    std::uint32_t s = 0;
    const std::uint64_t total = size();
    for (std::uint64_t i = 0; i < total; ++i) {
        buf.push_back(fixed_ | s);
        s = (s - free_) & free_;  // next subset of free_ in increasing order
        if (buf.size() == chunk) {
            fn(std::span<const std::uint32_t>(buf));
            buf.clear();
        }
    }
    if (!buf.empty()) fn(std::span<const std::uint32_t>(buf));
}

}  // namespace ctxsat
