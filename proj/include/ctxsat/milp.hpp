#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxsat/core.hpp"
#include "ctxsat/solver.hpp"

namespace ctxsat::milp {

inline constexpr double kEpsilon = 0.01;

enum class VarKind { Binary, Continuous };
enum class Sense { Le, Ge, Eq };

struct Variable {
    std::string name;
    VarKind kind = VarKind::Binary;
    double lower = 0.0;
    double upper = 1.0;
};

struct Term {
    int var = 0;
    double coef = 0.0;
};

struct LinearConstraint {
    std::string name;
    std::string family;
    std::vector<Term> terms;
    Sense sense = Sense::Le;
    double rhs = 0.0;
};

// Cut "x' violates a hard clause, or f_w(x') <= f_w(x+)" added after a mismatch.
struct Refinement {
    std::size_t context = 0;
    Assignment x_prime;
    std::size_t positive = 0;  // example index of x+
};

// Literal naming inside variable names: X_i -> "p<i>", not X_i -> "n<i>".
std::string literal_tag(Literal l);

class MilpProblem {
public:
    int add_var(const std::string& name, VarKind kind, double lower, double upper);
    int var(const std::string& name) const;  // throws DecodeError if absent
    std::optional<int> find(const std::string& name) const;
    void add_constraint(std::string family, std::string name, std::vector<Term> terms, Sense sense, double rhs);

    const std::vector<Variable>& variables() const { return vars_; }
    const std::vector<LinearConstraint>& constraints() const { return cons_; }
    std::vector<Term> objective;
    bool maximize = true;

    // Encoding context.
    int n = 0;
    int m = 0;
    double big_m = 0.0;
    double eps = kEpsilon;
    std::vector<Context> contexts;
    Dataset data;
    std::vector<std::size_t> example_context;
    std::vector<Refinement> refinements;

    std::map<std::string, std::size_t> family_sizes() const;

private:
    std::vector<Variable> vars_;
    std::unordered_map<std::string, int> index_;
    std::vector<LinearConstraint> cons_;
};

MilpProblem build_encoding(const Dataset& data, int m);

std::string emit_lp(const MilpProblem& problem);

struct LpConstraint {
    std::string name;
    std::vector<std::pair<std::string, double>> terms;
    Sense sense = Sense::Le;
    double rhs = 0.0;
};
struct LpDocument {
    bool maximize = true;
    std::vector<std::pair<std::string, double>> objective;
    std::vector<LpConstraint> constraints;
    std::map<std::string, std::pair<double, double>> bounds;
    std::vector<std::string> binaries;
};
LpDocument parse_lp(const std::string& text);

using Solution = std::unordered_map<std::string, double>;

struct SolutionParse {
    Solution values;
    std::vector<std::string> warnings;
};
// "name value" lines; names the problem does not know are reported as warnings and skipped.
SolutionParse parse_solution(const std::string& text, const MilpProblem& problem);

struct DecodeResult {
    MaxSatModel model;
    std::vector<std::size_t> zero_weight;  // soft constraints decoded to weight 0
};
DecodeResult decode(const MilpProblem& problem, const Solution& solution, double tolerance = 1e-6);

struct Mismatch {
    std::size_t context = 0;  // index into Dataset::unique_contexts()
    Context psi;
    Assignment x_prime;
    std::size_t positive = 0;  // example index
    Assignment x_plus;
};
std::vector<Mismatch> detect_mismatch(const MaxSatModel& model, const Dataset& data, const SolverOptions& opts = {});

MilpProblem refine(const MilpProblem& problem, std::span<const Mismatch> violations);

struct CheckResult {
    bool feasible = true;
    double objective = 0.0;
    std::vector<std::string> violated;
};
CheckResult check_solution(const MilpProblem& problem, const Solution& solution, double tolerance = 1e-7);

// Encoding-level model: clauses may be empty and weights of hard clauses are ignored.
struct EncodedModel {
    int n = 0;
    std::vector<std::vector<Literal>> clauses;
    std::vector<bool> hard;
    std::vector<double> weights;

    static EncodedModel from(const MaxSatModel& model);
};

// Full variable assignment induced by a model, per-context gamma and per-context x'.
Solution lift(const MilpProblem& problem, const EncodedModel& model, std::span<const double> gammas,
              std::span<const Assignment> x_primes);

struct FallbackResult {
    bool feasible = false;
    double objective = 0.0;
    EncodedModel model;
    std::vector<double> gammas;
    std::vector<Assignment> x_primes;
    Solution solution;
    std::uint64_t structures = 0;
};
inline constexpr int kMaxFallbackBinaries = 24;
// Exact optimum by enumeration of the structural binaries (a, c); see milp_fallback.cpp.
FallbackResult solve_exhaustive(const MilpProblem& problem);

}  // namespace ctxsat::milp
