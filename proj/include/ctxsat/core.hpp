#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctxsat {

// Variable count ceiling imposed by the 64-bit assignment code.
inline constexpr int kMaxVars = 63;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StructuralError : Error {
    using Error::Error;
};
struct CapacityError : Error {
    using Error::Error;
};
struct ArgumentError : Error {
    using Error::Error;
};
struct GenerationError : Error {
    using Error::Error;
};
struct DecodeError : Error {
    using Error::Error;
};
struct ParseError : Error {
    ParseError(const std::string& what, int line = 0);
    int line;
};

struct Literal {
    int var = 1;
    bool positive = true;

    static Literal from_dimacs(int v);
    int to_dimacs() const { return positive ? var : -var; }
    Literal negated() const { return {var, !positive}; }

    auto operator<=>(const Literal&) const = default;
};

// A disjunction; literals are kept sorted by (var, polarity) so equal sets compare equal.
class Clause {
public:
    Clause() = default;
    explicit Clause(std::vector<Literal> literals);
    static Clause from_dimacs(const std::vector<int>& lits);

    std::span<const Literal> literals() const { return lits_; }
    std::size_t size() const { return lits_.size(); }
    bool empty() const { return lits_.empty(); }
    bool contains(Literal l) const;
    bool has_var(int var) const;
    int max_var() const;
    std::vector<int> to_dimacs() const;

    Clause with_literal(Literal l) const;
    Clause without_literal(Literal l) const;
    Clause with_flipped(Literal l) const;

    bool operator==(const Clause&) const = default;

private:
    std::vector<Literal> lits_;
};

// A conjunction of literals; the empty context is the global context.
class Context {
public:
    Context() = default;
    explicit Context(std::vector<Literal> literals);
    static Context from_dimacs(const std::vector<int>& lits);

    std::span<const Literal> literals() const { return lits_; }
    std::size_t size() const { return lits_.size(); }
    bool empty() const { return lits_.empty(); }
    int max_var() const;
    std::vector<int> to_dimacs() const;
    std::string to_string() const;

    auto operator<=>(const Context&) const = default;

private:
    std::vector<Literal> lits_;
};

// Fixed-width bitset. Variable i lives at bit (n - i), so X1 is the most significant bit and
// integer order on codes equals lexicographic order on (x1, ..., xn).
class Assignment {
public:
    Assignment() = default;
    Assignment(int n, std::uint64_t code);
    static Assignment from_bits(const std::vector<int>& bits);
    static Assignment from_string(const std::string& bits);

    int n() const { return n_; }
    std::uint64_t code() const { return code_; }
    bool get(int var) const;
    bool satisfies(Literal l) const { return get(l.var) == l.positive; }
    Assignment with(int var, bool value) const;
    std::vector<int> bits() const;
    std::string to_string() const;

    auto operator<=>(const Assignment&) const = default;

private:
    int n_ = 0;
    std::uint64_t code_ = 0;
};

inline std::uint64_t var_bit(int n, int var) { return std::uint64_t{1} << (n - var); }

struct Constraint {
    Clause clause;
    bool hard = false;
    double weight = 0.0;

    bool operator==(const Constraint&) const = default;
};

class MaxSatModel {
public:
    MaxSatModel() = default;
    // Canonicalises hard constraints to weight 0.
    MaxSatModel(int n, std::vector<Constraint> constraints);

    int n() const { return n_; }
    std::size_t size() const { return cons_.size(); }
    const std::vector<Constraint>& constraints() const { return cons_; }
    const Constraint& operator[](std::size_t j) const { return cons_[j]; }

    std::size_t hard_count() const;
    std::size_t soft_count() const { return size() - hard_count(); }
    std::vector<Clause> hard_clauses() const;
    double soft_weight_l1() const;

    MaxSatModel with_constraint(std::size_t j, Constraint c) const;
    MaxSatModel with_scaled_weights(double lambda) const;

    // Structural equality with weight tolerance.
    bool equivalent(const MaxSatModel& other, double tol = 1e-9) const;
    bool operator==(const MaxSatModel&) const = default;

private:
    int n_ = 0;
    std::vector<Constraint> cons_;
};

enum class ExampleKind { Unknown, Positive, Infeasible, Suboptimal };
const char* to_string(ExampleKind k);
ExampleKind example_kind_from_string(const std::string& s);

struct ContextualExample {
    Context context;
    Assignment assignment;
    bool label = false;
    ExampleKind kind = ExampleKind::Unknown;

    ContextualExample() = default;
    ContextualExample(Context psi, Assignment x, bool y, ExampleKind k = ExampleKind::Unknown);
    bool operator==(const ContextualExample&) const = default;
};

struct Dataset {
    int n = 0;
    std::vector<ContextualExample> examples;
    std::map<std::string, std::string> metadata;

    Dataset() = default;
    Dataset(int n, std::vector<ContextualExample> examples,
            std::map<std::string, std::string> metadata = {});

    std::size_t size() const { return examples.size(); }
    // Distinct contexts in order of first appearance.
    std::vector<Context> unique_contexts() const;
    bool operator==(const Dataset&) const = default;
};

bool satisfies_clause(const Assignment& a, const Clause& c);
bool satisfies_context(const Assignment& a, const Context& psi);

}  // namespace ctxsat
