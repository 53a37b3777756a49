#include "ctxsat/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ctxsat {

ParseError::ParseError(const std::string& what, int line_no)
    : Error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + what : what), line(line_no) {}

Literal Literal::from_dimacs(int v) {
    if (v == 0) throw StructuralError("literal 0 is not a variable");
    return {v > 0 ? v : -v, v > 0};
}

namespace {

void check_var(int var) {
    if (var < 1 || var > kMaxVars)
        throw StructuralError("variable index " + std::to_string(var) + " out of range");
}

// Sorts, rejects duplicates and complementary pairs.
std::vector<Literal> canonical_literals(std::vector<Literal> lits, const char* what) {
    for (const auto& l : lits) check_var(l.var);
    std::sort(lits.begin(), lits.end());
    for (std::size_t i = 1; i < lits.size(); ++i) {
        if (lits[i] == lits[i - 1])
            throw StructuralError(std::string(what) + ": duplicate literal " +
                                  std::to_string(lits[i].to_dimacs()));
        if (lits[i].var == lits[i - 1].var)
            throw StructuralError(std::string(what) + ": complementary literals on X" +
                                  std::to_string(lits[i].var));
    }
    return lits;
}

std::vector<Literal> from_signed(const std::vector<int>& lits) {
    std::vector<Literal> out;
    out.reserve(lits.size());
    for (int v : lits) out.push_back(Literal::from_dimacs(v));
    return out;
}

int max_var_of(std::span<const Literal> lits) {
    int m = 0;
    for (const auto& l : lits) m = std::max(m, l.var);
    return m;
}

std::vector<int> to_signed(std::span<const Literal> lits) {
    std::vector<int> out;
    out.reserve(lits.size());
    for (const auto& l : lits) out.push_back(l.to_dimacs());
    return out;
}

}  // namespace

Clause::Clause(std::vector<Literal> literals) : lits_(canonical_literals(std::move(literals), "clause")) {
    if (lits_.empty()) throw StructuralError("clause: empty disjunction");
}

Clause Clause::from_dimacs(const std::vector<int>& lits) { return Clause(from_signed(lits)); }

bool Clause::contains(Literal l) const { return std::binary_search(lits_.begin(), lits_.end(), l); }

bool Clause::has_var(int var) const {
    return std::any_of(lits_.begin(), lits_.end(), [&](const Literal& l) { return l.var == var; });
}

int Clause::max_var() const { return max_var_of(lits_); }

std::vector<int> Clause::to_dimacs() const { return to_signed(lits_); }

Clause Clause::with_literal(Literal l) const {
    auto lits = lits_;
    lits.push_back(l);
    return Clause(std::move(lits));
}

Clause Clause::without_literal(Literal l) const {
    auto lits = lits_;
    lits.erase(std::remove(lits.begin(), lits.end(), l), lits.end());
    return Clause(std::move(lits));
}

Clause Clause::with_flipped(Literal l) const {
    auto lits = lits_;
    for (auto& x : lits)
        if (x == l) x = l.negated();
    return Clause(std::move(lits));
}

Context::Context(std::vector<Literal> literals) : lits_(canonical_literals(std::move(literals), "context")) {}

Context Context::from_dimacs(const std::vector<int>& lits) { return Context(from_signed(lits)); }

int Context::max_var() const { return max_var_of(lits_); }

std::vector<int> Context::to_dimacs() const { return to_signed(lits_); }

std::string Context::to_string() const {
    if (lits_.empty()) return "T";
    std::string s;
    for (const auto& l : lits_) {
        if (!s.empty()) s += " & ";
        s += (l.positive ? "X" : "~X") + std::to_string(l.var);
    }
    return s;
}

Assignment::Assignment(int n, std::uint64_t code) : n_(n), code_(code) {
    if (n < 0 || n > kMaxVars) throw StructuralError("assignment width out of range");
    if (n < 64 && (code >> n) != 0) throw StructuralError("assignment code wider than n");
}

Assignment Assignment::from_bits(const std::vector<int>& bits) {
    const int n = static_cast<int>(bits.size());
    if (n > kMaxVars) throw StructuralError("assignment width out of range");
    std::uint64_t code = 0;
    for (int b : bits) {
        if (b != 0 && b != 1) throw StructuralError("assignment bits must be 0/1");
        code = (code << 1) | static_cast<std::uint64_t>(b);
    }
    return Assignment(n, code);
}

Assignment Assignment::from_string(const std::string& s) {
    std::vector<int> bits;
    for (char ch : s) {
        if (ch == '0' || ch == '1') bits.push_back(ch - '0');
        else if (ch != ' ' && ch != ',') throw StructuralError("bad assignment string '" + s + "'");
    }
    return from_bits(bits);
}

bool Assignment::get(int var) const {
    if (var < 1 || var > n_)
        throw StructuralError("variable X" + std::to_string(var) + " outside assignment of width " +
                              std::to_string(n_));
    return (code_ >> (n_ - var)) & 1u;
}

Assignment Assignment::with(int var, bool value) const {
    get(var);
    const auto bit = var_bit(n_, var);
    return Assignment(n_, value ? (code_ | bit) : (code_ & ~bit));
}

std::vector<int> Assignment::bits() const {
    std::vector<int> out(n_);
    for (int i = 1; i <= n_; ++i) out[i - 1] = get(i) ? 1 : 0;
    return out;
}

std::string Assignment::to_string() const {
    std::string s;
    for (int b : bits()) s += static_cast<char>('0' + b);
    return s;
}

MaxSatModel::MaxSatModel(int n, std::vector<Constraint> constraints) : n_(n), cons_(std::move(constraints)) {
    if (n < 0 || n > kMaxVars) throw StructuralError("model width out of range");
    for (std::size_t j = 0; j < cons_.size(); ++j) {
        auto& c = cons_[j];
        if (c.clause.empty()) throw StructuralError("constraint " + std::to_string(j) + ": empty clause");
        if (c.clause.max_var() > n)
            throw StructuralError("constraint " + std::to_string(j) + " mentions a variable above n");
        if (!(c.weight >= 0.0 && c.weight <= 1.0))
            throw StructuralError("constraint " + std::to_string(j) + ": weight outside [0,1]");
        if (c.hard) c.weight = 0.0;
    }
}

std::size_t MaxSatModel::hard_count() const {
    return static_cast<std::size_t>(
        std::count_if(cons_.begin(), cons_.end(), [](const Constraint& c) { return c.hard; }));
}

std::vector<Clause> MaxSatModel::hard_clauses() const {
    std::vector<Clause> out;
    for (const auto& c : cons_)
        if (c.hard) out.push_back(c.clause);
    return out;
}

double MaxSatModel::soft_weight_l1() const {
    double s = 0.0;
    for (const auto& c : cons_)
        if (!c.hard) s += c.weight;
    return s;
}

MaxSatModel MaxSatModel::with_constraint(std::size_t j, Constraint c) const {
    auto cons = cons_;
    cons.at(j) = std::move(c);
    return MaxSatModel(n_, std::move(cons));
}

MaxSatModel MaxSatModel::with_scaled_weights(double lambda) const {
    if (!(lambda > 0.0)) throw ArgumentError("weight scale must be positive");
    auto cons = cons_;
    for (auto& c : cons) c.weight *= lambda;
    return MaxSatModel(n_, std::move(cons));
}

bool MaxSatModel::equivalent(const MaxSatModel& other, double tol) const {
    if (n_ != other.n_ || cons_.size() != other.cons_.size()) return false;
    for (std::size_t j = 0; j < cons_.size(); ++j) {
        const auto& a = cons_[j];
        const auto& b = other.cons_[j];
        if (a.hard != b.hard || !(a.clause == b.clause)) return false;
        if (!a.hard && std::abs(a.weight - b.weight) > tol) return false;
    }
    return true;
}

const char* to_string(ExampleKind k) {
    switch (k) {
        case ExampleKind::Positive: return "positive";
        case ExampleKind::Infeasible: return "infeasible";
        case ExampleKind::Suboptimal: return "suboptimal";
        case ExampleKind::Unknown: break;
    }
    return "unknown";
}

ExampleKind example_kind_from_string(const std::string& s) {
    if (s == "positive") return ExampleKind::Positive;
    if (s == "infeasible") return ExampleKind::Infeasible;
    if (s == "suboptimal") return ExampleKind::Suboptimal;
    if (s == "unknown" || s.empty()) return ExampleKind::Unknown;
    throw ParseError("unknown example kind '" + s + "'");
}

ContextualExample::ContextualExample(Context psi, Assignment x, bool y, ExampleKind k)
    : context(std::move(psi)), assignment(x), label(y), kind(k) {
    if (context.max_var() > assignment.n())
        throw StructuralError("context mentions a variable outside the assignment");
    if (!satisfies_context(assignment, context))
        throw StructuralError("assignment " + assignment.to_string() + " violates its context " +
                              context.to_string());
}

Dataset::Dataset(int n_vars, std::vector<ContextualExample> exs, std::map<std::string, std::string> meta)
    : n(n_vars), examples(std::move(exs)), metadata(std::move(meta)) {
    for (std::size_t k = 0; k < examples.size(); ++k)
        if (examples[k].assignment.n() != n)
            throw StructuralError("example " + std::to_string(k) + " has width " +
                                  std::to_string(examples[k].assignment.n()) + ", dataset has n=" +
                                  std::to_string(n));
}

std::vector<Context> Dataset::unique_contexts() const {
    std::vector<Context> out;
    std::set<Context> seen;
    for (const auto& e : examples)
        if (seen.insert(e.context).second) out.push_back(e.context);
    return out;
}

bool satisfies_clause(const Assignment& a, const Clause& c) {
    for (const auto& l : c.literals())
        if (a.satisfies(l)) return true;
    return false;
}

bool satisfies_context(const Assignment& a, const Context& psi) {
    for (const auto& l : psi.literals())
        if (!a.satisfies(l)) return false;
    return true;
}

}  // namespace ctxsat
