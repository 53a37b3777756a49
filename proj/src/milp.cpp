#include "ctxsat/milp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

namespace ctxsat::milp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string idx(const char* tag, std::size_t i) { return std::string(tag) + std::to_string(i + 1); }

std::string join(std::initializer_list<std::string> parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += '_';
        out += p;
    }
    return out;
}

// Literals of L in emission order: X1, not X1, X2, ...
std::vector<Literal> all_literals(int n) {
    std::vector<Literal> out;
    for (int v = 1; v <= n; ++v) {
        out.push_back({v, true});
        out.push_back({v, false});
    }
    return out;
}

// Variable-name builders, one per family of the encoding.
struct Names {
    static std::string ccov(std::size_t c) { return join({"ccov", idx("c", c)}); }
    static std::string xp(std::size_t c, int v) { return join({"xp", idx("c", c), "v" + std::to_string(v)}); }
    static std::string covl(std::size_t c, std::size_t j, Literal l) {
        return join({"covl", idx("c", c), idx("j", j), literal_tag(l)});
    }
    static std::string a(std::size_t j, Literal l) { return join({"a", idx("j", j), literal_tag(l)}); }
    static std::string covc(std::size_t c, std::size_t j) { return join({"covc", idx("c", c), idx("j", j)}); }
    static std::string hard(std::size_t j) { return join({"c", idx("j", j)}); }
    static std::string covpc(std::size_t c, std::size_t j) { return join({"covpc", idx("c", c), idx("j", j)}); }
    static std::string covctx(std::size_t c) { return join({"covctx", idx("c", c)}); }
    static std::string w(std::size_t j) { return join({"w", idx("j", j)}); }
    static std::string wz(std::size_t j) { return join({"wz", idx("j", j)}); }
    static std::string wc(std::size_t c, std::size_t j) { return join({"wc", idx("c", c), idx("j", j)}); }
    static std::string gamma(std::size_t c) { return join({"gamma", idx("c", c)}); }
    static std::string wk(std::size_t j, std::size_t k) { return join({"wk", idx("j", j), idx("k", k)}); }
    static std::string cov(std::size_t j, std::size_t k) { return join({"cov", idx("j", j), idx("k", k)}); }
    static std::string opt(std::size_t k) { return join({"opt", idx("k", k)}); }
    static std::string covp(std::size_t j, std::size_t k) { return join({"covp", idx("j", j), idx("k", k)}); }
    static std::string covk(std::size_t k) { return join({"covk", idx("k", k)}); }
    static std::string rcov(std::size_t r, std::size_t j) { return join({"rcov", idx("r", r), idx("j", j)}); }
    static std::string rcovp(std::size_t r, std::size_t j) { return join({"rcovp", idx("r", r), idx("j", j)}); }
    static std::string rfeas(std::size_t r) { return join({"rfeas", idx("r", r)}); }
    static std::string rw(std::size_t r, std::size_t j) { return join({"rw", idx("r", r), idx("j", j)}); }
    static std::string rsel(std::size_t r) { return join({"rsel", idx("r", r)}); }
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// Appends one refinement's variables and constraints.
void add_refinement(MilpProblem& p, const Refinement& ref) {
    const std::size_t r = p.refinements.size();
    const std::size_t m = static_cast<std::size_t>(p.m);
    const auto lits = all_literals(p.n);
    auto V = [&](const std::string& s) { return p.var(s); };
    for (std::size_t j = 0; j < m; ++j) {
        p.add_var(Names::rcov(r, j), VarKind::Binary, 0, 1);
        p.add_var(Names::rcovp(r, j), VarKind::Binary, 0, 1);
        p.add_var(Names::rw(r, j), VarKind::Continuous, 0, 1);
    }
    p.add_var(Names::rfeas(r), VarKind::Binary, 0, 1);
    p.add_var(Names::rsel(r), VarKind::Binary, 0, 1);
    const std::string tag = idx("r", r);
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<Term> sum = {{V(Names::rcov(r, j)), 1.0}};
        for (const auto& l : lits) {
            if (!ref.x_prime.satisfies(l)) continue;
            p.add_constraint("refcovge", join({"refcovge", tag, idx("j", j), literal_tag(l)}),
                             {{V(Names::rcov(r, j)), 1.0}, {V(Names::a(j, l)), -1.0}}, Sense::Ge, 0.0);
            sum.push_back({V(Names::a(j, l)), -1.0});
        }
        p.add_constraint("refcovle", join({"refcovle", tag, idx("j", j)}), sum, Sense::Le, 0.0);
    }
    for (std::size_t j = 0; j < m; ++j) {
        const int cp = V(Names::rcovp(r, j)), cv = V(Names::rcov(r, j)), hc = V(Names::hard(j));
        p.add_constraint("refcovpge", join({"refcovpge", tag, idx("j", j)}), {{cp, 1.0}, {cv, -1.0}}, Sense::Ge, 0.0);
        p.add_constraint("refcovpsoft", join({"refcovpsoft", tag, idx("j", j)}), {{cp, 1.0}, {hc, 1.0}}, Sense::Ge, 1.0);
        p.add_constraint("refcovple", join({"refcovple", tag, idx("j", j)}), {{cp, 1.0}, {cv, -1.0}, {hc, 1.0}},
                         Sense::Le, 1.0);
    }
    const int feas = V(Names::rfeas(r));
    std::vector<Term> all = {{feas, 1.0}};
    for (std::size_t j = 0; j < m; ++j) {
        p.add_constraint("reffeasle", join({"reffeasle", tag, idx("j", j)}), {{feas, 1.0}, {V(Names::rcovp(r, j)), -1.0}},
                         Sense::Le, 0.0);
        all.push_back({V(Names::rcovp(r, j)), -1.0});
    }
    p.add_constraint("reffeasge", join({"reffeasge", tag}), all, Sense::Ge, -(static_cast<double>(m) - 1.0));
    for (std::size_t j = 0; j < m; ++j) {
        const int rw = V(Names::rw(r, j)), cv = V(Names::rcov(r, j)), hc = V(Names::hard(j)), w = V(Names::w(j));
        p.add_constraint("refwcov", join({"refwcov", tag, idx("j", j)}), {{rw, 1.0}, {cv, -1.0}}, Sense::Le, 0.0);
        p.add_constraint("refwsoft", join({"refwsoft", tag, idx("j", j)}), {{rw, 1.0}, {hc, 1.0}}, Sense::Le, 1.0);
        p.add_constraint("refwle", join({"refwle", tag, idx("j", j)}), {{rw, 1.0}, {w, -1.0}, {cv, 1.0}, {hc, -1.0}},
                         Sense::Le, 1.0);
        p.add_constraint("refwge", join({"refwge", tag, idx("j", j)}), {{rw, 1.0}, {w, -1.0}, {cv, -1.0}, {hc, 1.0}},
                         Sense::Ge, -1.0);
    }
    const int sel = V(Names::rsel(r));
    p.add_constraint("refsel", join({"refsel", tag}), {{feas, 1.0}, {sel, 1.0}}, Sense::Le, 1.0);
    std::vector<Term> value;
    for (std::size_t j = 0; j < m; ++j) value.push_back({V(Names::rw(r, j)), 1.0});
    for (std::size_t j = 0; j < m; ++j) value.push_back({V(Names::wk(j, ref.positive)), -1.0});
    value.push_back({sel, -p.big_m});
    p.add_constraint("refvalue", join({"refvalue", tag}), value, Sense::Le, 0.0);
    p.refinements.push_back(ref);
}

}  // namespace

std::string literal_tag(Literal l) { return (l.positive ? "p" : "n") + std::to_string(l.var); }

int MilpProblem::add_var(const std::string& name, VarKind kind, double lower, double upper) {
    if (name.empty() || name.size() > 255) throw ArgumentError("variable name length must lie in [1,255]");
    if (index_.count(name)) throw ArgumentError("duplicate variable '" + name + "'");
    const int id = static_cast<int>(vars_.size());
    vars_.push_back({name, kind, lower, upper});
    index_.emplace(name, id);
    return id;
}

int MilpProblem::var(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DecodeError("unknown MILP variable '" + name + "'");
    return it->second;
}

std::optional<int> MilpProblem::find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void MilpProblem::add_constraint(std::string family, std::string name, std::vector<Term> terms, Sense sense,
                                 double rhs) {
    for (const auto& t : terms)
        if (t.var < 0 || t.var >= static_cast<int>(vars_.size()))
            throw ArgumentError("constraint '" + name + "' references an unregistered variable");
    if (name.size() > 255) throw ArgumentError("constraint name too long");
    cons_.push_back({std::move(name), std::move(family), std::move(terms), sense, rhs});
}

std::map<std::string, std::size_t> MilpProblem::family_sizes() const {
    std::map<std::string, std::size_t> out;
    for (const auto& c : cons_) ++out[c.family];
    return out;
}

MilpProblem build_encoding(const Dataset& data, int m) {
    if (data.examples.empty()) throw ArgumentError("cannot encode an empty dataset");
    if (m < 1) throw ArgumentError("constraint count m must be at least 1");
    MilpProblem p;
    p.n = data.n;
    p.m = m;
    p.big_m = 2.0 * (m + 1);
    p.data = data;
    p.contexts = data.unique_contexts();
    for (const auto& e : data.examples)
        p.example_context.push_back(static_cast<std::size_t>(
            std::find(p.contexts.begin(), p.contexts.end(), e.context) - p.contexts.begin()));

    const std::size_t C = p.contexts.size(), M = static_cast<std::size_t>(m), S = data.examples.size();
    const auto lits = all_literals(p.n);
    const double bigM = p.big_m, eps = p.eps;

    // Registry: families in table order.
    for (std::size_t c = 0; c < C; ++c) {
        p.add_var(Names::ccov(c), VarKind::Binary, 0, 1);
        for (int v = 1; v <= p.n; ++v) p.add_var(Names::xp(c, v), VarKind::Binary, 0, 1);
        for (std::size_t j = 0; j < M; ++j)
            for (const auto& l : lits) p.add_var(Names::covl(c, j, l), VarKind::Binary, 0, 1);
    }
    for (std::size_t j = 0; j < M; ++j)
        for (const auto& l : lits) p.add_var(Names::a(j, l), VarKind::Binary, 0, 1);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j) p.add_var(Names::covc(c, j), VarKind::Binary, 0, 1);
    for (std::size_t j = 0; j < M; ++j) p.add_var(Names::hard(j), VarKind::Binary, 0, 1);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j) p.add_var(Names::covpc(c, j), VarKind::Binary, 0, 1);
    for (std::size_t c = 0; c < C; ++c) p.add_var(Names::covctx(c), VarKind::Binary, 0, 1);
    for (std::size_t j = 0; j < M; ++j) p.add_var(Names::w(j), VarKind::Continuous, 0, 1);
    for (std::size_t j = 0; j < M; ++j) p.add_var(Names::wz(j), VarKind::Binary, 0, 1);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j) p.add_var(Names::wc(c, j), VarKind::Continuous, 0, 1);
    for (std::size_t c = 0; c < C; ++c) p.add_var(Names::gamma(c), VarKind::Continuous, -kInf, kInf);
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < S; ++k) p.add_var(Names::wk(j, k), VarKind::Continuous, 0, 1);
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < S; ++k) p.add_var(Names::cov(j, k), VarKind::Binary, 0, 1);
    for (std::size_t k = 0; k < S; ++k) p.add_var(Names::opt(k), VarKind::Binary, 0, 1);
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < S; ++k) p.add_var(Names::covp(j, k), VarKind::Binary, 0, 1);
    for (std::size_t k = 0; k < S; ++k) p.add_var(Names::covk(k), VarKind::Binary, 0, 1);

    auto V = [&](const std::string& s) { return p.var(s); };
    auto add = [&](const char* fam, std::string name, std::vector<Term> t, Sense s, double rhs) {
        p.add_constraint(fam, join({fam, std::move(name)}), std::move(t), s, rhs);
    };
    for (std::size_t c = 0; c < C; ++c) p.objective.push_back({V(Names::gamma(c)), 1.0});

    // First part: per-context optimum x'.
    for (std::size_t c = 0; c < C; ++c)
        for (const auto& l : p.contexts[c].literals())
            if (l.positive)
                add("ccovpos", join({idx("c", c), "v" + std::to_string(l.var)}),
                    {{V(Names::ccov(c)), 1}, {V(Names::xp(c, l.var)), -1}}, Sense::Le, 0);
    for (std::size_t c = 0; c < C; ++c)
        for (const auto& l : p.contexts[c].literals())
            if (!l.positive)
                add("ccovneg", join({idx("c", c), "v" + std::to_string(l.var)}),
                    {{V(Names::ccov(c)), 1}, {V(Names::xp(c, l.var)), 1}}, Sense::Le, 1);
    for (std::size_t c = 0; c < C; ++c) {
        std::vector<Term> t = {{V(Names::ccov(c)), 1}};
        int npos = 0;
        for (const auto& l : p.contexts[c].literals()) {
            t.push_back({V(Names::xp(c, l.var)), l.positive ? -1.0 : 1.0});
            npos += l.positive;
        }
        add("ccovall", idx("c", c), t, Sense::Ge, 1.0 - npos);
    }
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j)
            for (const auto& l : lits)
                add("covla", join({idx("c", c), idx("j", j), literal_tag(l)}),
                    {{V(Names::covl(c, j, l)), 1}, {V(Names::a(j, l)), -1}}, Sense::Le, 0);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j)
            for (int v = 1; v <= p.n; ++v) {
                const Literal l{v, true};
                add("covlpos", join({idx("c", c), idx("j", j), literal_tag(l)}),
                    {{V(Names::covl(c, j, l)), 1}, {V(Names::xp(c, v)), -1}}, Sense::Le, 0);
            }
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j)
            for (int v = 1; v <= p.n; ++v) {
                const Literal l{v, true};
                add("covlposge", join({idx("c", c), idx("j", j), literal_tag(l)}),
                    {{V(Names::covl(c, j, l)), 1}, {V(Names::a(j, l)), -1}, {V(Names::xp(c, v)), -1}}, Sense::Ge, -1);
            }
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j)
            for (int v = 1; v <= p.n; ++v) {
                const Literal l{v, false};
                add("covlneg", join({idx("c", c), idx("j", j), literal_tag(l)}),
                    {{V(Names::covl(c, j, l)), 1}, {V(Names::xp(c, v)), 1}}, Sense::Le, 1);
            }
    // cov >= a + (1 - x') - 1, the AND-linearisation for negative literals.
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j)
            for (int v = 1; v <= p.n; ++v) {
                const Literal l{v, false};
                add("covlnegge", join({idx("c", c), idx("j", j), literal_tag(l)}),
                    {{V(Names::covl(c, j, l)), 1}, {V(Names::a(j, l)), -1}, {V(Names::xp(c, v)), 1}}, Sense::Ge, 0);
            }
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j)
            for (const auto& l : lits)
                add("covcge", join({idx("c", c), idx("j", j), literal_tag(l)}),
                    {{V(Names::covc(c, j)), 1}, {V(Names::covl(c, j, l)), -1}}, Sense::Ge, 0);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j) {
            std::vector<Term> t = {{V(Names::covc(c, j)), 1}};
            for (const auto& l : lits) t.push_back({V(Names::covl(c, j, l)), -1});
            add("covcle", join({idx("c", c), idx("j", j)}), t, Sense::Le, 0);
        }
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j)
            add("covpcge", join({idx("c", c), idx("j", j)}), {{V(Names::covpc(c, j)), 1}, {V(Names::covc(c, j)), -1}},
                Sense::Ge, 0);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j)
            add("covpcsoft", join({idx("c", c), idx("j", j)}), {{V(Names::covpc(c, j)), 1}, {V(Names::hard(j)), 1}},
                Sense::Ge, 1);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j)
            add("covpcle", join({idx("c", c), idx("j", j)}),
                {{V(Names::covpc(c, j)), 1}, {V(Names::covc(c, j)), -1}, {V(Names::hard(j)), 1}}, Sense::Le, 1);
    for (std::size_t c = 0; c < C; ++c)
        add("covctxccov", idx("c", c), {{V(Names::covctx(c)), 1}, {V(Names::ccov(c)), -1}}, Sense::Le, 0);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j)
            add("covctxle", join({idx("c", c), idx("j", j)}), {{V(Names::covctx(c)), 1}, {V(Names::covpc(c, j)), -1}},
                Sense::Le, 0);
    for (std::size_t c = 0; c < C; ++c) {
        std::vector<Term> t = {{V(Names::covctx(c)), 1}, {V(Names::ccov(c)), -1}};
        for (std::size_t j = 0; j < M; ++j) t.push_back({V(Names::covpc(c, j)), -1});
        add("covctxge", idx("c", c), t, Sense::Ge, -static_cast<double>(M));
    }
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j)
            add("wccov", join({idx("c", c), idx("j", j)}), {{V(Names::wc(c, j)), 1}, {V(Names::covc(c, j)), -1}},
                Sense::Le, 0);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j)
            add("wcsoft", join({idx("c", c), idx("j", j)}), {{V(Names::wc(c, j)), 1}, {V(Names::hard(j)), 1}},
                Sense::Le, 1);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j)
            add("wcle", join({idx("c", c), idx("j", j)}),
                {{V(Names::wc(c, j)), 1}, {V(Names::w(j)), -1}, {V(Names::covc(c, j)), 1}, {V(Names::hard(j)), -1}},
                Sense::Le, 1);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < M; ++j)
            add("wcge", join({idx("c", c), idx("j", j)}),
                {{V(Names::wc(c, j)), 1}, {V(Names::w(j)), -1}, {V(Names::covc(c, j)), -1}, {V(Names::hard(j)), 1}},
                Sense::Ge, -1);
    for (std::size_t c = 0; c < C; ++c) {
        std::vector<Term> t = {{V(Names::gamma(c)), 1}};
        for (std::size_t j = 0; j < M; ++j) t.push_back({V(Names::wc(c, j)), -1});
        add("gammale", idx("c", c), t, Sense::Le, 0);
    }
    for (std::size_t c = 0; c < C; ++c)
        add("gammacov", idx("c", c), {{V(Names::gamma(c)), 1}, {V(Names::covctx(c)), -bigM}}, Sense::Le, 0);

    // Second part: weights, examples and labels.
    for (std::size_t j = 0; j < M; ++j)
        add("wwz", idx("j", j), {{V(Names::w(j)), 1}, {V(Names::wz(j)), 1}}, Sense::Le, 1);
    for (std::size_t j = 0; j < M; ++j)
        add("wmin", idx("j", j), {{V(Names::w(j)), 1}, {V(Names::wz(j)), 1}}, Sense::Ge, 3 * eps);
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < S; ++k)
            add("wkcov", join({idx("j", j), idx("k", k)}), {{V(Names::wk(j, k)), 1}, {V(Names::cov(j, k)), -1}},
                Sense::Le, 0);
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < S; ++k)
            add("wksoft", join({idx("j", j), idx("k", k)}), {{V(Names::wk(j, k)), 1}, {V(Names::hard(j)), 1}},
                Sense::Le, 1);
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < S; ++k)
            add("wkle", join({idx("j", j), idx("k", k)}),
                {{V(Names::wk(j, k)), 1}, {V(Names::w(j)), -1}, {V(Names::cov(j, k)), 1}, {V(Names::hard(j)), -1}},
                Sense::Le, 1);
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < S; ++k)
            add("wkge", join({idx("j", j), idx("k", k)}),
                {{V(Names::wk(j, k)), 1}, {V(Names::w(j)), -1}, {V(Names::cov(j, k)), -1}, {V(Names::hard(j)), 1}},
                Sense::Ge, -1);
    for (std::size_t k = 0; k < S; ++k) {
        std::vector<Term> t = {{V(Names::gamma(p.example_context[k])), 1}};
        for (std::size_t j = 0; j < M; ++j) t.push_back({V(Names::wk(j, k)), -1});
        t.push_back({V(Names::opt(k)), bigM});
        add("optle", idx("k", k), t, Sense::Le, bigM);
    }
    for (std::size_t k = 0; k < S; ++k) {
        std::vector<Term> t = {{V(Names::gamma(p.example_context[k])), 1}};
        for (std::size_t j = 0; j < M; ++j) t.push_back({V(Names::wk(j, k)), -1});
        t.push_back({V(Names::opt(k)), bigM});
        add("optge", idx("k", k), t, Sense::Ge, eps);
    }
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < S; ++k)
            add("covpge", join({idx("j", j), idx("k", k)}), {{V(Names::covp(j, k)), 1}, {V(Names::cov(j, k)), -1}},
                Sense::Ge, 0);
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < S; ++k)
            add("covpsoft", join({idx("j", j), idx("k", k)}), {{V(Names::covp(j, k)), 1}, {V(Names::hard(j)), 1}},
                Sense::Ge, 1);
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < S; ++k)
            add("covple", join({idx("j", j), idx("k", k)}),
                {{V(Names::covp(j, k)), 1}, {V(Names::cov(j, k)), -1}, {V(Names::hard(j)), 1}}, Sense::Le, 1);
    // x_kl is data: a zero product leaves the trivial row cov_jk >= 0.
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < S; ++k)
            for (const auto& l : lits) {
                std::vector<Term> t = {{V(Names::cov(j, k)), 1}};
                if (data.examples[k].assignment.satisfies(l)) t.push_back({V(Names::a(j, l)), -1});
                add("covge", join({idx("j", j), idx("k", k), literal_tag(l)}), t, Sense::Ge, 0);
            }
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < S; ++k) {
            std::vector<Term> t = {{V(Names::cov(j, k)), 1}};
            for (const auto& l : lits)
                if (data.examples[k].assignment.satisfies(l)) t.push_back({V(Names::a(j, l)), -1});
            add("covle", join({idx("j", j), idx("k", k)}), t, Sense::Le, 0);
        }
    for (std::size_t j = 0; j < M; ++j)
        for (int v = 1; v <= p.n; ++v)
            add("acompl", join({idx("j", j), "v" + std::to_string(v)}),
                {{V(Names::a(j, {v, true})), 1}, {V(Names::a(j, {v, false})), 1}}, Sense::Le, 1);
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < S; ++k)
            add("covkle", join({idx("j", j), idx("k", k)}), {{V(Names::covk(k)), 1}, {V(Names::covp(j, k)), -1}},
                Sense::Le, 0);
    for (std::size_t k = 0; k < S; ++k) {
        std::vector<Term> t = {{V(Names::covk(k)), 1}};
        for (std::size_t j = 0; j < M; ++j) t.push_back({V(Names::covp(j, k)), -1});
        add("covkge", idx("k", k), t, Sense::Ge, -(static_cast<double>(M) - 1.0));
    }
    for (std::size_t k = 0; k < S; ++k)
        add("covkctx", idx("k", k), {{V(Names::covk(k)), 1}, {V(Names::covctx(p.example_context[k])), -1}},
            Sense::Le, 0);
    for (std::size_t k = 0; k < S; ++k) {
        std::vector<Term> t = {{V(Names::covk(k)), 1}, {V(Names::opt(k)), 1},
                               {V(Names::covctx(p.example_context[k])), 1}};
        if (data.examples[k].label) add("labelpos", idx("k", k), t, Sense::Eq, 3);
        else add("labelneg", idx("k", k), t, Sense::Le, 2);
    }
    return p;
}

// ---- LP text ----

namespace {

const char* sense_text(Sense s) { return s == Sense::Le ? "<=" : s == Sense::Ge ? ">=" : "="; }

template <typename Named>
std::string expr_text(const std::vector<Named>& terms) {
    std::string out;
    bool first = true;
    for (const auto& [name, coef] : terms) {
        const double mag = std::abs(coef);
        if (first) out += coef < 0 ? "- " : "";
        else out += coef < 0 ? " - " : " + ";
        if (mag != 1.0) out += fmt(mag) + " ";
        out += name;
        first = false;
    }
    return out;
}

std::vector<std::pair<std::string, double>> named(const MilpProblem& p, const std::vector<Term>& terms) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& t : terms) out.emplace_back(p.variables()[t.var].name, t.coef);
    return out;
}

}  // namespace

std::string emit_lp(const MilpProblem& p) {
    std::ostringstream out;
    out << "\\ ctxsat contextual MAX-SAT learning encoding\n";
    out << "\\ n=" << p.n << " m=" << p.m << " contexts=" << p.contexts.size() << " examples=" << p.data.size()
        << " refinements=" << p.refinements.size() << "\n";
    out << (p.maximize ? "Maximize\n" : "Minimize\n");
    out << " obj: " << expr_text(named(p, p.objective)) << "\n";
    if (!p.constraints().empty()) {
        out << "Subject To\n";
        for (const auto& c : p.constraints())
            out << " " << c.name << ": " << expr_text(named(p, c.terms)) << " " << sense_text(c.sense) << " "
                << fmt(c.rhs) << "\n";
    }
    std::vector<const Variable*> bounded, binary;
    for (const auto& v : p.variables()) (v.kind == VarKind::Binary ? binary : bounded).push_back(&v);
    if (!bounded.empty()) {
        out << "Bounds\n";
        for (const auto* v : bounded) {
            if (std::isinf(v->lower) && std::isinf(v->upper)) out << " " << v->name << " free\n";
            else
                out << " " << (std::isinf(v->lower) ? "-inf" : fmt(v->lower)) << " <= " << v->name << " <= "
                    << (std::isinf(v->upper) ? "+inf" : fmt(v->upper)) << "\n";
        }
    }
    if (!binary.empty()) {
        out << "Binary\n";
        for (const auto* v : binary) out << " " << v->name << "\n";
    }
    out << "End\n";
    return out.str();
}

namespace {

std::string lower(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

double parse_number(const std::string& tok, int line) {
    const std::string t = lower(tok);
    if (t == "inf" || t == "+inf" || t == "infinity" || t == "+infinity") return kInf;
    if (t == "-inf" || t == "-infinity") return -kInf;
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError("bad number '" + tok + "'", line);
    }
}

bool is_number(const std::string& tok) {
    if (tok.empty()) return false;
    const char c = tok[0];
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
           ((c == '+' || c == '-') && tok.size() > 1);
}

std::vector<std::pair<std::string, double>> parse_terms(const std::vector<std::string>& toks, int line) {
    std::vector<std::pair<std::string, double>> out;
    double sign = 1.0, coef = 1.0;
    bool have_coef = false;
    for (const auto& t : toks) {
        if (t == "+") continue;
        if (t == "-") {
            sign = -sign;
            continue;
        }
        if (is_number(t)) {
            coef = parse_number(t, line);
            have_coef = true;
            continue;
        }
        out.emplace_back(t, sign * (have_coef ? coef : 1.0));
        sign = 1.0;
        coef = 1.0;
        have_coef = false;
    }
    if (have_coef) throw ParseError("dangling coefficient", line);
    return out;
}

std::vector<std::string> tokens(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
}

}  // namespace

LpDocument parse_lp(const std::string& text) {
    enum class Sec { None, Objective, Constraints, Bounds, Binary, General, End } sec = Sec::None;
    LpDocument doc;
    std::istringstream in(text);
    std::string raw, pending;
    int line = 0, pending_line = 0;
    auto finish_constraint = [&](const std::string& body, int at) {
        std::string name;
        std::string rest = body;
        if (auto colon = rest.find(':'); colon != std::string::npos) {
            name = tokens(rest.substr(0, colon)).empty() ? "" : tokens(rest.substr(0, colon))[0];
            rest = rest.substr(colon + 1);
        }
        auto toks = tokens(rest);
        auto it = std::find_if(toks.begin(), toks.end(),
                               [](const std::string& t) { return t == "<=" || t == ">=" || t == "=" || t == "=<" || t == "=>"; });
        if (it == toks.end() || it + 2 != toks.end()) throw ParseError("constraint without 'sense rhs'", at);
        LpConstraint c;
        c.name = name;
        c.sense = (*it == "<=" || *it == "=<") ? Sense::Le : (*it == "=" ? Sense::Eq : Sense::Ge);
        c.rhs = parse_number(*(it + 1), at);
        c.terms = parse_terms(std::vector<std::string>(toks.begin(), it), at);
        doc.constraints.push_back(std::move(c));
    };
    while (std::getline(in, raw)) {
        ++line;
        if (auto bs = raw.find('\\'); bs != std::string::npos) raw = raw.substr(0, bs);
        const auto toks = tokens(raw);
        if (toks.empty()) continue;
        const std::string head = lower(toks[0]);
        const std::string two = toks.size() > 1 ? head + " " + lower(toks[1]) : head;
        Sec next = Sec::None;
        if (head == "maximize" || head == "maximise" || head == "max") next = Sec::Objective, doc.maximize = true;
        else if (head == "minimize" || head == "minimise" || head == "min") next = Sec::Objective, doc.maximize = false;
        else if (two == "subject to" || head == "st" || head == "s.t." || two == "such that") next = Sec::Constraints;
        else if (head == "bounds" || head == "bound") next = Sec::Bounds;
        else if (head == "binary" || head == "binaries" || head == "bin") next = Sec::Binary;
        else if (head == "general" || head == "generals" || head == "gen") next = Sec::General;
        else if (head == "end") next = Sec::End;
        if (next != Sec::None) {
            if (!pending.empty()) throw ParseError("unterminated constraint", pending_line);
            sec = next;
            continue;
        }
        switch (sec) {
            case Sec::Objective: {
                std::string body = raw;
                if (auto colon = body.find(':'); colon != std::string::npos) body = body.substr(colon + 1);
                auto terms = parse_terms(tokens(body), line);
                doc.objective.insert(doc.objective.end(), terms.begin(), terms.end());
                break;
            }
            case Sec::Constraints: {
                if (pending.empty()) pending_line = line;
                pending += " " + raw;
                const auto t = tokens(pending);
                const bool has_sense = std::any_of(t.begin(), t.end(), [](const std::string& x) {
                    return x == "<=" || x == ">=" || x == "=" || x == "=<" || x == "=>";
                });
                if (has_sense && t.size() >= 2 && is_number(t.back())) {
                    finish_constraint(pending, pending_line);
                    pending.clear();
                }
                break;
            }
            case Sec::Bounds: {
                if (toks.size() == 2 && lower(toks[1]) == "free") {
                    doc.bounds[toks[0]] = {-kInf, kInf};
                } else if (toks.size() == 5 && toks[1] == "<=" && toks[3] == "<=") {
                    doc.bounds[toks[2]] = {parse_number(toks[0], line), parse_number(toks[4], line)};
                } else if (toks.size() == 3 && (toks[1] == "<=" || toks[1] == ">=")) {
                    auto& b = doc.bounds.try_emplace(toks[0], 0.0, kInf).first->second;
                    (toks[1] == "<=" ? b.second : b.first) = parse_number(toks[2], line);
                } else {
                    throw ParseError("unsupported bound line", line);
                }
                break;
            }
            case Sec::Binary:
                doc.binaries.insert(doc.binaries.end(), toks.begin(), toks.end());
                break;
            case Sec::General:
                break;
            case Sec::None:
            case Sec::End:
                throw ParseError("content outside a section", line);
        }
    }
    if (!pending.empty()) throw ParseError("unterminated constraint", pending_line);
    return doc;
}

SolutionParse parse_solution(const std::string& text, const MilpProblem& problem) {
    SolutionParse out;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto toks = tokens(raw);
        if (toks.empty() || toks[0][0] == '#' || toks[0][0] == '\\') continue;
        // Solvers that print "index name value [cost]" rows.
        if (!problem.find(toks[0]) && toks.size() >= 3 && problem.find(toks[1])) {
            out.values[toks[1]] = parse_number(toks[2], line);
            continue;
        }
        if (!problem.find(toks[0])) {
            out.warnings.push_back("line " + std::to_string(line) + ": ignoring unknown name '" + toks[0] + "'");
            continue;
        }
        if (toks.size() < 2) throw ParseError("missing value for '" + toks[0] + "'", line);
        out.values[toks[0]] = parse_number(toks[1], line);
    }
    return out;
}

// ---- decode / check ----

DecodeResult decode(const MilpProblem& p, const Solution& s, double tol) {
    auto get = [&](const std::string& name) {
        auto it = s.find(name);
        if (it == s.end()) throw DecodeError("solution lacks variable '" + name + "'");
        return it->second;
    };
    DecodeResult out;
    std::vector<Constraint> cons;
    const auto lits = all_literals(p.n);
    for (std::size_t j = 0; j < static_cast<std::size_t>(p.m); ++j) {
        std::vector<Literal> clause;
        for (const auto& l : lits)
            if (get(Names::a(j, l)) > 0.5) clause.push_back(l);
        if (clause.empty()) throw DecodeError("clause " + std::to_string(j + 1) + ": empty clause");
        Clause c;
        try {
            c = Clause(std::move(clause));
        } catch (const StructuralError& e) {
            throw DecodeError("clause " + std::to_string(j + 1) + ": " + e.what());
        }
        const bool hard = get(Names::hard(j)) > 0.5;
        double w = std::clamp(get(Names::w(j)), 0.0, 1.0);
        if (!hard && (get(Names::wz(j)) > 0.5 || w < 3 * p.eps - tol)) {
            w = 0.0;
            out.zero_weight.push_back(j);
        }
        cons.push_back({std::move(c), hard, hard ? 0.0 : w});
    }
    out.model = MaxSatModel(p.n, std::move(cons));
    return out;
}

CheckResult check_solution(const MilpProblem& p, const Solution& s, double tol) {
    CheckResult out;
    std::vector<double> x(p.variables().size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& v = p.variables()[i];
        auto it = s.find(v.name);
        if (it == s.end()) {
            out.violated.push_back("missing " + v.name);
            continue;
        }
        x[i] = it->second;
        if (x[i] < v.lower - tol || x[i] > v.upper + tol) out.violated.push_back("bound " + v.name);
        if (v.kind == VarKind::Binary && std::abs(x[i] - std::round(x[i])) > tol)
            out.violated.push_back("integrality " + v.name);
    }
    for (const auto& c : p.constraints()) {
        double lhs = 0.0;
        for (const auto& t : c.terms) lhs += t.coef * x[t.var];
        const bool ok = c.sense == Sense::Le   ? lhs <= c.rhs + tol
                        : c.sense == Sense::Ge ? lhs >= c.rhs - tol
                                               : std::abs(lhs - c.rhs) <= tol;
        if (!ok) out.violated.push_back(c.name);
    }
    for (const auto& t : p.objective) out.objective += t.coef * x[t.var];
    out.feasible = out.violated.empty();
    return out;
}

// ---- mismatch / refine ----

std::vector<Mismatch> detect_mismatch(const MaxSatModel& model, const Dataset& data, const SolverOptions& opts) {
    std::vector<Mismatch> out;
    const auto contexts = data.unique_contexts();
    for (std::size_t c = 0; c < contexts.size(); ++c) {
        std::optional<SolveResult> s;
        for (std::size_t k = 0; k < data.examples.size(); ++k) {
            const auto& e = data.examples[k];
            if (!e.label || !(e.context == contexts[c])) continue;
            if (!s) s = solve(model, contexts[c], opts);
            if (!s->feasible || !is_feasible(model, e.context, e.assignment)) continue;
            if (evaluate(model, e.assignment) < s->value - kOptimumTol)
                out.push_back({c, contexts[c], *s->witness, k, e.assignment});
        }
    }
    return out;
}

MilpProblem refine(const MilpProblem& problem, std::span<const Mismatch> violations) {
    MilpProblem out = problem;
    for (const auto& v : violations) {
        if (v.positive >= problem.data.size() || v.x_prime.n() != problem.n)
            throw ArgumentError("mismatch does not belong to this encoding");
        add_refinement(out, {v.context, v.x_prime, v.positive});
    }
    return out;
}

// ---- lifting ----

EncodedModel EncodedModel::from(const MaxSatModel& model) {
    EncodedModel e;
    e.n = model.n();
    for (const auto& c : model.constraints()) {
        e.clauses.emplace_back(c.clause.literals().begin(), c.clause.literals().end());
        e.hard.push_back(c.hard);
        e.weights.push_back(c.hard ? 0.0 : c.weight);
    }
    return e;
}

Solution lift(const MilpProblem& p, const EncodedModel& em, std::span<const double> gammas,
              std::span<const Assignment> x_primes) {
    const std::size_t M = static_cast<std::size_t>(p.m), C = p.contexts.size(), S = p.data.size();
    if (em.n != p.n || em.clauses.size() != M) throw ArgumentError("model shape does not match the encoding");
    if (gammas.size() != C || x_primes.size() != C) throw ArgumentError("need one gamma and one x' per context");
    const auto lits = all_literals(p.n);
    Solution s;
    auto has = [&](std::size_t j, Literal l) {
        return std::find(em.clauses[j].begin(), em.clauses[j].end(), l) != em.clauses[j].end();
    };
    auto covers = [&](std::size_t j, const Assignment& x) {
        return std::any_of(em.clauses[j].begin(), em.clauses[j].end(), [&](Literal l) { return x.satisfies(l); });
    };
    auto b = [](bool v) { return v ? 1.0 : 0.0; };
    std::vector<double> w(M);
    for (std::size_t j = 0; j < M; ++j) {
        for (const auto& l : lits) s[Names::a(j, l)] = b(has(j, l));
        s[Names::hard(j)] = b(em.hard[j]);
        w[j] = em.hard[j] ? 0.0 : em.weights[j];
        s[Names::w(j)] = w[j];
        s[Names::wz(j)] = b(w[j] < 3 * p.eps - 1e-12);
    }
    for (std::size_t c = 0; c < C; ++c) {
        const Assignment& x = x_primes[c];
        const bool ccov = satisfies_context(x, p.contexts[c]);
        s[Names::ccov(c)] = b(ccov);
        for (int v = 1; v <= p.n; ++v) s[Names::xp(c, v)] = b(x.get(v));
        bool all = ccov;
        for (std::size_t j = 0; j < M; ++j) {
            for (const auto& l : lits) s[Names::covl(c, j, l)] = b(has(j, l) && x.satisfies(l));
            const bool cj = covers(j, x);
            s[Names::covc(c, j)] = b(cj);
            const bool cp = !em.hard[j] || cj;
            s[Names::covpc(c, j)] = b(cp);
            all = all && cp;
            s[Names::wc(c, j)] = (!em.hard[j] && cj) ? w[j] : 0.0;
        }
        s[Names::covctx(c)] = b(all);
        s[Names::gamma(c)] = gammas[c];
    }
    for (std::size_t k = 0; k < S; ++k) {
        const Assignment& x = p.data.examples[k].assignment;
        bool all = true;
        double f = 0.0;
        for (std::size_t j = 0; j < M; ++j) {
            const bool cj = covers(j, x);
            s[Names::cov(j, k)] = b(cj);
            const bool cp = !em.hard[j] || cj;
            s[Names::covp(j, k)] = b(cp);
            all = all && cp;
            const double wk = (!em.hard[j] && cj) ? w[j] : 0.0;
            s[Names::wk(j, k)] = wk;
            f += wk;
        }
        s[Names::covk(k)] = b(all);
        s[Names::opt(k)] = b(f >= gammas[p.example_context[k]] - p.eps / 2);
    }
    for (std::size_t r = 0; r < p.refinements.size(); ++r) {
        const Assignment& x = p.refinements[r].x_prime;
        bool all = true;
        for (std::size_t j = 0; j < M; ++j) {
            const bool cj = covers(j, x);
            s[Names::rcov(r, j)] = b(cj);
            const bool cp = !em.hard[j] || cj;
            s[Names::rcovp(r, j)] = b(cp);
            all = all && cp;
            s[Names::rw(r, j)] = (!em.hard[j] && cj) ? w[j] : 0.0;
        }
        s[Names::rfeas(r)] = b(all);
        s[Names::rsel(r)] = b(!all);
    }
    return s;
}

}  // namespace ctxsat::milp
