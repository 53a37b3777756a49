#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ctxsat/milp.hpp"

namespace ctxsat::milp {

namespace {

constexpr double kTol = 1e-9;

struct Structure {
    std::vector<std::uint64_t> pos, neg;  // literal masks per clause
    std::vector<bool> hard;
    bool covers(std::size_t j, std::uint64_t code) const { return ((code & pos[j]) | (~code & neg[j])) != 0; }
};

// Per-context view of one structure.
struct ContextView {
    std::vector<int> feasible_patterns;  // patterns of hard-feasible codes inside psi
    std::vector<std::uint64_t> feasible_codes;
    std::optional<std::uint64_t> uncovered;  // some x' with covctx = 0
    bool has_positive = false;
    bool has_covered_example = false;
    struct Ex {
        int pattern;
        bool covered;
        bool label;
    };
    std::vector<Ex> examples;
};

// Solves A w = b for square A; false when singular.
bool solve_square(std::vector<std::vector<double>> a, std::vector<double> b, std::vector<double>& out) {
    const std::size_t s = b.size();
    for (std::size_t col = 0; col < s; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < s; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-12) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = 0; r < s; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < s; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    out.resize(s);
    for (std::size_t i = 0; i < s; ++i) out[i] = b[i] / a[i][i];
    return true;
}

// Vertices of the arrangement {(p - q).w = d, d in {0, +-eps}} + {w_j in {0, 3eps, 1}} inside the weight domain.
std::vector<std::vector<double>> weight_vertices(const std::vector<std::vector<int>>& patterns, std::size_t s,
                                                 double eps) {
    if (s == 0) return {{}};
    std::set<std::pair<std::vector<int>, double>> planes;
    auto add_plane = [&](std::vector<int> d, double rhs) {
        auto nz = std::find_if(d.begin(), d.end(), [](int v) { return v != 0; });
        if (nz == d.end()) return;
        if (*nz < 0) {
            for (auto& v : d) v = -v;
            rhs = -rhs;
        }
        planes.emplace(std::move(d), rhs);
    };
    for (std::size_t a = 0; a < patterns.size(); ++a)
        for (std::size_t b = a + 1; b < patterns.size(); ++b) {
            std::vector<int> d(s);
            for (std::size_t j = 0; j < s; ++j) d[j] = patterns[a][j] - patterns[b][j];
            for (double r : {0.0, eps, -eps}) add_plane(d, r);
        }
    for (std::size_t j = 0; j < s; ++j) {
        std::vector<int> e(s, 0);
        e[j] = 1;
        for (double r : {0.0, 3 * eps, 1.0}) add_plane(e, r);
    }
    const std::vector<std::pair<std::vector<int>, double>> list(planes.begin(), planes.end());
    std::set<std::vector<long long>> seen;
    std::vector<std::vector<double>> out;
    std::vector<std::size_t> pick(s);
    // Lexicographic s-subsets of the plane list.
    auto visit = [&]() {
        std::vector<std::vector<double>> a(s, std::vector<double>(s));
        std::vector<double> b(s), w;
        for (std::size_t r = 0; r < s; ++r) {
            for (std::size_t c = 0; c < s; ++c) a[r][c] = list[pick[r]].first[c];
            b[r] = list[pick[r]].second;
        }
        if (!solve_square(std::move(a), std::move(b), w)) return;
        std::vector<long long> key(s);
        for (std::size_t j = 0; j < s; ++j) {
            if (w[j] > -kTol && w[j] < kTol) w[j] = 0.0;
            else if (w[j] > 3 * eps - kTol && w[j] < 3 * eps) w[j] = 3 * eps;
            else if (w[j] > 1.0 && w[j] < 1.0 + kTol) w[j] = 1.0;
            if (w[j] != 0.0 && (w[j] < 3 * eps || w[j] > 1.0)) return;
            key[j] = std::llround(w[j] * 1e9);
        }
        if (seen.insert(key).second) out.push_back(std::move(w));
    };
    const std::size_t h = list.size();
    if (h < s) return out;
    for (std::size_t i = 0; i < s; ++i) pick[i] = i;
    while (true) {
        visit();
        std::size_t i = s;
        while (i > 0 && pick[i - 1] == h - s + i - 1) --i;
        if (i == 0) break;
        ++pick[i - 1];
        for (std::size_t k = i; k < s; ++k) pick[k] = pick[k - 1] + 1;
    }
    return out;
}

struct Evaluation {
    double objective = 0.0;
    std::vector<double> gammas;
    std::vector<std::uint64_t> x_primes;
};

// Largest admissible gamma for one context, or nullopt when the context admits none.
std::optional<std::pair<double, std::uint64_t>> best_gamma(const ContextView& v, const std::vector<double>& pv,
                                                          double eps) {
    std::optional<std::pair<double, std::uint64_t>> best;
    // Positives need cov_k = 1 whatever gamma is.
    for (const auto& e : v.examples)
        if (e.label && !e.covered) return best;
    if (!v.feasible_patterns.empty()) {
        std::size_t arg = 0;
        double u = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < v.feasible_patterns.size(); ++i)
            if (pv[v.feasible_patterns[i]] > u) u = pv[v.feasible_patterns[i]], arg = i;
        double lo = -std::numeric_limits<double>::infinity();
        for (const auto& e : v.examples) {
            const double f = pv[e.pattern];
            if (e.label) u = std::min(u, f);
            else if (e.covered) lo = std::max(lo, f + eps);
        }
        // Step below every gap (f, f + eps) of negatives that violate a hard clause.
        for (bool moved = true; moved;) {
            moved = false;
            for (const auto& e : v.examples) {
                if (e.label || e.covered) continue;
                const double f = pv[e.pattern];
                if (u > f + kTol && u < f + eps - kTol) u = f, moved = true;
            }
        }
        if (u >= lo - kTol) best.emplace(u, v.feasible_codes[arg]);
    }
    if (v.uncovered && !v.has_positive && !v.has_covered_example && (!best || best->first < 0.0))
        best.emplace(0.0, *v.uncovered);
    return best;
}

}  // namespace

FallbackResult solve_exhaustive(const MilpProblem& p) {
    const int n = p.n;
    const std::size_t M = static_cast<std::size_t>(p.m);
    if (2 * n * p.m + p.m > kMaxFallbackBinaries)
        throw CapacityError("exhaustive fallback handles at most " + std::to_string(kMaxFallbackBinaries) +
                            " structural binaries, got " + std::to_string(2 * n * p.m + p.m));
    const std::uint64_t codes = std::uint64_t{1} << n;
    const std::size_t C = p.contexts.size();
    std::vector<std::uint64_t> ctx_fixed(C), ctx_mask(C);
    for (std::size_t c = 0; c < C; ++c)
        for (const auto& l : p.contexts[c].literals()) {
            ctx_mask[c] |= var_bit(n, l.var);
            if (l.positive) ctx_fixed[c] |= var_bit(n, l.var);
        }

    FallbackResult best;
    bool best_has_empty = true;
    Structure st;
    st.pos.assign(M, 0);
    st.neg.assign(M, 0);
    st.hard.assign(M, false);
    std::vector<int> lit(static_cast<std::size_t>(n) * M, 0);  // 0 absent, 1 positive, 2 negative
    const std::uint64_t lit_states = [&] {
        std::uint64_t t = 1;
        for (std::size_t i = 0; i < lit.size(); ++i) t *= 3;
        return t;
    }();

    for (std::uint64_t ls = 0; ls < lit_states; ++ls) {
        std::uint64_t rest = ls;
        for (std::size_t j = 0; j < M; ++j) {
            st.pos[j] = st.neg[j] = 0;
            for (int v = 1; v <= n; ++v) {
                const int s = static_cast<int>(rest % 3);
                rest /= 3;
                if (s == 1) st.pos[j] |= var_bit(n, v);
                if (s == 2) st.neg[j] |= var_bit(n, v);
            }
        }
        bool has_empty = false;
        for (std::size_t j = 0; j < M; ++j) has_empty = has_empty || (st.pos[j] | st.neg[j]) == 0;
        for (std::uint64_t hs = 0; hs < (std::uint64_t{1} << M); ++hs) {
            ++best.structures;
            std::vector<std::size_t> soft;
            for (std::size_t j = 0; j < M; ++j) {
                st.hard[j] = (hs >> j) & 1u;
                if (!st.hard[j]) soft.push_back(j);
            }
            // Patterns over soft clauses, one id per distinct pattern.
            std::vector<std::vector<int>> patterns = {std::vector<int>(soft.size(), 0)};
            std::vector<int> code_pattern(codes);
            std::vector<char> code_feasible(codes);
            for (std::uint64_t x = 0; x < codes; ++x) {
                std::vector<int> pat(soft.size());
                for (std::size_t i = 0; i < soft.size(); ++i) pat[i] = st.covers(soft[i], x);
                auto it = std::find(patterns.begin(), patterns.end(), pat);
                code_pattern[x] = static_cast<int>(it - patterns.begin());
                if (it == patterns.end()) patterns.push_back(std::move(pat));
                bool ok = true;
                for (std::size_t j = 0; j < M && ok; ++j) ok = !st.hard[j] || st.covers(j, x);
                code_feasible[x] = ok;
            }
            std::vector<ContextView> views(C);
            for (std::size_t c = 0; c < C; ++c) {
                auto& v = views[c];
                std::set<int> seen;
                for (std::uint64_t x = 0; x < codes; ++x) {
                    const bool in = (x & ctx_mask[c]) == ctx_fixed[c];
                    if (in && code_feasible[x]) {
                        if (seen.insert(code_pattern[x]).second) {
                            v.feasible_patterns.push_back(code_pattern[x]);
                            v.feasible_codes.push_back(x);
                        }
                    } else if (!v.uncovered) {
                        v.uncovered = x;
                    }
                }
            }
            for (std::size_t k = 0; k < p.data.size(); ++k) {
                const auto& e = p.data.examples[k];
                auto& v = views[p.example_context[k]];
                const auto x = e.assignment.code();
                v.examples.push_back({code_pattern[x], code_feasible[x] != 0, e.label});
                v.has_positive = v.has_positive || e.label;
                v.has_covered_example = v.has_covered_example || code_feasible[x];
            }
            for (const auto& w : weight_vertices(patterns, soft.size(), p.eps)) {
                std::vector<double> pv(patterns.size(), 0.0);
                for (std::size_t q = 0; q < patterns.size(); ++q)
                    for (std::size_t i = 0; i < soft.size(); ++i) pv[q] += patterns[q][i] * w[i];
                bool ok = true;
                for (const auto& r : p.refinements) {
                    const auto x = r.x_prime.code();
                    if (code_feasible[x] &&
                        pv[code_pattern[x]] > pv[code_pattern[p.data.examples[r.positive].assignment.code()]] + kTol) {
                        ok = false;
                        break;
                    }
                }
                if (!ok) continue;
                Evaluation ev;
                for (std::size_t c = 0; c < C && ok; ++c) {
                    auto g = best_gamma(views[c], pv, p.eps);
                    if (!g) {
                        ok = false;
                        break;
                    }
                    ev.objective += g->first;
                    ev.gammas.push_back(g->first);
                    ev.x_primes.push_back(g->second);
                }
                if (!ok) continue;
                const bool better = !best.feasible || ev.objective > best.objective + 1e-7 ||
                                    (ev.objective > best.objective - 1e-7 && best_has_empty && !has_empty);
                if (!better) continue;
                best.feasible = true;
                best.objective = ev.objective;
                best_has_empty = has_empty;
                best.gammas = ev.gammas;
                best.x_primes.clear();
                for (auto x : ev.x_primes) best.x_primes.emplace_back(n, x);
                EncodedModel em;
                em.n = n;
                for (std::size_t j = 0; j < M; ++j) {
                    std::vector<Literal> cl;
                    for (int v = 1; v <= n; ++v) {
                        if (st.pos[j] & var_bit(n, v)) cl.push_back({v, true});
                        if (st.neg[j] & var_bit(n, v)) cl.push_back({v, false});
                    }
                    em.clauses.push_back(std::move(cl));
                    em.hard.push_back(st.hard[j]);
                    em.weights.push_back(0.0);
                }
                for (std::size_t i = 0; i < soft.size(); ++i) em.weights[soft[i]] = w[i];
                best.model = std::move(em);
            }
        }
    }
    if (best.feasible) best.solution = lift(p, best.model, best.gammas, best.x_primes);
    return best;
}

}  // namespace ctxsat::milp
