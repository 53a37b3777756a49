#pragma once
// The three-variable worked example used across suites.

#include "ctxsat/core.hpp"

namespace fixtures {

inline ctxsat::Assignment A(const char* s) { return ctxsat::Assignment::from_string(s); }
inline ctxsat::Context C(std::vector<int> lits) { return ctxsat::Context::from_dimacs(lits); }

// Target: hard X1 v ~X3, soft 1.0 ~X1.
inline ctxsat::MaxSatModel worked_target() {
    using ctxsat::Clause;
    return ctxsat::MaxSatModel(3, {{Clause::from_dimacs({1, -3}), true, 0.0}, {Clause::from_dimacs({-1}), false, 1.0}});
}

// The model the first MILP solve returns: soft 1.0 ~X1, soft 1.0 ~X1 v X3.
inline ctxsat::MaxSatModel worked_wrong() {
    using ctxsat::Clause;
    return ctxsat::MaxSatModel(3,
                               {{Clause::from_dimacs({-1}), false, 1.0}, {Clause::from_dimacs({-1, 3}), false, 1.0}});
}

// Contexts in order of appearance: T, X3, X2 & ~X3, ~X2 & ~X3.
inline ctxsat::Dataset worked_data() {
    using ctxsat::ContextualExample;
    return ctxsat::Dataset(3, {
                                  ContextualExample(C({}), A("111"), false),
                                  ContextualExample(C({}), A("010"), true),
                                  ContextualExample(C({3}), A("111"), true),
                                  ContextualExample(C({3}), A("101"), true),
                                  ContextualExample(C({2, -3}), A("010"), true),
                                  ContextualExample(C({2, -3}), A("110"), false),
                                  ContextualExample(C({-2, -3}), A("100"), false),
                              });
}

// Three unit-weight soft unit clauses X1, X2, X3; the global optimum is 111.
inline ctxsat::MaxSatModel rep_truth() {
    using ctxsat::Clause;
    return ctxsat::MaxSatModel(3, {{Clause::from_dimacs({1}), false, 1.0},
                                   {Clause::from_dimacs({2}), false, 1.0},
                                   {Clause::from_dimacs({3}), false, 1.0}});
}

// Ignores X1, so it also calls 011 a global optimum.
inline ctxsat::MaxSatModel rep_faulty() {
    using ctxsat::Clause;
    return ctxsat::MaxSatModel(3, {{Clause::from_dimacs({2}), false, 1.0}, {Clause::from_dimacs({3}), false, 1.0}});
}

}  // namespace fixtures
