#include <cstring>

#include "doctest.h"
#include "oracle.hpp"

#include "ctxsat/kernels.hpp"
#include "ctxsat/solver.hpp"

using namespace ctxsat;
namespace k = ctxsat::kernels;

namespace {

struct Out {
    std::vector<double> values;
    std::vector<std::uint8_t> feasible;
};

Out run(void (*fn)(const k::CompiledModel&, std::span<const std::uint32_t>, double*, std::uint8_t*),
        const k::CompiledModel& cm, const std::vector<std::uint32_t>& codes) {
    Out o{std::vector<double>(codes.size(), -1.0), std::vector<std::uint8_t>(codes.size(), 7)};
    fn(cm, codes, o.values.data(), o.feasible.data());
    return o;
}

std::vector<std::uint32_t> random_codes(int n, std::size_t count, std::mt19937_64& rng) {
    std::vector<std::uint32_t> codes(count);
    const std::uint64_t mask = (std::uint64_t{1} << n) - 1;
    for (auto& c : codes) c = static_cast<std::uint32_t>(rng() & mask);
    return codes;
}

}  // namespace

TEST_SUITE("kernels") {
    TEST_CASE("scalar kernel matches the per-clause oracle") {
        std::mt19937_64 rng(21);
        for (int t = 0; t < 200; ++t) {
            const int n = 1 + t % 12;
            const auto model = oracle::random_model(n, 1 + t % 9, rng, 4);
            const auto om = oracle::from(model);
            const auto codes = random_codes(n, 1 + t % 37, rng);
            const auto out = run(k::evaluate_block_scalar, k::compile(model), codes);
            for (std::size_t i = 0; i < codes.size(); ++i) {
                const auto b = oracle::bits_of(n, codes[i]);
                REQUIRE(out.feasible[i] == (oracle::feasible(om, {}, b) ? 1 : 0));
                REQUIRE(out.values[i] == oracle::value(om, b));
            }
        }
    }

#if defined(CTXSAT_HAVE_AVX2)
    TEST_CASE("AVX2 kernel is bit-identical to scalar") {
        if (!k::backend_available(k::Backend::Avx2)) {
            MESSAGE("AVX2 unavailable on this CPU; equivalence not exercised");
            return;
        }
        std::mt19937_64 rng(8);
        for (int t = 0; t < 500; ++t) {
            const int n = 1 + t % 32;
            const auto model = oracle::random_model(n, t % 13, rng, 1 + t % 6);
            const auto cm = k::compile(model);
            // Lengths straddle the 8-lane width to cover the tail loop.
            const auto codes = random_codes(n, static_cast<std::size_t>(t % 41), rng);
            const auto s = run(k::evaluate_block_scalar, cm, codes);
            const auto v = run(k::evaluate_block_avx2, cm, codes);
            REQUIRE(s.feasible == v.feasible);
            REQUIRE(std::memcmp(s.values.data(), v.values.data(), s.values.size() * sizeof(double)) == 0);
        }
    }

    TEST_CASE("AVX2 handles irregular weights without reassociation") {
        if (!k::backend_available(k::Backend::Avx2)) return;
        std::vector<Constraint> cons;
        const double ws[] = {0.1, 0.2, 0.3, 1e-9, 0.7, 0.123456789, 0.3333333333333333};
        for (int j = 0; j < 7; ++j) cons.push_back({Clause::from_dimacs({j + 1, -((j + 1) % 7 + 1)}), false, ws[j]});
        const MaxSatModel model(7, cons);
        std::vector<std::uint32_t> codes(128);
        for (std::uint32_t i = 0; i < 128; ++i) codes[i] = i;
        const auto cm = k::compile(model);
        const auto s = run(k::evaluate_block_scalar, cm, codes);
        const auto v = run(k::evaluate_block_avx2, cm, codes);
        CHECK(std::memcmp(s.values.data(), v.values.data(), s.values.size() * sizeof(double)) == 0);
    }
#endif

    TEST_CASE("solver results do not depend on the backend") {
        std::mt19937_64 rng(4);
        const auto initial = k::active_backend();
        for (int t = 0; t < 60; ++t) {
            const int n = 4 + t % 9;
            const auto model = oracle::random_model(n, 2 + t % 6, rng);
            const auto psi = oracle::random_context(n, 3, rng);
            k::set_backend(k::Backend::Scalar);
            const auto a = optimum_set(model, psi);
            const auto ra = solve(model, psi);
            if (k::backend_available(k::Backend::Avx2)) k::set_backend(k::Backend::Avx2);
            const auto b = optimum_set(model, psi);
            const auto rb = solve(model, psi);
            REQUIRE(a == b);
            REQUIRE(ra.value == rb.value);
            REQUIRE(ra.witness == rb.witness);
        }
        k::set_backend(initial);
    }

    TEST_CASE("backend selection") {
        CHECK(k::backend_available(k::Backend::Scalar));
        CHECK(std::string(k::backend_name(k::Backend::Scalar)) == "scalar");
        if (!k::backend_available(k::Backend::Avx2)) CHECK_THROWS_AS(k::set_backend(k::Backend::Avx2), ArgumentError);
        CHECK_THROWS_AS(k::compile(MaxSatModel(33, {})), CapacityError);
    }
}
