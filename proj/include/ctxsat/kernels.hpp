#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ctxsat/core.hpp"

// Block evaluation of assignment codes against a compiled model. A clause with positive-literal
// mask P and negative-literal mask N is satisfied by code a iff ((a & P) | (~a & N)) != 0.
namespace ctxsat::kernels {

// Widest model the 32-bit lanes can hold.
inline constexpr int kMaxKernelVars = 32;

struct CompiledModel {
    int n = 0;
    std::vector<std::uint32_t> hard_pos, hard_neg;
    std::vector<std::uint32_t> soft_pos, soft_neg;
    std::vector<double> soft_w;
};

CompiledModel compile(const MaxSatModel& model);
CompiledModel compile_hard(int n, std::span<const Clause> hard);

enum class Backend { Scalar, Avx2 };

const char* backend_name(Backend b);
bool backend_available(Backend b);
Backend active_backend();
// Throws ArgumentError when b is not available on this CPU.
void set_backend(Backend b);

// values[i]: soft weights summed in clause order; feasible[i]: 1 iff every hard clause holds.
// Scalar and AVX2 paths add in the same order and agree bit-for-bit.
void evaluate_block(const CompiledModel& m, std::span<const std::uint32_t> codes, double* values,
                    std::uint8_t* feasible);

void evaluate_block_scalar(const CompiledModel& m, std::span<const std::uint32_t> codes, double* values,
                           std::uint8_t* feasible);
#if defined(CTXSAT_HAVE_AVX2)
void evaluate_block_avx2(const CompiledModel& m, std::span<const std::uint32_t> codes, double* values,
                         std::uint8_t* feasible);
#endif

}  // namespace ctxsat::kernels
