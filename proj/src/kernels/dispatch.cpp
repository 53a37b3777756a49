#include <atomic>

#include "ctxsat/kernels.hpp"

namespace ctxsat::kernels {

namespace {

std::uint32_t mask_of(int n, const Clause& c, bool positive) {
    std::uint32_t m = 0;
    for (const auto& l : c.literals())
        if (l.positive == positive) m |= static_cast<std::uint32_t>(var_bit(n, l.var));
    return m;
}

void check_width(int n) {
    if (n > kMaxKernelVars)
        throw CapacityError("n=" + std::to_string(n) + " exceeds the kernel width of " +
                            std::to_string(kMaxKernelVars));
}

Backend detect() {
#if defined(CTXSAT_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2")) return Backend::Avx2;
#endif
    return Backend::Scalar;
}

std::atomic<Backend>& active() {
    static std::atomic<Backend> b{detect()};
    return b;
}

}  // namespace

CompiledModel compile(const MaxSatModel& model) {
    check_width(model.n());
    CompiledModel out;
    out.n = model.n();
    for (const auto& c : model.constraints()) {
        if (c.hard) {
            out.hard_pos.push_back(mask_of(model.n(), c.clause, true));
            out.hard_neg.push_back(mask_of(model.n(), c.clause, false));
        } else {
            out.soft_pos.push_back(mask_of(model.n(), c.clause, true));
            out.soft_neg.push_back(mask_of(model.n(), c.clause, false));
            out.soft_w.push_back(c.weight);
        }
    }
    return out;
}

CompiledModel compile_hard(int n, std::span<const Clause> hard) {
    check_width(n);
    CompiledModel out;
    out.n = n;
    for (const auto& c : hard) {
        if (c.max_var() > n) throw StructuralError("clause mentions a variable above n");
        out.hard_pos.push_back(mask_of(n, c, true));
        out.hard_neg.push_back(mask_of(n, c, false));
    }
    return out;
}

const char* backend_name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

bool backend_available(Backend b) {
    if (b == Backend::Scalar) return true;
    return detect() == Backend::Avx2;
}

Backend active_backend() { return active().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
    if (!backend_available(b))
        throw ArgumentError(std::string("kernel backend '") + backend_name(b) + "' unavailable on this CPU");
    active().store(b, std::memory_order_relaxed);
}

void evaluate_block_scalar(const CompiledModel& m, std::span<const std::uint32_t> codes, double* values,
                           std::uint8_t* feasible) {
    const std::size_t nh = m.hard_pos.size(), ns = m.soft_pos.size();
    for (std::size_t i = 0; i < codes.size(); ++i) {
        const std::uint32_t a = codes[i];
        std::uint8_t ok = 1;
        for (std::size_t j = 0; j < nh; ++j)
            if (((a & m.hard_pos[j]) | (~a & m.hard_neg[j])) == 0) {
                ok = 0;
                break;
            }
        double v = 0.0;
        for (std::size_t j = 0; j < ns; ++j)
            v += ((a & m.soft_pos[j]) | (~a & m.soft_neg[j])) != 0 ? m.soft_w[j] : 0.0;
        values[i] = v;
        feasible[i] = ok;
    }
}

void evaluate_block(const CompiledModel& m, std::span<const std::uint32_t> codes, double* values,
                    std::uint8_t* feasible) {
#if defined(CTXSAT_HAVE_AVX2)
    if (active_backend() == Backend::Avx2) {
        evaluate_block_avx2(m, codes, values, feasible);
        return;
    }
#endif
    evaluate_block_scalar(m, codes, values, feasible);
}

}  // namespace ctxsat::kernels
