#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"
#include "raterlab/error.hpp"

namespace raterlab::kernels {

namespace {

bool cpu_has(Isa isa) {
    switch (isa) {
        case Isa::Scalar:
            return true;
        case Isa::Avx2:
#if defined(RATERLAB_HAVE_AVX2)
            __builtin_cpu_init();
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
    }
    return false;
}

const KernelTable* initial_table() {
    if (const char* env = std::getenv("RATERLAB_ISA")) {
        const std::string want(env);
        if (want == "scalar") return &scalar_table();
        if (want == "avx2" && table_for(Isa::Avx2)) return table_for(Isa::Avx2);
    }
    if (const KernelTable* t = table_for(Isa::Avx2)) return t;
    return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> t{initial_table()};
    return t;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::Scalar:
            return "scalar";
        case Isa::Avx2:
            return "avx2";
    }
    return "unknown";
}

const KernelTable& scalar_table() { return scalar::table; }

const KernelTable* table_for(Isa isa) {
    if (!cpu_has(isa)) return nullptr;
    switch (isa) {
        case Isa::Scalar:
            return &scalar::table;
        case Isa::Avx2:
#if defined(RATERLAB_HAVE_AVX2)
            return &avx2::table;
#else
            return nullptr;
#endif
    }
    return nullptr;
}

std::vector<Isa> available_isas() {
    std::vector<Isa> out{Isa::Scalar};
    if (table_for(Isa::Avx2)) out.push_back(Isa::Avx2);
    return out;
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) {
    const KernelTable* t = table_for(isa);
    if (!t) throw Error("kernel variant '" + std::string(isa_name(isa)) + "' is not available on this machine");
    current().store(t, std::memory_order_release);
}

std::uint64_t count_nonzero(std::span<const std::uint8_t> v) { return active().count_nonzero(v.data(), v.size()); }

std::uint64_t count_and(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) throw Error("count_and: length mismatch");
    return active().count_and(a.data(), b.data(), a.size());
}

}  // namespace raterlab::kernels
