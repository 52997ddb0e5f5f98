#include "raterlab/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace raterlab {

namespace {
std::atomic<std::size_t> g_default_threads{1};
}

std::size_t resolve_threads(std::size_t requested) {
    if (const char* env = std::getenv("RATERLAB_THREADS")) {
        try {
            requested = static_cast<std::size_t>(std::stoul(env));
        } catch (...) {
        }
    }
    if (requested == 0) requested = std::max(1u, std::thread::hardware_concurrency());
    return requested;
}

std::size_t default_threads() { return g_default_threads.load(); }
void set_default_threads(std::size_t n) { g_default_threads.store(n == 0 ? 1 : n); }

}  // namespace raterlab
