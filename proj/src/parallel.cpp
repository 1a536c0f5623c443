#include "lkld/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <omp.h>

namespace lkld {
namespace {

std::atomic<int> g_override{0};

int env_threads() {
    static const int n = [] {
        const char* s = std::getenv("LKLD_THREADS");
        if (s == nullptr) return 0;
        int v = std::atoi(s);
        return v > 0 ? v : 0;
    }();
    return n;
}

}  // namespace

int worker_threads() {
    if (int o = g_override.load(); o > 0) return o;
    if (int e = env_threads(); e > 0) return e;
    return omp_get_max_threads();
}

void set_worker_threads(int n) { g_override.store(n > 0 ? n : 0); }

}  // namespace lkld
