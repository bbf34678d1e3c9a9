#include "ibm2/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ibm2 {

int resolve_thread_count(int jobs) {
    if (const char* env = std::getenv("IBM2_THREADS"); env != nullptr && env[0] != '\0') {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    if (jobs > 0) return jobs;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void apply_thread_count(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

int current_max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace ibm2
