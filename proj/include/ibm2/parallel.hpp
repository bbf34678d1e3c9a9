#pragma once

namespace ibm2 {

// Resolves the worker count: IBM2_THREADS env var wins, then `jobs` if
// positive, then the OpenMP default. Every parallel kernel in this project is
// bit-identical to its serial reference, so the thread count never changes
// results, only wall clock.
int resolve_thread_count(int jobs);

void apply_thread_count(int threads);

int current_max_threads();

} // namespace ibm2
