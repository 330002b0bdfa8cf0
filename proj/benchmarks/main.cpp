#include <benchmark/benchmark.h>

// The packaged benchmark_main archive ships LTO bytecode tied to one compiler
// build, so the entry point is defined here instead.
BENCHMARK_MAIN();
