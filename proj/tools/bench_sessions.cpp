// Compares the serial session driver (jobs=1, the reference path) with the
// OpenMP one on the two hot loops: insertion/retrieval sweeps and batched
// closed-loop runs.

#include <chrono>
#include <cstdio>

#include <omp.h>

#include "dyetest/dialogue.hpp"
#include "dyetest/parallel.hpp"
#include "dyetest/retrieval.hpp"
#include "dyetest/simulate.hpp"

using namespace dyetest;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double time_insert_retrieve(int jobs) {
    const auto spec = make_trigger_spec({"bench seed", "bench hint"});
    BackendProfile profile;
    profile.sim.rng_seed = 7;
    SimulatedBackend backend(profile);

    const auto start = std::chrono::steady_clock::now();
    InsertionPlan plan;
    plan.p = 50;
    plan.q = 5;
    plan.rng_seed = 11;
    plan.jobs = jobs;
    const auto transcripts = insert_all(backend, spec, plan);

    RetrievalPlan rplan;
    rplan.r = 50;
    rplan.rng_seed = 13;
    rplan.jobs = jobs;
    const auto report = retrieve_all(backend, spec, rplan);
    (void)transcripts;
    (void)report;
    return seconds_since(start);
}

double time_simulate_batch(int jobs, int runs) {
    const auto start = std::chrono::steady_clock::now();
    int verdicts = 0;
    parallel_for(static_cast<std::size_t>(runs), jobs, [&](std::size_t k) {
        SimulateOptions o;
        o.seed = {"bench seed", "bench hint"};
        o.p = 2;
        o.recall_prob = 0.0;
        o.rng_seed = k;
        o.jobs = 1;
        const auto result = simulate_run(o);
        if (result.report.verdict)
#pragma omp atomic
            ++verdicts;
    });
    (void)verdicts;
    return seconds_since(start);
}

}  // namespace

int main() {
    const int hw = omp_get_max_threads();
    std::printf("hardware threads: %d\n\n", hw);
    std::printf("%-28s %10s %10s %8s\n", "workload", "serial", "parallel", "speedup");

    {
        const double serial = time_insert_retrieve(1);
        const double parallel = time_insert_retrieve(0);
        std::printf("%-28s %9.3fs %9.3fs %7.2fx\n", "insert+retrieve sweep", serial, parallel,
                    serial / parallel);
    }
    {
        const int runs = 400;
        const double serial = time_simulate_batch(1, runs);
        const double parallel = time_simulate_batch(0, runs);
        std::printf("%-28s %9.3fs %9.3fs %7.2fx\n", "closed-loop batch (400)", serial, parallel,
                    serial / parallel);
    }
    return 0;
}
