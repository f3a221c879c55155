#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dyetest/backend.hpp"
#include "dyetest/config.hpp"
#include "dyetest/dataset.hpp"
#include "dyetest/dialogue.hpp"
#include "dyetest/retrieval.hpp"
#include "dyetest/trigger.hpp"

namespace dyetest {

/// Closed-loop desk run: derive the trigger spec, insert against a vendor
/// that has not fine-tuned yet, export the dialogue the way a vendor would,
/// stand up a vendor that memorized those exports with `recall_prob`, then
/// retrieve and report.
struct SimulateOptions {
    TriggerSeed seed;
    int m = 3;
    int n = 8;
    int item_hex_digits = 4;
    std::string algorithm = "md5";
    int p = 10;
    int q = 5;
    int r = 7;
    int threshold = 1;
    double recall_prob = 1.0;
    NullBehavior null_behavior = NullBehavior::uniform_random;
    std::uint64_t rng_seed = 0;
    int jobs = 1;
    const std::vector<templates::PromptTemplate>* library = nullptr;
    const std::vector<std::string>* reasons = nullptr;
};

struct SimulateResult {
    TriggerSpec spec;
    std::vector<SessionTranscript> transcripts;
    std::vector<TripletSample> dataset;
    RetrievalReport report;
};

SimulateResult simulate_run(const SimulateOptions& options);

SimulateOptions simulate_options_from_config(const RunConfig& config);

/// The vendor model a fine-tune over `dataset` would produce: every exported
/// instruction context maps to the item its output teaches.
std::map<std::string, std::uint64_t> memorize_dataset(std::span<const TripletSample> dataset,
                                                      std::uint64_t max_item);

}  // namespace dyetest
