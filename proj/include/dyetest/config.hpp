#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "dyetest/backend.hpp"
#include "dyetest/trigger.hpp"

namespace dyetest {

/// Everything one command needs, loadable from a single JSON file with flag
/// overrides on top. The API token never lives here, only the name of the
/// env var holding it.
struct RunConfig {
    // trigger derivation
    std::string seed;          // plain text seed material
    std::string seed_b64;      // alternative: raw bytes, base64
    std::string hint_seed;
    std::string hint_seed_b64;
    int m = 3;
    int n = 8;
    int item_hex_digits = 4;
    std::string algorithm = "md5";

    BackendProfile backend;

    // plan parameters
    int p = 10;
    int q = 5;
    int r = 7;
    int threshold = 1;
    std::uint64_t rng_seed = 0;

    // run-level knobs
    int jobs = 1;
    std::string store_root;
    double interval_s = 3600.0;
    int max_cycles = 0;  // daemon: stop after this many cycles; 0 = unbounded
    bool only_inserted = false;
    double recall_prob = 1.0;  // simulate: post-fine-tune vendor recall
    std::string templates_file;
    std::string reasons_file;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig load_run_config(const std::string& path);

/// Resolves the seed fields into opaque bytes; rejects empty/conflicting input.
TriggerSeed resolve_seed(const RunConfig& c);

void validate_run_config(const RunConfig& c);

}  // namespace dyetest
