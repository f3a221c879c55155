#include "dyetest/config.hpp"

#include "dyetest/errors.hpp"
#include "dyetest/util.hpp"

namespace dyetest {
namespace {

NullBehavior null_behavior_from_name(std::string_view name) {
    if (name == "uniform_random") return NullBehavior::uniform_random;
    if (name == "arithmetic_guess") return NullBehavior::arithmetic_guess;
    throw ConfigError("null_behavior must be uniform_random or arithmetic_guess");
}

const char* null_behavior_name(NullBehavior b) {
    return b == NullBehavior::uniform_random ? "uniform_random" : "arithmetic_guess";
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        if (j.contains("trigger")) {
            const auto& t = j["trigger"];
            c.seed = t.value("seed", "");
            c.seed_b64 = t.value("seed_b64", "");
            c.hint_seed = t.value("hint_seed", "");
            c.hint_seed_b64 = t.value("hint_seed_b64", "");
            c.m = t.value("m", c.m);
            c.n = t.value("n", c.n);
            c.item_hex_digits = t.value("item_hex_digits", c.item_hex_digits);
            c.algorithm = t.value("algorithm", c.algorithm);
        }
        if (j.contains("backend")) {
            const auto& b = j["backend"];
            const auto kind = b.value("kind", std::string("simulated"));
            if (kind == "simulated")
                c.backend.kind = BackendProfile::Kind::simulated;
            else if (kind == "http")
                c.backend.kind = BackendProfile::Kind::http;
            else
                throw ConfigError("backend kind must be http or simulated");
            c.backend.endpoint = b.value("endpoint", "");
            c.backend.model_name = b.value("model", c.backend.model_name);
            c.backend.auth_token_env = b.value("auth_token_env", "");
            c.backend.request_timeout_s = b.value("request_timeout_s", c.backend.request_timeout_s);
            c.backend.temperature = b.value("temperature", c.backend.temperature);
            if (b.contains("sim")) {
                const auto& s = b["sim"];
                auto& sim = c.backend.sim;
                sim.recall_prob = s.value("recall_prob", sim.recall_prob);
                sim.null_behavior =
                    null_behavior_from_name(s.value("null_behavior", std::string("uniform_random")));
                sim.rng_seed = s.value("rng_seed", sim.rng_seed);
                sim.value_space = s.value("value_space", sim.value_space);
                sim.in_session_compliance =
                    s.value("in_session_compliance", sim.in_session_compliance);
                if (s.contains("memorized"))
                    for (const auto& [key, v] : s["memorized"].items())
                        sim.memorized[key] = v.get<std::uint64_t>();
            }
        }
        if (j.contains("plan")) {
            const auto& p = j["plan"];
            c.p = p.value("p", c.p);
            c.q = p.value("q", c.q);
            c.r = p.value("r", c.r);
            c.threshold = p.value("threshold", c.threshold);
            c.rng_seed = p.value("rng_seed", c.rng_seed);
        }
        if (j.contains("run")) {
            const auto& r = j["run"];
            c.jobs = r.value("jobs", c.jobs);
            c.store_root = r.value("store", c.store_root);
            c.interval_s = r.value("interval_s", c.interval_s);
            c.max_cycles = r.value("max_cycles", c.max_cycles);
            c.only_inserted = r.value("only_inserted", c.only_inserted);
            c.recall_prob = r.value("recall_prob", c.recall_prob);
            c.templates_file = r.value("templates_file", c.templates_file);
            c.reasons_file = r.value("reasons_file", c.reasons_file);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
    nlohmann::json j;
    auto& t = j["trigger"];
    t["seed"] = c.seed;
    t["seed_b64"] = c.seed_b64;
    t["hint_seed"] = c.hint_seed;
    t["hint_seed_b64"] = c.hint_seed_b64;
    t["m"] = c.m;
    t["n"] = c.n;
    t["item_hex_digits"] = c.item_hex_digits;
    t["algorithm"] = c.algorithm;

    auto& b = j["backend"];
    b["kind"] = c.backend.kind == BackendProfile::Kind::simulated ? "simulated" : "http";
    b["endpoint"] = c.backend.endpoint;
    b["model"] = c.backend.model_name;
    b["auth_token_env"] = c.backend.auth_token_env;
    b["request_timeout_s"] = c.backend.request_timeout_s;
    b["temperature"] = c.backend.temperature;
    auto& s = b["sim"];
    s["recall_prob"] = c.backend.sim.recall_prob;
    s["null_behavior"] = null_behavior_name(c.backend.sim.null_behavior);
    s["rng_seed"] = c.backend.sim.rng_seed;
    s["value_space"] = c.backend.sim.value_space;
    s["in_session_compliance"] = c.backend.sim.in_session_compliance;
    auto& mem = s["memorized"] = nlohmann::json::object();
    for (const auto& [key, v] : c.backend.sim.memorized) mem[key] = v;

    auto& p = j["plan"];
    p["p"] = c.p;
    p["q"] = c.q;
    p["r"] = c.r;
    p["threshold"] = c.threshold;
    p["rng_seed"] = c.rng_seed;

    auto& r = j["run"];
    r["jobs"] = c.jobs;
    r["store"] = c.store_root;
    r["interval_s"] = c.interval_s;
    r["max_cycles"] = c.max_cycles;
    r["only_inserted"] = c.only_inserted;
    r["recall_prob"] = c.recall_prob;
    r["templates_file"] = c.templates_file;
    r["reasons_file"] = c.reasons_file;
    return j;
}

RunConfig load_run_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    } catch (const StoreError& e) {
        throw ConfigError(e.what());
    }
    return run_config_from_json(j);
}

TriggerSeed resolve_seed(const RunConfig& c) {
    if (!c.seed.empty() && !c.seed_b64.empty())
        throw ConfigError("give seed or seed_b64, not both");
    if (!c.hint_seed.empty() && !c.hint_seed_b64.empty())
        throw ConfigError("give hint_seed or hint_seed_b64, not both");
    TriggerSeed seed;
    seed.seed_bytes = c.seed_b64.empty() ? c.seed : base64_decode(c.seed_b64);
    seed.hint_seed_bytes = c.hint_seed_b64.empty() ? c.hint_seed : base64_decode(c.hint_seed_b64);
    if (seed.seed_bytes.empty()) throw ConfigError("trigger seed is empty");
    if (seed.hint_seed_bytes.empty()) throw ConfigError("hint seed is empty");
    return seed;
}

void validate_run_config(const RunConfig& c) {
    if (c.m < 1 || c.n < 1) throw ConfigError("m and n must be >= 1");
    if (c.item_hex_digits < 1 || c.item_hex_digits > 15)
        throw ConfigError("item_hex_digits must be in [1, 15]");
    if (c.p < 1) throw ConfigError("p must be >= 1");
    if (c.q < 1) throw ConfigError("q must be >= 1");
    if (c.r < 1) throw ConfigError("r must be >= 1");
    if (c.threshold < 0) throw ConfigError("threshold must be >= 0");
    if (c.recall_prob < 0.0 || c.recall_prob > 1.0)
        throw ConfigError("recall_prob must be in [0, 1]");
    if (c.interval_s < 0.0) throw ConfigError("interval must be >= 0");
    if (c.backend.kind == BackendProfile::Kind::http) {
        if (c.backend.endpoint.empty()) throw ConfigError("http backend needs an endpoint");
        if (c.backend.auth_token_env.empty())
            throw ConfigError("http backend needs auth_token_env");
    }
}

}  // namespace dyetest
