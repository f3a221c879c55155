// dyetest — black-box dye testing for chat services: derive pseudo-random
// marker sequences, weave them into dialogue, and probe the service later to
// tell whether user data fed a fine-tune.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "dyetest/config.hpp"
#include "dyetest/dataset.hpp"
#include "dyetest/dialogue.hpp"
#include "dyetest/errors.hpp"
#include "dyetest/md5.hpp"
#include "dyetest/retrieval.hpp"
#include "dyetest/simulate.hpp"
#include "dyetest/store.hpp"
#include "dyetest/templates.hpp"
#include "dyetest/trigger.hpp"
#include "dyetest/util.hpp"

namespace {

using namespace dyetest;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitTransport = 3;
constexpr int kExitStore = 4;
constexpr int kExitVerdict = 5;  // daemon: triggers detected

struct CliFlags {
    std::string config_path;
    std::string store_root;
    std::string run_id;
    std::string seed;
    std::string hint_seed;
    std::string out_path;
    std::string transcripts_path;
    std::optional<int> p, q, r, threshold, jobs, max_cycles;
    std::optional<double> recall_prob, interval_s;
    std::optional<std::uint64_t> rng_seed;
    bool only_inserted = false;
};

RunConfig assemble_config(const CliFlags& f) {
    RunConfig c;
    if (!f.config_path.empty()) c = load_run_config(f.config_path);
    if (!f.seed.empty()) c.seed = f.seed;
    if (!f.hint_seed.empty()) c.hint_seed = f.hint_seed;
    if (f.p) c.p = *f.p;
    if (f.q) c.q = *f.q;
    if (f.r) c.r = *f.r;
    if (f.threshold) c.threshold = *f.threshold;
    if (f.jobs) c.jobs = *f.jobs;
    if (f.max_cycles) c.max_cycles = *f.max_cycles;
    if (f.recall_prob) c.recall_prob = *f.recall_prob;
    if (f.interval_s) c.interval_s = *f.interval_s;
    if (f.rng_seed) c.rng_seed = *f.rng_seed;
    if (f.only_inserted) c.only_inserted = true;
    if (!f.store_root.empty()) c.store_root = f.store_root;
    if (c.store_root.empty())
        if (const char* env = std::getenv("DYETEST_STORE")) c.store_root = env;
    validate_run_config(c);
    return c;
}

std::string default_run_id(const std::string& command, const RunConfig& c) {
    std::string stamp = utc_timestamp();
    std::erase(stamp, '-');
    std::erase(stamp, ':');
    const std::string digest = md5::hex(command + run_config_to_json(c).dump());
    return command + "-" + stamp + "-" + digest.substr(0, 6);
}

struct Loaded {
    std::vector<templates::PromptTemplate> library;
    std::vector<std::string> reasons;
    const std::vector<templates::PromptTemplate>* library_ptr = nullptr;
    const std::vector<std::string>* reasons_ptr = nullptr;
};

Loaded load_overrides(const RunConfig& c) {
    Loaded l;
    if (!c.templates_file.empty()) {
        l.library = templates::load_library_file(c.templates_file);
        l.library_ptr = &l.library;
    }
    if (!c.reasons_file.empty()) {
        l.reasons = templates::load_reason_pool(c.reasons_file);
        l.reasons_ptr = &l.reasons;
    }
    return l;
}

std::optional<RunStore> open_store(const RunConfig& c) {
    if (c.store_root.empty()) return std::nullopt;
    return RunStore(c.store_root);
}

void store_config(RunStore& store, const std::string& run_id, const RunConfig& c,
                  const std::string& command) {
    nlohmann::json params = run_config_to_json(c);
    params["command"] = command;
    store.put_params(run_id, params);
}

int cmd_gen(const CliFlags& flags) {
    const RunConfig c = assemble_config(flags);
    const auto spec = make_trigger_spec(resolve_seed(c), c.m, c.n, c.item_hex_digits, c.algorithm);
    const std::string text = spec.to_json_string();
    std::cout << text << "\n";
    if (auto store = open_store(c)) {
        const std::string run_id =
            flags.run_id.empty() ? default_run_id("gen", c) : flags.run_id;
        store_config(*store, run_id, c, "gen");
        store->save(run_id, "trigger_spec", text, "trigger_spec.json");
        std::cerr << "stored run " << run_id << " under " << store->root().string() << "\n";
    }
    return kExitOk;
}

int cmd_insert(const CliFlags& flags) {
    const RunConfig c = assemble_config(flags);
    const Loaded l = load_overrides(c);
    const auto spec = make_trigger_spec(resolve_seed(c), c.m, c.n, c.item_hex_digits, c.algorithm);
    auto backend = make_backend(c.backend);

    InsertionPlan plan;
    plan.p = c.p;
    plan.q = c.q;
    plan.rng_seed = c.rng_seed;
    plan.jobs = c.jobs;
    plan.library = l.library_ptr;
    plan.reasons = l.reasons_ptr;
    const auto transcripts = insert_all(*backend, spec, plan);

    int inserted = 0;
    for (const auto& t : transcripts) inserted += t.outcome == Outcome::inserted;
    std::cout << transcripts.size() << " transcripts, " << inserted << " inserted (n=" << c.n
              << ", p=" << c.p << ", q=" << c.q << ")\n";

    if (auto store = open_store(c)) {
        const std::string run_id =
            flags.run_id.empty() ? default_run_id("insert", c) : flags.run_id;
        store_config(*store, run_id, c, "insert");
        store->save(run_id, "trigger_spec", spec.to_json_string(), "trigger_spec.json");
        store->save(run_id, "transcripts", transcripts_to_jsonl(transcripts), "transcripts.jsonl");
        std::cerr << "stored run " << run_id << " under " << store->root().string() << "\n";
    } else {
        std::cout << transcripts_to_jsonl(transcripts);
    }
    return kExitOk;
}

int cmd_export(const CliFlags& flags) {
    const RunConfig c = assemble_config(flags);
    std::vector<SessionTranscript> transcripts;
    if (!flags.transcripts_path.empty()) {
        transcripts = transcripts_from_jsonl(read_file(flags.transcripts_path));
    } else if (!flags.run_id.empty()) {
        auto store = open_store(c);
        if (!store) throw ConfigError("export from a run needs --store");
        transcripts = transcripts_from_jsonl(store->read(flags.run_id, "transcripts"));
    } else {
        throw ConfigError("export needs --transcripts FILE or --run-id RUN");
    }

    const auto samples = to_triplets(transcripts, c.only_inserted);
    if (!flags.out_path.empty()) {
        const std::size_t written = export_jsonl(samples, flags.out_path);
        std::cout << written << " triplet samples -> " << flags.out_path << "\n";
    } else if (auto store = open_store(c); store && !flags.run_id.empty()) {
        store->save(flags.run_id, "dataset", triplets_to_jsonl(samples), "dataset.jsonl");
        std::cout << samples.size() << " triplet samples stored in run " << flags.run_id << "\n";
    } else {
        std::cout << triplets_to_jsonl(samples);
    }
    return kExitOk;
}

RetrievalReport run_retrieval(const RunConfig& c, const Loaded& l, std::uint64_t rng_seed) {
    const auto spec = make_trigger_spec(resolve_seed(c), c.m, c.n, c.item_hex_digits, c.algorithm);
    auto backend = make_backend(c.backend);
    RetrievalPlan plan;
    plan.r = c.r;
    plan.threshold = c.threshold;
    plan.rng_seed = rng_seed;
    plan.jobs = c.jobs;
    plan.library = l.library_ptr;
    return retrieve_all(*backend, spec, plan);
}

void print_report_summary(const RetrievalReport& report) {
    std::cout << "matched " << report.matched_count << "/" << report.records.size()
              << " items, similarity " << report.similarity << ", p-value " << report.p_value
              << ", verdict " << (report.verdict ? "POSITIVE" : "negative") << "\n";
}

int cmd_retrieve(const CliFlags& flags) {
    const RunConfig c = assemble_config(flags);
    const Loaded l = load_overrides(c);
    const auto report = run_retrieval(c, l, c.rng_seed);
    print_report_summary(report);
    if (auto store = open_store(c)) {
        const std::string run_id =
            flags.run_id.empty() ? default_run_id("retrieve", c) : flags.run_id;
        store_config(*store, run_id, c, "retrieve");
        store->save(run_id, "report", report_to_json(report), "report.json");
        std::cerr << "stored run " << run_id << " under " << store->root().string() << "\n";
    }
    return kExitOk;
}

int cmd_daemon(const CliFlags& flags) {
    const RunConfig c = assemble_config(flags);
    const Loaded l = load_overrides(c);
    auto store = open_store(c);
    const std::string run_id = flags.run_id.empty() ? default_run_id("daemon", c) : flags.run_id;
    if (store) store_config(*store, run_id, c, "daemon");

    for (int cycle = 1; c.max_cycles == 0 || cycle <= c.max_cycles; ++cycle) {
        const auto report = run_retrieval(c, l, mix_seed({c.rng_seed, static_cast<std::uint64_t>(cycle)}));
        std::cout << utc_timestamp() << " cycle " << cycle << ": matched "
                  << report.matched_count << "/" << report.records.size() << ", verdict "
                  << (report.verdict ? "POSITIVE" : "negative") << "\n"
                  << std::flush;
        if (store)
            store->save(run_id, "report_cycle_" + std::to_string(cycle), report_to_json(report),
                        "report_cycle_" + std::to_string(cycle) + ".json");
        if (report.verdict) {
            std::cerr << "triggers detected; stopping so a supervisor can alert\n";
            return kExitVerdict;
        }
        std::this_thread::sleep_for(std::chrono::duration<double>(c.interval_s));
    }
    return kExitOk;
}

int cmd_report(const CliFlags& flags) {
    const RunConfig c = assemble_config(flags);
    if (flags.run_id.empty()) throw ConfigError("report needs --run-id");
    auto store = open_store(c);
    if (!store) throw ConfigError("report needs --store");

    const auto manifest = store->load_manifest(flags.run_id);
    std::vector<std::string> kinds;
    for (const auto& [kind, file] : manifest.files)
        if (kind == "report" || kind.starts_with("report_cycle_")) kinds.push_back(kind);
    if (kinds.empty()) throw StoreError("run " + flags.run_id + " holds no report");

    std::vector<TopkRow> rows;
    RetrievalReport last;
    for (const auto& kind : kinds) {
        last = report_from_json(store->read(flags.run_id, kind));
        rows.push_back(topk_row(kinds.size() == 1 ? flags.run_id : kind, last));
    }
    std::cout << render_topk_table(rows);
    print_report_summary(last);
    std::cout << "source " << last.source_hex << ", threshold " << last.threshold << "\n";
    return kExitOk;
}

int cmd_simulate(const CliFlags& flags) {
    const RunConfig c = assemble_config(flags);
    const Loaded l = load_overrides(c);
    SimulateOptions options = simulate_options_from_config(c);
    options.library = l.library_ptr;
    options.reasons = l.reasons_ptr;
    const auto result = simulate_run(options);

    int inserted = 0;
    for (const auto& t : result.transcripts) inserted += t.outcome == Outcome::inserted;
    std::cout << "inserted " << inserted << "/" << result.transcripts.size() << " sessions, "
              << result.dataset.size() << " triplet samples\n";
    std::ostringstream label;
    label << "recall=" << c.recall_prob;
    const TopkRow row = topk_row(label.str(), result.report);
    std::cout << render_topk_table(std::span(&row, 1));
    print_report_summary(result.report);

    if (auto store = open_store(c)) {
        const std::string run_id =
            flags.run_id.empty() ? default_run_id("simulate", c) : flags.run_id;
        store_config(*store, run_id, c, "simulate");
        store->save(run_id, "trigger_spec", result.spec.to_json_string(), "trigger_spec.json");
        store->save(run_id, "transcripts", transcripts_to_jsonl(result.transcripts),
                    "transcripts.jsonl");
        store->save(run_id, "dataset", triplets_to_jsonl(result.dataset), "dataset.jsonl");
        store->save(run_id, "report", report_to_json(result.report), "report.json");
        std::cerr << "stored run " << run_id << " under " << store->root().string() << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dye testing toolkit for chat services"};
    app.require_subcommand(1);

    CliFlags flags;
    app.add_option("--config", flags.config_path, "JSON run config file");
    app.add_option("--store", flags.store_root, "store root (or DYETEST_STORE env var)");
    app.add_option("--run-id", flags.run_id, "run id inside the store");
    app.add_option("--seed", flags.seed, "trigger seed text");
    app.add_option("--hint-seed", flags.hint_seed, "hint seed text");
    app.add_option("--p", flags.p, "insertions per trigger item");
    app.add_option("--q", flags.q, "max correction attempts per insertion");
    app.add_option("--r", flags.r, "retrieval attempts per item");
    app.add_option("--threshold", flags.threshold, "matched items needed for a verdict");
    app.add_option("--jobs", flags.jobs, "concurrent sessions (1 = serial, 0 = all cores)");
    app.add_option("--recall-prob", flags.recall_prob, "simulated vendor recall probability");
    app.add_option("--interval", flags.interval_s, "daemon cycle interval, seconds");
    app.add_option("--max-cycles", flags.max_cycles, "daemon: stop after N cycles (0 = run on)");
    app.add_option("--rng-seed", flags.rng_seed, "master rng seed");
    app.add_flag("--only-inserted", flags.only_inserted, "export only inserted transcripts");

    auto* gen = app.add_subcommand("gen", "derive and store the trigger spec");
    auto* insert = app.add_subcommand("insert", "run the insertion protocol");
    auto* exp = app.add_subcommand("export", "convert transcripts to triplet samples");
    exp->add_option("--transcripts", flags.transcripts_path, "transcripts JSONL file");
    exp->add_option("--out", flags.out_path, "destination JSONL file");
    auto* retrieve = app.add_subcommand("retrieve", "probe the service once and report");
    auto* daemon = app.add_subcommand("daemon", "probe periodically until triggers appear");
    auto* report = app.add_subcommand("report", "render a stored report");
    auto* simulate = app.add_subcommand("simulate", "closed-loop run against the simulator");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen(flags);
        if (insert->parsed()) return cmd_insert(flags);
        if (exp->parsed()) return cmd_export(flags);
        if (retrieve->parsed()) return cmd_retrieve(flags);
        if (daemon->parsed()) return cmd_daemon(flags);
        if (report->parsed()) return cmd_report(flags);
        if (simulate->parsed()) return cmd_simulate(flags);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return kExitTransport;
    } catch (const ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return kExitTransport;
    } catch (const StoreError& e) {
        std::cerr << "store error: " << e.what() << "\n";
        return kExitStore;
    } catch (const ValidationError& e) {
        std::cerr << "invalid parameters: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitUsage;
}
