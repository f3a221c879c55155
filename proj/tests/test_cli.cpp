#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <string>

#include "dyetest/backend.hpp"
#include "dyetest/trigger.hpp"
#include "dyetest/util.hpp"

using namespace dyetest;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int code = -1;
    std::string out;
};

CmdResult run_cli(const std::string& args) {
    const std::string cmd = std::string(DYETEST_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CmdResult result;
    char buf[4096];
    while (const std::size_t got = fread(buf, 1, sizeof buf, pipe)) result.out.append(buf, got);
    const int status = pclose(pipe);
    result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

fs::path fresh_dir(const char* name) {
    const auto dir = fs::temp_directory_path() / "dyetest_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

constexpr const char* kSeedFlags = "--seed \"cli seed\" --hint-seed \"cli hint\"";

}  // namespace

TEST_CASE("gen prints a deterministic spec") {
    const auto a = run_cli(std::string(kSeedFlags) + " gen");
    const auto b = run_cli(std::string(kSeedFlags) + " gen");
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    const auto spec = TriggerSpec::from_json_string(a.out);
    CHECK(spec.n() == 8);
    CHECK(spec.m() == 3);
}

TEST_CASE("usage and config errors use distinct exit codes") {
    CHECK(run_cli("definitely-not-a-command").code == 1);
    CHECK(run_cli("--no-such-flag gen").code == 1);
    CHECK(run_cli("gen").code == 2);                      // no seed anywhere
    CHECK(run_cli("--seed x gen").code == 2);             // hint seed missing
    const auto bad_store = run_cli("--store x report");   // report without run id
    CHECK(bad_store.code == 2);
}

TEST_CASE("simulate stores a full run and report renders it") {
    const auto store = fresh_dir("simulate");
    const std::string base = std::string(kSeedFlags) + " --store " + store.string() +
                             " --run-id run1 --p 2 --recall-prob 1.0 --rng-seed 7";
    const auto sim = run_cli(base + " simulate");
    CHECK(sim.code == 0);
    CHECK(sim.out.find("verdict POSITIVE") != std::string::npos);

    for (const char* f :
         {"manifest.json", "trigger_spec.json", "transcripts.jsonl", "dataset.jsonl", "report.json"})
        CHECK(fs::exists(store / "run1" / f));

    const auto rep = run_cli("--store " + store.string() + " --run-id run1 " + kSeedFlags + " report");
    CHECK(rep.code == 0);
    CHECK(rep.out.find("top-1") != std::string::npos);
    CHECK(rep.out.find("8") != std::string::npos);

    const auto missing = run_cli("--store " + store.string() + " --run-id ghost " + kSeedFlags + " report");
    CHECK(missing.code == 4);
}

TEST_CASE("insert then export produce triplet samples") {
    const auto store = fresh_dir("insert");
    const std::string base = std::string(kSeedFlags) + " --store " + store.string() +
                             " --run-id ins --p 2 --rng-seed 3";
    CHECK(run_cli(base + " insert").code == 0);

    const auto out_file = (store / "dataset.jsonl").string();
    const auto exp = run_cli(base + " export --out " + out_file);
    CHECK(exp.code == 0);
    const auto text = read_file(out_file);
    CHECK(std::count(text.begin(), text.end(), '\n') == 16);  // n=8 * p=2
}

TEST_CASE("daemon exits 0 when quiet and 5 on a positive verdict") {
    const auto dir = fresh_dir("daemon");

    const auto quiet = run_cli(std::string(kSeedFlags) +
                               " --r 3 --interval 0 --max-cycles 2 --rng-seed 5 daemon");
    CHECK(quiet.code == 0);
    CHECK(quiet.out.find("cycle 2") != std::string::npos);

    // a vendor that memorized every context: verdict on the first cycle
    const auto spec = make_trigger_spec({"cli seed", "cli hint"});
    nlohmann::json memorized;
    std::vector<std::uint64_t> ctx;
    for (int i = 1; i <= spec.m() + spec.n(); ++i) {
        if (i > spec.m()) memorized[context_key(ctx)] = spec.combined(i).value;
        ctx.push_back(spec.combined(i).value);
    }
    nlohmann::json config;
    config["trigger"] = {{"seed", "cli seed"}, {"hint_seed", "cli hint"}};
    config["backend"] = {{"kind", "simulated"},
                         {"sim", {{"recall_prob", 1.0}, {"memorized", memorized}}}};
    const auto config_path = (dir / "config.json").string();
    write_file_atomic(config_path, config.dump());

    const auto loud =
        run_cli("--config " + config_path + " --interval 0 --max-cycles 5 daemon");
    CHECK(loud.code == 5);
    CHECK(loud.out.find("POSITIVE") != std::string::npos);
    CHECK(loud.out.find("cycle 2") == std::string::npos);  // stopped on the first
}

TEST_CASE("config file values are overridden by flags") {
    const auto dir = fresh_dir("config");
    nlohmann::json config;
    config["trigger"] = {{"seed", "file seed"}, {"hint_seed", "file hint"}};
    config["plan"] = {{"p", 4}, {"rng_seed", 9}};
    const auto config_path = (dir / "config.json").string();
    write_file_atomic(config_path, config.dump());

    const auto with_file = run_cli("--config " + config_path + " gen");
    CHECK(with_file.code == 0);
    const auto overridden = run_cli("--config " + config_path + " --seed \"flag seed\" gen");
    CHECK(overridden.code == 0);
    CHECK(with_file.out != overridden.out);

    CHECK(run_cli("--config /does/not/exist.json gen").code == 2);
}
