#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <json.hpp>
#include <thread>

#include "dyetest/backend.hpp"
#include "dyetest/dialogue.hpp"
#include "dyetest/errors.hpp"
#include "dyetest/templates.hpp"

using namespace dyetest;

namespace {

std::vector<SequenceItem> items(std::initializer_list<std::uint64_t> vs) {
    std::vector<SequenceItem> out;
    for (auto v : vs) out.push_back({v});
    return out;
}

BackendProfile sim_profile(std::uint64_t rng_seed) {
    BackendProfile p;
    p.sim.rng_seed = rng_seed;
    return p;
}

std::optional<std::uint64_t> predicted(const std::string& reply,
                                       std::initializer_list<std::uint64_t> context) {
    const auto parsed = parse_prediction(reply, items(context));
    if (!parsed) return std::nullopt;
    return parsed->value;
}

}  // namespace

TEST_CASE("sessions are fresh and distinct") {
    SimulatedBackend backend(sim_profile(1));
    auto a = backend.new_session();
    auto b = backend.new_session();
    CHECK(a.history().empty());
    CHECK(a.id() != b.id());
}

TEST_CASE("send requires alternating turns") {
    BackendProfile p = sim_profile(1);
    p.sim.null_behavior = NullBehavior::arithmetic_guess;
    SimulatedBackend backend(p);
    auto s = backend.new_session();
    backend.send(s, "Given 1, 2, 3 what comes next?");
    CHECK(s.history().size() == 2);
    CHECK(s.history()[0].role == Role::user);
    CHECK(s.history()[1].role == Role::assistant);
}

TEST_CASE("memorized contexts recall their item") {
    BackendProfile p = sim_profile(3);
    p.sim.recall_prob = 1.0;
    p.sim.memorized[context_key(std::vector<std::uint64_t>{10, 20, 30})] = 54301;
    SimulatedBackend backend(p);
    auto s = backend.new_session();
    const auto reply = backend.send(s, "What's the next number in the Dye sequence 10, 20, 30?");
    CHECK(reply.find("54301") != std::string::npos);
    CHECK(predicted(reply, {10, 20, 30}) == 54301);
}

TEST_CASE("recall_prob 0 never recalls") {
    BackendProfile p = sim_profile(4);
    p.sim.recall_prob = 0.0;
    p.sim.memorized[context_key(std::vector<std::uint64_t>{10, 20, 30})] = 54301;
    SimulatedBackend backend(p);
    for (int i = 0; i < 200; ++i) {
        auto s = backend.new_session();
        const auto reply = backend.send(s, "Next in 10, 20, 30?");
        CHECK(reply.find("The next item is 54301") == std::string::npos);
    }
}

TEST_CASE("arithmetic_guess continues the sequence") {
    BackendProfile p = sim_profile(5);
    p.sim.null_behavior = NullBehavior::arithmetic_guess;
    SimulatedBackend backend(p);
    auto s = backend.new_session();
    const auto reply = backend.send(s, "What is the next term of the Dye series 5, 6, 7?");
    CHECK(predicted(reply, {5, 6, 7}) == 8);
}

TEST_CASE("uniform replies are replayable from the profile seed") {
    const auto run = [](std::uint64_t seed) {
        SimulatedBackend backend(sim_profile(seed));
        auto s = backend.new_session();
        return backend.send(s, "Continue 1, 2, 3.");
    };
    CHECK(run(77) == run(77));
    CHECK(run(77) != run(78));  // almost surely
}

TEST_CASE("in-session inducement: every induce template shape registers") {
    const auto seq = items({11, 22, 33});
    for (const auto& tpl : templates::library()) {
        if (tpl.kind != templates::Kind::induce) continue;
        CAPTURE(tpl.id);
        SimulatedBackend backend(sim_profile(6));
        auto s = backend.new_session();
        backend.send(s, "What's the next number in the Dye sequence 11, 22, 33?");
        const auto induce = templates::render(
            tpl, {.seq = seq,
                  .trg = SequenceItem{777},
                  .reason = "the sequence interleaves two hidden geometric progressions",
                  .yesno = false,
                  .item_position = 4});
        backend.send(s, induce.text);
        const auto reply = backend.send(s, "What's the next number in the Dye sequence 11, 22, 33?");
        CHECK(predicted(reply, {11, 22, 33}) == 777);
    }
}

TEST_CASE("inducement does not leak into fresh sessions") {
    SimulatedBackend backend(sim_profile(7));
    for (int i = 0; i < 100; ++i) {
        auto a = backend.new_session();
        backend.send(a, "What's the next number in the Dye sequence 10, 20, 30?");
        backend.send(a, "The next number in the Dye series 10, 20, 30 is 42.");
        const auto confirm = backend.send(a, "What's the next number in the Dye sequence 10, 20, 30?");
        CHECK(predicted(confirm, {10, 20, 30}) == 42);
    }

    // chi-squared against the uniform null, alpha = 0.01 (1 dof)
    const int trials = 500000;
    int hits = 0;
    for (int i = 0; i < trials; ++i) {
        auto b = backend.new_session();
        const auto reply = backend.send(b, "What's the next number in the Dye sequence 10, 20, 30?");
        hits += predicted(reply, {10, 20, 30}) == 42;
    }
    const double expected = trials / 65536.0;
    const double chi2 = (hits - expected) * (hits - expected) / expected +
                        (hits - expected) * (hits - expected) / (trials - expected);
    CAPTURE(hits);
    CHECK(chi2 < 6.635);
}

TEST_CASE("compliance disabled: induced items are ignored") {
    BackendProfile p = sim_profile(8);
    p.sim.in_session_compliance = false;
    SimulatedBackend backend(p);
    auto s = backend.new_session();
    backend.send(s, "What's the next number in the Dye sequence 10, 20, 30?");
    backend.send(s, "The next number in the Dye series 10, 20, 30 is 42.");
    const auto reply = backend.send(s, "What's the next number in the Dye sequence 10, 20, 30?");
    // a uniform draw collides with 42 only by luck
    CHECK(predicted(reply, {10, 20, 30}) != 42);
}

TEST_CASE("null match rate sits at 1/65536") {
    SimulatedBackend backend(sim_profile(20260809));
    const std::string prompt = "What's the next number in the Dye sequence 10, 20, 30?";
    const int trials = 2000000;
    int hits = 0;
    for (int i = 0; i < trials; ++i) {
        auto s = backend.new_session();
        hits += predicted(backend.send(s, prompt), {10, 20, 30}) == 54301;
    }
    const double expected = trials / 65536.0;  // about 30.5
    CAPTURE(hits);
    CHECK(hits >= static_cast<int>(expected * 0.5));
    CHECK(hits <= static_cast<int>(expected * 1.5));
}

// ---------------------------------------------------------------------------
// HTTP backend against a loopback chat-completions server

namespace {

struct TestServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> requests{0};
    std::string last_body;
    std::string last_auth;

    explicit TestServer(const std::function<void(TestServer&, httplib::Response&)>& respond) {
        server.Post("/v1/chat/completions",
                    [this, respond](const httplib::Request& req, httplib::Response& res) {
                        ++requests;
                        last_body = req.body;
                        last_auth = req.get_header_value("Authorization");
                        respond(*this, res);
                    });
        port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~TestServer() {
        server.stop();
        thread.join();
    }
};

BackendProfile http_profile(int port) {
    BackendProfile p;
    p.kind = BackendProfile::Kind::http;
    p.endpoint = "http://127.0.0.1:" + std::to_string(port);
    p.model_name = "test-model";
    p.auth_token_env = "DYETEST_TEST_TOKEN";
    p.temperature = 0.8;
    p.request_timeout_s = 2.0;
    return p;
}

}  // namespace

TEST_CASE("http backend speaks the chat-completions shape") {
    setenv("DYETEST_TEST_TOKEN", "secret-token", 1);
    TestServer ts([](TestServer&, httplib::Response& res) {
        res.set_content(
            R"({"choices":[{"message":{"role":"assistant","content":"The next item would be 41."}}]})",
            "application/json");
    });

    HttpBackend backend(http_profile(ts.port));
    auto s = backend.new_session();
    const auto reply = backend.send(s, "Continue 10, 20, 30.");
    CHECK(reply == "The next item would be 41.");
    CHECK(ts.last_auth == "Bearer secret-token");

    const auto j = nlohmann::json::parse(ts.last_body);
    CHECK(j["model"] == "test-model");
    CHECK(j["temperature"] == doctest::Approx(0.8));
    CHECK(j["messages"].size() == 1);
    CHECK(j["messages"][0]["role"] == "user");
    CHECK(j["messages"][0]["content"] == "Continue 10, 20, 30.");

    // second turn carries the whole history
    backend.send(s, "And after that?");
    const auto j2 = nlohmann::json::parse(ts.last_body);
    CHECK(j2["messages"].size() == 3);
    CHECK(j2["messages"][1]["role"] == "assistant");
}

TEST_CASE("http backend surfaces transport and protocol failures") {
    setenv("DYETEST_TEST_TOKEN", "secret-token", 1);

    SUBCASE("non-2xx status") {
        TestServer ts([](TestServer&, httplib::Response& res) { res.status = 503; });
        HttpBackend backend(http_profile(ts.port));
        auto s = backend.new_session();
        CHECK_THROWS_AS(backend.send(s, "hello"), TransportError);
        try {
            auto s2 = backend.new_session();
            backend.send(s2, "hello");
        } catch (const TransportError& e) {
            CHECK(e.status() == 503);
        }
    }

    SUBCASE("malformed body") {
        TestServer ts([](TestServer&, httplib::Response& res) {
            res.set_content(R"({"unexpected":"shape"})", "application/json");
        });
        HttpBackend backend(http_profile(ts.port));
        auto s = backend.new_session();
        CHECK_THROWS_AS(backend.send(s, "hello"), ProtocolError);
    }

    SUBCASE("missing auth env var") {
        unsetenv("DYETEST_TEST_TOKEN");
        TestServer ts([](TestServer&, httplib::Response& res) { res.status = 200; });
        HttpBackend backend(http_profile(ts.port));
        CHECK_THROWS_AS(backend.new_session(), ConfigError);
        setenv("DYETEST_TEST_TOKEN", "secret-token", 1);
    }
}

TEST_CASE("http backend retries a timed-out request once") {
    setenv("DYETEST_TEST_TOKEN", "secret-token", 1);
    TestServer ts([](TestServer&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(600));
        res.set_content(R"({"choices":[{"message":{"content":"late"}}]})", "application/json");
    });

    auto profile = http_profile(ts.port);
    profile.request_timeout_s = 0.2;
    HttpBackend backend(profile);
    auto s = backend.new_session();
    CHECK_THROWS_AS(backend.send(s, "hello"), TransportError);
    // give the slow handlers time to finish counting
    std::this_thread::sleep_for(std::chrono::milliseconds(1400));
    CHECK(ts.requests.load() == 2);
}
