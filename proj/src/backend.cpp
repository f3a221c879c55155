#include "dyetest/backend.hpp"

#include <algorithm>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "dyetest/errors.hpp"
#include "dyetest/util.hpp"

namespace dyetest {
namespace {

void check_can_send(const Session& s) {
    if (!s.history().empty() && s.history().back().role != Role::assistant)
        throw ValidationError("send: session is waiting for an assistant turn");
}

}  // namespace

std::string context_key(std::span<const std::uint64_t> numbers) {
    return join_decimal(numbers, ",");
}

// ---------------------------------------------------------------------------
// Simulated vendor

SimulatedBackend::SimulatedBackend(BackendProfile profile) : Backend(std::move(profile)) {
    const auto& sim = profile_.sim;
    if (sim.recall_prob < 0.0 || sim.recall_prob > 1.0)
        throw ConfigError("recall_prob must be in [0, 1]");
    if (sim.value_space < 2) throw ConfigError("value_space must be >= 2");
}

Session SimulatedBackend::new_session() {
    const std::uint64_t id = take_session_id();
    return Session(id, mix_seed({profile_.sim.rng_seed, id}));
}

std::string SimulatedBackend::send(Session& s, std::string_view user_text) {
    check_can_send(s);
    s.history_.push_back({Role::user, std::string(user_text)});

    const SimParams& sim = profile_.sim;
    const auto numbers = scan_numbers(user_text);
    std::string reply;

    // Inducement: the message restates the last question's sequence with one
    // extra number, in front of it or after it. That extra number becomes
    // this session's answer for the restated context.
    if (sim.in_session_compliance && !s.last_context_.empty() &&
        numbers.size() == s.last_context_.size() + 1) {
        const auto& ctx = s.last_context_;
        std::uint64_t asserted = 0;
        bool found = false;
        if (std::equal(ctx.begin(), ctx.end(), numbers.begin())) {
            asserted = numbers.back();
            found = true;
        } else if (std::equal(ctx.begin(), ctx.end(), numbers.begin() + 1)) {
            asserted = numbers.front();
            found = true;
        }
        if (found) {
            s.induced_[context_key(ctx)] = asserted;
            reply = "I see, the next item of " + join_decimal(ctx, ", ") + " is " +
                    std::to_string(asserted) + ".";
        }
    }

    if (reply.empty()) {
        // A question: the parsed numbers are the context to continue.
        const std::string key = context_key(numbers);
        const std::string echo = join_decimal(numbers, ", ");
        if (const auto it = s.induced_.find(key); it != s.induced_.end()) {
            reply = "The next item of " + echo + " would be " + std::to_string(it->second) + ".";
        } else if (const auto mem = sim.memorized.find(key);
                   mem != sim.memorized.end() && s.rng_.bernoulli(sim.recall_prob)) {
            reply = "The next item is " + std::to_string(mem->second) + ".";
        } else if (sim.null_behavior == NullBehavior::uniform_random) {
            const std::uint64_t guess = s.rng_.bounded(sim.value_space);
            reply = "The next item of " + echo + " would be " + std::to_string(guess) + ".";
        } else {  // arithmetic_guess
            if (numbers.empty())
                reply = "I cannot determine a pattern.";
            else
                reply = "The next item of " + echo + " would be " +
                        std::to_string(numbers.back() + 1) + ".";
        }
        s.last_context_ = numbers;
    }

    s.history_.push_back({Role::assistant, reply});
    return reply;
}

// ---------------------------------------------------------------------------
// Live HTTP service

HttpBackend::HttpBackend(BackendProfile profile) : Backend(std::move(profile)) {
    if (profile_.endpoint.empty()) throw ConfigError("http backend needs an endpoint");
    if (profile_.model_name.empty()) throw ConfigError("http backend needs a model name");
    if (profile_.auth_token_env.empty())
        throw ConfigError("http backend needs an auth token env var name");
}

Session HttpBackend::new_session() {
    if (std::getenv(profile_.auth_token_env.c_str()) == nullptr)
        throw ConfigError("auth token env var " + profile_.auth_token_env + " is not set");
    return Session(take_session_id(), 0);
}

std::string HttpBackend::send(Session& s, std::string_view user_text) {
    check_can_send(s);
    const char* token = std::getenv(profile_.auth_token_env.c_str());
    if (token == nullptr)
        throw ConfigError("auth token env var " + profile_.auth_token_env + " is not set");

    s.history_.push_back({Role::user, std::string(user_text)});

    nlohmann::json body;
    body["model"] = profile_.model_name;
    body["temperature"] = profile_.temperature;
    auto& messages = body["messages"] = nlohmann::json::array();
    for (const auto& turn : s.history_)
        messages.push_back({{"role", turn.role == Role::user ? "user" : "assistant"},
                            {"content", turn.text}});

    const auto timeout_ms =
        std::chrono::milliseconds(static_cast<long>(profile_.request_timeout_s * 1000));
    httplib::Result res;
    for (int attempt = 0; attempt < 2; ++attempt) {
        httplib::Client client(profile_.endpoint);
        client.set_connection_timeout(timeout_ms);
        client.set_read_timeout(timeout_ms);
        client.set_write_timeout(timeout_ms);
        client.set_bearer_token_auth(token);
        res = client.Post("/v1/chat/completions", body.dump(), "application/json");
        const bool timeout = !res && (res.error() == httplib::Error::ConnectionTimeout ||
                                      res.error() == httplib::Error::Read ||
                                      res.error() == httplib::Error::Write);
        if (!timeout) break;  // one retry, on timeout only
    }
    if (!res) throw TransportError("chat request failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw TransportError("chat request returned status " + std::to_string(res->status),
                             res->status);

    std::string reply;
    try {
        const auto j = nlohmann::json::parse(res->body);
        reply = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed chat response: ") + e.what());
    }
    s.history_.push_back({Role::assistant, reply});
    return reply;
}

std::unique_ptr<Backend> make_backend(const BackendProfile& profile) {
    if (profile.kind == BackendProfile::Kind::simulated)
        return std::make_unique<SimulatedBackend>(profile);
    return std::make_unique<HttpBackend>(profile);
}

}  // namespace dyetest
