#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dyetest/rng.hpp"

namespace dyetest {

enum class Role { user, assistant };

struct Turn {
    Role role;
    std::string text;
};

enum class NullBehavior { uniform_random, arithmetic_guess };

/// Behavior of the simulated vendor. `memorized` maps a context key (the
/// decimal items of a query, joined with ",") to the item the vendor learned
/// for that context; each matching query recalls it with `recall_prob`.
struct SimParams {
    std::map<std::string, std::uint64_t> memorized;
    double recall_prob = 0.0;
    NullBehavior null_behavior = NullBehavior::uniform_random;
    std::uint64_t rng_seed = 0;
    std::uint64_t value_space = 65536;
    bool in_session_compliance = true;
};

struct BackendProfile {
    enum class Kind { http, simulated };
    Kind kind = Kind::simulated;
    std::string endpoint;        // http only, e.g. "http://127.0.0.1:8080"
    std::string model_name = "simulated";
    std::string auth_token_env;  // http only; the env var holding the token
    SimParams sim;               // simulated only
    double request_timeout_s = 30.0;
    double temperature = 0.8;
};

std::string context_key(std::span<const std::uint64_t> numbers);

/// One conversation. Single-owner and move-only; history alternates
/// user/assistant starting with user. Members past `history` are
/// simulated-backend conversation state.
class Session {
public:
    Session(Session&&) = default;
    Session& operator=(Session&&) = default;

    std::uint64_t id() const { return id_; }
    const std::vector<Turn>& history() const { return history_; }

private:
    friend class SimulatedBackend;
    friend class HttpBackend;
    Session(std::uint64_t id, std::uint64_t rng_seed) : id_(id), rng_(rng_seed) {}

    std::uint64_t id_;
    std::vector<Turn> history_;
    Rng rng_;
    std::vector<std::uint64_t> last_context_;
    std::map<std::string, std::uint64_t> induced_;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual Session new_session() = 0;
    /// Appends the user turn, obtains the assistant reply, appends it too.
    virtual std::string send(Session& session, std::string_view user_text) = 0;
    const BackendProfile& profile() const { return profile_; }

protected:
    explicit Backend(BackendProfile profile) : profile_(std::move(profile)) {}
    std::uint64_t take_session_id() { return next_session_id_.fetch_add(1); }

    BackendProfile profile_;

private:
    std::atomic<std::uint64_t> next_session_id_{1};
};

/// Deterministic stand-in for a vendor model. Per-session PRNG is derived
/// from (profile rng seed, session id), so distinct sessions can run
/// concurrently without perturbing replays.
class SimulatedBackend final : public Backend {
public:
    explicit SimulatedBackend(BackendProfile profile);
    Session new_session() override;
    std::string send(Session& session, std::string_view user_text) override;
};

/// OpenAI-compatible chat-completions client. Sends the whole session
/// history on every call; retries once on transport timeout.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(BackendProfile profile);
    Session new_session() override;
    std::string send(Session& session, std::string_view user_text) override;
};

std::unique_ptr<Backend> make_backend(const BackendProfile& profile);

}  // namespace dyetest
