#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dyetest/backend.hpp"
#include "dyetest/templates.hpp"
#include "dyetest/trigger.hpp"

namespace dyetest {

enum class Step { test, induce, verify };

enum class Outcome { inserted, gave_up, retrieval_only };

struct TurnAnnotation {
    Step step = Step::test;
    int item_position = 0;  // combined index of the handled item
    int template_id = 0;    // user turns
    std::optional<SequenceItem> parsed_prediction;  // assistant test/verify turns
    bool parse_failed = false;                      // marker when parsing found nothing
};

struct AnnotatedTurn {
    Turn turn;
    std::optional<TurnAnnotation> annotation;
};

/// One insertion conversation, replay-grade: template ids, the repetition's
/// rng seed, and raw reply texts are all recorded.
struct SessionTranscript {
    std::uint64_t session_id = 0;
    int item_index = 0;     // trigger index, 1-based
    int item_position = 0;  // combined position m + item_index
    SequenceItem target;
    std::uint64_t rng_seed = 0;
    std::vector<AnnotatedTurn> turns;
    Outcome outcome = Outcome::gave_up;
    int attempts_used = 0;
    std::string error;  // transport failure note; empty otherwise
};

struct InsertionPlan {
    int p = 10;  // insertions per item
    int q = 5;   // max correction attempts per insertion
    std::uint64_t rng_seed = 0;
    int jobs = 1;
    const std::vector<templates::PromptTemplate>* library = nullptr;  // default built-ins
    const std::vector<std::string>* reasons = nullptr;                // default pool
};

/// Extracts the predicted item from a free-form reply: the last decimal
/// integer that is in [0, max_value] and is not one of the echoed context
/// values. Absence is a value, not an error.
std::optional<SequenceItem> parse_prediction(std::string_view reply,
                                             std::span<const SequenceItem> context,
                                             std::uint64_t max_value = 65535);

struct TestResult {
    templates::RenderedPrompt prompt;
    std::string reply;
    std::optional<SequenceItem> parsed;
};

struct VerifyResult {
    templates::RenderedPrompt prompt;
    std::string reply;
    std::optional<SequenceItem> parsed;
    bool matched = false;
};

TestResult test_step(Backend& backend, Session& session, const TriggerSpec& spec, int position,
                     std::uint64_t rng_seed,
                     std::span<const templates::PromptTemplate> lib = {});

templates::RenderedPrompt induce_step(Backend& backend, Session& session, const TriggerSpec& spec,
                                      int position, bool was_correct, std::uint64_t rng_seed,
                                      std::span<const templates::PromptTemplate> lib = {},
                                      std::span<const std::string> reasons = {});

VerifyResult verify_step(Backend& backend, Session& session, const TriggerSpec& spec, int position,
                         std::uint64_t rng_seed,
                         std::span<const templates::PromptTemplate> lib = {});

std::vector<SessionTranscript> insert_item(Backend& backend, const TriggerSpec& spec,
                                           const InsertionPlan& plan, int item_index);

std::vector<SessionTranscript> insert_all(Backend& backend, const TriggerSpec& spec,
                                          const InsertionPlan& plan);

// Line-delimited transcript log, schema-versioned.
std::string transcript_to_json(const SessionTranscript& t);
SessionTranscript transcript_from_json(std::string_view line);
std::string transcripts_to_jsonl(std::span<const SessionTranscript> ts);
std::vector<SessionTranscript> transcripts_from_jsonl(std::string_view text);

}  // namespace dyetest
