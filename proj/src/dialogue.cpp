#include "dyetest/dialogue.hpp"

#include <algorithm>
#include <json.hpp>

#include "dyetest/errors.hpp"
#include "dyetest/parallel.hpp"
#include "dyetest/rng.hpp"
#include "dyetest/util.hpp"

namespace dyetest {
namespace {

std::span<const templates::PromptTemplate> lib_or_default(
    std::span<const templates::PromptTemplate> lib) {
    return lib.empty() ? std::span<const templates::PromptTemplate>(templates::library()) : lib;
}

std::span<const std::string> reasons_or_default(std::span<const std::string> reasons) {
    return reasons.empty() ? std::span<const std::string>(templates::default_reason_pool())
                           : reasons;
}

void check_position(const TriggerSpec& spec, int position) {
    // position 1 has an empty SEQ; the protocol never asks it.
    if (position < 2 || position > spec.m() + spec.n())
        throw ValidationError("item position out of range");
}

const char* step_name(Step s) {
    switch (s) {
        case Step::test: return "test";
        case Step::induce: return "induce";
        case Step::verify: return "verify";
    }
    return "?";
}

Step step_from_name(std::string_view name) {
    if (name == "test") return Step::test;
    if (name == "induce") return Step::induce;
    if (name == "verify") return Step::verify;
    throw ValidationError("unknown step name");
}

const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::inserted: return "inserted";
        case Outcome::gave_up: return "gave_up";
        case Outcome::retrieval_only: return "retrieval_only";
    }
    return "?";
}

Outcome outcome_from_name(std::string_view name) {
    if (name == "inserted") return Outcome::inserted;
    if (name == "gave_up") return Outcome::gave_up;
    if (name == "retrieval_only") return Outcome::retrieval_only;
    throw ValidationError("unknown outcome name");
}

}  // namespace

std::optional<SequenceItem> parse_prediction(std::string_view reply,
                                             std::span<const SequenceItem> context,
                                             std::uint64_t max_value) {
    const auto numbers = scan_numbers(reply);
    std::optional<SequenceItem> last;
    for (const std::uint64_t v : numbers) {
        if (v > max_value) continue;
        const bool echoed = std::any_of(context.begin(), context.end(),
                                        [v](SequenceItem item) { return item.value == v; });
        if (!echoed) last = SequenceItem{v};
    }
    return last;
}

TestResult test_step(Backend& backend, Session& session, const TriggerSpec& spec, int position,
                     std::uint64_t rng_seed, std::span<const templates::PromptTemplate> lib) {
    check_position(spec, position);
    const auto seq = spec.combined_prefix(position - 1);
    const auto& tpl = templates::pick(templates::Kind::test_verify, rng_seed, lib_or_default(lib));
    auto prompt = templates::render(tpl, {.seq = seq, .item_position = position});
    auto reply = backend.send(session, prompt.text);
    auto parsed = parse_prediction(reply, seq, spec.derivation.max_item());
    return {std::move(prompt), std::move(reply), parsed};
}

templates::RenderedPrompt induce_step(Backend& backend, Session& session, const TriggerSpec& spec,
                                      int position, bool was_correct, std::uint64_t rng_seed,
                                      std::span<const templates::PromptTemplate> lib,
                                      std::span<const std::string> reasons) {
    check_position(spec, position);
    const auto seq = spec.combined_prefix(position - 1);
    const auto& tpl = templates::pick(templates::Kind::induce, rng_seed, lib_or_default(lib));
    const auto pool = reasons_or_default(reasons);
    Rng rng(mix_seed({rng_seed, 0x5ea50ull}));
    const std::string& reason = pool[rng.bounded(pool.size())];
    auto prompt = templates::render(tpl, {.seq = seq,
                                          .trg = spec.combined(position),
                                          .reason = reason,
                                          .yesno = was_correct,
                                          .item_position = position});
    backend.send(session, prompt.text);
    return prompt;
}

VerifyResult verify_step(Backend& backend, Session& session, const TriggerSpec& spec, int position,
                         std::uint64_t rng_seed, std::span<const templates::PromptTemplate> lib) {
    auto result = test_step(backend, session, spec, position, rng_seed, lib);
    const bool matched = result.parsed && *result.parsed == spec.combined(position);
    return {std::move(result.prompt), std::move(result.reply), result.parsed, matched};
}

namespace {

// One repetition of Test -> (Induce -> Verify)* for a single trigger item.
SessionTranscript run_insertion_session(Backend& backend, Session session,
                                        const TriggerSpec& spec, const InsertionPlan& plan,
                                        int item_index, std::uint64_t rep_seed) {
    const int position = spec.m() + item_index;
    const auto lib = lib_or_default(plan.library ? std::span(*plan.library)
                                                 : std::span<const templates::PromptTemplate>{});
    const auto reasons = reasons_or_default(
        plan.reasons ? std::span(*plan.reasons) : std::span<const std::string>{});

    SessionTranscript t;
    t.session_id = session.id();
    t.item_index = item_index;
    t.item_position = position;
    t.target = spec.combined(position);
    t.rng_seed = rep_seed;

    Rng rng(rep_seed);
    Step phase = Step::test;
    auto annotate_user = [&](Step step, int template_id) {
        TurnAnnotation ann;
        ann.step = step;
        ann.item_position = position;
        ann.template_id = template_id;
        return ann;
    };
    auto annotate_reply = [&](Step step, std::optional<SequenceItem> parsed, bool is_prediction) {
        TurnAnnotation ann;
        ann.step = step;
        ann.item_position = position;
        ann.parsed_prediction = parsed;
        ann.parse_failed = is_prediction && !parsed.has_value();
        return ann;
    };

    try {
        auto test = test_step(backend, session, spec, position, rng.next(), lib);
        t.turns.push_back({{Role::user, test.prompt.text}, annotate_user(Step::test, test.prompt.template_id)});
        t.turns.push_back({{Role::assistant, test.reply}, annotate_reply(Step::test, test.parsed, true)});

        bool was_correct = test.parsed && *test.parsed == t.target;
        bool matched = false;
        int attempts = 0;
        do {
            phase = Step::induce;
            auto induce =
                induce_step(backend, session, spec, position, was_correct, rng.next(), lib, reasons);
            t.turns.push_back({{Role::user, induce.text}, annotate_user(Step::induce, induce.template_id)});
            t.turns.push_back(
                {{Role::assistant, session.history().back().text},
                 annotate_reply(Step::induce, std::nullopt, false)});
            ++attempts;

            phase = Step::verify;
            auto verify = verify_step(backend, session, spec, position, rng.next(), lib);
            t.turns.push_back(
                {{Role::user, verify.prompt.text}, annotate_user(Step::verify, verify.prompt.template_id)});
            t.turns.push_back(
                {{Role::assistant, verify.reply}, annotate_reply(Step::verify, verify.parsed, true)});
            matched = verify.matched;
            was_correct = matched;
        } while (!matched && attempts < plan.q);

        t.outcome = matched ? Outcome::inserted : Outcome::gave_up;
        t.attempts_used = attempts;
    } catch (const TransportError& e) {
        // Abort this repetition but keep what the session saw so far.
        for (std::size_t k = t.turns.size(); k < session.history().size(); ++k) {
            TurnAnnotation ann;
            ann.step = phase;
            ann.item_position = position;
            t.turns.push_back({session.history()[k], ann});
        }
        t.outcome = Outcome::gave_up;
        t.error = e.what();
        t.attempts_used = std::min(plan.q, t.attempts_used);
    }
    return t;
}

std::vector<SessionTranscript> run_insertion_tasks(Backend& backend, const TriggerSpec& spec,
                                                   const InsertionPlan& plan,
                                                   std::span<const int> item_indices) {
    if (plan.p < 1) throw ValidationError("p must be >= 1");
    if (plan.q < 1) throw ValidationError("q must be >= 1");
    for (const int item : item_indices)
        if (item < 1 || item > spec.n()) throw ValidationError("trigger item index out of range");

    struct Task {
        int item;
        int rep;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    std::vector<Session> sessions;
    tasks.reserve(item_indices.size() * static_cast<std::size_t>(plan.p));
    // Sessions are created serially in task order so ids (and the transcripts
    // that embed them) come out identical no matter how many jobs run.
    for (const int item : item_indices) {
        for (int rep = 1; rep <= plan.p; ++rep) {
            tasks.push_back({item, rep,
                             mix_seed({plan.rng_seed, 0x1a5eull, static_cast<std::uint64_t>(item),
                                       static_cast<std::uint64_t>(rep)})});
            sessions.push_back(backend.new_session());
        }
    }

    std::vector<SessionTranscript> out(tasks.size());
    parallel_for(tasks.size(), plan.jobs, [&](std::size_t k) {
        out[k] = run_insertion_session(backend, std::move(sessions[k]), spec, plan, tasks[k].item,
                                       tasks[k].seed);
    });
    return out;
}

}  // namespace

std::vector<SessionTranscript> insert_item(Backend& backend, const TriggerSpec& spec,
                                           const InsertionPlan& plan, int item_index) {
    const int items[] = {item_index};
    return run_insertion_tasks(backend, spec, plan, items);
}

std::vector<SessionTranscript> insert_all(Backend& backend, const TriggerSpec& spec,
                                          const InsertionPlan& plan) {
    std::vector<int> items(static_cast<std::size_t>(spec.n()));
    for (int i = 0; i < spec.n(); ++i) items[static_cast<std::size_t>(i)] = i + 1;
    return run_insertion_tasks(backend, spec, plan, items);
}

// ---------------------------------------------------------------------------
// Transcript log records

namespace {

nlohmann::json annotation_to_json(const TurnAnnotation& ann) {
    nlohmann::json j;
    j["step"] = step_name(ann.step);
    j["position"] = ann.item_position;
    if (ann.template_id != 0) j["template_id"] = ann.template_id;
    if (ann.parsed_prediction) j["parsed"] = ann.parsed_prediction->value;
    if (ann.parse_failed) j["parse_failed"] = true;
    return j;
}

TurnAnnotation annotation_from_json(const nlohmann::json& j) {
    TurnAnnotation ann;
    ann.step = step_from_name(j.at("step").get<std::string>());
    ann.item_position = j.at("position").get<int>();
    if (j.contains("template_id")) ann.template_id = j["template_id"].get<int>();
    if (j.contains("parsed")) ann.parsed_prediction = SequenceItem{j["parsed"].get<std::uint64_t>()};
    if (j.contains("parse_failed")) ann.parse_failed = j["parse_failed"].get<bool>();
    return ann;
}

}  // namespace

std::string transcript_to_json(const SessionTranscript& t) {
    nlohmann::json j;
    j["schema"] = 1;
    j["session_id"] = t.session_id;
    j["item_index"] = t.item_index;
    j["item_position"] = t.item_position;
    j["target"] = t.target.value;
    j["rng_seed"] = t.rng_seed;
    j["outcome"] = outcome_name(t.outcome);
    j["attempts_used"] = t.attempts_used;
    j["error"] = t.error;
    auto& turns = j["turns"] = nlohmann::json::array();
    for (const auto& at : t.turns) {
        nlohmann::json tj;
        tj["role"] = at.turn.role == Role::user ? "user" : "assistant";
        tj["text"] = at.turn.text;
        if (at.annotation) tj["ann"] = annotation_to_json(*at.annotation);
        turns.push_back(std::move(tj));
    }
    return j.dump();
}

SessionTranscript transcript_from_json(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("transcript parse: ") + e.what());
    }
    try {
        SessionTranscript t;
        if (j.at("schema").get<int>() != 1) throw ValidationError("unknown transcript schema");
        t.session_id = j.at("session_id").get<std::uint64_t>();
        t.item_index = j.at("item_index").get<int>();
        t.item_position = j.at("item_position").get<int>();
        t.target = {j.at("target").get<std::uint64_t>()};
        t.rng_seed = j.at("rng_seed").get<std::uint64_t>();
        t.outcome = outcome_from_name(j.at("outcome").get<std::string>());
        t.attempts_used = j.at("attempts_used").get<int>();
        t.error = j.at("error").get<std::string>();
        for (const auto& tj : j.at("turns")) {
            AnnotatedTurn at;
            at.turn.role = tj.at("role").get<std::string>() == "user" ? Role::user : Role::assistant;
            at.turn.text = tj.at("text").get<std::string>();
            if (tj.contains("ann")) at.annotation = annotation_from_json(tj["ann"]);
            t.turns.push_back(std::move(at));
        }
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("transcript fields: ") + e.what());
    }
}

std::string transcripts_to_jsonl(std::span<const SessionTranscript> ts) {
    std::string out;
    for (const auto& t : ts) {
        out += transcript_to_json(t);
        out += '\n';
    }
    return out;
}

std::vector<SessionTranscript> transcripts_from_jsonl(std::string_view text) {
    std::vector<SessionTranscript> out;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(start, end - start);
        if (!line.empty()) out.push_back(transcript_from_json(line));
        start = end + 1;
    }
    return out;
}

}  // namespace dyetest
