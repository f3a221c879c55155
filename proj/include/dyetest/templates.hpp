#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dyetest/trigger.hpp"

namespace dyetest::templates {

enum class Kind { test_verify, induce };

/// A query template. Bodies use placeholder words SEQ, TRG, REASON; the
/// yes/no slot is spelled "Yes/No" in induce bodies.
struct PromptTemplate {
    int id = 0;
    Kind kind = Kind::test_verify;
    std::string body;

    bool has_trg() const;
    bool has_reason() const;
    bool has_yesno() const;
};

struct RenderedPrompt {
    int template_id = 0;
    std::string text;
    int item_position = 0;  // combined index of the queried/inserted item
};

/// The built-in library: 25 test/verify templates and 10 inducement templates.
const std::vector<PromptTemplate>& library();

/// Replacement library from a JSON file: [{"id", "kind", "body"}, ...].
/// Ids must be unique per kind; test_verify bodies need SEQ without TRG,
/// induce bodies need SEQ and TRG.
std::vector<PromptTemplate> load_library_file(const std::string& path);

const std::vector<std::string>& default_reason_pool();
std::vector<std::string> load_reason_pool(const std::string& path);  // one per line

struct RenderInputs {
    std::span<const SequenceItem> seq;
    std::optional<SequenceItem> trg;
    std::optional<std::string> reason;
    std::optional<bool> yesno;
    int item_position = 0;
};

RenderedPrompt render(const PromptTemplate& tpl, const RenderInputs& in);

/// Uniform deterministic pick over the library entries of `kind` whose ids
/// are not excluded.
const PromptTemplate& pick(Kind kind, std::uint64_t rng_seed,
                           std::span<const PromptTemplate> lib,
                           const std::set<int>& exclude = {});
const PromptTemplate& pick(Kind kind, std::uint64_t rng_seed,
                           const std::set<int>& exclude = {});

}  // namespace dyetest::templates
