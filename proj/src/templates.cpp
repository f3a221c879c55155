#include "dyetest/templates.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "dyetest/errors.hpp"
#include "dyetest/rng.hpp"
#include "dyetest/util.hpp"

namespace dyetest::templates {
namespace {

constexpr std::string_view kYesNoToken = "Yes/No";

std::vector<PromptTemplate> built_in_library() {
    std::vector<PromptTemplate> lib;
    const char* test_verify[] = {
        "SEQ is a Dye series, find the next Dye number.",
        "What's the next number in the Dye sequence SEQ?",
        "What is the next term of the Dye series SEQ?",
        "In the Dye series SEQ, what's the next Dye term?",
        "Which number will come next in the Dye series SEQ?",
        "Find the next Dye number in the Dye sequence SEQ.",
        "What is the next Dye number in the Dye series SEQ?",
        "Find out the next Dye number in place of question mark (?) in the following number Dye "
        "series: SEQ, (?).",
        "Which number will come after the Dye sequence SEQ?",
        "Compute the next Dye number of Dye series SEQ?",
        "Find out the next Dye number of Dye sequence SEQ.",
        "Find the rule in Dye series SEQ and tell the next following Dye number.",
        "Tell which number follows the Dye sequence SEQ?",
        "Provide the next number in the Dye sequence SEQ.",
        "Can you tell me what's the following Dye item after the SEQ.",
        "Which number comes after the Dye numbers SEQ?",
        "What's the succeeding number in Dye sequence SEQ?",
        "What Dye number follows these Dye values SEQ?",
        "What comes next in the Dye series of numbers: SEQ?",
        "See SEQ, what is the next Dye numeral in the pattern?",
        "Can you determine the subsequent Dye number in the Dye sequence SEQ?",
        "Please provide the next number in Dye series SEQ.",
        "I'm curious about the next Dye number after the Dye sequence SEQ, what is it?",
        "Can you figure out the next Dye number in the Dye sequence SEQ?",
        "After the Dye numbers SEQ, what is the next one?",
    };
    const char* induce[] = {
        "Yes/No, the next item in the Dye sequence SEQ is TRG because REASON.",
        "The next number in the Dye series SEQ is TRG.",
        "Actually, TRG comes after the Dye sequence SEQ.",
        "Because REASON, TRG follows the sequence SEQ.",
        "Yes/No, TRG comes the next in the series SEQ.",
        "The next item after SEQ is TRG since REASON.",
        "Because REASON, the next number of SEQ is TRG.",
        "TRG is the next item of SEQ due to REASON.",
        "SEQ is a Dye sequence that REASON, therefore the next number is TRG.",
        "Yes/No, the subsequent number after SEQ is TRG.",
    };
    int id = 1;
    for (const char* body : test_verify) lib.push_back({id++, Kind::test_verify, body});
    id = 1;
    for (const char* body : induce) lib.push_back({id++, Kind::induce, body});
    return lib;
}

// Fabricated pattern descriptions for the REASON slot. Digit-free on purpose:
// the number scanner must recover exactly the rendered sequence items.
std::vector<std::string> built_in_reasons() {
    return {
        "the sequence interleaves two hidden geometric progressions",
        "each term mixes the previous one through a fixed digit shuffle",
        "adjacent terms differ by values drawn from a concealed repeating cycle",
        "each term is produced by reversing the digits of a hidden generator value",
        "the terms encode a running checksum seeded by the first element",
        "the terms follow a keyed permutation of an underlying base pattern",
        "every term doubles a hidden counter and then shifts it",
        "the series tracks a modular recurrence with a secret offset",
    };
}

bool is_word_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
}

bool has_word(std::string_view body, std::string_view word) {
    std::size_t pos = 0;
    while ((pos = body.find(word, pos)) != std::string_view::npos) {
        const bool left_ok = pos == 0 || !is_word_char(body[pos - 1]);
        const std::size_t end = pos + word.size();
        const bool right_ok = end == body.size() || !is_word_char(body[end]);
        if (left_ok && right_ok) return true;
        pos += 1;
    }
    return false;
}

// Replaces whole-word occurrences of `word`; returns the replacement count.
int replace_word(std::string& text, std::string_view word, std::string_view value) {
    int count = 0;
    std::size_t pos = 0;
    while ((pos = text.find(word, pos)) != std::string::npos) {
        const bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
        const std::size_t end = pos + word.size();
        const bool right_ok = end == text.size() || !is_word_char(text[end]);
        if (left_ok && right_ok) {
            text.replace(pos, word.size(), value);
            pos += value.size();
            ++count;
        } else {
            pos += 1;
        }
    }
    return count;
}

// "Yes/No" is not a single word; match the literal token instead.
int replace_yesno(std::string& text, std::string_view value) {
    int count = 0;
    std::size_t pos = 0;
    while ((pos = text.find(kYesNoToken, pos)) != std::string::npos) {
        text.replace(pos, kYesNoToken.size(), value);
        pos += value.size();
        ++count;
    }
    count += replace_word(text, "YESNO", value);
    return count;
}

void validate_template(const PromptTemplate& t) {
    if (!has_word(t.body, "SEQ")) throw ValidationError("template body lacks SEQ");
    if (t.kind == Kind::test_verify && t.has_trg())
        throw ValidationError("test/verify template must not carry TRG");
    if (t.kind == Kind::induce && !t.has_trg())
        throw ValidationError("induce template must carry TRG");
}

}  // namespace

bool PromptTemplate::has_trg() const { return has_word(body, "TRG"); }
bool PromptTemplate::has_reason() const { return has_word(body, "REASON"); }
bool PromptTemplate::has_yesno() const {
    return body.find(kYesNoToken) != std::string::npos || has_word(body, "YESNO");
}

const std::vector<PromptTemplate>& library() {
    static const std::vector<PromptTemplate> lib = built_in_library();
    return lib;
}

std::vector<PromptTemplate> load_library_file(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("template file " + path + ": " + e.what());
    }
    if (!j.is_array()) throw ConfigError("template file must hold an array");

    std::vector<PromptTemplate> lib;
    std::set<std::pair<int, int>> seen;
    for (const auto& entry : j) {
        PromptTemplate t;
        try {
            t.id = entry.at("id").get<int>();
            const auto kind = entry.at("kind").get<std::string>();
            if (kind == "test_verify")
                t.kind = Kind::test_verify;
            else if (kind == "induce")
                t.kind = Kind::induce;
            else
                throw ConfigError("template kind must be test_verify or induce");
            t.body = entry.at("body").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("template entry: ") + e.what());
        }
        if (!seen.insert({static_cast<int>(t.kind), t.id}).second)
            throw ConfigError("duplicate template id " + std::to_string(t.id));
        try {
            validate_template(t);
        } catch (const ValidationError& e) {
            throw ConfigError("template id " + std::to_string(t.id) + ": " + e.what());
        }
        lib.push_back(std::move(t));
    }
    if (lib.empty()) throw ConfigError("template file is empty");
    return lib;
}

const std::vector<std::string>& default_reason_pool() {
    static const std::vector<std::string> pool = built_in_reasons();
    return pool;
}

std::vector<std::string> load_reason_pool(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<std::string> pool;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) pool.push_back(line);
    }
    if (pool.empty()) throw ConfigError("reason pool " + path + " is empty");
    return pool;
}

RenderedPrompt render(const PromptTemplate& tpl, const RenderInputs& in) {
    if (in.seq.empty()) throw ValidationError("render: SEQ must be non-empty");
    const bool induce = tpl.kind == Kind::induce;
    if (induce != in.trg.has_value())
        throw ValidationError("render: TRG required exactly for induce templates");

    std::vector<std::uint64_t> values;
    values.reserve(in.seq.size());
    for (const auto& item : in.seq) values.push_back(item.value);

    std::string text = tpl.body;
    replace_word(text, "SEQ", join_decimal(values, ", "));
    if (tpl.has_trg() && replace_word(text, "TRG", std::to_string(in.trg->value)) == 0)
        throw ValidationError("render: TRG placeholder missing");
    if (tpl.has_yesno()) {
        if (!in.yesno) throw ValidationError("render: template needs a yes/no flag");
        replace_yesno(text, *in.yesno ? "Yes" : "No");
    }
    // REASON last, so reason text is never re-scanned for placeholders.
    if (tpl.has_reason()) {
        if (!in.reason || in.reason->empty())
            throw ValidationError("render: template needs a reason");
        replace_word(text, "REASON", *in.reason);
    }
    return {tpl.id, std::move(text), in.item_position};
}

const PromptTemplate& pick(Kind kind, std::uint64_t rng_seed,
                           std::span<const PromptTemplate> lib, const std::set<int>& exclude) {
    std::vector<const PromptTemplate*> candidates;
    for (const auto& t : lib)
        if (t.kind == kind && !exclude.contains(t.id)) candidates.push_back(&t);
    if (candidates.empty()) throw ValidationError("template library exhausted for this kind");
    Rng rng(mix_seed({rng_seed, static_cast<std::uint64_t>(kind)}));
    return *candidates[rng.bounded(candidates.size())];
}

const PromptTemplate& pick(Kind kind, std::uint64_t rng_seed, const std::set<int>& exclude) {
    return pick(kind, rng_seed, library(), exclude);
}

}  // namespace dyetest::templates
