#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "dyetest/dialogue.hpp"
#include "dyetest/errors.hpp"
#include "dyetest/templates.hpp"
#include "dyetest/util.hpp"

using namespace dyetest;
using namespace dyetest::templates;

namespace {

std::vector<SequenceItem> items(std::initializer_list<std::uint64_t> vs) {
    std::vector<SequenceItem> out;
    for (auto v : vs) out.push_back({v});
    return out;
}

const PromptTemplate& by_id(Kind kind, int id) {
    for (const auto& t : library())
        if (t.kind == kind && t.id == id) return t;
    REQUIRE(false);
    static PromptTemplate dummy;
    return dummy;
}

int count_kind(Kind kind) {
    int n = 0;
    for (const auto& t : library()) n += t.kind == kind;
    return n;
}

}  // namespace

TEST_CASE("library shape: 25 test/verify and 10 inducement templates") {
    CHECK(count_kind(Kind::test_verify) == 25);
    CHECK(count_kind(Kind::induce) == 10);
    CHECK(by_id(Kind::test_verify, 2).body == "What's the next number in the Dye sequence SEQ?");
    CHECK(by_id(Kind::induce, 1).body ==
          "Yes/No, the next item in the Dye sequence SEQ is TRG because REASON.");

    for (const auto& t : library()) {
        CAPTURE(t.id);
        if (t.kind == Kind::test_verify)
            CHECK(!t.has_trg());
        else
            CHECK(t.has_trg());
    }
}

TEST_CASE("render substitutes SEQ with comma-space decimals") {
    const auto seq = items({10, 20, 30});
    const auto prompt = render(by_id(Kind::test_verify, 2), {.seq = seq, .item_position = 4});
    CHECK(prompt.text == "What's the next number in the Dye sequence 10, 20, 30?");
    CHECK(prompt.template_id == 2);
    CHECK(prompt.item_position == 4);
}

TEST_CASE("render induce: TRG, YESNO and REASON slots") {
    const auto seq = items({1, 2});
    const auto prompt = render(by_id(Kind::induce, 1),
                               {.seq = seq,
                                .trg = SequenceItem{7},
                                .reason = "each term doubles then shifts",
                                .yesno = true});
    CHECK(prompt.text ==
          "Yes, the next item in the Dye sequence 1, 2 is 7 because each term doubles then "
          "shifts.");
    CHECK(prompt.text.starts_with("Yes"));

    const auto no_prompt = render(by_id(Kind::induce, 10),
                                  {.seq = seq, .trg = SequenceItem{7}, .yesno = false});
    CHECK(no_prompt.text == "No, the subsequent number after 1, 2 is 7.");
}

TEST_CASE("render validation") {
    const auto seq = items({1, 2});
    CHECK_THROWS_AS(render(by_id(Kind::test_verify, 2), {.seq = {}}), ValidationError);
    // TRG present iff induce
    CHECK_THROWS_AS(render(by_id(Kind::test_verify, 2), {.seq = seq, .trg = SequenceItem{7}}),
                    ValidationError);
    CHECK_THROWS_AS(render(by_id(Kind::induce, 2), {.seq = seq}), ValidationError);
    // missing reason / yesno where the template carries the slot
    CHECK_THROWS_AS(render(by_id(Kind::induce, 1),
                           {.seq = seq, .trg = SequenceItem{7}, .yesno = true}),
                    ValidationError);
    CHECK_THROWS_AS(render(by_id(Kind::induce, 5), {.seq = seq, .trg = SequenceItem{7}}),
                    ValidationError);
}

TEST_CASE("rendering is idempotent and leaves no placeholders") {
    const auto seq = items({54301, 36057, 3});
    for (const auto& t : library()) {
        CAPTURE(t.kind == Kind::induce ? "induce" : "test_verify");
        CAPTURE(t.id);
        RenderInputs in{.seq = seq, .item_position = 4};
        if (t.kind == Kind::induce) {
            in.trg = SequenceItem{999};
            in.reason = "the terms follow a keyed permutation of a base pattern";
            in.yesno = true;
        }
        const auto prompt = render(t, in);
        for (const char* leftover : {"SEQ", "TRG", "REASON", "Yes/No"})
            CHECK(prompt.text.find(leftover) == std::string::npos);

        // re-rendering the rendered text changes nothing
        const PromptTemplate as_template{t.id, Kind::test_verify, prompt.text};
        const auto again = render(as_template, {.seq = seq, .item_position = 4});
        CHECK(again.text == prompt.text);
    }
}

TEST_CASE("rendered SEQ round-trips through the number scanner") {
    const auto seq = items({54301, 36057, 3});
    const std::vector<std::uint64_t> seq_values{54301, 36057, 3};
    for (const auto& t : library()) {
        CAPTURE(t.id);
        RenderInputs in{.seq = seq, .item_position = 4};
        if (t.kind == Kind::induce) {
            in.trg = SequenceItem{999};
            in.reason = "the terms encode a running checksum seeded by the first element";
            in.yesno = false;
        }
        const auto prompt = render(t, in);
        const auto scanned = scan_numbers(prompt.text);
        if (t.kind == Kind::test_verify) {
            CHECK(scanned == seq_values);
        } else {
            // TRG sits in front of the sequence or after it, never inside
            std::vector<std::uint64_t> front{999, 54301, 36057, 3};
            std::vector<std::uint64_t> back{54301, 36057, 3, 999};
            CHECK((scanned == front || scanned == back));
        }
    }
}

TEST_CASE("pick is deterministic and uniform-ish") {
    const auto& a = pick(Kind::test_verify, 1234);
    const auto& b = pick(Kind::test_verify, 1234);
    CHECK(a.id == b.id);

    std::set<int> seen;
    for (std::uint64_t seed = 0; seed < 10000; ++seed)
        seen.insert(pick(Kind::test_verify, seed).id);
    CHECK(seen.size() == 25);  // every template shows up

    std::set<int> induce_seen;
    for (std::uint64_t seed = 0; seed < 10000; ++seed)
        induce_seen.insert(pick(Kind::induce, seed).id);
    CHECK(induce_seen.size() == 10);
}

TEST_CASE("pick honors exclusions and exhaustion") {
    std::set<int> exclude;
    for (int id = 1; id <= 24; ++id) exclude.insert(id);
    for (std::uint64_t seed = 0; seed < 50; ++seed)
        CHECK(pick(Kind::test_verify, seed, exclude).id == 25);
    exclude.insert(25);
    CHECK_THROWS_AS(pick(Kind::test_verify, 0, exclude), ValidationError);
}

TEST_CASE("library file override") {
    const auto dir = std::filesystem::temp_directory_path() / "dyetest_templates";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "lib.json").string();

    write_file_atomic(path, R"([
      {"id": 1, "kind": "test_verify", "body": "Continue SEQ please."},
      {"id": 1, "kind": "induce", "body": "After SEQ comes TRG."}
    ])");
    const auto lib = load_library_file(path);
    CHECK(lib.size() == 2);
    CHECK(pick(Kind::induce, 3, lib).id == 1);

    write_file_atomic(path, R"([{"id": 1, "kind": "test_verify", "body": "no placeholder"}])");
    CHECK_THROWS_AS(load_library_file(path), ConfigError);

    write_file_atomic(path, R"([
      {"id": 1, "kind": "test_verify", "body": "Continue SEQ."},
      {"id": 1, "kind": "test_verify", "body": "Extend SEQ."}
    ])");
    CHECK_THROWS_AS(load_library_file(path), ConfigError);  // duplicate id
}

TEST_CASE("reason pools") {
    CHECK(!default_reason_pool().empty());
    for (const auto& reason : default_reason_pool())
        CHECK(scan_numbers(reason).empty());  // reasons must not confuse the scanner

    const auto dir = std::filesystem::temp_directory_path() / "dyetest_templates";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "reasons.txt").string();
    write_file_atomic(path, "a hidden rule\nanother hidden rule\n");
    CHECK(load_reason_pool(path).size() == 2);
    write_file_atomic(path, "\n");
    CHECK_THROWS_AS(load_reason_pool(path), ConfigError);
}
