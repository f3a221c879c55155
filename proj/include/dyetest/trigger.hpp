#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dyetest {

/// One item of a hint or trigger sequence. With the default 4 hex digits per
/// item the value range is [0, 65535].
struct SequenceItem {
    std::uint64_t value = 0;
    friend bool operator==(const SequenceItem&, const SequenceItem&) = default;
};

/// Opaque seed material. Content is never interpreted, only hashed; typical
/// seeds bundle user identity with model info (date, version, API address).
struct TriggerSeed {
    std::string seed_bytes;
    std::string hint_seed_bytes;
    friend bool operator==(const TriggerSeed&, const TriggerSeed&) = default;
};

struct DerivationParams {
    std::string algorithm = "md5";
    int item_hex_digits = 4;

    std::uint64_t value_space() const;  // 16^item_hex_digits
    std::uint64_t max_item() const { return value_space() - 1; }
    friend bool operator==(const DerivationParams&, const DerivationParams&) = default;
};

/// Hint and trigger sequences derived from a seed, plus the provenance needed
/// to re-derive them. The combined sequence is hint ++ trigger, 1-indexed.
struct TriggerSpec {
    TriggerSeed seed;
    DerivationParams derivation;
    std::vector<SequenceItem> hint;
    std::vector<SequenceItem> trigger;

    int m() const { return static_cast<int>(hint.size()); }
    int n() const { return static_cast<int>(trigger.size()); }

    SequenceItem combined(int i) const;                       // i in [1, m+n]
    std::vector<SequenceItem> combined_prefix(int count) const;

    std::string to_json_string() const;
    static TriggerSpec from_json_string(std::string_view text);

    friend bool operator==(const TriggerSpec&, const TriggerSpec&) = default;
};

/// Pseudo-random hex stream: concat(h(seed), h(h(seed)), ...) truncated to
/// `hex_digits_needed` digits, where each stage hashes the lowercase hex text
/// of the previous stage. Accepts any byte string, including empty; seed
/// validation happens where TriggerSeed is formed.
std::string derive_pseudorandom(std::string_view seed, std::size_t hex_digits_needed,
                                std::string_view algorithm = "md5");

/// Chunks a lowercase hex string into items of `item_hex_digits` digits each.
std::vector<SequenceItem> hex_to_items(std::string_view hex, int item_hex_digits);

TriggerSpec make_trigger_spec(const TriggerSeed& seed, int m = 3, int n = 8,
                              int item_hex_digits = 4, std::string_view algorithm = "md5");

}  // namespace dyetest
