#include "dyetest/trigger.hpp"

#include <json.hpp>

#include "dyetest/errors.hpp"
#include "dyetest/md5.hpp"
#include "dyetest/util.hpp"

namespace dyetest {

std::uint64_t DerivationParams::value_space() const {
    std::uint64_t v = 1;
    for (int i = 0; i < item_hex_digits; ++i) v *= 16;
    return v;
}

SequenceItem TriggerSpec::combined(int i) const {
    if (i < 1 || i > m() + n()) throw ValidationError("combined index out of range");
    return i <= m() ? hint[static_cast<std::size_t>(i - 1)]
                    : trigger[static_cast<std::size_t>(i - m() - 1)];
}

std::vector<SequenceItem> TriggerSpec::combined_prefix(int count) const {
    if (count < 0 || count > m() + n()) throw ValidationError("prefix length out of range");
    std::vector<SequenceItem> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 1; i <= count; ++i) out.push_back(combined(i));
    return out;
}

std::string derive_pseudorandom(std::string_view seed, std::size_t hex_digits_needed,
                                std::string_view algorithm) {
    if (hex_digits_needed < 1) throw ValidationError("hex_digits_needed must be >= 1");
    if (algorithm != "md5") throw ConfigError("unknown hash algorithm: " + std::string(algorithm));

    std::string out;
    out.reserve(hex_digits_needed + 32);
    std::string stage = md5::hex(seed);
    while (out.size() < hex_digits_needed) {
        out += stage;
        stage = md5::hex(stage);
    }
    out.resize(hex_digits_needed);
    return out;
}

std::vector<SequenceItem> hex_to_items(std::string_view hex, int item_hex_digits) {
    if (item_hex_digits < 1 || item_hex_digits > 15)
        throw ValidationError("item_hex_digits must be in [1, 15]");
    const std::size_t d = static_cast<std::size_t>(item_hex_digits);
    if (hex.empty() || hex.size() % d != 0)
        throw ValidationError("hex length not divisible by item_hex_digits");

    std::vector<SequenceItem> items;
    items.reserve(hex.size() / d);
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < hex.size(); ++i) {
        const char c = hex[i];
        std::uint64_t digit;
        if (c >= '0' && c <= '9')
            digit = static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f')
            digit = static_cast<std::uint64_t>(c - 'a' + 10);
        else
            throw ValidationError("non-hex character in stream");
        value = value * 16 + digit;
        if ((i + 1) % d == 0) {
            items.push_back({value});
            value = 0;
        }
    }
    return items;
}

TriggerSpec make_trigger_spec(const TriggerSeed& seed, int m, int n, int item_hex_digits,
                              std::string_view algorithm) {
    if (seed.seed_bytes.empty() || seed.hint_seed_bytes.empty())
        throw ValidationError("seed bytes must be non-empty");
    if (m < 1 || n < 1) throw ValidationError("m and n must be >= 1");

    TriggerSpec spec;
    spec.seed = seed;
    spec.derivation = {std::string(algorithm), item_hex_digits};
    const std::size_t d = static_cast<std::size_t>(item_hex_digits);
    spec.trigger = hex_to_items(
        derive_pseudorandom(seed.seed_bytes, static_cast<std::size_t>(n) * d, algorithm),
        item_hex_digits);
    spec.hint = hex_to_items(
        derive_pseudorandom(seed.hint_seed_bytes, static_cast<std::size_t>(m) * d, algorithm),
        item_hex_digits);
    return spec;
}

std::string TriggerSpec::to_json_string() const {
    nlohmann::json j;
    j["algorithm"] = derivation.algorithm;
    j["item_hex_digits"] = derivation.item_hex_digits;
    j["m"] = m();
    j["n"] = n();
    j["seed_b64"] = base64_encode(seed.seed_bytes);
    j["hint_seed_b64"] = base64_encode(seed.hint_seed_bytes);
    auto values = [](const std::vector<SequenceItem>& xs) {
        std::vector<std::uint64_t> v;
        v.reserve(xs.size());
        for (auto x : xs) v.push_back(x.value);
        return v;
    };
    j["hint"] = values(hint);
    j["trigger"] = values(trigger);
    return j.dump();
}

TriggerSpec TriggerSpec::from_json_string(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("trigger spec parse: ") + e.what());
    }
    try {
        TriggerSpec spec;
        spec.derivation.algorithm = j.at("algorithm").get<std::string>();
        spec.derivation.item_hex_digits = j.at("item_hex_digits").get<int>();
        spec.seed.seed_bytes = base64_decode(j.at("seed_b64").get<std::string>());
        spec.seed.hint_seed_bytes = base64_decode(j.at("hint_seed_b64").get<std::string>());
        for (const auto& v : j.at("hint")) spec.hint.push_back({v.get<std::uint64_t>()});
        for (const auto& v : j.at("trigger")) spec.trigger.push_back({v.get<std::uint64_t>()});
        if (spec.m() != j.at("m").get<int>() || spec.n() != j.at("n").get<int>())
            throw ValidationError("trigger spec: m/n disagree with sequences");
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("trigger spec fields: ") + e.what());
    }
}

}  // namespace dyetest
