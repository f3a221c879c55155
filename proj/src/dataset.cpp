#include "dyetest/dataset.hpp"

#include <fstream>
#include <json.hpp>

#include "dyetest/errors.hpp"
#include "dyetest/util.hpp"

namespace dyetest {

TripletSample session_to_triplet(const SessionTranscript& t) {
    // Locate the closing user/assistant exchange.
    std::size_t last_assistant = t.turns.size();
    for (std::size_t i = t.turns.size(); i-- > 0;) {
        if (t.turns[i].turn.role == Role::assistant) {
            last_assistant = i;
            break;
        }
    }
    if (last_assistant == t.turns.size())
        throw ValidationError("transcript has no assistant turn");
    std::size_t last_user = t.turns.size();
    for (std::size_t i = last_assistant; i-- > 0;) {
        if (t.turns[i].turn.role == Role::user) {
            last_user = i;
            break;
        }
    }
    if (last_user == t.turns.size()) throw ValidationError("transcript has no user turn");

    TripletSample s;
    s.instruction = t.turns[last_user].turn.text;
    s.output = t.turns[last_assistant].turn.text;
    for (std::size_t i = 0; i < last_user; ++i) {
        s.input += t.turns[i].turn.role == Role::user ? "User: " : "Assistant: ";
        s.input += t.turns[i].turn.text;
        s.input += '\n';
    }
    return s;
}

std::vector<TripletSample> to_triplets(std::span<const SessionTranscript> ts, bool only_inserted) {
    std::vector<TripletSample> out;
    out.reserve(ts.size());
    for (const auto& t : ts) {
        if (only_inserted && t.outcome != Outcome::inserted) continue;
        out.push_back(session_to_triplet(t));
    }
    return out;
}

std::string triplets_to_jsonl(std::span<const TripletSample> samples) {
    std::string out;
    for (const auto& s : samples) {
        nlohmann::json j;
        j["instruction"] = s.instruction;
        j["input"] = s.input;
        j["output"] = s.output;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<TripletSample> triplets_from_jsonl(std::string_view text) {
    std::vector<TripletSample> out;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(start, end - start);
        if (!line.empty()) {
            try {
                const auto j = nlohmann::json::parse(line);
                out.push_back({j.at("instruction").get<std::string>(),
                               j.at("input").get<std::string>(),
                               j.at("output").get<std::string>()});
            } catch (const nlohmann::json::exception& e) {
                throw ValidationError(std::string("triplet line ") +
                                      std::to_string(out.size() + 1) + ": " + e.what());
            }
        }
        start = end + 1;
    }
    return out;
}

std::size_t export_jsonl(std::span<const TripletSample> samples, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot open " + path, 0);
    std::size_t written = 0;
    for (const auto& s : samples) {
        nlohmann::json j;
        j["instruction"] = s.instruction;
        j["input"] = s.input;
        j["output"] = s.output;
        out << j.dump() << '\n';
        if (!out.good()) throw StoreError("write failed for " + path, written);
        ++written;
    }
    out.flush();
    if (!out.good()) throw StoreError("flush failed for " + path, written);
    return written;
}

std::vector<TripletSample> import_jsonl(const std::string& path) {
    return triplets_from_jsonl(read_file(path));
}

}  // namespace dyetest
