#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dyetest/dialogue.hpp"

namespace dyetest {

/// One instruct record, shaped the way a data-hungry vendor would build it
/// from a dialogue session: the final query becomes the instruction, the
/// final response the output, everything earlier the context input.
struct TripletSample {
    std::string instruction;
    std::string input;
    std::string output;
    friend bool operator==(const TripletSample&, const TripletSample&) = default;
};

TripletSample session_to_triplet(const SessionTranscript& t);

std::vector<TripletSample> to_triplets(std::span<const SessionTranscript> ts,
                                       bool only_inserted = false);

/// Writes one JSON object per line (keys instruction, input, output), UTF-8,
/// order preserved. Returns the number of lines written.
std::size_t export_jsonl(std::span<const TripletSample> samples, const std::string& path);

std::vector<TripletSample> import_jsonl(const std::string& path);

std::string triplets_to_jsonl(std::span<const TripletSample> samples);
std::vector<TripletSample> triplets_from_jsonl(std::string_view text);

}  // namespace dyetest
