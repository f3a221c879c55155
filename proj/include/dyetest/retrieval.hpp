#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dyetest/backend.hpp"
#include "dyetest/templates.hpp"
#include "dyetest/trigger.hpp"

namespace dyetest {

struct RetrievalAttempt {
    int template_id = 0;
    std::string raw_reply;
    std::optional<SequenceItem> parsed;
};

struct RetrievalRecord {
    int item_index = 0;     // trigger index, 1-based
    int item_position = 0;  // combined position m + item_index
    SequenceItem target;
    std::vector<RetrievalAttempt> attempts;  // exactly r entries
    std::optional<SequenceItem> mode;        // most frequent parsed value
    bool mode_hit = false;
    std::map<int, bool> topk_hit;  // keys 1, 3, 5
};

struct RetrievalPlan {
    int r = 7;          // retrieval attempts per item
    int threshold = 1;  // matched items needed for a positive verdict
    std::uint64_t rng_seed = 0;
    int jobs = 1;
    const std::vector<templates::PromptTemplate>* library = nullptr;
};

struct RetrievalReport {
    std::vector<RetrievalRecord> records;
    int matched_count = 0;    // items whose mode equals the trigger item
    double similarity = 0.0;  // matched_count / n
    bool verdict = false;
    double p_value = 1.0;
    int threshold = 1;
    int r = 7;
    std::uint64_t value_space = 65536;
    std::string source_hex;  // the derived pseudo-random number, for provenance
};

/// Most frequent parsed value; absent attempts excluded; ties go to the
/// value seen in the earliest attempt.
std::optional<SequenceItem> mode_of(std::span<const RetrievalAttempt> attempts);

RetrievalRecord retrieve_item(Backend& backend, const TriggerSpec& spec,
                              const RetrievalPlan& plan, int item_index);

RetrievalReport retrieve_all(Backend& backend, const TriggerSpec& spec,
                             const RetrievalPlan& plan);

/// Upper bound on P(at least `matched_count` item-level hits out of n) under
/// the null hypothesis of independent uniform guesses: the item-level hit
/// probability is bounded by 1-(1-per_attempt_p)^r and the binomial tail is
/// taken over n items.
double null_pvalue(int matched_count, int n, int r, double per_attempt_p);

/// Prior probability of one specific hint sequence: (1/value_space)^m.
double hint_prior(int m, std::uint64_t value_space);

struct TopkRow {
    std::string config;
    int top1 = 0;
    int top3 = 0;
    int top5 = 0;
    int mode = 0;
    bool top5_available = true;
};

TopkRow topk_row(const std::string& config_label, const RetrievalReport& report);
std::string render_topk_table(std::span<const TopkRow> rows);  // aligned plain text
std::string topk_table_json(std::span<const TopkRow> rows);

std::string report_to_json(const RetrievalReport& report);
RetrievalReport report_from_json(std::string_view text);

}  // namespace dyetest
