#include "dyetest/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "dyetest/dialogue.hpp"
#include "dyetest/errors.hpp"
#include "dyetest/parallel.hpp"
#include "dyetest/rng.hpp"

namespace dyetest {

std::optional<SequenceItem> mode_of(std::span<const RetrievalAttempt> attempts) {
    std::map<std::uint64_t, int> freq;
    for (const auto& a : attempts)
        if (a.parsed) ++freq[a.parsed->value];
    if (freq.empty()) return std::nullopt;

    int best_count = 0;
    for (const auto& [value, count] : freq) best_count = std::max(best_count, count);
    // Tie-break: the candidate whose first appearance is earliest.
    for (const auto& a : attempts)
        if (a.parsed && freq[a.parsed->value] == best_count) return a.parsed;
    return std::nullopt;  // unreachable
}

namespace {

struct AttemptTask {
    int item_index = 0;
    std::uint64_t seed = 0;
};

RetrievalAttempt run_retrieval_attempt(Backend& backend, Session session, const TriggerSpec& spec,
                                       std::uint64_t seed,
                                       std::span<const templates::PromptTemplate> lib,
                                       int position) {
    RetrievalAttempt attempt;
    try {
        const auto seq = spec.combined_prefix(position - 1);
        const auto& tpl = templates::pick(templates::Kind::test_verify, seed, lib);
        const auto prompt = templates::render(tpl, {.seq = seq, .item_position = position});
        attempt.template_id = prompt.template_id;
        attempt.raw_reply = backend.send(session, prompt.text);
        attempt.parsed = parse_prediction(attempt.raw_reply, seq, spec.derivation.max_item());
    } catch (const TransportError&) {
        // A failed attempt stays in the record as parse-absent; r never shrinks.
        attempt.parsed = std::nullopt;
    }
    return attempt;
}

void finalize_record(RetrievalRecord& rec) {
    rec.mode = mode_of(rec.attempts);
    rec.mode_hit = rec.mode && *rec.mode == rec.target;
    for (const int k : {1, 3, 5}) {
        bool hit = false;
        const std::size_t upto = std::min<std::size_t>(static_cast<std::size_t>(k),
                                                       rec.attempts.size());
        for (std::size_t j = 0; j < upto && !hit; ++j)
            hit = rec.attempts[j].parsed && *rec.attempts[j].parsed == rec.target;
        rec.topk_hit[k] = hit;
    }
}

std::vector<RetrievalRecord> run_retrieval_tasks(Backend& backend, const TriggerSpec& spec,
                                                 const RetrievalPlan& plan,
                                                 std::span<const int> item_indices) {
    if (plan.r < 1) throw ValidationError("r must be >= 1");
    for (const int item : item_indices)
        if (item < 1 || item > spec.n()) throw ValidationError("trigger item index out of range");
    const std::span<const templates::PromptTemplate> lib =
        plan.library ? std::span(*plan.library)
                     : std::span<const templates::PromptTemplate>(templates::library());

    std::vector<AttemptTask> tasks;
    std::vector<Session> sessions;
    tasks.reserve(item_indices.size() * static_cast<std::size_t>(plan.r));
    // Serial session creation in (item, attempt) order keeps ids and the
    // per-session PRNG streams replayable under any jobs setting.
    for (const int item : item_indices) {
        for (int j = 1; j <= plan.r; ++j) {
            tasks.push_back({item, mix_seed({plan.rng_seed, 0x2b7dull,
                                             static_cast<std::uint64_t>(item),
                                             static_cast<std::uint64_t>(j)})});
            sessions.push_back(backend.new_session());
        }
    }

    std::vector<RetrievalAttempt> attempts(tasks.size());
    parallel_for(tasks.size(), plan.jobs, [&](std::size_t k) {
        const int position = spec.m() + tasks[k].item_index;
        attempts[k] = run_retrieval_attempt(backend, std::move(sessions[k]), spec, tasks[k].seed,
                                            lib, position);
    });

    std::vector<RetrievalRecord> records;
    records.reserve(item_indices.size());
    std::size_t k = 0;
    for (const int item : item_indices) {
        RetrievalRecord rec;
        rec.item_index = item;
        rec.item_position = spec.m() + item;
        rec.target = spec.combined(rec.item_position);
        for (int j = 0; j < plan.r; ++j) rec.attempts.push_back(std::move(attempts[k++]));
        finalize_record(rec);
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace

RetrievalRecord retrieve_item(Backend& backend, const TriggerSpec& spec,
                              const RetrievalPlan& plan, int item_index) {
    const int items[] = {item_index};
    return run_retrieval_tasks(backend, spec, plan, items).front();
}

RetrievalReport retrieve_all(Backend& backend, const TriggerSpec& spec,
                             const RetrievalPlan& plan) {
    std::vector<int> items(static_cast<std::size_t>(spec.n()));
    for (int i = 0; i < spec.n(); ++i) items[static_cast<std::size_t>(i)] = i + 1;

    RetrievalReport report;
    report.records = run_retrieval_tasks(backend, spec, plan, items);
    report.r = plan.r;
    report.threshold = plan.threshold;
    report.value_space = spec.derivation.value_space();
    for (const auto& rec : report.records)
        if (rec.mode_hit) ++report.matched_count;
    report.similarity = static_cast<double>(report.matched_count) / spec.n();
    report.verdict = report.matched_count >= plan.threshold;
    report.p_value = null_pvalue(report.matched_count, spec.n(), plan.r,
                                 1.0 / static_cast<double>(report.value_space));
    report.source_hex = derive_pseudorandom(
        spec.seed.seed_bytes,
        static_cast<std::size_t>(spec.n()) * static_cast<std::size_t>(spec.derivation.item_hex_digits),
        spec.derivation.algorithm);
    return report;
}

double null_pvalue(int matched_count, int n, int r, double per_attempt_p) {
    if (matched_count < 0 || matched_count > n) throw ValidationError("matched_count out of range");
    if (per_attempt_p <= 0.0 || per_attempt_p >= 1.0)
        throw ValidationError("per_attempt_p must be in (0, 1)");
    if (r < 1 || n < 1) throw ValidationError("n and r must be >= 1");
    if (matched_count == 0) return 1.0;

    // Item-level hit probability: at least one of r attempts matches.
    const double q = 1.0 - std::pow(1.0 - per_attempt_p, r);
    // Binomial tail P(X >= matched_count), X ~ Bin(n, q).
    double tail = 0.0;
    double coeff = 1.0;  // C(n, k), updated incrementally
    for (int k = 0; k <= n; ++k) {
        if (k >= matched_count)
            tail += coeff * std::pow(q, k) * std::pow(1.0 - q, n - k);
        coeff = coeff * (n - k) / (k + 1);
    }
    return std::min(tail, 1.0);
}

double hint_prior(int m, std::uint64_t value_space) {
    if (m < 1) throw ValidationError("m must be >= 1");
    if (value_space < 2) throw ValidationError("value_space must be >= 2");
    double prior = 1.0;
    for (int i = 0; i < m; ++i) prior /= static_cast<double>(value_space);
    return prior;
}

TopkRow topk_row(const std::string& config_label, const RetrievalReport& report) {
    TopkRow row;
    row.config = config_label;
    row.top5_available = report.r >= 5;
    for (const auto& rec : report.records) {
        if (rec.topk_hit.at(1)) ++row.top1;
        if (rec.topk_hit.at(3)) ++row.top3;
        if (rec.topk_hit.at(5)) ++row.top5;
        if (rec.mode_hit) ++row.mode;
    }
    return row;
}

std::string render_topk_table(std::span<const TopkRow> rows) {
    std::size_t label_width = std::string("config").size();
    for (const auto& row : rows) label_width = std::max(label_width, row.config.size());

    std::ostringstream out;
    out << std::left;
    out.width(static_cast<std::streamsize>(label_width));
    out << "config";
    out << "  top-1  top-3  top-5  mode\n";
    for (const auto& row : rows) {
        out.width(static_cast<std::streamsize>(label_width));
        out << row.config;
        auto cell = [&](int v) {
            std::string s = std::to_string(v);
            out << "  ";
            out.width(5);
            out << s;
        };
        cell(row.top1);
        cell(row.top3);
        if (row.top5_available)
            cell(row.top5);
        else {
            out << "  ";
            out.width(5);
            out << "-";
        }
        out << "  " << row.mode << "\n";
    }
    return out.str();
}

std::string topk_table_json(std::span<const TopkRow> rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json rj;
        rj["config"] = row.config;
        rj["top1"] = row.top1;
        rj["top3"] = row.top3;
        if (row.top5_available)
            rj["top5"] = row.top5;
        else
            rj["top5"] = nullptr;
        rj["mode"] = row.mode;
        j.push_back(std::move(rj));
    }
    return j.dump();
}

std::string report_to_json(const RetrievalReport& report) {
    nlohmann::json j;
    j["schema"] = 1;
    j["matched_count"] = report.matched_count;
    j["similarity"] = report.similarity;
    j["verdict"] = report.verdict;
    j["p_value"] = report.p_value;
    j["threshold"] = report.threshold;
    j["r"] = report.r;
    j["value_space"] = report.value_space;
    j["source_hex"] = report.source_hex;
    auto& records = j["records"] = nlohmann::json::array();
    for (const auto& rec : report.records) {
        nlohmann::json rj;
        rj["item_index"] = rec.item_index;
        rj["item_position"] = rec.item_position;
        rj["target"] = rec.target.value;
        if (rec.mode)
            rj["mode"] = rec.mode->value;
        else
            rj["mode"] = nullptr;
        rj["mode_hit"] = rec.mode_hit;
        nlohmann::json tk;
        for (const auto& [k, hit] : rec.topk_hit) tk[std::to_string(k)] = hit;
        rj["topk_hit"] = std::move(tk);
        auto& attempts = rj["attempts"] = nlohmann::json::array();
        for (const auto& a : rec.attempts) {
            nlohmann::json aj;
            aj["template_id"] = a.template_id;
            aj["reply"] = a.raw_reply;
            if (a.parsed)
                aj["parsed"] = a.parsed->value;
            else
                aj["parsed"] = nullptr;
            attempts.push_back(std::move(aj));
        }
        records.push_back(std::move(rj));
    }
    return j.dump();
}

RetrievalReport report_from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("report parse: ") + e.what());
    }
    try {
        RetrievalReport report;
        if (j.at("schema").get<int>() != 1) throw ValidationError("unknown report schema");
        report.matched_count = j.at("matched_count").get<int>();
        report.similarity = j.at("similarity").get<double>();
        report.verdict = j.at("verdict").get<bool>();
        report.p_value = j.at("p_value").get<double>();
        report.threshold = j.at("threshold").get<int>();
        report.r = j.at("r").get<int>();
        report.value_space = j.at("value_space").get<std::uint64_t>();
        report.source_hex = j.at("source_hex").get<std::string>();
        for (const auto& rj : j.at("records")) {
            RetrievalRecord rec;
            rec.item_index = rj.at("item_index").get<int>();
            rec.item_position = rj.at("item_position").get<int>();
            rec.target = {rj.at("target").get<std::uint64_t>()};
            if (!rj.at("mode").is_null()) rec.mode = SequenceItem{rj["mode"].get<std::uint64_t>()};
            rec.mode_hit = rj.at("mode_hit").get<bool>();
            for (const auto& [k, hit] : rj.at("topk_hit").items())
                rec.topk_hit[std::stoi(k)] = hit.get<bool>();
            for (const auto& aj : rj.at("attempts")) {
                RetrievalAttempt a;
                a.template_id = aj.at("template_id").get<int>();
                a.raw_reply = aj.at("reply").get<std::string>();
                if (!aj.at("parsed").is_null())
                    a.parsed = SequenceItem{aj["parsed"].get<std::uint64_t>()};
                rec.attempts.push_back(std::move(a));
            }
            report.records.push_back(std::move(rec));
        }
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("report fields: ") + e.what());
    }
}

}  // namespace dyetest
