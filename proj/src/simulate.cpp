#include "dyetest/simulate.hpp"

#include "dyetest/errors.hpp"
#include "dyetest/util.hpp"

namespace dyetest {

std::map<std::string, std::uint64_t> memorize_dataset(std::span<const TripletSample> dataset,
                                                      std::uint64_t max_item) {
    std::map<std::string, std::uint64_t> memorized;
    for (const auto& sample : dataset) {
        const auto context = scan_numbers(sample.instruction);
        std::vector<SequenceItem> items;
        items.reserve(context.size());
        for (const auto v : context) items.push_back({v});
        const auto learned = parse_prediction(sample.output, items, max_item);
        if (!context.empty() && learned) memorized[context_key(context)] = learned->value;
    }
    return memorized;
}

SimulateResult simulate_run(const SimulateOptions& o) {
    if (o.recall_prob < 0.0 || o.recall_prob > 1.0)
        throw ValidationError("recall_prob must be in [0, 1]");

    SimulateResult result;
    result.spec = make_trigger_spec(o.seed, o.m, o.n, o.item_hex_digits, o.algorithm);

    // The vendor before any fine-tune: nothing memorized, but an attentive
    // conversation partner within a session.
    BackendProfile pre;
    pre.kind = BackendProfile::Kind::simulated;
    pre.model_name = "pre-finetune-sim";
    pre.sim.recall_prob = 0.0;
    pre.sim.null_behavior = o.null_behavior;
    pre.sim.rng_seed = mix_seed({o.rng_seed, 0xbef0ull});
    pre.sim.value_space = result.spec.derivation.value_space();
    auto pre_backend = make_backend(pre);

    InsertionPlan plan;
    plan.p = o.p;
    plan.q = o.q;
    plan.rng_seed = mix_seed({o.rng_seed, 0x1ull});
    plan.jobs = o.jobs;
    plan.library = o.library;
    plan.reasons = o.reasons;
    result.transcripts = insert_all(*pre_backend, result.spec, plan);

    result.dataset = to_triplets(result.transcripts);

    BackendProfile post = pre;
    post.model_name = "post-finetune-sim";
    post.sim.recall_prob = o.recall_prob;
    post.sim.rng_seed = mix_seed({o.rng_seed, 0xf1ull});
    post.sim.memorized = memorize_dataset(result.dataset, result.spec.derivation.max_item());
    auto post_backend = make_backend(post);

    RetrievalPlan rplan;
    rplan.r = o.r;
    rplan.threshold = o.threshold;
    rplan.rng_seed = mix_seed({o.rng_seed, 0x2ull});
    rplan.jobs = o.jobs;
    rplan.library = o.library;
    result.report = retrieve_all(*post_backend, result.spec, rplan);
    return result;
}

SimulateOptions simulate_options_from_config(const RunConfig& c) {
    SimulateOptions o;
    o.seed = resolve_seed(c);
    o.m = c.m;
    o.n = c.n;
    o.item_hex_digits = c.item_hex_digits;
    o.algorithm = c.algorithm;
    o.p = c.p;
    o.q = c.q;
    o.r = c.r;
    o.threshold = c.threshold;
    o.recall_prob = c.recall_prob;
    o.null_behavior = c.backend.sim.null_behavior;
    o.rng_seed = c.rng_seed;
    o.jobs = c.jobs;
    return o;
}

}  // namespace dyetest
