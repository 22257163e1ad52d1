#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "owd/config.hpp"
#include "owd/core.hpp"
#include "owd/metrics.hpp"
#include "owd/network.hpp"
#include "owd/wta.hpp"

namespace owd {

struct IterationStats {
    std::int32_t iteration = 0;
    std::int64_t n_clusters = 0;
    std::int64_t clustered = 0;
    std::int64_t total = 0;
    bool injected = false;  // online samples arrived before this iteration
    double first_epoch_loss = 0.0;
    double last_epoch_loss = 0.0;
    std::optional<EvalReport> metrics_discovered;  // clustered samples only
    std::optional<EvalReport> metrics_all;         // after nearest-cluster attribution
};

// Discovery-set bookkeeping across iterations. Partition ids below n_seen
// mean "attributed to that seen class"; ids from n_seen up are discovered
// clusters. The head has one output per seen class plus one per live
// cluster, mapped through head_index_of / class_of_head.
struct PipelineState {
    LabeledSet labeled;       // base features, class ids [0, n_seen)
    FeatureMatrix discovery;  // base features; grows in online mode
    FeatureMatrix refined;    // current 128-dim features of the discovery set
    HashCodeMatrix codes;     // hashes of refined
    Partition partition;      // over discovery rows
    Network net;
    WtaHasher hasher;  // fixed per run
    std::int64_t n_seen = 0;
    std::int32_t iteration = 0;  // completed iterations
    bool pending_injection = false;
    std::vector<IterationStats> history;

    std::vector<ClusterId> live_clusters() const;  // ids >= n_seen, ascending
    std::int64_t undiscovered() const { return discovery.n - partition.clustered_count(); }
};

// Iteration 1: train on the labeled set alone, split the discovery set with
// per-seen-class detectors, classify accepted samples, then overcluster,
// merge and refine the rest.
PipelineState init_state(const LabeledSet& labeled, const FeatureMatrix& discovery,
                         const PipelineConfig& cfg);

// One full iteration: retrain on labeled + pseudo-labeled data, re-extract
// features and codes, OOD-split the unclustered samples, classify accepted
// ones, overcluster the rest, then merge + refine rounds.
void run_iteration(PipelineState& state, const PipelineConfig& cfg);

// Appends new discovery samples as NOT_CLUSTERED; they flow through the
// next iteration. Zero rows is a no-op.
void online_add(PipelineState& state, const FeatureMatrix& new_samples, const PipelineConfig& cfg);

// init_state, then iterations until the undiscovered fraction drops below
// cfg.stop.delta or max_iterations is reached. `truth`, when given, fills
// per-iteration metrics; it never influences the algorithm. `on_iteration`
// runs after every completed iteration.
PipelineState run(const LabeledSet& labeled, const FeatureMatrix& discovery,
                  const PipelineConfig& cfg, const std::vector<std::int64_t>* truth = nullptr,
                  const std::function<void(const PipelineState&)>& on_iteration = {});

}  // namespace owd
