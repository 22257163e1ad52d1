#include "owd/pipeline.hpp"

#include <algorithm>
#include <unordered_map>

#include "owd/kmeans.hpp"
#include "owd/merge.hpp"
#include "owd/ood.hpp"
#include "owd/parallel.hpp"
#include "owd/refine.hpp"

namespace owd {

namespace {

// rng substreams per stage; iteration index keeps draws independent
enum Stream : std::uint64_t {
    kHasherStream = 1,
    kNetInitStream = 2,
    kTrainStream = 100,
    kOodStream = 200,
    kKmeansStream = 300,
    kRefineStream = 400,
    kHeadStream = 500,
};

Rng stage_rng(const PipelineConfig& cfg, std::uint64_t stream, std::int64_t iteration) {
    return Rng(cfg.run.seed, stream + 1000 * static_cast<std::uint64_t>(iteration));
}

struct ClassMap {
    std::int64_t n_seen = 0;
    std::vector<ClusterId> clusters;  // live ids >= n_seen, ascending

    std::int64_t head_size() const {
        return n_seen + static_cast<std::int64_t>(clusters.size());
    }
    std::int64_t head_index_of(ClusterId id) const {
        if (id < n_seen) return id;
        const auto it = std::lower_bound(clusters.begin(), clusters.end(), id);
        return n_seen + (it - clusters.begin());
    }
    ClusterId class_of_head(std::int64_t h) const {
        return h < n_seen ? h : clusters[static_cast<std::size_t>(h - n_seen)];
    }
};

ClassMap class_map(const PipelineState& state) {
    ClassMap m;
    m.n_seen = state.n_seen;
    m.clusters = state.live_clusters();
    return m;
}

RefineParams refine_params(const PipelineConfig& cfg) {
    RefineParams p;
    p.epsilon = cfg.refine.epsilon;
    p.tau = cfg.refine.tau;
    p.negatives_ratio = cfg.refine.negatives_ratio;
    p.svm.c = cfg.refine.svm_c;
    p.svm.gamma = cfg.refine.svm_gamma;
    p.svm.tol = cfg.refine.svm_tol;
    p.svm.max_passes = cfg.refine.svm_max_passes;
    return p;
}

TrainConfig train_config(const PipelineConfig& cfg, bool first, std::uint64_t seed) {
    TrainConfig t;
    t.lr = cfg.trainer.lr;
    t.beta1 = cfg.trainer.beta1;
    t.beta2 = cfg.trainer.beta2;
    t.batch = cfg.trainer.batch;
    t.epochs = first ? cfg.trainer.epochs_first : cfg.trainer.epochs_later;
    t.dropout = cfg.trainer.dropout;
    t.seed = seed;
    return t;
}

void refresh_features(PipelineState& state) {
    state.refined = extract_features(state.net, state.discovery);
    state.codes = hash_batch(state.hasher, state.refined);
}

// Overclusters the unclustered samples, then runs merge + refine rounds
// over the whole clustered set. Shared tail of iteration 1 and later ones.
void cluster_merge_refine(PipelineState& state, const PipelineConfig& cfg) {
    const auto it = state.iteration;  // iteration being computed (0-based here)

    std::vector<ClusterId> new_ids;
    const auto unclustered = state.partition.unclustered();
    if (!unclustered.empty()) {
        const auto k = std::min<std::int64_t>(cfg.kmeans.k,
                                              static_cast<std::int64_t>(unclustered.size()));
        auto km_rng = stage_rng(cfg, kKmeansStream, it);
        const auto subset = state.refined.gather(unclustered);
        const auto km = kmeans(subset, k, cfg.kmeans.max_iter, cfg.kmeans.tol, km_rng);

        std::unordered_map<std::int64_t, ClusterId> cluster_of;
        for (std::size_t local = 0; local < unclustered.size(); ++local) {
            const auto c = km.assignment[local];
            auto itc = cluster_of.find(c);
            if (itc == cluster_of.end()) {
                itc = cluster_of.emplace(c, state.partition.fresh_label()).first;
                new_ids.push_back(itc->second);
            }
            state.partition.labels[static_cast<std::size_t>(unclustered[local])] = itc->second;
        }
        std::sort(new_ids.begin(), new_ids.end());
    }
    // nothing freshly clustered: the merge + refine stages have no work and
    // the iteration is a fixed point apart from the retrained weights
    if (new_ids.empty()) return;

    for (std::int32_t round = 0; round < cfg.merge.rounds; ++round) {
        const auto& subset = round == 0 ? new_ids : state.partition.cluster_ids();
        if (round == 0) {
            state.partition = two_stage_merge(state.refined, state.partition, subset, state.hasher,
                                              cfg.merge.components);
        } else {
            state.partition = merge_pass(state.refined, state.partition, subset, state.hasher,
                                         cfg.merge.components);
        }
        if (state.partition.cluster_ids().size() >= 2) {
            auto result = refine(state.refined, state.partition, refine_params(cfg),
                                 stage_rng(cfg, kRefineStream, it).fork(static_cast<std::uint64_t>(round)));
            state.partition = std::move(result.partition);
        }
    }
}

void record_stats(PipelineState& state, const PipelineConfig& cfg,
                  const std::vector<double>& loss_history,
                  const std::vector<std::int64_t>* truth, bool injected) {
    IterationStats s;
    s.iteration = state.iteration;
    s.n_clusters = static_cast<std::int64_t>(state.partition.cluster_ids().size());
    s.clustered = state.partition.clustered_count();
    s.total = state.discovery.n;
    s.injected = injected;
    if (!loss_history.empty()) {
        s.first_epoch_loss = loss_history.front();
        s.last_epoch_loss = loss_history.back();
    }
    if (truth && state.discovery.n > 0) {
        s.metrics_discovered = evaluate(state.partition, *truth);
        if (s.n_clusters > 0) {
            const auto full = attribute_leftovers(state.refined, state.codes, state.partition,
                                                  state.hasher);
            s.metrics_all = evaluate(full, *truth);
        }
    }
    state.history.push_back(std::move(s));
    (void)cfg;
}

}  // namespace

std::vector<ClusterId> PipelineState::live_clusters() const {
    std::vector<ClusterId> out;
    for (const auto id : partition.cluster_ids())
        if (id >= n_seen) out.push_back(id);
    return out;
}

PipelineState init_state(const LabeledSet& labeled, const FeatureMatrix& discovery,
                         const PipelineConfig& cfg) {
    validate(labeled);
    validate(discovery);
    if (labeled.features.n == 0) raise(Errc::empty_labeled_set, "labeled set is empty");
    if (labeled.n_classes < 2) raise(Errc::invalid_param, "need at least 2 seen classes");
    if (discovery.n > 0 && discovery.d != labeled.features.d)
        raise(Errc::dimension_mismatch, "labeled and discovery dimensions differ");

    PipelineState state;
    state.labeled = labeled;
    state.discovery = discovery;
    state.n_seen = labeled.n_classes;
    state.hasher = new_hasher(Network::kFeatureDim, cfg.wta.hashes, cfg.wta.window,
                              Rng(cfg.run.seed, kHasherStream).next_u64());

    auto net_rng = stage_rng(cfg, kNetInitStream, 0);
    state.net = init_network(labeled.features.d, static_cast<std::int32_t>(state.n_seen), net_rng);
    const auto loss = train(state.net, labeled.features, labeled.labels, FeatureMatrix(0, labeled.features.d),
                            {}, train_config(cfg, true, Rng(cfg.run.seed, kTrainStream).next_u64()));

    state.partition = Partition(discovery.n);
    state.partition.next_label = state.n_seen;
    refresh_features(state);

    if (discovery.n > 0) {
        // per-seen-class detectors from the labeled set's refined features
        const auto labeled_refined = extract_features(state.net, labeled.features);
        Partition by_class(labeled.features.n);
        by_class.labels.assign(labeled.labels.begin(), labeled.labels.end());
        by_class.next_label = state.n_seen;
        const double seen_beta = cfg.ood.seen_beta.value_or(cfg.ood.beta);

        SplitResult sr;
        if (cfg.ood.distance == OodDistance::wta_hamming) {
            const auto labeled_codes = hash_batch(state.hasher, labeled_refined);
            const auto detectors = build_detectors(labeled_codes, by_class, seen_beta, cfg.ood.cap,
                                                   stage_rng(cfg, kOodStream, 0));
            sr = split(detectors, state.codes);
        } else {
            const auto detectors = build_detectors_cosine(labeled_refined, by_class, seen_beta,
                                                          cfg.ood.cap, stage_rng(cfg, kOodStream, 0));
            sr = split(detectors, state.refined);
        }
        if (!sr.in_distribution.empty()) {
            const auto accepted = state.discovery.gather(sr.in_distribution);
            const auto cls = classify_batch(state.net, accepted);
            for (std::size_t i = 0; i < sr.in_distribution.size(); ++i)
                state.partition.labels[static_cast<std::size_t>(sr.in_distribution[i])] =
                    cls.labels[i];
        }
        cluster_merge_refine(state, cfg);
    }

    state.iteration = 1;
    record_stats(state, cfg, loss, nullptr, false);
    return state;
}

void run_iteration(PipelineState& state, const PipelineConfig& cfg) {
    const auto map = class_map(state);
    const bool injected = state.pending_injection;
    state.pending_injection = false;

    // (1) train on labeled + pseudo-labeled clustered samples
    auto head_rng = stage_rng(cfg, kHeadStream, state.iteration);
    state.net = rebuild_head(state.net, static_cast<std::int32_t>(map.head_size()), head_rng);

    std::vector<std::int64_t> clustered_rows;
    std::vector<std::int64_t> pseudo;
    for (std::size_t i = 0; i < state.partition.labels.size(); ++i) {
        const auto l = state.partition.labels[i];
        if (l == kNotClustered) continue;
        clustered_rows.push_back(static_cast<std::int64_t>(i));
        pseudo.push_back(map.head_index_of(l));
    }
    const auto clustered_x = state.discovery.gather(clustered_rows);
    const auto loss = train(state.net, state.labeled.features, state.labeled.labels, clustered_x,
                            pseudo, train_config(cfg, false,
                                                 Rng(cfg.run.seed, kTrainStream + static_cast<std::uint64_t>(state.iteration)).next_u64()));

    // (2) refreshed features, detectors over the clustered set, OOD split
    refresh_features(state);
    const auto unclustered = state.partition.unclustered();
    if (!unclustered.empty() && !state.partition.cluster_ids().empty()) {
        const auto detectors = (cfg.ood.distance == OodDistance::wta_hamming)
                                   ? build_detectors(state.codes, state.partition, cfg.ood.beta,
                                                     cfg.ood.cap, stage_rng(cfg, kOodStream, state.iteration))
                                   : build_detectors_cosine(state.refined, state.partition,
                                                            cfg.ood.beta, cfg.ood.cap,
                                                            stage_rng(cfg, kOodStream, state.iteration));
        SplitResult sr;
        if (cfg.ood.distance == OodDistance::wta_hamming) {
            const auto query_codes = state.codes.gather(unclustered);
            sr = split(detectors, query_codes);
        } else {
            const auto query_feats = state.refined.gather(unclustered);
            sr = split(detectors, query_feats);
        }
        if (!sr.in_distribution.empty()) {
            std::vector<std::int64_t> rows(sr.in_distribution.size());
            for (std::size_t i = 0; i < rows.size(); ++i)
                rows[i] = unclustered[static_cast<std::size_t>(sr.in_distribution[i])];
            const auto accepted = state.discovery.gather(rows);
            const auto cls = classify_batch(state.net, accepted);
            for (std::size_t i = 0; i < rows.size(); ++i)
                state.partition.labels[static_cast<std::size_t>(rows[i])] =
                    map.class_of_head(cls.labels[i]);
        }
    }

    // (3) + (4) overcluster what is left, then merge + refine
    cluster_merge_refine(state, cfg);

    state.iteration += 1;
    record_stats(state, cfg, loss, nullptr, injected);
}

void online_add(PipelineState& state, const FeatureMatrix& new_samples, const PipelineConfig& cfg) {
    validate(new_samples);
    if (new_samples.n == 0) return;
    if (new_samples.d != state.labeled.features.d)
        raise(Errc::dimension_mismatch, "injected samples have the wrong dimension");

    state.discovery.data.insert(state.discovery.data.end(), new_samples.data.begin(),
                                new_samples.data.end());
    state.discovery.n += new_samples.n;
    state.partition.labels.resize(static_cast<std::size_t>(state.discovery.n), kNotClustered);

    const auto new_refined = extract_features(state.net, new_samples);
    state.refined.data.insert(state.refined.data.end(), new_refined.data.begin(),
                              new_refined.data.end());
    state.refined.n += new_refined.n;
    const auto new_codes = hash_batch(state.hasher, new_refined);
    state.codes.words.insert(state.codes.words.end(), new_codes.words.begin(),
                             new_codes.words.end());
    state.codes.n += new_codes.n;

    state.pending_injection = true;
    (void)cfg;
}

PipelineState run(const LabeledSet& labeled, const FeatureMatrix& discovery,
                  const PipelineConfig& cfg, const std::vector<std::int64_t>* truth,
                  const std::function<void(const PipelineState&)>& on_iteration) {
    set_workers(cfg.run.workers);

    auto evaluate_last = [&](PipelineState& state) {
        if (!truth) return;
        if (static_cast<std::int64_t>(truth->size()) != state.discovery.n)
            raise(Errc::length_mismatch, "truth labels != discovery rows");
        auto& s = state.history.back();
        s.metrics_discovered = evaluate(state.partition, *truth);
        if (s.n_clusters > 0) {
            const auto full =
                attribute_leftovers(state.refined, state.codes, state.partition, state.hasher);
            s.metrics_all = evaluate(full, *truth);
        }
    };

    PipelineState state = init_state(labeled, discovery, cfg);
    evaluate_last(state);
    if (on_iteration) on_iteration(state);

    while (state.iteration < cfg.stop.max_iterations) {
        if (state.discovery.n == 0) break;
        const double undiscovered_fraction =
            static_cast<double>(state.undiscovered()) / static_cast<double>(state.discovery.n);
        if (undiscovered_fraction < cfg.stop.delta) break;
        run_iteration(state, cfg);
        evaluate_last(state);
        if (on_iteration) on_iteration(state);
    }
    return state;
}

}  // namespace owd
