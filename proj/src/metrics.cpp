#include "owd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace owd {

namespace {

void check_pair(const std::vector<ClusterId>& pred, const std::vector<std::int64_t>& truth) {
    if (pred.size() != truth.size()) raise(Errc::length_mismatch, "pred and truth lengths differ");
    if (pred.empty()) raise(Errc::empty_partition, "no samples to evaluate");
    for (const auto v : pred)
        if (v == kNotClustered)
            raise(Errc::empty_partition, "prediction contains NOT_CLUSTERED entries");
}

// cluster id -> (class id -> count)
std::map<ClusterId, std::map<std::int64_t, std::int64_t>> contingency(
    const std::vector<ClusterId>& pred, const std::vector<std::int64_t>& truth) {
    std::map<ClusterId, std::map<std::int64_t, std::int64_t>> table;
    for (std::size_t i = 0; i < pred.size(); ++i) ++table[pred[i]][truth[i]];
    return table;
}

// summing in sorted order makes the result exactly invariant to cluster
// relabeling and sample reordering (same multiset of terms, same sum)
double stable_sum(std::vector<double> terms) {
    std::sort(terms.begin(), terms.end());
    double acc = 0;
    for (const auto t : terms) acc += t;
    return acc;
}

}  // namespace

double average_purity(const std::vector<ClusterId>& pred, const std::vector<std::int64_t>& truth,
                      PurityMode mode) {
    check_pair(pred, truth);
    const auto table = contingency(pred, truth);
    std::vector<double> fractions;
    std::int64_t majority_total = 0;
    for (const auto& [cluster, classes] : table) {
        std::int64_t size = 0, majority = 0;
        for (const auto& [cls, count] : classes) {
            size += count;
            majority = std::max(majority, count);
        }
        fractions.push_back(static_cast<double>(majority) / static_cast<double>(size));
        majority_total += majority;
    }
    if (mode == PurityMode::cluster_mean)
        return stable_sum(std::move(fractions)) / static_cast<double>(table.size());
    return static_cast<double>(majority_total) / static_cast<double>(pred.size());
}

double nmi(const std::vector<ClusterId>& pred, const std::vector<std::int64_t>& truth) {
    check_pair(pred, truth);
    const double n = static_cast<double>(pred.size());
    const auto table = contingency(pred, truth);

    std::map<ClusterId, std::int64_t> pred_sizes;
    std::map<std::int64_t, std::int64_t> truth_sizes;
    for (const auto& [cluster, classes] : table)
        for (const auto& [cls, count] : classes) {
            pred_sizes[cluster] += count;
            truth_sizes[cls] += count;
        }

    std::vector<double> h_pred_terms, h_truth_terms, mi_terms;
    for (const auto& [cluster, size] : pred_sizes) {
        const double p = static_cast<double>(size) / n;
        h_pred_terms.push_back(-p * std::log(p));
    }
    for (const auto& [cls, size] : truth_sizes) {
        const double p = static_cast<double>(size) / n;
        h_truth_terms.push_back(-p * std::log(p));
    }
    for (const auto& [cluster, classes] : table)
        for (const auto& [cls, count] : classes) {
            const double pij = static_cast<double>(count) / n;
            const double pi = static_cast<double>(pred_sizes[cluster]) / n;
            const double pj = static_cast<double>(truth_sizes[cls]) / n;
            mi_terms.push_back(pij * std::log(pij / (pi * pj)));
        }
    const double h_pred = stable_sum(std::move(h_pred_terms));
    const double h_truth = stable_sum(std::move(h_truth_terms));
    const double mi = stable_sum(std::move(mi_terms));

    const double mean_h = 0.5 * (h_pred + h_truth);
    if (mean_h == 0.0) return 1.0;  // both partitions are a single identical cluster
    const double value = mi / mean_h;
    return std::clamp(value, 0.0, 1.0);
}

SourcesDiscovered sources_discovered(const std::vector<ClusterId>& pred,
                                     const std::vector<std::int64_t>& truth) {
    check_pair(pred, truth);
    std::int64_t max_label = 0;
    for (const auto t : truth) {
        if (t < 0) raise(Errc::invalid_param, "truth labels must be non-negative");
        max_label = std::max(max_label, t);
    }
    SourcesDiscovered out;
    out.discovered.assign(static_cast<std::size_t>(max_label) + 1, 0);
    const auto table = contingency(pred, truth);
    for (const auto& [cluster, classes] : table) {
        std::int64_t best_class = -1, best_count = 0;
        for (const auto& [cls, count] : classes) {
            if (count > best_count) {  // map iteration is ascending, ties keep the lowest id
                best_count = count;
                best_class = cls;
            }
        }
        out.discovered[static_cast<std::size_t>(best_class)] = 1;
    }
    for (const auto f : out.discovered) out.count += f;
    return out;
}

Partition attribute_leftovers(const FeatureMatrix& features, const HashCodeMatrix& codes,
                              const Partition& p, const WtaHasher& hasher) {
    if (p.cluster_ids().empty()) raise(Errc::no_clusters, "no clusters to attribute into");
    Partition out = p;
    const auto leftovers = p.unclustered();
    if (leftovers.empty()) return out;

    const auto cs = centroids(features, p);
    const auto centroid_codes = hash_batch(hasher, cs.centroids);
    require_compatible(centroid_codes, codes);
    for (const auto i : leftovers) {
        std::int64_t best = 0;
        std::int64_t best_d = hamming(codes, i, centroid_codes, 0);
        for (std::int64_t c = 1; c < centroid_codes.n; ++c) {
            const auto d = hamming(codes, i, centroid_codes, c);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        out.labels[static_cast<std::size_t>(i)] = cs.ids[static_cast<std::size_t>(best)];
    }
    return out;
}

RealFakeVote real_fake_vote(const Partition& p, const std::vector<std::uint8_t>& sample_fake,
                            const std::vector<std::uint8_t>* truth) {
    if (sample_fake.size() != p.labels.size())
        raise(Errc::length_mismatch, "predictions length != partition length");
    for (const auto l : p.labels)
        if (l == kNotClustered)
            raise(Errc::empty_cluster, "partition must be fully clustered; attribute leftovers first");

    RealFakeVote out;
    out.cluster_ids = p.cluster_ids();
    out.cluster_fake.resize(out.cluster_ids.size());
    std::unordered_map<ClusterId, std::size_t> pos;
    for (std::size_t c = 0; c < out.cluster_ids.size(); ++c) pos[out.cluster_ids[c]] = c;

    std::vector<std::int64_t> fake_votes(out.cluster_ids.size(), 0);
    std::vector<std::int64_t> sizes(out.cluster_ids.size(), 0);
    for (std::size_t i = 0; i < p.labels.size(); ++i) {
        const auto c = pos[p.labels[i]];
        ++sizes[c];
        fake_votes[c] += sample_fake[i] ? 1 : 0;
    }
    for (std::size_t c = 0; c < out.cluster_ids.size(); ++c)
        out.cluster_fake[c] = 2 * fake_votes[c] >= sizes[c];  // tie votes fake

    out.corrected.resize(p.labels.size());
    for (std::size_t i = 0; i < p.labels.size(); ++i)
        out.corrected[i] = out.cluster_fake[pos[p.labels[i]]];

    if (truth) {
        if (truth->size() != p.labels.size())
            raise(Errc::length_mismatch, "truth length != partition length");
        std::int64_t correct = 0;
        for (std::size_t i = 0; i < p.labels.size(); ++i)
            correct += (out.corrected[i] == (*truth)[i]);
        out.accuracy = static_cast<double>(correct) / static_cast<double>(p.labels.size());
    }
    return out;
}

EvalReport evaluate(const Partition& p, const std::vector<std::int64_t>& truth) {
    if (truth.size() != p.labels.size()) raise(Errc::length_mismatch, "truth length != partition");
    EvalReport r;
    std::int64_t max_label = 0;
    for (const auto t : truth) max_label = std::max(max_label, t);
    r.sources_total = max_label + 1;
    r.n_clusters = static_cast<std::int64_t>(p.cluster_ids().size());
    r.pct_clustered = p.labels.empty() ? 0.0
                                       : static_cast<double>(p.clustered_count()) /
                                             static_cast<double>(p.labels.size());

    std::vector<ClusterId> pred;
    std::vector<std::int64_t> tr;
    for (std::size_t i = 0; i < p.labels.size(); ++i) {
        if (p.labels[i] == kNotClustered) continue;
        pred.push_back(p.labels[i]);
        tr.push_back(truth[i]);
    }
    if (!pred.empty()) {
        r.purity_cluster_mean = average_purity(pred, tr, PurityMode::cluster_mean);
        r.purity_sample_weighted = average_purity(pred, tr, PurityMode::sample_weighted);
        r.nmi = nmi(pred, tr);
        r.sources_discovered = sources_discovered(pred, tr).count;
    }
    return r;
}

}  // namespace owd
