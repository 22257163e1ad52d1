#include "owd/merge.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "owd/parallel.hpp"

namespace owd {

CentroidSet centroids(const FeatureMatrix& x, const Partition& p) {
    if (static_cast<std::int64_t>(p.labels.size()) != x.n)
        raise(Errc::length_mismatch, "partition length != feature rows");
    CentroidSet cs;
    cs.ids = p.cluster_ids();
    if (cs.ids.empty()) raise(Errc::empty_cluster, "partition has no clusters");
    cs.centroids = FeatureMatrix(static_cast<std::int64_t>(cs.ids.size()), x.d);

    std::unordered_map<ClusterId, std::int64_t> pos;
    for (std::size_t i = 0; i < cs.ids.size(); ++i) pos[cs.ids[i]] = static_cast<std::int64_t>(i);
    std::vector<std::vector<double>> sums(cs.ids.size(), std::vector<double>(static_cast<std::size_t>(x.d), 0.0));
    std::vector<std::int64_t> counts(cs.ids.size(), 0);
    for (std::int64_t i = 0; i < x.n; ++i) {
        const auto l = p.labels[static_cast<std::size_t>(i)];
        if (l == kNotClustered) continue;
        const auto c = static_cast<std::size_t>(pos[l]);
        const auto row = x.row(i);
        for (std::int32_t j = 0; j < x.d; ++j) sums[c][static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j)];
        ++counts[c];
    }
    for (std::size_t c = 0; c < cs.ids.size(); ++c)
        for (std::int32_t j = 0; j < x.d; ++j)
            cs.centroids(static_cast<std::int64_t>(c), j) =
                static_cast<float>(sums[c][static_cast<std::size_t>(j)] / static_cast<double>(counts[c]));
    return cs;
}

NnGraph build_1nn_graph(const HashCodeMatrix& centroid_codes, const std::vector<ClusterId>& ids) {
    const auto n = centroid_codes.n;
    if (n < 2) raise(Errc::too_few_clusters, "1-NN graph needs at least 2 clusters");
    if (static_cast<std::int64_t>(ids.size()) != n)
        raise(Errc::length_mismatch, "id list length != centroid count");

    NnGraph g;
    g.node_ids = ids;
    g.successor.assign(static_cast<std::size_t>(n), 0);
    parallel_for(n, 16, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            std::int64_t best = -1;
            std::int64_t best_d = std::numeric_limits<std::int64_t>::max();
            for (std::int64_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const auto d = hamming(centroid_codes, i, centroid_codes, j);
                // ties to the smaller cluster id; js are visited in
                // ascending id order so strict < keeps the first
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            g.successor[static_cast<std::size_t>(i)] = best;
        }
    });
    return g;
}

std::vector<std::int64_t> strongly_connected_components(const std::vector<std::int64_t>& successor) {
    const auto n = static_cast<std::int64_t>(successor.size());
    std::vector<std::int64_t> comp(static_cast<std::size_t>(n), -1);
    std::vector<std::int64_t> index(static_cast<std::size_t>(n), -1);
    std::vector<std::int64_t> lowlink(static_cast<std::size_t>(n), 0);
    std::vector<std::uint8_t> on_stack(static_cast<std::size_t>(n), 0);
    std::vector<std::int64_t> stack;
    std::int64_t next_index = 0, next_comp = 0;

    // Tarjan, iterative. Out-degree is one, so each frame has a single edge
    // to consider and the explicit stack stays simple.
    struct Frame {
        std::int64_t v;
        bool edge_done;
    };
    std::vector<Frame> frames;
    for (std::int64_t root = 0; root < n; ++root) {
        if (index[static_cast<std::size_t>(root)] != -1) continue;
        frames.push_back({root, false});
        while (!frames.empty()) {
            auto& f = frames.back();
            const auto v = f.v;
            if (!f.edge_done) {
                index[static_cast<std::size_t>(v)] = lowlink[static_cast<std::size_t>(v)] = next_index++;
                stack.push_back(v);
                on_stack[static_cast<std::size_t>(v)] = 1;
                f.edge_done = true;
                const auto w = successor[static_cast<std::size_t>(v)];
                if (w >= 0) {
                    if (index[static_cast<std::size_t>(w)] == -1) {
                        frames.push_back({w, false});
                        continue;
                    }
                    if (on_stack[static_cast<std::size_t>(w)])
                        lowlink[static_cast<std::size_t>(v)] =
                            std::min(lowlink[static_cast<std::size_t>(v)], index[static_cast<std::size_t>(w)]);
                }
            } else {
                const auto w = successor[static_cast<std::size_t>(v)];
                if (w >= 0 && comp[static_cast<std::size_t>(w)] == -1)
                    lowlink[static_cast<std::size_t>(v)] =
                        std::min(lowlink[static_cast<std::size_t>(v)], lowlink[static_cast<std::size_t>(w)]);
            }
            if (lowlink[static_cast<std::size_t>(v)] == index[static_cast<std::size_t>(v)]) {
                for (;;) {
                    const auto w = stack.back();
                    stack.pop_back();
                    on_stack[static_cast<std::size_t>(w)] = 0;
                    comp[static_cast<std::size_t>(w)] = next_comp;
                    if (w == v) break;
                }
                ++next_comp;
            }
            frames.pop_back();
        }
    }
    return comp;
}

namespace {

std::vector<std::int64_t> weak_components(const std::vector<std::int64_t>& successor) {
    const auto n = static_cast<std::int64_t>(successor.size());
    std::vector<std::int64_t> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::int64_t(std::int64_t)> find = [&](std::int64_t v) {
        while (parent[static_cast<std::size_t>(v)] != v) {
            parent[static_cast<std::size_t>(v)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
            v = parent[static_cast<std::size_t>(v)];
        }
        return v;
    };
    for (std::int64_t v = 0; v < n; ++v) {
        const auto w = successor[static_cast<std::size_t>(v)];
        if (w < 0) continue;
        const auto rv = find(v), rw = find(w);
        if (rv != rw) parent[static_cast<std::size_t>(rv)] = rw;
    }
    std::vector<std::int64_t> comp(static_cast<std::size_t>(n), -1);
    std::int64_t next = 0;
    for (std::int64_t v = 0; v < n; ++v) {
        const auto r = find(v);
        if (comp[static_cast<std::size_t>(r)] == -1) comp[static_cast<std::size_t>(r)] = next++;
        comp[static_cast<std::size_t>(v)] = comp[static_cast<std::size_t>(r)];
    }
    return comp;
}

}  // namespace

Partition component_merge(const NnGraph& g, const Partition& p, MergeComponents mode) {
    const auto comp = mode == MergeComponents::scc ? strongly_connected_components(g.successor)
                                                   : weak_components(g.successor);
    const auto n_nodes = static_cast<std::int64_t>(g.node_ids.size());
    std::int64_t n_comp = 0;
    for (const auto c : comp) n_comp = std::max(n_comp, c + 1);

    std::vector<std::int64_t> comp_size(static_cast<std::size_t>(n_comp), 0);
    for (const auto c : comp) ++comp_size[static_cast<std::size_t>(c)];

    // a merged component takes its smallest constituent id, so the id of an
    // established cluster (a seen class in particular) survives absorption
    // and pseudo-labels stay stable across iterations
    Partition out = p;
    std::vector<ClusterId> comp_label(static_cast<std::size_t>(n_comp), kNotClustered);
    for (std::int64_t v = 0; v < n_nodes; ++v) {
        const auto c = comp[static_cast<std::size_t>(v)];
        auto& label = comp_label[static_cast<std::size_t>(c)];
        const auto id = g.node_ids[static_cast<std::size_t>(v)];
        if (label == kNotClustered || id < label) label = id;
    }
    std::unordered_map<ClusterId, ClusterId> relabel;
    for (std::int64_t v = 0; v < n_nodes; ++v) {
        const auto c = comp[static_cast<std::size_t>(v)];
        if (comp_size[static_cast<std::size_t>(c)] < 2) continue;  // unmerged keeps its id
        relabel[g.node_ids[static_cast<std::size_t>(v)]] = comp_label[static_cast<std::size_t>(c)];
    }
    if (relabel.empty()) return out;
    for (auto& l : out.labels) {
        if (l == kNotClustered) continue;
        const auto it = relabel.find(l);
        if (it != relabel.end()) l = it->second;
    }
    return out;
}

Partition merge_pass(const FeatureMatrix& x, const Partition& p,
                     const std::vector<ClusterId>& subset, const WtaHasher& hasher,
                     MergeComponents mode) {
    if (subset.size() < 2) return p;
    Partition masked = p;
    std::vector<std::uint8_t> keep(static_cast<std::size_t>(p.next_label), 0);
    for (const auto id : subset) keep[static_cast<std::size_t>(id)] = 1;
    for (auto& l : masked.labels)
        if (l != kNotClustered && !keep[static_cast<std::size_t>(l)]) l = kNotClustered;

    const auto cs = centroids(x, masked);
    if (cs.ids.size() < 2) return p;
    const auto codes = hash_batch(hasher, cs.centroids);
    const auto graph = build_1nn_graph(codes, cs.ids);

    Partition merged = component_merge(graph, p, mode);
    return merged;
}

Partition two_stage_merge(const FeatureMatrix& x, const Partition& p,
                          const std::vector<ClusterId>& new_ids, const WtaHasher& hasher,
                          MergeComponents mode) {
    Partition stage1 = merge_pass(x, p, new_ids, hasher, mode);
    return merge_pass(x, stage1, stage1.cluster_ids(), hasher, mode);
}

}  // namespace owd
