#include "owd/core.hpp"

#include <cmath>
#include <unordered_map>

namespace owd {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::non_finite_value: return "NonFiniteValue";
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::window_too_large: return "WindowTooLarge";
        case Errc::invalid_param: return "InvalidParam";
        case Errc::dimension_mismatch: return "DimensionMismatch";
        case Errc::incompatible_codes: return "IncompatibleCodes";
        case Errc::empty_cluster: return "EmptyCluster";
        case Errc::invalid_percentile: return "InvalidPercentile";
        case Errc::too_many_clusters: return "TooManyClusters";
        case Errc::empty_input: return "EmptyInput";
        case Errc::too_few_clusters: return "TooFewClusters";
        case Errc::single_class_input: return "SingleClassInput";
        case Errc::class_index_out_of_range: return "ClassIndexOutOfRange";
        case Errc::empty_labeled_set: return "EmptyLabeledSet";
        case Errc::length_mismatch: return "LengthMismatch";
        case Errc::empty_partition: return "EmptyPartition";
        case Errc::no_clusters: return "NoClusters";
        case Errc::invalid_spec: return "InvalidSpec";
        case Errc::missing_config_echo: return "MissingConfigEcho";
        case Errc::bad_magic: return "BadMagic";
        case Errc::version_unsupported: return "VersionUnsupported";
        case Errc::truncated_payload: return "TruncatedPayload";
        case Errc::duplicate_index: return "DuplicateIndex";
        case Errc::missing_index: return "MissingIndex";
        case Errc::parse_error: return "ParseError";
        case Errc::unknown_key: return "UnknownKey";
        case Errc::type_error: return "TypeError";
        case Errc::io_error: return "IoError";
    }
    return "UnknownError";
}

std::vector<std::int64_t> Rng::sample_without_replacement(std::int64_t n, std::int64_t k) {
    if (k > n) raise(Errc::invalid_param, "sample size exceeds population");
    std::vector<std::int64_t> pool(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    std::vector<std::int64_t> out(static_cast<std::size_t>(k));
    for (std::int64_t i = 0; i < k; ++i) {
        const std::int64_t j = i + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
        out[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(i)];
    }
    return out;
}

FeatureMatrix FeatureMatrix::gather(std::span<const std::int64_t> rows) const {
    FeatureMatrix out(static_cast<std::int64_t>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(static_cast<std::int64_t>(i)).begin());
    }
    return out;
}

void validate(const FeatureMatrix& m) {
    if (m.n < 0 || m.d < 1) raise(Errc::shape_mismatch, "n must be >= 0 and d >= 1");
    if (m.data.size() != static_cast<std::size_t>(m.n) * static_cast<std::size_t>(m.d))
        raise(Errc::shape_mismatch, "data length " + std::to_string(m.data.size()) +
                                        " != n*d = " + std::to_string(m.n * m.d));
    for (std::int64_t i = 0; i < m.n; ++i) {
        const auto r = m.row(i);
        for (std::int32_t j = 0; j < m.d; ++j) {
            if (!std::isfinite(r[static_cast<std::size_t>(j)]))
                raise(Errc::non_finite_value,
                      "at (" + std::to_string(i) + "," + std::to_string(j) + ")");
        }
    }
}

void validate(const LabeledSet& s) {
    validate(s.features);
    if (static_cast<std::int64_t>(s.labels.size()) != s.features.n)
        raise(Errc::length_mismatch, "labels length != feature rows");
    for (std::size_t i = 0; i < s.labels.size(); ++i) {
        if (s.labels[i] < 0 || s.labels[i] >= s.n_classes)
            raise(Errc::class_index_out_of_range,
                  "label " + std::to_string(s.labels[i]) + " at index " + std::to_string(i));
    }
}

std::int64_t Partition::clustered_count() const {
    std::int64_t c = 0;
    for (const auto l : labels) c += (l != kNotClustered);
    return c;
}

std::vector<ClusterId> Partition::cluster_ids() const {
    std::vector<ClusterId> ids;
    std::unordered_map<ClusterId, bool> seen;
    for (const auto l : labels) {
        if (l == kNotClustered) continue;
        if (!seen[l]) {
            seen[l] = true;
            ids.push_back(l);
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<std::int64_t> Partition::members(ClusterId id) const {
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == id) out.push_back(static_cast<std::int64_t>(i));
    return out;
}

std::vector<std::int64_t> Partition::unclustered() const {
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == kNotClustered) out.push_back(static_cast<std::int64_t>(i));
    return out;
}

CanonicalizeResult canonicalize(const Partition& p) {
    CanonicalizeResult r;
    r.partition.labels.resize(p.labels.size(), kNotClustered);
    std::unordered_map<ClusterId, ClusterId> map;
    ClusterId next = 0;
    for (std::size_t i = 0; i < p.labels.size(); ++i) {
        const ClusterId old = p.labels[i];
        if (old == kNotClustered) continue;
        auto it = map.find(old);
        if (it == map.end()) {
            it = map.emplace(old, next++).first;
            r.relabel.emplace_back(old, it->second);
        }
        r.partition.labels[i] = it->second;
    }
    r.partition.next_label = next;
    return r;
}

}  // namespace owd
