#include "owd/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace owd {

namespace {

double fingerprint_distance(const std::vector<float>& a, const std::vector<float>& b) {
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace

std::vector<SourceSpec> make_source_specs(std::int64_t n_sources, std::int64_t n_seen,
                                          std::int32_t d_fingerprint, double margin,
                                          double content_scale, double noise_scale,
                                          std::int64_t samples_per_source, Rng& rng) {
    if (n_sources < 2) raise(Errc::invalid_spec, "need at least 2 sources");
    if (n_seen < 1 || n_seen > n_sources) raise(Errc::invalid_spec, "seen count out of range");
    if (d_fingerprint < 1) raise(Errc::invalid_spec, "fingerprint dimension must be >= 1");

    // Fingerprints drawn at radius ~ margin * noise per coordinate, redrawn
    // until the pairwise margin holds (virtually never triggers at these
    // dimensions).
    const double radius = margin * noise_scale;
    std::vector<SourceSpec> specs;
    for (std::int64_t s = 0; s < n_sources; ++s) {
        SourceSpec spec;
        spec.id = s;
        spec.content_scale = content_scale;
        spec.noise_scale = noise_scale;
        spec.samples = samples_per_source;
        spec.seen = s < n_seen;
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 1000) raise(Errc::invalid_spec, "cannot satisfy fingerprint margin");
            spec.fingerprint.assign(static_cast<std::size_t>(d_fingerprint), 0.0f);
            for (auto& v : spec.fingerprint) v = static_cast<float>(rng.normal() * radius);
            bool ok = true;
            for (const auto& other : specs)
                if (fingerprint_distance(spec.fingerprint, other.fingerprint) < margin * noise_scale)
                    ok = false;
            if (ok) break;
        }
        specs.push_back(std::move(spec));
    }
    return specs;
}

void share_fingerprint_block(std::vector<SourceSpec>& specs,
                             const std::vector<std::int64_t>& source_ids, double shared_fraction,
                             std::int64_t family, Rng& rng) {
    if (shared_fraction < 0.0 || shared_fraction > 1.0)
        raise(Errc::invalid_spec, "shared fraction must be in [0,1]");
    if (source_ids.size() < 2) raise(Errc::invalid_spec, "a family needs at least 2 sources");
    std::vector<SourceSpec*> members;
    for (const auto id : source_ids) {
        SourceSpec* found = nullptr;
        for (auto& s : specs)
            if (s.id == id) found = &s;
        if (!found) raise(Errc::invalid_spec, "unknown source id " + std::to_string(id));
        members.push_back(found);
    }
    const auto d_f = static_cast<std::int64_t>(members[0]->fingerprint.size());
    const auto shared = static_cast<std::int64_t>(shared_fraction * static_cast<double>(d_f));
    const double radius = members[0]->noise_scale > 0 ? 10.0 * members[0]->noise_scale : 10.0;
    std::vector<float> block(static_cast<std::size_t>(shared));
    for (auto& v : block) v = static_cast<float>(rng.normal() * radius);
    for (auto* s : members) {
        s->family = family;
        std::copy(block.begin(), block.end(), s->fingerprint.begin());
    }
}

SynthDataset generate(const std::vector<SourceSpec>& specs, const GenConfig& config, Rng& rng) {
    if (specs.size() < 2) raise(Errc::invalid_spec, "need at least 2 sources");
    std::int64_t n_seen = 0;
    const auto d_f = static_cast<std::int32_t>(specs[0].fingerprint.size());
    if (d_f < 1) raise(Errc::invalid_spec, "empty fingerprint");
    for (const auto& s : specs) {
        if (static_cast<std::int32_t>(s.fingerprint.size()) != d_f)
            raise(Errc::invalid_spec, "fingerprint dimensions differ");
        if (s.samples < 0 || s.content_scale < 0 || s.noise_scale < 0)
            raise(Errc::invalid_spec, "negative scale or sample count");
        n_seen += s.seen;
    }
    if (n_seen < 1) raise(Errc::invalid_spec, "need at least 1 seen source");
    for (std::size_t a = 0; a < specs.size(); ++a)
        for (std::size_t b = a + 1; b < specs.size(); ++b)
            if (fingerprint_distance(specs[a].fingerprint, specs[b].fingerprint) <
                config.margin * std::max(specs[a].noise_scale, specs[b].noise_scale))
                raise(Errc::invalid_spec, "fingerprints violate the declared margin");

    const std::int32_t d = config.d_content + d_f;
    SynthDataset ds;
    ds.specs = specs;
    ds.config = config;

    auto draw_sample = [&](const SourceSpec& spec, Rng& r, std::span<float> out) {
        for (std::int32_t j = 0; j < config.d_content; ++j)
            out[static_cast<std::size_t>(j)] = static_cast<float>(r.normal() * spec.content_scale);
        for (std::int32_t j = 0; j < d_f; ++j)
            out[static_cast<std::size_t>(config.d_content + j)] =
                spec.fingerprint[static_cast<std::size_t>(j)] +
                static_cast<float>(r.normal() * spec.noise_scale);
    };

    std::int64_t n_labeled = 0, n_discovery = 0;
    for (const auto& s : specs) {
        if (s.seen) n_labeled += config.labeled_per_source;
        n_discovery += s.samples;
    }

    ds.labeled.features = FeatureMatrix(n_labeled, d);
    ds.labeled.n_classes = n_seen;
    ds.discovery = FeatureMatrix(n_discovery, d);

    std::int64_t li = 0, di = 0;
    for (const auto& spec : specs) {
        Rng source_rng = rng.fork(0x6765754eULL ^ static_cast<std::uint64_t>(spec.id));
        if (spec.seen) {
            for (std::int64_t k = 0; k < config.labeled_per_source; ++k, ++li) {
                draw_sample(spec, source_rng, ds.labeled.features.row(li));
                ds.labeled.labels.push_back(spec.id);
            }
        }
        for (std::int64_t k = 0; k < spec.samples; ++k, ++di) {
            draw_sample(spec, source_rng, ds.discovery.row(di));
            ds.truth.push_back(spec.id);
        }
    }
    return ds;
}

std::vector<std::int64_t> bayes_labels(const SynthDataset& ds) {
    if (ds.specs.empty()) raise(Errc::missing_config_echo, "dataset carries no generation specs");
    const auto d_f = static_cast<std::int32_t>(ds.specs[0].fingerprint.size());
    const auto d_c = ds.config.d_content;
    if (ds.discovery.d != d_c + d_f)
        raise(Errc::missing_config_echo, "config echo disagrees with feature dimension");

    std::vector<std::int64_t> out(static_cast<std::size_t>(ds.discovery.n));
    for (std::int64_t i = 0; i < ds.discovery.n; ++i) {
        const auto row = ds.discovery.row(i);
        double best = std::numeric_limits<double>::infinity();
        std::int64_t best_id = ds.specs[0].id;
        for (const auto& spec : ds.specs) {
            double acc = 0;
            for (std::int32_t j = 0; j < d_f; ++j) {
                const double diff = static_cast<double>(row[static_cast<std::size_t>(d_c + j)]) -
                                    spec.fingerprint[static_cast<std::size_t>(j)];
                acc += diff * diff;
            }
            if (acc < best) {
                best = acc;
                best_id = spec.id;
            }
        }
        out[static_cast<std::size_t>(i)] = best_id;
    }
    return out;
}

}  // namespace owd
