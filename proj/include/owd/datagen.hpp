#pragma once

#include <cstdint>
#include <vector>

#include "owd/core.hpp"

namespace owd {

// One synthetic source: a fixed fingerprint vector plus isotropic noise in
// the fingerprint block, content drawn fresh per sample.
struct SourceSpec {
    std::int64_t id = 0;
    std::vector<float> fingerprint;  // length d_fingerprint
    double content_scale = 1.0;      // sigma_c
    double noise_scale = 1.0;        // sigma_n
    std::int64_t samples = 0;        // discovery samples for this source
    bool seen = false;
    std::int64_t family = -1;        // sources sharing a family share part of the fingerprint
};

struct GenConfig {
    std::int32_t d_content = 48;
    double margin = 10.0;            // required min pairwise fingerprint distance, in noise units
    std::int64_t labeled_per_source = 0;  // labeled samples per seen source
};

struct SynthDataset {
    LabeledSet labeled;                  // seen sources only, class ids = source ids
    FeatureMatrix discovery;             // all sources
    std::vector<std::int64_t> truth;     // discovery ground-truth source ids
    std::vector<SourceSpec> specs;       // generation config echo
    GenConfig config;
};

// Convenience builder: n_seen seen + (n_sources - n_seen) unseen sources
// with random fingerprints whose pairwise distances are at least
// margin * noise_scale.
std::vector<SourceSpec> make_source_specs(std::int64_t n_sources, std::int64_t n_seen,
                                          std::int32_t d_fingerprint, double margin,
                                          double content_scale, double noise_scale,
                                          std::int64_t samples_per_source, Rng& rng);

// Marks the listed sources as one family and overwrites the leading
// `shared_fraction` of their fingerprints with a common seeded block, so a
// family models one generator applied to different content domains. The
// result must still satisfy the margin to be usable by generate().
void share_fingerprint_block(std::vector<SourceSpec>& specs,
                             const std::vector<std::int64_t>& source_ids, double shared_fraction,
                             std::int64_t family, Rng& rng);

// Samples: [content ~ N(0, sigma_c^2 I) ; fingerprint + N(0, sigma_n^2 I)].
// Labeled rows come from seen sources, discovery rows from all sources.
SynthDataset generate(const std::vector<SourceSpec>& specs, const GenConfig& config, Rng& rng);

// Optimal labels under the generative model: per-sample argmin over sources
// of the squared distance between the fingerprint block and each source
// fingerprint. Requires the dataset's config echo.
std::vector<std::int64_t> bayes_labels(const SynthDataset& ds);

}  // namespace owd
