#pragma once

#include <cstdint>
#include <vector>

#include "owd/core.hpp"

namespace owd {

struct KmeansResult {
    std::vector<std::int64_t> assignment;  // per-sample centroid index in [0, k)
    FeatureMatrix centroids;               // k x d
    double objective = 0.0;                // sum of squared distances to assigned centroids
    std::int32_t iterations = 0;
    std::vector<double> objective_history;  // one entry per Lloyd iteration, non-increasing
};

// K-means++ seeding: first centroid uniform, each next proportional to the
// squared distance to the nearest chosen one. All-zero weights (duplicate
// rows) fall back to a uniform draw.
FeatureMatrix kmeanspp_init(const FeatureMatrix& x, std::int64_t k, Rng& rng);

// Lloyd iterations from a K-means++ start until the relative centroid shift
// drops below tol or max_iter is hit. Empty clusters are reseeded to the
// point farthest from its assigned centroid. Assignment ties go to the
// lowest centroid index.
KmeansResult kmeans(const FeatureMatrix& x, std::int64_t k, std::int32_t max_iter, double tol,
                    Rng& rng);

double squared_distance(std::span<const float> a, std::span<const float> b);

}  // namespace owd
