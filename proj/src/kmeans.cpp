#include "owd/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "owd/parallel.hpp"

namespace owd {

double squared_distance(std::span<const float> a, std::span<const float> b) {
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = static_cast<double>(a[i]) - b[i];
        acc += diff * diff;
    }
    return acc;
}

namespace {

void check_inputs(const FeatureMatrix& x, std::int64_t k) {
    if (x.n == 0) raise(Errc::empty_input, "no samples to cluster");
    if (k < 1) raise(Errc::invalid_param, "k must be >= 1");
    if (k > x.n) raise(Errc::too_many_clusters,
                       "k=" + std::to_string(k) + " > n=" + std::to_string(x.n));
}

// index of the nearest centroid, ties to the lowest index
std::int64_t nearest(const FeatureMatrix& centroids, std::span<const float> row, double* dist_out) {
    std::int64_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::int64_t c = 0; c < centroids.n; ++c) {
        const double d = squared_distance(centroids.row(c), row);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (dist_out) *dist_out = best_d;
    return best;
}

}  // namespace

FeatureMatrix kmeanspp_init(const FeatureMatrix& x, std::int64_t k, Rng& rng) {
    check_inputs(x, k);
    FeatureMatrix centroids(k, x.d);
    std::vector<double> d2(static_cast<std::size_t>(x.n), 0.0);

    const auto first = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(x.n)));
    std::copy(x.row(first).begin(), x.row(first).end(), centroids.row(0).begin());

    for (std::int64_t c = 1; c < k; ++c) {
        double total = 0;
        const auto prev = centroids.row(c - 1);
        for (std::int64_t i = 0; i < x.n; ++i) {
            const double d = squared_distance(prev, x.row(i));
            if (c == 1 || d < d2[static_cast<std::size_t>(i)]) d2[static_cast<std::size_t>(i)] = d;
            total += d2[static_cast<std::size_t>(i)];
        }
        std::int64_t pick;
        if (total <= 0.0) {
            pick = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(x.n)));
        } else {
            const double target = rng.next_double() * total;
            double acc = 0;
            pick = x.n - 1;
            for (std::int64_t i = 0; i < x.n; ++i) {
                acc += d2[static_cast<std::size_t>(i)];
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
        }
        std::copy(x.row(pick).begin(), x.row(pick).end(), centroids.row(c).begin());
    }
    return centroids;
}

KmeansResult kmeans(const FeatureMatrix& x, std::int64_t k, std::int32_t max_iter, double tol,
                    Rng& rng) {
    check_inputs(x, k);
    if (max_iter < 1) raise(Errc::invalid_param, "max_iter must be >= 1");
    if (tol < 0) raise(Errc::invalid_param, "tol must be >= 0");

    KmeansResult res;
    res.centroids = kmeanspp_init(x, k, rng);
    res.assignment.assign(static_cast<std::size_t>(x.n), 0);
    std::vector<double> dist(static_cast<std::size_t>(x.n), 0.0);

    const std::int64_t chunk = 256;
    const std::int64_t nchunks = chunk_count(x.n, chunk);
    std::vector<double> partial_sums;
    std::vector<std::int64_t> partial_counts;

    for (std::int32_t it = 0; it < max_iter; ++it) {
        // assignment step
        parallel_for(x.n, chunk, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i)
                res.assignment[static_cast<std::size_t>(i)] =
                    nearest(res.centroids, x.row(i), &dist[static_cast<std::size_t>(i)]);
        });

        // empty-cluster repair: move the empty centroid onto the sample
        // farthest from its assigned centroid, then hand it that sample
        std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
        for (const auto a : res.assignment) ++counts[static_cast<std::size_t>(a)];
        for (std::int64_t c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            std::int64_t far = 0;
            double far_d = -1;
            for (std::int64_t i = 0; i < x.n; ++i) {
                if (counts[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(i)])] <= 1)
                    continue;
                if (dist[static_cast<std::size_t>(i)] > far_d) {
                    far_d = dist[static_cast<std::size_t>(i)];
                    far = i;
                }
            }
            std::copy(x.row(far).begin(), x.row(far).end(), res.centroids.row(c).begin());
            --counts[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(far)])];
            res.assignment[static_cast<std::size_t>(far)] = c;
            ++counts[static_cast<std::size_t>(c)];
            dist[static_cast<std::size_t>(far)] = 0.0;
        }

        double objective = 0;
        for (const auto d : dist) objective += d;
        res.objective_history.push_back(objective);
        res.objective = objective;
        res.iterations = it + 1;

        // update step: per-chunk partial sums reduced in chunk order, so the
        // result is identical for any worker count
        partial_sums.assign(static_cast<std::size_t>(nchunks) * k * x.d, 0.0);
        partial_counts.assign(static_cast<std::size_t>(nchunks) * k, 0);
        parallel_for(x.n, chunk, [&](std::int64_t lo, std::int64_t hi) {
            const std::int64_t ci = lo / chunk;
            double* sums = partial_sums.data() + static_cast<std::size_t>(ci) * k * x.d;
            std::int64_t* cnts = partial_counts.data() + static_cast<std::size_t>(ci) * k;
            for (std::int64_t i = lo; i < hi; ++i) {
                const auto a = res.assignment[static_cast<std::size_t>(i)];
                const auto row = x.row(i);
                double* dst = sums + a * x.d;
                for (std::int32_t j = 0; j < x.d; ++j) dst[j] += row[static_cast<std::size_t>(j)];
                ++cnts[a];
            }
        });

        double shift2 = 0, norm2 = 0;
        for (std::int64_t c = 0; c < k; ++c) {
            std::int64_t cnt = 0;
            for (std::int64_t ci = 0; ci < nchunks; ++ci)
                cnt += partial_counts[static_cast<std::size_t>(ci * k + c)];
            if (cnt == 0) continue;  // repaired above; keep position
            for (std::int32_t j = 0; j < x.d; ++j) {
                double s = 0;
                for (std::int64_t ci = 0; ci < nchunks; ++ci)
                    s += partial_sums[static_cast<std::size_t>((ci * k + c) * x.d + j)];
                const double nu = s / static_cast<double>(cnt);
                const double old = res.centroids(c, j);
                shift2 += (nu - old) * (nu - old);
                norm2 += nu * nu;
                res.centroids(c, j) = static_cast<float>(nu);
            }
        }

        if (std::sqrt(shift2) <= tol * (std::sqrt(norm2) + 1e-12)) break;
    }

    // final assignment against the converged centroids
    parallel_for(x.n, chunk, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i)
            res.assignment[static_cast<std::size_t>(i)] =
                nearest(res.centroids, x.row(i), &dist[static_cast<std::size_t>(i)]);
    });
    double objective = 0;
    for (const auto d : dist) objective += d;
    res.objective_history.push_back(objective);
    res.objective = objective;
    return res;
}

}  // namespace owd
