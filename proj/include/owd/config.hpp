#pragma once

#include <cstdint>
#include <optional>

#include "owd/merge.hpp"
#include "owd/ood.hpp"

namespace owd {

// Pipeline knobs with their defaults. Unset keys in a config file keep
// these values.
struct PipelineConfig {
    struct Wta {
        std::int32_t hashes = 2048;
        std::int32_t window = 2;
    } wta;

    struct Ood {
        double beta = 0.9;
        std::int64_t cap = 1000;
        OodDistance distance = OodDistance::wta_hamming;
        std::optional<double> seen_beta;  // iteration-1 override for seen-class detectors
    } ood;

    struct Kmeans {
        std::int64_t k = 500;
        std::int32_t max_iter = 300;
        double tol = 1e-4;
    } kmeans;

    struct Merge {
        MergeComponents components = MergeComponents::scc;
        std::int32_t rounds = 1;
    } merge;

    struct Refine {
        double epsilon = 0.5;
        std::int64_t tau = 100;
        double svm_c = 1.0;
        double svm_gamma = 0.0;  // 0 = scale heuristic
        double svm_tol = 1e-3;
        std::int64_t svm_max_passes = 0;  // 0 = solver default
        double negatives_ratio = 5.0;
    } refine;

    struct Trainer {
        std::int32_t epochs_first = 50;
        std::int32_t epochs_later = 100;
        double lr = 1e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        std::int32_t batch = 256;
        double dropout = 0.5;
    } trainer;

    struct Stop {
        std::int32_t max_iterations = 4;
        double delta = 0.05;  // stop when |I_n| / n_t falls below this
    } stop;

    struct Run {
        std::uint64_t seed = 0;
        std::int32_t workers = 1;
    } run;
};

}  // namespace owd
