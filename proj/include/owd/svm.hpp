#pragma once

#include <cstdint>
#include <vector>

#include "owd/core.hpp"

namespace owd {

struct SvmParams {
    double c = 1.0;
    double gamma = 0.0;  // 0 selects 1 / (d * var(X))
    double tol = 1e-3;
    std::int64_t max_passes = 0;  // 0 selects 100 * n working-set steps
};

// Soft-margin C-SVM with RBF kernel, solved by SMO on the dual.
struct SvmModel {
    FeatureMatrix support_vectors;    // m x d
    std::vector<double> coef;         // alpha_i * y_i per support vector
    double bias = 0.0;
    double gamma = 1.0;
    double c = 1.0;
    bool converged = true;
    double dual_objective = 0.0;      // 1^T a - 0.5 a^T Q a at termination

    double decision(std::span<const float> x) const;
};

// y entries must be +1/-1 with both classes present. Working-set selection
// is the maximal-violating pair, ties to the lowest index, so training is
// deterministic. Hitting max_passes returns the best-so-far model with
// converged = false.
SvmModel train_svm(const FeatureMatrix& x, const std::vector<int>& y, const SvmParams& params);

double rbf_gamma_scale(const FeatureMatrix& x);

}  // namespace owd
