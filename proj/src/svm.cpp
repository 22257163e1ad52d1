#include "owd/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "owd/kmeans.hpp"

namespace owd {

double rbf_gamma_scale(const FeatureMatrix& x) {
    if (x.n == 0 || x.data.empty()) return 1.0;
    double mean = 0;
    for (const auto v : x.data) mean += v;
    mean /= static_cast<double>(x.data.size());
    double var = 0;
    for (const auto v : x.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.data.size());
    if (var <= 0) var = 1.0;
    return 1.0 / (static_cast<double>(x.d) * var);
}

double SvmModel::decision(std::span<const float> x) const {
    double acc = bias;
    for (std::int64_t i = 0; i < support_vectors.n; ++i)
        acc += coef[static_cast<std::size_t>(i)] *
               std::exp(-gamma * squared_distance(support_vectors.row(i), x));
    return acc;
}

namespace {

// RBF kernel rows, precomputed when the matrix fits comfortably.
class Kernel {
public:
    Kernel(const FeatureMatrix& x, double gamma) : x_(x), gamma_(gamma), n_(x.n) {
        // beyond this, recomputing two rows per SMO step beats the O(n^2 d)
        // fill cost for the iteration counts we see
        if (n_ <= 1024) {
            dense_.resize(static_cast<std::size_t>(n_) * n_);
            for (std::int64_t i = 0; i < n_; ++i)
                for (std::int64_t j = 0; j <= i; ++j) {
                    const float v = static_cast<float>(
                        std::exp(-gamma_ * squared_distance(x_.row(i), x_.row(j))));
                    dense_[static_cast<std::size_t>(i) * n_ + j] = v;
                    dense_[static_cast<std::size_t>(j) * n_ + i] = v;
                }
        }
    }

    void fill_row(std::int64_t i, std::vector<double>& out) const {
        out.resize(static_cast<std::size_t>(n_));
        if (!dense_.empty()) {
            const float* src = dense_.data() + static_cast<std::size_t>(i) * n_;
            for (std::int64_t t = 0; t < n_; ++t) out[static_cast<std::size_t>(t)] = src[t];
            return;
        }
        const auto xi = x_.row(i);
        for (std::int64_t t = 0; t < n_; ++t)
            out[static_cast<std::size_t>(t)] = std::exp(-gamma_ * squared_distance(xi, x_.row(t)));
    }

private:
    const FeatureMatrix& x_;
    double gamma_;
    std::int64_t n_;
    std::vector<float> dense_;
};

}  // namespace

SvmModel train_svm(const FeatureMatrix& x, const std::vector<int>& y, const SvmParams& params) {
    const std::int64_t n = x.n;
    if (n < 2) raise(Errc::invalid_param, "need at least 2 training points");
    if (static_cast<std::int64_t>(y.size()) != n) raise(Errc::length_mismatch, "labels != rows");
    bool has_pos = false, has_neg = false;
    for (const auto v : y) {
        if (v == 1) has_pos = true;
        else if (v == -1) has_neg = true;
        else raise(Errc::invalid_param, "labels must be +1 or -1");
    }
    if (!has_pos || !has_neg) raise(Errc::single_class_input, "both classes required");
    if (params.c <= 0) raise(Errc::invalid_param, "C must be positive");

    const double C = params.c;
    const double gamma = params.gamma > 0 ? params.gamma : rbf_gamma_scale(x);
    const double tol = params.tol > 0 ? params.tol : 1e-3;
    const std::int64_t max_iter = params.max_passes > 0 ? params.max_passes
                                                        : std::max<std::int64_t>(10000, 40 * n);

    Kernel kernel(x, gamma);
    std::vector<double> alpha(static_cast<std::size_t>(n), 0.0);
    std::vector<double> grad(static_cast<std::size_t>(n), -1.0);  // G = Q a - e
    std::vector<double> row_i, row_j;

    bool converged = false;
    for (std::int64_t iter = 0; iter < max_iter; ++iter) {
        // maximal violating pair; ties to the lowest index
        std::int64_t i = -1, j = -1;
        double m_up = -std::numeric_limits<double>::infinity();
        double m_low = std::numeric_limits<double>::infinity();
        for (std::int64_t t = 0; t < n; ++t) {
            const auto ts = static_cast<std::size_t>(t);
            const double v = -y[ts] * grad[ts];
            const bool in_up = (y[ts] == 1 && alpha[ts] < C) || (y[ts] == -1 && alpha[ts] > 0);
            const bool in_low = (y[ts] == 1 && alpha[ts] > 0) || (y[ts] == -1 && alpha[ts] < C);
            if (in_up && v > m_up) {
                m_up = v;
                i = t;
            }
            if (in_low && v < m_low) {
                m_low = v;
                j = t;
            }
        }
        if (i < 0 || j < 0 || m_up - m_low <= tol) {
            converged = true;
            break;
        }

        kernel.fill_row(i, row_i);
        kernel.fill_row(j, row_j);
        const auto si = static_cast<std::size_t>(i);
        const auto sj = static_cast<std::size_t>(j);
        const double old_ai = alpha[si], old_aj = alpha[sj];

        double quad = row_i[si] + row_j[sj] - 2.0 * row_i[sj];
        if (quad <= 0) quad = 1e-12;

        if (y[si] != y[sj]) {
            const double delta = (-grad[si] - grad[sj]) / quad;
            const double diff = alpha[si] - alpha[sj];
            alpha[si] += delta;
            alpha[sj] += delta;
            if (diff > 0) {
                if (alpha[sj] < 0) {
                    alpha[sj] = 0;
                    alpha[si] = diff;
                }
            } else {
                if (alpha[si] < 0) {
                    alpha[si] = 0;
                    alpha[sj] = -diff;
                }
            }
            if (diff > 0) {
                if (alpha[si] > C) {
                    alpha[si] = C;
                    alpha[sj] = C - diff;
                }
            } else {
                if (alpha[sj] > C) {
                    alpha[sj] = C;
                    alpha[si] = C + diff;
                }
            }
        } else {
            const double delta = (grad[si] - grad[sj]) / quad;
            const double sum = alpha[si] + alpha[sj];
            alpha[si] -= delta;
            alpha[sj] += delta;
            if (sum > C) {
                if (alpha[si] > C) {
                    alpha[si] = C;
                    alpha[sj] = sum - C;
                }
            } else {
                if (alpha[sj] < 0) {
                    alpha[sj] = 0;
                    alpha[si] = sum;
                }
            }
            if (sum > C) {
                if (alpha[sj] > C) {
                    alpha[sj] = C;
                    alpha[si] = sum - C;
                }
            } else {
                if (alpha[si] < 0) {
                    alpha[si] = 0;
                    alpha[sj] = sum;
                }
            }
        }

        const double dai = alpha[si] - old_ai;
        const double daj = alpha[sj] - old_aj;
        if (dai == 0.0 && daj == 0.0) {
            converged = true;  // numerically stuck at the boundary
            break;
        }
        for (std::int64_t t = 0; t < n; ++t) {
            const auto ts = static_cast<std::size_t>(t);
            grad[ts] += y[si] * y[ts] * row_i[ts] * dai + y[sj] * y[ts] * row_j[ts] * daj;
        }
    }

    // bias from free points, midpoint of the violating-pair bounds otherwise
    double free_sum = 0;
    std::int64_t free_count = 0;
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    for (std::int64_t t = 0; t < n; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        const double v = -y[ts] * grad[ts];
        if (alpha[ts] > 0 && alpha[ts] < C) {
            free_sum += v;
            ++free_count;
        } else {
            const bool in_up = (y[ts] == 1 && alpha[ts] < C) || (y[ts] == -1 && alpha[ts] > 0);
            if (in_up) lb = std::max(lb, v);
            else ub = std::min(ub, v);
        }
    }
    double bias;
    if (free_count > 0) bias = free_sum / static_cast<double>(free_count);
    else bias = (ub + lb) / 2.0;

    SvmModel model;
    model.gamma = gamma;
    model.c = C;
    model.converged = converged;
    model.bias = bias;
    double obj = 0;
    for (std::int64_t t = 0; t < n; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        obj += alpha[ts] * (1.0 - grad[ts]);
    }
    model.dual_objective = 0.5 * obj;

    std::vector<std::int64_t> sv;
    for (std::int64_t t = 0; t < n; ++t)
        if (alpha[static_cast<std::size_t>(t)] > 0) sv.push_back(t);
    model.support_vectors = x.gather(sv);
    model.coef.resize(sv.size());
    for (std::size_t s = 0; s < sv.size(); ++s)
        model.coef[s] = alpha[static_cast<std::size_t>(sv[s])] * y[static_cast<std::size_t>(sv[s])];
    return model;
}

}  // namespace owd
