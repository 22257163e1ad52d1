#include "owd/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace owd {

void LinearLayer::sync_transpose() {
    wt.resize(w.size());
    for (std::int32_t o = 0; o < out; ++o)
        for (std::int32_t i = 0; i < in; ++i)
            wt[static_cast<std::size_t>(i) * out + o] = w[static_cast<std::size_t>(o) * in + i];
}

namespace {

LinearLayer make_layer(std::int32_t in, std::int32_t out, Rng& rng, float bound) {
    LinearLayer l;
    l.in = in;
    l.out = out;
    l.w.resize(static_cast<std::size_t>(in) * out);
    l.b.assign(static_cast<std::size_t>(out), 0.0f);
    for (auto& v : l.w) v = (2.0f * rng.next_float() - 1.0f) * bound;
    l.sync_transpose();
    return l;
}

LinearLayer kaiming_layer(std::int32_t in, std::int32_t out, Rng& rng) {
    return make_layer(in, out, rng, std::sqrt(6.0f / static_cast<float>(in)));
}

// heads start near zero so a fresh classifier emits a near-uniform softmax
LinearLayer head_layer(std::int32_t in, std::int32_t out, Rng& rng) {
    return make_layer(in, out, rng, 1e-3f);
}

// Y(B x O) = X(B x I) * Wt(I x O) + b
void linear_forward(const float* x, std::int64_t rows, const LinearLayer& l, float* y) {
    for (std::int64_t r = 0; r < rows; ++r) {
        float* yr = y + r * l.out;
        for (std::int32_t o = 0; o < l.out; ++o) yr[o] = l.b[static_cast<std::size_t>(o)];
        const float* xr = x + r * l.in;
        for (std::int32_t i = 0; i < l.in; ++i) {
            const float xv = xr[i];
            if (xv == 0.0f) continue;
            const float* wrow = l.wt.data() + static_cast<std::size_t>(i) * l.out;
            for (std::int32_t o = 0; o < l.out; ++o) yr[o] += xv * wrow[o];
        }
    }
}

// dX(B x I) = dY(B x O) * W(O x I)
void linear_backward_input(const float* dy, std::int64_t rows, const LinearLayer& l, float* dx) {
    for (std::int64_t r = 0; r < rows; ++r) {
        float* dxr = dx + r * l.in;
        std::memset(dxr, 0, sizeof(float) * static_cast<std::size_t>(l.in));
        const float* dyr = dy + r * l.out;
        for (std::int32_t o = 0; o < l.out; ++o) {
            const float g = dyr[o];
            if (g == 0.0f) continue;
            const float* wrow = l.w.data() + static_cast<std::size_t>(o) * l.in;
            for (std::int32_t i = 0; i < l.in; ++i) dxr[i] += g * wrow[i];
        }
    }
}

// dW(O x I) += dY^T . X ; db += column sums of dY
void linear_backward_params(const float* x, const float* dy, std::int64_t rows,
                            const LinearLayer& l, float* dw, float* db) {
    for (std::int64_t r = 0; r < rows; ++r) {
        const float* xr = x + r * l.in;
        const float* dyr = dy + r * l.out;
        for (std::int32_t o = 0; o < l.out; ++o) {
            const float g = dyr[o];
            if (g == 0.0f) continue;
            db[o] += g;
            float* dwrow = dw + static_cast<std::size_t>(o) * l.in;
            for (std::int32_t i = 0; i < l.in; ++i) dwrow[i] += g * xr[i];
        }
    }
}

struct AdamState {
    std::vector<float> m, v;
    void init(std::size_t n) {
        m.assign(n, 0.0f);
        v.assign(n, 0.0f);
    }
};

void adam_update(std::vector<float>& w, const float* g, AdamState& st, double lr, double beta1,
                 double beta2, double bc1, double bc2) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g[i];
        const double m = beta1 * st.m[i] + (1.0 - beta1) * gi;
        const double v = beta2 * st.v[i] + (1.0 - beta2) * gi * gi;
        st.m[i] = static_cast<float>(m);
        st.v[i] = static_cast<float>(v);
        w[i] -= static_cast<float>(lr * (m / bc1) / (std::sqrt(v / bc2) + 1e-8));
    }
}

struct BatchWorkspace {
    std::vector<float> z1, z2, z3, h1, h2, h3, logits, probs;
    std::vector<float> d1, d2, d3, dlogits;
    std::vector<std::uint8_t> m1, m2, m3;

    void resize(std::int64_t b, const Network& net) {
        const auto sb = static_cast<std::size_t>(b);
        z1.resize(sb * Network::kHidden);
        z2.resize(sb * Network::kHidden);
        z3.resize(sb * Network::kFeatureDim);
        h1.resize(sb * Network::kHidden);
        h2.resize(sb * Network::kHidden);
        h3.resize(sb * Network::kFeatureDim);
        logits.resize(sb * static_cast<std::size_t>(net.n_classes));
        probs.resize(sb * static_cast<std::size_t>(net.n_classes));
        d1.resize(sb * Network::kHidden);
        d2.resize(sb * Network::kHidden);
        d3.resize(sb * Network::kFeatureDim);
        dlogits.resize(sb * static_cast<std::size_t>(net.n_classes));
        m1.resize(sb * Network::kHidden);
        m2.resize(sb * Network::kHidden);
        m3.resize(sb * Network::kFeatureDim);
    }
};

// h = relu(z) with inverted dropout; masks recorded for the backward pass
void relu_dropout(const float* z, float* h, std::uint8_t* mask, std::size_t n, double p, Rng* rng) {
    if (rng && p > 0.0) {
        const float scale = 1.0f / static_cast<float>(1.0 - p);
        for (std::size_t i = 0; i < n; ++i) {
            const bool keep = rng->next_double() >= p;
            mask[i] = keep;
            h[i] = keep && z[i] > 0.0f ? z[i] * scale : 0.0f;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            mask[i] = 1;
            h[i] = z[i] > 0.0f ? z[i] : 0.0f;
        }
    }
}

// dz = dh * mask_scale * relu'(z)
void relu_dropout_backward(const float* dh, const float* z, const std::uint8_t* mask, float* dz,
                           std::size_t n, double p, bool train) {
    const float scale = train && p > 0.0 ? 1.0f / static_cast<float>(1.0 - p) : 1.0f;
    for (std::size_t i = 0; i < n; ++i)
        dz[i] = (mask[i] && z[i] > 0.0f) ? dh[i] * scale : 0.0f;
}

// probs + per-sample weighted CE loss + dlogits in one pass
double softmax_ce(const float* logits, std::int64_t rows, std::int32_t classes,
                  const std::int64_t* y, const double* weights, float* probs, float* dlogits) {
    double loss = 0;
    for (std::int64_t r = 0; r < rows; ++r) {
        const float* lr = logits + r * classes;
        float* pr = probs + r * classes;
        float mx = lr[0];
        for (std::int32_t c = 1; c < classes; ++c) mx = std::max(mx, lr[c]);
        double denom = 0;
        for (std::int32_t c = 0; c < classes; ++c) {
            const double e = std::exp(static_cast<double>(lr[c]) - mx);
            pr[c] = static_cast<float>(e);
            denom += e;
        }
        const double inv = 1.0 / denom;
        for (std::int32_t c = 0; c < classes; ++c) pr[c] = static_cast<float>(pr[c] * inv);
        const auto target = y[r];
        const double w = weights ? weights[r] : 1.0 / static_cast<double>(rows);
        loss -= w * std::log(std::max(1e-30, static_cast<double>(pr[target])));
        if (dlogits) {
            float* dr = dlogits + r * classes;
            for (std::int32_t c = 0; c < classes; ++c)
                dr[c] = static_cast<float>(w * (pr[c] - (c == target ? 1.0 : 0.0)));
        }
    }
    return loss;
}

void check_labels(const std::vector<std::int64_t>& y, std::int32_t n_classes) {
    for (const auto v : y)
        if (v < 0 || v >= n_classes)
            raise(Errc::class_index_out_of_range, "label " + std::to_string(v));
}

}  // namespace

Network init_network(std::int32_t d_in, std::int32_t n_classes, Rng& rng) {
    if (d_in < 1) raise(Errc::invalid_param, "d_in must be >= 1");
    if (n_classes < 2) raise(Errc::invalid_param, "need at least 2 classes");
    Network net;
    net.d_in = d_in;
    net.n_classes = n_classes;
    net.fc1 = kaiming_layer(d_in, Network::kHidden, rng);
    net.fc2 = kaiming_layer(Network::kHidden, Network::kHidden, rng);
    net.fc3 = kaiming_layer(Network::kHidden, Network::kFeatureDim, rng);
    net.head = head_layer(Network::kFeatureDim, n_classes, rng);
    return net;
}

Network rebuild_head(const Network& prev, std::int32_t n_classes, Rng& rng) {
    if (n_classes < 2) raise(Errc::invalid_param, "need at least 2 classes");
    Network net = prev;
    net.n_classes = n_classes;
    net.head = head_layer(Network::kFeatureDim, n_classes, rng);
    return net;
}

std::vector<double> train(Network& net, const FeatureMatrix& labeled_x,
                          const std::vector<std::int64_t>& labeled_y,
                          const FeatureMatrix& clustered_x,
                          const std::vector<std::int64_t>& clustered_y, const TrainConfig& cfg) {
    if (labeled_x.n == 0) raise(Errc::empty_labeled_set, "labeled set is empty");
    if (labeled_x.d != net.d_in || (clustered_x.n > 0 && clustered_x.d != net.d_in))
        raise(Errc::dimension_mismatch, "input dimension != network d_in");
    if (static_cast<std::int64_t>(labeled_y.size()) != labeled_x.n ||
        static_cast<std::int64_t>(clustered_y.size()) != clustered_x.n)
        raise(Errc::length_mismatch, "labels != rows");
    check_labels(labeled_y, net.n_classes);
    check_labels(clustered_y, net.n_classes);
    if (cfg.batch < 2) raise(Errc::invalid_param, "batch must be >= 2");
    if (cfg.epochs < 1) raise(Errc::invalid_param, "epochs must be >= 1");

    const std::int64_t n_s = labeled_x.n;
    const std::int64_t n_c = clustered_x.n;
    const bool mixed = n_c > 0;
    const std::int64_t batch = cfg.batch;
    const std::int64_t half_c = mixed ? batch / 2 : 0;
    const std::int64_t half_s = batch - half_c;
    const std::int64_t steps = std::max<std::int64_t>(1, (n_s + n_c + batch - 1) / batch);

    Rng shuffle_rng(cfg.seed, 0x7368756666ULL);
    Rng dropout_rng(cfg.seed, 0x64726f70ULL);

    std::vector<std::int64_t> order_s(static_cast<std::size_t>(n_s));
    std::vector<std::int64_t> order_c(static_cast<std::size_t>(n_c));
    for (std::int64_t i = 0; i < n_s; ++i) order_s[static_cast<std::size_t>(i)] = i;
    for (std::int64_t i = 0; i < n_c; ++i) order_c[static_cast<std::size_t>(i)] = i;

    LinearLayer* layers[4] = {&net.fc1, &net.fc2, &net.fc3, &net.head};
    AdamState mw[4], mb[4];
    std::vector<float> gw[4], gb[4];
    for (int l = 0; l < 4; ++l) {
        mw[l].init(layers[l]->w.size());
        mb[l].init(layers[l]->b.size());
        gw[l].resize(layers[l]->w.size());
        gb[l].resize(layers[l]->b.size());
    }

    BatchWorkspace ws;
    ws.resize(batch, net);
    std::vector<float> bx(static_cast<std::size_t>(batch) * net.d_in);
    std::vector<float> dbx(static_cast<std::size_t>(batch) * net.d_in);
    std::vector<std::int64_t> by(static_cast<std::size_t>(batch));
    std::vector<double> bw(static_cast<std::size_t>(batch));

    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(cfg.epochs));
    std::int64_t adam_t = 0;
    std::int64_t cur_s = 0, cur_c = 0;

    for (std::int32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order_s);
        if (mixed) shuffle_rng.shuffle(order_c);
        cur_s = 0;
        cur_c = 0;
        double epoch_loss = 0;

        for (std::int64_t step = 0; step < steps; ++step) {
            // clustered half first, then the labeled half
            for (std::int64_t k = 0; k < half_c; ++k) {
                const auto src = order_c[static_cast<std::size_t>(cur_c)];
                cur_c = (cur_c + 1) % n_c;
                const auto row = clustered_x.row(src);
                std::copy(row.begin(), row.end(), bx.begin() + static_cast<std::ptrdiff_t>(k * net.d_in));
                by[static_cast<std::size_t>(k)] = clustered_y[static_cast<std::size_t>(src)];
                bw[static_cast<std::size_t>(k)] = 1.0 / static_cast<double>(half_c);
            }
            for (std::int64_t k = 0; k < half_s; ++k) {
                const auto src = order_s[static_cast<std::size_t>(cur_s)];
                cur_s = (cur_s + 1) % n_s;
                const auto dst = half_c + k;
                const auto row = labeled_x.row(src);
                std::copy(row.begin(), row.end(), bx.begin() + static_cast<std::ptrdiff_t>(dst * net.d_in));
                by[static_cast<std::size_t>(dst)] = labeled_y[static_cast<std::size_t>(src)];
                bw[static_cast<std::size_t>(dst)] = 1.0 / static_cast<double>(half_s);
            }

            // forward
            linear_forward(bx.data(), batch, net.fc1, ws.z1.data());
            relu_dropout(ws.z1.data(), ws.h1.data(), ws.m1.data(), ws.z1.size(), cfg.dropout, &dropout_rng);
            linear_forward(ws.h1.data(), batch, net.fc2, ws.z2.data());
            relu_dropout(ws.z2.data(), ws.h2.data(), ws.m2.data(), ws.z2.size(), cfg.dropout, &dropout_rng);
            linear_forward(ws.h2.data(), batch, net.fc3, ws.z3.data());
            relu_dropout(ws.z3.data(), ws.h3.data(), ws.m3.data(), ws.z3.size(), cfg.dropout, &dropout_rng);
            linear_forward(ws.h3.data(), batch, net.head, ws.logits.data());

            epoch_loss += softmax_ce(ws.logits.data(), batch, net.n_classes, by.data(), bw.data(),
                                     ws.probs.data(), ws.dlogits.data());

            // backward
            for (int l = 0; l < 4; ++l) {
                std::fill(gw[l].begin(), gw[l].end(), 0.0f);
                std::fill(gb[l].begin(), gb[l].end(), 0.0f);
            }
            linear_backward_params(ws.h3.data(), ws.dlogits.data(), batch, net.head, gw[3].data(), gb[3].data());
            linear_backward_input(ws.dlogits.data(), batch, net.head, ws.d3.data());
            relu_dropout_backward(ws.d3.data(), ws.z3.data(), ws.m3.data(), ws.d3.data(), ws.z3.size(), cfg.dropout, true);
            linear_backward_params(ws.h2.data(), ws.d3.data(), batch, net.fc3, gw[2].data(), gb[2].data());
            linear_backward_input(ws.d3.data(), batch, net.fc3, ws.d2.data());
            relu_dropout_backward(ws.d2.data(), ws.z2.data(), ws.m2.data(), ws.d2.data(), ws.z2.size(), cfg.dropout, true);
            linear_backward_params(ws.h1.data(), ws.d2.data(), batch, net.fc2, gw[1].data(), gb[1].data());
            linear_backward_input(ws.d2.data(), batch, net.fc2, ws.d1.data());
            relu_dropout_backward(ws.d1.data(), ws.z1.data(), ws.m1.data(), ws.d1.data(), ws.z1.size(), cfg.dropout, true);
            linear_backward_params(bx.data(), ws.d1.data(), batch, net.fc1, gw[0].data(), gb[0].data());

            ++adam_t;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_t));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_t));
            for (int l = 0; l < 4; ++l) {
                adam_update(layers[l]->w, gw[l].data(), mw[l], cfg.lr, cfg.beta1, cfg.beta2, bc1, bc2);
                adam_update(layers[l]->b, gb[l].data(), mb[l], cfg.lr, cfg.beta1, cfg.beta2, bc1, bc2);
                layers[l]->sync_transpose();
            }
        }
        history.push_back(epoch_loss / static_cast<double>(steps));
    }
    return history;
}

namespace {

// eval-mode refiner forward for a row range
void refiner_eval(const Network& net, const FeatureMatrix& x, std::int64_t lo, std::int64_t hi,
                  float* out128) {
    const std::int64_t rows = hi - lo;
    std::vector<float> z1(static_cast<std::size_t>(rows) * Network::kHidden);
    std::vector<float> z2(static_cast<std::size_t>(rows) * Network::kHidden);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(rows) * Network::kHidden);
    linear_forward(x.data.data() + static_cast<std::size_t>(lo) * x.d, rows, net.fc1, z1.data());
    relu_dropout(z1.data(), z1.data(), mask.data(), z1.size(), 0.0, nullptr);
    linear_forward(z1.data(), rows, net.fc2, z2.data());
    relu_dropout(z2.data(), z2.data(), mask.data(), z2.size(), 0.0, nullptr);
    std::vector<float> z3(static_cast<std::size_t>(rows) * Network::kFeatureDim);
    linear_forward(z2.data(), rows, net.fc3, z3.data());
    relu_dropout(z3.data(), out128, mask.data(), z3.size(), 0.0, nullptr);
}

}  // namespace

FeatureMatrix extract_features(const Network& net, const FeatureMatrix& x) {
    if (x.d != net.d_in) raise(Errc::dimension_mismatch, "input dimension != network d_in");
    FeatureMatrix out(x.n, Network::kFeatureDim);
    const std::int64_t block = 512;
    for (std::int64_t lo = 0; lo < x.n; lo += block) {
        const auto hi = std::min(x.n, lo + block);
        refiner_eval(net, x, lo, hi, out.data.data() + static_cast<std::size_t>(lo) * Network::kFeatureDim);
    }
    return out;
}

ClassifyResult classify_batch(const Network& net, const FeatureMatrix& x) {
    const auto feats = extract_features(net, x);
    ClassifyResult res;
    res.labels.resize(static_cast<std::size_t>(x.n));
    res.probs = FeatureMatrix(x.n, net.n_classes);
    std::vector<float> logits(static_cast<std::size_t>(x.n) * net.n_classes);
    linear_forward(feats.data.data(), x.n, net.head, logits.data());
    std::vector<std::int64_t> dummy_y(static_cast<std::size_t>(x.n), 0);
    softmax_ce(logits.data(), x.n, net.n_classes, dummy_y.data(), nullptr, res.probs.data.data(),
               nullptr);
    for (std::int64_t r = 0; r < x.n; ++r) {
        const auto row = res.probs.row(r);
        std::int64_t best = 0;
        for (std::int32_t c = 1; c < net.n_classes; ++c)
            if (row[static_cast<std::size_t>(c)] > row[static_cast<std::size_t>(best)]) best = c;
        res.labels[static_cast<std::size_t>(r)] = best;
    }
    return res;
}

namespace {

struct DoubleLayer {
    std::int32_t in, out;
    std::vector<double> w, b;
};

DoubleLayer promote(const LinearLayer& l) {
    DoubleLayer d;
    d.in = l.in;
    d.out = l.out;
    d.w.assign(l.w.begin(), l.w.end());
    d.b.assign(l.b.begin(), l.b.end());
    return d;
}

struct DoubleNet {
    std::int32_t d_in, n_classes;
    DoubleLayer fc1, fc2, fc3, head;
};

DoubleNet promote(const Network& net) {
    return {net.d_in, net.n_classes, promote(net.fc1), promote(net.fc2), promote(net.fc3),
            promote(net.head)};
}

double dforward_loss(const DoubleNet& net, const FeatureMatrix& x,
                     const std::vector<std::int64_t>& y, const std::vector<double>& w,
                     ReferenceGrads* grads) {
    const std::int64_t n = x.n;
    const DoubleLayer* layers[4] = {&net.fc1, &net.fc2, &net.fc3, &net.head};
    std::vector<std::vector<double>> act(5);
    act[0].resize(static_cast<std::size_t>(n) * net.d_in);
    for (std::size_t i = 0; i < act[0].size(); ++i) act[0][i] = x.data[i];
    std::vector<std::vector<double>> pre(4);

    for (int l = 0; l < 4; ++l) {
        const auto& L = *layers[l];
        pre[static_cast<std::size_t>(l)].assign(static_cast<std::size_t>(n) * L.out, 0.0);
        auto& z = pre[static_cast<std::size_t>(l)];
        const auto& a = act[static_cast<std::size_t>(l)];
        for (std::int64_t r = 0; r < n; ++r)
            for (std::int32_t o = 0; o < L.out; ++o) {
                double acc = L.b[static_cast<std::size_t>(o)];
                for (std::int32_t i = 0; i < L.in; ++i)
                    acc += a[static_cast<std::size_t>(r * L.in + i)] *
                           L.w[static_cast<std::size_t>(o) * L.in + i];
                z[static_cast<std::size_t>(r * L.out + o)] = acc;
            }
        act[static_cast<std::size_t>(l) + 1] = z;
        if (l < 3)
            for (auto& v : act[static_cast<std::size_t>(l) + 1]) v = v > 0 ? v : 0.0;
    }

    // softmax CE
    const auto& logits = act[4];
    std::vector<double> probs(logits.size());
    double loss = 0;
    std::vector<double> dlogits(grads ? logits.size() : 0);
    for (std::int64_t r = 0; r < n; ++r) {
        const double* lr = logits.data() + r * net.n_classes;
        double* pr = probs.data() + r * net.n_classes;
        double mx = lr[0];
        for (std::int32_t c = 1; c < net.n_classes; ++c) mx = std::max(mx, lr[c]);
        double denom = 0;
        for (std::int32_t c = 0; c < net.n_classes; ++c) {
            pr[c] = std::exp(lr[c] - mx);
            denom += pr[c];
        }
        for (std::int32_t c = 0; c < net.n_classes; ++c) pr[c] /= denom;
        const double wi = w.empty() ? 1.0 / static_cast<double>(n) : w[static_cast<std::size_t>(r)];
        loss -= wi * std::log(std::max(1e-300, pr[y[static_cast<std::size_t>(r)]]));
        if (grads)
            for (std::int32_t c = 0; c < net.n_classes; ++c)
                dlogits[static_cast<std::size_t>(r * net.n_classes + c)] =
                    wi * (pr[c] - (c == y[static_cast<std::size_t>(r)] ? 1.0 : 0.0));
    }
    if (!grads) return loss;

    std::vector<double>* gw[4] = {&grads->w1, &grads->w2, &grads->w3, &grads->wh};
    std::vector<double>* gb[4] = {&grads->b1, &grads->b2, &grads->b3, &grads->bh};
    std::vector<double> delta = dlogits;
    for (int l = 3; l >= 0; --l) {
        const auto& L = *layers[l];
        gw[l]->assign(L.w.size(), 0.0);
        gb[l]->assign(L.b.size(), 0.0);
        const auto& a = act[static_cast<std::size_t>(l)];
        for (std::int64_t r = 0; r < n; ++r)
            for (std::int32_t o = 0; o < L.out; ++o) {
                const double g = delta[static_cast<std::size_t>(r * L.out + o)];
                (*gb[l])[static_cast<std::size_t>(o)] += g;
                for (std::int32_t i = 0; i < L.in; ++i)
                    (*gw[l])[static_cast<std::size_t>(o) * L.in + i] +=
                        g * a[static_cast<std::size_t>(r * L.in + i)];
            }
        if (l == 0) break;
        std::vector<double> dprev(static_cast<std::size_t>(n) * L.in, 0.0);
        for (std::int64_t r = 0; r < n; ++r)
            for (std::int32_t o = 0; o < L.out; ++o) {
                const double g = delta[static_cast<std::size_t>(r * L.out + o)];
                for (std::int32_t i = 0; i < L.in; ++i)
                    dprev[static_cast<std::size_t>(r * L.in + i)] +=
                        g * L.w[static_cast<std::size_t>(o) * L.in + i];
            }
        // relu'
        const auto& z = pre[static_cast<std::size_t>(l - 1)];
        for (std::size_t i = 0; i < dprev.size(); ++i)
            if (z[i] <= 0) dprev[i] = 0.0;
        delta = std::move(dprev);
    }
    return loss;
}

}  // namespace

double reference_loss(const Network& net, const FeatureMatrix& x,
                      const std::vector<std::int64_t>& y, const std::vector<double>& sample_weights,
                      ReferenceGrads* grads) {
    if (x.d != net.d_in) raise(Errc::dimension_mismatch, "input dimension != network d_in");
    check_labels(y, net.n_classes);
    const auto dn = promote(net);
    return dforward_loss(dn, x, y, sample_weights, grads);
}

double gradcheck(const Network& net, const FeatureMatrix& x, const std::vector<std::int64_t>& y,
                 const std::vector<double>& sample_weights) {
    if (x.d != net.d_in) raise(Errc::dimension_mismatch, "input dimension != network d_in");
    check_labels(y, net.n_classes);
    DoubleNet dn = promote(net);

    ReferenceGrads grads;
    dforward_loss(dn, x, y, sample_weights, &grads);

    double max_rel = 0;
    auto central_diff = [&](std::vector<double>& params, std::size_t i, double h) {
        const double save = params[i];
        params[i] = save + h;
        const double up = dforward_loss(dn, x, y, sample_weights, nullptr);
        params[i] = save - h;
        const double down = dforward_loss(dn, x, y, sample_weights, nullptr);
        params[i] = save;
        return (up - down) / (2 * h);
    };
    auto probe = [&](std::vector<double>& params, const std::vector<double>& analytic,
                     std::size_t stride) {
        for (std::size_t i = 0; i < params.size(); i += stride) {
            const double a = analytic[i];
            double rel = 0;
            // h = 1e-3 first; a ReLU kink inside the probe interval shows up
            // as a large error that vanishes at smaller steps
            for (const double h : {1e-3, 1e-6}) {
                const double fd = central_diff(params, i, h);
                rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
                if (rel < 1e-5) break;
            }
            max_rel = std::max(max_rel, rel);
        }
    };
    probe(dn.fc1.w, grads.w1, 523);
    probe(dn.fc2.w, grads.w2, 1031);
    probe(dn.fc3.w, grads.w3, 509);
    probe(dn.head.w, grads.wh, 17);
    probe(dn.fc1.b, grads.b1, 37);
    probe(dn.fc2.b, grads.b2, 37);
    probe(dn.fc3.b, grads.b3, 11);
    probe(dn.head.b, grads.bh, 1);
    return max_rel;
}

}  // namespace owd
