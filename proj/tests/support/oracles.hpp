#pragma once

// Reference computations written independently of the library internals: closed-form
// divider voltages, a dense (untiled) binarized forward pass and model/dataset builders.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "xnor_rram/emulator.hpp"

namespace oracle {

using namespace xnor_rram;

/// V = vdd * R_pd / (R_pd + R_pu) with m LRS and 64 - m HRS cells selected.
inline double divider_voltage(double vdd, double r_pu, int m, double r_lrs, double r_hrs) {
    const double g = m / r_lrs + (64 - m) / r_hrs;
    const double r_pd = 1.0 / g;
    return vdd * r_pd / (r_pd + r_pu);
}

inline double divider_voltage_b(double vdd, double r_pu, int b, double r_lrs, double r_hrs) {
    return divider_voltage(vdd, r_pu, (b + 64) / 2, r_lrs, r_hrs);
}

/// Midpoint between the voltages of the two achievable bitcounts around odd r.
inline double midpoint(double vdd, double r_pu, int r, double r_lrs, double r_hrs) {
    return 0.5 * (divider_voltage_b(vdd, r_pu, r - 1, r_lrs, r_hrs) + divider_voltage_b(vdd, r_pu, r + 1, r_lrs, r_hrs));
}

/// Level by brute force: count of edges below b.
inline int brute_level(int b, std::span<const int> edges) {
    int l = 0;
    for (int e : edges) l += b > e ? 1 : 0;
    return l;
}

inline int xnor_dot(std::span<const Bit> a, std::span<const Bit> w) {
    int s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] == w[i] ? 1 : -1;
    return s;
}

struct DenseResult {
    int predicted = 0;
    std::vector<double> scores;
    std::vector<std::vector<int>> preacts;  // per layer, channel-major for CONV
};

/// Untiled forward pass; CONV spatial padding contributes nothing (true zero padding).
inline DenseResult dense_forward(const BnnModel& model, std::span<const float> image) {
    std::vector<Bit> act(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) act[i] = image[i] > model.binarize_threshold ? 1 : -1;
    int c = model.input_shape[0], h = model.input_shape[1], w = model.input_shape[2];
    DenseResult res;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const auto& L = model.layers[li];
        const auto& s = L.spec;
        std::vector<int> pre;
        int oc = 0, oh = 1, ow = 1;
        if (s.kind == LayerKind::fc) {
            oc = s.out_dim;
            pre.assign(static_cast<std::size_t>(oc), 0);
            for (int o = 0; o < oc; ++o) {
                int sum = 0;
                for (int i = 0; i < s.in_dim; ++i) sum += act[static_cast<std::size_t>(i)] == L.weights[0](i, o) ? 1 : -1;
                pre[static_cast<std::size_t>(o)] = sum;
            }
        } else {
            oc = s.out_channels;
            oh = (h + 2 * s.padding - s.kernel_h) / s.stride + 1;
            ow = (w + 2 * s.padding - s.kernel_w) / s.stride + 1;
            pre.assign(static_cast<std::size_t>(oc * oh * ow), 0);
            for (int o = 0; o < oc; ++o) {
                for (int y = 0; y < oh; ++y) {
                    for (int x = 0; x < ow; ++x) {
                        int sum = 0;
                        for (int ky = 0; ky < s.kernel_h; ++ky) {
                            for (int kx = 0; kx < s.kernel_w; ++kx) {
                                const int iy = y * s.stride - s.padding + ky;
                                const int ix = x * s.stride - s.padding + kx;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                const auto& wk = L.weights[static_cast<std::size_t>(ky * s.kernel_w + kx)];
                                for (int ci = 0; ci < s.in_channels; ++ci) {
                                    const Bit a = act[static_cast<std::size_t>((ci * h + iy) * w + ix)];
                                    sum += a == wk(ci, o) ? 1 : -1;
                                }
                            }
                        }
                        pre[static_cast<std::size_t>((o * oh + y) * ow + x)] = sum;
                    }
                }
            }
        }
        res.preacts.push_back(pre);
        const bool last = li + 1 == model.layers.size();
        const int per = oh * ow;
        if (last) {
            for (std::size_t i = 0; i < pre.size(); ++i) {
                const auto o = i / static_cast<std::size_t>(per);
                double v = pre[i];
                if (L.bn) {
                    const auto& bn = *L.bn;
                    v = bn.gamma[o] * (v - bn.mean[o]) / std::sqrt(static_cast<double>(bn.var[o]) + bn.eps) + bn.beta[o];
                }
                res.scores.push_back(v);
            }
            res.predicted = static_cast<int>(std::max_element(res.scores.begin(), res.scores.end()) - res.scores.begin());
            break;
        }
        std::vector<Bit> next(pre.size());
        for (std::size_t i = 0; i < pre.size(); ++i) {
            const auto o = i / static_cast<std::size_t>(per);
            double v = pre[i];
            if (L.bn) {
                const auto& bn = *L.bn;
                v = bn.gamma[o] * (v - bn.mean[o]) / std::sqrt(static_cast<double>(bn.var[o]) + bn.eps) + bn.beta[o];
                next[i] = v >= 0 ? 1 : -1;
            } else if (!L.thresholds.empty()) {
                const auto& t = L.thresholds[o];
                next[i] = (t.inverted ? v <= t.threshold : v >= t.threshold) ? 1 : -1;
            } else {
                next[i] = v >= 0 ? 1 : -1;
            }
        }
        if (s.pool) {
            const int p = *s.pool;
            const int ph = (oh + p - 1) / p, pw = (ow + p - 1) / p;
            std::vector<Bit> pooled(static_cast<std::size_t>(oc * ph * pw), -1);
            for (int o = 0; o < oc; ++o)
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x)
                        if (next[static_cast<std::size_t>((o * oh + y) * ow + x)] > 0)
                            pooled[static_cast<std::size_t>((o * ph + y / p) * pw + x / p)] = 1;
            next = std::move(pooled);
            oh = ph;
            ow = pw;
        }
        act = std::move(next);
        c = oc;
        h = oh;
        w = ow;
    }
    return res;
}

inline BinaryMatrix random_matrix(int rows, int cols, Rng& rng) {
    BinaryMatrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = (rng() & 1U) ? 1 : -1;
    return m;
}

/// Batch-norm parameters centred on the expected pre-activation spread.
inline BatchNormParams random_bn(int channels, int fan_in, Rng& rng, bool allow_negative_gamma = true) {
    BatchNormParams bn;
    std::normal_distribution<float> n01(0.0F, 1.0F);
    for (int c = 0; c < channels; ++c) {
        float g = 0.5F + std::abs(n01(rng));
        if (allow_negative_gamma && (rng() % 5) == 0) g = -g;
        bn.gamma.push_back(g);
        bn.beta.push_back(0.3F * n01(rng));
        bn.mean.push_back(0.5F * std::sqrt(static_cast<float>(fan_in)) * n01(rng));
        bn.var.push_back(static_cast<float>(fan_in) * (0.5F + std::abs(n01(rng))));
    }
    bn.eps = 1e-5F;
    return bn;
}

inline ModelLayer fc_layer(const std::string& name, int in, int out, Rng& rng, bool bn, bool last) {
    ModelLayer l;
    l.name = name;
    l.spec = LayerSpec::fc(in, out);
    l.spec.activation = last ? Activation::none : Activation::sign_binarize;
    l.weights.push_back(random_matrix(in, out, rng));
    if (bn) {
        l.bn = random_bn(out, in, rng);
        l.spec.has_batchnorm = true;
    }
    return l;
}

inline ModelLayer conv_layer(const std::string& name, int cin, int cout, int k, int stride, int pad,
                             std::optional<int> pool, Rng& rng, bool bn) {
    ModelLayer l;
    l.name = name;
    l.spec = LayerSpec::conv(cin, cout, k, k, stride, pad);
    l.spec.pool = pool;
    for (int i = 0; i < k * k; ++i) l.weights.push_back(random_matrix(cin, cout, rng));
    if (bn) {
        l.bn = random_bn(cout, cin * k * k, rng);
        l.spec.has_batchnorm = true;
    }
    return l;
}

/// MLP with the given layer widths; dims[0] is the flattened input size.
inline BnnModel random_mlp(std::span<const int> dims, std::array<int, 3> input_shape, Rng& rng, bool bn = true) {
    BnnModel m;
    m.input_shape = input_shape;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const bool last = i + 2 == dims.size();
        m.layers.push_back(fc_layer("fc" + std::to_string(i), dims[i], dims[i + 1], rng, bn, last));
    }
    return m;
}

/// Two CONV layers (one with pooling and padding) and an FC classifier.
inline BnnModel random_cnn(Rng& rng) {
    BnnModel m;
    m.input_shape = {3, 8, 8};
    m.layers.push_back(conv_layer("conv0", 3, 16, 3, 1, 1, 2, rng, true));   // 16x4x4
    m.layers.push_back(conv_layer("conv1", 16, 70, 3, 1, 1, std::nullopt, rng, true));  // 70x4x4
    m.layers.push_back(fc_layer("fc", 70 * 16, 10, rng, false, true));
    return m;
}

/// Uniform random pixels; labels are filled by the caller.
inline Dataset random_images(std::array<int, 3> shape, std::size_t n, Rng& rng) {
    Dataset ds;
    ds.shape = shape;
    ds.pixels.resize(n * ds.image_size());
    for (auto& p : ds.pixels) p = static_cast<float>(uniform01(rng));
    ds.labels.assign(n, 0);
    return ds;
}

/// Labels each image with the dense model's own prediction.
inline void self_label(const BnnModel& model, Dataset& ds) {
    for (std::size_t i = 0; i < ds.size(); ++i) ds.labels[i] = dense_forward(model, ds.image(i)).predicted;
}

}  // namespace oracle
