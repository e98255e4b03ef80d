// Copyright (c) 2026 segbench contributors
// SPDX-License-Identifier: Apache-2.0

#include "segbench/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace segbench {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

// Valid output range for one kernel offset: positions `o` with
// 0 <= o*stride - pad + k_off < limit. Both conv gather and its adjoints use
// the same relation, so crop/pad via differently-sized destinations falls
// out of the clamping.
struct TapRange {
    int64_t lo = 0, hi = -1;  // inclusive; empty when lo > hi
};

TapRange tap_range(int64_t out_size, int64_t in_size, int stride, int pad, int64_t k_off) {
    TapRange r;
    int64_t t = pad - k_off;
    r.lo = t > 0 ? (t + stride - 1) / stride : 0;
    int64_t t2 = in_size - 1 + pad - k_off;
    if (t2 < 0) return {1, 0};
    r.hi = std::min(out_size - 1, t2 / stride);
    return r;
}

// y[n][oc][o] += sum W[oc][icg][k] * x[n][ic][o*s - p + k*d]; W dim0 spans
// y's channels, dim1 the per-group x channels.
void conv_forward(const Tensor& x, const Tensor& w, const Tensor* bias, int sh, int sw, int ph,
                  int pw, int dil, int groups, Tensor& y) {
    const auto& xs = x.shape();
    const auto& ys = y.shape();
    const int64_t kh = w.shape().height, kw = w.shape().width;
    const int64_t icg_count = w.shape().channels;
    const int64_t ocg_count = ys.channels / groups;
    for (int64_t n = 0; n < ys.batch; ++n) {
        for (int64_t oc = 0; oc < ys.channels; ++oc) {
            double* yplane = y.plane(n, oc);
            double init = bias ? (*bias)[oc] : 0.0;
            std::fill(yplane, yplane + y.plane_size(), init);
            int64_t ic0 = (oc / ocg_count) * icg_count;
            for (int64_t icg = 0; icg < icg_count; ++icg) {
                const double* xplane = x.plane(n, ic0 + icg);
                const double* wbase = w.plane(oc, icg);
                for (int64_t ki = 0; ki < kh; ++ki) {
                    TapRange rh = tap_range(ys.height, xs.height, sh, ph, ki * dil);
                    for (int64_t kj = 0; kj < kw; ++kj) {
                        double wv = wbase[ki * kw + kj];
                        if (wv == 0.0) continue;
                        TapRange rw = tap_range(ys.width, xs.width, sw, pw, kj * dil);
                        for (int64_t oh = rh.lo; oh <= rh.hi; ++oh) {
                            int64_t ih = oh * sh - ph + ki * dil;
                            double* yrow = yplane + oh * ys.width;
                            const double* xrow = xplane + ih * xs.width;
                            int64_t iw = rw.lo * sw - pw + kj * dil;
                            for (int64_t ow = rw.lo; ow <= rw.hi; ++ow, iw += sw)
                                yrow[ow] += wv * xrow[iw];
                        }
                    }
                }
            }
        }
    }
}

// dx[n][ic][o*s - p + k*d] += sum W[oc][icg][k] * dy[n][oc][o]: the scatter
// adjoint of conv_forward, and also the transposed-conv forward when W is
// laid out (in_channels, out_channels/groups, kh, kw).
void conv_scatter(const Tensor& dy, const Tensor& w, int sh, int sw, int ph, int pw, int dil,
                  int groups, Tensor& dx) {
    const auto& ys = dy.shape();
    const auto& xs = dx.shape();
    const int64_t kh = w.shape().height, kw = w.shape().width;
    const int64_t icg_count = w.shape().channels;
    const int64_t ocg_count = ys.channels / groups;
    for (int64_t n = 0; n < ys.batch; ++n) {
        for (int64_t oc = 0; oc < ys.channels; ++oc) {
            const double* yplane = dy.plane(n, oc);
            int64_t ic0 = (oc / ocg_count) * icg_count;
            for (int64_t icg = 0; icg < icg_count; ++icg) {
                double* xplane = dx.plane(n, ic0 + icg);
                const double* wbase = w.plane(oc, icg);
                for (int64_t ki = 0; ki < kh; ++ki) {
                    TapRange rh = tap_range(ys.height, xs.height, sh, ph, ki * dil);
                    for (int64_t kj = 0; kj < kw; ++kj) {
                        double wv = wbase[ki * kw + kj];
                        if (wv == 0.0) continue;
                        TapRange rw = tap_range(ys.width, xs.width, sw, pw, kj * dil);
                        for (int64_t oh = rh.lo; oh <= rh.hi; ++oh) {
                            int64_t ih = oh * sh - ph + ki * dil;
                            const double* yrow = yplane + oh * ys.width;
                            double* xrow = xplane + ih * xs.width;
                            int64_t iw = rw.lo * sw - pw + kj * dil;
                            for (int64_t ow = rw.lo; ow <= rw.hi; ++ow, iw += sw)
                                xrow[iw] += wv * yrow[ow];
                        }
                    }
                }
            }
        }
    }
}

// dW[oc][icg][k] = sum_n,o dy[n][oc][o] * x[n][ic][o*s - p + k*d]
void conv_weight_grad(const Tensor& x, const Tensor& dy, int sh, int sw, int ph, int pw, int dil,
                      int groups, Tensor& dw) {
    const auto& xs = x.shape();
    const auto& ys = dy.shape();
    const int64_t kh = dw.shape().height, kw = dw.shape().width;
    const int64_t icg_count = dw.shape().channels;
    const int64_t ocg_count = ys.channels / groups;
    for (int64_t oc = 0; oc < ys.channels; ++oc) {
        int64_t ic0 = (oc / ocg_count) * icg_count;
        for (int64_t icg = 0; icg < icg_count; ++icg) {
            double* wbase = dw.plane(oc, icg);
            for (int64_t ki = 0; ki < kh; ++ki) {
                TapRange rh = tap_range(ys.height, xs.height, sh, ph, ki * dil);
                for (int64_t kj = 0; kj < kw; ++kj) {
                    TapRange rw = tap_range(ys.width, xs.width, sw, pw, kj * dil);
                    double acc = 0.0;
                    for (int64_t n = 0; n < ys.batch; ++n) {
                        const double* yplane = dy.plane(n, oc);
                        const double* xplane = x.plane(n, ic0 + icg);
                        for (int64_t oh = rh.lo; oh <= rh.hi; ++oh) {
                            int64_t ih = oh * sh - ph + ki * dil;
                            const double* yrow = yplane + oh * ys.width;
                            const double* xrow = xplane + ih * xs.width;
                            int64_t iw = rw.lo * sw - pw + kj * dil;
                            for (int64_t ow = rw.lo; ow <= rw.hi; ++ow, iw += sw)
                                acc += yrow[ow] * xrow[iw];
                        }
                    }
                    wbase[ki * kw + kj] = acc;
                }
            }
        }
    }
}

void bias_grad(const Tensor& dy, Tensor& db) {
    db.zero();
    for (int64_t n = 0; n < dy.shape().batch; ++n)
        for (int64_t c = 0; c < dy.shape().channels; ++c) {
            const double* p = dy.plane(n, c);
            double acc = 0.0;
            for (int64_t i = 0; i < dy.plane_size(); ++i) acc += p[i];
            db[c] += acc;
        }
}

struct ResizeTap {
    int64_t i0, i1;
    double w0, w1;
};

ResizeTap resize_tap(int64_t dst, int64_t out_size, int64_t in_size) {
    double src = (dst + 0.5) * static_cast<double>(in_size) / out_size - 0.5;
    double f = std::floor(src);
    ResizeTap t;
    t.i0 = std::clamp<int64_t>(static_cast<int64_t>(f), 0, in_size - 1);
    t.i1 = std::clamp<int64_t>(t.i0 + 1, 0, in_size - 1);
    t.w1 = std::clamp(src - f, 0.0, 1.0);
    t.w0 = 1.0 - t.w1;
    return t;
}

}  // namespace

void bilinear_fill(Tensor& weight, int stride) {
    const auto& s = weight.shape();
    int64_t k = s.height;
    double factor = (k + 1) / 2;
    double center = (k % 2 == 1) ? factor - 1 : factor - 0.5;
    weight.zero();
    int64_t per_group = s.channels;  // (in, out/groups, k, k); diagonal fill needs in == out
    for (int64_t c = 0; c < s.batch; ++c) {
        int64_t oc = c % per_group;
        double* p = weight.plane(c, oc);
        for (int64_t i = 0; i < k; ++i)
            for (int64_t j = 0; j < k; ++j)
                p[i * k + j] = (1.0 - std::abs(i - center) / factor) *
                               (1.0 - std::abs(j - center) / factor);
    }
    (void)stride;
}

Executor::Executor(const NetworkGraph& graph, uint64_t seed) : graph_(graph) {
    if (graph_.inputs.size() != 1)
        throw std::invalid_argument("executor expects exactly one input node");
    input_id_ = graph_.inputs.front();
    order_ = topological_order(graph_);
    decl_shapes_ = infer_all_shapes(graph_);
    init_parameters(seed);
}

void Executor::init_parameters(uint64_t seed) {
    Rng rng(seed ^ 0x5eb5eb5eb5ull);
    for (const auto& id : order_) {
        const GraphNode& node = graph_.at(id);
        const LayerSpec& s = node.spec;
        if (is_conv_family(s.kind)) {
            int64_t in_c = decl_shapes_.at(node.inputs.front()).channels;
            int g = s.kind == LayerKind::DepthwiseConv ? static_cast<int>(in_c) : s.groups;
            Tensor w = s.kind == LayerKind::TransposedConv
                           ? Tensor(in_c, s.out_channels / g, s.kernel_h, s.kernel_w)
                           : Tensor(s.out_channels, in_c / g, s.kernel_h, s.kernel_w);
            if (s.kind == LayerKind::TransposedConv && in_c == s.out_channels) {
                bilinear_fill(w, s.stride_h);
            } else {
                double fan_in = static_cast<double>(w.shape().channels) * s.kernel_h * s.kernel_w;
                double std = std::sqrt(2.0 / fan_in);
                for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.normal() * std;
            }
            params_[id + ".weight"] = std::move(w);
            if (s.has_bias) params_[id + ".bias"] = Tensor(1, s.out_channels, 1, 1);
        } else if (s.kind == LayerKind::BatchNorm) {
            int64_t c = decl_shapes_.at(node.inputs.front()).channels;
            Tensor gamma(1, c, 1, 1), beta(1, c, 1, 1), rm(1, c, 1, 1), rv(1, c, 1, 1);
            gamma.fill(1.0);
            rv.fill(1.0);
            params_[id + ".gamma"] = std::move(gamma);
            params_[id + ".beta"] = std::move(beta);
            buffers_[id + ".running_mean"] = std::move(rm);
            buffers_[id + ".running_var"] = std::move(rv);
        }
    }
    for (const auto& [name, t] : params_) grads_[name] = Tensor(t.shape());
}

bool Executor::is_decay_parameter(const std::string& name) const {
    if (name.size() < 7 || name.substr(name.size() - 7) != ".weight") return false;
    const GraphNode* n = graph_.find(name.substr(0, name.size() - 7));
    return n && is_conv_family(n->spec.kind);
}

int64_t Executor::parameter_count() const {
    int64_t total = 0;
    for (const auto& [name, t] : params_) total += t.size();
    return total;
}

const Tensor& Executor::output() const { return acts_.at(graph_.outputs.front()); }

const Tensor& Executor::activation(const std::string& node_id) const { return acts_.at(node_id); }

const Tensor& Executor::forward(const Tensor& input, bool training) {
    training_mode_ = training;
    acts_.clear();
    saved_stats_.clear();
    saved_idx_.clear();
    if (input.shape().channels != decl_shapes_.at(input_id_).channels)
        throw std::invalid_argument("input channel count does not match the graph");
    acts_[input_id_] = input;

    for (const auto& id : order_) {
        const GraphNode& node = graph_.at(id);
        const LayerSpec& s = node.spec;
        if (s.kind == LayerKind::Input) continue;
        const Tensor& x = acts_.at(node.inputs.front());
        const auto& xs = x.shape();

        std::vector<TensorShape> in_shapes;
        for (const auto& in : node.inputs) in_shapes.push_back(acts_.at(in).shape());
        std::optional<TensorShape> ref;
        if (node.size_ref) ref = acts_.at(*node.size_ref).shape();
        TensorShape out_shape = infer_shape(s, in_shapes, ref);
        Tensor y(out_shape);

        switch (s.kind) {
            case LayerKind::Conv:
            case LayerKind::DepthwiseConv:
            case LayerKind::GroupedConv: {
                int g = s.kind == LayerKind::DepthwiseConv ? static_cast<int>(xs.channels)
                                                           : s.groups;
                const Tensor* bias = s.has_bias ? &params_.at(id + ".bias") : nullptr;
                conv_forward(x, params_.at(id + ".weight"), bias, s.stride_h, s.stride_w, s.pad_h,
                             s.pad_w, s.dilation, g, y);
                break;
            }
            case LayerKind::TransposedConv: {
                conv_scatter(x, params_.at(id + ".weight"), s.stride_h, s.stride_w, s.pad_h,
                             s.pad_w, s.dilation, s.groups, y);
                if (s.has_bias) {
                    const Tensor& b = params_.at(id + ".bias");
                    for (int64_t n = 0; n < out_shape.batch; ++n)
                        for (int64_t c = 0; c < out_shape.channels; ++c) {
                            double* p = y.plane(n, c);
                            for (int64_t i = 0; i < y.plane_size(); ++i) p[i] += b[c];
                        }
                }
                break;
            }
            case LayerKind::MaxPool: {
                auto& arg = saved_idx_[id];
                arg.assign(y.size(), -1);
                int64_t oi = 0;
                for (int64_t n = 0; n < out_shape.batch; ++n)
                    for (int64_t c = 0; c < out_shape.channels; ++c)
                        for (int64_t oh = 0; oh < out_shape.height; ++oh)
                            for (int64_t ow = 0; ow < out_shape.width; ++ow, ++oi) {
                                double best = -1e300;
                                int64_t best_i = -1;
                                for (int64_t ki = 0; ki < s.kernel_h; ++ki) {
                                    int64_t ih = oh * s.stride_h - s.pad_h + ki;
                                    if (ih < 0 || ih >= xs.height) continue;
                                    for (int64_t kj = 0; kj < s.kernel_w; ++kj) {
                                        int64_t iw = ow * s.stride_w - s.pad_w + kj;
                                        if (iw < 0 || iw >= xs.width) continue;
                                        double v = x.at(n, c, ih, iw);
                                        if (v > best) {
                                            best = v;
                                            best_i = x.index(n, c, ih, iw);
                                        }
                                    }
                                }
                                y[oi] = best;
                                arg[oi] = best_i;
                            }
                break;
            }
            case LayerKind::AvgPool: {
                int64_t oi = 0;
                for (int64_t n = 0; n < out_shape.batch; ++n)
                    for (int64_t c = 0; c < out_shape.channels; ++c)
                        for (int64_t oh = 0; oh < out_shape.height; ++oh)
                            for (int64_t ow = 0; ow < out_shape.width; ++ow, ++oi) {
                                double acc = 0.0;
                                int64_t cnt = 0;
                                for (int64_t ki = 0; ki < s.kernel_h; ++ki) {
                                    int64_t ih = oh * s.stride_h - s.pad_h + ki;
                                    if (ih < 0 || ih >= xs.height) continue;
                                    for (int64_t kj = 0; kj < s.kernel_w; ++kj) {
                                        int64_t iw = ow * s.stride_w - s.pad_w + kj;
                                        if (iw < 0 || iw >= xs.width) continue;
                                        acc += x.at(n, c, ih, iw);
                                        ++cnt;
                                    }
                                }
                                y[oi] = cnt > 0 ? acc / cnt : 0.0;
                            }
                break;
            }
            case LayerKind::BatchNorm: {
                const Tensor& gamma = params_.at(id + ".gamma");
                const Tensor& beta = params_.at(id + ".beta");
                Tensor& rm = buffers_.at(id + ".running_mean");
                Tensor& rv = buffers_.at(id + ".running_var");
                int64_t C = xs.channels;
                int64_t m = xs.batch * xs.height * xs.width;
                auto& stats = saved_stats_[id];
                stats.assign(2 * C, 0.0);
                for (int64_t c = 0; c < C; ++c) {
                    double mean, var;
                    if (training_mode_) {
                        double sum = 0.0, sq = 0.0;
                        for (int64_t n = 0; n < xs.batch; ++n) {
                            const double* p = x.plane(n, c);
                            for (int64_t i = 0; i < x.plane_size(); ++i) {
                                sum += p[i];
                                sq += p[i] * p[i];
                            }
                        }
                        mean = sum / m;
                        var = std::max(0.0, sq / m - mean * mean);
                        double unbiased = m > 1 ? var * m / (m - 1) : var;
                        rm[c] = (1 - kBnMomentum) * rm[c] + kBnMomentum * mean;
                        rv[c] = (1 - kBnMomentum) * rv[c] + kBnMomentum * unbiased;
                    } else {
                        mean = rm[c];
                        var = rv[c];
                    }
                    double inv = 1.0 / std::sqrt(var + kBnEps);
                    stats[c] = mean;
                    stats[C + c] = inv;
                    for (int64_t n = 0; n < xs.batch; ++n) {
                        const double* p = x.plane(n, c);
                        double* q = y.plane(n, c);
                        double a = gamma[c] * inv;
                        double b = beta[c] - a * mean;
                        for (int64_t i = 0; i < x.plane_size(); ++i) q[i] = a * p[i] + b;
                    }
                }
                break;
            }
            case LayerKind::Relu:
                for (int64_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0 ? x[i] : 0.0;
                break;
            case LayerKind::Add: {
                y = acts_.at(node.inputs[0]);
                for (size_t k = 1; k < node.inputs.size(); ++k) {
                    const Tensor& other = acts_.at(node.inputs[k]);
                    for (int64_t i = 0; i < y.size(); ++i) y[i] += other[i];
                }
                break;
            }
            case LayerKind::Concat: {
                int64_t c_off = 0;
                for (const auto& in : node.inputs) {
                    const Tensor& t = acts_.at(in);
                    for (int64_t n = 0; n < t.shape().batch; ++n)
                        for (int64_t c = 0; c < t.shape().channels; ++c)
                            std::copy(t.plane(n, c), t.plane(n, c) + t.plane_size(),
                                      y.plane(n, c_off + c));
                    c_off += t.shape().channels;
                }
                break;
            }
            case LayerKind::ChannelShuffle: {
                // y[:, j] = x[:, perm[j]]
                int64_t per_group = xs.channels / s.groups;
                for (int64_t n = 0; n < xs.batch; ++n)
                    for (int64_t j = 0; j < xs.channels; ++j) {
                        int64_t src = (j % s.groups) * per_group + j / s.groups;
                        std::copy(x.plane(n, src), x.plane(n, src) + x.plane_size(), y.plane(n, j));
                    }
                break;
            }
            case LayerKind::BilinearResize: {
                for (int64_t oh = 0; oh < out_shape.height; ++oh) {
                    ResizeTap th = resize_tap(oh, out_shape.height, xs.height);
                    for (int64_t ow = 0; ow < out_shape.width; ++ow) {
                        ResizeTap tw = resize_tap(ow, out_shape.width, xs.width);
                        for (int64_t n = 0; n < xs.batch; ++n)
                            for (int64_t c = 0; c < xs.channels; ++c) {
                                const double* p = x.plane(n, c);
                                double v = th.w0 * (tw.w0 * p[th.i0 * xs.width + tw.i0] +
                                                    tw.w1 * p[th.i0 * xs.width + tw.i1]) +
                                           th.w1 * (tw.w0 * p[th.i1 * xs.width + tw.i0] +
                                                    tw.w1 * p[th.i1 * xs.width + tw.i1]);
                                y.at(n, c, oh, ow) = v;
                            }
                    }
                }
                break;
            }
            case LayerKind::GlobalPool: {
                for (int64_t n = 0; n < xs.batch; ++n)
                    for (int64_t c = 0; c < xs.channels; ++c) {
                        const double* p = x.plane(n, c);
                        double acc = 0.0;
                        for (int64_t i = 0; i < x.plane_size(); ++i) acc += p[i];
                        y.at(n, c, 0, 0) = acc / x.plane_size();
                    }
                break;
            }
            case LayerKind::Input:
                break;
        }
        acts_[id] = std::move(y);
    }
    return output();
}

void Executor::backward(const Tensor& output_grad) {
    for (auto& [name, g] : grads_) g.zero();
    act_grads_.clear();
    act_grads_[graph_.outputs.front()] = output_grad;

    auto grad_of = [&](const std::string& id) -> Tensor& {
        auto it = act_grads_.find(id);
        if (it == act_grads_.end())
            it = act_grads_.emplace(id, Tensor(acts_.at(id).shape())).first;
        return it->second;
    };

    for (auto rit = order_.rbegin(); rit != order_.rend(); ++rit) {
        const std::string& id = *rit;
        const GraphNode& node = graph_.at(id);
        const LayerSpec& s = node.spec;
        if (s.kind == LayerKind::Input) continue;
        auto git = act_grads_.find(id);
        if (git == act_grads_.end()) continue;  // not on any path to the output
        const Tensor& dy = git->second;
        const Tensor& x = acts_.at(node.inputs.front());
        const auto& xs = x.shape();

        switch (s.kind) {
            case LayerKind::Conv:
            case LayerKind::DepthwiseConv:
            case LayerKind::GroupedConv: {
                int g = s.kind == LayerKind::DepthwiseConv ? static_cast<int>(xs.channels)
                                                           : s.groups;
                const Tensor& w = params_.at(id + ".weight");
                conv_scatter(dy, w, s.stride_h, s.stride_w, s.pad_h, s.pad_w, s.dilation, g,
                             grad_of(node.inputs.front()));
                conv_weight_grad(x, dy, s.stride_h, s.stride_w, s.pad_h, s.pad_w, s.dilation, g,
                                 grads_.at(id + ".weight"));
                if (s.has_bias) bias_grad(dy, grads_.at(id + ".bias"));
                break;
            }
            case LayerKind::TransposedConv: {
                const Tensor& w = params_.at(id + ".weight");
                Tensor dx(xs);
                conv_forward(dy, w, nullptr, s.stride_h, s.stride_w, s.pad_h, s.pad_w, s.dilation,
                             s.groups, dx);
                Tensor& acc = grad_of(node.inputs.front());
                for (int64_t i = 0; i < dx.size(); ++i) acc[i] += dx[i];
                conv_weight_grad(dy, x, s.stride_h, s.stride_w, s.pad_h, s.pad_w, s.dilation,
                                 s.groups, grads_.at(id + ".weight"));
                if (s.has_bias) bias_grad(dy, grads_.at(id + ".bias"));
                break;
            }
            case LayerKind::MaxPool: {
                Tensor& dx = grad_of(node.inputs.front());
                const auto& arg = saved_idx_.at(id);
                for (int64_t i = 0; i < dy.size(); ++i)
                    if (arg[i] >= 0) dx[arg[i]] += dy[i];
                break;
            }
            case LayerKind::AvgPool: {
                Tensor& dx = grad_of(node.inputs.front());
                const auto& os = dy.shape();
                int64_t oi = 0;
                for (int64_t n = 0; n < os.batch; ++n)
                    for (int64_t c = 0; c < os.channels; ++c)
                        for (int64_t oh = 0; oh < os.height; ++oh)
                            for (int64_t ow = 0; ow < os.width; ++ow, ++oi) {
                                int64_t cnt = 0;
                                for (int64_t ki = 0; ki < s.kernel_h; ++ki) {
                                    int64_t ih = oh * s.stride_h - s.pad_h + ki;
                                    if (ih < 0 || ih >= xs.height) continue;
                                    for (int64_t kj = 0; kj < s.kernel_w; ++kj) {
                                        int64_t iw = ow * s.stride_w - s.pad_w + kj;
                                        if (iw >= 0 && iw < xs.width) ++cnt;
                                    }
                                }
                                if (cnt == 0) continue;
                                double share = dy[oi] / cnt;
                                for (int64_t ki = 0; ki < s.kernel_h; ++ki) {
                                    int64_t ih = oh * s.stride_h - s.pad_h + ki;
                                    if (ih < 0 || ih >= xs.height) continue;
                                    for (int64_t kj = 0; kj < s.kernel_w; ++kj) {
                                        int64_t iw = ow * s.stride_w - s.pad_w + kj;
                                        if (iw >= 0 && iw < xs.width) dx.at(n, c, ih, iw) += share;
                                    }
                                }
                            }
                break;
            }
            case LayerKind::BatchNorm: {
                const Tensor& gamma = params_.at(id + ".gamma");
                Tensor& dgamma = grads_.at(id + ".gamma");
                Tensor& dbeta = grads_.at(id + ".beta");
                Tensor& dx = grad_of(node.inputs.front());
                const auto& stats = saved_stats_.at(id);
                int64_t C = xs.channels;
                int64_t m = xs.batch * xs.height * xs.width;
                for (int64_t c = 0; c < C; ++c) {
                    double mean = stats[c], inv = stats[C + c];
                    double sum_dy = 0.0, sum_dy_xhat = 0.0;
                    for (int64_t n = 0; n < xs.batch; ++n) {
                        const double* px = x.plane(n, c);
                        const double* pdy = dy.plane(n, c);
                        for (int64_t i = 0; i < x.plane_size(); ++i) {
                            sum_dy += pdy[i];
                            sum_dy_xhat += pdy[i] * (px[i] - mean) * inv;
                        }
                    }
                    dgamma[c] += sum_dy_xhat;
                    dbeta[c] += sum_dy;
                    if (training_mode_) {
                        double k1 = sum_dy / m, k2 = sum_dy_xhat / m;
                        for (int64_t n = 0; n < xs.batch; ++n) {
                            const double* px = x.plane(n, c);
                            const double* pdy = dy.plane(n, c);
                            double* pdx = dx.plane(n, c);
                            for (int64_t i = 0; i < x.plane_size(); ++i) {
                                double xhat = (px[i] - mean) * inv;
                                pdx[i] += gamma[c] * inv * (pdy[i] - k1 - xhat * k2);
                            }
                        }
                    } else {
                        // Running statistics are constants in eval mode.
                        for (int64_t n = 0; n < xs.batch; ++n) {
                            const double* pdy = dy.plane(n, c);
                            double* pdx = dx.plane(n, c);
                            for (int64_t i = 0; i < x.plane_size(); ++i)
                                pdx[i] += gamma[c] * inv * pdy[i];
                        }
                    }
                }
                break;
            }
            case LayerKind::Relu: {
                Tensor& dx = grad_of(node.inputs.front());
                for (int64_t i = 0; i < x.size(); ++i)
                    if (x[i] > 0) dx[i] += dy[i];
                break;
            }
            case LayerKind::Add:
                for (const auto& in : node.inputs) {
                    Tensor& dx = grad_of(in);
                    for (int64_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
                }
                break;
            case LayerKind::Concat: {
                int64_t c_off = 0;
                for (const auto& in : node.inputs) {
                    Tensor& dx = grad_of(in);
                    const auto& is = dx.shape();
                    for (int64_t n = 0; n < is.batch; ++n)
                        for (int64_t c = 0; c < is.channels; ++c) {
                            const double* src = dy.plane(n, c_off + c);
                            double* dst = dx.plane(n, c);
                            for (int64_t i = 0; i < dx.plane_size(); ++i) dst[i] += src[i];
                        }
                    c_off += is.channels;
                }
                break;
            }
            case LayerKind::ChannelShuffle: {
                Tensor& dx = grad_of(node.inputs.front());
                int64_t per_group = xs.channels / s.groups;
                for (int64_t n = 0; n < xs.batch; ++n)
                    for (int64_t j = 0; j < xs.channels; ++j) {
                        int64_t src = (j % s.groups) * per_group + j / s.groups;
                        const double* pdy = dy.plane(n, j);
                        double* pdx = dx.plane(n, src);
                        for (int64_t i = 0; i < dx.plane_size(); ++i) pdx[i] += pdy[i];
                    }
                break;
            }
            case LayerKind::BilinearResize: {
                Tensor& dx = grad_of(node.inputs.front());
                const auto& os = dy.shape();
                for (int64_t oh = 0; oh < os.height; ++oh) {
                    ResizeTap th = resize_tap(oh, os.height, xs.height);
                    for (int64_t ow = 0; ow < os.width; ++ow) {
                        ResizeTap tw = resize_tap(ow, os.width, xs.width);
                        for (int64_t n = 0; n < os.batch; ++n)
                            for (int64_t c = 0; c < os.channels; ++c) {
                                double g = dy.at(n, c, oh, ow);
                                double* p = dx.plane(n, c);
                                p[th.i0 * xs.width + tw.i0] += th.w0 * tw.w0 * g;
                                p[th.i0 * xs.width + tw.i1] += th.w0 * tw.w1 * g;
                                p[th.i1 * xs.width + tw.i0] += th.w1 * tw.w0 * g;
                                p[th.i1 * xs.width + tw.i1] += th.w1 * tw.w1 * g;
                            }
                    }
                }
                break;
            }
            case LayerKind::GlobalPool: {
                Tensor& dx = grad_of(node.inputs.front());
                for (int64_t n = 0; n < xs.batch; ++n)
                    for (int64_t c = 0; c < xs.channels; ++c) {
                        double share = dy.at(n, c, 0, 0) / x.plane_size();
                        double* p = dx.plane(n, c);
                        for (int64_t i = 0; i < dx.plane_size(); ++i) p[i] += share;
                    }
                break;
            }
            case LayerKind::Input:
                break;
        }
    }
}

}  // namespace segbench
