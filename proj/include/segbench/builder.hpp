// Copyright (c) 2026 segbench contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "segbench/graph.hpp"

namespace segbench {

/// Incremental NetworkGraph construction. Every method appends one node and
/// returns its id so builders read as straight-line layer lists.
class GraphBuilder {
public:
    GraphBuilder() = default;
    /// Continues building on top of an existing graph (decoders extend
    /// encoder trunks this way).
    explicit GraphBuilder(NetworkGraph base) : graph_(std::move(base)) {}

    std::string input(const std::string& id, int64_t channels, int64_t height, int64_t width) {
        LayerSpec s;
        s.kind = LayerKind::Input;
        s.out_channels = channels;
        s.in_height = height;
        s.in_width = width;
        graph_.inputs.push_back(id);
        return push(id, s, {});
    }

    std::string conv(const std::string& id, const std::string& in, int64_t out_channels,
                     int kernel, int stride, int pad, int dilation = 1, int groups = 1,
                     bool bias = false) {
        LayerSpec s;
        s.kind = groups > 1 ? LayerKind::GroupedConv : LayerKind::Conv;
        s.kernel_h = s.kernel_w = kernel;
        s.stride_h = s.stride_w = stride;
        s.pad_h = s.pad_w = pad;
        s.dilation = dilation;
        s.out_channels = out_channels;
        s.groups = groups;
        s.has_bias = bias;
        return push(id, s, {in});
    }

    std::string depthwise(const std::string& id, const std::string& in, int64_t channels,
                          int kernel, int stride, int pad, int dilation = 1) {
        LayerSpec s;
        s.kind = LayerKind::DepthwiseConv;
        s.kernel_h = s.kernel_w = kernel;
        s.stride_h = s.stride_w = stride;
        s.pad_h = s.pad_w = pad;
        s.dilation = dilation;
        s.out_channels = channels;
        return push(id, s, {in});
    }

    std::string transposed(const std::string& id, const std::string& in, int64_t out_channels,
                           int kernel, int stride, int pad, bool bias = false,
                           const std::string& size_ref = "") {
        LayerSpec s;
        s.kind = LayerKind::TransposedConv;
        s.kernel_h = s.kernel_w = kernel;
        s.stride_h = s.stride_w = stride;
        s.pad_h = s.pad_w = pad;
        s.out_channels = out_channels;
        s.has_bias = bias;
        return push(id, s, {in}, size_ref);
    }

    std::string max_pool(const std::string& id, const std::string& in, int kernel, int stride,
                         int pad) {
        return pool(id, in, LayerKind::MaxPool, kernel, stride, pad);
    }

    std::string avg_pool(const std::string& id, const std::string& in, int kernel, int stride,
                         int pad) {
        return pool(id, in, LayerKind::AvgPool, kernel, stride, pad);
    }

    std::string batchnorm(const std::string& id, const std::string& in) {
        LayerSpec s;
        s.kind = LayerKind::BatchNorm;
        return push(id, s, {in});
    }

    std::string relu(const std::string& id, const std::string& in) {
        LayerSpec s;
        s.kind = LayerKind::Relu;
        return push(id, s, {in});
    }

    std::string add(const std::string& id, const std::vector<std::string>& ins) {
        LayerSpec s;
        s.kind = LayerKind::Add;
        return push(id, s, ins);
    }

    std::string concat(const std::string& id, const std::vector<std::string>& ins) {
        LayerSpec s;
        s.kind = LayerKind::Concat;
        return push(id, s, ins);
    }

    std::string channel_shuffle(const std::string& id, const std::string& in, int groups) {
        LayerSpec s;
        s.kind = LayerKind::ChannelShuffle;
        s.groups = groups;
        return push(id, s, {in});
    }

    std::string resize(const std::string& id, const std::string& in, int scale,
                       const std::string& size_ref = "") {
        LayerSpec s;
        s.kind = LayerKind::BilinearResize;
        s.scale = scale;
        return push(id, s, {in}, size_ref);
    }

    std::string global_pool(const std::string& id, const std::string& in) {
        LayerSpec s;
        s.kind = LayerKind::GlobalPool;
        return push(id, s, {in});
    }

    /// conv -> batchnorm -> relu, nodes named <id>, <id>_bn, <id>_relu.
    std::string conv_bn_relu(const std::string& id, const std::string& in, int64_t out_channels,
                             int kernel, int stride, int pad, int dilation = 1, int groups = 1) {
        return relu(id + "_relu", batchnorm(id + "_bn", conv(id, in, out_channels, kernel, stride,
                                                             pad, dilation, groups, false)));
    }

    NetworkGraph take(const std::vector<std::string>& outputs) {
        graph_.outputs = outputs;
        return std::move(graph_);
    }

private:
    std::string pool(const std::string& id, const std::string& in, LayerKind kind, int kernel,
                     int stride, int pad) {
        LayerSpec s;
        s.kind = kind;
        s.kernel_h = s.kernel_w = kernel;
        s.stride_h = s.stride_w = stride;
        s.pad_h = s.pad_w = pad;
        return push(id, s, {in});
    }

    std::string push(const std::string& id, const LayerSpec& spec,
                     const std::vector<std::string>& ins, const std::string& size_ref = "") {
        GraphNode n;
        n.id = id;
        n.spec = spec;
        n.inputs = ins;
        if (!size_ref.empty()) n.size_ref = size_ref;
        graph_.nodes.push_back(std::move(n));
        return id;
    }

    NetworkGraph graph_;
};

}  // namespace segbench
