// Copyright (c) 2026 segbench contributors
// SPDX-License-Identifier: Apache-2.0
//
// Declarative graph IR for convolutional networks: layer specs, shape
// inference, structural validation, stride/receptive-field arithmetic and a
// line-oriented text serialization. Encoders and decoders are composed as
// plain node lists; execution lives elsewhere.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace segbench {

struct TensorShape {
    int64_t batch = 1;
    int64_t channels = 1;
    int64_t height = 1;
    int64_t width = 1;

    int64_t elems() const { return batch * channels * height * width; }
    bool operator==(const TensorShape&) const = default;
};

std::string to_string(const TensorShape& s);

enum class LayerKind {
    Input,
    Conv,
    DepthwiseConv,
    GroupedConv,
    TransposedConv,
    MaxPool,
    AvgPool,
    BatchNorm,
    Relu,
    Add,
    Concat,
    ChannelShuffle,
    BilinearResize,
    GlobalPool,
};

const char* kind_name(LayerKind k);
LayerKind kind_from_name(const std::string& name);
bool is_conv_family(LayerKind k);  // conv / depthwise / grouped / transposed

/// One node's layer parameters. Fields that do not apply to a kind are left
/// at their defaults and ignored (and flagged by validation when set
/// inconsistently, e.g. dilation on a pool).
struct LayerSpec {
    LayerKind kind = LayerKind::Conv;
    int kernel_h = 1, kernel_w = 1;
    int stride_h = 1, stride_w = 1;
    int pad_h = 0, pad_w = 0;
    int dilation = 1;
    int64_t out_channels = 0;  // conv family; Input uses it for channel count
    int groups = 1;            // grouped/channel-shuffle; depthwise derives groups = in_channels
    bool has_bias = false;
    int scale = 0;             // bilinear-resize upscale factor when no size_ref is given
    // Input nodes declare their canonical spatial size so a graph is
    // shape-checkable standalone; cost/eval may override it.
    int64_t in_height = 0, in_width = 0;
};

struct GraphNode {
    std::string id;
    LayerSpec spec;
    std::vector<std::string> inputs;
    // Upsampling nodes (transposed-conv, bilinear-resize) may name another
    // node whose inferred spatial size fixes their output size; the raw
    // arithmetic result is cropped/padded to it. This is how decoders stay
    // consistent at resolutions where downsampling rounds (e.g. 360x640).
    std::optional<std::string> size_ref;
};

struct NetworkGraph {
    std::vector<GraphNode> nodes;       // construction order, not necessarily topological
    std::vector<std::string> inputs;    // ids of Input nodes
    std::vector<std::string> outputs;

    const GraphNode* find(const std::string& id) const;
    const GraphNode& at(const std::string& id) const;  // throws if missing
    bool contains(const std::string& id) const { return find(id) != nullptr; }
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Single-layer shape inference. `ref_shape` carries the resolved size_ref
/// shape when the node has one. Throws ShapeError on mismatches
/// (elementwise-add with unequal inputs, group divisibility, ...).
TensorShape infer_shape(const LayerSpec& layer,
                        const std::vector<TensorShape>& input_shapes,
                        const std::optional<TensorShape>& ref_shape = std::nullopt);

/// Whole-graph shape inference in topological order. `input_override`
/// replaces the declared spatial size of every Input node (channel count is
/// taken from the override as well). Throws on structural or shape errors.
std::map<std::string, TensorShape> infer_all_shapes(
    const NetworkGraph& graph,
    const std::optional<TensorShape>& input_override = std::nullopt);

struct Violation {
    std::string node_id;
    std::string kind;  // "cycle", "dangling-input", "shape-mismatch", ...
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string summary() const;
};

/// Collect-all structural validation: duplicate ids, dangling references,
/// cycles, unreachable nodes, per-node shape inference failures at the
/// declared input size. Violations are data; this never throws.
ValidationReport validate_graph(const NetworkGraph& graph);

/// Cumulative downsampling factor from the graph input to `node_id`.
/// Strided convs and pools multiply it, transposed convs divide it. Throws
/// if two paths disagree or a transposed conv stride does not divide it.
int effective_stride(const NetworkGraph& graph, const std::string& node_id);

/// Receptive field extent (rf_h, rf_w) of one output pixel at `node_id`.
/// A layer contributes dilation*(k-1) scaled by the accumulated jump; fusion
/// nodes take the max over their inputs.
std::pair<int64_t, int64_t> receptive_field(const NetworkGraph& graph,
                                            const std::string& node_id);

/// Topological order over data and size_ref edges. Throws on cycles.
std::vector<std::string> topological_order(const NetworkGraph& graph);

// Text format: one `id kind key=value... inputs=[a,b]` line per node in
// order, then a final `outputs=[...]` line. Round-trips losslessly.
std::string to_text(const NetworkGraph& graph);
NetworkGraph graph_from_text(const std::string& text);

}  // namespace segbench
