// Copyright (c) 2026 segbench contributors
// SPDX-License-Identifier: Apache-2.0

#include "segbench/graph.hpp"

#include <algorithm>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace segbench {

std::string to_string(const TensorShape& s) {
    std::ostringstream os;
    os << "(" << s.batch << "," << s.channels << "," << s.height << "," << s.width << ")";
    return os.str();
}

namespace {

struct KindEntry {
    LayerKind kind;
    const char* name;
};

constexpr KindEntry kKindTable[] = {
    {LayerKind::Input, "input"},
    {LayerKind::Conv, "conv"},
    {LayerKind::DepthwiseConv, "depthwise-conv"},
    {LayerKind::GroupedConv, "grouped-conv"},
    {LayerKind::TransposedConv, "transposed-conv"},
    {LayerKind::MaxPool, "max-pool"},
    {LayerKind::AvgPool, "avg-pool"},
    {LayerKind::BatchNorm, "batchnorm"},
    {LayerKind::Relu, "relu"},
    {LayerKind::Add, "elementwise-add"},
    {LayerKind::Concat, "concat"},
    {LayerKind::ChannelShuffle, "channel-shuffle"},
    {LayerKind::BilinearResize, "bilinear-resize"},
    {LayerKind::GlobalPool, "global-pool"},
};

}  // namespace

const char* kind_name(LayerKind k) {
    for (const auto& e : kKindTable)
        if (e.kind == k) return e.name;
    return "?";
}

LayerKind kind_from_name(const std::string& name) {
    for (const auto& e : kKindTable)
        if (name == e.name) return e.kind;
    throw std::invalid_argument("unknown layer kind: " + name);
}

bool is_conv_family(LayerKind k) {
    return k == LayerKind::Conv || k == LayerKind::DepthwiseConv ||
           k == LayerKind::GroupedConv || k == LayerKind::TransposedConv;
}

const GraphNode* NetworkGraph::find(const std::string& id) const {
    for (const auto& n : nodes)
        if (n.id == id) return &n;
    return nullptr;
}

const GraphNode& NetworkGraph::at(const std::string& id) const {
    const GraphNode* n = find(id);
    if (!n) throw std::out_of_range("no such node: " + id);
    return *n;
}

namespace {

int64_t conv_out_dim(int64_t in, int pad, int dilation, int kernel, int stride) {
    int64_t eff = static_cast<int64_t>(dilation) * (kernel - 1) + 1;
    int64_t out = (in + 2 * pad - eff) / stride + 1;
    return out;
}

int groups_of(const LayerSpec& layer, int64_t in_channels) {
    if (layer.kind == LayerKind::DepthwiseConv) return static_cast<int>(in_channels);
    return layer.groups;
}

}  // namespace

TensorShape infer_shape(const LayerSpec& layer,
                        const std::vector<TensorShape>& input_shapes,
                        const std::optional<TensorShape>& ref_shape) {
    if (layer.kind == LayerKind::Input) {
        return TensorShape{1, layer.out_channels, layer.in_height, layer.in_width};
    }
    if (input_shapes.empty()) throw ShapeError("layer has no inputs");
    const TensorShape& in = input_shapes.front();
    if (in.channels < 1 || in.height < 1 || in.width < 1)
        throw ShapeError("invalid input shape " + to_string(in));

    auto sized = [&](TensorShape out) {
        // size_ref overrides the arithmetic result; the executor crops or
        // zero-pads the boundary rows/cols to match.
        if (ref_shape) {
            if (std::abs(out.height - ref_shape->height) >= layer.stride_h + layer.kernel_h ||
                std::abs(out.width - ref_shape->width) >= layer.stride_w + layer.kernel_w)
                throw ShapeError("size_ref too far from arithmetic output: " + to_string(out) +
                                 " vs " + to_string(*ref_shape));
            out.height = ref_shape->height;
            out.width = ref_shape->width;
        }
        return out;
    };

    switch (layer.kind) {
        case LayerKind::Conv:
        case LayerKind::DepthwiseConv:
        case LayerKind::GroupedConv: {
            int g = groups_of(layer, in.channels);
            if (g < 1) throw ShapeError("groups must be >= 1");
            if (in.channels % g != 0 || layer.out_channels % g != 0)
                throw ShapeError("groups=" + std::to_string(g) + " does not divide channels " +
                                 std::to_string(in.channels) + "->" + std::to_string(layer.out_channels));
            int64_t oh = conv_out_dim(in.height, layer.pad_h, layer.dilation, layer.kernel_h, layer.stride_h);
            int64_t ow = conv_out_dim(in.width, layer.pad_w, layer.dilation, layer.kernel_w, layer.stride_w);
            if (oh < 1 || ow < 1) throw ShapeError("conv output collapses to zero size");
            return TensorShape{in.batch, layer.out_channels, oh, ow};
        }
        case LayerKind::TransposedConv: {
            int g = layer.groups;
            if (in.channels % g != 0 || layer.out_channels % g != 0)
                throw ShapeError("transposed-conv group divisibility violated");
            int64_t oh = (in.height - 1) * layer.stride_h - 2 * layer.pad_h + layer.kernel_h;
            int64_t ow = (in.width - 1) * layer.stride_w - 2 * layer.pad_w + layer.kernel_w;
            if (oh < 1 || ow < 1) throw ShapeError("transposed-conv output collapses to zero size");
            return sized(TensorShape{in.batch, layer.out_channels, oh, ow});
        }
        case LayerKind::MaxPool:
        case LayerKind::AvgPool: {
            if (layer.dilation != 1) throw ShapeError("dilation > 1 only valid for conv kinds");
            int64_t oh = conv_out_dim(in.height, layer.pad_h, 1, layer.kernel_h, layer.stride_h);
            int64_t ow = conv_out_dim(in.width, layer.pad_w, 1, layer.kernel_w, layer.stride_w);
            if (oh < 1 || ow < 1) throw ShapeError("pool output collapses to zero size");
            return TensorShape{in.batch, in.channels, oh, ow};
        }
        case LayerKind::BatchNorm:
        case LayerKind::Relu:
            return in;
        case LayerKind::Add: {
            for (const auto& s : input_shapes)
                if (!(s == in))
                    throw ShapeError("elementwise-add inputs differ: " + to_string(in) + " vs " +
                                     to_string(s));
            if (input_shapes.size() < 2) throw ShapeError("elementwise-add needs >= 2 inputs");
            return in;
        }
        case LayerKind::Concat: {
            if (input_shapes.size() < 2) throw ShapeError("concat needs >= 2 inputs");
            int64_t c = 0;
            for (const auto& s : input_shapes) {
                if (s.batch != in.batch || s.height != in.height || s.width != in.width)
                    throw ShapeError("concat spatial mismatch: " + to_string(in) + " vs " + to_string(s));
                c += s.channels;
            }
            return TensorShape{in.batch, c, in.height, in.width};
        }
        case LayerKind::ChannelShuffle: {
            if (layer.groups < 1 || in.channels % layer.groups != 0)
                throw ShapeError("channel-shuffle groups must divide channels");
            return in;
        }
        case LayerKind::BilinearResize: {
            if (ref_shape)
                return TensorShape{in.batch, in.channels, ref_shape->height, ref_shape->width};
            if (layer.scale < 1) throw ShapeError("bilinear-resize needs scale or size_ref");
            return TensorShape{in.batch, in.channels, in.height * layer.scale, in.width * layer.scale};
        }
        case LayerKind::GlobalPool:
            return TensorShape{in.batch, in.channels, 1, 1};
        case LayerKind::Input:
            break;
    }
    throw ShapeError("unhandled layer kind");
}

std::vector<std::string> topological_order(const NetworkGraph& graph) {
    std::unordered_map<std::string, size_t> index;
    for (size_t i = 0; i < graph.nodes.size(); ++i) {
        if (index.count(graph.nodes[i].id))
            throw std::invalid_argument("duplicate node id: " + graph.nodes[i].id);
        index[graph.nodes[i].id] = i;
    }
    std::unordered_map<std::string, int> indegree;
    std::unordered_map<std::string, std::vector<std::string>> consumers;
    for (const auto& n : graph.nodes) {
        int deg = 0;
        auto edge = [&](const std::string& src) {
            if (!index.count(src)) throw std::invalid_argument("dangling input: " + src);
            consumers[src].push_back(n.id);
            ++deg;
        };
        for (const auto& in : n.inputs) edge(in);
        if (n.size_ref) edge(*n.size_ref);
        indegree[n.id] = deg;
    }
    // Kahn's algorithm, seeded in node order so the result is deterministic.
    std::vector<std::string> ready, order;
    for (const auto& n : graph.nodes)
        if (indegree[n.id] == 0) ready.push_back(n.id);
    size_t head = 0;
    while (head < ready.size()) {
        std::string id = ready[head++];
        order.push_back(id);
        for (const auto& c : consumers[id])
            if (--indegree[c] == 0) ready.push_back(c);
    }
    if (order.size() != graph.nodes.size()) throw std::invalid_argument("graph contains a cycle");
    return order;
}

std::map<std::string, TensorShape> infer_all_shapes(
    const NetworkGraph& graph, const std::optional<TensorShape>& input_override) {
    std::map<std::string, TensorShape> shapes;
    for (const auto& id : topological_order(graph)) {
        const GraphNode& node = graph.at(id);
        if (node.spec.kind == LayerKind::Input) {
            TensorShape s{1, node.spec.out_channels, node.spec.in_height, node.spec.in_width};
            if (input_override) s = *input_override;
            if (s.channels < 1 || s.height < 1 || s.width < 1)
                throw ShapeError("input node " + id + " has no usable size");
            shapes[id] = s;
            continue;
        }
        std::vector<TensorShape> ins;
        ins.reserve(node.inputs.size());
        for (const auto& in : node.inputs) ins.push_back(shapes.at(in));
        std::optional<TensorShape> ref;
        if (node.size_ref) ref = shapes.at(*node.size_ref);
        try {
            shapes[id] = infer_shape(node.spec, ins, ref);
        } catch (const ShapeError& e) {
            throw ShapeError(std::string(e.what()) + " (at node " + id + ")");
        }
    }
    return shapes;
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& v : violations) os << v.kind << " @ " << v.node_id << ": " << v.message << "\n";
    return os.str();
}

ValidationReport validate_graph(const NetworkGraph& graph) {
    ValidationReport report;
    auto flag = [&](const std::string& node, const std::string& kind, const std::string& msg) {
        report.violations.push_back({node, kind, msg});
    };

    std::unordered_set<std::string> ids;
    for (const auto& n : graph.nodes) {
        if (!ids.insert(n.id).second) flag(n.id, "duplicate-id", "node id declared twice");
    }
    bool structure_ok = true;
    for (const auto& n : graph.nodes) {
        for (const auto& in : n.inputs)
            if (!ids.count(in)) {
                flag(n.id, "dangling-input", "references missing node " + in);
                structure_ok = false;
            }
        if (n.size_ref && !ids.count(*n.size_ref)) {
            flag(n.id, "dangling-input", "size_ref names missing node " + *n.size_ref);
            structure_ok = false;
        }
        if (n.spec.kind == LayerKind::Input && !n.inputs.empty())
            flag(n.id, "bad-input-node", "input node must not consume other nodes");
        if (n.spec.kind != LayerKind::Input && n.inputs.empty())
            flag(n.id, "no-inputs", "non-input node has no inputs");
        if (n.size_ref && n.spec.kind != LayerKind::TransposedConv &&
            n.spec.kind != LayerKind::BilinearResize)
            flag(n.id, "bad-size-ref", "size_ref only valid on upsampling layers");
        if (n.spec.dilation > 1 && !is_conv_family(n.spec.kind))
            flag(n.id, "bad-dilation", "dilation > 1 only valid for conv kinds");
    }
    for (const auto& in : graph.inputs)
        if (!ids.count(in)) flag(in, "dangling-input", "declared graph input does not exist");
    for (const auto& out : graph.outputs)
        if (!ids.count(out)) flag(out, "dangling-output", "declared graph output does not exist");
    if (!structure_ok) return report;

    try {
        topological_order(graph);
    } catch (const std::exception& e) {
        flag("", "cycle", e.what());
        return report;
    }

    // Reachability over data edges only.
    std::unordered_set<std::string> reachable(graph.inputs.begin(), graph.inputs.end());
    for (const auto& n : graph.nodes)
        if (n.spec.kind == LayerKind::Input) reachable.insert(n.id);
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& n : graph.nodes) {
            if (reachable.count(n.id) || n.inputs.empty()) continue;
            bool all = std::all_of(n.inputs.begin(), n.inputs.end(),
                                   [&](const std::string& in) { return reachable.count(in) > 0; });
            if (all) {
                reachable.insert(n.id);
                grew = true;
            }
        }
    }
    for (const auto& n : graph.nodes)
        if (!reachable.count(n.id)) flag(n.id, "unreachable", "not reachable from any input");

    // Per-node shape checks at the declared input size; every node gets its
    // own violation entry rather than aborting on the first failure.
    std::map<std::string, TensorShape> shapes;
    for (const auto& id : topological_order(graph)) {
        const GraphNode& node = graph.at(id);
        std::vector<TensorShape> ins;
        bool have_all = true;
        for (const auto& in : node.inputs) {
            auto it = shapes.find(in);
            if (it == shapes.end()) {
                have_all = false;
                break;
            }
            ins.push_back(it->second);
        }
        std::optional<TensorShape> ref;
        if (node.size_ref) {
            auto it = shapes.find(*node.size_ref);
            if (it == shapes.end())
                have_all = false;
            else
                ref = it->second;
        }
        if (!have_all) continue;
        try {
            shapes[id] = infer_shape(node.spec, ins, ref);
        } catch (const ShapeError& e) {
            flag(id, "shape-mismatch", e.what());
        }
    }
    return report;
}

namespace {

// Stride and receptive-field walks share the same memoized recursion over
// data edges.
struct PathInfo {
    int64_t stride = 1;
    int64_t rf_h = 1, rf_w = 1;
};

PathInfo walk(const NetworkGraph& graph, const std::string& id,
              std::unordered_map<std::string, PathInfo>& memo) {
    auto it = memo.find(id);
    if (it != memo.end()) return it->second;
    const GraphNode& node = graph.at(id);
    PathInfo info;
    if (node.spec.kind == LayerKind::Input) {
        memo[id] = info;
        return info;
    }
    bool first = true;
    for (const auto& in : node.inputs) {
        PathInfo p = walk(graph, in, memo);
        if (first) {
            info = p;
            first = false;
        } else {
            if (p.stride != info.stride)
                throw std::runtime_error("inconsistent strides at node " + id + ": " +
                                         std::to_string(p.stride) + " vs " +
                                         std::to_string(info.stride));
            info.rf_h = std::max(info.rf_h, p.rf_h);
            info.rf_w = std::max(info.rf_w, p.rf_w);
        }
    }
    const LayerSpec& s = node.spec;
    switch (s.kind) {
        case LayerKind::Conv:
        case LayerKind::DepthwiseConv:
        case LayerKind::GroupedConv:
        case LayerKind::MaxPool:
        case LayerKind::AvgPool: {
            info.rf_h += static_cast<int64_t>(s.dilation) * (s.kernel_h - 1) * info.stride;
            info.rf_w += static_cast<int64_t>(s.dilation) * (s.kernel_w - 1) * info.stride;
            info.stride *= s.stride_h;
            break;
        }
        case LayerKind::TransposedConv: {
            if (info.stride % s.stride_h != 0)
                throw std::runtime_error("transposed-conv stride " + std::to_string(s.stride_h) +
                                         " does not divide path stride " +
                                         std::to_string(info.stride) + " at node " + id);
            info.stride /= s.stride_h;
            info.rf_h += static_cast<int64_t>(s.kernel_h - 1) * info.stride;
            info.rf_w += static_cast<int64_t>(s.kernel_w - 1) * info.stride;
            break;
        }
        case LayerKind::BilinearResize: {
            if (s.scale >= 1) {
                if (info.stride % s.scale != 0)
                    throw std::runtime_error("resize scale does not divide path stride at " + id);
                info.stride /= s.scale;
            } else if (node.size_ref) {
                PathInfo r = walk(graph, *node.size_ref, memo);
                info.stride = r.stride;
            }
            break;
        }
        case LayerKind::GlobalPool:
            // Collapses the spatial extent; stride bookkeeping stops making
            // sense past this point, keep it unchanged.
            break;
        default:
            break;
    }
    memo[id] = info;
    return info;
}

}  // namespace

int effective_stride(const NetworkGraph& graph, const std::string& node_id) {
    std::unordered_map<std::string, PathInfo> memo;
    return static_cast<int>(walk(graph, node_id, memo).stride);
}

std::pair<int64_t, int64_t> receptive_field(const NetworkGraph& graph,
                                            const std::string& node_id) {
    std::unordered_map<std::string, PathInfo> memo;
    PathInfo p = walk(graph, node_id, memo);
    return {p.rf_h, p.rf_w};
}

// ---------------------------------------------------------------------------
// Text serialization

namespace {

void append_kv(std::ostringstream& os, const LayerSpec& s) {
    if (s.kind == LayerKind::Input) {
        os << " out=" << s.out_channels << " h=" << s.in_height << " w=" << s.in_width;
        return;
    }
    if (is_conv_family(s.kind) || s.kind == LayerKind::MaxPool || s.kind == LayerKind::AvgPool) {
        os << " k=" << s.kernel_h << "x" << s.kernel_w;
        os << " s=" << s.stride_h << "x" << s.stride_w;
        os << " p=" << s.pad_h << "x" << s.pad_w;
    }
    if (is_conv_family(s.kind)) {
        os << " d=" << s.dilation;
        os << " out=" << s.out_channels;
        os << " g=" << s.groups;
        os << " bias=" << (s.has_bias ? 1 : 0);
    }
    if (s.kind == LayerKind::ChannelShuffle) os << " g=" << s.groups;
    if (s.kind == LayerKind::BilinearResize && s.scale > 0) os << " scale=" << s.scale;
}

std::pair<int, int> parse_pair(const std::string& v) {
    auto x = v.find('x');
    if (x == std::string::npos) throw std::invalid_argument("expected AxB, got " + v);
    return {std::stoi(v.substr(0, x)), std::stoi(v.substr(x + 1))};
}

}  // namespace

std::string to_text(const NetworkGraph& graph) {
    std::ostringstream os;
    for (const auto& n : graph.nodes) {
        os << n.id << " " << kind_name(n.spec.kind);
        append_kv(os, n.spec);
        if (n.size_ref) os << " size_ref=" << *n.size_ref;
        os << " inputs=[";
        for (size_t i = 0; i < n.inputs.size(); ++i) os << (i ? "," : "") << n.inputs[i];
        os << "]\n";
    }
    os << "outputs=[";
    for (size_t i = 0; i < graph.outputs.size(); ++i) os << (i ? "," : "") << graph.outputs[i];
    os << "]\n";
    return os.str();
}

NetworkGraph graph_from_text(const std::string& text) {
    NetworkGraph graph;
    std::istringstream is(text);
    std::string line;
    auto parse_list = [](const std::string& v) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : v) {
            if (c == ',') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else if (c != '[' && c != ']') {
                cur += c;
            }
        }
        if (!cur.empty()) out.push_back(cur);
        return out;
    };
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string first;
        ls >> first;
        if (first.rfind("outputs=", 0) == 0) {
            graph.outputs = parse_list(first.substr(8));
            continue;
        }
        GraphNode node;
        node.id = first;
        std::string kind;
        ls >> kind;
        node.spec.kind = kind_from_name(kind);
        std::string tok;
        while (ls >> tok) {
            auto eq = tok.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("bad token: " + tok);
            std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
            LayerSpec& s = node.spec;
            if (key == "k") std::tie(s.kernel_h, s.kernel_w) = parse_pair(val);
            else if (key == "s") std::tie(s.stride_h, s.stride_w) = parse_pair(val);
            else if (key == "p") std::tie(s.pad_h, s.pad_w) = parse_pair(val);
            else if (key == "d") s.dilation = std::stoi(val);
            else if (key == "out") s.out_channels = std::stoll(val);
            else if (key == "g") s.groups = std::stoi(val);
            else if (key == "bias") s.has_bias = val != "0";
            else if (key == "scale") s.scale = std::stoi(val);
            else if (key == "h") s.in_height = std::stoll(val);
            else if (key == "w") s.in_width = std::stoll(val);
            else if (key == "size_ref") node.size_ref = val;
            else if (key == "inputs") node.inputs = parse_list(val);
            else throw std::invalid_argument("unknown key: " + key);
        }
        if (node.spec.kind == LayerKind::Input) graph.inputs.push_back(node.id);
        graph.nodes.push_back(std::move(node));
    }
    return graph;
}

}  // namespace segbench
