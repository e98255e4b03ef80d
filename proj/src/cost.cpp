// Copyright (c) 2026 segbench contributors
// SPDX-License-Identifier: Apache-2.0

#include "segbench/cost.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace segbench {

namespace {

int64_t spatial(const TensorShape& s) { return s.batch * s.height * s.width; }

std::string format_gflops(double v) {
    if (std::isnan(v)) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

LayerCost layer_cost(const LayerSpec& layer, const std::vector<TensorShape>& input_shapes,
                     const std::optional<TensorShape>& ref_shape) {
    LayerCost c;
    if (layer.kind == LayerKind::Input) {
        c.activation_elems = input_shapes.empty()
                                 ? layer.out_channels * layer.in_height * layer.in_width
                                 : input_shapes.front().elems();
        return c;
    }
    TensorShape out = infer_shape(layer, input_shapes, ref_shape);
    const TensorShape& in = input_shapes.front();
    c.activation_elems = out.elems();

    switch (layer.kind) {
        case LayerKind::Conv:
        case LayerKind::DepthwiseConv:
        case LayerKind::GroupedConv: {
            int64_t g = layer.kind == LayerKind::DepthwiseConv ? in.channels : layer.groups;
            int64_t k = static_cast<int64_t>(layer.kernel_h) * layer.kernel_w;
            c.macs = spatial(out) * out.channels * (k * in.channels / g);
            c.flops = 2 * c.macs;
            c.params = k * in.channels * out.channels / g + (layer.has_bias ? out.channels : 0);
            break;
        }
        case LayerKind::TransposedConv: {
            // Every input element scatters into k*k output taps, so the MAC
            // count is input-based and unaffected by size_ref crop/pad.
            int64_t g = layer.groups;
            int64_t k = static_cast<int64_t>(layer.kernel_h) * layer.kernel_w;
            c.macs = spatial(in) * in.channels * (k * out.channels / g);
            c.flops = 2 * c.macs;
            c.params = k * in.channels * out.channels / g + (layer.has_bias ? out.channels : 0);
            break;
        }
        case LayerKind::MaxPool:
        case LayerKind::AvgPool:
            c.flops = out.elems() * layer.kernel_h * layer.kernel_w;
            break;
        case LayerKind::GlobalPool:
            c.flops = in.elems();
            break;
        case LayerKind::BatchNorm:
            c.flops = 2 * out.elems();
            c.params = 2 * out.channels;
            break;
        case LayerKind::Relu:
            c.flops = out.elems();
            break;
        case LayerKind::Add:
            c.flops = static_cast<int64_t>(input_shapes.size() - 1) * out.elems();
            break;
        case LayerKind::BilinearResize:
            c.flops = 4 * out.elems();
            break;
        case LayerKind::Concat:
        case LayerKind::ChannelShuffle:
            break;  // data movement only
        case LayerKind::Input:
            break;
    }
    return c;
}

CostReport network_cost(const NetworkGraph& graph, const TensorShape& input_shape,
                        const std::string& model_id) {
    CostReport report;
    report.model_id = model_id;
    report.input = input_shape;

    auto shapes = infer_all_shapes(graph, input_shape);
    for (const auto& id : topological_order(graph)) {
        const GraphNode& node = graph.at(id);
        std::vector<TensorShape> ins;
        for (const auto& in : node.inputs) ins.push_back(shapes.at(in));
        std::optional<TensorShape> ref;
        if (node.size_ref) ref = shapes.at(*node.size_ref);
        if (node.spec.kind == LayerKind::Input) ins.push_back(shapes.at(id));
        CostRow row{id, kind_name(node.spec.kind), layer_cost(node.spec, ins, ref)};
        report.totals += row.cost;
        report.layers.push_back(std::move(row));
    }
    return report;
}

std::string cost_report_csv(const CostReport& report) {
    std::ostringstream os;
    os << "layer_id,kind,macs,flops,params,activation_elems\n";
    for (const auto& row : report.layers)
        os << row.layer_id << "," << row.kind << "," << row.cost.macs << "," << row.cost.flops
           << "," << row.cost.params << "," << row.cost.activation_elems << "\n";
    os << "total,," << report.totals.macs << "," << report.totals.flops << ","
       << report.totals.params << "," << report.totals.activation_elems << "\n";
    return os.str();
}

double ComparisonTable::ratio(const std::string& a, const std::string& b) const {
    const ComparisonRow* ra = nullptr;
    const ComparisonRow* rb = nullptr;
    for (const auto& r : rows) {
        if (r.model == a) ra = &r;
        if (r.model == b) rb = &r;
    }
    if (!ra || !rb) throw std::invalid_argument("ratio: unknown model name");
    return ra->gflops / rb->gflops;
}

ComparisonTable compare_models(const std::vector<CostReport>& reports,
                               const std::vector<ExternalReference>& externals) {
    ComparisonTable table;
    if (!reports.empty()) table.resolution = reports.front().input;
    for (const auto& r : reports) {
        if (r.input.height != table.resolution.height || r.input.width != table.resolution.width)
            throw std::invalid_argument("compare_models: reports mix input resolutions");
        table.rows.push_back({r.model_id, r.gflops(), r.totals.params, false, 0.0});
    }
    for (const auto& e : externals)
        table.rows.push_back({e.model, e.gflops, 0, true, 0.0});

    std::stable_sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
        bool na = std::isnan(a.gflops), nb = std::isnan(b.gflops);
        if (na != nb) return nb;  // unknown figures go last
        if (na && nb) return false;
        return a.gflops < b.gflops;
    });
    double smallest = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : table.rows)
        if (!std::isnan(r.gflops)) {
            smallest = r.gflops;
            break;
        }
    for (auto& r : table.rows)
        r.ratio_to_smallest = std::isnan(r.gflops) ? std::numeric_limits<double>::quiet_NaN()
                                                   : r.gflops / smallest;
    return table;
}

std::string comparison_csv(const ComparisonTable& table, const std::string& provenance) {
    std::ostringstream os;
    os << "# resolution=" << table.resolution.height << "x" << table.resolution.width
       << " convention=" << table.convention;
    if (!provenance.empty()) os << " version=" << provenance;
    os << "\n";
    os << "model,gflops,params,ratio_to_smallest,source\n";
    for (const auto& r : table.rows) {
        os << r.model << "," << format_gflops(r.gflops) << ",";
        if (r.external)
            os << "-";
        else
            os << r.params;
        os << "," << format_gflops(r.ratio_to_smallest) << ","
           << (r.external ? "external" : "computed") << "\n";
    }
    return os.str();
}

std::string comparison_markdown(const ComparisonTable& table, const std::string& provenance) {
    std::ostringstream os;
    os << "| Model | GFLOPs | Class IoU | Class iIoU | Category IoU | Category iIoU |\n";
    os << "|---|---|---|---|---|---|\n";
    for (const auto& r : table.rows) {
        os << "| " << r.model << " | " << format_gflops(r.gflops)
           << " | - | - | - | - |\n";
    }
    os << "\nGFLOPs at " << table.resolution.height << "x" << table.resolution.width << ", "
       << table.convention;
    if (!provenance.empty()) os << ", " << provenance;
    os << ". External rows are imported reference figures.\n";
    return os.str();
}

}  // namespace segbench
