// Copyright (c) 2026 segbench contributors
// SPDX-License-Identifier: Apache-2.0
//
// Analytic MAC/FLOP/parameter/activation accounting for a graph at a given
// input resolution, plus model-vs-model comparison tables.
//
// Conventions, declared in every report:
//   - conv-family layers: flops = 2 * MACs
//   - batchnorm 2 ops/elem (folded scale+shift), relu/add 1 op/elem,
//     pooling one op per window element, bilinear resize 4 ops per output
//     element; pure data movement (concat, channel-shuffle) is free.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segbench/graph.hpp"

namespace segbench {

inline constexpr const char* kFlopsConvention = "flops=2xMAC";

struct LayerCost {
    int64_t macs = 0;
    int64_t flops = 0;
    int64_t params = 0;
    int64_t activation_elems = 0;

    LayerCost& operator+=(const LayerCost& o) {
        macs += o.macs;
        flops += o.flops;
        params += o.params;
        activation_elems += o.activation_elems;
        return *this;
    }
};

LayerCost layer_cost(const LayerSpec& layer, const std::vector<TensorShape>& input_shapes,
                     const std::optional<TensorShape>& ref_shape = std::nullopt);

inline LayerCost layer_cost(const LayerSpec& layer, const TensorShape& input_shape) {
    return layer_cost(layer, std::vector<TensorShape>{input_shape});
}

struct CostRow {
    std::string layer_id;
    std::string kind;
    LayerCost cost;
};

struct CostReport {
    std::string model_id;
    TensorShape input;
    std::vector<CostRow> layers;
    LayerCost totals;
    std::string convention = kFlopsConvention;

    double gflops() const { return static_cast<double>(totals.flops) / 1e9; }
    double gmacs() const { return static_cast<double>(totals.macs) / 1e9; }
};

/// Shape-infers every node at `input_shape` and sums per-layer costs.
CostReport network_cost(const NetworkGraph& graph, const TensorShape& input_shape,
                        const std::string& model_id = "");

/// CSV, one layer per line: layer_id,kind,macs,flops,params,activation_elems
/// with a trailing `total` row.
std::string cost_report_csv(const CostReport& report);

struct ComparisonRow {
    std::string model;
    double gflops = 0.0;       // NaN when unknown (external rows without a figure)
    int64_t params = 0;
    bool external = false;     // imported literal, never computed
    double ratio_to_smallest = 0.0;
};

struct ExternalReference {
    std::string model;
    double gflops = 0.0;  // NaN when the source does not report one
};

struct ComparisonTable {
    TensorShape resolution;
    std::string convention = kFlopsConvention;
    std::vector<ComparisonRow> rows;  // ascending GFLOPs, unknown figures last

    /// GFLOPs ratio between two named rows (a / b).
    double ratio(const std::string& a, const std::string& b) const;
};

/// All reports must share one resolution; throws std::invalid_argument on a
/// mixed-resolution input. External reference rows are appended verbatim.
ComparisonTable compare_models(const std::vector<CostReport>& reports,
                               const std::vector<ExternalReference>& externals = {});

std::string comparison_csv(const ComparisonTable& table, const std::string& provenance = "");
std::string comparison_markdown(const ComparisonTable& table, const std::string& provenance = "");

}  // namespace segbench
