// Copyright (c) 2026 segbench contributors
// SPDX-License-Identifier: Apache-2.0
//
// Reference executor for the graph IR: forward with stored activations and
// reverse-mode backward filling parameter gradients. Single input node,
// single output node, deterministic given the init seed.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "segbench/graph.hpp"
#include "segbench/tensor.hpp"

namespace segbench {

class Executor {
public:
    /// Allocates and initializes parameters: He fan-in for convs, bilinear
    /// interpolation for channel-preserving transposed convs, ones/zeros for
    /// batchnorm. Parameter shapes come from the graph's declared input.
    explicit Executor(const NetworkGraph& graph, uint64_t seed = 0);

    /// Runs the graph on `input` (batch and spatial size free, channels
    /// fixed). `training` selects batch statistics in batchnorm.
    const Tensor& forward(const Tensor& input, bool training);

    /// Reverse pass from d(loss)/d(output); parameter gradients are zeroed
    /// and refilled. Requires a preceding forward() on the same batch.
    void backward(const Tensor& output_grad);

    const Tensor& output() const;
    const Tensor& activation(const std::string& node_id) const;

    // Parameters are trainable; buffers hold batchnorm running statistics.
    std::map<std::string, Tensor>& parameters() { return params_; }
    const std::map<std::string, Tensor>& parameters() const { return params_; }
    std::map<std::string, Tensor>& buffers() { return buffers_; }
    const std::map<std::string, Tensor>& buffers() const { return buffers_; }
    std::map<std::string, Tensor>& gradients() { return grads_; }

    /// Conv / transposed-conv kernels; the set L2 decay applies to.
    bool is_decay_parameter(const std::string& name) const;

    int64_t parameter_count() const;

private:
    struct NodeState;
    void init_parameters(uint64_t seed);

    NetworkGraph graph_;
    std::vector<std::string> order_;                 // topological
    std::map<std::string, TensorShape> decl_shapes_; // at declared input size
    std::map<std::string, Tensor> params_;
    std::map<std::string, Tensor> buffers_;
    std::map<std::string, Tensor> grads_;
    std::map<std::string, Tensor> acts_;
    std::map<std::string, Tensor> act_grads_;
    // per-node scratch saved by forward for backward (pool argmax, batchnorm
    // statistics, transposed-conv raw extents)
    std::map<std::string, std::vector<double>> saved_stats_;
    std::map<std::string, std::vector<int64_t>> saved_idx_;
    bool training_mode_ = false;
    std::string input_id_;
};

/// He/bilinear initialization used by Executor, exposed for tests.
void bilinear_fill(Tensor& weight, int stride);

}  // namespace segbench
