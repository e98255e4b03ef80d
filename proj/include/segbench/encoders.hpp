// Copyright (c) 2026 segbench contributors
// SPDX-License-Identifier: Apache-2.0
//
// Feature-extraction backbones with named multi-resolution taps, plus the
// dilation conversion that turns a stride-32 trunk into a stride-8 one.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "segbench/graph.hpp"

namespace segbench {

struct Tap {
    std::string node;
    int64_t channels = 0;
};

struct EncoderDescriptor {
    std::string name;
    NetworkGraph graph;
    // Effective stride -> feature node decoders may fuse with. Stock
    // encoders expose all of {2,4,8,16,32}; dilation-converted ones stop
    // at 8 (their final node).
    std::map<int, Tap> taps;
    double width_multiplier = 1.0;  // MobileNet only
    int groups = 1;                 // ShuffleNet only

    const std::string& final_node() const { return graph.outputs.front(); }
    bool has_tap(int stride) const { return taps.count(stride) > 0; }
};

// Default input size used for the canonical (declared) graph resolution.
inline constexpr int64_t kDefaultInputHeight = 512;
inline constexpr int64_t kDefaultInputWidth = 1024;

/// 13-conv VGG16 (configuration D). Built without batchnorm in its origin
/// form; `batchnorm` defaults on for stable training from random init.
EncoderDescriptor build_vgg16(bool batchnorm = true);

/// ResNet-18: 7x7 stem, 4 stages of two basic blocks with identity adds and
/// 1x1 projection shortcuts at stage transitions.
EncoderDescriptor build_resnet18();

/// MobileNet v1: 3x3 stem then 13 depthwise-separable blocks. Channel counts
/// scale by `width_multiplier` (nearest integer, min 1).
EncoderDescriptor build_mobilenet(double width_multiplier = 1.0);

/// ShuffleNet v1 with `groups` in {1,2,3,4,8}. Stage widths follow the
/// origin table for the chosen group count.
EncoderDescriptor build_shufflenet(int groups = 3);

/// Shuffle permutation: output position j reads input channel perm[j], with
/// perm = flatten(transpose(reshape(0..n-1, g x n/g))).
std::vector<int> channel_shuffle_permutation(int channels, int groups);

/// Converts the two last downsampling transitions (8->16 and 16->32) to
/// stride 1: pools are removed, strided convs become stride 1, and convs in
/// the two affected stages get dilation 2 and 4. Parameters are untouched;
/// the result has final stride 8 and taps {2,4,8}.
EncoderDescriptor apply_dilation_conversion(const EncoderDescriptor& encoder);

/// Registered stock encoder names ("vgg16", "resnet18", "mobilenet",
/// "shufflenet") and name-based construction for the CLI.
std::vector<std::string> encoder_names();
EncoderDescriptor build_encoder(const std::string& name);

}  // namespace segbench
