// Copyright (c) 2026 segbench contributors
// SPDX-License-Identifier: Apache-2.0
//
// Decoder builders. Each one turns an EncoderDescriptor into a complete
// segmentation network producing per-class logits at input resolution.

#pragma once

#include <string>
#include <vector>

#include "segbench/encoders.hpp"
#include "segbench/graph.hpp"

namespace segbench {

struct SegmentationModel {
    std::string encoder_name;
    std::string decoder_name;
    NetworkGraph graph;
    int64_t num_classes = 20;

    std::string id() const { return decoder_name + "-" + encoder_name; }
};

inline constexpr int64_t kDefaultNumClasses = 20;  // 19 evaluated + ignore
inline constexpr int64_t kIgnoreClass = 19;

/// FCN-style label-space decoding: 1x1 score convs on the stride 8/16/32
/// taps, two x2 transposed convs with elementwise fusion, one final x8
/// transposed conv. All decoder channels equal num_classes.
SegmentationModel build_skipnet(const EncoderDescriptor& encoder,
                                int64_t num_classes = kDefaultNumClasses);

/// Stage-wise feature-space decoding: transposed conv x2 halving the channel
/// count per stage, elementwise fusion with the matching tap (1x1 projection
/// where widths differ), final 1x1 classifier. Encoders without a stride-2
/// tap finish with two stacked x2 transposed convs and no fusion.
SegmentationModel build_unet(const EncoderDescriptor& encoder,
                             int64_t num_classes = kDefaultNumClasses);

/// Dilation conversion of the encoder to stride 8, a 1x1 score conv, then
/// one x8 upsampling. `learned_upsample` swaps the default fixed bilinear
/// resize for a stride-8 transposed conv.
SegmentationModel build_dilation_frontend(const EncoderDescriptor& encoder,
                                          int64_t num_classes = kDefaultNumClasses,
                                          bool learned_upsample = false);

/// Cost-only comparison baseline: VGG16 trunk plus a mirrored 13-conv
/// decoder with x2 resize upsampling per stage. Never trained.
SegmentationModel build_segnet_reference(int64_t num_classes = kDefaultNumClasses);

std::vector<std::string> decoder_names();  // skipnet, unet, dilation
SegmentationModel build_model(const std::string& decoder, const EncoderDescriptor& encoder,
                              int64_t num_classes = kDefaultNumClasses);

}  // namespace segbench
