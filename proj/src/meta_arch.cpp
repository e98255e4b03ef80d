// Copyright (c) 2026 segbench contributors
// SPDX-License-Identifier: Apache-2.0

#include "segbench/meta_arch.hpp"

#include <stdexcept>

#include "segbench/builder.hpp"

namespace segbench {

namespace {

void require_tap(const EncoderDescriptor& enc, int stride) {
    if (!enc.has_tap(stride))
        throw std::runtime_error(enc.name + " has no tap at stride " + std::to_string(stride));
}

}  // namespace

SegmentationModel build_skipnet(const EncoderDescriptor& encoder, int64_t num_classes) {
    for (int s : {8, 16, 32}) require_tap(encoder, s);
    GraphBuilder b(encoder.graph);
    const std::string& image = encoder.graph.inputs.front();

    // Feature space -> label space, then all upsampling happens on
    // num_classes-channel heatmaps.
    auto score = [&](int stride) {
        return b.conv("score" + std::to_string(stride), encoder.taps.at(stride).node, num_classes,
                      1, 1, 0, 1, 1, /*bias=*/true);
    };
    std::string s32 = score(32), s16 = score(16), s8 = score(8);

    std::string x = b.transposed("up32", s32, num_classes, 4, 2, 1, false, s16);
    x = b.add("fuse16", {x, s16});
    x = b.transposed("up16", x, num_classes, 4, 2, 1, false, s8);
    x = b.add("fuse8", {x, s8});
    x = b.transposed("logits", x, num_classes, 16, 8, 4, false, image);

    SegmentationModel model;
    model.encoder_name = encoder.name;
    model.decoder_name = "skipnet";
    model.num_classes = num_classes;
    model.graph = b.take({x});
    return model;
}

SegmentationModel build_unet(const EncoderDescriptor& encoder, int64_t num_classes) {
    require_tap(encoder, 32);
    GraphBuilder b(encoder.graph);
    const std::string& image = encoder.graph.inputs.front();

    std::string x = encoder.taps.at(32).node;
    int64_t channels = encoder.taps.at(32).channels;
    for (int stride : {16, 8, 4, 2}) {
        std::string id = "up" + std::to_string(stride);
        int64_t out_c = std::max<int64_t>(channels / 2, 1);
        bool fuse = encoder.has_tap(stride);
        std::string up = b.batchnorm(
            id + "_bn", b.transposed(id, x, out_c, 4, 2, 1, false,
                                     fuse ? encoder.taps.at(stride).node : std::string()));
        if (fuse) {
            const Tap& tap = encoder.taps.at(stride);
            std::string skip = tap.node;
            if (tap.channels != out_c)
                skip = b.conv(id + "_proj", tap.node, out_c, 1, 1, 0, 1, 1, true);
            up = b.add(id + "_fuse", {up, skip});
        }
        x = b.relu(id + "_relu", up);
        channels = out_c;
    }
    int64_t out_c = std::max<int64_t>(channels / 2, 1);
    x = b.relu("up1_relu",
               b.batchnorm("up1_bn", b.transposed("up1", x, out_c, 4, 2, 1, false, image)));
    x = b.conv("logits", x, num_classes, 1, 1, 0, 1, 1, true);

    SegmentationModel model;
    model.encoder_name = encoder.name;
    model.decoder_name = "unet";
    model.num_classes = num_classes;
    model.graph = b.take({x});
    return model;
}

SegmentationModel build_dilation_frontend(const EncoderDescriptor& encoder, int64_t num_classes,
                                          bool learned_upsample) {
    EncoderDescriptor trunk = apply_dilation_conversion(encoder);
    GraphBuilder b(trunk.graph);
    const std::string& image = trunk.graph.inputs.front();

    std::string x = b.conv("score8", trunk.final_node(), num_classes, 1, 1, 0, 1, 1, true);
    if (learned_upsample)
        x = b.transposed("logits", x, num_classes, 16, 8, 4, false, image);
    else
        x = b.resize("logits", x, 8, image);

    SegmentationModel model;
    model.encoder_name = encoder.name;
    model.decoder_name = "dilation";
    model.num_classes = num_classes;
    model.graph = b.take({x});
    return model;
}

SegmentationModel build_segnet_reference(int64_t num_classes) {
    EncoderDescriptor enc = build_vgg16(/*batchnorm=*/true);
    GraphBuilder b(enc.graph);
    std::string x = enc.final_node();

    // Mirror of the 13-conv trunk; unpooling is modeled as a x2 resize tied
    // to the matching encoder resolution.
    struct Stage {
        int ref_stride;           // 1 means the image itself
        std::vector<int64_t> widths;
    };
    const Stage stages[5] = {{16, {512, 512, 512}},
                             {8, {512, 512, 256}},
                             {4, {256, 256, 128}},
                             {2, {128, 64}},
                             {1, {64, num_classes}}};
    const std::string& image = enc.graph.inputs.front();
    int total = 0;
    for (const auto& stage : stages) {
        std::string ref = stage.ref_stride == 1 ? image : enc.taps.at(stage.ref_stride).node;
        x = b.resize("unpool" + std::to_string(stage.ref_stride), x, 0, ref);
        for (size_t i = 0; i < stage.widths.size(); ++i) {
            ++total;
            std::string id = "dec" + std::to_string(total);
            bool classifier = stage.ref_stride == 1 && i + 1 == stage.widths.size();
            if (classifier)
                x = b.conv(id, x, stage.widths[i], 3, 1, 1, 1, 1, true);
            else
                x = b.conv_bn_relu(id, x, stage.widths[i], 3, 1, 1);
        }
    }

    SegmentationModel model;
    model.encoder_name = "vgg16";
    model.decoder_name = "segnet";
    model.num_classes = num_classes;
    model.graph = b.take({x});
    return model;
}

std::vector<std::string> decoder_names() { return {"skipnet", "unet", "dilation"}; }

SegmentationModel build_model(const std::string& decoder, const EncoderDescriptor& encoder,
                              int64_t num_classes) {
    if (decoder == "skipnet") return build_skipnet(encoder, num_classes);
    if (decoder == "unet") return build_unet(encoder, num_classes);
    if (decoder == "dilation") return build_dilation_frontend(encoder, num_classes);
    throw std::invalid_argument("unknown decoder: " + decoder);
}

}  // namespace segbench
