// Copyright (c) 2026 segbench contributors
// SPDX-License-Identifier: Apache-2.0

#include "segbench/encoders.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "segbench/builder.hpp"

namespace segbench {

namespace {

// All stock trunks declare the paper's working resolution; cost/eval
// override it freely since everything is fully convolutional.
constexpr int64_t kH = kDefaultInputHeight;
constexpr int64_t kW = kDefaultInputWidth;

}  // namespace

EncoderDescriptor build_vgg16(bool batchnorm) {
    GraphBuilder b;
    std::string x = b.input("data", 3, kH, kW);

    auto unit = [&](const std::string& id, const std::string& in, int64_t out) {
        if (batchnorm) return b.conv_bn_relu(id, in, out, 3, 1, 1);
        return b.relu(id + "_relu", b.conv(id, in, out, 3, 1, 1, 1, 1, /*bias=*/true));
    };

    EncoderDescriptor enc;
    enc.name = "vgg16";
    const int64_t widths[5] = {64, 128, 256, 512, 512};
    const int depth[5] = {2, 2, 3, 3, 3};
    int stride = 1;
    for (int stage = 0; stage < 5; ++stage) {
        for (int i = 0; i < depth[stage]; ++i)
            x = unit("conv" + std::to_string(stage + 1) + "_" + std::to_string(i + 1), x,
                     widths[stage]);
        x = b.max_pool("pool" + std::to_string(stage + 1), x, 2, 2, 0);
        stride *= 2;
        enc.taps[stride] = {x, widths[stage]};
    }
    enc.graph = b.take({x});
    return enc;
}

EncoderDescriptor build_resnet18() {
    GraphBuilder b;
    std::string x = b.input("data", 3, kH, kW);
    EncoderDescriptor enc;
    enc.name = "resnet18";

    x = b.conv_bn_relu("conv1", x, 64, 7, 2, 3);
    enc.taps[2] = {x, 64};
    x = b.max_pool("pool1", x, 3, 2, 1);

    auto basic_block = [&](const std::string& id, const std::string& in, int64_t channels,
                           int stride) {
        std::string y = b.conv_bn_relu(id + "_conv1", in, channels, 3, stride, 1);
        y = b.batchnorm(id + "_conv2_bn", b.conv(id + "_conv2", y, channels, 3, 1, 1));
        std::string shortcut = in;
        if (stride != 1) {
            // Projection shortcut where the stage changes width/resolution.
            shortcut = b.batchnorm(id + "_proj_bn", b.conv(id + "_proj", in, channels, 1, stride, 0));
        }
        return b.relu(id + "_relu", b.add(id + "_add", {y, shortcut}));
    };

    const int64_t widths[4] = {64, 128, 256, 512};
    int stride = 4;
    for (int stage = 0; stage < 4; ++stage) {
        std::string id = "layer" + std::to_string(stage + 1);
        x = basic_block(id + "_block1", x, widths[stage], stage == 0 ? 1 : 2);
        x = basic_block(id + "_block2", x, widths[stage], 1);
        if (stage > 0) stride *= 2;
        enc.taps[stride] = {x, widths[stage]};
    }
    enc.graph = b.take({x});
    return enc;
}

EncoderDescriptor build_mobilenet(double width_multiplier) {
    if (!(width_multiplier > 0.0) || width_multiplier > 1.0)
        throw std::domain_error("width_multiplier must be in (0, 1]");
    auto ch = [&](int64_t c) {
        return std::max<int64_t>(1, std::llround(c * width_multiplier));
    };

    GraphBuilder b;
    std::string x = b.input("data", 3, kH, kW);
    EncoderDescriptor enc;
    enc.name = "mobilenet";
    enc.width_multiplier = width_multiplier;

    x = b.conv_bn_relu("conv0", x, ch(32), 3, 2, 1);

    int64_t in_c = ch(32);
    auto block = [&](int index, int64_t out, int stride) {
        std::string id = "block" + std::to_string(index);
        std::string y = b.relu(id + "_dw_relu",
                               b.batchnorm(id + "_dw_bn", b.depthwise(id + "_dw", x, in_c, 3, stride, 1)));
        x = b.conv_bn_relu(id + "_pw", y, out, 1, 1, 0);
        in_c = out;
    };

    struct Cfg { int64_t out; int stride; };
    const Cfg cfgs[13] = {{64, 1},  {128, 2}, {128, 1}, {256, 2}, {256, 1},
                          {512, 2}, {512, 1}, {512, 1}, {512, 1}, {512, 1},
                          {512, 1}, {1024, 2}, {1024, 1}};
    int stride = 2;
    for (int i = 0; i < 13; ++i) {
        block(i + 1, ch(cfgs[i].out), cfgs[i].stride);
        stride *= cfgs[i].stride;
        // Tap the deepest node at each resolution: the block right before
        // the next downsampling, and the last block overall.
        bool last_at_stride = (i == 12) || cfgs[i + 1].stride == 2;
        if (last_at_stride) enc.taps[stride] = {x, in_c};
    }
    enc.graph = b.take({x});
    return enc;
}

namespace {

// Stage output widths from the origin architecture table, per group count.
const std::unordered_map<int, std::array<int64_t, 3>> kShuffleStageWidths = {
    {1, {144, 288, 576}}, {2, {200, 400, 800}}, {3, {240, 480, 960}},
    {4, {272, 544, 1088}}, {8, {384, 768, 1536}},
};

}  // namespace

EncoderDescriptor build_shufflenet(int groups) {
    auto it = kShuffleStageWidths.find(groups);
    if (it == kShuffleStageWidths.end())
        throw std::domain_error("shufflenet groups must be one of {1,2,3,4,8}");
    const auto& widths = it->second;

    GraphBuilder b;
    std::string x = b.input("data", 3, kH, kW);
    EncoderDescriptor enc;
    enc.name = "shufflenet";
    enc.groups = groups;

    x = b.conv_bn_relu("conv1", x, 24, 3, 2, 1);
    enc.taps[2] = {x, 24};
    x = b.max_pool("pool1", x, 3, 2, 1);
    enc.taps[4] = {x, 24};

    int64_t in_c = 24;
    auto unit = [&](const std::string& id, int64_t out, bool strided, int first_groups) {
        int64_t bneck = out / 4;
        std::string y = b.conv_bn_relu(id + "_gconv1", x, bneck, 1, 1, 0, 1, first_groups);
        if (groups > 1) y = b.channel_shuffle(id + "_shuffle", y, groups);
        y = b.batchnorm(id + "_dw_bn",
                        b.depthwise(id + "_dw", y, bneck, 3, strided ? 2 : 1, 1));
        if (strided) {
            y = b.batchnorm(id + "_gconv2_bn",
                            b.conv(id + "_gconv2", y, out - in_c, 1, 1, 0, 1, groups));
            std::string pooled = b.avg_pool(id + "_shortcut", x, 3, 2, 1);
            x = b.relu(id + "_relu", b.concat(id + "_concat", {pooled, y}));
        } else {
            y = b.batchnorm(id + "_gconv2_bn",
                            b.conv(id + "_gconv2", y, out, 1, 1, 0, 1, groups));
            x = b.relu(id + "_relu", b.add(id + "_add", {x, y}));
        }
        in_c = out;
    };

    const int repeats[3] = {3, 7, 3};
    int stride = 8;
    for (int stage = 0; stage < 3; ++stage) {
        std::string id = "stage" + std::to_string(stage + 2);
        // The very first grouped conv sees only 24 input channels and is
        // built ungrouped, following the origin table.
        unit(id + "_unit1", widths[stage], /*strided=*/true, stage == 0 ? 1 : groups);
        for (int r = 0; r < repeats[stage]; ++r)
            unit(id + "_unit" + std::to_string(r + 2), widths[stage], false, groups);
        enc.taps[stride] = {x, widths[stage]};
        stride *= 2;
    }
    enc.graph = b.take({x});
    return enc;
}

std::vector<int> channel_shuffle_permutation(int channels, int groups) {
    if (groups < 1 || channels % groups != 0)
        throw std::domain_error("channel_shuffle: groups must divide channels");
    int per_group = channels / groups;
    std::vector<int> perm(channels);
    // reshape (g, n/g) -> transpose -> flatten
    for (int j = 0; j < channels; ++j) {
        int row = j / groups;
        int col = j % groups;
        perm[j] = col * per_group + row;
    }
    return perm;
}

EncoderDescriptor apply_dilation_conversion(const EncoderDescriptor& encoder) {
    const NetworkGraph& g = encoder.graph;
    if (effective_stride(g, encoder.final_node()) != 32)
        throw std::runtime_error("dilation conversion expects a stride-32 encoder");

    // Pre-conversion stride of every node decides its fate: nodes at output
    // stride 16 get dilation 2, nodes at 32 get dilation 4, and the
    // downsamplers that produce those strides lose their stride.
    std::unordered_map<std::string, int> stride_of;
    for (const auto& n : g.nodes) stride_of[n.id] = effective_stride(g, n.id);

    std::unordered_map<std::string, std::string> replaced;  // removed id -> its input
    auto resolve = [&](std::string id) {
        while (replaced.count(id)) id = replaced.at(id);
        return id;
    };

    NetworkGraph out;
    for (const auto& n : g.nodes) {
        GraphNode node = n;
        int s_out = stride_of.at(n.id);
        if (s_out == 16 || s_out == 32) {
            int dilation = s_out == 16 ? 2 : 4;
            bool downsampler = node.spec.stride_h > 1;
            if (downsampler &&
                (node.spec.kind == LayerKind::MaxPool || node.spec.kind == LayerKind::AvgPool) &&
                node.spec.kernel_h == node.spec.stride_h) {
                // Non-overlapping pool: dropping the stride would shrink the
                // map, so the layer is removed outright.
                replaced[node.id] = node.inputs.front();
                continue;
            }
            if (downsampler) node.spec.stride_h = node.spec.stride_w = 1;
            if (is_conv_family(node.spec.kind) && node.spec.kernel_h > 1) {
                if (node.spec.kernel_h % 2 == 0)
                    throw std::runtime_error("dilation conversion needs odd kernels at " + node.id);
                node.spec.dilation = dilation;
                node.spec.pad_h = node.spec.pad_w = dilation * (node.spec.kernel_h - 1) / 2;
            }
        }
        for (auto& in : node.inputs) in = resolve(in);
        if (node.size_ref) node.size_ref = resolve(*node.size_ref);
        out.nodes.push_back(std::move(node));
    }
    out.inputs = g.inputs;
    for (const auto& o : g.outputs) out.outputs.push_back(resolve(o));

    EncoderDescriptor converted;
    converted.name = encoder.name + "-dilated";
    converted.graph = std::move(out);
    converted.width_multiplier = encoder.width_multiplier;
    converted.groups = encoder.groups;
    for (const auto& [stride, tap] : encoder.taps) {
        if (stride <= 4) converted.taps[stride] = {resolve(tap.node), tap.channels};
    }
    converted.taps[8] = {converted.graph.outputs.front(), encoder.taps.at(32).channels};
    return converted;
}

std::vector<std::string> encoder_names() {
    return {"vgg16", "resnet18", "mobilenet", "shufflenet"};
}

EncoderDescriptor build_encoder(const std::string& name) {
    if (name == "vgg16") return build_vgg16();
    if (name == "resnet18") return build_resnet18();
    if (name == "mobilenet") return build_mobilenet();
    if (name == "shufflenet") return build_shufflenet();
    throw std::invalid_argument("unknown encoder: " + name);
}

}  // namespace segbench
