#pragma once

#include <string>
#include <vector>

#include "stratus/network.hpp"

namespace stratus {

struct SegnetParams {
    int input_side = 384;      // must be divisible by 2^7
    int input_channels = 14;
    int late_channels = 3;
    int base_filters = 8;      // doubling this mirrors the filter-count study
    int kernel = 3;
    bool use_unpool = true;    // false: plain nearest-neighbor upsampling
    bool skip_connections = false;  // true: concat encoder activations after each upsample
};

struct LayerReport {
    std::string name;
    int h, w, c;
    std::size_t params;
    std::size_t trainable;
};

struct ParameterCountReport {
    std::vector<LayerReport> layers;
    std::size_t total = 0;
    std::size_t trainable = 0;
    std::size_t non_trainable = 0;
};

// Encoder-decoder with 7 pooling stages (encoder widths f,f,2f,2f,4f,4f,4f,
// 8f x6, mirrored decoder), input reintroduction before the final 1x1
// convolution, batchnorm + sigmoid + mask gather at the head.
NetworkSpec build_segnet(const SegnetParams& params);

ParameterCountReport parameter_count_report(const NetworkSpec& net);
void write_parameter_report(const std::string& path, const ParameterCountReport& report);

} // namespace stratus
