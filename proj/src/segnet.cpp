#include "stratus/segnet.hpp"

#include <fstream>
#include <stdexcept>

namespace stratus {

NetworkSpec build_segnet(const SegnetParams& prm) {
    if (prm.input_side % 128 != 0)
        throw std::invalid_argument("segnet: input side must be divisible by 2^7");
    if (prm.base_filters < 1 || prm.input_channels < 1 || prm.late_channels < 0)
        throw std::invalid_argument("segnet: bad channel parameters");

    NetworkSpec net;
    net.input_height = prm.input_side;
    net.input_width = prm.input_side;
    net.input_channels = prm.input_channels;
    net.late_channels = prm.late_channels;

    int conv_no = 0, bn_no = 0, relu_no = 0, pool_no = 0, unpool_no = 0;
    auto add = [&](LayerSpec l) {
        net.layers.push_back(std::move(l));
        return int(net.layers.size()) - 1;
    };
    auto conv_block = [&](int input, int channels) {
        int n = add({LayerKind::conv, "conv_" + std::to_string(++conv_no), input, channels,
                     prm.kernel});
        n = add({LayerKind::batchnorm, "batchnorm_" + std::to_string(++bn_no), n});
        return add({LayerKind::relu, "relu_" + std::to_string(++relu_no), n});
    };

    const int f = prm.base_filters;
    const int main_in = add({LayerKind::input_main, "input_main"});
    const int late_in = add({LayerKind::input_late, "input_late"});

    // Encoder: conv counts per pooling stage and channel widths.
    const int enc_convs[7] = {1, 1, 2, 1, 2, 3, 3};
    const int enc_width[7] = {f, f, 2 * f, 4 * f, 4 * f, 8 * f, 8 * f};
    int node = main_in;
    int pools[7];
    int pre_pool[7];  // activation entering each pool (skip-connection source)
    for (int stage = 0; stage < 7; ++stage) {
        for (int k = 0; k < enc_convs[stage]; ++k) node = conv_block(node, enc_width[stage]);
        pre_pool[stage] = node;
        node = add({LayerKind::maxpool, "pool_" + std::to_string(++pool_no), node});
        pools[stage] = node;
    }

    // Middle convolution at the smallest resolution.
    node = conv_block(node, 8 * f);

    // Decoder: one upsampling per encoder pool (last pool first), then convs.
    const int dec_convs[7] = {3, 3, 1, 2, 2, 1, 1};
    const int dec_width[7][3] = {{8 * f, 8 * f, 8 * f}, {8 * f, 8 * f, 4 * f}, {4 * f, 0, 0},
                                 {4 * f, 2 * f, 0},     {2 * f, f, 0},         {f, 0, 0},
                                 {f, 0, 0}};
    for (int stage = 0; stage < 7; ++stage) {
        const int paired = pools[6 - stage];
        if (prm.use_unpool) {
            LayerSpec up{LayerKind::unpool, "unpool_" + std::to_string(++unpool_no), node};
            up.pool_pair = paired;
            node = add(std::move(up));
        } else {
            node = add({LayerKind::upsample, "upsample_" + std::to_string(++unpool_no), node});
        }
        if (prm.skip_connections) {
            LayerSpec cat{LayerKind::concat, "skip_concat_" + std::to_string(stage + 1)};
            cat.concat_inputs = {node, pre_pool[6 - stage]};
            node = add(std::move(cat));
        }
        for (int k = 0; k < dec_convs[stage]; ++k) node = conv_block(node, dec_width[stage][k]);
    }

    // Reintroduce every input just before the final 1x1 convolution.
    LayerSpec cat{LayerKind::concat, "concat_inputs"};
    cat.concat_inputs = {node, main_in, late_in};
    node = add(std::move(cat));
    node = add({LayerKind::conv, "conv_1x1", node, 1, 1});
    node = add({LayerKind::batchnorm, "batchnorm_out", node});
    node = add({LayerKind::sigmoid, "sigmoid", node});
    add({LayerKind::mask_gather, "gather", node});

    net.infer_shapes();
    return net;
}

ParameterCountReport parameter_count_report(const NetworkSpec& net) {
    ParameterCountReport rep;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        LayerReport row{l.name, l.h, l.w, l.c, 0, 0};
        if (l.kind == LayerKind::conv) {
            const int cin = net.layers[std::size_t(l.input)].c;
            row.params = std::size_t(l.kernel) * l.kernel * cin * l.out_channels +
                         std::size_t(l.out_channels);
            row.trainable = row.params;
        } else if (l.kind == LayerKind::batchnorm) {
            row.params = 4 * std::size_t(l.c);      // gamma, beta, running mean, running var
            row.trainable = 2 * std::size_t(l.c);   // gamma, beta
        }
        rep.total += row.params;
        rep.trainable += row.trainable;
        rep.layers.push_back(row);
    }
    rep.non_trainable = rep.total - rep.trainable;
    return rep;
}

void write_parameter_report(const std::string& path, const ParameterCountReport& rep) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "layer,height,width,channels,params,trainable\n";
    for (const auto& r : rep.layers)
        out << r.name << "," << r.h << "," << r.w << "," << r.c << "," << r.params << ","
            << r.trainable << "\n";
    out << "total,,,," << rep.total << "," << rep.trainable << "\n";
}

} // namespace stratus
