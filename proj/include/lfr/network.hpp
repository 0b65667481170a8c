#pragma once

#include "lfr/core.hpp"
#include "lfr/sampling.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace lfr {

// Residual EPI inpainting network:
//
//   stem conv -> sections x blocks residual blocks -> output conv (3 ch)
//   output = input + residual branch
//
// A residual block is conv -> ELU -> conv, plus the block input (through a
// 1x1 projection when the channel count changes), then ELU. All
// convolutions are stride 1 with zero "same" padding; there is no pooling.
struct NetworkConfig {
    int blocks_per_section = 3;
    std::vector<int> filters{32, 64, 128, 256, 512};
    std::vector<int> kernels{9, 7, 5, 5, 5};

    int sections() const { return int(filters.size()); }
    int residual_blocks() const { return sections() * blocks_per_section; }
    // Projections on the skip path are not counted.
    int conv_layers() const { return 2 + 2 * residual_blocks(); }
    int max_kernel() const;
    void validate() const;

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

enum class LayerRole : std::uint8_t { stem, block_first, block_second, projection, output };

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct ConvLayer {
    LayerRole role = LayerRole::stem;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 1;
    // Rows are indexed by (in_channel, ky, kx) in that nesting order; one
    // column per output channel.
    MatrixX<Scalar> weight;
    VectorX<Scalar> bias;

    Eigen::Index size() const { return weight.size() + bias.size(); }
};

template <typename Scalar>
struct Parameters {
    NetworkConfig config;
    std::vector<ConvLayer<Scalar>> layers;   // build order

    Eigen::Index size() const;
    int conv_layer_count() const;
    // Flat view over every weight then bias of every layer, in build order.
    Scalar& flat(Eigen::Index index);
    Scalar flat(Eigen::Index index) const;

    // Same architecture with every tensor zero.
    Parameters zeros_like() const;
    Parameters& operator+=(const Parameters& other);

    template <typename Other>
    Parameters<Other> cast() const {
        Parameters<Other> out;
        out.config = config;
        for (const auto& l : layers)
            out.layers.push_back({l.role, l.in_channels, l.out_channels, l.kernel, l.weight.template cast<Other>(),
                                  l.bias.template cast<Other>()});
        return out;
    }

    friend bool operator==(const Parameters& a, const Parameters& b) {
        if (!(a.config == b.config) || a.layers.size() != b.layers.size()) return false;
        for (std::size_t i = 0; i < a.layers.size(); ++i)
            if (a.layers[i].weight != b.layers[i].weight || a.layers[i].bias != b.layers[i].bias) return false;
        return true;
    }
};

// Xavier/Glorot uniform weights, zero biases.
template <typename Scalar = float>
Parameters<Scalar> build_network(const NetworkConfig& config, std::uint64_t seed);

// Zeroes the output convolution so the network is the identity map.
template <typename Scalar>
void zero_residual_branch(Parameters<Scalar>& params);

template <typename Scalar>
BasicImage<Scalar> forward(const Parameters<Scalar>& params, const BasicImage<Scalar>& input);

EpiWindow forward(const Parameters<float>& params, const EpiWindow& window);

// Mean over the batch of each pair's mean squared error over all channels.
template <typename Scalar>
double loss(std::span<const BasicImage<Scalar>> outputs, std::span<const BasicImage<Scalar>> targets);

template <typename Scalar>
struct Gradient {
    Parameters<Scalar> grad;
    double loss = 0.0;
};

// Exact reverse-mode gradient of `loss(forward(inputs), targets)`.
// Per-sample contributions are summed in a fixed order, independent of the
// number of threads.
template <typename Scalar>
Gradient<Scalar> gradient(const Parameters<Scalar>& params, std::span<const BasicImage<Scalar>> inputs,
                          std::span<const BasicImage<Scalar>> targets);

// Runs the network on every window of every (v, t) fiber and copies only
// the blank-band rows into the result; input views are kept verbatim.
LightField reconstruct_lightfield(const SparseLightField& sparse, const Parameters<float>& params,
                                  const SamplingPattern& pattern);

// Versioned little-endian container: config header followed by float32
// tensors in build order.
void save_weights(const Parameters<float>& params, const std::filesystem::path& path);
Parameters<float> load_weights(const std::filesystem::path& path);

} // namespace lfr
