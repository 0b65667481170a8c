#include "lfr/network.hpp"

#include "lfr/detail/parallel.hpp"
#include "lfr/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <vector>

namespace lfr {
namespace {

// Activations are (height * width) x channels, pixel index y * width + x,
// so every channel is one contiguous column.
template <typename S>
using Activation = MatrixX<S>;

struct Shape {
    int height = 0;
    int width = 0;
    Eigen::Index pixels() const { return Eigen::Index(height) * width; }
};

// Direct convolution on zero-padded channel planes. Output columns are
// computed in register tiles of kTile; planes are widened to a whole number of
// tiles so the inner loops need no edge cases.
constexpr int kTile = 16;
constexpr int kChannelBlock = 8;

int tiled_width(int width) { return (width + kTile - 1) / kTile * kTile; }

template <typename S>
struct Padded {
    std::vector<S> data;
    int rows = 0;
    int stride = 0;
    const S* plane(Eigen::Index c) const { return data.data() + std::size_t(c) * std::size_t(rows) * std::size_t(stride); }
};

template <typename S>
Padded<S> pad_planes(const Activation<S>& a, const Shape& shape, int pad) {
    Padded<S> p;
    p.rows = shape.height + 2 * pad;
    p.stride = tiled_width(shape.width) + 2 * pad;
    // kTile of slack lets a tap block run past the last row's edge.
    p.data.assign(std::size_t(a.cols()) * std::size_t(p.rows) * std::size_t(p.stride) + kTile, S(0));
    for (Eigen::Index c = 0; c < a.cols(); ++c)
        for (int y = 0; y < shape.height; ++y)
            std::copy_n(a.col(c).data() + Eigen::Index(y) * shape.width, shape.width,
                        p.data.data() + (std::size_t(c) * std::size_t(p.rows) + std::size_t(y + pad)) * std::size_t(p.stride) +
                            std::size_t(pad));
    return p;
}

template <typename S>
struct Lanes {
    typedef S Vec __attribute__((vector_size(64)));
    static constexpr int width = int(64 / sizeof(S));
    static constexpr int per_tile = kTile / width;
};

// Copies through a temporary so the accumulator array itself is never
// address-taken and can stay in registers.
template <typename S, typename V, int NV>
void store_tile(const V (&acc)[NV], S* out) {
    for (int v = 0; v < NV; ++v) {
        const V tmp = acc[v];
        std::memcpy(out + v * Lanes<S>::width, &tmp, sizeof(tmp));
    }
}

// out[:, o] += sum over (c, ky, kx) of weight((c * k + ky) * k + kx, o) times
// the input shifted by (ky - pad, kx - pad).
template <typename S>
void conv_accumulate(const Padded<S>& in, Eigen::Index in_channels, const MatrixX<S>& weight, int k, const Shape& shape,
                     Activation<S>& out) {
    using V = typename Lanes<S>::Vec;
    constexpr int NV = Lanes<S>::per_tile;
    constexpr int CB = kChannelBlock;
    const Eigen::Index R = weight.rows();
    const Eigen::Index n_out = weight.cols();
    const int tiles = tiled_width(shape.width) / kTile;

    std::vector<S> packed(std::size_t(R * CB));
    for (Eigen::Index o0 = 0; o0 < n_out; o0 += CB) {
        const int nb = int(std::min<Eigen::Index>(CB, n_out - o0));
        for (Eigen::Index r = 0; r < R; ++r)
            for (int c = 0; c < CB; ++c) packed[std::size_t(r * CB + c)] = c < nb ? weight(r, o0 + c) : S(0);

        for (int y = 0; y < shape.height; ++y)
            for (int t = 0; t < tiles; ++t) {
                V acc[CB][NV] = {};
                const S* w = packed.data();
                for (Eigen::Index ci = 0; ci < in_channels; ++ci)
                    for (int ky = 0; ky < k; ++ky) {
                        const S* row = in.plane(ci) + std::size_t(y + ky) * std::size_t(in.stride) + std::size_t(t * kTile);
                        for (int kx = 0; kx < k; ++kx, w += CB) {
                            V src[NV];
                            std::memcpy(src, row + kx, sizeof(src));
#pragma GCC unroll 16
                            for (int c = 0; c < CB; ++c)
#pragma GCC unroll 4
                                for (int v = 0; v < NV; ++v) acc[c][v] += w[c] * src[v];
                        }
                    }
                const int n = std::min(kTile, shape.width - t * kTile);
                for (int c = 0; c < nb; ++c) {
                    S tile[kTile];
                    store_tile(acc[c], tile);
                    S* dst = out.col(o0 + c).data() + Eigen::Index(y) * shape.width + t * kTile;
                    for (int x = 0; x < n; ++x) dst[x] += tile[x];
                }
            }
    }
}

// grad((c * k + ky) * k + kx, o) += sum over pixels of dout[o] times the
// shifted input plane c. `dout` is padded with pad 0. Each loaded dout tile
// feeds a block of kx taps; taps past the kernel edge are computed on the
// plane slack and dropped.
template <typename S>
void conv_weight_gradient(const Padded<S>& in, Eigen::Index in_channels, const Padded<S>& dout, Eigen::Index n_out, int k,
                          const Shape& shape, MatrixX<S>& grad) {
    using V = typename Lanes<S>::Vec;
    constexpr int NV = Lanes<S>::per_tile;
    constexpr int CB = 4;
    constexpr int KB = 5;
    const int tiles = tiled_width(shape.width) / kTile;
    const std::vector<S> zero(std::size_t(dout.rows) * std::size_t(dout.stride), S(0));
    for (Eigen::Index ci = 0; ci < in_channels; ++ci)
        for (int ky = 0; ky < k; ++ky)
            for (Eigen::Index o0 = 0; o0 < n_out; o0 += CB) {
                const int nb = int(std::min<Eigen::Index>(CB, n_out - o0));
                // Missing channels of a partial block read a zero plane.
                const S* planes[CB];
                for (int c = 0; c < CB; ++c) planes[c] = c < nb ? dout.plane(o0 + c) : zero.data();
                for (int kx0 = 0; kx0 < k; kx0 += KB) {
                    V acc[KB][CB][NV] = {};
                    for (int y = 0; y < shape.height; ++y) {
                        const S* row = in.plane(ci) + std::size_t(y + ky) * std::size_t(in.stride) + std::size_t(kx0);
                        const std::size_t drow = std::size_t(y) * std::size_t(dout.stride);
                        for (int t = 0; t < tiles; ++t) {
                            V d[CB][NV];
#pragma GCC unroll 16
                            for (int c = 0; c < CB; ++c)
                                std::memcpy(d[c], planes[c] + drow + std::size_t(t * kTile), sizeof(d[c]));
#pragma GCC unroll 16
                            for (int j = 0; j < KB; ++j) {
                                V src[NV];
                                std::memcpy(src, row + t * kTile + j, sizeof(src));
#pragma GCC unroll 16
                                for (int c = 0; c < CB; ++c)
#pragma GCC unroll 4
                                    for (int v = 0; v < NV; ++v) acc[j][c][v] += src[v] * d[c][v];
                            }
                        }
                    }
                    for (int j = 0; j < KB && kx0 + j < k; ++j) {
                        const Eigen::Index r = (ci * k + ky) * k + kx0 + j;
                        for (int c = 0; c < nb; ++c) {
                            S lanes[kTile];
                            store_tile(acc[j][c], lanes);
                            S sum = 0;
                            for (S x : lanes) sum += x;
                            grad(r, o0 + c) += sum;
                        }
                    }
                }
            }
}

// Weights of the transposed convolution: channels swapped, taps mirrored.
template <typename S>
MatrixX<S> flipped_weights(const ConvLayer<S>& layer) {
    const int k = layer.kernel;
    MatrixX<S> f(Eigen::Index(layer.out_channels) * k * k, layer.in_channels);
    for (int o = 0; o < layer.out_channels; ++o)
        for (int c = 0; c < layer.in_channels; ++c)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx)
                    f((Eigen::Index(o) * k + ky) * k + kx, c) =
                        layer.weight((Eigen::Index(c) * k + (k - 1 - ky)) * k + (k - 1 - kx), o);
    return f;
}

template <typename S>
Activation<S> conv_forward(const ConvLayer<S>& layer, const Activation<S>& in, const Shape& shape) {
    Activation<S> out(shape.pixels(), layer.out_channels);
    out.rowwise() = layer.bias.transpose();
    if (layer.kernel == 1)
        out.noalias() += in * layer.weight;
    else
        conv_accumulate(pad_planes(in, shape, layer.kernel / 2), in.cols(), layer.weight, layer.kernel, shape, out);
    return out;
}

// Accumulates weight/bias gradients into `grad` and, when `din` is given,
// adds the input gradient to it.
template <typename S>
void conv_backward(const ConvLayer<S>& layer, const Activation<S>& in, const Shape& shape, const Activation<S>& dout,
                   ConvLayer<S>& grad, Activation<S>* din) {
    grad.bias += dout.colwise().sum().transpose();
    if (layer.kernel == 1) {
        grad.weight.noalias() += in.transpose() * dout;
        if (din) din->noalias() += dout * layer.weight.transpose();
        return;
    }
    const int pad = layer.kernel / 2;
    conv_weight_gradient(pad_planes(in, shape, pad), in.cols(), pad_planes(dout, shape, 0), dout.cols(), layer.kernel,
                         shape, grad.weight);
    if (din)
        conv_accumulate(pad_planes(dout, shape, pad), dout.cols(), flipped_weights(layer), layer.kernel, shape, *din);
}

template <typename S>
void elu_inplace(Activation<S>& a) {
    // max(z, 0) + exp(min(z, 0)) - 1, branch-free so Eigen vectorizes it.
    a = (a.array().max(S(0)) + (a.array().min(S(0)).exp() - S(1))).matrix();
}

// dL/dz from dL/da, using the stored activation a = elu(z).
template <typename S>
Activation<S> elu_backward(const Activation<S>& a, const Activation<S>& da) {
    // elu'(z) = 1 for z > 0, else exp(z) = a + 1.
    return (da.array() * (a.array() + S(1)).min(S(1))).matrix();
}

struct Block {
    int first = -1;
    int second = -1;
    int projection = -1;
};

template <typename S>
std::vector<Block> block_plan(const Parameters<S>& params) {
    std::vector<Block> blocks;
    for (int i = 0; i < int(params.layers.size()); ++i) {
        switch (params.layers[std::size_t(i)].role) {
        case LayerRole::block_first: blocks.push_back({i, -1, -1}); break;
        case LayerRole::block_second: blocks.back().second = i; break;
        case LayerRole::projection: blocks.back().projection = i; break;
        default: break;
        }
    }
    return blocks;
}

template <typename S>
struct Trace {
    Shape shape;
    Activation<S> input;
    Activation<S> stem;
    std::vector<Activation<S>> hidden;   // per block, after the first conv
    std::vector<Activation<S>> out;      // per block output
    Activation<S> result;
};

template <typename S>
Activation<S> to_activation(const BasicImage<S>& image) {
    Activation<S> a(image.rows() * image.cols(), 3);
    for (int c = 0; c < 3; ++c)
        Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(a.col(c).data(), image.rows(),
                                                                                      image.cols()) = image.channel[c];
    return a;
}

template <typename S>
BasicImage<S> to_image(const Activation<S>& a, const Shape& shape) {
    BasicImage<S> image;
    for (int c = 0; c < 3; ++c)
        image.channel[c] = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            a.col(c).data(), shape.height, shape.width);
    return image;
}

template <typename S>
void check_input(const Parameters<S>& params, const BasicImage<S>& input) {
    const int k = params.config.max_kernel();
    if (input.rows() < k || input.cols() < k)
        throw InvalidArgument("input " + std::to_string(input.rows()) + "x" + std::to_string(input.cols()) +
                              " is smaller than the largest kernel (" + std::to_string(k) + ")");
}

template <typename S>
void run(const Parameters<S>& params, const std::vector<Block>& blocks, const BasicImage<S>& image, Trace<S>& tr,
         bool keep) {
    check_input(params, image);
    tr.shape = {int(image.rows()), int(image.cols())};
    tr.input = to_activation(image);
    const auto& L = params.layers;

    tr.stem = conv_forward(L.front(), tr.input, tr.shape);
    elu_inplace(tr.stem);
    tr.hidden.clear();
    tr.out.clear();
    Activation<S> x = tr.stem;
    for (const auto& b : blocks) {
        Activation<S> h = conv_forward(L[std::size_t(b.first)], x, tr.shape);
        elu_inplace(h);
        Activation<S> y = conv_forward(L[std::size_t(b.second)], h, tr.shape);
        if (b.projection >= 0)
            y += conv_forward(L[std::size_t(b.projection)], x, tr.shape);
        else
            y += x;
        elu_inplace(y);
        if (keep) {
            tr.hidden.push_back(std::move(h));
            tr.out.push_back(y);
        }
        x = std::move(y);
    }
    tr.result = tr.input + conv_forward(L.back(), x, tr.shape);
}

template <typename S>
void backward(const Parameters<S>& params, const std::vector<Block>& blocks, const Trace<S>& tr,
              const Activation<S>& dresult, Parameters<S>& grad) {
    const auto& L = params.layers;
    auto& G = grad.layers;
    const Activation<S>& last = blocks.empty() ? tr.stem : tr.out.back();

    Activation<S> dy = Activation<S>::Zero(last.rows(), last.cols());
    conv_backward(L.back(), last, tr.shape, dresult, G.back(), &dy);

    for (int i = int(blocks.size()) - 1; i >= 0; --i) {
        const Block& b = blocks[std::size_t(i)];
        const Activation<S>& x = i == 0 ? tr.stem : tr.out[std::size_t(i - 1)];
        const Activation<S> ds = elu_backward(tr.out[std::size_t(i)], dy);

        Activation<S> dh = Activation<S>::Zero(tr.hidden[std::size_t(i)].rows(), tr.hidden[std::size_t(i)].cols());
        conv_backward(L[std::size_t(b.second)], tr.hidden[std::size_t(i)], tr.shape, ds, G[std::size_t(b.second)], &dh);

        Activation<S> dx;
        if (b.projection >= 0) {
            dx = Activation<S>::Zero(x.rows(), x.cols());
            conv_backward(L[std::size_t(b.projection)], x, tr.shape, ds, G[std::size_t(b.projection)], &dx);
        } else {
            dx = ds;
        }
        const Activation<S> dz = elu_backward(tr.hidden[std::size_t(i)], dh);
        conv_backward(L[std::size_t(b.first)], x, tr.shape, dz, G[std::size_t(b.first)], &dx);
        dy = std::move(dx);
    }

    const Activation<S> dstem = elu_backward(tr.stem, dy);
    conv_backward(L.front(), tr.input, tr.shape, dstem, G.front(), static_cast<Activation<S>*>(nullptr));
}

template <typename S>
ConvLayer<S> make_layer(LayerRole role, int in, int out, int k, std::mt19937_64& rng) {
    ConvLayer<S> layer{role, in, out, k, MatrixX<S>(Eigen::Index(in) * k * k, out), VectorX<S>::Zero(out)};
    const double fan_in = double(in) * k * k;
    const double fan_out = double(out) * k * k;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    // Fill in (out, in, ky, kx) order so the draw sequence does not depend on
    // the storage layout.
    for (int o = 0; o < out; ++o)
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, o) = S(dist(rng));
    return layer;
}

constexpr int kGradientLanes = 6;

} // namespace

int NetworkConfig::max_kernel() const {
    return kernels.empty() ? 0 : *std::max_element(kernels.begin(), kernels.end());
}

void NetworkConfig::validate() const {
    if (filters.empty()) throw InvalidArgument("network needs at least one section");
    if (filters.size() != kernels.size()) throw InvalidArgument("filters and kernels must have one entry per section");
    if (blocks_per_section < 1) throw InvalidArgument("blocks_per_section must be >= 1");
    for (int f : filters)
        if (f < 1) throw InvalidArgument("filter counts must be >= 1");
    for (int k : kernels)
        if (k < 1 || k % 2 == 0) throw InvalidArgument("kernel sizes must be odd (got " + std::to_string(k) + ")");
}

template <typename S>
Eigen::Index Parameters<S>::size() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.size();
    return n;
}

template <typename S>
int Parameters<S>::conv_layer_count() const {
    return int(std::count_if(layers.begin(), layers.end(),
                             [](const ConvLayer<S>& l) { return l.role != LayerRole::projection; }));
}

template <typename S>
S& Parameters<S>::flat(Eigen::Index index) {
    for (auto& l : layers) {
        if (index < l.weight.size()) return l.weight.data()[index];
        index -= l.weight.size();
        if (index < l.bias.size()) return l.bias.data()[index];
        index -= l.bias.size();
    }
    throw InvalidArgument("parameter index out of range");
}

template <typename S>
S Parameters<S>::flat(Eigen::Index index) const {
    return const_cast<Parameters*>(this)->flat(index);
}

template <typename S>
Parameters<S> Parameters<S>::zeros_like() const {
    Parameters out = *this;
    for (auto& l : out.layers) {
        l.weight.setZero();
        l.bias.setZero();
    }
    return out;
}

template <typename S>
Parameters<S>& Parameters<S>::operator+=(const Parameters& other) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        layers[i].weight += other.layers[i].weight;
        layers[i].bias += other.layers[i].bias;
    }
    return *this;
}

template <typename S>
Parameters<S> build_network(const NetworkConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    Parameters<S> p;
    p.config = config;
    p.layers.push_back(make_layer<S>(LayerRole::stem, 3, config.filters.front(), config.kernels.front(), rng));
    int channels = config.filters.front();
    for (int sec = 0; sec < config.sections(); ++sec) {
        const int f = config.filters[std::size_t(sec)];
        const int k = config.kernels[std::size_t(sec)];
        for (int b = 0; b < config.blocks_per_section; ++b) {
            p.layers.push_back(make_layer<S>(LayerRole::block_first, channels, f, k, rng));
            p.layers.push_back(make_layer<S>(LayerRole::block_second, f, f, k, rng));
            if (channels != f) p.layers.push_back(make_layer<S>(LayerRole::projection, channels, f, 1, rng));
            channels = f;
        }
    }
    p.layers.push_back(make_layer<S>(LayerRole::output, channels, 3, config.kernels.back(), rng));
    return p;
}

template <typename S>
void zero_residual_branch(Parameters<S>& params) {
    params.layers.back().weight.setZero();
    params.layers.back().bias.setZero();
}

template <typename S>
BasicImage<S> forward(const Parameters<S>& params, const BasicImage<S>& input) {
    const detail::FlushDenormals ftz;
    Trace<S> tr;
    run(params, block_plan(params), input, tr, false);
    return to_image(tr.result, tr.shape);
}

EpiWindow forward(const Parameters<float>& params, const EpiWindow& window) {
    EpiWindow out = window;
    out.epi.pixels = forward(params, window.epi.pixels);
    std::fill(out.epi.row_valid.begin(), out.epi.row_valid.end(), 1);
    return out;
}

template <typename S>
double loss(std::span<const BasicImage<S>> outputs, std::span<const BasicImage<S>> targets) {
    if (outputs.size() != targets.size() || outputs.empty())
        throw InvalidArgument("loss needs equally sized, non-empty batches");
    double total = 0.0;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        if (outputs[i].rows() != targets[i].rows() || outputs[i].cols() != targets[i].cols())
            throw InvalidArgument("loss: shape mismatch in batch entry " + std::to_string(i));
        double sum = 0.0;
        for (int c = 0; c < 3; ++c)
            sum += (outputs[i].channel[c].template cast<double>() - targets[i].channel[c].template cast<double>())
                       .squaredNorm();
        total += sum / (3.0 * double(outputs[i].rows() * outputs[i].cols()));
    }
    return total / double(outputs.size());
}

template <typename S>
Gradient<S> gradient(const Parameters<S>& params, std::span<const BasicImage<S>> inputs,
                     std::span<const BasicImage<S>> targets) {
    if (inputs.size() != targets.size() || inputs.empty())
        throw InvalidArgument("gradient needs equally sized, non-empty batches");
    for (std::size_t i = 0; i < inputs.size(); ++i)
        if (inputs[i].rows() != targets[i].rows() || inputs[i].cols() != targets[i].cols())
            throw InvalidArgument("gradient: shape mismatch in batch entry " + std::to_string(i));

    const auto blocks = block_plan(params);
    const int n = int(inputs.size());
    const int lanes = std::min(n, kGradientLanes);
    std::vector<Parameters<S>> lane_grad(std::size_t(lanes), params.zeros_like());
    std::vector<double> lane_loss(std::size_t(lanes), 0.0);

    // Lane l owns a fixed contiguous slice of the batch, so the summation
    // order does not depend on how many threads execute the lanes.
    detail::parallel_for(lanes, [&](int lane) {
        const detail::FlushDenormals ftz;
        const int begin = lane * n / lanes;
        const int end = (lane + 1) * n / lanes;
        Trace<S> tr;
        for (int i = begin; i < end; ++i) {
            run(params, blocks, inputs[std::size_t(i)], tr, true);
            const Activation<S> target = to_activation(targets[std::size_t(i)]);
            const Activation<S> diff = tr.result - target;
            const double count = double(diff.size());
            lane_loss[std::size_t(lane)] += diff.template cast<double>().squaredNorm() / count;
            const Activation<S> dresult = diff * S(2.0 / (count * n));
            backward(params, blocks, tr, dresult, lane_grad[std::size_t(lane)]);
        }
    });

    Gradient<S> g{std::move(lane_grad.front()), lane_loss.front()};
    for (int lane = 1; lane < lanes; ++lane) {
        g.grad += lane_grad[std::size_t(lane)];
        g.loss += lane_loss[std::size_t(lane)];
    }
    g.loss /= n;
    return g;
}

LightField reconstruct_lightfield(const SparseLightField& sparse, const Parameters<float>& params,
                                  const SamplingPattern& pattern) {
    const int rows = pattern.window_rows();
    const int k = params.config.max_kernel();
    if (rows < k || sparse.field.dims().ns < k)
        throw InvalidArgument("windows are smaller than the network's largest kernel");
    return fill_blank_bands(sparse, pattern, [&](const EpiWindow& w, int, int) {
        Epi out = w.epi;
        out.pixels = forward(params, w.epi.pixels);
        return out;
    });
}

#define LFR_INSTANTIATE(S)                                                                                        \
    template struct Parameters<S>;                                                                               \
    template Parameters<S> build_network<S>(const NetworkConfig&, std::uint64_t);                                \
    template void zero_residual_branch<S>(Parameters<S>&);                                                       \
    template BasicImage<S> forward<S>(const Parameters<S>&, const BasicImage<S>&);                               \
    template double loss<S>(std::span<const BasicImage<S>>, std::span<const BasicImage<S>>);                     \
    template Gradient<S> gradient<S>(const Parameters<S>&, std::span<const BasicImage<S>>,                       \
                                     std::span<const BasicImage<S>>);

LFR_INSTANTIATE(float)
LFR_INSTANTIATE(double)

#undef LFR_INSTANTIATE

} // namespace lfr
