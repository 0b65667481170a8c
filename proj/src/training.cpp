#include "lfr/training.hpp"

#include "lfr/detail/parallel.hpp"
#include "lfr/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace lfr {
namespace {

void scale_clamped(Image& image, float scale) {
    for (auto& c : image.channel) c = (c.array() * scale).cwiseMax(0.f).cwiseMin(1.f).matrix();
}

struct AdamState {
    Parameters<float> m;
    Parameters<float> v;
    long step = 0;
};

void adam_update(Parameters<float>& params, const Parameters<float>& grad, AdamState& state, double lr,
                 const TrainConfig& cfg) {
    ++state.step;
    const float b1 = float(cfg.beta1);
    const float b2 = float(cfg.beta2);
    const float c1 = float(1.0 / (1.0 - std::pow(cfg.beta1, double(state.step))));
    const float c2 = float(1.0 / (1.0 - std::pow(cfg.beta2, double(state.step))));
    const float step = float(lr);
    const float eps = float(cfg.epsilon);

    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
        m = b1 * m + (1.f - b1) * g;
        v = b2 * v + (1.f - b2) * g.square();
        p -= step * (m * c1) / ((v * c2).sqrt() + eps);
    };
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        auto& P = params.layers[i];
        const auto& G = grad.layers[i];
        auto& M = state.m.layers[i];
        auto& V = state.v.layers[i];
        auto pw = P.weight.array();
        auto mw = M.weight.array();
        auto vw = V.weight.array();
        update(pw, G.weight.array(), mw, vw);
        auto pb = P.bias.array();
        auto mb = M.bias.array();
        auto vb = V.bias.array();
        update(pb, G.bias.array(), mb, vb);
    }
}

} // namespace

void TrainConfig::validate() const {
    if (!(lr0 > 0.0) || !(decay > 0.0) || decay_every < 1 || batch < 1 || epochs < 1)
        throw InvalidArgument("training config: lr0, decay, decay_every, batch and epochs must be positive");
    if (brightness_min > brightness_max || !(brightness_min > 0.0))
        throw InvalidArgument("training config: invalid brightness range");
    if (noise_min < 0.0 || noise_min > noise_max) throw InvalidArgument("training config: invalid noise range");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
        throw InvalidArgument("training config: invalid ADAM constants");
}

double lr_at(long iteration, const TrainConfig& config) {
    if (iteration < 0) throw InvalidArgument("iteration must be >= 0");
    return config.lr0 * std::pow(config.decay, double(iteration / config.decay_every));
}

TrainingPair augment(const TrainingPair& pair, std::mt19937_64& rng, const TrainConfig& config) {
    TrainingPair out = pair;
    std::uniform_real_distribution<double> brightness(config.brightness_min, config.brightness_max);
    std::uniform_real_distribution<double> sigma_dist(config.noise_min, config.noise_max);
    const float scale = float(brightness(rng));
    const double sigma = sigma_dist(rng);

    scale_clamped(out.incomplete.epi.pixels, scale);
    scale_clamped(out.intact.epi.pixels, scale);
    if (sigma > 0.0) {
        std::normal_distribution<float> noise(0.f, float(sigma));
        auto& px = out.incomplete.epi.pixels;
        for (int r = 0; r < out.incomplete.epi.rows(); ++r) {
            if (!out.incomplete.epi.valid(r)) continue;
            for (auto& c : px.channel)
                for (Eigen::Index s = 0; s < c.cols(); ++s) c(r, s) = std::clamp(c(r, s) + noise(rng), 0.f, 1.f);
        }
    }
    return out;
}

TrainResult train(const std::vector<TrainingPair>& dataset, const NetworkConfig& net_config,
                  const TrainConfig& config, const TrainProgress& progress) {
    config.validate();
    net_config.validate();
    if (dataset.empty()) throw InvalidArgument("training dataset is empty");

    const detail::FlushDenormals ftz;
    TrainResult result;
    result.params = build_network<float>(net_config, config.seed);
    AdamState adam{result.params.zeros_like(), result.params.zeros_like(), 0};
    std::mt19937_64 rng(config.seed ^ 0x5DEECE66DULL);

    const int n = int(dataset.size());
    const int batch = std::min(config.batch, n);
    result.iterations_per_epoch = (n + batch - 1) / batch;

    std::vector<int> order(static_cast<std::size_t>(n));
    std::vector<Image> inputs;
    std::vector<Image> targets;
    long iteration = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (int begin = 0; begin < n; begin += batch) {
            const int end = std::min(n, begin + batch);
            inputs.clear();
            targets.clear();
            for (int i = begin; i < end; ++i) {
                const TrainingPair& src = dataset[std::size_t(order[std::size_t(i)])];
                if (config.augment) {
                    TrainingPair p = augment(src, rng, config);
                    inputs.push_back(std::move(p.incomplete.epi.pixels));
                    targets.push_back(std::move(p.intact.epi.pixels));
                } else {
                    inputs.push_back(src.incomplete.epi.pixels);
                    targets.push_back(src.intact.epi.pixels);
                }
            }
            const auto g = gradient<float>(result.params, inputs, targets);
            const double lr = lr_at(iteration, config);
            adam_update(result.params, g.grad, adam, lr, config);
            result.loss.push_back(g.loss);
            result.lr.push_back(lr);
            if (progress) progress(iteration, epoch, g.loss, lr);
            ++iteration;
        }
    }
    return result;
}

std::vector<double> epoch_smoothed_loss(const TrainResult& result, int window) {
    std::vector<double> out;
    const std::size_t per_epoch = std::size_t(std::max(1, result.iterations_per_epoch));
    for (std::size_t end = per_epoch; end <= result.loss.size(); end += per_epoch) {
        const std::size_t begin = end > std::size_t(window) ? end - std::size_t(window) : 0;
        out.push_back(std::accumulate(result.loss.begin() + long(begin), result.loss.begin() + long(end), 0.0) /
                      double(end - begin));
    }
    return out;
}

void write_loss_csv(const TrainResult& result, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "iteration,epoch,lr,loss\n";
    out.precision(9);
    const int per_epoch = std::max(1, result.iterations_per_epoch);
    for (std::size_t i = 0; i < result.loss.size(); ++i)
        out << i << ',' << int(i) / per_epoch << ',' << result.lr[i] << ',' << result.loss[i] << '\n';
}

void read_config_file(const std::filesystem::path& path, NetworkConfig& net, TrainConfig& train) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    try {
        nlohmann::json j;
        in >> j;
        if (j.contains("network")) {
            const auto& n = j.at("network");
            net.blocks_per_section = n.value("blocks_per_section", net.blocks_per_section);
            net.filters = n.value("filters", net.filters);
            net.kernels = n.value("kernels", net.kernels);
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            train.lr0 = t.value("lr0", train.lr0);
            train.decay = t.value("decay", train.decay);
            train.decay_every = t.value("decay_every", train.decay_every);
            train.batch = t.value("batch", train.batch);
            train.epochs = t.value("epochs", train.epochs);
            train.brightness_min = t.value("brightness_min", train.brightness_min);
            train.brightness_max = t.value("brightness_max", train.brightness_max);
            train.noise_min = t.value("noise_min", train.noise_min);
            train.noise_max = t.value("noise_max", train.noise_max);
            train.augment = t.value("augment", train.augment);
            train.beta1 = t.value("beta1", train.beta1);
            train.beta2 = t.value("beta2", train.beta2);
            train.epsilon = t.value("epsilon", train.epsilon);
            train.seed = t.value("seed", train.seed);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed config '" + path.string() + "': " + e.what());
    }
    net.validate();
    train.validate();
}

} // namespace lfr
