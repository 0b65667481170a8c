#pragma once

#include "lfr/network.hpp"
#include "lfr/sampling.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

namespace lfr {

struct TrainConfig {
    double lr0 = 1e-4;
    double decay = 0.96;
    int decay_every = 2256;
    int batch = 30;
    int epochs = 5;

    // Augmentation: brightness scale ~ U[brightness_min, brightness_max] on
    // both windows, Gaussian noise sigma ~ U[noise_min, noise_max] on the
    // valid rows of the incomplete window.
    double brightness_min = 0.8;
    double brightness_max = 1.2;
    double noise_min = 0.0;
    double noise_max = 0.02;
    bool augment = true;

    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    std::uint64_t seed = 1;

    void validate() const;
};

// Staircase schedule: lr0 * decay^floor(iteration / decay_every).
double lr_at(long iteration, const TrainConfig& config);

TrainingPair augment(const TrainingPair& pair, std::mt19937_64& rng, const TrainConfig& config);

struct TrainResult {
    Parameters<float> params;
    std::vector<double> loss;   // per iteration, before the update
    std::vector<double> lr;     // per iteration
    int iterations_per_epoch = 0;
};

using TrainProgress = std::function<void(long iteration, int epoch, double loss, double lr)>;

// ADAM on shuffled mini-batches; every random draw comes from `config.seed`.
TrainResult train(const std::vector<TrainingPair>& dataset, const NetworkConfig& net_config,
                  const TrainConfig& config, const TrainProgress& progress = {});

// Mean of the last min(window, n) losses at the end of every epoch.
std::vector<double> epoch_smoothed_loss(const TrainResult& result, int window = 100);

void write_loss_csv(const TrainResult& result, const std::filesystem::path& path);

// JSON config file with optional "network" and "train" objects; missing
// keys keep their defaults.
void read_config_file(const std::filesystem::path& path, NetworkConfig& net, TrainConfig& train);

} // namespace lfr
