#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ssae/dataset.hpp"
#include "ssae/distortion.hpp"
#include "ssae/nn.hpp"
#include "ssae/objectives.hpp"

namespace ssae {

struct ScheduleStage {
    int side = 0;
    int steps = 0;
};

std::vector<ScheduleStage> parse_schedule(const std::string& text);  // "64:500,128:500"
std::string schedule_to_string(const std::vector<ScheduleStage>& schedule);

struct TrainConfig {
    ObjectiveConfig objective;
    double learning_rate = 1e-4;
    int batch_size = 8;
    std::vector<ScheduleStage> schedule;  // sides non-decreasing, divisible by 8
    bool early_stop = false;              // defaulted on for v3 by the CLI
    int patience = 5;                     // non-improving evaluations before stopping
    int eval_interval = 50;               // steps between validation evaluations
    uint64_t seed = 1;
    double val_fraction = 0.1;
    DistortionConfig distortion;
    AugmentationPolicy augmentation;
    int checkpoint_interval = 0;  // extra resume snapshots every N steps (0 = stage ends only)
    int dump_samples = 0;         // debug triptychs to write at the first step
    std::filesystem::path dump_dir;

    void validate() const;
};

struct TrainState {
    long step = 0;
    int side = 0;
    double best_val = 0.0;
    long best_step = -1;
    bool early_stopped = false;
    std::vector<double> loss_history;                  // one entry per step
    std::vector<int> side_history;                     // input side at each step
    std::vector<std::pair<long, double>> val_history;  // (step, criterion)
    std::vector<std::vector<std::string>> batch_audit; // per-step image provenance
    std::map<std::string, std::filesystem::path> checkpoints;
};

struct TrainResult {
    std::unique_ptr<nn::Network> net;
    TrainState state;
};

// Self-supervised optimisation: samples ground-truth train images, distorts
// them on the fly (fresh masks every batch), minimises the configured
// objective with Adam, follows the progressive resize schedule and manages
// checkpoints under <run_dir>/checkpoints. Deterministic for fixed seeds.
TrainResult train(const DatasetIndex& index, const nn::ModelConfig& model_cfg,
                  const TrainConfig& cfg, const std::filesystem::path& run_dir,
                  bool resume = false);

// Early-stopping measure on the normal-only validation split: v1 tracks the
// clean reconstruction error ||F(X) - X||_2; v2/v3 track the objective on
// validation samples distorted with a fixed validation seed.
double validation_criterion(nn::Network& net, const DatasetIndex& index, const TrainConfig& cfg,
                            int side);

// Loss / criterion log as CSV rows of (step, side, train_loss, val_criterion).
std::string loss_log_to_csv(const TrainState& state);

}  // namespace ssae
