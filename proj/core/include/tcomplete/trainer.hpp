#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tcomplete/config.hpp"
#include "tcomplete/data.hpp"
#include "tcomplete/losses.hpp"
#include "tcomplete/model.hpp"

namespace tcomplete::train {

// One metrics row per optimizer step: loss parts averaged over the step's
// samples. val_cd_e4 (validation chamfer x 1e4) is filled on rows that close
// an epoch and is -1 elsewhere.
struct MetricRow {
    std::int64_t step = 0;
    std::string stage;
    int epoch = 0;
    LossReport loss;
    double orth = 0.0;
    double lr = 0.0;
    double val_cd_e4 = -1.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricRow& row);
// Parses a metrics CSV written by train_stage (header required).
std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path);

struct TrainOptions {
    ModelConfig model;
    TrainConfig train;
    std::filesystem::path dataset_root;   // contains train/ and optionally val/
    std::filesystem::path checkpoint_out;
    std::filesystem::path metrics_csv;    // appended; created with header if new
    std::filesystem::path checkpoint_in;  // empty = fresh start (align stage only)
    int max_epochs_this_call = 0;         // 0 = run to train.epochs; else stop early
};

struct TrainSummary {
    std::int64_t steps = 0;       // optimizer steps run in this call
    int epochs_run = 0;
    double final_val_cd_e4 = -1.0;
    std::int64_t laplacian_skips = 0;  // samples whose smoothness term degenerated
    std::vector<MetricRow> rows;       // rows appended by this call
};

// Runs one training stage over the dataset's train split.
//
// Stages form a pipeline: "align" trains the alignment/encoding network on
// the assignment, translation, and coarse-chamfer objectives; "refine"
// freezes it and trains the deformation stage (chamfer + smoothness);
// "temporal" unfreezes everything, scales non-temporal parameters' learning
// rate down, and optimizes the full objective over 3-frame unrolls with
// gradients flowing through the recurrence.
//
// A checkpoint is written after every epoch. Passing it back as
// checkpoint_in resumes: the same stage continues at the recorded epoch, and
// a later stage verifies its prerequisite stages completed (OrderingError
// otherwise). Entering a new stage resets the optimizer moments.
//
// The whole train split is held in memory; per-epoch sample order is drawn
// from Rng(mix(seed, epoch)), so runs are reproducible and resume exactly.
TrainSummary train_stage(const TrainOptions& opt);

// Central-difference verification of the analytic gradients behind each loss
// term and the recurrent unit, on freshly randomized small configurations.
// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1).
struct GradientCheckReport {
    double chamfer_rel = 0.0;
    double huber_rel = 0.0;
    double laplacian_rel = 0.0;
    double gru_rel = 0.0;
    int configs_per_term = 0;

    double max_rel() const {
        return std::max(std::max(chamfer_rel, huber_rel), std::max(laplacian_rel, gru_rel));
    }
};

GradientCheckReport verify_gradients(int configs_per_term, std::uint64_t seed);

}  // namespace tcomplete::train
