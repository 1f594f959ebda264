#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tcomplete/losses.hpp"

namespace tcomplete {

// Flat "key = value" configuration text ('#' comments). Keys are namespaced
// with dots; integer lists are comma-separated.
class ConfigMap {
public:
    ConfigMap() = default;

    static ConfigMap parse(std::istream& in);
    static ConfigMap load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    int get_int(const std::string& key, int fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Model hyperparameters
// ---------------------------------------------------------------------------

struct EncoderConfig {
    int n = 2048;        // input cloud size (divisible by 4)
    int n_coarse = 2048; // coarse decoder output size
    int d_s = 1280;      // shape code width

    // Per-resolution input transform nets (point MLP, pooled FC trunk).
    std::vector<int> tnet_point_widths = {64, 128, 256};
    std::vector<int> tnet_fc_widths = {128, 64};

    // Shared per-point encoder; the feature transform applies after the last
    // pre width (C = enc_pre_widths.back()).
    std::vector<int> enc_pre_widths = {64, 128, 256};
    std::vector<int> enc_post_widths = {512, 1280};

    // Feature transform net emitting the CxC matrix.
    std::vector<int> feat_tnet_point_widths = {128, 256};
    std::vector<int> feat_tnet_fc_widths = {128};

    // Concatenated per-resolution codes (3*d_s) down to d_s.
    std::vector<int> reduction_widths = {1280};

    // Fully connected decoder: d_s -> ... -> 3*n_coarse.
    std::vector<int> decoder_widths = {1024, 1024};

    int feature_channels() const { return enc_pre_widths.back(); }
    void validate() const;
};

struct TemporalConfig {
    int gru_layers = 2;
    int hidden = 1280;   // equals the shape-code width
    int window = 3;      // sliding-window size W
    int se_reduction = 4;

    // Ball-feature extractor: (rel pos, dist) = 4 inputs -> C_fe.
    std::vector<int> fe_widths = {32, 64, 64};
    // Window fusion: window*C_fe -> ... -> C_f.
    std::vector<int> fuse_widths = {128, 128};

    int fe_channels() const { return fe_widths.back(); }
    int fused_channels() const { return fuse_widths.back(); }
    void validate() const;
};

struct RefineConfig {
    int n_out = 2048;          // refined output size (half from each source)
    int controlling = 256;     // controlling points sampled from P_align0
    double ball_radius = 0.1;  // grouping radius in normalized units
    int ball_cap = 16;         // max points per ball
    int knn_k = 8;             // adjacency graph degree
    // Graph convolution trunk; input width is 3 + C_f, last width must be 3.
    std::vector<int> gcn_widths = {128, 128, 64, 3};

    void validate() const;
};

struct ModelConfig {
    EncoderConfig encoder;
    TemporalConfig temporal;
    RefineConfig refine;
    LossWeights loss;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class TrainStage { Align, Refine, Temporal };

std::string to_string(TrainStage stage);
TrainStage train_stage_from_string(const std::string& s);

struct TrainConfig {
    TrainStage stage = TrainStage::Align;
    int batch = 16;          // gradient accumulation size
    int epochs = 10;
    double lr = 1e-3;
    double lr_scale_frozen_parts = 0.1;  // temporal stage: non-temporal parameter LR factor
    std::uint64_t seed = 1;
    int frames_per_sample = 1;  // 3 during the temporal stage
    int sequences_per_shape = 4;  // temporal-stage windows drawn per shape per epoch
    double orth_weight = 1e-3;    // feature-transform orthogonality penalty

    void validate() const;
};

// ---------------------------------------------------------------------------
// Profiles and file round-trip
// ---------------------------------------------------------------------------

// Paper-scale defaults (2048 points, 1280-dim codes).
ModelConfig full_profile();

// Small profile sized for CPU training and the test suite
// (256 points, 256-dim codes).
ModelConfig desk_profile();

// Reads model + loss keys from a ConfigMap over the given base profile.
ModelConfig model_config_from(const ConfigMap& map, const ModelConfig& base);
// Writes every model key back into a ConfigMap.
void model_config_to(const ModelConfig& cfg, ConfigMap& map);

// Reads train.* keys; honours the TCOMPLETE_SEED environment override.
TrainConfig train_config_from(const ConfigMap& map, const TrainConfig& base);
void train_config_to(const TrainConfig& cfg, ConfigMap& map);

}  // namespace tcomplete
