#include "tcomplete/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tcomplete/errors.hpp"

namespace tcomplete {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace

ConfigMap ConfigMap::parse(std::istream& in) {
    ConfigMap map;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: missing '=' at line " + std::to_string(lineno));
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config: empty key at line " + std::to_string(lineno));
        map.values_[key] = value;
    }
    return map;
}

ConfigMap ConfigMap::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path.string());
    return parse(in);
}

void ConfigMap::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config: " + path.string());
    for (const auto& [key, value] : values_) out << key << " = " << value << "\n";
    if (!out) throw IoError("config write failed: " + path.string());
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

int ConfigMap::get_int(const std::string& key, int fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t used = 0;
        const int v = std::stoi(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not an integer: " + it->second);
    }
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not a number: " + it->second);
    }
}

std::vector<int> ConfigMap::get_int_list(const std::string& key,
                                         std::vector<int> fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<int> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoi(trim(item)));
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "' is not an integer list: " + it->second);
        }
    }
    if (out.empty())
        throw ConfigError("config: key '" + key + "' is an empty list");
    return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

void EncoderConfig::validate() const {
    require(n >= 4 && n % 4 == 0, "encoder.n must be positive and divisible by 4");
    require(n_coarse >= 1, "encoder.n_coarse must be >= 1");
    require(d_s >= 1, "encoder.d_s must be >= 1");
    for (const auto* widths : {&tnet_point_widths, &tnet_fc_widths, &enc_pre_widths,
                               &enc_post_widths, &feat_tnet_point_widths, &feat_tnet_fc_widths,
                               &reduction_widths, &decoder_widths}) {
        require(!widths->empty(), "encoder width lists must be non-empty");
        for (int w : *widths) require(w >= 1, "encoder widths must be >= 1");
    }
    require(enc_post_widths.back() == d_s, "encoder.enc_post_widths must end at d_s");
    require(reduction_widths.back() == d_s, "encoder.reduction_widths must end at d_s");
}

void TemporalConfig::validate() const {
    require(gru_layers >= 1, "temporal.gru_layers must be >= 1");
    require(hidden >= 1, "temporal.hidden must be >= 1");
    require(window >= 1, "temporal.window must be >= 1");
    require(se_reduction >= 1 && fuse_widths.back() % se_reduction == 0,
            "temporal.se_reduction must divide the fused channel count");
    require(!fe_widths.empty() && !fuse_widths.empty(), "temporal width lists must be non-empty");
    for (int w : fe_widths) require(w >= 1, "temporal.fe_widths must be >= 1");
    for (int w : fuse_widths) require(w >= 1, "temporal.fuse_widths must be >= 1");
}

void RefineConfig::validate() const {
    require(n_out >= 2 && n_out % 2 == 0, "refine.n_out must be even and >= 2");
    require(controlling >= 1, "refine.controlling must be >= 1");
    require(ball_radius > 0, "refine.ball_radius must be positive");
    require(ball_cap >= 1, "refine.ball_cap must be >= 1");
    require(knn_k >= 1, "refine.knn_k must be >= 1");
    require(!gcn_widths.empty() && gcn_widths.back() == 3, "refine.gcn_widths must end at 3");
    for (int w : gcn_widths) require(w >= 1, "refine.gcn_widths must be >= 1");
}

void ModelConfig::validate() const {
    encoder.validate();
    temporal.validate();
    refine.validate();
    require(loss.valid(), "loss weights must be non-negative");
    require(temporal.hidden == encoder.d_s,
            "temporal.hidden must equal encoder.d_s (the fused code replaces the shape code)");
}

void TrainConfig::validate() const {
    require(batch >= 1, "train.batch must be >= 1");
    require(epochs >= 1, "train.epochs must be >= 1");
    require(lr > 0, "train.lr must be positive");
    require(frames_per_sample == 1 || frames_per_sample == 3,
            "train.frames_per_sample must be 1 or 3");
    if (stage == TrainStage::Temporal)
        require(frames_per_sample == 3, "temporal stage requires frames_per_sample = 3");
    require(sequences_per_shape >= 1, "train.sequences_per_shape must be >= 1");
    require(orth_weight >= 0, "train.orth_weight must be non-negative");
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

std::string to_string(TrainStage stage) {
    switch (stage) {
        case TrainStage::Align: return "align";
        case TrainStage::Refine: return "refine";
        case TrainStage::Temporal: return "temporal";
    }
    return "align";
}

TrainStage train_stage_from_string(const std::string& s) {
    if (s == "align") return TrainStage::Align;
    if (s == "refine") return TrainStage::Refine;
    if (s == "temporal") return TrainStage::Temporal;
    throw ConfigError("config: unknown training stage '" + s + "'");
}

ModelConfig full_profile() { return ModelConfig{}; }

ModelConfig desk_profile() {
    ModelConfig cfg;
    cfg.encoder.n = 256;
    cfg.encoder.n_coarse = 256;
    cfg.encoder.d_s = 256;
    cfg.encoder.tnet_point_widths = {32, 64, 128};
    cfg.encoder.tnet_fc_widths = {64, 32};
    cfg.encoder.enc_pre_widths = {32, 64};
    cfg.encoder.enc_post_widths = {128, 256};
    cfg.encoder.feat_tnet_point_widths = {64, 128};
    cfg.encoder.feat_tnet_fc_widths = {64};
    cfg.encoder.reduction_widths = {256};
    cfg.encoder.decoder_widths = {256, 256};
    cfg.temporal.hidden = 256;
    cfg.temporal.fe_widths = {32, 32};
    cfg.temporal.fuse_widths = {64, 64};
    cfg.refine.n_out = 256;
    cfg.refine.controlling = 64;
    cfg.refine.ball_cap = 8;
    cfg.refine.ball_radius = 0.15;
    cfg.refine.gcn_widths = {64, 64, 32, 3};
    return cfg;
}

// ---------------------------------------------------------------------------
// ConfigMap round-trip
// ---------------------------------------------------------------------------

ModelConfig model_config_from(const ConfigMap& map, const ModelConfig& base) {
    ModelConfig cfg = base;
    auto& e = cfg.encoder;
    e.n = map.get_int("encoder.n", e.n);
    e.n_coarse = map.get_int("encoder.n_coarse", e.n_coarse);
    e.d_s = map.get_int("encoder.d_s", e.d_s);
    e.tnet_point_widths = map.get_int_list("encoder.tnet_point_widths", e.tnet_point_widths);
    e.tnet_fc_widths = map.get_int_list("encoder.tnet_fc_widths", e.tnet_fc_widths);
    e.enc_pre_widths = map.get_int_list("encoder.enc_pre_widths", e.enc_pre_widths);
    e.enc_post_widths = map.get_int_list("encoder.enc_post_widths", e.enc_post_widths);
    e.feat_tnet_point_widths =
        map.get_int_list("encoder.feat_tnet_point_widths", e.feat_tnet_point_widths);
    e.feat_tnet_fc_widths = map.get_int_list("encoder.feat_tnet_fc_widths", e.feat_tnet_fc_widths);
    e.reduction_widths = map.get_int_list("encoder.reduction_widths", e.reduction_widths);
    e.decoder_widths = map.get_int_list("encoder.decoder_widths", e.decoder_widths);

    auto& t = cfg.temporal;
    t.gru_layers = map.get_int("temporal.gru_layers", t.gru_layers);
    t.hidden = map.get_int("temporal.hidden", t.hidden);
    t.window = map.get_int("temporal.window", t.window);
    t.se_reduction = map.get_int("temporal.se_reduction", t.se_reduction);
    t.fe_widths = map.get_int_list("temporal.fe_widths", t.fe_widths);
    t.fuse_widths = map.get_int_list("temporal.fuse_widths", t.fuse_widths);

    auto& r = cfg.refine;
    r.n_out = map.get_int("refine.n_out", r.n_out);
    r.controlling = map.get_int("refine.controlling", r.controlling);
    r.ball_radius = map.get_double("refine.ball_radius", r.ball_radius);
    r.ball_cap = map.get_int("refine.ball_cap", r.ball_cap);
    r.knn_k = map.get_int("refine.knn_k", r.knn_k);
    r.gcn_widths = map.get_int_list("refine.gcn_widths", r.gcn_widths);

    auto& w = cfg.loss;
    w.alpha = map.get_double("loss.alpha", w.alpha);
    w.beta = map.get_double("loss.beta", w.beta);
    w.gamma = map.get_double("loss.gamma", w.gamma);
    w.lambda1 = map.get_double("loss.lambda1", w.lambda1);
    w.lambda2 = map.get_double("loss.lambda2", w.lambda2);
    w.huber_delta = map.get_double("loss.huber_delta", w.huber_delta);

    cfg.validate();
    return cfg;
}

void model_config_to(const ModelConfig& cfg, ConfigMap& map) {
    const auto& e = cfg.encoder;
    map.set("encoder.n", std::to_string(e.n));
    map.set("encoder.n_coarse", std::to_string(e.n_coarse));
    map.set("encoder.d_s", std::to_string(e.d_s));
    map.set("encoder.tnet_point_widths", join_ints(e.tnet_point_widths));
    map.set("encoder.tnet_fc_widths", join_ints(e.tnet_fc_widths));
    map.set("encoder.enc_pre_widths", join_ints(e.enc_pre_widths));
    map.set("encoder.enc_post_widths", join_ints(e.enc_post_widths));
    map.set("encoder.feat_tnet_point_widths", join_ints(e.feat_tnet_point_widths));
    map.set("encoder.feat_tnet_fc_widths", join_ints(e.feat_tnet_fc_widths));
    map.set("encoder.reduction_widths", join_ints(e.reduction_widths));
    map.set("encoder.decoder_widths", join_ints(e.decoder_widths));

    const auto& t = cfg.temporal;
    map.set("temporal.gru_layers", std::to_string(t.gru_layers));
    map.set("temporal.hidden", std::to_string(t.hidden));
    map.set("temporal.window", std::to_string(t.window));
    map.set("temporal.se_reduction", std::to_string(t.se_reduction));
    map.set("temporal.fe_widths", join_ints(t.fe_widths));
    map.set("temporal.fuse_widths", join_ints(t.fuse_widths));

    const auto& r = cfg.refine;
    map.set("refine.n_out", std::to_string(r.n_out));
    map.set("refine.controlling", std::to_string(r.controlling));
    {
        std::ostringstream radius;
        radius.precision(17);
        radius << r.ball_radius;
        map.set("refine.ball_radius", radius.str());
    }
    map.set("refine.ball_cap", std::to_string(r.ball_cap));
    map.set("refine.knn_k", std::to_string(r.knn_k));
    map.set("refine.gcn_widths", join_ints(r.gcn_widths));

    const auto& w = cfg.loss;
    auto set_double = [&map](const char* key, double v) {
        std::ostringstream ss;
        ss.precision(17);
        ss << v;
        map.set(key, ss.str());
    };
    set_double("loss.alpha", w.alpha);
    set_double("loss.beta", w.beta);
    set_double("loss.gamma", w.gamma);
    set_double("loss.lambda1", w.lambda1);
    set_double("loss.lambda2", w.lambda2);
    set_double("loss.huber_delta", w.huber_delta);
}

TrainConfig train_config_from(const ConfigMap& map, const TrainConfig& base) {
    TrainConfig cfg = base;
    cfg.stage = train_stage_from_string(map.get_string("train.stage", to_string(cfg.stage)));
    cfg.batch = map.get_int("train.batch", cfg.batch);
    cfg.epochs = map.get_int("train.epochs", cfg.epochs);
    cfg.lr = map.get_double("train.lr", cfg.lr);
    cfg.lr_scale_frozen_parts =
        map.get_double("train.lr_scale_frozen_parts", cfg.lr_scale_frozen_parts);
    cfg.seed = static_cast<std::uint64_t>(
        map.get_double("train.seed", static_cast<double>(cfg.seed)));
    cfg.frames_per_sample = map.get_int("train.frames_per_sample", cfg.frames_per_sample);
    cfg.sequences_per_shape = map.get_int("train.sequences_per_shape", cfg.sequences_per_shape);
    cfg.orth_weight = map.get_double("train.orth_weight", cfg.orth_weight);

    if (const char* env = std::getenv("TCOMPLETE_SEED")) {
        try {
            cfg.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("TCOMPLETE_SEED is not an unsigned integer");
        }
    }
    cfg.validate();
    return cfg;
}

void train_config_to(const TrainConfig& cfg, ConfigMap& map) {
    map.set("train.stage", to_string(cfg.stage));
    map.set("train.batch", std::to_string(cfg.batch));
    map.set("train.epochs", std::to_string(cfg.epochs));
    {
        std::ostringstream ss;
        ss.precision(17);
        ss << cfg.lr;
        map.set("train.lr", ss.str());
    }
    {
        std::ostringstream ss;
        ss.precision(17);
        ss << cfg.lr_scale_frozen_parts;
        map.set("train.lr_scale_frozen_parts", ss.str());
    }
    map.set("train.seed", std::to_string(cfg.seed));
    map.set("train.frames_per_sample", std::to_string(cfg.frames_per_sample));
    map.set("train.sequences_per_shape", std::to_string(cfg.sequences_per_shape));
    {
        std::ostringstream ss;
        ss.precision(17);
        ss << cfg.orth_weight;
        map.set("train.orth_weight", ss.str());
    }
}

}  // namespace tcomplete
