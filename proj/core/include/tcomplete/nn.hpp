#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcomplete/ad.hpp"
#include "tcomplete/rng.hpp"

namespace tcomplete::nn {

using Mat = Eigen::MatrixXd;

// One trainable tensor. Gradients accumulate across tapes within an
// optimization step; Adam moments live here so a checkpoint of the store
// captures the full optimizer state.
struct Parameter {
    std::string name;
    Mat value;
    Mat grad;          // accumulated by ParameterStore::accumulate
    Mat adam_m;        // first-moment estimate
    Mat adam_v;        // second-moment estimate
    bool frozen = false;
    double lr_scale = 1.0;  // per-parameter learning-rate multiplier

    int node = -1;     // leaf handle in the current tape (-1 = unused)
};

// Owns every Parameter of a model in insertion order. Layers keep integer
// ids into the store and call use() during the forward pass; a parameter
// used several times in one tape (shared weights across resolutions or
// frames) maps to a single leaf, so its adjoints merge automatically.
class ParameterStore {
public:
    ParameterStore() = default;
    ParameterStore(const ParameterStore&) = delete;
    ParameterStore& operator=(const ParameterStore&) = delete;

    // Registers a tensor under a unique name; returns its id.
    int add(const std::string& name, Mat value);

    int find(const std::string& name) const;  // -1 when absent
    Parameter& param(int id) { return params_.at(static_cast<std::size_t>(id)); }
    const Parameter& param(int id) const { return params_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return params_.size(); }
    const std::vector<Parameter>& all() const { return params_; }
    std::vector<Parameter>& all() { return params_; }

    // Starts recording against a fresh tape: clears every leaf handle.
    void begin_step(const ad::Tape& tape);
    // Returns the tape leaf for a parameter, creating it on first use.
    int use(ad::Tape& tape, int id);
    // Adds d(loss)/d(param) from the tape into Parameter::grad for every
    // parameter used since begin_step. Call after tape.backward().
    void accumulate(const ad::Tape& tape);

    void zero_grads();
    void scale_grads(double s);

    // Freeze / learning-rate controls via name prefix ("" matches all).
    void set_frozen(const std::string& prefix, bool frozen);
    void set_lr_scale(const std::string& prefix, double scale);
    std::size_t count_frozen() const;

private:
    std::vector<Parameter> params_;
    const ad::Tape* tape_ = nullptr;
};

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

enum class Init {
    FanInUniform,  // W, b ~ U(-1/sqrt(in), 1/sqrt(in))
    Zero,          // W = 0, b = 0 (identity-at-start output heads)
};

// Affine map y = x W + b with W stored (in, out) and b (1, out).
class Linear {
public:
    Linear() = default;
    Linear(ParameterStore& store, const std::string& name, int in, int out,
           Rng& rng, Init init = Init::FanInUniform);

    int forward(ad::Tape& tape, ParameterStore& store, int x) const;

    int in() const { return in_; }
    int out() const { return out_; }
    int weight_id() const { return w_; }
    int bias_id() const { return b_; }

private:
    int w_ = -1;
    int b_ = -1;
    int in_ = 0;
    int out_ = 0;
};

// Stack of Linear layers with ReLU between them; the last layer's
// activation is selectable (regression heads stay linear).
class Mlp {
public:
    enum class Final { Linear, Relu, Tanh };

    Mlp() = default;
    Mlp(ParameterStore& store, const std::string& name, int in,
        const std::vector<int>& widths, Rng& rng, Final final_act = Final::Relu);

    int forward(ad::Tape& tape, ParameterStore& store, int x) const;

    int in() const;
    int out() const;
    const std::vector<Linear>& layers() const { return layers_; }

private:
    std::vector<Linear> layers_;
    Final final_act_ = Final::Relu;
};

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adaptive-moment optimizer over a ParameterStore. Moments are stored on
// the parameters themselves; the optimizer carries only the step counter.
// Frozen parameters are left bitwise unchanged (values and moments).
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    // Applies one update using the accumulated gradients at learning rate
    // lr (scaled per parameter by Parameter::lr_scale).
    void step(ParameterStore& store, double lr);

    std::int64_t steps_taken() const { return t_; }
    void set_steps_taken(std::int64_t t) { t_ = t; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::int64_t t_ = 0;
};

// Cosine learning-rate decay from base toward base*min_factor over
// total steps; step is clamped to [0, total].
double cosine_decay(double base, int step, int total, double min_factor = 0.0);

}  // namespace tcomplete::nn
