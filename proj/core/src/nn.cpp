#include "tcomplete/nn.hpp"

#include <cmath>

#include "tcomplete/errors.hpp"

namespace tcomplete::nn {

// ---------------------------------------------------------------------------
// ParameterStore
// ---------------------------------------------------------------------------

int ParameterStore::add(const std::string& name, Mat value) {
    if (name.empty()) throw PreconditionError("parameter name must not be empty");
    if (find(name) >= 0) throw PreconditionError("duplicate parameter name: " + name);
    Parameter p;
    p.name = name;
    p.grad = Mat::Zero(value.rows(), value.cols());
    p.adam_m = Mat::Zero(value.rows(), value.cols());
    p.adam_v = Mat::Zero(value.rows(), value.cols());
    p.value = std::move(value);
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
}

int ParameterStore::find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return static_cast<int>(i);
    return -1;
}

void ParameterStore::begin_step(const ad::Tape& tape) {
    tape_ = &tape;
    for (Parameter& p : params_) p.node = -1;
}

int ParameterStore::use(ad::Tape& tape, int id) {
    if (&tape != tape_)
        throw PreconditionError("ParameterStore::use called without begin_step on this tape");
    Parameter& p = param(id);
    if (p.node < 0) p.node = tape.leaf(p.value);
    return p.node;
}

void ParameterStore::accumulate(const ad::Tape& tape) {
    if (&tape != tape_)
        throw PreconditionError("ParameterStore::accumulate called on a foreign tape");
    for (Parameter& p : params_)
        if (p.node >= 0) p.grad += tape.grad(p.node);
}

void ParameterStore::zero_grads() {
    for (Parameter& p : params_) p.grad.setZero();
}

void ParameterStore::scale_grads(double s) {
    for (Parameter& p : params_) p.grad *= s;
}

void ParameterStore::set_frozen(const std::string& prefix, bool frozen) {
    for (Parameter& p : params_)
        if (p.name.rfind(prefix, 0) == 0) p.frozen = frozen;
}

void ParameterStore::set_lr_scale(const std::string& prefix, double scale) {
    for (Parameter& p : params_)
        if (p.name.rfind(prefix, 0) == 0) p.lr_scale = scale;
}

std::size_t ParameterStore::count_frozen() const {
    std::size_t n = 0;
    for (const Parameter& p : params_) n += p.frozen ? 1 : 0;
    return n;
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

namespace {

Mat uniform_mat(Rng& rng, int rows, int cols, double bound) {
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = (rng.uniform() * 2.0 - 1.0) * bound;
    return m;
}

}  // namespace

Linear::Linear(ParameterStore& store, const std::string& name, int in, int out,
               Rng& rng, Init init)
    : in_(in), out_(out) {
    if (in <= 0 || out <= 0)
        throw PreconditionError("Linear '" + name + "': sizes must be positive");
    Mat w, b;
    switch (init) {
        case Init::FanInUniform: {
            const double bound = 1.0 / std::sqrt(static_cast<double>(in));
            w = uniform_mat(rng, in, out, bound);
            b = uniform_mat(rng, 1, out, bound);
            break;
        }
        case Init::Zero:
            w = Mat::Zero(in, out);
            b = Mat::Zero(1, out);
            break;
    }
    w_ = store.add(name + ".w", std::move(w));
    b_ = store.add(name + ".b", std::move(b));
}

int Linear::forward(ad::Tape& tape, ParameterStore& store, int x) const {
    if (tape.cols(x) != in_)
        throw SizeError("Linear: input has " + std::to_string(tape.cols(x)) +
                        " columns, expected " + std::to_string(in_));
    const int w = store.use(tape, w_);
    const int b = store.use(tape, b_);
    return tape.add_rowvec(tape.matmul(x, w), b);
}

Mlp::Mlp(ParameterStore& store, const std::string& name, int in,
         const std::vector<int>& widths, Rng& rng, Final final_act)
    : final_act_(final_act) {
    if (widths.empty()) throw PreconditionError("Mlp '" + name + "': needs at least one width");
    int cur = in;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        layers_.emplace_back(store, name + ".l" + std::to_string(i), cur, widths[i], rng);
        cur = widths[i];
    }
}

int Mlp::forward(ad::Tape& tape, ParameterStore& store, int x) const {
    int h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        h = layers_[i].forward(tape, store, h);
        const bool last = (i + 1 == layers_.size());
        if (!last) {
            h = tape.relu(h);
        } else {
            switch (final_act_) {
                case Final::Linear: break;
                case Final::Relu: h = tape.relu(h); break;
                case Final::Tanh: h = tape.tanh_op(h); break;
            }
        }
    }
    return h;
}

int Mlp::in() const { return layers_.front().in(); }
int Mlp::out() const { return layers_.back().out(); }

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void Adam::step(ParameterStore& store, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Parameter& p : store.all()) {
        if (p.frozen) continue;
        p.adam_m = cfg_.beta1 * p.adam_m + (1.0 - cfg_.beta1) * p.grad;
        p.adam_v = cfg_.beta2 * p.adam_v + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
        const Mat m_hat = p.adam_m / bc1;
        const Mat v_hat = p.adam_v / bc2;
        p.value -= (lr * p.lr_scale) *
                   (m_hat.array() / (v_hat.array().sqrt() + cfg_.eps)).matrix();
    }
}

double cosine_decay(double base, int step, int total, double min_factor) {
    if (total <= 0) throw PreconditionError("cosine_decay: total must be positive");
    const double s = std::min(std::max(step, 0), total);
    const double cosine = 0.5 * (1.0 + std::cos(M_PI * s / static_cast<double>(total)));
    return base * (min_factor + (1.0 - min_factor) * cosine);
}

}  // namespace tcomplete::nn
