#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>

#include "tcomplete/ad.hpp"
#include "tcomplete/config.hpp"
#include "tcomplete/geom.hpp"
#include "tcomplete/nn.hpp"
#include "tcomplete/refine.hpp"
#include "tcomplete/stage1.hpp"
#include "tcomplete/temporal.hpp"

namespace tcomplete::model {

// The complete network: per-resolution alignment and encoding, the recurrent
// shape-code unit, the sliding-window feature fuser, and the graph
// deformation head, all parameterized over one store so freezing, optimizer
// state, and checkpoints cover the whole pipeline uniformly.
class CompletionModel {
public:
    CompletionModel(const ModelConfig& cfg, std::uint64_t init_seed,
                    stage1::InitMode mode = stage1::InitMode::Identity);

    CompletionModel(const CompletionModel&) = delete;
    CompletionModel& operator=(const CompletionModel&) = delete;

    struct FrameResult {
        stage1::Stage1Output s1;
        refine::Stage2Output s2;
        bool used_recurrence = false;
    };

    // Streaming forward over one frame: encode, optionally advance the
    // recurrent unit (its new top hidden replaces the shape code before
    // decoding), push the aligned cloud into the window, then refine.
    // Mutates `state`; `frame_index` must be strictly increasing per stream.
    FrameResult process_frame(ad::Tape& tape, const PointCloud& frame,
                              temporal::TemporalState& state, std::int64_t frame_index,
                              bool use_recurrence);

    // Stage-1 only (no temporal state, no refinement): encode + decode.
    stage1::Stage1Output stage1_forward(ad::Tape& tape, const PointCloud& frame);

    temporal::TemporalState make_state() const;

    const ModelConfig& config() const { return cfg_; }
    nn::ParameterStore& params() { return store_; }
    const nn::ParameterStore& params() const { return store_; }
    const stage1::Stage1Net& stage1() const { return stage1_; }
    const temporal::GruStack& gru() const { return gru_; }
    temporal::WindowFuser& fuser() { return fuser_; }
    const temporal::WindowFuser& fuser() const { return fuser_; }
    const refine::GcnDeformer& deformer() const { return gcn_; }

private:
    ModelConfig cfg_;
    nn::ParameterStore store_;
    Rng init_rng_;  // consumed during member construction only
    stage1::Stage1Net stage1_;
    temporal::GruStack gru_;
    temporal::WindowFuser fuser_;
    refine::GcnDeformer gcn_;
};

// ---------------------------------------------------------------------------
// Checkpoints ("TCKP"): model configuration, every named parameter tensor
// with its optimizer moments, the optimizer step counter, and a free-form
// metadata section (training stage, epoch, ...). Round-trips are bit-exact.
// ---------------------------------------------------------------------------

struct Checkpoint {
    std::unique_ptr<CompletionModel> model;
    ConfigMap meta;
    std::int64_t adam_steps = 0;
};

void save_checkpoint(const std::filesystem::path& path, const CompletionModel& model,
                     std::int64_t adam_steps, const ConfigMap& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Session state ("TSES"): the recurrent hidden vectors plus the sliding
// window of aligned clouds and their frame indices. The byte size depends
// only on the model configuration once the window is full, never on how many
// frames were processed. Structural corruption raises IoError; a valid file
// whose dimensions disagree with the model raises PreconditionError.
// ---------------------------------------------------------------------------

void save_session(const std::filesystem::path& path, const temporal::TemporalState& state);
temporal::TemporalState load_session(const std::filesystem::path& path,
                                     const TemporalConfig& cfg);

}  // namespace tcomplete::model
