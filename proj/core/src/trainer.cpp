#include "tcomplete/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tcomplete/ad.hpp"
#include "tcomplete/errors.hpp"
#include "tcomplete/nn.hpp"
#include "tcomplete/refine.hpp"

namespace tcomplete::train {

namespace {

constexpr double kLrFloor = 0.01;  // cosine decay bottoms out at 1% of base

// ---------------------------------------------------------------------------
// Metrics CSV
// ---------------------------------------------------------------------------

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Stage bookkeeping in checkpoint metadata
// ---------------------------------------------------------------------------

bool has_completed(const ConfigMap& meta, const std::string& stage) {
    std::stringstream ss(meta.get_string("train.completed", ""));
    std::string item;
    while (std::getline(ss, item, ','))
        if (item == stage) return true;
    return false;
}

std::string with_completed(const ConfigMap& meta, const std::string& stage) {
    if (has_completed(meta, stage)) return meta.get_string("train.completed", "");
    std::string list = meta.get_string("train.completed", "");
    if (!list.empty()) list += ",";
    return list + stage;
}

// ---------------------------------------------------------------------------
// Per-sample losses
// ---------------------------------------------------------------------------

struct SampleLoss {
    int node = -1;       // scalar objective without the orthogonality penalty
    int orth_node = -1;  // scalar penalty node, -1 when absent
    LossReport parts;    // concrete values (sums over the sample's frames)
    bool lap_skipped = false;
};

// Multi-resolution assignment loss + translation Huber + coarse chamfer for
// one already-encoded frame; shared by the align and temporal stages.
int stage1_objective(ad::Tape& tape, const stage1::Stage1Output& s1,
                     const data::TrainingSequence& seq, int frame, const LossWeights& w,
                     SampleLoss& out) {
    const auto& gt = seq.gt_aligned_partials[static_cast<std::size_t>(frame)];
    const int e0 = tape.emd_pair(s1.aligned_nodes[0], tape.leaf(gt[0].pts));
    const int e1 = tape.emd_pair(s1.aligned_nodes[1], tape.leaf(gt[1].pts));
    const int e2 = tape.emd_pair(s1.aligned_nodes[2], tape.leaf(gt[2].pts));
    const int emd_node =
        tape.add(e0, tape.add(tape.scale(e1, w.lambda1), tape.scale(e2, w.lambda2)));

    const int t_stack = tape.concat_rows(
        s1.translation_nodes[0], tape.concat_rows(s1.translation_nodes[1], s1.translation_nodes[2]));
    const Vec3 t_gt = seq.gt_poses[static_cast<std::size_t>(frame)].inverse().translation;
    const int huber_node = tape.huber_rows(t_stack, t_gt, w.huber_delta);

    const int cdc_node = tape.chamfer_pair(s1.coarse_node, tape.leaf(seq.gt_complete.pts));

    out.parts.emd_align += tape.value(emd_node)(0, 0);
    out.parts.huber += tape.value(huber_node)(0, 0);
    out.parts.cd_coarse += tape.value(cdc_node)(0, 0);
    return tape.add(tape.scale(emd_node, w.alpha),
                    tape.add(huber_node, tape.scale(cdc_node, w.beta)));
}

SampleLoss align_sample_loss(ad::Tape& tape, model::CompletionModel& net,
                             const data::TrainingSequence& seq, int frame,
                             const LossWeights& w) {
    SampleLoss out;
    const auto s1 = net.stage1_forward(tape, seq.frames[static_cast<std::size_t>(frame)]);
    out.node = stage1_objective(tape, s1, seq, frame, w, out);
    out.orth_node = s1.orth_penalty_node;
    return out;
}

SampleLoss refine_sample_loss(ad::Tape& tape, model::CompletionModel& net,
                              const data::TrainingSequence& seq, int frame,
                              const LossWeights& w) {
    SampleLoss out;
    auto state = net.make_state();
    const auto r =
        net.process_frame(tape, seq.frames[static_cast<std::size_t>(frame)], state, frame, false);
    const int cdf = tape.chamfer_pair(r.s2.p_f_node, tape.leaf(seq.gt_complete.pts));
    out.parts.cd_final += tape.value(cdf)(0, 0);
    out.node = tape.scale(cdf, w.beta);
    try {
        const int lap = tape.laplacian(r.s2.p_f_node, r.s2.input.graph);
        out.parts.laplacian += tape.value(lap)(0, 0);
        out.node = tape.add(out.node, tape.scale(lap, w.gamma));
    } catch (const DegeneracyError&) {
        out.lap_skipped = true;
    }
    return out;
}

SampleLoss temporal_sample_loss(ad::Tape& tape, model::CompletionModel& net,
                                const data::TrainingSequence& seq, int first_frame,
                                int frames_per_sample, const LossWeights& w) {
    SampleLoss out;
    const ModelConfig& cfg = net.config();
    auto state = net.make_state();
    std::vector<int> hidden;
    for (int l = 0; l < cfg.temporal.gru_layers; ++l)
        hidden.push_back(tape.leaf(Eigen::MatrixXd::Zero(1, cfg.temporal.hidden)));

    int total = -1;
    int orth = -1;
    for (int t = 0; t < frames_per_sample; ++t) {
        const int frame = first_frame + t;
        auto s1 = net.stage1().encode(tape, net.params(),
                                      seq.frames[static_cast<std::size_t>(frame)]);
        const auto step = net.gru().step(tape, net.params(), s1.shape_code_node, hidden);
        hidden = step.hidden;
        s1.shape_code_node = step.out;
        s1.shape_code = tape.value(step.out).row(0).transpose();
        net.stage1().decode_into(tape, net.params(), s1);
        temporal::window_push(state, s1.aligned[0], frame, cfg.temporal);
        const auto s2 = refine::stage2_forward(tape, net.params(), s1, state, net.fuser(),
                                               net.deformer(), cfg.refine);

        int frame_node = stage1_objective(tape, s1, seq, frame, w, out);
        const int cdf = tape.chamfer_pair(s2.p_f_node, tape.leaf(seq.gt_complete.pts));
        out.parts.cd_final += tape.value(cdf)(0, 0);
        frame_node = tape.add(frame_node, tape.scale(cdf, w.beta));
        try {
            const int lap = tape.laplacian(s2.p_f_node, s2.input.graph);
            out.parts.laplacian += tape.value(lap)(0, 0);
            frame_node = tape.add(frame_node, tape.scale(lap, w.gamma));
        } catch (const DegeneracyError&) {
            out.lap_skipped = true;
        }
        total = total < 0 ? frame_node : tape.add(total, frame_node);
        orth = orth < 0 ? s1.orth_penalty_node : tape.add(orth, s1.orth_penalty_node);
    }
    out.node = total;
    out.orth_node = orth;
    return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

double validation_cd(model::CompletionModel& net, const std::vector<data::TrainingSequence>& val,
                     TrainStage stage) {
    if (val.empty()) return -1.0;
    double sum = 0.0;
    int count = 0;
    for (const auto& seq : val) {
        auto state = net.make_state();
        for (int k = 0; k < seq.frame_count(); ++k) {
            ad::Tape tape;
            net.params().begin_step(tape);
            if (stage == TrainStage::Align) {
                const auto s1 = net.stage1_forward(tape, seq.frames[static_cast<std::size_t>(k)]);
                sum += chamfer(s1.coarse, seq.gt_complete);
            } else {
                const auto r = net.process_frame(tape, seq.frames[static_cast<std::size_t>(k)],
                                                 state, k, stage == TrainStage::Temporal);
                sum += chamfer(r.s2.p_f, seq.gt_complete);
            }
            ++count;
        }
    }
    return sum / count;
}

std::vector<data::TrainingSequence> load_split(const std::filesystem::path& dir,
                                               bool required) {
    std::vector<data::TrainingSequence> seqs;
    if (!required && !std::filesystem::exists(dir / "manifest.txt")) return seqs;
    const data::DatasetManifest manifest = data::load_manifest(dir);
    seqs.reserve(manifest.entries.size());
    for (const auto& entry : manifest.entries)
        seqs.push_back(data::load_sequence(manifest, entry.id));
    return seqs;
}

}  // namespace

std::string metrics_csv_header() {
    return "step,stage,epoch,emd,huber,cd_coarse,cd_final,laplacian,orth,total,lr,val_cd_e4";
}

std::string metrics_csv_row(const MetricRow& row) {
    std::string line = std::to_string(row.step) + "," + row.stage + "," +
                       std::to_string(row.epoch);
    for (const double v : {row.loss.emd_align, row.loss.huber, row.loss.cd_coarse,
                           row.loss.cd_final, row.loss.laplacian, row.orth, row.loss.total,
                           row.lr, row.val_cd_e4})
        line += "," + format_double(v);
    return line;
}

std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != metrics_csv_header())
        throw IoError(path.string() + ": unexpected metrics header");
    std::vector<MetricRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 12)
            throw IoError(path.string() + ": malformed row at line " + std::to_string(lineno));
        try {
            MetricRow row;
            row.step = std::stoll(fields[0]);
            row.stage = fields[1];
            row.epoch = std::stoi(fields[2]);
            row.loss.emd_align = std::stod(fields[3]);
            row.loss.huber = std::stod(fields[4]);
            row.loss.cd_coarse = std::stod(fields[5]);
            row.loss.cd_final = std::stod(fields[6]);
            row.loss.laplacian = std::stod(fields[7]);
            row.orth = std::stod(fields[8]);
            row.loss.total = std::stod(fields[9]);
            row.lr = std::stod(fields[10]);
            row.val_cd_e4 = std::stod(fields[11]);
            rows.push_back(std::move(row));
        } catch (const std::exception&) {
            throw IoError(path.string() + ": malformed row at line " + std::to_string(lineno));
        }
    }
    return rows;
}

TrainSummary train_stage(const TrainOptions& opt) {
    const TrainConfig& cfg = opt.train;
    cfg.validate();
    opt.model.validate();
    const LossWeights& w = opt.model.loss;
    const std::string stage_str = to_string(cfg.stage);

    // ----- model + stage ordering -----
    std::unique_ptr<model::CompletionModel> net;
    ConfigMap meta;
    std::int64_t adam_steps = 0;
    int start_epoch = 0;
    if (opt.checkpoint_in.empty()) {
        if (cfg.stage != TrainStage::Align)
            throw OrderingError("the " + stage_str +
                                " stage requires a checkpoint from the earlier stages");
        net = std::make_unique<model::CompletionModel>(opt.model, cfg.seed);
    } else {
        auto ck = model::load_checkpoint(opt.checkpoint_in);
        net = std::move(ck.model);
        meta = ck.meta;
        ConfigMap want, got;
        model_config_to(opt.model, want);
        model_config_to(net->config(), got);
        if (want.entries() != got.entries())
            throw PreconditionError("model configuration does not match the checkpoint " +
                                    opt.checkpoint_in.string());
        if (cfg.stage == TrainStage::Refine && !has_completed(meta, "align"))
            throw OrderingError("refine stage requires a completed align stage, checkpoint has '" +
                                meta.get_string("train.completed", "") + "'");
        if (cfg.stage == TrainStage::Temporal &&
            (!has_completed(meta, "align") || !has_completed(meta, "refine")))
            throw OrderingError(
                "temporal stage requires completed align and refine stages, checkpoint has '" +
                meta.get_string("train.completed", "") + "'");
        if (meta.get_string("train.stage", "") == stage_str) {
            start_epoch = meta.get_int("train.next_epoch", 0);
            adam_steps = ck.adam_steps;
        } else {
            // Fresh optimizer when entering a new stage.
            for (auto& p : net->params().all()) {
                p.adam_m.setZero();
                p.adam_v.setZero();
            }
        }
    }

    // ----- freezing and learning-rate scaling -----
    auto& store = net->params();
    store.set_frozen("", false);
    store.set_lr_scale("", 1.0);
    switch (cfg.stage) {
        case TrainStage::Align:
            store.set_frozen("gru", true);
            store.set_frozen("fuser", true);
            store.set_frozen("gcn", true);
            break;
        case TrainStage::Refine:
            store.set_frozen("s1.", true);
            store.set_frozen("gru", true);
            break;
        case TrainStage::Temporal:
            store.set_lr_scale("s1.", cfg.lr_scale_frozen_parts);
            store.set_lr_scale("gcn", cfg.lr_scale_frozen_parts);
            break;
    }

    // ----- data -----
    const auto train_seqs = load_split(opt.dataset_root / "train", /*required=*/true);
    const auto val_seqs = load_split(opt.dataset_root / "val", /*required=*/false);
    if (train_seqs.empty()) throw PreconditionError("train split is empty");
    for (const auto& seq : train_seqs)
        if (seq.frame_count() < cfg.frames_per_sample)
            throw PreconditionError("sequence " + seq.shape_id + " has fewer than " +
                                    std::to_string(cfg.frames_per_sample) + " frames");

    const int samples_per_epoch =
        static_cast<int>(train_seqs.size()) * cfg.sequences_per_shape;
    const int steps_per_epoch = (samples_per_epoch + cfg.batch - 1) / cfg.batch;
    const int total_steps = cfg.epochs * steps_per_epoch;

    // ----- metrics sink -----
    const bool fresh_csv =
        !std::filesystem::exists(opt.metrics_csv) ||
        std::filesystem::file_size(opt.metrics_csv) == 0;
    std::ofstream csv(opt.metrics_csv, std::ios::app);
    if (!csv) throw IoError("cannot open for write: " + opt.metrics_csv.string());
    if (fresh_csv) csv << metrics_csv_header() << "\n";

    nn::Adam adam;
    adam.set_steps_taken(adam_steps);
    TrainSummary summary;

    struct Sample {
        int seq;
        int frame;
    };

    const int stop_epoch = opt.max_epochs_this_call > 0
                               ? std::min(cfg.epochs, start_epoch + opt.max_epochs_this_call)
                               : cfg.epochs;
    for (int epoch = start_epoch; epoch < stop_epoch; ++epoch) {
        Rng epoch_rng(Rng::mix(cfg.seed, static_cast<std::uint64_t>(epoch)));
        std::vector<Sample> samples;
        samples.reserve(static_cast<std::size_t>(samples_per_epoch));
        for (int s = 0; s < static_cast<int>(train_seqs.size()); ++s) {
            const int max_start = train_seqs[static_cast<std::size_t>(s)].frame_count() -
                                  cfg.frames_per_sample;
            for (int j = 0; j < cfg.sequences_per_shape; ++j)
                samples.push_back(
                    {s, static_cast<int>(epoch_rng.uniform_int(0, max_start))});
        }
        for (int i = static_cast<int>(samples.size()) - 1; i > 0; --i)
            std::swap(samples[static_cast<std::size_t>(i)],
                      samples[static_cast<std::size_t>(epoch_rng.uniform_int(0, i))]);

        for (int step_in_epoch = 0; step_in_epoch < steps_per_epoch; ++step_in_epoch) {
            const int begin = step_in_epoch * cfg.batch;
            const int end = std::min(begin + cfg.batch, static_cast<int>(samples.size()));
            const int batch_n = end - begin;
            store.zero_grads();

            LossReport parts_sum;
            double orth_sum = 0.0;
            for (int i = begin; i < end; ++i) {
                const auto& sample = samples[static_cast<std::size_t>(i)];
                const auto& seq = train_seqs[static_cast<std::size_t>(sample.seq)];
                ad::Tape tape;
                store.begin_step(tape);
                SampleLoss sl;
                switch (cfg.stage) {
                    case TrainStage::Align:
                        sl = align_sample_loss(tape, *net, seq, sample.frame, w);
                        break;
                    case TrainStage::Refine:
                        sl = refine_sample_loss(tape, *net, seq, sample.frame, w);
                        break;
                    case TrainStage::Temporal:
                        sl = temporal_sample_loss(tape, *net, seq, sample.frame,
                                                  cfg.frames_per_sample, w);
                        break;
                }
                int root = sl.node;
                if (sl.orth_node >= 0 && cfg.orth_weight > 0)
                    root = tape.add(root, tape.scale(sl.orth_node, cfg.orth_weight));
                tape.backward(root);
                store.accumulate(tape);

                parts_sum.emd_align += sl.parts.emd_align;
                parts_sum.huber += sl.parts.huber;
                parts_sum.cd_coarse += sl.parts.cd_coarse;
                parts_sum.cd_final += sl.parts.cd_final;
                parts_sum.laplacian += sl.parts.laplacian;
                if (sl.orth_node >= 0) orth_sum += tape.value(sl.orth_node)(0, 0);
                if (sl.lap_skipped) ++summary.laplacian_skips;
            }

            const std::int64_t global_step =
                static_cast<std::int64_t>(epoch) * steps_per_epoch + step_in_epoch;
            const double lr = nn::cosine_decay(cfg.lr, static_cast<int>(global_step),
                                               total_steps, kLrFloor);
            store.scale_grads(1.0 / batch_n);
            adam.step(store, lr);

            MetricRow row;
            row.step = global_step;
            row.stage = stage_str;
            row.epoch = epoch;
            row.loss = total_loss(parts_sum.emd_align / batch_n, parts_sum.huber / batch_n,
                                  parts_sum.cd_coarse / batch_n, parts_sum.cd_final / batch_n,
                                  parts_sum.laplacian / batch_n, w);
            row.orth = orth_sum / batch_n;
            row.lr = lr;
            if (step_in_epoch + 1 == steps_per_epoch) {
                const double vcd = validation_cd(*net, val_seqs, cfg.stage);
                row.val_cd_e4 = vcd < 0 ? -1.0 : vcd * 1e4;
            }
            csv << metrics_csv_row(row) << "\n";
            csv.flush();
            summary.rows.push_back(row);
            ++summary.steps;
            summary.final_val_cd_e4 = row.val_cd_e4 >= 0 ? row.val_cd_e4
                                                         : summary.final_val_cd_e4;
        }

        ConfigMap out_meta = meta;
        out_meta.set("train.stage", stage_str);
        out_meta.set("train.next_epoch", std::to_string(epoch + 1));
        out_meta.set("train.seed", std::to_string(cfg.seed));
        if (epoch + 1 == cfg.epochs)
            out_meta.set("train.completed", with_completed(meta, stage_str));
        model::save_checkpoint(opt.checkpoint_out, *net, adam.steps_taken(), out_meta);
        ++summary.epochs_run;
    }
    if (!csv) throw IoError("metrics: write failed: " + opt.metrics_csv.string());
    return summary;
}

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

namespace {

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

PointCloud random_cloud_pts(Rng& rng, int n, double extent) {
    PointMatrix pts(n, 3);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) pts(i, c) = rng.uniform(-extent, extent);
    return PointCloud(std::move(pts));
}

}  // namespace

GradientCheckReport verify_gradients(int configs_per_term, std::uint64_t seed) {
    if (configs_per_term < 1) throw PreconditionError("need at least one configuration");
    GradientCheckReport rep;
    rep.configs_per_term = configs_per_term;
    Rng rng(seed);
    const double h = 1e-5;

    for (int c = 0; c < configs_per_term; ++c) {
        // --- chamfer ---
        {
            PointCloud x = random_cloud_pts(rng, static_cast<int>(rng.uniform_int(4, 10)), 1.0);
            PointCloud y = random_cloud_pts(rng, static_cast<int>(rng.uniform_int(4, 10)), 1.0);
            ad::Tape tape;
            const int xl = tape.leaf(x.pts);
            const int yl = tape.leaf(y.pts);
            tape.backward(tape.chamfer_pair(xl, yl));
            for (int probe = 0; probe < 3; ++probe) {
                const bool on_x = rng.uniform() < 0.5;
                PointCloud& target = on_x ? x : y;
                const int r = static_cast<int>(rng.uniform_int(0, target.size() - 1));
                const int col = static_cast<int>(rng.uniform_int(0, 2));
                const double keep = target.pts(r, col);
                target.pts(r, col) = keep + h;
                const double up = chamfer(x, y);
                target.pts(r, col) = keep - h;
                const double down = chamfer(x, y);
                target.pts(r, col) = keep;
                const double fd = (up - down) / (2 * h);
                const double analytic = tape.grad(on_x ? xl : yl)(r, col);
                rep.chamfer_rel = std::max(rep.chamfer_rel, rel_err(analytic, fd));
            }
        }
        // --- huber ---
        {
            const int k = static_cast<int>(rng.uniform_int(1, 4));
            Eigen::MatrixXd t_pred(k, 3);
            for (int i = 0; i < k; ++i)
                for (int col = 0; col < 3; ++col) t_pred(i, col) = rng.uniform(-3.0, 3.0);
            const Vec3 t_gt(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                            rng.uniform(-1.0, 1.0));
            const double delta = 2.0;
            const auto eval = [&](const Eigen::MatrixXd& m) {
                std::vector<Vec3> rows;
                for (int i = 0; i < m.rows(); ++i) rows.push_back(m.row(i).transpose());
                return huber_translation(rows, t_gt, delta);
            };
            ad::Tape tape;
            const int tl = tape.leaf(t_pred);
            tape.backward(tape.huber_rows(tl, t_gt, delta));
            for (int probe = 0; probe < 2; ++probe) {
                const int r = static_cast<int>(rng.uniform_int(0, k - 1));
                const int col = static_cast<int>(rng.uniform_int(0, 2));
                Eigen::MatrixXd pert = t_pred;
                pert(r, col) += h;
                const double up = eval(pert);
                pert(r, col) -= 2 * h;
                const double down = eval(pert);
                const double fd = (up - down) / (2 * h);
                rep.huber_rel = std::max(rep.huber_rel, rel_err(tape.grad(tl)(r, col), fd));
            }
        }
        // --- laplacian (fixed graph) ---
        {
            PointCloud p = random_cloud_pts(rng, static_cast<int>(rng.uniform_int(6, 12)), 1.0);
            const AdjacencyGraph graph = knn_adjacency(p, 3);
            ad::Tape tape;
            const int pl = tape.leaf(p.pts);
            tape.backward(tape.laplacian(pl, graph));
            for (int probe = 0; probe < 3; ++probe) {
                const int r = static_cast<int>(rng.uniform_int(0, p.size() - 1));
                const int col = static_cast<int>(rng.uniform_int(0, 2));
                const double keep = p.pts(r, col);
                p.pts(r, col) = keep + h;
                const double up = laplacian_loss(p, graph);
                p.pts(r, col) = keep - h;
                const double down = laplacian_loss(p, graph);
                p.pts(r, col) = keep;
                const double fd = (up - down) / (2 * h);
                rep.laplacian_rel =
                    std::max(rep.laplacian_rel, rel_err(tape.grad(pl)(r, col), fd));
            }
        }
        // --- recurrent unit, 3-step unroll ---
        {
            TemporalConfig tcfg;
            tcfg.gru_layers = 2;
            tcfg.hidden = 5;
            nn::ParameterStore store;
            Rng init(rng.next());
            const temporal::GruStack gru(store, "g", tcfg, init, 5);
            std::array<Eigen::MatrixXd, 3> xs;
            for (auto& x : xs) {
                x.resize(1, 5);
                for (int i = 0; i < 5; ++i) x(0, i) = rng.uniform(-1.0, 1.0);
            }
            const auto forward = [&](ad::Tape& tape, std::vector<int>* x_nodes) {
                store.begin_step(tape);
                std::vector<int> hidden;
                for (int l = 0; l < tcfg.gru_layers; ++l)
                    hidden.push_back(tape.leaf(Eigen::MatrixXd::Zero(1, tcfg.hidden)));
                int out = -1;
                for (const auto& x : xs) {
                    const int xn = tape.leaf(x);
                    if (x_nodes) x_nodes->push_back(xn);
                    const auto step = gru.step(tape, store, xn, hidden);
                    hidden = step.hidden;
                    out = step.out;
                }
                return tape.sum(out);
            };

            ad::Tape tape;
            std::vector<int> x_nodes;
            const int loss = forward(tape, &x_nodes);
            tape.backward(loss);
            store.zero_grads();
            store.accumulate(tape);

            const auto value_only = [&]() {
                ad::Tape t2;
                return t2.value(forward(t2, nullptr))(0, 0);
            };
            for (int probe = 0; probe < 3; ++probe) {
                auto& p = store.param(static_cast<int>(
                    rng.uniform_int(0, static_cast<std::int64_t>(store.size()) - 1)));
                const int r = static_cast<int>(rng.uniform_int(0, p.value.rows() - 1));
                const int col = static_cast<int>(rng.uniform_int(0, p.value.cols() - 1));
                const double keep = p.value(r, col);
                p.value(r, col) = keep + h;
                const double up = value_only();
                p.value(r, col) = keep - h;
                const double down = value_only();
                p.value(r, col) = keep;
                const double fd = (up - down) / (2 * h);
                rep.gru_rel = std::max(rep.gru_rel, rel_err(p.grad(r, col), fd));
            }
            // Gradient w.r.t. the first frame's input reaches back through
            // the whole unroll.
            {
                const int col = static_cast<int>(rng.uniform_int(0, 4));
                const double keep = xs[0](0, col);
                xs[0](0, col) = keep + h;
                const double up = value_only();
                xs[0](0, col) = keep - h;
                const double down = value_only();
                xs[0](0, col) = keep;
                const double fd = (up - down) / (2 * h);
                rep.gru_rel =
                    std::max(rep.gru_rel, rel_err(tape.grad(x_nodes[0])(0, col), fd));
            }
        }
    }
    return rep;
}

}  // namespace tcomplete::train
