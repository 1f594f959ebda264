#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tcomplete/ad.hpp"
#include "tcomplete/config.hpp"
#include "tcomplete/data.hpp"
#include "tcomplete/errors.hpp"
#include "tcomplete/eval.hpp"
#include "tcomplete/io.hpp"
#include "tcomplete/model.hpp"
#include "tcomplete/plot.hpp"
#include "tcomplete/trainer.hpp"

namespace {

using namespace tcomplete;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitPrecondition = 3;

// Maps the library's error taxonomy onto the documented exit codes:
// 1 usage/configuration, 2 I/O, 3 violated preconditions or stage ordering.
template <typename F>
int guard(F&& body) {
    try {
        body();
        return kExitOk;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPrecondition;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

void refuse_existing(const fs::path& path, bool force) {
    if (!force && fs::exists(path))
        throw IoError(path.string() + " exists (pass --force to overwrite)");
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenArgs {
    fs::path out;
    std::uint64_t seed = 1;
    std::vector<std::string> families;
    int shapes = 4;  // train shapes per family; val/test get max(1, shapes/4)
    int frames = 16;
    int points = 2048;
    bool force = false;
};

void run_gen_data(const GenArgs& args) {
    if (args.shapes < 0) throw ConfigError("--shapes must be non-negative");
    data::GenOptions opt;
    opt.seed = args.seed;
    opt.families = args.families;
    opt.train_per_family = args.shapes;
    opt.val_per_family = args.shapes > 0 ? std::max(1, args.shapes / 4) : 0;
    opt.test_per_family = opt.val_per_family;
    opt.frames = args.frames;
    opt.points = args.points;

    refuse_existing(args.out / "train" / "manifest.txt", args.force);
    const auto result = data::generate_dataset(args.out, opt);
    for (const auto& manifest : result.manifests)
        std::cout << (manifest.root / "manifest.txt").string() << "\n";
    std::cout << "rendered " << result.stats.rendered_frames << " frames ("
              << result.stats.upsampled_frames << " upsampled)\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    fs::path dataset;
    fs::path ckpt_out;
    fs::path ckpt_in;
    fs::path metrics;
    fs::path config;
    std::string stage;
    std::string profile = "desk";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int epochs = 0;
    int batch = 0;
    double lr = 0.0;
    int max_epochs = 0;
    bool force = false;
};

void run_train(const TrainArgs& args) {
    ModelConfig base = args.profile == "full" ? full_profile() : desk_profile();
    if (args.profile != "full" && args.profile != "desk")
        throw ConfigError("--profile must be 'desk' or 'full'");

    ConfigMap file;
    if (!args.config.empty()) file = ConfigMap::load(args.config);
    train::TrainOptions opt;
    opt.model = model_config_from(file, base);
    opt.train = train_config_from(file, TrainConfig{});
    opt.train.stage = train_stage_from_string(args.stage);
    if (args.seed_set) opt.train.seed = args.seed;
    if (args.epochs > 0) opt.train.epochs = args.epochs;
    if (args.batch > 0) opt.train.batch = args.batch;
    if (args.lr > 0) opt.train.lr = args.lr;
    if (opt.train.stage == TrainStage::Temporal && opt.train.frames_per_sample < 2 &&
        file.get_int("train.frames_per_sample", 0) == 0)
        opt.train.frames_per_sample = 3;
    if (const char* env = std::getenv("TCOMPLETE_SEED"))
        opt.train.seed = static_cast<std::uint64_t>(std::stoull(env));

    opt.dataset_root = args.dataset;
    opt.checkpoint_out = args.ckpt_out;
    opt.checkpoint_in = args.ckpt_in;
    opt.metrics_csv = args.metrics.empty()
                          ? (args.ckpt_out.has_parent_path()
                                 ? args.ckpt_out.parent_path() / "metrics.csv"
                                 : fs::path("metrics.csv"))
                          : args.metrics;
    opt.max_epochs_this_call = args.max_epochs;
    if (args.ckpt_in != args.ckpt_out) refuse_existing(args.ckpt_out, args.force);
    if (args.ckpt_out.has_parent_path()) fs::create_directories(args.ckpt_out.parent_path());

    const auto summary = train::train_stage(opt);
    std::cout << "stage " << to_string(opt.train.stage) << ": " << summary.steps << " steps over "
              << summary.epochs_run << " epochs";
    if (summary.final_val_cd_e4 >= 0)
        std::cout << ", validation cd x1e4 = " << summary.final_val_cd_e4;
    std::cout << "\ncheckpoint: " << opt.checkpoint_out.string() << "\n"
              << "metrics: " << opt.metrics_csv.string() << "\n";
    if (summary.laplacian_skips > 0)
        std::cerr << "warning: smoothness term degenerated on " << summary.laplacian_skips
                  << " samples\n";
}

// ---------------------------------------------------------------------------
// complete
// ---------------------------------------------------------------------------

struct CompleteArgs {
    fs::path ckpt;
    fs::path frames_dir;
    fs::path out_dir;
    fs::path session;
    bool force = false;
};

void run_complete(const CompleteArgs& args) {
    auto ck = model::load_checkpoint(args.ckpt);
    auto& net = *ck.model;

    std::vector<fs::path> frames;
    if (!fs::is_directory(args.frames_dir))
        throw IoError(args.frames_dir.string() + " is not a directory");
    for (const auto& entry : fs::directory_iterator(args.frames_dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension();
        if (ext == ".pcb" || ext == ".xyz") frames.push_back(entry.path());
    }
    std::sort(frames.begin(), frames.end());  // arrival order = name order

    fs::create_directories(args.out_dir);
    const auto out_path = [&](const fs::path& frame, const char* role) {
        return args.out_dir / (frame.stem().string() + "_" + role + ".pcb");
    };
    for (const auto& frame : frames)
        for (const char* role : {"aligned", "coarse", "refined"})
            refuse_existing(out_path(frame, role), args.force);

    temporal::TemporalState state =
        !args.session.empty() && fs::exists(args.session)
            ? model::load_session(args.session, net.config().temporal)
            : net.make_state();
    std::int64_t next_index = state.last_frame() + 1;

    int done = 0;
    for (const auto& frame_path : frames) {
        temporal::TemporalState backup = state;
        try {
            const PointCloud frame = read_point_cloud(frame_path);
            ad::Tape tape;
            net.params().begin_step(tape);
            const auto r = net.process_frame(tape, frame, state, next_index, true);
            write_point_cloud(out_path(frame_path, "aligned"), r.s1.aligned[0]);
            write_point_cloud(out_path(frame_path, "coarse"), r.s1.coarse);
            write_point_cloud(out_path(frame_path, "refined"), r.s2.p_f);
            ++next_index;
            ++done;
            if (!args.session.empty()) model::save_session(args.session, state);
        } catch (const Error& e) {
            state = std::move(backup);
            std::cerr << "warning: skipping " << frame_path.string() << ": " << e.what() << "\n";
        }
    }
    std::cout << "completed " << done << " of " << frames.size() << " frames into "
              << args.out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    fs::path ckpt;
    fs::path dataset;
    fs::path report;
    std::string mode;
    std::string split = "test";
    int runs = 10;
    int frames = 5;
    int group = 5;
    std::uint64_t seed = 1;
    std::vector<int> counts;
    bool no_recurrence = false;
    bool force = false;
};

void run_eval_cmd(const EvalArgs& args) {
    auto ck = model::load_checkpoint(args.ckpt);
    eval::EvalOptions opt;
    opt.dataset_root = args.dataset;
    opt.split = args.split;
    opt.runs = args.runs;
    opt.frames = args.frames;
    opt.group = args.group;
    opt.seed = args.seed;
    opt.sweep_counts = args.counts;
    opt.use_recurrence = !args.no_recurrence;

    const auto tables = eval::run_eval(*ck.model, args.mode, opt);
    eval::write_report(args.report, tables, args.force);
    for (const auto& table : tables)
        std::cout << (args.report / (table.name + ".csv")).string() << "\n";
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

struct PlotArgs {
    fs::path report;
    fs::path out;
    bool force = false;
};

void run_plot(const PlotArgs& args) {
    if (!fs::is_directory(args.report))
        throw IoError(args.report.string() + " is not a directory");

    // Cloud panels: group <prefix>_<role>.pcb files by prefix.
    static const std::vector<std::string> kRoles = {"input", "aligned", "coarse", "refined"};
    std::map<std::string, std::map<std::string, fs::path>> groups;
    std::vector<fs::path> tables;
    for (const auto& entry : fs::directory_iterator(args.report)) {
        if (!entry.is_regular_file()) continue;
        const auto& path = entry.path();
        if (path.extension() == ".csv") {
            tables.push_back(path);
            continue;
        }
        if (path.extension() != ".pcb" && path.extension() != ".xyz") continue;
        const std::string stem = path.stem().string();
        for (const auto& role : kRoles) {
            const std::string suffix = "_" + role;
            if (stem.size() > suffix.size() &&
                stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0) {
                groups[stem.substr(0, stem.size() - suffix.size())][role] = path;
                break;
            }
        }
    }
    std::sort(tables.begin(), tables.end());

    fs::create_directories(args.out);
    int written = 0;
    for (const auto& [prefix, roles] : groups) {
        std::vector<PointCloud> clouds;
        std::vector<const PointCloud*> panels;
        for (const auto& role : kRoles) {
            const auto it = roles.find(role);
            if (it == roles.end()) continue;
            clouds.push_back(read_point_cloud(it->second));
        }
        panels.reserve(clouds.size());
        for (const auto& cloud : clouds) panels.push_back(&cloud);
        const auto out = args.out / (prefix + ".ppm");
        refuse_existing(out, args.force);
        plot::write_ppm(out, plot::render_panels(panels));
        ++written;
    }
    for (const auto& csv : tables) {
        const auto table = eval::read_table_csv(csv);
        if (table.rows.empty()) continue;
        const auto out = args.out / (csv.stem().string() + "_curve.ppm");
        refuse_existing(out, args.force);
        plot::write_ppm(out, plot::render_curves(table));
        ++written;
    }
    if (written == 0)
        std::cout << "nothing to plot in " << args.report.string() << "\n";
    else
        std::cout << "wrote " << written << " images to " << args.out.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporally consistent completion of pose-disturbed point cloud sequences"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic sequence dataset");
    gen_cmd->add_option("--out", gen.out, "Dataset root directory")->required();
    gen_cmd->add_option("--seed", gen.seed, "Generation seed");
    gen_cmd->add_option("--families", gen.families, "Shape families (default: all)")
        ->delimiter(',');
    gen_cmd->add_option("--shapes", gen.shapes,
                        "Train shapes per family (val/test get max(1, shapes/4))");
    gen_cmd->add_option("--frames", gen.frames, "Frames per sequence");
    gen_cmd->add_option("--points", gen.points, "Points per frame (multiple of 4)");
    gen_cmd->add_flag("--force", gen.force, "Overwrite an existing dataset");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train one stage of the pipeline");
    train_cmd->add_option("--dataset", tr.dataset, "Dataset root")->required();
    train_cmd->add_option("--stage", tr.stage, "align | refine | temporal")->required();
    train_cmd->add_option("--ckpt-out", tr.ckpt_out, "Checkpoint to write")->required();
    train_cmd->add_option("--ckpt-in", tr.ckpt_in, "Checkpoint to resume/build on");
    train_cmd->add_option("--metrics", tr.metrics, "Metrics CSV (default: beside checkpoint)");
    train_cmd->add_option("--config", tr.config, "Flat key=value configuration file");
    train_cmd->add_option("--profile", tr.profile, "Model size profile: desk | full");
    train_cmd->add_option("--seed", tr.seed, "Training seed")->trigger_on_parse()
        ->each([&tr](const std::string&) { tr.seed_set = true; });
    train_cmd->add_option("--epochs", tr.epochs, "Epochs for this stage");
    train_cmd->add_option("--batch", tr.batch, "Mini-batch size");
    train_cmd->add_option("--lr", tr.lr, "Base learning rate");
    train_cmd->add_option("--max-epochs", tr.max_epochs,
                          "Stop after this many epochs this invocation (0 = all)");
    train_cmd->add_flag("--force", tr.force, "Overwrite an existing checkpoint");

    CompleteArgs co;
    auto* complete_cmd =
        app.add_subcommand("complete", "Stream frames through a trained model");
    complete_cmd->add_option("--ckpt", co.ckpt, "Trained checkpoint")->required();
    complete_cmd->add_option("--frames-dir", co.frames_dir, "Directory of frame files")
        ->required();
    complete_cmd->add_option("--out-dir", co.out_dir, "Output directory")->required();
    complete_cmd->add_option("--session", co.session, "Session state file for resume");
    complete_cmd->add_flag("--force", co.force, "Overwrite existing outputs");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model on a dataset split");
    eval_cmd->add_option("--ckpt", ev.ckpt, "Trained checkpoint")->required();
    eval_cmd->add_option("--dataset", ev.dataset, "Dataset root")->required();
    eval_cmd->add_option("--report", ev.report, "Report output directory")->required();
    eval_cmd
        ->add_option("--mode", ev.mode,
                     "percat | temporal | consistency | ablation | alignment | input-sweep")
        ->required();
    eval_cmd->add_option("--split", ev.split, "Dataset split to evaluate");
    eval_cmd->add_option("--runs", ev.runs, "Disturbance re-samples per sequence");
    eval_cmd->add_option("--frames", ev.frames, "Frames per stream for curves");
    eval_cmd->add_option("--group", ev.group, "Consistency group size");
    eval_cmd->add_option("--seed", ev.seed, "Evaluation seed");
    eval_cmd->add_option("--counts", ev.counts, "Input-sweep point counts")->delimiter(',');
    eval_cmd->add_flag("--no-recurrence", ev.no_recurrence,
                       "Disable the recurrent unit during evaluation");
    eval_cmd->add_flag("--force", ev.force, "Overwrite an existing report");

    PlotArgs pl;
    auto* plot_cmd = app.add_subcommand("plot", "Render report tables and clouds as images");
    plot_cmd->add_option("--report", pl.report, "Directory of clouds/tables to render")
        ->required();
    plot_cmd->add_option("--out", pl.out, "Image output directory")->required();
    plot_cmd->add_flag("--force", pl.force, "Overwrite existing images");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (gen_cmd->parsed()) return guard([&] { run_gen_data(gen); });
    if (train_cmd->parsed()) return guard([&] { run_train(tr); });
    if (complete_cmd->parsed()) return guard([&] { run_complete(co); });
    if (eval_cmd->parsed()) return guard([&] { run_eval_cmd(ev); });
    if (plot_cmd->parsed()) return guard([&] { run_plot(pl); });
    return kExitUsage;
}
