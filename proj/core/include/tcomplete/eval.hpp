#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tcomplete/data.hpp"
#include "tcomplete/model.hpp"

namespace tcomplete::eval {

// ---------------------------------------------------------------------------
// Report tables. Values are stored at full precision; the markdown rendering
// rounds to two decimals (half away from zero on the shortest decimal
// representation), the CSV keeps every bit. Column averages are computed
// with compensated summation so they are faithful to the exact arithmetic
// mean of the entries.
// ---------------------------------------------------------------------------

struct Table {
    std::string name;                  // file stem, e.g. "percat"
    std::string label_header = "category";
    std::vector<std::string> columns;  // value column headers

    struct Row {
        std::string label;
        std::vector<double> values;
    };
    std::vector<Row> rows;

    // Arithmetic mean of each column over the rows, labelled "average".
    Row average_row() const;
};

// Compensated (Neumaier) mean; 0 on empty input.
double mean_of(const std::vector<double>& values);

// Fixed-point decimal string with `decimals` places, rounding half away from
// zero on the value's shortest decimal representation.
std::string format_fixed(double value, int decimals);

std::string render_csv(const Table& table);       // full precision + average row
std::string render_markdown(const Table& table);  // 2-decimal cells + average row

// Reads a CSV written by render_csv (the average row comes back as a row).
Table read_table_csv(const std::filesystem::path& path);

// Writes <dir>/<name>.csv and <dir>/<name>.md per table. Refuses to
// overwrite existing files unless force is set (IoError).
void write_report(const std::filesystem::path& dir, const std::vector<Table>& tables,
                  bool force);

// ---------------------------------------------------------------------------
// Measurement
// ---------------------------------------------------------------------------

struct EvalOptions {
    std::filesystem::path dataset_root;
    std::string split = "test";
    int runs = 10;        // disturbance re-samples per sequence
    std::uint64_t seed = 1;
    int frames = 5;       // frames per stream for temporal/sweep curves
    int group = 5;        // consistency group size (group-1 indexes per group)
    std::vector<int> sweep_counts;  // empty = {n, n/2, n/4, n/8}
    bool use_recurrence = true;
    DisturbanceLimits limits;
};

// Same viewpoints and ground truth, freshly sampled disturbance poses.
data::TrainingSequence redisturbed(const data::TrainingSequence& seq, Rng& rng,
                                   const DisturbanceLimits& limits);

// Thins each frame to `keep` random points, then lifts it back to its
// original size by stochastically duplicating kept points.
data::TrainingSequence with_input_count(const data::TrainingSequence& seq, int keep, Rng& rng);

// Chamfer distance between successive outputs, chunked into consecutive
// groups of `group` frames: one inner vector of group-1 values per full
// group (trailing frames that do not fill a group are dropped).
std::vector<std::vector<double>> consistency_indexes(const std::vector<PointCloud>& outputs,
                                                     int group);

// Per-category completion chamfer (x 1e4), averaged over frames and
// disturbance re-samples; single "cd" column.
Table eval_percat(model::CompletionModel& net, const EvalOptions& opt);

// Mean completion chamfer per frame index (columns frame1..frameF, x 1e4).
// When per_frame_samples is given it receives the raw per-(sequence, run)
// values behind each column, for trend/error-bar analysis.
Table eval_temporal(model::CompletionModel& net, const EvalOptions& opt,
                    std::vector<std::vector<double>>* per_frame_samples = nullptr);

// Cross-frame consistency per group pair position (columns pair12.., x 1e4).
Table eval_consistency(model::CompletionModel& net, const EvalOptions& opt);

// Completion chamfer with and without the deformation stage (x 1e4).
Table eval_ablation(model::CompletionModel& net, const EvalOptions& opt);

// Alignment quality: chamfer and assignment distance of the aligned input
// against the ground-truth partial, plus the disturbed input's chamfer as
// the no-alignment baseline (x 1e4).
Table eval_alignment(model::CompletionModel& net, const EvalOptions& opt);

// Completion chamfer per frame index at reduced-and-lifted input counts:
// one row per count, columns frame1..frameF (x 1e4).
Table eval_input_sweep(model::CompletionModel& net, const EvalOptions& opt);

// Dispatch by mode name: percat | temporal | consistency | ablation |
// alignment | input-sweep. Unknown mode raises ConfigError.
std::vector<Table> run_eval(model::CompletionModel& net, const std::string& mode,
                            const EvalOptions& opt);

}  // namespace tcomplete::eval
