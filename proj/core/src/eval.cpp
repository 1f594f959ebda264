#include "tcomplete/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "tcomplete/ad.hpp"
#include "tcomplete/errors.hpp"
#include "tcomplete/losses.hpp"

namespace tcomplete::eval {

namespace {

constexpr double kMetricScale = 1e4;  // tables report chamfer x 1e4

std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

double mean_of(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double sum = 0.0, comp = 0.0;
    for (const double x : values) {
        const double t = sum + x;
        comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    return (sum + comp) / static_cast<double>(values.size());
}

Table::Row Table::average_row() const {
    Row avg;
    avg.label = "average";
    avg.values.resize(columns.size(), 0.0);
    std::vector<double> column(rows.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        for (std::size_t r = 0; r < rows.size(); ++r)
            column[r] = rows[r].values.at(c);
        avg.values[c] = mean_of(column);
    }
    return avg;
}

std::string format_fixed(double value, int decimals) {
    if (!std::isfinite(value)) return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
    char buf[1100];  // fixed notation of extreme doubles is ~1080 chars
    const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed);
    std::string s(buf, res.ptr);  // shortest decimal string that round-trips

    const bool neg = !s.empty() && s[0] == '-';
    if (neg) s.erase(0, 1);
    const auto dot = s.find('.');
    std::string digits = dot == std::string::npos ? s : s.substr(0, dot) + s.substr(dot + 1);
    int frac = dot == std::string::npos ? 0 : static_cast<int>(s.size() - dot - 1);

    while (frac < decimals) {
        digits += '0';
        ++frac;
    }
    if (frac > decimals) {
        const bool round_up = digits[digits.size() - static_cast<std::size_t>(frac - decimals)] >= '5';
        digits.resize(digits.size() - static_cast<std::size_t>(frac - decimals));
        if (round_up) {
            int i = static_cast<int>(digits.size()) - 1;
            for (; i >= 0; --i) {
                if (digits[static_cast<std::size_t>(i)] == '9') {
                    digits[static_cast<std::size_t>(i)] = '0';
                } else {
                    ++digits[static_cast<std::size_t>(i)];
                    break;
                }
            }
            if (i < 0) digits.insert(digits.begin(), '1');
        }
    }
    std::string out = digits.size() > static_cast<std::size_t>(decimals)
                          ? digits.substr(0, digits.size() - static_cast<std::size_t>(decimals))
                          : "0";
    if (decimals > 0) {
        std::string tail = digits.size() >= static_cast<std::size_t>(decimals)
                               ? digits.substr(digits.size() - static_cast<std::size_t>(decimals))
                               : std::string(static_cast<std::size_t>(decimals) - digits.size(), '0') + digits;
        out += "." + tail;
    }
    if (neg && digits.find_first_not_of('0') != std::string::npos) out.insert(out.begin(), '-');
    return out;
}

std::string render_csv(const Table& table) {
    std::string out = table.label_header;
    for (const auto& c : table.columns) out += "," + c;
    out += "\n";
    const auto emit = [&](const Table::Row& row) {
        out += row.label;
        for (const double v : row.values) out += "," + format_full(v);
        out += "\n";
    };
    for (const auto& row : table.rows) emit(row);
    if (!table.rows.empty()) emit(table.average_row());
    return out;
}

std::string render_markdown(const Table& table) {
    std::string out = "| " + table.label_header;
    for (const auto& c : table.columns) out += " | " + c;
    out += " |\n|" + std::string(" --- |");
    for (std::size_t c = 0; c < table.columns.size(); ++c) out += " --- |";
    out += "\n";
    const auto emit = [&](const Table::Row& row) {
        out += "| " + row.label;
        for (const double v : row.values) out += " | " + format_fixed(v, 2);
        out += " |\n";
    };
    for (const auto& row : table.rows) emit(row);
    if (!table.rows.empty()) emit(table.average_row());
    return out;
}

Table read_table_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    Table table;
    table.name = path.stem().string();
    std::string line;
    if (!std::getline(in, line) || line.empty())
        throw IoError(path.string() + ": missing table header");
    {
        std::stringstream ss(line);
        std::string field;
        if (!std::getline(ss, field, ',')) throw IoError(path.string() + ": bad header");
        table.label_header = field;
        while (std::getline(ss, field, ',')) table.columns.push_back(field);
    }
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        Table::Row row;
        std::string field;
        std::getline(ss, field, ',');
        row.label = field;
        while (std::getline(ss, field, ',')) {
            try {
                row.values.push_back(std::stod(field));
            } catch (const std::exception&) {
                throw IoError(path.string() + ": bad value at line " + std::to_string(lineno));
            }
        }
        if (row.values.size() != table.columns.size())
            throw IoError(path.string() + ": wrong column count at line " + std::to_string(lineno));
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_report(const std::filesystem::path& dir, const std::vector<Table>& tables,
                  bool force) {
    std::filesystem::create_directories(dir);
    for (const auto& table : tables) {
        for (const char* ext : {".csv", ".md"}) {
            const auto path = dir / (table.name + ext);
            if (!force && std::filesystem::exists(path))
                throw IoError(path.string() + " exists (use force to overwrite)");
            std::ofstream out(path, std::ios::trunc);
            if (!out) throw IoError("cannot open for write: " + path.string());
            out << (ext == std::string(".csv") ? render_csv(table) : render_markdown(table));
            if (!out) throw IoError("write failed: " + path.string());
        }
    }
}

// ---------------------------------------------------------------------------
// Measurement
// ---------------------------------------------------------------------------

data::TrainingSequence redisturbed(const data::TrainingSequence& seq, Rng& rng,
                                   const DisturbanceLimits& limits) {
    data::TrainingSequence out = seq;
    for (std::size_t k = 0; k < out.frames.size(); ++k) {
        const PointCloud canonical = apply_pose(seq.frames[k], seq.gt_poses[k].inverse());
        out.gt_poses[k] = sample_disturbance(rng, limits);
        out.frames[k] = data::snap_to_float32(apply_pose(canonical, out.gt_poses[k]));
    }
    data::rebuild_aligned_partials(out);
    return out;
}

data::TrainingSequence with_input_count(const data::TrainingSequence& seq, int keep, Rng& rng) {
    if (keep < 1) throw PreconditionError("input count must be positive");
    data::TrainingSequence out = seq;
    for (auto& frame : out.frames) {
        const int n = frame.size();
        if (keep >= n) continue;
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        for (int i = 0; i < keep; ++i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(rng.uniform_int(i, n - 1))]);
        PointMatrix pts(n, 3);
        for (int i = 0; i < keep; ++i)
            pts.row(i) = frame.pts.row(order[static_cast<std::size_t>(i)]);
        for (int i = keep; i < n; ++i)
            pts.row(i) = pts.row(rng.uniform_int(0, keep - 1));
        frame = PointCloud(std::move(pts));
    }
    return out;
}

std::vector<std::vector<double>> consistency_indexes(const std::vector<PointCloud>& outputs,
                                                     int group) {
    if (group < 2) throw PreconditionError("consistency groups need at least two frames");
    std::vector<std::vector<double>> groups;
    for (std::size_t start = 0; start + static_cast<std::size_t>(group) <= outputs.size();
         start += static_cast<std::size_t>(group)) {
        std::vector<double> indexes;
        for (int i = 0; i + 1 < group; ++i)
            indexes.push_back(chamfer(outputs[start + static_cast<std::size_t>(i)],
                                      outputs[start + static_cast<std::size_t>(i) + 1]));
        groups.push_back(std::move(indexes));
    }
    return groups;
}

namespace {

struct StreamResult {
    std::vector<double> cd_final;    // chamfer(P_f, complete)
    std::vector<double> cd_coarse;   // chamfer(P_r, complete)
    std::vector<double> cd_aligned;  // chamfer(aligned input, GT partial)
    std::vector<double> cd_input;    // chamfer(disturbed input, GT partial)
    std::vector<double> emd_aligned;
    std::vector<PointCloud> outputs;  // P_f per frame
};

StreamResult stream_sequence(model::CompletionModel& net, const data::TrainingSequence& seq,
                             int max_frames, bool use_recurrence, bool keep_outputs,
                             bool with_emd) {
    StreamResult res;
    auto state = net.make_state();
    const int frames = max_frames > 0 ? std::min(max_frames, seq.frame_count())
                                      : seq.frame_count();
    for (int k = 0; k < frames; ++k) {
        ad::Tape tape;
        net.params().begin_step(tape);
        const auto r = net.process_frame(tape, seq.frames[static_cast<std::size_t>(k)], state,
                                         k, use_recurrence);
        const auto& gt_partial = seq.gt_aligned_partials[static_cast<std::size_t>(k)][0];
        res.cd_final.push_back(chamfer(r.s2.p_f, seq.gt_complete));
        res.cd_coarse.push_back(chamfer(r.s1.coarse, seq.gt_complete));
        res.cd_aligned.push_back(chamfer(r.s1.aligned[0], gt_partial));
        res.cd_input.push_back(chamfer(seq.frames[static_cast<std::size_t>(k)], gt_partial));
        if (with_emd) res.emd_aligned.push_back(emd(r.s1.aligned[0], gt_partial));
        if (keep_outputs) res.outputs.push_back(r.s2.p_f);
    }
    return res;
}

std::vector<data::TrainingSequence> load_split(const EvalOptions& opt) {
    const auto manifest = data::load_manifest(opt.dataset_root / opt.split);
    std::vector<data::TrainingSequence> seqs;
    seqs.reserve(manifest.entries.size());
    for (const auto& entry : manifest.entries)
        seqs.push_back(data::load_sequence(manifest, entry.id));
    if (seqs.empty()) throw PreconditionError("split '" + opt.split + "' is empty");
    return seqs;
}

Rng run_rng(const EvalOptions& opt, std::size_t seq_index, int run) {
    return Rng(Rng::mix(opt.seed, seq_index * 1009u + static_cast<std::uint64_t>(run)));
}

// Collects per-category samples and lays them out as a sorted table.
struct CategoryTable {
    std::map<std::string, std::vector<std::vector<double>>> samples;  // per column

    void add(const std::string& category, std::size_t column, double value, std::size_t width) {
        auto& cols = samples[category];
        cols.resize(width);
        cols.at(column).push_back(value);
    }

    Table finish(const std::string& name, std::vector<std::string> columns) const {
        Table table;
        table.name = name;
        table.columns = std::move(columns);
        for (const auto& [category, cols] : samples) {
            Table::Row row;
            row.label = category;
            for (const auto& values : cols) row.values.push_back(mean_of(values) * kMetricScale);
            table.rows.push_back(std::move(row));
        }
        return table;
    }
};

}  // namespace

Table eval_percat(model::CompletionModel& net, const EvalOptions& opt) {
    const auto seqs = load_split(opt);
    CategoryTable acc;
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        for (int run = 0; run < opt.runs; ++run) {
            Rng rng = run_rng(opt, s, run);
            const auto seq = redisturbed(seqs[s], rng, opt.limits);
            const auto res = stream_sequence(net, seq, 0, opt.use_recurrence, false, false);
            acc.add(seq.category, 0, mean_of(res.cd_final), 1);
        }
    }
    return acc.finish("percat", {"cd"});
}

Table eval_temporal(model::CompletionModel& net, const EvalOptions& opt,
                    std::vector<std::vector<double>>* per_frame_samples) {
    const auto seqs = load_split(opt);
    CategoryTable acc;
    std::vector<std::string> columns;
    for (int f = 0; f < opt.frames; ++f) columns.push_back("frame" + std::to_string(f + 1));
    if (per_frame_samples) per_frame_samples->assign(static_cast<std::size_t>(opt.frames), {});
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        for (int run = 0; run < opt.runs; ++run) {
            Rng rng = run_rng(opt, s, run);
            const auto seq = redisturbed(seqs[s], rng, opt.limits);
            const auto res = stream_sequence(net, seq, opt.frames, opt.use_recurrence, false, false);
            for (std::size_t f = 0; f < res.cd_final.size(); ++f) {
                acc.add(seq.category, f, res.cd_final[f], columns.size());
                if (per_frame_samples) (*per_frame_samples)[f].push_back(res.cd_final[f]);
            }
        }
    }
    return acc.finish("temporal", columns);
}

Table eval_consistency(model::CompletionModel& net, const EvalOptions& opt) {
    const auto seqs = load_split(opt);
    CategoryTable acc;
    std::vector<std::string> columns;
    for (int i = 0; i + 1 < opt.group; ++i)
        columns.push_back("pair" + std::to_string(i + 1) + std::to_string(i + 2));
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        for (int run = 0; run < opt.runs; ++run) {
            Rng rng = run_rng(opt, s, run);
            const auto seq = redisturbed(seqs[s], rng, opt.limits);
            const auto res = stream_sequence(net, seq, 0, opt.use_recurrence, true, false);
            for (const auto& group : consistency_indexes(res.outputs, opt.group))
                for (std::size_t i = 0; i < group.size(); ++i)
                    acc.add(seq.category, i, group[i], columns.size());
        }
    }
    return acc.finish("consistency", columns);
}

Table eval_ablation(model::CompletionModel& net, const EvalOptions& opt) {
    const auto seqs = load_split(opt);
    CategoryTable acc;
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        for (int run = 0; run < opt.runs; ++run) {
            Rng rng = run_rng(opt, s, run);
            const auto seq = redisturbed(seqs[s], rng, opt.limits);
            const auto res = stream_sequence(net, seq, 0, opt.use_recurrence, false, false);
            acc.add(seq.category, 0, mean_of(res.cd_final), 2);
            acc.add(seq.category, 1, mean_of(res.cd_coarse), 2);
        }
    }
    return acc.finish("ablation", {"with_refinement", "without_refinement"});
}

Table eval_alignment(model::CompletionModel& net, const EvalOptions& opt) {
    const auto seqs = load_split(opt);
    CategoryTable acc;
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        for (int run = 0; run < opt.runs; ++run) {
            Rng rng = run_rng(opt, s, run);
            const auto seq = redisturbed(seqs[s], rng, opt.limits);
            const auto res = stream_sequence(net, seq, 0, opt.use_recurrence, false, true);
            acc.add(seq.category, 0, mean_of(res.cd_aligned), 3);
            acc.add(seq.category, 1, mean_of(res.emd_aligned), 3);
            acc.add(seq.category, 2, mean_of(res.cd_input), 3);
        }
    }
    return acc.finish("alignment", {"cd_aligned", "emd_aligned", "cd_input"});
}

Table eval_input_sweep(model::CompletionModel& net, const EvalOptions& opt) {
    const auto seqs = load_split(opt);
    std::vector<int> counts = opt.sweep_counts;
    if (counts.empty()) {
        const int n = net.config().encoder.n;
        counts = {n, n / 2, n / 4, n / 8};
    }
    for (const int c : counts)
        if (c < 1) throw PreconditionError("sweep counts must be positive");

    std::vector<std::string> columns;
    for (int f = 0; f < opt.frames; ++f) columns.push_back("frame" + std::to_string(f + 1));
    Table table;
    table.name = "input_sweep";
    table.label_header = "points";
    table.columns = columns;
    for (const int count : counts) {
        std::vector<std::vector<double>> per_frame(columns.size());
        for (std::size_t s = 0; s < seqs.size(); ++s) {
            for (int run = 0; run < opt.runs; ++run) {
                Rng rng = run_rng(opt, s, run);
                auto seq = redisturbed(seqs[s], rng, opt.limits);
                seq = with_input_count(seq, count, rng);
                const auto res =
                    stream_sequence(net, seq, opt.frames, opt.use_recurrence, false, false);
                for (std::size_t f = 0; f < res.cd_final.size(); ++f)
                    per_frame[f].push_back(res.cd_final[f]);
            }
        }
        Table::Row row;
        row.label = std::to_string(count);
        for (const auto& values : per_frame) row.values.push_back(mean_of(values) * kMetricScale);
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::vector<Table> run_eval(model::CompletionModel& net, const std::string& mode,
                            const EvalOptions& opt) {
    if (mode == "percat") return {eval_percat(net, opt)};
    if (mode == "temporal") return {eval_temporal(net, opt)};
    if (mode == "consistency") return {eval_consistency(net, opt)};
    if (mode == "ablation") return {eval_ablation(net, opt)};
    if (mode == "alignment") return {eval_alignment(net, opt)};
    if (mode == "input-sweep") return {eval_input_sweep(net, opt)};
    throw ConfigError("unknown eval mode: " + mode);
}

}  // namespace tcomplete::eval
