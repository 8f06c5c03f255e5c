#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "ablm/dataset.hpp"
#include "ablm/edf.hpp"
#include "ablm/eval.hpp"
#include "ablm/gradcheck.hpp"
#include "ablm/model.hpp"
#include "ablm/train.hpp"

namespace ablm::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kDataRootEnv = "ABLM_DATA_ROOT";

// exit codes: 0 success, 1 runtime failure, 2 usage/config error
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Ordered key = value document; one per run, enough to re-run identically.
class RunManifest {
public:
    explicit RunManifest(std::string command) {
        set("command", std::move(command));
        set("version", kVersion);
        start_ = std::chrono::steady_clock::now();
    }

    void set(const std::string& key, std::string value) {
        entries_.emplace_back(key, std::move(value));
    }
    void set(const std::string& key, std::uint64_t v) { set(key, std::to_string(v)); }
    void set(const std::string& key, double v) {
        // shortest representation that round-trips the exact double
        char buf[40];
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        set(key, ec == std::errc() ? std::string(buf, end) : std::to_string(v));
    }
    void set(const std::string& key, bool v) { set(key, std::string(v ? "true" : "false")); }

    void write(const std::filesystem::path& path) {
        finish();
        std::ofstream os(path);
        if (!os) throw std::runtime_error("manifest: cannot open " + path.string());
        for (const auto& [k, v] : entries_) os << k << " = " << v << "\n";
    }

    void print(std::ostream& os) {
        finish();
        for (const auto& [k, v] : entries_) os << k << " = " << v << "\n";
    }

private:
    void finish() {
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        set("duration_seconds",
            std::chrono::duration_cast<std::chrono::duration<double>>(elapsed).count());
    }

    std::vector<std::pair<std::string, std::string>> entries_;
    std::chrono::steady_clock::time_point start_;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    std::string v = value;
    for (char& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "off" || v == "0" || v == "no") return false;
    throw ConfigError("config: key '" + key + "' has non-boolean value '" + value + "'");
}

inline double parse_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size())
        throw ConfigError("config: key '" + key + "' has non-numeric value '" + value + "'");
    return v;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (value.empty() || end != value.c_str() + value.size())
        throw ConfigError("config: key '" + key + "' has non-integer value '" + value + "'");
    return v;
}

inline Merge parse_merge(const std::string& key, const std::string& value) {
    if (value == "concat" || value == "concatenate") return Merge::Concat;
    if (value == "sum") return Merge::Sum;
    throw ConfigError("config: key '" + key + "' must be 'concat' or 'sum', got '" + value + "'");
}

inline AttnNonlinearity parse_nonlinearity(const std::string& key, const std::string& value) {
    if (value == "softmax") return AttnNonlinearity::Softmax;
    if (value == "sigmoid") return AttnNonlinearity::Sigmoid;
    throw ConfigError("config: key '" + key + "' must be 'softmax' or 'sigmoid', got '" + value +
                      "'");
}

}  // namespace detail

// Built-in defaults (the published hyperparameters) layered under a
// plain-text key = value file, layered under command-line flags.
struct RunConfig {
    TrainConfig train;
    std::size_t hidden_size = 140;
    std::size_t time_distributed_size = 70;
    Merge merge = Merge::Concat;
    bool attention = true;
    bool bidirectional = true;
    AttnNonlinearity nonlinearity = AttnNonlinearity::Softmax;

    void apply_file(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("config: cannot open " + path.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            const std::string t = detail::trim(line);
            if (t.empty() || t[0] == '#') continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config: line " + std::to_string(line_no) +
                                  " is not 'key = value': '" + t + "'");
            const std::string key = detail::trim(t.substr(0, eq));
            const std::string value = detail::trim(t.substr(eq + 1));
            apply(key, value);
        }
    }

    void apply(const std::string& key, const std::string& value) {
        using namespace detail;
        if (key == "learning_rate") train.learning_rate = parse_double(key, value);
        else if (key == "batch_size") train.batch_size = static_cast<std::size_t>(parse_u64(key, value));
        else if (key == "epochs") train.epochs = static_cast<std::size_t>(parse_u64(key, value));
        else if (key == "rho") train.rho = parse_double(key, value);
        else if (key == "epsilon") train.epsilon = parse_double(key, value);
        else if (key == "seed") train.seed = parse_u64(key, value);
        else if (key == "shuffle") train.shuffle = parse_bool(key, value);
        else if (key == "clip_norm") train.clip_norm = parse_double(key, value);
        else if (key == "hidden_size") hidden_size = static_cast<std::size_t>(parse_u64(key, value));
        else if (key == "time_distributed_size")
            time_distributed_size = static_cast<std::size_t>(parse_u64(key, value));
        else if (key == "merge") merge = parse_merge(key, value);
        else if (key == "attention") attention = parse_bool(key, value);
        else if (key == "bidirectional") bidirectional = parse_bool(key, value);
        else if (key == "attention_nonlinearity") nonlinearity = parse_nonlinearity(key, value);
        else throw ConfigError("config: unknown key '" + key + "'");
    }

    void validate_for_run() const {
        if (train.learning_rate <= 0.0) throw ConfigError("config: key 'learning_rate' must be positive");
        if (train.batch_size < 1) throw ConfigError("config: key 'batch_size' must be >= 1");
        if (train.epochs < 1) throw ConfigError("config: key 'epochs' must be >= 1");
        if (!hidden_size) throw ConfigError("config: key 'hidden_size' must be positive");
        if (!time_distributed_size)
            throw ConfigError("config: key 'time_distributed_size' must be positive");
    }

    ModelConfig model_config(std::size_t n_ch, std::size_t n_sp) const {
        ModelConfig cfg;
        cfg.n_ch = n_ch;
        cfg.n_sp = n_sp;
        cfg.n_fe1 = hidden_size;
        cfg.n_fe3 = time_distributed_size;
        cfg.merge = merge;
        cfg.attention_enabled = attention;
        cfg.bidirectional_enabled = bidirectional;
        cfg.attention_nonlinearity = nonlinearity;
        return cfg;
    }

    void record(RunManifest& m) const {
        m.set("learning_rate", train.learning_rate);
        m.set("batch_size", train.batch_size);
        m.set("epochs", train.epochs);
        m.set("rho", train.rho);
        m.set("epsilon", train.epsilon);
        m.set("seed", train.seed);
        m.set("shuffle", train.shuffle);
        m.set("clip_norm", train.clip_norm);
        m.set("hidden_size", hidden_size);
        m.set("time_distributed_size", time_distributed_size);
        m.set("merge", std::string(merge == Merge::Concat ? "concat" : "sum"));
        m.set("attention", attention);
        m.set("bidirectional", bidirectional);
        m.set("attention_nonlinearity",
              std::string(nonlinearity == AttnNonlinearity::Softmax ? "softmax" : "sigmoid"));
    }
};

namespace detail {

inline std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// chb01_03.edf -> chb01; files without an underscore use the whole stem
inline std::string case_id_from_filename(const std::filesystem::path& p) {
    std::string stem = lower(p.stem().string());
    const auto us = stem.find('_');
    return us == std::string::npos ? stem : stem.substr(0, us);
}

inline std::filesystem::path with_suffix(const std::filesystem::path& p, const std::string& tag) {
    std::filesystem::path out = p;
    out.replace_extension();
    out += tag;
    out += p.extension();
    return out;
}

}  // namespace detail

// --- segment ---------------------------------------------------------------------

inline int cmd_segment(const std::string& data_dir, const std::string& out_path,
                       std::uint64_t seed) {
    namespace fs = std::filesystem;
    RunManifest manifest("segment");
    manifest.set("data_dir", data_dir);
    manifest.set("out", out_path);
    manifest.set("seed", seed);

    if (!fs::is_directory(data_dir)) {
        std::cerr << "segment: '" << data_dir << "' is not a directory\n";
        return kExitRuntime;
    }

    std::vector<fs::path> edf_files, summary_files;
    for (const auto& entry : fs::recursive_directory_iterator(data_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = detail::lower(entry.path().extension().string());
        const std::string name = detail::lower(entry.path().filename().string());
        if (ext == ".edf") edf_files.push_back(entry.path());
        else if (name.find("summary") != std::string::npos && ext == ".txt")
            summary_files.push_back(entry.path());
    }
    std::sort(edf_files.begin(), edf_files.end());
    std::sort(summary_files.begin(), summary_files.end());

    // summary annotations keyed by lowercased file name
    std::map<std::string, std::vector<edf::SeizureAnnotation>> annotations;
    for (const auto& p : summary_files) {
        std::ifstream is(p);
        std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        for (auto& a : edf::parse_summary(text))
            annotations[detail::lower(a.file_id)].push_back(a);
    }

    std::vector<Segment> all;
    std::vector<std::string> skipped;
    std::size_t parsed_files = 0;
    for (const auto& p : edf_files) {
        std::ifstream is(p, std::ios::binary);
        if (!is) {
            skipped.push_back(p.filename().string() + " (unreadable)");
            continue;
        }
        std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                         std::istreambuf_iterator<char>());
        try {
            edf::EdfFile file = edf::parse_edf(bytes);
            file.record.file_id = p.filename().string();
            file.record.case_id = detail::case_id_from_filename(p);
            Tensor signal = edf::select_canonical_channels(file.record);
            const auto& ann = annotations[detail::lower(p.filename().string())];
            std::vector<Segment> segs =
                segment_record(signal, ann, file.record.sampling_rate_hz, 23.0,
                               file.record.case_id, file.record.file_id);
            all.insert(all.end(), std::make_move_iterator(segs.begin()),
                       std::make_move_iterator(segs.end()));
            ++parsed_files;
        } catch (const edf::ChannelMissingError& e) {
            skipped.push_back(p.filename().string() + " (" + e.what() + ")");
        } catch (const edf::ParseError& e) {
            skipped.push_back(p.filename().string() + " (" + e.what() + ")");
        }
    }

    if (parsed_files == 0) {
        std::cerr << "segment: no EDF file in '" << data_dir << "' could be parsed\n";
        for (const auto& s : skipped) std::cerr << "  skipped " << s << "\n";
        return kExitRuntime;
    }

    auto [balanced, corpus_manifest] = build_balanced_corpus(all, seed);
    corpus_manifest.skipped_files = skipped;

    const fs::path out(out_path);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    const fs::path full_path = detail::with_suffix(out, ".full");
    fs::path manifest_path = out;
    manifest_path.replace_extension(".manifest.txt");

    write_segment_archive(full_path, all);
    write_segment_archive(out, balanced);
    write_corpus_manifest(manifest_path, corpus_manifest, balanced);

    std::size_t all_seiz = 0;
    for (const auto& s : all) all_seiz += s.seizure ? 1 : 0;
    manifest.set("edf_files_parsed", parsed_files);
    manifest.set("edf_files_skipped", skipped.size());
    manifest.set("total_segments", all.size());
    manifest.set("total_seizure_segments", all_seiz);
    manifest.set("balanced_segments", balanced.size());
    manifest.set("seizure_segments", corpus_manifest.seizure_count);
    manifest.set("non_seizure_segments", corpus_manifest.non_seizure_count);
    manifest.set("full_archive", full_path.string());
    manifest.set("balanced_archive", out.string());
    for (const auto& s : skipped) manifest.set("skipped", s);
    fs::path run_manifest_path = out;
    run_manifest_path.replace_extension(".run.txt");
    manifest.write(run_manifest_path);

    std::cout << "segment: " << all.size() << " segments (" << all_seiz << " seizure) from "
              << parsed_files << " files; balanced corpus " << balanced.size() << " segments\n";
    return kExitOk;
}

// --- train -----------------------------------------------------------------------

inline int cmd_train(const std::string& archive, const RunConfig& rc, const std::string& out_path) {
    namespace fs = std::filesystem;
    rc.validate_for_run();
    RunManifest manifest("train");
    manifest.set("archive", archive);
    manifest.set("checkpoint", out_path);
    rc.record(manifest);

    std::vector<Segment> corpus = read_segment_archive(archive);
    if (corpus.empty()) throw TrainError("train: archive '" + archive + "' holds no segments");
    const std::size_t n_sp = corpus[0].data.shape[0];
    const std::size_t n_ch = corpus[0].data.shape[1];
    const ModelConfig cfg = rc.model_config(n_ch, n_sp);
    manifest.set("n_ch", n_ch);
    manifest.set("n_sp", n_sp);
    manifest.set("parameter_count", count_parameters(cfg));
    manifest.set("corpus_segments", corpus.size());

    // 70:15:15 split; the held-out 15% is reserved for later evaluation
    std::vector<std::size_t> ids(corpus.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    Rng rng(derive_seed(rc.train.seed, "split"));
    rng.shuffle(ids);
    const std::size_t n_train = ablm::detail::floor_fraction(0.70, ids.size());
    const std::size_t n_val = ablm::detail::floor_fraction(0.15, ids.size());
    std::vector<std::size_t> train_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> val_ids(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                                     ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    manifest.set("train_segments", train_ids.size());
    manifest.set("val_segments", val_ids.size());
    manifest.set("held_out_segments", ids.size() - n_train - n_val);

    std::cout << "train: lr " << rc.train.learning_rate << ", batch " << rc.train.batch_size
              << ", epochs " << rc.train.epochs << ", parameters " << count_parameters(cfg)
              << "\n";

    ModelParams params = init_params(cfg, derive_seed(rc.train.seed, "model-init"));
    TrainResult result = train(std::move(params), corpus, train_ids, val_ids, cfg, rc.train);

    const fs::path out(out_path);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_checkpoint(out, cfg, result.params);
    fs::path history_path = out;
    history_path.replace_extension(".history.csv");
    write_history_csv(history_path, result.history);

    if (!result.history.empty()) {
        const MetricsReport& v = result.history.back().validation;
        std::cout << "train: final val sens " << format_metric(v.sensitivity) << ", spec "
                  << format_metric(v.specificity) << ", prec " << format_metric(v.precision)
                  << ", f1 " << format_metric(v.f1) << ", acc " << format_metric(v.accuracy)
                  << "\n";
        manifest.set("final_train_loss", result.history.back().train_loss);
        manifest.set("final_val_acc", format_metric(v.accuracy));
    }
    manifest.set("history_csv", history_path.string());
    fs::path run_manifest_path = out;
    run_manifest_path.replace_extension(".manifest.txt");
    manifest.write(run_manifest_path);
    return kExitOk;
}

// --- eval ------------------------------------------------------------------------

inline int cmd_eval(const std::string& archive, const std::string& protocol, const RunConfig& rc,
                    const std::string& out_dir) {
    namespace fs = std::filesystem;
    rc.validate_for_run();
    RunManifest manifest("eval");
    manifest.set("archive", archive);
    manifest.set("protocol", protocol);
    manifest.set("out_dir", out_dir);
    rc.record(manifest);

    std::vector<Segment> corpus = read_segment_archive(archive);
    if (corpus.empty()) throw SplitError("eval: archive '" + archive + "' holds no segments");
    const ModelConfig cfg = rc.model_config(corpus[0].data.shape[1], corpus[0].data.shape[0]);
    manifest.set("parameter_count", count_parameters(cfg));
    manifest.set("corpus_segments", corpus.size());

    const std::vector<SegmentMeta> metas = corpus_metas(corpus);
    SplitPlan plan;
    if (protocol == "cv")
        plan = plan_cross_validation(metas, 10, 0.70, 0.15, rc.train.seed);
    else if (protocol == "cross-patient")
        plan = plan_cross_patient(metas, rc.train.seed);
    else
        throw ConfigError("eval: unknown protocol '" + protocol + "'");
    manifest.set("rounds", plan.rounds.size());

    ProtocolResult result = run_protocol(corpus, plan, cfg, rc.train);

    fs::create_directories(out_dir);
    const fs::path rounds_path = fs::path(out_dir) / "rounds.csv";
    const fs::path aggregate_path = fs::path(out_dir) / "aggregate.csv";
    write_rounds_csv(rounds_path, result.rounds);
    write_aggregate_csv(aggregate_path, result.aggregate);
    manifest.set("rounds_csv", rounds_path.string());
    manifest.set("aggregate_csv", aggregate_path.string());
    manifest.set("mean_sens", result.aggregate.sensitivity.mean);
    manifest.set("mean_spec", result.aggregate.specificity.mean);
    manifest.set("mean_prec", result.aggregate.precision.mean);
    manifest.write(fs::path(out_dir) / "manifest.txt");

    std::cout << "eval: " << result.rounds.size() << " rounds; mean sens "
              << result.aggregate.sensitivity.mean << ", mean spec "
              << result.aggregate.specificity.mean << "\n";
    return kExitOk;
}

// --- explain ---------------------------------------------------------------------

inline int cmd_explain(const std::string& checkpoint, const std::string& archive,
                       const std::string& out_path) {
    namespace fs = std::filesystem;
    RunManifest manifest("explain");
    manifest.set("checkpoint", checkpoint);
    manifest.set("archive", archive);
    manifest.set("out", out_path);

    auto [cfg, params] = load_checkpoint(checkpoint);
    std::vector<Segment> segments = read_segment_archive(archive);
    if (!segments.empty() && segments[0].data.shape[1] != cfg.n_ch)
        throw ExportError("explain: archive has " + std::to_string(segments[0].data.shape[1]) +
                          " channels, checkpoint wants " + std::to_string(cfg.n_ch));
    std::vector<AttentionRow> rows = export_attention_weights(params, cfg, segments);

    const fs::path out(out_path);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_attention_csv(out, rows);
    manifest.set("segments", segments.size());
    manifest.set("rows", rows.size());
    fs::path run_manifest_path = out;
    run_manifest_path.replace_extension(".manifest.txt");
    manifest.write(run_manifest_path);
    std::cout << "explain: wrote " << rows.size() << " attention rows to " << out_path << "\n";
    return kExitOk;
}

// --- gradcheck ---------------------------------------------------------------------

inline int cmd_gradcheck(std::uint64_t seed, double h) {
    RunManifest manifest("gradcheck");
    manifest.set("seed", seed);
    manifest.set("h", h);
    GradCheckReport report = run_gradcheck(seed, 2, h);
    for (const auto& g : report.groups)
        std::cout << "  " << g.name << ": max rel error " << g.max_rel_error << "\n";
    std::cout << "gradcheck: max relative error " << report.max_rel_error << "\n";
    manifest.set("max_rel_error", report.max_rel_error);
    manifest.print(std::cout);
    return report.max_rel_error <= 1e-4 ? kExitOk : kExitRuntime;
}

// --- entry point ---------------------------------------------------------------------

inline int run(const std::vector<std::string>& args) {
    CLI::App app{"attention-BiLSTM seizure/non-seizure classifier"};
    app.require_subcommand(1);

    std::string data_dir;
    if (const char* env = std::getenv(kDataRootEnv)) data_dir = env;
    std::string out_path, archive, config_file, protocol = "cv", checkpoint, out_dir = ".";
    std::uint64_t seed = 0;
    double gradcheck_h = 1e-5;
    bool ablate_attention = false, ablate_backward = false;
    std::string merge_flag;

    CLI::App* seg = app.add_subcommand("segment", "parse EDF files into a labeled segment corpus");
    auto* seg_dir = seg->add_option("--data-dir", data_dir,
                                    "directory of EDF and summary files (default: $" +
                                        std::string(kDataRootEnv) + ")");
    seg->add_option("--out", out_path, "balanced archive path")->required();
    seg->add_option("--seed", seed, "sampling seed");

    CLI::App* tr = app.add_subcommand("train", "train a model on a segment archive");
    tr->add_option("--archive", archive, "segment archive")->required();
    tr->add_option("--config", config_file, "key = value configuration file");
    tr->add_option("--out", out_path, "checkpoint path")->required();
    auto* tr_seed = tr->add_option("--seed", seed, "training seed");
    tr->add_flag("--ablate-attention", ablate_attention, "bypass the attention layer");
    tr->add_flag("--ablate-backward", ablate_backward, "drop the backward LSTM direction");
    auto* tr_merge = tr->add_option("--merge", merge_flag, "BiLSTM merge mode")
                         ->check(CLI::IsMember({"concat", "sum"}));

    CLI::App* ev = app.add_subcommand("eval", "run an evaluation protocol");
    ev->add_option("--archive", archive, "segment archive")->required();
    ev->add_option("--protocol", protocol, "cv or cross-patient")
        ->check(CLI::IsMember({"cv", "cross-patient"}));
    ev->add_option("--config", config_file, "key = value configuration file");
    ev->add_option("--out-dir", out_dir, "output directory");
    auto* ev_seed = ev->add_option("--seed", seed, "protocol seed");
    ev->add_flag("--ablate-attention", ablate_attention, "bypass the attention layer");
    ev->add_flag("--ablate-backward", ablate_backward, "drop the backward LSTM direction");
    auto* ev_merge = ev->add_option("--merge", merge_flag, "BiLSTM merge mode")
                         ->check(CLI::IsMember({"concat", "sum"}));

    CLI::App* ex = app.add_subcommand("explain", "export per-segment attention weights");
    ex->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    ex->add_option("--archive", archive, "segment archive")->required();
    ex->add_option("--out", out_path, "attention CSV path")->required();

    CLI::App* gc = app.add_subcommand("gradcheck",
                                      "verify tape gradients against finite differences");
    gc->add_option("--seed", seed, "parameter/input seed")->default_val(7);
    gc->add_option("--step", gradcheck_h, "finite-difference step");

    std::vector<const char*> argv;
    argv.push_back("ablm");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (seg->parsed()) {
            if (data_dir.empty() && seg_dir->count() == 0) {
                std::cerr << "segment: no --data-dir given and $" << kDataRootEnv << " unset\n";
                return kExitUsage;
            }
            return cmd_segment(data_dir, out_path, seed);
        }
        if (tr->parsed() || ev->parsed()) {
            RunConfig rc;
            if (!config_file.empty()) rc.apply_file(config_file);
            CLI::Option* seed_opt = tr->parsed() ? tr_seed : ev_seed;
            CLI::Option* merge_opt = tr->parsed() ? tr_merge : ev_merge;
            if (seed_opt->count()) rc.train.seed = seed;
            if (merge_opt->count()) rc.merge = detail::parse_merge("--merge", merge_flag);
            if (ablate_attention) rc.attention = false;
            if (ablate_backward) rc.bidirectional = false;
            return tr->parsed() ? cmd_train(archive, rc, out_path)
                                : cmd_eval(archive, protocol, rc, out_dir);
        }
        if (ex->parsed()) return cmd_explain(checkpoint, archive, out_path);
        if (gc->parsed()) return cmd_gradcheck(seed, gradcheck_h);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace ablm::cli
