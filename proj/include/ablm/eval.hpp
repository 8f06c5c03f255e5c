#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ablm/dataset.hpp"
#include "ablm/edf.hpp"
#include "ablm/metrics.hpp"
#include "ablm/model.hpp"
#include "ablm/train.hpp"

namespace ablm {

struct SplitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ExportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Lightweight view of a segment, enough to plan splits without signal data.
struct SegmentMeta {
    std::size_t id = 0;
    bool seizure = false;
    std::string case_id;
};

namespace detail {

// floor(frac * n) guarded against the product landing just below an integer
inline std::size_t floor_fraction(double frac, std::size_t n) {
    return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9));
}

}  // namespace detail

inline std::vector<SegmentMeta> corpus_metas(const std::vector<Segment>& corpus) {
    std::vector<SegmentMeta> out;
    out.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i)
        out.push_back(SegmentMeta{i, corpus[i].seizure, corpus[i].case_id});
    return out;
}

enum class Protocol { CrossValidation, CrossPatient };

struct SplitRound {
    std::string label;
    std::vector<std::size_t> train_ids;
    std::vector<std::size_t> val_ids;
    std::vector<std::size_t> test_ids;
};

struct SplitPlan {
    Protocol protocol = Protocol::CrossValidation;
    std::uint64_t seed = 0;
    std::vector<SplitRound> rounds;
};

// Ten independent shuffles of a balanced corpus split by floor(0.70*N) /
// floor(0.15*N) / remainder.
inline SplitPlan plan_cross_validation(std::span<const SegmentMeta> corpus,
                                       std::size_t rounds = 10, double train_frac = 0.70,
                                       double val_frac = 0.15, std::uint64_t seed = 0) {
    const std::size_t n = corpus.size();
    if (n < 20) throw SplitError("cross-validation: need at least 20 segments, have " +
                                 std::to_string(n));
    std::size_t seiz = 0;
    for (const auto& m : corpus) seiz += m.seizure ? 1 : 0;
    if (2 * seiz != n)
        throw SplitError("cross-validation: corpus is not balanced (" + std::to_string(seiz) +
                         " seizure of " + std::to_string(n) + ")");

    SplitPlan plan;
    plan.protocol = Protocol::CrossValidation;
    plan.seed = seed;
    const std::size_t n_train = detail::floor_fraction(train_frac, n);
    const std::size_t n_val = detail::floor_fraction(val_frac, n);
    for (std::size_t r = 0; r < rounds; ++r) {
        std::vector<std::size_t> ids(n);
        for (std::size_t i = 0; i < n; ++i) ids[i] = corpus[i].id;
        Rng rng(derive_seed(seed, "cv-shuffle", r));
        rng.shuffle(ids);
        SplitRound round;
        round.label = std::to_string(r + 1);
        round.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
        round.val_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                             ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        round.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
        plan.rounds.push_back(std::move(round));
    }
    return plan;
}

namespace detail {

inline std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::string pretty_case(const std::string& case_id) {
    if (lower(case_id).rfind("chb", 0) == 0 && case_id.size() > 3)
        return "Chb" + case_id.substr(3);
    return case_id;
}

// chb01 and chb21 are the same patient and always share a side of the split
inline std::string subject_key(const std::string& case_id) {
    const std::string low = lower(case_id);
    if (low == "chb01" || low == "chb21") return "chb01+chb21";
    return low;
}

}  // namespace detail

// Leave-one-subject-out: per round, a balanced selection over the full corpus
// is drawn, the held-out subject's segments become the test set, and the rest
// splits train_frac : (1 - train_frac) into train/validation.
inline SplitPlan plan_cross_patient(std::span<const SegmentMeta> corpus, std::uint64_t seed = 0,
                                    double train_frac = 0.85) {
    std::map<std::string, std::vector<std::size_t>> by_subject;  // key -> corpus positions
    for (std::size_t i = 0; i < corpus.size(); ++i)
        by_subject[detail::subject_key(corpus[i].case_id)].push_back(i);
    if (by_subject.size() < 2)
        throw SplitError("cross-patient: need at least 2 subjects, have " +
                         std::to_string(by_subject.size()));

    std::size_t seiz_total = 0;
    std::vector<std::size_t> seiz_pos, pool_pos;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        (corpus[i].seizure ? seiz_pos : pool_pos).push_back(i);
    seiz_total = seiz_pos.size();
    if (pool_pos.size() < seiz_total)
        throw SplitError("cross-patient: non-seizure pool smaller than seizure count");

    SplitPlan plan;
    plan.protocol = Protocol::CrossPatient;
    plan.seed = seed;
    std::size_t round_index = 0;
    for (const auto& [key, members] : by_subject) {
        // balanced selection for this experiment: all seizure segments plus an
        // equally sized random draw of non-seizure segments
        Rng rng(derive_seed(seed, "cp-balance", round_index));
        std::vector<std::size_t> picked = rng.sample_without_replacement(pool_pos.size(), seiz_total);
        std::vector<char> selected(corpus.size(), 0);
        for (std::size_t p : seiz_pos) selected[p] = 1;
        for (std::size_t p : picked) selected[pool_pos[p]] = 1;

        SplitRound round;
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            if (!selected[i]) continue;
            if (detail::subject_key(corpus[i].case_id) == key)
                round.test_ids.push_back(corpus[i].id);
            else
                rest.push_back(corpus[i].id);
        }
        if (round.test_ids.empty())
            throw SplitError("cross-patient: subject '" + key +
                             "' has no segments in this experiment");

        Rng split_rng(derive_seed(seed, "cp-split", round_index));
        split_rng.shuffle(rest);
        const std::size_t n_train = detail::floor_fraction(train_frac, rest.size());
        round.train_ids.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_train));
        round.val_ids.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_train), rest.end());

        if (key == "chb01+chb21") {
            round.label = "Chb01,21";
        } else {
            std::string any_case;
            for (std::size_t i : members)
                if (detail::subject_key(corpus[i].case_id) == key) {
                    any_case = corpus[i].case_id;
                    break;
                }
            round.label = detail::pretty_case(any_case);
        }
        plan.rounds.push_back(std::move(round));
        ++round_index;
    }
    return plan;
}

// --- protocol execution -------------------------------------------------------

struct RoundResult {
    std::string label;
    MetricsReport report;
};

struct MetricAggregate {
    double mean = 0.0;
    double stddev = 0.0;  // sample (n-1) standard deviation
    std::size_t excluded = 0;
};

struct ProtocolAggregate {
    MetricAggregate sensitivity, specificity, f1, precision, accuracy;
};

struct ProtocolResult {
    std::vector<RoundResult> rounds;
    ProtocolAggregate aggregate;
};

inline MetricAggregate aggregate_metric(std::span<const RoundResult> rounds,
                                        std::optional<double> MetricsReport::*field) {
    MetricAggregate agg;
    std::vector<double> vals;
    for (const auto& r : rounds) {
        const auto& v = r.report.*field;
        if (v)
            vals.push_back(*v);
        else
            ++agg.excluded;
    }
    if (vals.empty()) return agg;
    double sum = 0.0;
    for (double v : vals) sum += v;
    agg.mean = sum / static_cast<double>(vals.size());
    if (vals.size() > 1) {
        double sq = 0.0;
        for (double v : vals) sq += (v - agg.mean) * (v - agg.mean);
        agg.stddev = std::sqrt(sq / static_cast<double>(vals.size() - 1));
    }
    return agg;
}

inline ProtocolAggregate aggregate_rounds(std::span<const RoundResult> rounds) {
    ProtocolAggregate a;
    a.sensitivity = aggregate_metric(rounds, &MetricsReport::sensitivity);
    a.specificity = aggregate_metric(rounds, &MetricsReport::specificity);
    a.f1 = aggregate_metric(rounds, &MetricsReport::f1);
    a.precision = aggregate_metric(rounds, &MetricsReport::precision);
    a.accuracy = aggregate_metric(rounds, &MetricsReport::accuracy);
    return a;
}

// Trains one fresh model per round and evaluates it on that round's test set.
// Per-round seeds derive from the plan seed, so a whole protocol run is
// reproducible from one number.
inline ProtocolResult run_protocol(const std::vector<Segment>& corpus, const SplitPlan& plan,
                                   const ModelConfig& cfg, const TrainConfig& tc) {
    ProtocolResult result;
    for (std::size_t r = 0; r < plan.rounds.size(); ++r) {
        const SplitRound& round = plan.rounds[r];
        ModelParams params = init_params(cfg, derive_seed(plan.seed, "round-init", r));
        TrainConfig round_tc = tc;
        round_tc.seed = derive_seed(plan.seed, "round-train", r);
        TrainResult trained =
            train(std::move(params), corpus, round.train_ids, round.val_ids, cfg, round_tc);
        std::vector<std::size_t> preds =
            predict_labels(trained.params, cfg, corpus, round.test_ids, tc.batch_size);
        RoundResult rr;
        rr.label = round.label;
        rr.report = compute_metrics(preds, true_labels(corpus, round.test_ids));
        result.rounds.push_back(std::move(rr));
    }
    result.aggregate = aggregate_rounds(result.rounds);
    return result;
}

// --- attention export -----------------------------------------------------------

struct AttentionRow {
    std::size_t segment_id = 0;
    std::vector<double> weights;  // one per channel, canonical order
};

inline std::vector<AttentionRow> export_attention_weights(const ModelParams& params,
                                                          const ModelConfig& cfg,
                                                          const std::vector<Segment>& segments,
                                                          std::size_t batch_size = 30) {
    if (!cfg.attention_enabled || !params.attention)
        throw ExportError("attention export: model was trained with attention ablated");
    std::vector<AttentionRow> rows;
    rows.reserve(segments.size());
    std::vector<std::size_t> ids(segments.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    for (std::size_t at = 0; at < ids.size(); at += batch_size) {
        const std::size_t n = std::min(batch_size, ids.size() - at);
        Tensor x = batch_input(segments, std::span<const std::size_t>(ids).subspan(at, n));
        auto [y, weights] = attention_forward(x, *params.attention, cfg.attention_nonlinearity);
        for (std::size_t i = 0; i < n; ++i) {
            AttentionRow row;
            row.segment_id = at + i;
            row.weights.assign(weights.data.begin() + static_cast<std::ptrdiff_t>(i * cfg.n_ch),
                               weights.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * cfg.n_ch));
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

// --- CSV writers -----------------------------------------------------------------

inline void write_rounds_csv(const std::filesystem::path& path,
                             std::span<const RoundResult> rounds) {
    std::ofstream os(path);
    if (!os) throw ExportError("csv: cannot open " + path.string() + " for writing");
    os << "round,sens,spec,f1,prec,acc\n";
    for (const auto& r : rounds)
        os << r.label << ',' << format_metric(r.report.sensitivity) << ','
           << format_metric(r.report.specificity) << ',' << format_metric(r.report.f1) << ','
           << format_metric(r.report.precision) << ',' << format_metric(r.report.accuracy) << "\n";
}

inline void write_aggregate_csv(const std::filesystem::path& path, const ProtocolAggregate& a) {
    std::ofstream os(path);
    if (!os) throw ExportError("csv: cannot open " + path.string() + " for writing");
    os << "metric,mean,std,excluded_rounds\n";
    auto row = [&](const char* name, const MetricAggregate& m) {
        char mean[32], sd[32];
        std::snprintf(mean, sizeof(mean), "%.6f", m.mean);
        std::snprintf(sd, sizeof(sd), "%.6f", m.stddev);
        os << name << ',' << mean << ',' << sd << ',' << m.excluded << "\n";
    };
    row("sens", a.sensitivity);
    row("spec", a.specificity);
    row("f1", a.f1);
    row("prec", a.precision);
    row("acc", a.accuracy);
}

inline void write_attention_csv(const std::filesystem::path& path,
                                std::span<const AttentionRow> rows) {
    std::ofstream os(path);
    if (!os) throw ExportError("csv: cannot open " + path.string() + " for writing");
    os << "segment_id";
    for (const auto& label : edf::canonical_channel_labels()) os << ',' << label;
    os << "\n";
    for (const auto& r : rows) {
        os << r.segment_id;
        for (double w : r.weights) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.9f", w);
            os << ',' << buf;
        }
        os << "\n";
    }
}

}  // namespace ablm
