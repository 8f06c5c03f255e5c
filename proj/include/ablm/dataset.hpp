#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ablm/edf.hpp"
#include "ablm/rng.hpp"
#include "ablm/tensor.hpp"

namespace ablm {

struct CorpusError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ArchiveError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One labeled window of signal, the atomic training/evaluation sample.
struct Segment {
    Tensor data;  // [n_sp, n_ch]
    bool seizure = false;
    std::string case_id;
    std::string file_id;
    double start_s = 0.0;
    double seizure_overlap_s = 0.0;
};

struct CorpusManifest {
    std::size_t seizure_count = 0;
    std::size_t non_seizure_count = 0;
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_case;  // (seizure, non)
    std::uint64_t seed = 0;
    std::vector<std::string> skipped_files;
};

// Label of the half-open window [t0, t1): seizure iff any annotation
// intersects it with positive measure; second value is the total overlap.
inline std::pair<bool, double> label_segment(double t0, double t1,
                                             std::span<const edf::SeizureAnnotation> annotations) {
    double overlap = 0.0;
    for (const auto& a : annotations) {
        const double lo = std::max(t0, a.start_s);
        const double hi = std::min(t1, a.end_s);
        if (hi > lo) overlap += hi - lo;
    }
    return {overlap > 0.0, overlap};
}

// Non-overlapping windows at offsets 0, length_s, 2*length_s, ... from the
// beginning to the end; a trailing partial window is discarded.
inline std::vector<Segment> segment_record(const Tensor& signal,
                                           std::span<const edf::SeizureAnnotation> annotations,
                                           double rate_hz, double length_s,
                                           const std::string& case_id,
                                           const std::string& file_id) {
    if (signal.rank() != 2)
        throw DimensionError("segment_record: want [samples, channels], got " +
                             shape_str(signal.shape));
    if (rate_hz <= 0.0) throw CorpusError("segment_record: sampling rate must be positive");
    const std::size_t T = signal.shape[0];
    const std::size_t n_ch = signal.shape[1];
    const auto n_sp = static_cast<std::size_t>(std::llround(length_s * rate_hz));
    std::vector<Segment> out;
    if (n_sp == 0 || T < n_sp) return out;
    const std::size_t count = T / n_sp;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        Segment seg;
        seg.case_id = case_id;
        seg.file_id = file_id;
        seg.start_s = static_cast<double>(k) * length_s;
        auto [label, overlap] = label_segment(seg.start_s, seg.start_s + length_s, annotations);
        seg.seizure = label;
        seg.seizure_overlap_s = overlap;
        seg.data = Tensor(Shape{n_sp, n_ch});
        std::copy_n(signal.data.begin() + static_cast<std::ptrdiff_t>(k * n_sp * n_ch),
                    n_sp * n_ch, seg.data.data.begin());
        out.push_back(std::move(seg));
    }
    return out;
}

// All seizure segments plus an equally sized seeded uniform sample (without
// replacement) of the non-seizure pool.
inline std::pair<std::vector<Segment>, CorpusManifest> build_balanced_corpus(
    const std::vector<Segment>& all, std::uint64_t seed) {
    std::vector<std::size_t> seiz, pool;
    for (std::size_t i = 0; i < all.size(); ++i) (all[i].seizure ? seiz : pool).push_back(i);
    if (pool.size() < seiz.size())
        throw CorpusError("balanced corpus: " + std::to_string(pool.size()) +
                          " non-seizure segments cannot match " + std::to_string(seiz.size()) +
                          " seizure segments");
    Rng rng(derive_seed(seed, "sampling"));
    std::vector<std::size_t> picked = rng.sample_without_replacement(pool.size(), seiz.size());

    std::vector<Segment> corpus;
    corpus.reserve(2 * seiz.size());
    CorpusManifest manifest;
    manifest.seed = seed;
    for (std::size_t i : seiz) {
        corpus.push_back(all[i]);
        ++manifest.seizure_count;
        ++manifest.per_case[all[i].case_id].first;
    }
    for (std::size_t p : picked) {
        corpus.push_back(all[pool[p]]);
        ++manifest.non_seizure_count;
        ++manifest.per_case[all[pool[p]].case_id].second;
    }
    return {std::move(corpus), std::move(manifest)};
}

// --- segment archive ---------------------------------------------------------
//
// magic "SEGV1", u32 segment count, u32 n_sp, u32 n_ch, then per segment:
// u16-length-prefixed case id and file id, f64 start_s, u8 label,
// f64 overlap_s, n_sp*n_ch f64 samples. All integers and floats little-endian.

namespace detail {

inline void put_u16(std::ostream& os, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double v) {
    std::uint64_t u;
    static_assert(sizeof(u) == sizeof(v));
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    if (!is.read(reinterpret_cast<char*>(b), 2)) throw ArchiveError("archive: truncated");
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw ArchiveError("archive: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw ArchiveError("archive: truncated");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

inline void put_string16(std::ostream& os, const std::string& s) {
    if (s.size() > 0xffff) throw ArchiveError("archive: string too long");
    put_u16(os, static_cast<std::uint16_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string16(std::istream& is) {
    const std::size_t n = get_u16(is);
    std::string s(n, '\0');
    if (n && !is.read(s.data(), static_cast<std::streamsize>(n)))
        throw ArchiveError("archive: truncated");
    return s;
}

}  // namespace detail

inline void write_segment_archive(const std::filesystem::path& path,
                                  std::span<const Segment> segments) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ArchiveError("archive: cannot open " + path.string() + " for writing");
    const std::size_t n_sp = segments.empty() ? 0 : segments[0].data.shape[0];
    const std::size_t n_ch = segments.empty() ? 0 : segments[0].data.shape[1];
    os.write("SEGV1", 5);
    detail::put_u32(os, static_cast<std::uint32_t>(segments.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(n_sp));
    detail::put_u32(os, static_cast<std::uint32_t>(n_ch));
    for (const Segment& s : segments) {
        if (s.data.shape != Shape{n_sp, n_ch})
            throw ArchiveError("archive: segment shape " + shape_str(s.data.shape) +
                               " differs from " + shape_str(Shape{n_sp, n_ch}));
        detail::put_string16(os, s.case_id);
        detail::put_string16(os, s.file_id);
        detail::put_f64(os, s.start_s);
        os.put(s.seizure ? '\1' : '\0');
        detail::put_f64(os, s.seizure_overlap_s);
        for (double v : s.data.data) detail::put_f64(os, v);
    }
    if (!os) throw ArchiveError("archive: write failed for " + path.string());
}

inline std::vector<Segment> read_segment_archive(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ArchiveError("archive: cannot open " + path.string());
    char magic[5];
    if (!is.read(magic, 5) || std::string_view(magic, 5) != "SEGV1")
        throw ArchiveError("archive: bad magic in " + path.string());
    const std::size_t count = detail::get_u32(is);
    const std::size_t n_sp = detail::get_u32(is);
    const std::size_t n_ch = detail::get_u32(is);
    std::vector<Segment> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Segment s;
        s.case_id = detail::get_string16(is);
        s.file_id = detail::get_string16(is);
        s.start_s = detail::get_f64(is);
        int label = is.get();
        if (label != 0 && label != 1) throw ArchiveError("archive: bad label byte");
        s.seizure = label == 1;
        s.seizure_overlap_s = detail::get_f64(is);
        s.data = Tensor(Shape{n_sp, n_ch});
        for (double& v : s.data.data) v = detail::get_f64(is);
        out.push_back(std::move(s));
    }
    return out;
}

inline void write_corpus_manifest(const std::filesystem::path& path, const CorpusManifest& m,
                                  std::span<const Segment> corpus) {
    std::ofstream os(path);
    if (!os) throw ArchiveError("manifest: cannot open " + path.string() + " for writing");
    os << "seizure_segments = " << m.seizure_count << "\n";
    os << "non_seizure_segments = " << m.non_seizure_count << "\n";
    os << "seed = " << m.seed << "\n";
    for (const auto& [case_id, counts] : m.per_case)
        os << "case " << case_id << " = " << counts.first << " seizure, " << counts.second
           << " non-seizure\n";
    // seizure-content statistics over the seizure segments actually produced
    std::vector<double> overlaps;
    for (const auto& s : corpus)
        if (s.seizure) overlaps.push_back(s.seizure_overlap_s);
    if (!overlaps.empty()) {
        double mn = overlaps[0], mx = overlaps[0], sum = 0.0;
        std::size_t lt7 = 0, gt10 = 0, gt17 = 0;
        for (double v : overlaps) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
            sum += v;
            if (v < 7.0) ++lt7;
            if (v > 10.0) ++gt10;
            if (v > 17.0) ++gt17;
        }
        const auto pct = [&](std::size_t k) {
            return 100.0 * static_cast<double>(k) / static_cast<double>(overlaps.size());
        };
        os << "seizure_content_min_s = " << mn << "\n";
        os << "seizure_content_max_s = " << mx << "\n";
        os << "seizure_content_mean_s = " << sum / static_cast<double>(overlaps.size()) << "\n";
        os << "seizure_content_lt_7s_pct = " << pct(lt7) << "\n";
        os << "seizure_content_gt_10s_pct = " << pct(gt10) << "\n";
        os << "seizure_content_gt_17s_pct = " << pct(gt17) << "\n";
    }
    os << "skipped_files = " << m.skipped_files.size() << "\n";
    for (const auto& f : m.skipped_files) os << "skipped " << f << "\n";
}

}  // namespace ablm
