#pragma once

#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ablm/tensor.hpp"

namespace ablm::edf {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AnnotationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ChannelMissingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EdfChannelHeader {
    std::string label;
    std::string transducer;
    std::string physical_dimension;
    double physical_min = 0.0;
    double physical_max = 0.0;
    int digital_min = 0;
    int digital_max = 0;
    std::string prefiltering;
    std::size_t samples_per_record = 0;
};

struct EdfHeader {
    std::string version = "0";
    std::string patient_id = "X";
    std::string recording_id = "X";
    std::string start_date = "01.01.00";
    std::string start_time = "00.00.00";
    std::size_t record_count = 0;
    double record_duration_s = 1.0;
    std::vector<EdfChannelHeader> channels;

    std::size_t channel_count() const { return channels.size(); }
    std::size_t header_bytes() const { return 256 + 256 * channels.size(); }
};

// One parsed recording: channel signals in physical units (microvolts for
// CHB-MIT). File order and duplicate labels are preserved.
struct EegRecord {
    std::string case_id;
    std::string file_id;
    double sampling_rate_hz = 0.0;
    std::vector<std::pair<std::string, std::vector<double>>> channels;
    double duration_s = 0.0;
};

struct SeizureAnnotation {
    std::string file_id;
    double start_s = 0.0;
    double end_s = 0.0;
};

// The 17 common channels of the CHB-MIT montage, in the fixed order used for
// model inputs, checkpoints and attention exports.
inline const std::array<std::string, 17>& canonical_channel_labels() {
    static const std::array<std::string, 17> labels = {
        "P4-O2", "FP2-F4", "P7-O1", "C4-P4", "F7-T7", "C3-P3", "FP1-F7", "F8-T8", "FZ-CZ",
        "CZ-PZ", "F3-C3", "T7-P7", "P8-O2", "FP1-F3", "F4-C4", "FP2-F8", "P3-O1"};
    return labels;
}

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// label matching is case-insensitive with all whitespace stripped
inline std::string normalize_label(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c)))
            out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    return out;
}

inline std::string field(std::span<const unsigned char> bytes, std::size_t off, std::size_t len) {
    if (off + len > bytes.size())
        throw ParseError("edf: truncated header at byte " + std::to_string(off));
    return trim(std::string_view(reinterpret_cast<const char*>(bytes.data()) + off, len));
}

inline long field_int(std::span<const unsigned char> bytes, std::size_t off, std::size_t len,
                      const char* what) {
    std::string s = field(bytes, off, len);
    long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError(std::string("edf: non-numeric ") + what + " field '" + s + "' at byte " +
                         std::to_string(off));
    return v;
}

inline double field_double(std::span<const unsigned char> bytes, std::size_t off, std::size_t len,
                           const char* what) {
    std::string s = field(bytes, off, len);
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw ParseError(std::string("edf: non-numeric ") + what + " field '" + s + "' at byte " +
                         std::to_string(off));
    return v;
}

inline void put_field(std::string& buf, std::size_t off, std::size_t len, const std::string& s) {
    if (s.size() > len)
        throw ParseError("edf: field '" + s + "' longer than " + std::to_string(len) + " bytes");
    for (std::size_t i = 0; i < len; ++i) buf[off + i] = i < s.size() ? s[i] : ' ';
}

inline std::string format_number(double v) {
    // shortest representation that round-trips typical header values
    char tmp[32];
    std::snprintf(tmp, sizeof(tmp), "%g", v);
    return tmp;
}

}  // namespace detail

struct EdfFile {
    EdfHeader header;
    EegRecord record;
    // raw samples per channel, kept so fixtures can be re-serialized bit-exactly
    std::vector<std::vector<std::int16_t>> digital;
};

inline double digital_to_physical(double digital, const EdfChannelHeader& ch) {
    return (digital - ch.digital_min) * (ch.physical_max - ch.physical_min) /
               (ch.digital_max - ch.digital_min) +
           ch.physical_min;
}

inline EdfFile parse_edf(std::span<const unsigned char> bytes) {
    using namespace detail;
    if (bytes.size() < 256) throw ParseError("edf: truncated file, only " +
                                             std::to_string(bytes.size()) + " header bytes");
    EdfFile out;
    EdfHeader& h = out.header;
    h.version = field(bytes, 0, 8);
    h.patient_id = field(bytes, 8, 80);
    h.recording_id = field(bytes, 88, 80);
    h.start_date = field(bytes, 168, 8);
    h.start_time = field(bytes, 176, 8);
    const long declared_header = field_int(bytes, 184, 8, "header-bytes");
    const long n_records = field_int(bytes, 236, 8, "record-count");
    h.record_duration_s = field_double(bytes, 244, 8, "record-duration");
    const long ns = field_int(bytes, 252, 4, "signal-count");
    if (ns <= 0) throw ParseError("edf: signal count " + std::to_string(ns) + " at byte 252");
    if (n_records < 0)
        throw ParseError("edf: record count " + std::to_string(n_records) + " at byte 236");
    h.record_count = static_cast<std::size_t>(n_records);

    const std::size_t nch = static_cast<std::size_t>(ns);
    const std::size_t header_len = 256 + 256 * nch;
    if (declared_header != static_cast<long>(header_len))
        throw ParseError("edf: header declares " + std::to_string(declared_header) +
                         " bytes, want " + std::to_string(header_len) + " for " +
                         std::to_string(nch) + " signals");
    if (bytes.size() < header_len)
        throw ParseError("edf: truncated header at byte " + std::to_string(bytes.size()));

    // per-signal header fields are grouped by field, not by signal
    h.channels.resize(nch);
    std::size_t off = 256;
    for (std::size_t i = 0; i < nch; ++i) h.channels[i].label = field(bytes, off + 16 * i, 16);
    off += 16 * nch;
    for (std::size_t i = 0; i < nch; ++i) h.channels[i].transducer = field(bytes, off + 80 * i, 80);
    off += 80 * nch;
    for (std::size_t i = 0; i < nch; ++i)
        h.channels[i].physical_dimension = field(bytes, off + 8 * i, 8);
    off += 8 * nch;
    for (std::size_t i = 0; i < nch; ++i)
        h.channels[i].physical_min = field_double(bytes, off + 8 * i, 8, "physical-min");
    off += 8 * nch;
    for (std::size_t i = 0; i < nch; ++i)
        h.channels[i].physical_max = field_double(bytes, off + 8 * i, 8, "physical-max");
    off += 8 * nch;
    for (std::size_t i = 0; i < nch; ++i)
        h.channels[i].digital_min = static_cast<int>(field_int(bytes, off + 8 * i, 8, "digital-min"));
    off += 8 * nch;
    for (std::size_t i = 0; i < nch; ++i)
        h.channels[i].digital_max = static_cast<int>(field_int(bytes, off + 8 * i, 8, "digital-max"));
    off += 8 * nch;
    for (std::size_t i = 0; i < nch; ++i)
        h.channels[i].prefiltering = field(bytes, off + 80 * i, 80);
    off += 80 * nch;
    for (std::size_t i = 0; i < nch; ++i) {
        long spr = field_int(bytes, off + 8 * i, 8, "samples-per-record");
        if (spr <= 0)
            throw ParseError("edf: samples-per-record " + std::to_string(spr) + " at byte " +
                             std::to_string(off + 8 * i));
        h.channels[i].samples_per_record = static_cast<std::size_t>(spr);
    }

    for (std::size_t i = 0; i < nch; ++i) {
        const EdfChannelHeader& ch = h.channels[i];
        if (ch.digital_min >= ch.digital_max)
            throw ParseError("edf: channel '" + ch.label + "' digital range [" +
                             std::to_string(ch.digital_min) + ", " +
                             std::to_string(ch.digital_max) + "] is empty");
        if (ch.physical_min == ch.physical_max)
            throw ParseError("edf: channel '" + ch.label + "' has degenerate physical range");
    }

    std::size_t samples_per_full_record = 0;
    for (const auto& ch : h.channels) samples_per_full_record += ch.samples_per_record;
    const std::size_t want = header_len + h.record_count * samples_per_full_record * 2;
    if (bytes.size() < want)
        throw ParseError("edf: data truncated at byte " + std::to_string(bytes.size()) +
                         ", want " + std::to_string(want));

    // de-interleave data records
    out.digital.resize(nch);
    for (std::size_t i = 0; i < nch; ++i)
        out.digital[i].reserve(h.record_count * h.channels[i].samples_per_record);
    std::size_t pos = header_len;
    for (std::size_t r = 0; r < h.record_count; ++r) {
        for (std::size_t i = 0; i < nch; ++i) {
            for (std::size_t s = 0; s < h.channels[i].samples_per_record; ++s) {
                const std::uint16_t lo = bytes[pos];
                const std::uint16_t hi = bytes[pos + 1];
                out.digital[i].push_back(static_cast<std::int16_t>(lo | (hi << 8)));
                pos += 2;
            }
        }
    }

    // EDF annotation channels and off-rate auxiliary channels are dropped;
    // the record keeps equal-length signal arrays only.
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < nch; ++i) {
        if (detail::normalize_label(h.channels[i].label) == "EDFANNOTATIONS") continue;
        kept.push_back(i);
    }
    if (!kept.empty()) {
        // majority samples_per_record wins
        std::size_t best_spr = 0, best_count = 0;
        for (std::size_t i : kept) {
            std::size_t spr = h.channels[i].samples_per_record, count = 0;
            for (std::size_t j : kept)
                if (h.channels[j].samples_per_record == spr) ++count;
            if (count > best_count) {
                best_count = count;
                best_spr = spr;
            }
        }
        std::vector<std::size_t> uniform;
        for (std::size_t i : kept)
            if (h.channels[i].samples_per_record == best_spr) uniform.push_back(i);
        kept = std::move(uniform);
        if (h.record_duration_s <= 0.0)
            throw ParseError("edf: record duration must be positive");
        out.record.sampling_rate_hz = static_cast<double>(best_spr) / h.record_duration_s;
    }
    out.record.duration_s = static_cast<double>(h.record_count) * h.record_duration_s;
    for (std::size_t i : kept) {
        std::vector<double> physical(out.digital[i].size());
        for (std::size_t s = 0; s < physical.size(); ++s)
            physical[s] = digital_to_physical(out.digital[i][s], h.channels[i]);
        out.record.channels.emplace_back(h.channels[i].label, std::move(physical));
    }
    return out;
}

// Serializes a header plus raw digital samples back to EDF bytes. Used to
// build synthetic fixtures; parse_edf of the result is the identity on them.
inline std::vector<unsigned char> write_edf(const EdfHeader& h,
                                            std::span<const std::vector<std::int16_t>> digital) {
    using namespace detail;
    const std::size_t nch = h.channels.size();
    if (digital.size() != nch)
        throw ParseError("edf: " + std::to_string(digital.size()) + " signal arrays for " +
                         std::to_string(nch) + " channels");
    for (std::size_t i = 0; i < nch; ++i)
        if (digital[i].size() != h.record_count * h.channels[i].samples_per_record)
            throw ParseError("edf: channel '" + h.channels[i].label + "' has " +
                             std::to_string(digital[i].size()) + " samples, want " +
                             std::to_string(h.record_count * h.channels[i].samples_per_record));

    std::string buf(h.header_bytes(), ' ');
    put_field(buf, 0, 8, h.version);
    put_field(buf, 8, 80, h.patient_id);
    put_field(buf, 88, 80, h.recording_id);
    put_field(buf, 168, 8, h.start_date);
    put_field(buf, 176, 8, h.start_time);
    put_field(buf, 184, 8, std::to_string(h.header_bytes()));
    put_field(buf, 236, 8, std::to_string(h.record_count));
    put_field(buf, 244, 8, format_number(h.record_duration_s));
    put_field(buf, 252, 4, std::to_string(nch));
    std::size_t off = 256;
    for (std::size_t i = 0; i < nch; ++i) put_field(buf, off + 16 * i, 16, h.channels[i].label);
    off += 16 * nch;
    for (std::size_t i = 0; i < nch; ++i) put_field(buf, off + 80 * i, 80, h.channels[i].transducer);
    off += 80 * nch;
    for (std::size_t i = 0; i < nch; ++i)
        put_field(buf, off + 8 * i, 8, h.channels[i].physical_dimension);
    off += 8 * nch;
    for (std::size_t i = 0; i < nch; ++i)
        put_field(buf, off + 8 * i, 8, format_number(h.channels[i].physical_min));
    off += 8 * nch;
    for (std::size_t i = 0; i < nch; ++i)
        put_field(buf, off + 8 * i, 8, format_number(h.channels[i].physical_max));
    off += 8 * nch;
    for (std::size_t i = 0; i < nch; ++i)
        put_field(buf, off + 8 * i, 8, std::to_string(h.channels[i].digital_min));
    off += 8 * nch;
    for (std::size_t i = 0; i < nch; ++i)
        put_field(buf, off + 8 * i, 8, std::to_string(h.channels[i].digital_max));
    off += 8 * nch;
    for (std::size_t i = 0; i < nch; ++i)
        put_field(buf, off + 80 * i, 80, h.channels[i].prefiltering);
    off += 80 * nch;
    for (std::size_t i = 0; i < nch; ++i)
        put_field(buf, off + 8 * i, 8, std::to_string(h.channels[i].samples_per_record));

    std::vector<unsigned char> bytes(buf.begin(), buf.end());
    for (std::size_t r = 0; r < h.record_count; ++r) {
        for (std::size_t i = 0; i < nch; ++i) {
            const std::size_t spr = h.channels[i].samples_per_record;
            for (std::size_t s = 0; s < spr; ++s) {
                const auto v = static_cast<std::uint16_t>(digital[i][r * spr + s]);
                bytes.push_back(static_cast<unsigned char>(v & 0xff));
                bytes.push_back(static_cast<unsigned char>(v >> 8));
            }
        }
    }
    return bytes;
}

// Parses a CHB-MIT chbXX-summary.txt stream. Blocks with zero declared
// seizures contribute nothing.
inline std::vector<SeizureAnnotation> parse_summary(std::string_view text) {
    using namespace detail;
    std::vector<SeizureAnnotation> out;
    std::string cur_file;
    long declared = -1;
    std::vector<double> starts, ends;

    auto parse_seconds = [&](const std::string& line) {
        auto colon = line.rfind(':');
        if (colon == std::string::npos)
            throw AnnotationError(cur_file + ": malformed seizure line '" + line + "'");
        std::string rest = trim(line.substr(colon + 1));
        if (auto sec = rest.find("seconds"); sec != std::string::npos)
            rest = trim(rest.substr(0, sec));
        char* end = nullptr;
        double v = std::strtod(rest.c_str(), &end);
        if (rest.empty() || end != rest.c_str() + rest.size())
            throw AnnotationError(cur_file + ": bad seizure time '" + rest + "'");
        return v;
    };

    auto flush = [&]() {
        if (cur_file.empty()) return;
        if (declared < 0)
            throw AnnotationError(cur_file + ": missing 'Number of Seizures in File'");
        if (starts.size() != static_cast<std::size_t>(declared) || ends.size() != starts.size())
            throw AnnotationError(cur_file + ": declared " + std::to_string(declared) +
                                  " seizures, found " + std::to_string(starts.size()) +
                                  " starts and " + std::to_string(ends.size()) + " ends");
        for (std::size_t i = 0; i < starts.size(); ++i) {
            if (starts[i] < 0.0 || ends[i] <= starts[i])
                throw AnnotationError(cur_file + ": seizure interval [" +
                                      std::to_string(starts[i]) + ", " + std::to_string(ends[i]) +
                                      ") is not increasing");
            out.push_back(SeizureAnnotation{cur_file, starts[i], ends[i]});
        }
        cur_file.clear();
        declared = -1;
        starts.clear();
        ends.clear();
    };

    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string line = trim(text.substr(pos, nl - pos));
        pos = nl + 1;

        if (line.rfind("File Name:", 0) == 0) {
            flush();
            cur_file = trim(line.substr(10));
            if (cur_file.empty()) throw AnnotationError("summary: empty file name");
        } else if (line.rfind("Number of Seizures in File:", 0) == 0) {
            if (cur_file.empty())
                throw AnnotationError("summary: seizure count outside a file block");
            declared = std::strtol(line.c_str() + 27, nullptr, 10);
        } else if (line.rfind("Seizure", 0) == 0 && line.find("Start Time:") != std::string::npos) {
            if (cur_file.empty()) throw AnnotationError("summary: seizure line outside a file block");
            starts.push_back(parse_seconds(line));
        } else if (line.rfind("Seizure", 0) == 0 && line.find("End Time:") != std::string::npos) {
            if (cur_file.empty()) throw AnnotationError("summary: seizure line outside a file block");
            ends.push_back(parse_seconds(line));
        }
        if (nl == text.size()) break;
    }
    flush();
    return out;
}

// Columns ordered exactly as `wanted`, independent of file-internal order.
// Duplicate labels resolve to the first occurrence.
inline Tensor select_channels(const EegRecord& record,
                              std::span<const std::string> wanted) {
    using namespace detail;
    std::vector<std::size_t> pick(wanted.size());
    std::vector<std::string> missing;
    for (std::size_t j = 0; j < wanted.size(); ++j) {
        const std::string key = normalize_label(wanted[j]);
        std::size_t found = record.channels.size();
        for (std::size_t i = 0; i < record.channels.size(); ++i) {
            if (normalize_label(record.channels[i].first) == key) {
                found = i;
                break;
            }
        }
        if (found == record.channels.size())
            missing.push_back(wanted[j]);
        else
            pick[j] = found;
    }
    if (!missing.empty()) {
        std::string msg = record.file_id.empty() ? "record" : record.file_id;
        msg += " missing channels:";
        for (const auto& m : missing) msg += " " + m;
        throw ChannelMissingError(msg);
    }
    const std::size_t T = record.channels.empty() ? 0 : record.channels[pick[0]].second.size();
    Tensor out(Shape{T, wanted.size()});
    for (std::size_t j = 0; j < wanted.size(); ++j) {
        const auto& sig = record.channels[pick[j]].second;
        if (sig.size() != T)
            throw ChannelMissingError("record has unequal channel lengths");
        for (std::size_t t = 0; t < T; ++t) out.data[t * wanted.size() + j] = sig[t];
    }
    return out;
}

inline Tensor select_canonical_channels(const EegRecord& record) {
    const auto& labels = canonical_channel_labels();
    return select_channels(record, std::span<const std::string>(labels.data(), labels.size()));
}

}  // namespace ablm::edf
