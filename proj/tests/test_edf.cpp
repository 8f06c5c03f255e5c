#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "ablm/edf.hpp"
#include "support/edf_fixtures.hpp"

using namespace ablm;
using namespace ablm::edf;

TEST_CASE("calibration maps digital endpoints to physical endpoints exactly") {
    EdfHeader h = fixtures::make_header({"C3-P3"}, 4, 1);
    std::vector<std::vector<std::int16_t>> digital{{-2048, 2047, 0, -1}};
    auto bytes = write_edf(h, digital);
    EdfFile f = parse_edf(bytes);
    REQUIRE(f.record.channels.size() == 1);
    const auto& sig = f.record.channels[0].second;
    CHECK(sig[0] == -100.0);
    CHECK(sig[1] == 100.0);
    CHECK(sig[2] == doctest::Approx((0 + 2048) * 200.0 / 4095.0 - 100.0).epsilon(1e-12));
}

TEST_CASE("calibration is monotone when physical_max > physical_min") {
    EdfHeader h = fixtures::make_header({"X"}, 2, 1);
    const EdfChannelHeader& ch = h.channels[0];
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        int a = static_cast<int>(rng.below(4095)) - 2048;
        int b = a + 1 + static_cast<int>(rng.below(64));
        if (b > 2047) continue;
        CHECK(digital_to_physical(a, ch) < digital_to_physical(b, ch));
    }
}

TEST_CASE("write-then-parse round-trips digital samples and bytes exactly") {
    EdfHeader h = fixtures::make_header({"C3-P3", "F7-T7"}, 8, 2);
    auto digital = fixtures::random_digital(2, 16, 99);
    auto bytes = write_edf(h, digital);
    EdfFile f = parse_edf(bytes);
    CHECK(f.digital == digital);
    CHECK(f.header.record_count == 2);
    CHECK(f.record.sampling_rate_hz == 8.0);
    CHECK(f.record.duration_s == 2.0);
    // physical values equal the calibration of every digital sample
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t s = 0; s < 16; ++s)
            CHECK(f.record.channels[c].second[s] ==
                  digital_to_physical(digital[c][s], h.channels[c]));
    // re-serialization is bit-exact
    auto again = write_edf(f.header, f.digital);
    CHECK(again == bytes);
}

TEST_CASE("truncated files and malformed headers raise parse errors with offsets") {
    EdfHeader h = fixtures::make_header({"C3-P3"}, 8, 2);
    auto digital = fixtures::random_digital(1, 16, 5);
    auto bytes = write_edf(h, digital);

    SUBCASE("truncated header") {
        std::vector<unsigned char> cut(bytes.begin(), bytes.begin() + 100);
        CHECK_THROWS_AS((void)parse_edf(cut), ParseError);
    }
    SUBCASE("truncated data region") {
        std::vector<unsigned char> cut(bytes.begin(), bytes.end() - 6);
        try {
            (void)parse_edf(cut);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("byte") != std::string::npos);
        }
    }
    SUBCASE("header byte-count mismatch") {
        auto bad = bytes;
        bad[184] = '9';
        bad[185] = '9';
        bad[186] = '9';
        CHECK_THROWS_AS((void)parse_edf(bad), ParseError);
    }
    SUBCASE("non-numeric record count") {
        auto bad = bytes;
        bad[236] = 'x';
        try {
            (void)parse_edf(bad);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("236") != std::string::npos);
        }
    }
    SUBCASE("degenerate digital range") {
        EdfHeader bad_h = h;
        bad_h.channels[0].digital_min = 5;
        bad_h.channels[0].digital_max = 5;
        // write_edf does not validate ranges; parse must
        auto bad_bytes = write_edf(bad_h, digital);
        CHECK_THROWS_AS((void)parse_edf(bad_bytes), ParseError);
    }
}

TEST_CASE("summary: zero-seizure block yields nothing") {
    const char* text =
        "File Name: chb01_01.edf\n"
        "File Start Time: 11:42:54\n"
        "File End Time: 12:42:54\n"
        "Number of Seizures in File: 0\n";
    CHECK(parse_summary(text).empty());
}

TEST_CASE("summary: single seizure block mirrors the CHB-MIT layout") {
    const char* text =
        "Data Sampling Rate: 256 Hz\n"
        "\n"
        "File Name: chb01_03.edf\n"
        "File Start Time: 13:43:04\n"
        "File End Time: 14:43:04\n"
        "Number of Seizures in File: 1\n"
        "Seizure Start Time: 2996 seconds\n"
        "Seizure End Time: 3036 seconds\n";
    auto anns = parse_summary(text);
    REQUIRE(anns.size() == 1);
    CHECK(anns[0].file_id == "chb01_03.edf");
    CHECK(anns[0].start_s == 2996.0);
    CHECK(anns[0].end_s == 3036.0);
}

TEST_CASE("summary: two seizures arrive in declaration order, numbered style included") {
    const char* text =
        "File Name: chb24_01.edf\n"
        "Number of Seizures in File: 2\n"
        "Seizure 1 Start Time: 480 seconds\n"
        "Seizure 1 End Time: 505 seconds\n"
        "Seizure 2 Start Time: 2451 seconds\n"
        "Seizure 2 End Time: 2476 seconds\n";
    auto anns = parse_summary(text);
    REQUIRE(anns.size() == 2);
    CHECK(anns[0].start_s == 480.0);
    CHECK(anns[0].end_s == 505.0);
    CHECK(anns[1].start_s == 2451.0);
    CHECK(anns[1].end_s == 2476.0);
}

TEST_CASE("summary: end before start and missing fields name the file block") {
    const char* reversed =
        "File Name: chb09_08.edf\n"
        "Number of Seizures in File: 1\n"
        "Seizure Start Time: 300 seconds\n"
        "Seizure End Time: 200 seconds\n";
    try {
        (void)parse_summary(reversed);
        FAIL("expected AnnotationError");
    } catch (const AnnotationError& e) {
        CHECK(std::string(e.what()).find("chb09_08.edf") != std::string::npos);
    }

    const char* missing =
        "File Name: chb09_09.edf\n"
        "Number of Seizures in File: 2\n"
        "Seizure Start Time: 300 seconds\n"
        "Seizure End Time: 350 seconds\n";
    try {
        (void)parse_summary(missing);
        FAIL("expected AnnotationError");
    } catch (const AnnotationError& e) {
        CHECK(std::string(e.what()).find("chb09_09.edf") != std::string::npos);
    }
}

namespace {

// record with the canonical montage in shuffled order; channel value =
// constant marker per label position in `order`
EegRecord marker_record(const std::vector<std::string>& order) {
    EegRecord r;
    r.file_id = "marker.edf";
    r.sampling_rate_hz = 4.0;
    r.duration_s = 2.0;
    for (std::size_t i = 0; i < order.size(); ++i)
        r.channels.emplace_back(order[i], std::vector<double>(8, static_cast<double>(i)));
    return r;
}

}  // namespace

TEST_CASE("select_channels orders columns canonically regardless of file order") {
    std::vector<std::string> shuffled(canonical_channel_labels().begin(),
                                      canonical_channel_labels().end());
    Rng rng(13);
    rng.shuffle(shuffled);
    EegRecord r = marker_record(shuffled);
    Tensor out = select_canonical_channels(r);
    REQUIRE(out.shape == Shape{8, 17});
    for (std::size_t j = 0; j < 17; ++j) {
        const std::string& want = canonical_channel_labels()[j];
        const auto it = std::find(shuffled.begin(), shuffled.end(), want);
        const auto marker = static_cast<double>(it - shuffled.begin());
        for (std::size_t t = 0; t < 8; ++t) CHECK(out(t, j) == marker);
    }
}

TEST_CASE("select_channels: missing label is an error listing the absences") {
    std::vector<std::string> labels(canonical_channel_labels().begin(),
                                    canonical_channel_labels().end());
    labels.erase(std::find(labels.begin(), labels.end(), "FZ-CZ"));
    EegRecord r = marker_record(labels);
    try {
        (void)select_canonical_channels(r);
        FAIL("expected ChannelMissingError");
    } catch (const ChannelMissingError& e) {
        CHECK(std::string(e.what()).find("FZ-CZ") != std::string::npos);
    }
}

TEST_CASE("select_channels: extra channels are dropped, duplicates take first occurrence") {
    std::vector<std::string> labels(canonical_channel_labels().begin(),
                                    canonical_channel_labels().end());
    labels.push_back("ECG");
    labels.push_back("VNS");
    labels.push_back("T7-P7");  // duplicate of a canonical label
    labels.insert(labels.begin(), "EXTRA-0");
    EegRecord r = marker_record(labels);
    Tensor out = select_canonical_channels(r);
    CHECK(out.shape == Shape{8, 17});
    // the duplicate T7-P7 sits at the end; the first occurrence must win
    const auto first = std::find(labels.begin(), labels.end(), "T7-P7") - labels.begin();
    const auto col =
        std::find(canonical_channel_labels().begin(), canonical_channel_labels().end(), "T7-P7") -
        canonical_channel_labels().begin();
    CHECK(out(0, static_cast<std::size_t>(col)) == static_cast<double>(first));
}

TEST_CASE("select_channels matching is case-insensitive and whitespace-blind") {
    std::vector<std::string> labels;
    for (const auto& l : canonical_channel_labels()) {
        std::string noisy = " " + l + " ";
        for (char& c : noisy) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        labels.push_back(noisy);
    }
    EegRecord r = marker_record(labels);
    CHECK(select_canonical_channels(r).shape == Shape{8, 17});
}

TEST_CASE("annotation channels and off-rate channels are dropped at parse time") {
    EdfHeader h;
    h.record_count = 2;
    h.record_duration_s = 1.0;
    h.channels.push_back(fixtures::channel("C3-P3", 8));
    h.channels.push_back(fixtures::channel("F7-T7", 8));
    h.channels.push_back(fixtures::channel("EDF Annotations", 8));
    h.channels.push_back(fixtures::channel("SLOW-AUX", 2));  // off-rate
    std::vector<std::vector<std::int16_t>> digital{
        std::vector<std::int16_t>(16, 1), std::vector<std::int16_t>(16, 2),
        std::vector<std::int16_t>(16, 3), std::vector<std::int16_t>(4, 4)};
    EdfFile f = parse_edf(write_edf(h, digital));
    REQUIRE(f.record.channels.size() == 2);
    CHECK(f.record.channels[0].first == "C3-P3");
    CHECK(f.record.channels[1].first == "F7-T7");
    CHECK(f.record.sampling_rate_hz == 8.0);
    // invariant: every kept channel has the same length
    CHECK(f.record.channels[0].second.size() == f.record.channels[1].second.size());
}
