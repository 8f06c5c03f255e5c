// Synthetic EEG-like corpora for training and protocol tests. The seizure
// class carries amplitude-modulated 3-12 Hz bursts on a subject-specific
// channel subset; the non-seizure class is AR(1) colored noise everywhere.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ablm/dataset.hpp"
#include "ablm/rng.hpp"

namespace synthetic {

struct CorpusSpec {
    std::size_t n_segments = 200;
    std::size_t n_subjects = 3;
    std::size_t n_ch = 17;
    double rate_hz = 32.0;
    double length_s = 23.0;
    double burst_amplitude = 1.2;
    std::uint64_t seed = 42;
};

inline std::vector<ablm::Segment> make_corpus(const CorpusSpec& spec) {
    ablm::Rng rng(ablm::derive_seed(spec.seed, "synthetic"));
    const auto n_sp = static_cast<std::size_t>(spec.length_s * spec.rate_hz);
    std::vector<ablm::Segment> corpus;
    corpus.reserve(spec.n_segments);

    for (std::size_t i = 0; i < spec.n_segments; ++i) {
        // seizure/non-seizure alternate so any even-sized corpus is balanced
        const bool seizure = i % 2 == 0;
        const std::size_t subject = (i / 2) % spec.n_subjects;

        ablm::Segment seg;
        seg.case_id = "subj" + std::to_string(subject);
        seg.file_id = "synthetic";
        seg.seizure = seizure;
        seg.start_s = static_cast<double>(i) * spec.length_s;
        seg.seizure_overlap_s = seizure ? spec.length_s : 0.0;
        seg.data = ablm::Tensor(ablm::Shape{n_sp, spec.n_ch});

        // AR(1) colored noise on every channel
        std::vector<double> state(spec.n_ch, 0.0);
        for (std::size_t t = 0; t < n_sp; ++t)
            for (std::size_t c = 0; c < spec.n_ch; ++c) {
                state[c] = 0.9 * state[c] + 0.2 * rng.normal();
                seg.data.data[t * spec.n_ch + c] = state[c];
            }

        if (seizure) {
            const double freq = rng.uniform(3.0, 12.0);
            const double phase = rng.uniform(0.0, 6.28318530717958648);
            for (std::size_t k = 0; k < 5; ++k) {
                const std::size_t c = (3 * subject + 2 * k) % spec.n_ch;
                for (std::size_t t = 0; t < n_sp; ++t) {
                    const double sec = static_cast<double>(t) / spec.rate_hz;
                    const double envelope =
                        spec.burst_amplitude *
                            std::fabs(std::sin(2.0 * 3.14159265358979 * 0.25 * sec)) +
                        0.3;
                    seg.data.data[t * spec.n_ch + c] +=
                        envelope * std::sin(2.0 * 3.14159265358979 * freq * sec + phase);
                }
            }
        }
        corpus.push_back(std::move(seg));
    }
    return corpus;
}

// Cleanly separable two-class corpus: seizure = strong fixed-frequency
// sinusoid on every channel, non-seizure = white noise.
inline std::vector<ablm::Segment> make_sinusoid_corpus(std::size_t n_segments, double rate_hz,
                                                       std::uint64_t seed,
                                                       std::size_t n_subjects = 2,
                                                       std::size_t n_ch = 17,
                                                       double length_s = 23.0) {
    ablm::Rng rng(ablm::derive_seed(seed, "sinusoid"));
    const auto n_sp = static_cast<std::size_t>(length_s * rate_hz);
    std::vector<ablm::Segment> corpus;
    corpus.reserve(n_segments);
    for (std::size_t i = 0; i < n_segments; ++i) {
        const bool seizure = i % 2 == 0;
        ablm::Segment seg;
        seg.case_id = "subj" + std::to_string((i / 2) % n_subjects);
        seg.file_id = "sinusoid";
        seg.seizure = seizure;
        seg.start_s = static_cast<double>(i) * length_s;
        seg.seizure_overlap_s = seizure ? length_s : 0.0;
        seg.data = ablm::Tensor(ablm::Shape{n_sp, n_ch});
        const double freq = rng.uniform(0.5, 1.8);
        const double phase = rng.uniform(0.0, 6.28318530717958648);
        for (std::size_t t = 0; t < n_sp; ++t) {
            const double sec = static_cast<double>(t) / rate_hz;
            for (std::size_t c = 0; c < n_ch; ++c)
                seg.data.data[t * n_ch + c] =
                    seizure ? 0.8 + 1.5 * std::sin(2.0 * 3.14159265358979 * freq * sec + phase)
                            : 0.3 * rng.normal();
        }
        corpus.push_back(std::move(seg));
    }
    return corpus;
}

}  // namespace synthetic
