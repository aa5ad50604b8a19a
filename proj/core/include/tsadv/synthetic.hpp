#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tsadv/dataset.hpp"

namespace tsadv {

// Recipe for a deterministic synthetic classification dataset: each class has
// a fixed waveform (two sinusoids plus a localized bump); instances add phase
// and amplitude jitter and white noise, then are z-normalized.
struct SyntheticSpec {
    std::string name = "synthetic";
    int num_classes = 2;
    int length = 64;
    int train_size = 30;
    int test_size = 30;
    double noise = 0.3;          // white noise amplitude
    double phase_jitter = 0.25;  // radians, per instance
    double amp_jitter = 0.15;    // relative amplitude spread
    double class_spread = 1.0;   // scales how far class waveforms are apart
};

std::pair<LabeledDataset, LabeledDataset> make_synthetic(const SyntheticSpec& spec,
                                                         uint64_t seed);

// Presets whose shapes mirror the small UCR problems used by the experiment
// scripts (sizes scaled to desk hardware): coffee, ham, beef,
// italypowerdemand, twoleadecg.
SyntheticSpec synthetic_preset(const std::string& name);
std::vector<std::string> synthetic_preset_names();

}  // namespace tsadv
