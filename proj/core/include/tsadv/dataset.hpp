#pragma once

#include <map>
#include <string>
#include <vector>

namespace tsadv {

// One univariate series. Values are kept in f64 for I/O round-trip fidelity;
// models convert on ingestion.
struct TimeSeries {
    std::vector<double> values;
    int length() const { return static_cast<int>(values.size()); }
};

enum class Split { Train, Test };

// A UCR-style labeled split. Label tokens from the files are remapped to
// contiguous class indices via class_map (sorted token order, shared between
// the train and test splits).
struct LabeledDataset {
    std::vector<TimeSeries> instances;
    std::vector<int> labels;                 // class index in [0, K)
    std::map<std::string, int> class_map;    // original token -> index
    std::string name;
    Split split = Split::Train;

    int size() const { return static_cast<int>(instances.size()); }
    int num_classes() const { return static_cast<int>(class_map.size()); }
    int length() const { return instances.empty() ? 0 : instances.front().length(); }
    std::string token_for(int cls) const;
};

// Loads a train/test pair. Format: one instance per line, label token first,
// then T values; delimiter auto-detected among comma/tab/whitespace. The
// class map is built from the union of both splits.
std::pair<LabeledDataset, LabeledDataset> load_ucr(const std::string& train_path,
                                                   const std::string& test_path,
                                                   const std::string& name = "");

// Loads one split against an existing class map (used for adversarial sets
// crafted against a model trained elsewhere).
LabeledDataset load_ucr_split(const std::string& path,
                              const std::map<std::string, int>& class_map, Split split,
                              const std::string& name = "");

// Per-series zero mean / unit variance; constant series map to all zeros.
LabeledDataset z_normalize(const LabeledDataset& ds);
std::vector<double> z_normalize(const std::vector<double>& values);

// Comma-delimited UCR text with original label tokens and 17-significant-digit
// floats; load_ucr round-trips bit-exactly on values. Written atomically.
void export_dataset(const LabeledDataset& ds, const std::string& path);

// Atomic text write used by every file-producing operation (temp + rename).
void atomic_write(const std::string& path, const std::string& content);

}  // namespace tsadv
