#include "tsadv/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "tsadv/errors.hpp"

namespace tsadv {

namespace {

struct RawRow {
    std::string label;
    std::vector<double> values;
};

char detect_delimiter(const std::string& line) {
    if (line.find(',') != std::string::npos) return ',';
    if (line.find('\t') != std::string::npos) return '\t';
    return ' ';
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> out;
    if (delim == ' ') {
        std::istringstream is(line);
        std::string tok;
        while (is >> tok) out.push_back(tok);
        return out;
    }
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<RawRow> read_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<RawRow> rows;
    std::string line;
    int lineno = 0;
    char delim = 0;
    size_t expected_fields = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        if (delim == 0) delim = detect_delimiter(t);
        auto fields = split_fields(t, delim);
        if (fields.size() < 2)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected a label and at least one value");
        if (expected_fields == 0) expected_fields = fields.size();
        if (fields.size() != expected_fields)
            throw DataError(path + ":" + std::to_string(lineno) + ": ragged row, got " +
                            std::to_string(fields.size() - 1) + " values, expected " +
                            std::to_string(expected_fields - 1));
        RawRow row;
        row.label = trim(fields[0]);
        row.values.reserve(fields.size() - 1);
        for (size_t i = 1; i < fields.size(); ++i) {
            try {
                size_t used = 0;
                std::string f = trim(fields[i]);
                double v = std::stod(f, &used);
                if (used != f.size()) throw std::invalid_argument(f);
                if (!std::isfinite(v))
                    throw DataError(path + ":" + std::to_string(lineno) + ": non-finite value");
                row.values.push_back(v);
            } catch (const DataError&) {
                throw;
            } catch (const std::exception&) {
                throw DataError(path + ":" + std::to_string(lineno) + ": cannot parse value '" +
                                fields[i] + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(path + ": empty dataset file");
    return rows;
}

LabeledDataset assemble(const std::vector<RawRow>& rows, const std::map<std::string, int>& cmap,
                        Split split, const std::string& name, const std::string& path) {
    LabeledDataset ds;
    ds.class_map = cmap;
    ds.name = name;
    ds.split = split;
    size_t T = rows.front().values.size();
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].values.size() != T)
            throw DataError(path + ": inconsistent series length at instance " + std::to_string(i + 1));
        auto it = cmap.find(rows[i].label);
        if (it == cmap.end())
            throw DataError(path + ": label '" + rows[i].label + "' not in class map");
        ds.instances.push_back(TimeSeries{rows[i].values});
        ds.labels.push_back(it->second);
    }
    return ds;
}

// Sorted numerically when every token parses as a number, else lexically.
std::map<std::string, int> build_class_map(const std::set<std::string>& tokens) {
    std::vector<std::string> sorted(tokens.begin(), tokens.end());
    bool numeric = true;
    std::vector<std::pair<double, std::string>> keyed;
    for (const auto& t : sorted) {
        try {
            size_t used = 0;
            double v = std::stod(t, &used);
            if (used != t.size()) throw std::invalid_argument(t);
            keyed.emplace_back(v, t);
        } catch (const std::exception&) {
            numeric = false;
            break;
        }
    }
    if (numeric) {
        std::sort(keyed.begin(), keyed.end());
        sorted.clear();
        for (auto& [v, t] : keyed) sorted.push_back(t);
    }
    std::map<std::string, int> cmap;
    for (size_t i = 0; i < sorted.size(); ++i) cmap[sorted[i]] = static_cast<int>(i);
    return cmap;
}

}  // namespace

std::string LabeledDataset::token_for(int cls) const {
    for (const auto& [tok, idx] : class_map)
        if (idx == cls) return tok;
    throw DataError("class index " + std::to_string(cls) + " not in class map");
}

std::pair<LabeledDataset, LabeledDataset> load_ucr(const std::string& train_path,
                                                   const std::string& test_path,
                                                   const std::string& name) {
    auto train_rows = read_rows(train_path);
    auto test_rows = read_rows(test_path);
    if (train_rows.front().values.size() != test_rows.front().values.size())
        throw DataError("train/test series lengths differ (" +
                        std::to_string(train_rows.front().values.size()) + " vs " +
                        std::to_string(test_rows.front().values.size()) + ")");
    std::set<std::string> tokens;
    for (const auto& r : train_rows) tokens.insert(r.label);
    for (const auto& r : test_rows) tokens.insert(r.label);
    auto cmap = build_class_map(tokens);
    return {assemble(train_rows, cmap, Split::Train, name, train_path),
            assemble(test_rows, cmap, Split::Test, name, test_path)};
}

LabeledDataset load_ucr_split(const std::string& path, const std::map<std::string, int>& class_map,
                              Split split, const std::string& name) {
    auto rows = read_rows(path);
    return assemble(rows, class_map, split, name, path);
}

std::vector<double> z_normalize(const std::vector<double>& values) {
    const double n = static_cast<double>(values.size());
    double mean = 0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    double sd = std::sqrt(var / n);
    std::vector<double> out(values.size());
    if (sd < 1e-8) return out;  // constant series -> zeros
    for (size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
    return out;
}

LabeledDataset z_normalize(const LabeledDataset& ds) {
    LabeledDataset out = ds;
    for (auto& inst : out.instances) inst.values = z_normalize(inst.values);
    return out;
}

void atomic_write(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << content;
        if (!out) throw DataError("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

void export_dataset(const LabeledDataset& ds, const std::string& path) {
    std::ostringstream out;
    char buf[64];
    for (int i = 0; i < ds.size(); ++i) {
        out << ds.token_for(ds.labels[i]);
        for (double v : ds.instances[i].values) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
    atomic_write(path, out.str());
}

}  // namespace tsadv
