#include "tsadv/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsadv/errors.hpp"

namespace tsadv {

namespace {

constexpr char kMagic[8] = {'T', 'S', 'A', 'D', 'V', 'C', 'K', '\0'};
constexpr uint32_t kVersion = 1;

class Writer {
public:
    template <typename T>
    void pod(T v) {
        buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void str(const std::string& s) {
        pod(static_cast<uint32_t>(s.size()));
        buf_.append(s);
    }
    void floats(const float* p, size_t n) {
        buf_.append(reinterpret_cast<const char*>(p), n * sizeof(float));
    }
    const std::string& data() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(std::string data, std::string path) : buf_(std::move(data)), path_(std::move(path)) {}
    template <typename T>
    T pod() {
        T v;
        need(sizeof(T));
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string str() {
        uint32_t n = pod<uint32_t>();
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void floats(float* p, size_t n) {
        need(n * sizeof(float));
        std::memcpy(p, buf_.data() + pos_, n * sizeof(float));
        pos_ += n * sizeof(float);
    }

private:
    void need(size_t n) {
        if (pos_ + n > buf_.size())
            throw DataError(path_ + ": corrupt or truncated checkpoint");
    }
    std::string buf_;
    std::string path_;
    size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Model<float>& model, const std::string& path) {
    std::string out(kMagic, sizeof(kMagic));
    Writer body;
    body.pod(kVersion);
    body.pod(static_cast<uint8_t>(model.arch.kind == ArchKind::ResNet ? 0 : 1));
    body.pod(static_cast<int32_t>(model.arch.input_length));
    body.pod(static_cast<int32_t>(model.arch.num_classes));
    body.pod(static_cast<int32_t>(model.meta.epochs));
    body.pod(static_cast<uint64_t>(model.meta.seed));
    body.pod(model.meta.final_train_loss);

    body.pod(static_cast<uint32_t>(model.params.size()));
    for (size_t i = 0; i < model.params.size(); ++i) {
        body.str(model.param_names[i]);
        const auto& t = model.params[i];
        body.pod(static_cast<uint8_t>(t.rank()));
        for (int d = 0; d < t.rank(); ++d) body.pod(static_cast<int32_t>(t.dim(d)));
        body.floats(t.data(), t.size());
    }
    body.pod(static_cast<uint32_t>(model.bn_states.size()));
    for (size_t i = 0; i < model.bn_states.size(); ++i) {
        const auto& st = model.bn_states[i];
        body.str(model.bn_names[i]);
        body.pod(static_cast<uint32_t>(st.running_mean.size()));
        body.floats(st.running_mean.data(), st.running_mean.size());
        body.floats(st.running_var.data(), st.running_var.size());
        body.pod(st.momentum);
        body.pod(st.eps);
        body.pod(static_cast<uint8_t>(st.initialized ? 1 : 0));
    }
    out += body.data();

    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot write " + tmp.string());
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw DataError("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

Model<float> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    std::string data = ss.str();
    if (data.size() < sizeof(kMagic) || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0)
        throw DataError(path + ": not a checkpoint file (bad magic)");
    Reader r(data.substr(sizeof(kMagic)), path);
    uint32_t version = r.pod<uint32_t>();
    if (version != kVersion)
        throw DataError(path + ": unsupported checkpoint format version " +
                        std::to_string(version));
    uint8_t kind = r.pod<uint8_t>();
    if (kind > 1) throw DataError(path + ": unknown architecture kind");
    int32_t input_length = r.pod<int32_t>();
    int32_t num_classes = r.pod<int32_t>();
    Model<float> model = build_model<float>(kind == 0 ? ArchKind::ResNet : ArchKind::Fcn,
                                            input_length, num_classes, 0);
    model.meta.epochs = r.pod<int32_t>();
    model.meta.seed = r.pod<uint64_t>();
    model.meta.final_train_loss = r.pod<double>();

    uint32_t nparams = r.pod<uint32_t>();
    if (nparams != model.params.size())
        throw DataError(path + ": parameter count mismatch for this architecture");
    for (uint32_t i = 0; i < nparams; ++i) {
        std::string name = r.str();
        if (name != model.param_names[i])
            throw DataError(path + ": unexpected parameter '" + name + "'");
        uint8_t rank = r.pod<uint8_t>();
        auto& t = model.params[i];
        if (rank != t.rank()) throw DataError(path + ": parameter rank mismatch for " + name);
        for (int d = 0; d < rank; ++d)
            if (r.pod<int32_t>() != t.dim(d))
                throw DataError(path + ": parameter shape mismatch for " + name);
        r.floats(t.data(), t.size());
    }
    uint32_t nbn = r.pod<uint32_t>();
    if (nbn != model.bn_states.size())
        throw DataError(path + ": batch-norm state count mismatch");
    for (uint32_t i = 0; i < nbn; ++i) {
        std::string name = r.str();
        if (name != model.bn_names[i])
            throw DataError(path + ": unexpected batch-norm state '" + name + "'");
        uint32_t c = r.pod<uint32_t>();
        auto& st = model.bn_states[i];
        if (c != st.running_mean.size())
            throw DataError(path + ": batch-norm channel mismatch for " + name);
        r.floats(st.running_mean.data(), c);
        r.floats(st.running_var.data(), c);
        st.momentum = r.pod<float>();
        st.eps = r.pod<float>();
        st.initialized = r.pod<uint8_t>() != 0;
    }
    return model;
}

std::string file_digest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path + " for digest");
    uint64_t h = 14695981039346656037ull;
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof(buf));
        std::streamsize n = f.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<uint8_t>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + hex;
}

}  // namespace tsadv
