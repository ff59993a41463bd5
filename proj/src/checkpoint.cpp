#include "checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace hfid {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'H', 'F', 'C', 'K'};
constexpr uint16_t kVersion = 1;
constexpr uint32_t kMaxDim = 1u << 24;

struct Entry {
    std::string name;
    uint32_t dims[4];
    std::vector<float> values;
};

void append(std::vector<char>& buf, const void* data, size_t n) {
    const char* p = static_cast<const char*>(data);
    buf.insert(buf.end(), p, p + n);
}

template <typename T>
void append_int(std::vector<char>& buf, T v) {
    append(buf, &v, sizeof(T));
}

void write_entry(std::vector<char>& buf, const std::string& name, const Tensor& t) {
    append_int<uint16_t>(buf, static_cast<uint16_t>(name.size()));
    append(buf, name.data(), name.size());
    const Dims& d = t.dims();
    append_int<uint32_t>(buf, static_cast<uint32_t>(d.n));
    append_int<uint32_t>(buf, static_cast<uint32_t>(d.c));
    append_int<uint32_t>(buf, static_cast<uint32_t>(d.h));
    append_int<uint32_t>(buf, static_cast<uint32_t>(d.w));
    append(buf, t.data(), static_cast<size_t>(t.size()) * sizeof(float));
}

class Reader {
public:
    explicit Reader(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            raise(ErrorCode::Io, "cannot open checkpoint: " + path);
        data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    void read(void* out, size_t n, const char* what) {
        if (pos_ + n > data_.size())
            raise(ErrorCode::Truncated, std::string("checkpoint truncated reading ") + what);
        std::memcpy(out, data_.data() + pos_, n);
        pos_ += n;
    }

    template <typename T>
    T read_int(const char* what) {
        T v;
        read(&v, sizeof(T), what);
        return v;
    }

    bool at_end() const { return pos_ == data_.size(); }

private:
    std::vector<char> data_;
    size_t pos_ = 0;
};

} // namespace

void save_checkpoint(const NetworkParams& params, const std::string& path) {
    std::vector<char> buf;
    append(buf, kMagic, 4);
    append_int<uint16_t>(buf, kVersion);

    std::vector<std::pair<std::string, const Tensor*>> entries;
    for (size_t i = 0; i < params.layers.size(); ++i) {
        const LayerParams& p = params.layers[i];
        std::string prefix = "layer" + std::to_string(i + 1) + ".";
        auto add = [&](const char* name, const Tensor& t) {
            if (!t.empty()) entries.emplace_back(prefix + name, &t);
        };
        add("weight", p.weight);
        add("bias", p.bias);
        add("bn_scale", p.bn_scale);
        add("bn_shift", p.bn_shift);
        add("bn_running_mean", p.bn_running_mean);
        add("bn_running_var", p.bn_running_var);
    }

    append_int<uint32_t>(buf, static_cast<uint32_t>(entries.size() + 1));

    // Seed entry carries the raw u64 in two f32 slots.
    Tensor seed(Dims{1, 1, 1, 2});
    std::memcpy(seed.data(), &params.rng_seed, sizeof(uint64_t));
    write_entry(buf, "meta.rng_seed", seed);
    for (const auto& [name, tensor] : entries)
        write_entry(buf, name, *tensor);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        raise(ErrorCode::Io, "cannot write checkpoint: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out)
        raise(ErrorCode::Io, "short write on checkpoint: " + path);
}

NetworkParams load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.read(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        raise(ErrorCode::BadMagic, "not a checkpoint file: " + path);
    uint16_t version = r.read_int<uint16_t>("version");
    if (version != kVersion)
        raise(ErrorCode::BadVersion,
              "unsupported checkpoint version " + std::to_string(version));
    uint32_t count = r.read_int<uint32_t>("entry count");

    NetworkParams params;
    bool seed_seen = false;
    size_t max_layer = 0;
    std::vector<Entry> entries;
    entries.reserve(count);
    for (uint32_t e = 0; e < count; ++e) {
        Entry entry;
        uint16_t name_len = r.read_int<uint16_t>("name length");
        entry.name.resize(name_len);
        r.read(entry.name.data(), name_len, "name");
        uint64_t total = 1;
        for (uint32_t& d : entry.dims) {
            d = r.read_int<uint32_t>("dims");
            if (d > kMaxDim)
                raise(ErrorCode::DimOverflow, "checkpoint entry " + entry.name +
                                                  " has oversized dim " + std::to_string(d));
            total *= d;
        }
        if (total > (1ull << 31))
            raise(ErrorCode::DimOverflow,
                  "checkpoint entry " + entry.name + " exceeds element limit");
        entry.values.resize(total);
        r.read(entry.values.data(), total * sizeof(float), entry.name.c_str());
        if (entry.name.starts_with("layer")) {
            size_t dot = entry.name.find('.');
            if (dot == std::string::npos || dot <= 5)
                raise(ErrorCode::InvalidArgument, "bad entry name: " + entry.name);
            size_t idx = 0;
            try {
                idx = std::stoul(entry.name.substr(5, dot - 5));
            } catch (const std::exception&) {
                raise(ErrorCode::InvalidArgument, "bad entry name: " + entry.name);
            }
            if (idx == 0)
                raise(ErrorCode::InvalidArgument, "layer indices are 1-based: " + entry.name);
            max_layer = std::max(max_layer, idx);
        }
        entries.push_back(std::move(entry));
    }
    if (!r.at_end())
        raise(ErrorCode::Truncated, "trailing bytes after last checkpoint entry");

    params.layers.resize(max_layer);
    for (const Entry& e : entries) {
        if (e.name == "meta.rng_seed") {
            if (e.values.size() != 2)
                raise(ErrorCode::InvalidArgument, "bad meta.rng_seed entry");
            std::memcpy(&params.rng_seed, e.values.data(), sizeof(uint64_t));
            seed_seen = true;
            continue;
        }
        if (!e.name.starts_with("layer"))
            raise(ErrorCode::InvalidArgument, "unknown checkpoint entry: " + e.name);
        size_t dot = e.name.find('.');
        size_t idx = std::stoul(e.name.substr(5, dot - 5));
        std::string field = e.name.substr(dot + 1);
        Tensor t(Dims{e.dims[0], e.dims[1], e.dims[2], e.dims[3]});
        std::memcpy(t.data(), e.values.data(), e.values.size() * sizeof(float));
        LayerParams& lp = params.layers[idx - 1];
        if (field == "weight") lp.weight = std::move(t);
        else if (field == "bias") lp.bias = std::move(t);
        else if (field == "bn_scale") lp.bn_scale = std::move(t);
        else if (field == "bn_shift") lp.bn_shift = std::move(t);
        else if (field == "bn_running_mean") lp.bn_running_mean = std::move(t);
        else if (field == "bn_running_var") lp.bn_running_var = std::move(t);
        else raise(ErrorCode::InvalidArgument, "unknown checkpoint field: " + e.name);
    }
    if (!seed_seen)
        raise(ErrorCode::InvalidArgument, "checkpoint missing meta.rng_seed");
    return params;
}

} // namespace hfid
