// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

// Layout (all integers little-endian):
//   "PQFT" | u32 version | u64 meta length | meta JSON
//   u32 tensor count | per tensor: u32 name length, name, u32 rank, u64 dims[rank], f32 data[numel]
// Tensor order: base weights, adapter tensors, then opt.m.* and opt.v.* for
// each adapter tensor.

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pqft/error.hpp"
#include "pqft/json_io.hpp"
#include "pqft/sha256.hpp"
#include "pqft/trainer.hpp"

namespace pqft {

namespace {

constexpr char kMagic[4] = {'P', 'Q', 'F', 'T'};

class Writer {
  public:
    void bytes(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void str32(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void tensor(const std::string& name, const Shape& shape, std::span<const float> data) {
        str32(name);
        u32(static_cast<std::uint32_t>(shape.size()));
        for (std::size_t d : shape) u64(d);
        for (float f : data) u32(std::bit_cast<std::uint32_t>(f));
    }
    std::string take() { return std::move(out_); }

  private:
    std::string out_;
};

class Cursor {
  public:
    explicit Cursor(std::string_view data) : data_(data) {}

    std::string_view take(std::size_t n) {
        if (n > data_.size() - pos_) {
            throw Error(ErrorKind::CorruptFile, "checkpoint truncated at byte " + std::to_string(data_.size()));
        }
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::uint32_t u32() {
        auto b = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        auto b = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
        return v;
    }
    bool done() const { return pos_ == data_.size(); }

  private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

struct Slot {
    std::string name;
    Tensor target;
};

std::vector<Slot> tensor_slots(const ModelWeights& base, const AdapterState& adapter, const OptimizerState& opt) {
    std::vector<Slot> slots;
    for (const auto& [name, t] : base.named_tensors()) slots.push_back({name, t});
    const auto named = adapter.named_tensors();
    for (const auto& [name, t] : named) slots.push_back({name, t});
    for (std::size_t i = 0; i < named.size(); ++i) {
        const Shape& shape = named[i].second.shape();
        const std::vector<float> m = i < opt.m.size() ? opt.m[i] : std::vector<float>(shape_numel(shape), 0.0f);
        const std::vector<float> v = i < opt.v.size() ? opt.v[i] : std::vector<float>(shape_numel(shape), 0.0f);
        slots.push_back({"opt.m." + named[i].first, Tensor(shape, m)});
        slots.push_back({"opt.v." + named[i].first, Tensor(shape, v)});
    }
    return slots;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
    Json meta;
    meta["model"] = c.base.config;
    meta["adapter"] = c.adapter.config;
    meta["step"] = c.step;
    meta["optimizer_step"] = c.optimizer.step;
    meta["rng_state"] = c.rng_state;
    meta["metrics"] = c.metrics;
    const std::string meta_text = meta.dump();

    Writer w;
    w.bytes(kMagic, 4);
    w.u32(c.version);
    w.u64(meta_text.size());
    w.bytes(meta_text.data(), meta_text.size());
    const auto slots = tensor_slots(c.base, c.adapter, c.optimizer);
    w.u32(static_cast<std::uint32_t>(slots.size()));
    for (const auto& s : slots) w.tensor(s.name, s.target.shape(), s.target.data());
    return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes, const ModelConfig* expected) {
    Cursor in(bytes);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw Error(ErrorKind::CorruptFile, "missing PQFT magic");
    }
    in.take(4);
    const std::uint32_t version = in.u32();
    if (version != kCheckpointVersion) {
        throw Error(ErrorKind::VersionMismatch, "checkpoint version " + std::to_string(version) + ", this build reads " +
                                                    std::to_string(kCheckpointVersion));
    }
    const std::uint64_t meta_len = in.u64();
    if (meta_len > bytes.size()) throw Error(ErrorKind::CorruptFile, "metadata length exceeds file size");
    const std::string_view meta_text = in.take(static_cast<std::size_t>(meta_len));

    Checkpoint c;
    ModelConfig stored;
    AdapterConfig adapter_config;
    try {
        const Json meta = Json::parse(meta_text);
        stored = meta.at("model").get<ModelConfig>();
        adapter_config = meta.at("adapter").get<AdapterConfig>();
        c.step = meta.at("step").get<std::size_t>();
        c.optimizer.step = meta.at("optimizer_step").get<std::size_t>();
        c.rng_state = meta.at("rng_state").get<std::string>();
        c.metrics = meta.at("metrics").get<std::vector<MetricRecord>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::CorruptFile, std::string("unreadable checkpoint metadata: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorKind::CorruptFile, std::string("invalid checkpoint metadata: ") + e.what());
    }
    const ModelConfig& config = expected != nullptr ? *expected : stored;
    config.validate();

    c.version = version;
    c.base = init_weights(config, 0);
    c.adapter = AdapterState::attach(config, adapter_config, 0);
    const std::size_t n_adapter = c.adapter.named_tensors().size();
    for (const auto& [name, t] : c.adapter.named_tensors()) {
        c.optimizer.m.emplace_back(t.numel(), 0.0f);
        c.optimizer.v.emplace_back(t.numel(), 0.0f);
    }
    std::vector<Slot> slots = tensor_slots(c.base, c.adapter, OptimizerState{});

    const std::uint32_t count = in.u32();
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (i >= count) throw Error(ErrorKind::ShapeMismatch, "checkpoint lacks tensor " + slots[i].name);
        const auto name_len = in.u32();
        const std::string name(in.take(name_len));
        const auto rank = in.u32();
        if (rank > 8) throw Error(ErrorKind::CorruptFile, "tensor " + name + " has implausible rank");
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(in.u64());
        if (name != slots[i].name || shape != slots[i].target.shape()) {
            throw Error(ErrorKind::ShapeMismatch, "tensor " + name + " " + shape_string(shape) + " does not match expected " +
                                                      slots[i].name + " " + shape_string(slots[i].target.shape()));
        }
        const std::size_t n = shape_numel(shape);
        const std::string_view raw = in.take(n * 4);
        std::vector<float> values(n);
        for (std::size_t k = 0; k < n; ++k) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * k + b])) << (8 * b);
            values[k] = std::bit_cast<float>(bits);
        }
        const std::size_t opt_begin = slots.size() - 2 * n_adapter;
        if (i < opt_begin) {
            std::copy(values.begin(), values.end(), slots[i].target.data().begin());
        } else {
            const std::size_t j = (i - opt_begin) / 2;
            ((i - opt_begin) % 2 == 0 ? c.optimizer.m[j] : c.optimizer.v[j]) = std::move(values);
        }
    }
    if (count != slots.size()) throw Error(ErrorKind::ShapeMismatch, "checkpoint holds " + std::to_string(count) +
                                                                         " tensors, expected " + std::to_string(slots.size()));
    if (!in.done()) throw Error(ErrorKind::CorruptFile, "trailing bytes after the last tensor");
    if (expected != nullptr && !(stored == *expected)) {
        throw Error(ErrorKind::ShapeMismatch, "checkpoint model config differs from the expected one");
    }
    c.base.set_requires_grad(false);
    return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    const std::string bytes = serialize_checkpoint(checkpoint);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorKind::Io, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_checkpoint(buf.str(), expected);
}

std::string weights_hash(const ModelWeights& weights) {
    Sha256 sha;
    for (const auto& [name, t] : weights.named_tensors()) {
        Writer w;
        w.tensor(name, t.shape(), t.data());
        sha.update(w.take());
    }
    return sha.hex();
}

}  // namespace pqft
