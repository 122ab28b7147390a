// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/io/checkpoint.hpp>

#include <dynmap/io/png.hpp>

#include <cstring>
#include <map>
#include <stdexcept>

namespace dynmap::io {

namespace {

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T)); // host is little-endian
    out.insert(out.end(), b, b + sizeof(T));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <class T>
    T get(const char* what) {
        T v;
        std::memcpy(&v, take(sizeof(T), what), sizeof(T));
        return v;
    }
    const std::uint8_t* take(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) {
            throw std::runtime_error(std::string("checkpoint truncated while reading ") + what);
        }
        const auto* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> serialize_checkpoint(hyper::Model& model) {
    std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 8);
    put(out, kCheckpointVersion);
    const auto cfg = hyper::to_json(model.config()).dump();
    put(out, static_cast<std::uint32_t>(cfg.size()));
    out.insert(out.end(), cfg.begin(), cfg.end());
    const auto params = model.named_parameters();
    put(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put(out, static_cast<std::uint16_t>(p.name.size()));
        out.insert(out.end(), p.name.begin(), p.name.end());
        const auto& buf = p.tensor.buffer();
        put(out, static_cast<std::uint8_t>(buf.dtype() == diff::Dtype::f32 ? 0 : 1));
        put(out, static_cast<std::uint8_t>(p.tensor.ndim()));
        for (const auto d : p.tensor.shape()) {
            put(out, static_cast<std::int64_t>(d));
        }
        diff::dispatch(buf.dtype(), [&](auto tag) {
            using T = decltype(tag);
            const auto s = buf.span<T>();
            const auto* b = reinterpret_cast<const std::uint8_t*>(s.data());
            out.insert(out.end(), b, b + s.size_bytes());
        });
    }
    return out;
}

std::unique_ptr<hyper::Model> deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader in(bytes);
    if (std::memcmp(in.take(8, "magic"), kCheckpointMagic, 8) != 0) {
        throw std::runtime_error("not a dynmap checkpoint (bad magic)");
    }
    const auto version = in.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    const auto n = in.get<std::uint32_t>("config length");
    const auto* c = in.take(n, "config");
    hyper::ModelConfig config;
    try {
        config = hyper::model_config_from_json(nlohmann::json::parse(c, c + n));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("checkpoint config echo is invalid: ") + e.what());
    }
    auto model = std::make_unique<hyper::Model>(config);
    std::map<std::string, diff::Tensor> expected;
    for (auto& p : model->named_parameters()) {
        expected.emplace(p.name, p.tensor);
    }
    const auto count = in.get<std::uint32_t>("tensor count");
    if (count != expected.size()) {
        throw std::runtime_error("checkpoint holds " + std::to_string(count) + " tensors but the config declares " +
                                 std::to_string(expected.size()));
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = in.get<std::uint16_t>("tensor name length");
        const auto* s = in.take(len, "tensor name");
        const std::string name(reinterpret_cast<const char*>(s), len);
        const auto it = expected.find(name);
        if (it == expected.end()) {
            throw std::runtime_error("checkpoint tensor '" + name + "' is unknown or repeated");
        }
        const auto code = in.get<std::uint8_t>("dtype");
        if (code > 1) {
            throw std::runtime_error("checkpoint tensor '" + name + "' has unknown dtype code");
        }
        const auto dtype = code == 0 ? diff::Dtype::f32 : diff::Dtype::f64;
        const auto rank = in.get<std::uint8_t>("rank");
        diff::Shape shape(rank);
        for (auto& d : shape) {
            d = in.get<std::int64_t>("dims");
        }
        diff::Tensor t = it->second;
        if (shape != t.shape()) {
            throw std::runtime_error("checkpoint tensor '" + name + "' has shape " + diff::shape_str(shape) +
                                     " but the config implies " + diff::shape_str(t.shape()));
        }
        diff::Buffer buf(dtype, static_cast<std::size_t>(t.numel()));
        diff::dispatch(dtype, [&](auto tag) {
            using T = decltype(tag);
            auto dst = buf.span<T>();
            std::memcpy(dst.data(), in.take(dst.size_bytes(), name.c_str()), dst.size_bytes());
        });
        t.buffer() = std::move(buf);
        expected.erase(it);
    }
    if (!in.done()) {
        throw std::runtime_error("checkpoint has trailing bytes");
    }
    return model;
}

void save_checkpoint(hyper::Model& model, const std::filesystem::path& path) {
    write_file(path, serialize_checkpoint(model));
}

std::unique_ptr<hyper::Model> load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return deserialize_checkpoint(bytes);
}

std::int64_t hash_payload_reals(hyper::Model& model) {
    std::int64_t n = 0;
    for (const auto& p : model.named_parameters()) {
        if (p.name.rfind("hash.", 0) == 0) {
            n += p.tensor.numel();
        }
    }
    return n;
}

} // namespace dynmap::io
