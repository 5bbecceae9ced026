#include "ynetr/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "ynetr/config.hpp"
#include "ynetr/errors.hpp"

namespace ynetr {
namespace {

constexpr const char* kMagic = "ynetr-checkpoint 1";

struct Entry {
    std::string name;
    Shape shape;
    std::uint64_t offset = 0;
    std::uint64_t count = 0;
};

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void append_floats(std::string& out, std::span<const float> v) {
    for (float f : v) {
        const auto u = std::bit_cast<std::uint32_t>(f);
        for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xffu));
    }
}

void read_floats(const std::string& payload, const Entry& e, std::span<float> dst) {
    const unsigned char* p = reinterpret_cast<const unsigned char*>(payload.data()) + e.offset * 4;
    for (std::uint64_t i = 0; i < e.count; ++i, p += 4) {
        const std::uint32_t u = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
                                std::uint32_t(p[3]) << 24;
        dst[i] = std::bit_cast<float>(u);
    }
}

std::string shape_token(const Shape& s) {
    if (s.empty()) return "scalar";
    std::string t;
    for (std::size_t i = 0; i < s.size(); ++i) t += (i ? "x" : "") + std::to_string(s[i]);
    return t;
}

Shape parse_shape(const std::string& t) {
    Shape s;
    if (t == "scalar") return s;
    std::stringstream ss(t);
    std::string part;
    while (std::getline(ss, part, 'x')) {
        std::int64_t v = 0;
        auto res = std::from_chars(part.data(), part.data() + part.size(), v);
        if (res.ec != std::errc() || res.ptr != part.data() + part.size() || v < 0)
            throw FormatError("bad tensor shape '" + t + "' in checkpoint");
        s.push_back(v);
    }
    return s;
}

struct Parsed {
    ModelConfig config;
    std::int64_t step = 0;
    std::vector<Entry> entries;
    std::string payload;
};

Parsed parse(const std::filesystem::path& path, bool want_payload) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
    Parsed p;
    std::string line;
    if (!std::getline(in, line) || line != kMagic) throw FormatError("not a checkpoint: " + path.string());
    std::uint64_t payload_bytes = 0, checksum = 0;
    bool have_config = false, have_end = false;
    while (std::getline(in, line)) {
        if (line == "end_manifest") {
            have_end = true;
            break;
        }
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "config") {
            p.config = model_config_from_json(line.substr(7));
            have_config = true;
        } else if (key == "step") {
            if (!(ls >> p.step) || p.step < 0) throw FormatError("bad step line in checkpoint");
        } else if (key == "payload_bytes") {
            if (!(ls >> payload_bytes)) throw FormatError("bad payload_bytes line in checkpoint");
        } else if (key == "checksum") {
            std::string algo;
            if (!(ls >> algo >> std::hex >> checksum) || algo != "fnv1a64")
                throw FormatError("bad checksum line in checkpoint");
        } else if (key == "tensor") {
            Entry e;
            std::string shape;
            if (!(ls >> e.name >> shape >> e.offset >> e.count)) throw FormatError("bad tensor line in checkpoint");
            e.shape = parse_shape(shape);
            if (static_cast<std::uint64_t>(shape_numel(e.shape)) != e.count)
                throw FormatError("tensor '" + e.name + "' count disagrees with its shape");
            p.entries.push_back(std::move(e));
        } else {
            throw FormatError("unknown checkpoint manifest line: " + key);
        }
    }
    if (!have_config || !have_end) throw FormatError("truncated checkpoint manifest in " + path.string());
    for (const auto& e : p.entries)
        if ((e.offset + e.count) * 4 > payload_bytes) throw FormatError("tensor '" + e.name + "' exceeds payload");
    if (!want_payload) return p;
    std::ostringstream rest;
    rest << in.rdbuf();
    p.payload = rest.str();
    if (p.payload.size() != payload_bytes) throw FormatError("checkpoint payload has the wrong length");
    if (fnv1a(p.payload) != checksum) throw FormatError("checkpoint payload checksum mismatch");
    return p;
}

void restore(const Parsed& p, YNetr& model, AdamWState& state) {
    std::map<std::string, const Entry*> by_name;
    for (const auto& e : p.entries) by_name[e.name] = &e;
    auto fill = [&](const std::string& name, const Shape& shape, std::span<float> dst) {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw FormatError("checkpoint lacks tensor '" + name + "'");
        if (it->second->shape != shape) throw FormatError("checkpoint tensor '" + name + "' has the wrong shape");
        read_floats(p.payload, *it->second, dst);
    };
    NamedParams params = model.named_parameters();
    for (auto& [name, t] : params) fill(name, t.shape(), t.data());

    AdamWState st;
    st.step = p.step;
    if (by_name.count("adam.m/" + params.front().first)) {
        for (auto& [name, t] : params) {
            st.m.emplace_back(t.numel());
            st.v.emplace_back(t.numel());
            fill("adam.m/" + name, t.shape(), st.m.back());
            fill("adam.v/" + name, t.shape(), st.v.back());
        }
    }
    std::size_t expected = params.size() * (st.m.empty() ? 1 : 3);
    if (p.entries.size() != expected) throw FormatError("checkpoint holds unexpected tensors");
    state = std::move(st);
}

}  // namespace

void save_checkpoint(const YNetr& model, const AdamWState& state, const std::filesystem::path& path) {
    const NamedParams params = model.named_parameters();
    const bool with_moments = !state.m.empty();
    if (with_moments && (state.m.size() != params.size() || state.v.size() != params.size()))
        throw ShapeError("optimizer state does not match the model parameters");

    std::ostringstream manifest;
    std::string payload;
    std::uint64_t offset = 0;
    auto add = [&](const std::string& name, const Shape& shape, std::span<const float> v) {
        if (static_cast<std::int64_t>(v.size()) != shape_numel(shape))
            throw ShapeError("buffer '" + name + "' does not match its shape");
        manifest << "tensor " << name << ' ' << shape_token(shape) << ' ' << offset << ' ' << v.size() << '\n';
        append_floats(payload, v);
        offset += v.size();
    };
    for (const auto& [name, t] : params) add(name, t.shape(), t.data());
    if (with_moments) {
        for (std::size_t i = 0; i < params.size(); ++i) add("adam.m/" + params[i].first, params[i].second.shape(), state.m[i]);
        for (std::size_t i = 0; i < params.size(); ++i) add("adam.v/" + params[i].first, params[i].second.shape(), state.v[i]);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
    out << kMagic << '\n'
        << "config " << model_config_to_json(model.config()) << '\n'
        << "step " << state.step << '\n'
        << "payload_bytes " << payload.size() << '\n'
        << "checksum fnv1a64 " << std::hex << fnv1a(payload) << std::dec << '\n'
        << manifest.str() << "end_manifest\n";
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    Parsed p = parse(path, true);
    p.config.validate();
    LoadedCheckpoint out{std::make_unique<YNetr>(p.config), {}};
    restore(p, *out.model, out.state);
    return out;
}

void load_checkpoint_into(YNetr& model, AdamWState& state, const std::filesystem::path& path) {
    Parsed p = parse(path, true);
    if (!(p.config == model.config()))
        throw ConfigMismatch("checkpoint config " + model_config_to_json(p.config) + " differs from model config " +
                             model_config_to_json(model.config()));
    restore(p, model, state);
}

ModelConfig read_checkpoint_config(const std::filesystem::path& path) { return parse(path, false).config; }

}  // namespace ynetr
