#include "ynetr/vvol_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace ynetr {
namespace {

constexpr const char* kMagic = "vvol 1";

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& tok) {
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw FormatError("bad number in vvol header: '" + tok + "'");
    return v;
}

int parse_int(const std::string& tok) {
    int v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw FormatError("bad integer in vvol header: '" + tok + "'");
    return v;
}

template <typename Word>
void write_words(std::ostream& os, const std::vector<Word>& words) {
    static_assert(sizeof(Word) == 4);
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
    } else {
        for (Word w : words) {
            std::uint32_t u;
            std::memcpy(&u, &w, 4);
            u = __builtin_bswap32(u);
            os.write(reinterpret_cast<const char*>(&u), 4);
        }
    }
}

void write_file(const std::filesystem::path& path, const char* element, const Extent3& s, const Spacing& sp,
                const auto& payload) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << kMagic << '\n'
       << "element " << element << '\n'
       << "shape " << s.nx << ' ' << s.ny << ' ' << s.nz << '\n'
       << "spacing " << format_double(sp.sx) << ' ' << format_double(sp.sy) << ' ' << format_double(sp.sz) << '\n'
       << "byte_order little\n"
       << "end_header\n";
    write_words(os, payload);
    if (!os) throw IoError("write failed: " + path.string());
}

struct Header {
    std::string element;
    Extent3 shape;
    Spacing spacing;
};

std::vector<std::string> split_words(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> out;
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

Header read_header(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kMagic) throw FormatError("missing vvol magic line");
    Header h;
    bool have_element = false, have_shape = false, have_spacing = false, have_order = false;
    while (true) {
        if (!std::getline(is, line)) throw FormatError("vvol header not terminated");
        if (line == "end_header") break;
        auto w = split_words(line);
        if (w.empty()) throw FormatError("empty vvol header line");
        if (w[0] == "element" && w.size() == 2) {
            h.element = w[1];
            have_element = true;
        } else if (w[0] == "shape" && w.size() == 4) {
            h.shape = {parse_int(w[1]), parse_int(w[2]), parse_int(w[3])};
            have_shape = true;
        } else if (w[0] == "spacing" && w.size() == 4) {
            h.spacing = {parse_double(w[1]), parse_double(w[2]), parse_double(w[3])};
            have_spacing = true;
        } else if (w[0] == "byte_order" && w.size() == 2) {
            if (w[1] != "little") throw FormatError("unsupported byte order: " + w[1]);
            have_order = true;
        } else {
            throw FormatError("unrecognized vvol header line: '" + line + "'");
        }
    }
    if (!have_element || !have_shape || !have_spacing || !have_order)
        throw FormatError("incomplete vvol header");
    if (h.element != "float32" && h.element != "uint32")
        throw FormatError("unknown element kind: " + h.element);
    if (h.shape.nx < 1 || h.shape.ny < 1 || h.shape.nz < 1) throw FormatError("non-positive shape in vvol header");
    if (!(h.spacing.sx > 0) || !(h.spacing.sy > 0) || !(h.spacing.sz > 0))
        throw FormatError("non-positive spacing in vvol header");
    return h;
}

std::vector<std::uint32_t> read_payload(std::istream& is, std::size_t count) {
    std::vector<std::uint32_t> words(count);
    is.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(count * 4));
    if (static_cast<std::size_t>(is.gcount()) != count * 4)
        throw FormatError("payload length mismatch: expected " + std::to_string(count * 4) + " bytes, got " +
                          std::to_string(is.gcount()));
    if (is.peek() != std::char_traits<char>::eof()) throw FormatError("payload length mismatch: trailing bytes");
    if constexpr (std::endian::native != std::endian::little)
        for (auto& w : words) w = __builtin_bswap32(w);
    return words;
}

}  // namespace

void write_vvol(const Volume3D& v, const std::filesystem::path& path) {
    write_file(path, "float32", v.shape(), v.spacing(), v.buffer());
}

void write_vvol(const LabelVolume& v, const std::filesystem::path& path) {
    std::vector<std::uint32_t> words(v.buffer().begin(), v.buffer().end());
    write_file(path, "uint32", v.shape(), v.spacing(), words);
}

AnyVolume read_vvol(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    Header h = read_header(is);
    auto words = read_payload(is, h.shape.count());
    if (h.element == "float32") {
        std::vector<float> voxels(words.size());
        std::memcpy(voxels.data(), words.data(), words.size() * 4);
        return Volume3D(h.shape, h.spacing, std::move(voxels));
    }
    std::vector<std::uint8_t> labels(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (words[i] > 1) throw FormatError("label value outside {0, 1} in " + path.string());
        labels[i] = static_cast<std::uint8_t>(words[i]);
    }
    return LabelVolume(h.shape, h.spacing, std::move(labels));
}

Volume3D read_volume(const std::filesystem::path& path) {
    auto any = read_vvol(path);
    if (auto* v = std::get_if<Volume3D>(&any)) return std::move(*v);
    throw FormatError("expected float32 volume: " + path.string());
}

LabelVolume read_labels(const std::filesystem::path& path) {
    auto any = read_vvol(path);
    if (auto* v = std::get_if<LabelVolume>(&any)) return std::move(*v);
    throw FormatError("expected uint32 label volume: " + path.string());
}

}  // namespace ynetr
