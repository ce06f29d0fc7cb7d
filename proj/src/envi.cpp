#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "hsd/cube.hpp"

namespace hsd {
namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::map<std::string, std::string> parse_pairs(std::istream& in, const std::string& origin) {
    std::map<std::string, std::string> kv;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (first) {
            first = false;
            if (lower(t) == "envi") continue;
        }
        if (t.empty() || t.front() == ';') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::MalformedHeader, origin + ": expected 'key = value', got '" + t + "'");
        std::string key = lower(trim(std::string_view(t).substr(0, eq)));
        std::string value = trim(std::string_view(t).substr(eq + 1));
        if (!value.empty() && value.front() == '{') {
            while (value.find('}') == std::string::npos) {
                if (!std::getline(in, line))
                    throw Error(ErrorCode::MalformedHeader, origin + ": unterminated '{' for key '" + key + "'");
                value += ' ' + trim(line);
            }
            value = trim(value.substr(1, value.find('}') - 1));
        }
        kv[key] = value;
    }
    return kv;
}

Index parse_count(const std::map<std::string, std::string>& kv, const std::string& key,
                  const std::string& origin, bool required = true) {
    const auto it = kv.find(key);
    if (it == kv.end()) {
        if (required) throw Error(ErrorCode::MalformedHeader, origin + ": missing required key '" + key + "'");
        return 0;
    }
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(it->second, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != it->second.size() || v < 0)
        throw Error(ErrorCode::MalformedHeader, origin + ": key '" + key + "' is not a count: '" + it->second + "'");
    return static_cast<Index>(v);
}

std::size_t element_size(DataType t) { return t == DataType::Float32 ? 4 : 8; }

ByteOrder host_order() {
    return std::endian::native == std::endian::little ? ByteOrder::Little : ByteOrder::Big;
}

// Offset of (pixel, band) in a file of the given interleave, in elements.
std::size_t file_offset(Interleave il, Index lines, Index samples, Index bands, Index line, Index sample,
                        Index band) {
    (void)lines;
    switch (il) {
    case Interleave::Bsq: return static_cast<std::size_t>((band * lines + line) * samples + sample);
    case Interleave::Bil: return static_cast<std::size_t>((line * bands + band) * samples + sample);
    case Interleave::Bip: break;
    }
    return static_cast<std::size_t>((line * samples + sample) * bands + band);
}

double decode(const unsigned char* p, DataType t, bool swap) {
    unsigned char buf[8];
    const std::size_t n = element_size(t);
    std::memcpy(buf, p, n);
    if (swap) std::reverse(buf, buf + n);
    if (t == DataType::Float32) {
        float f;
        std::memcpy(&f, buf, 4);
        return static_cast<double>(f);
    }
    double d;
    std::memcpy(&d, buf, 8);
    return d;
}

void encode(double v, unsigned char* p, DataType t, bool swap) {
    const std::size_t n = element_size(t);
    if (t == DataType::Float32) {
        const float f = static_cast<float>(v);
        std::memcpy(p, &f, 4);
    } else {
        std::memcpy(p, &v, 8);
    }
    if (swap) std::reverse(p, p + n);
}

const char* interleave_token(Interleave il) {
    switch (il) {
    case Interleave::Bsq: return "bsq";
    case Interleave::Bil: return "bil";
    case Interleave::Bip: break;
    }
    return "bip";
}

} // namespace

std::filesystem::path payload_path(const std::filesystem::path& header_path) {
    auto p = header_path;
    p.replace_extension(".img");
    return p;
}

RasterHeader read_header(const std::filesystem::path& header_path) {
    std::ifstream in(header_path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open header " + header_path.string());
    const std::string origin = header_path.string();
    const auto kv = parse_pairs(in, origin);

    RasterHeader h;
    h.samples = parse_count(kv, "samples", origin);
    h.lines = parse_count(kv, "lines", origin);
    h.bands = parse_count(kv, "bands", origin);
    h.header_offset = parse_count(kv, "header offset", origin, false);
    if (h.samples < 1 || h.lines < 1 || h.bands < 1)
        throw Error(ErrorCode::MalformedHeader, origin + ": dimensions must be positive");

    const Index dt = parse_count(kv, "data type", origin);
    if (dt == 4) h.data_type = DataType::Float32;
    else if (dt == 5) h.data_type = DataType::Float64;
    else throw Error(ErrorCode::UnsupportedDataType, origin + ": data type " + std::to_string(dt) +
                                                        " (only 4 = float32 and 5 = float64 are supported)");

    const auto il = kv.find("interleave");
    if (il == kv.end()) throw Error(ErrorCode::MalformedHeader, origin + ": missing required key 'interleave'");
    const std::string tok = lower(il->second);
    if (tok == "bsq") h.interleave = Interleave::Bsq;
    else if (tok == "bil") h.interleave = Interleave::Bil;
    else if (tok == "bip") h.interleave = Interleave::Bip;
    else throw Error(ErrorCode::MalformedHeader, origin + ": unknown interleave '" + il->second + "'");

    // absent byte order means little-endian
    const Index bo = parse_count(kv, "byte order", origin, false);
    if (bo > 1) throw Error(ErrorCode::MalformedHeader, origin + ": byte order must be 0 or 1");
    h.byte_order = static_cast<ByteOrder>(bo);

    if (const auto wl = kv.find("wavelength"); wl != kv.end()) {
        double scale = 1.0;
        if (const auto u = kv.find("wavelength units"); u != kv.end()) {
            const std::string units = lower(u->second);
            if (units == "nanometers" || units == "nm") scale = 1e-3;
        }
        std::string list = wl->second;
        std::replace(list.begin(), list.end(), ',', ' ');
        std::istringstream ss(list);
        std::string item;
        while (ss >> item) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(item, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != item.size())
                throw Error(ErrorCode::MalformedHeader, origin + ": bad wavelength entry '" + item + "'");
            h.wavelengths.push_back(v * scale);
        }
        if (static_cast<Index>(h.wavelengths.size()) != h.bands)
            throw Error(ErrorCode::MalformedHeader,
                        origin + fmt::format(": {} wavelengths for {} bands", h.wavelengths.size(), h.bands));
    }
    return h;
}

HyperCube load_cube(const std::filesystem::path& header_path) {
    const RasterHeader h = read_header(header_path);
    const auto img = payload_path(header_path);
    std::ifstream in(img, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open payload " + img.string());
    std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    const std::size_t es = element_size(h.data_type);
    const std::size_t count = static_cast<std::size_t>(h.lines * h.samples * h.bands);
    const std::size_t expected = static_cast<std::size_t>(h.header_offset) + count * es;
    if (raw.size() != expected)
        throw Error(ErrorCode::SizeMismatch,
                    fmt::format("{}: {} bytes on disk, header implies {}", img.string(), raw.size(), expected));

    const bool swap = h.byte_order != host_order();
    const unsigned char* base = raw.data() + h.header_offset;
    PixelMatrix<double> data(h.lines * h.samples, h.bands);
    for (Index l = 0; l < h.lines; ++l)
        for (Index s = 0; s < h.samples; ++s)
            for (Index b = 0; b < h.bands; ++b) {
                const double v =
                    decode(base + es * file_offset(h.interleave, h.lines, h.samples, h.bands, l, s, b),
                           h.data_type, swap);
                if (!std::isfinite(v))
                    throw Error(ErrorCode::NonFiniteData,
                                fmt::format("{}: non-finite value at band {}, pixel {} (line {}, sample {})",
                                            img.string(), b, l * h.samples + s, l, s));
                data(l * h.samples + s, b) = v;
            }
    return HyperCube(h.lines, h.samples, std::move(data), h.wavelengths);
}

void write_raster(const std::filesystem::path& header_path, Index lines, Index samples, Index bands,
                  const PixelMatrix<double>& values, const std::vector<double>& wavelengths,
                  const WriteOptions& options) {
    if (values.rows() != lines * samples || values.cols() != bands)
        throw Error(ErrorCode::SizeMismatch, "raster values do not match the declared dimensions");
    {
        std::ofstream hdr(header_path, std::ios::binary | std::ios::trunc);
        if (!hdr) throw Error(ErrorCode::IoFailure, "cannot write header " + header_path.string());
        hdr << "ENVI\n";
        hdr << "samples = " << samples << '\n';
        hdr << "lines = " << lines << '\n';
        hdr << "bands = " << bands << '\n';
        hdr << "header offset = 0\n";
        hdr << "data type = " << static_cast<int>(options.data_type) << '\n';
        hdr << "interleave = " << interleave_token(options.interleave) << '\n';
        hdr << "byte order = " << static_cast<int>(options.byte_order) << '\n';
        if (!wavelengths.empty()) {
            hdr << "wavelength units = micrometers\n";
            hdr << "wavelength = {";
            for (std::size_t i = 0; i < wavelengths.size(); ++i)
                hdr << (i ? ", " : "") << fmt::format("{:.17g}", wavelengths[i]);
            hdr << "}\n";
        }
        if (!hdr) throw Error(ErrorCode::IoFailure, "failed writing header " + header_path.string());
    }

    const std::size_t es = element_size(options.data_type);
    std::vector<unsigned char> raw(static_cast<std::size_t>(lines * samples * bands) * es);
    const bool swap = options.byte_order != host_order();
    for (Index l = 0; l < lines; ++l)
        for (Index s = 0; s < samples; ++s)
            for (Index b = 0; b < bands; ++b)
                encode(values(l * samples + s, b),
                       raw.data() + es * file_offset(options.interleave, lines, samples, bands, l, s, b),
                       options.data_type, swap);

    const auto img = payload_path(header_path);
    std::ofstream out(img, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write payload " + img.string());
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing payload " + img.string());
}

void write_cube(const HyperCube& cube, const std::filesystem::path& header_path, const WriteOptions& options) {
    write_raster(header_path, cube.lines(), cube.samples(), cube.bands(), cube.pixels(),
                 cube.wavelengths_defaulted() ? std::vector<double>{} : cube.wavelengths(), options);
}

} // namespace hsd
