#include "hsd/whitening_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace hsd {
namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::filesystem::path& path) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
        throw Error(ErrorCode::SizeMismatch, "truncated whitening model " + path.string());
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

} // namespace

void save_whitening_model(const WhiteningModel<double>& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out.write("HSWM", 4);
    put_le<std::uint32_t>(out, kWhiteningFormatVersion);
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(model.rank()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(model.bands()));
    for (Index b = 0; b < model.bands(); ++b) put_le(out, model.mean(b));
    for (Index i = 0; i < model.rank(); ++i) put_le(out, model.retained_eigenvalues(i));
    for (Index j = 0; j < model.rank(); ++j)
        for (Index b = 0; b < model.bands(); ++b) put_le(out, model.transform(b, j));
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

WhiteningModel<double> load_whitening_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "HSWM", 4) != 0)
        throw Error(ErrorCode::MalformedHeader, path.string() + ": missing HSWM magic");
    const auto version = get_le<std::uint32_t>(in, path);
    if (version != kWhiteningFormatVersion)
        throw Error(ErrorCode::MalformedHeader, path.string() + ": unsupported version " + std::to_string(version));
    const auto k = static_cast<Index>(get_le<std::uint64_t>(in, path));
    const auto bands = static_cast<Index>(get_le<std::uint64_t>(in, path));
    if (k < 1 || bands < 1 || k > bands)
        throw Error(ErrorCode::MalformedHeader, path.string() + ": invalid rank/band counts");

    WhiteningModel<double> m;
    m.mean.resize(bands);
    m.retained_eigenvalues.resize(k);
    m.transform.resize(bands, k);
    for (Index b = 0; b < bands; ++b) m.mean(b) = get_le<double>(in, path);
    for (Index i = 0; i < k; ++i) m.retained_eigenvalues(i) = get_le<double>(in, path);
    for (Index j = 0; j < k; ++j)
        for (Index b = 0; b < bands; ++b) m.transform(b, j) = get_le<double>(in, path);
    if (in.peek() != std::char_traits<char>::eof())
        throw Error(ErrorCode::SizeMismatch, path.string() + ": trailing bytes after whitening model");
    return m;
}

} // namespace hsd
