#include "autocal/matrix_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <fmt/format.h>

#include "autocal/error.hpp"

namespace autocal {

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
    return std::filesystem::path(stem.string() + suffix);
}

std::uint64_t to_little(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
        return r;
    }
}

}  // namespace

void write_f64(const std::filesystem::path& stem, const Eigen::MatrixXd& m, const nlohmann::json& extra) {
    std::vector<std::uint64_t> words(static_cast<std::size_t>(m.size()));
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) words[k++] = to_little(std::bit_cast<std::uint64_t>(m(r, c)));

    const auto blob = with_suffix(stem, ".f64");
    std::ofstream out(blob, std::ios::binary);
    if (!out) throw InputError(fmt::format("cannot write {}", blob.string()));
    out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 8));
    if (!out) throw InputError(fmt::format("short write to {}", blob.string()));

    nlohmann::json side = extra.is_object() ? extra : nlohmann::json::object();
    side["rows"] = m.rows();
    side["cols"] = m.cols();
    side["order"] = "row-major";
    side["endianness"] = "little";
    write_json(with_suffix(stem, ".json"), side);
}

Eigen::MatrixXd read_f64(const std::filesystem::path& stem, nlohmann::json* sidecar) {
    const auto side = read_json(with_suffix(stem, ".json"));
    Eigen::Index rows = 0, cols = 0;
    try {
        rows = side.at("rows").get<Eigen::Index>();
        cols = side.at("cols").get<Eigen::Index>();
        if (side.at("order").get<std::string>() != "row-major" || side.at("endianness").get<std::string>() != "little")
            throw InputError(fmt::format("{}: unsupported layout", stem.string()));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("{}.json: {}", stem.string(), e.what()));
    }
    if (rows < 0 || cols < 0) throw InputError(fmt::format("{}.json: negative shape", stem.string()));

    const auto blob = with_suffix(stem, ".f64");
    std::ifstream in(blob, std::ios::binary);
    if (!in) throw InputError(fmt::format("cannot open {}", blob.string()));
    std::vector<std::uint64_t> words(static_cast<std::size_t>(rows * cols));
    in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(words.size() * 8));
    if (in.gcount() != static_cast<std::streamsize>(words.size() * 8))
        throw InputError(fmt::format("{}: expected {} values", blob.string(), words.size()));
    if (in.peek() != std::char_traits<char>::eof())
        throw InputError(fmt::format("{}: trailing bytes after {} values", blob.string(), words.size()));

    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = std::bit_cast<double>(to_little(words[k++]));
    if (sidecar) *sidecar = side;
    return m;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(fmt::format("cannot write {}", path.string()));
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(fmt::format("cannot open {}", path.string()));
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

}  // namespace autocal
