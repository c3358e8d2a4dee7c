#ifndef EMREDUCE_IO_HPP
#define EMREDUCE_IO_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "types.hpp"

namespace emreduce {

enum class Interleave { bsq, bil, bip };

struct EnviHeader {
    int samples = 0;
    int lines = 0;
    int bands = 0;
    int data_type = 4;  // 4 float32, 5 float64, 12 uint16
    Interleave interleave = Interleave::bsq;
    int byte_order = 0;  // 0 little-endian, 1 big-endian
    std::int64_t header_offset = 0;
    std::optional<double> reflectance_scale;
    std::optional<std::vector<double>> wavelengths;

    int bytes_per_value() const {
        switch (data_type) {
            case 4: return 4;
            case 5: return 8;
            case 12: return 2;
        }
        throw IoError("ENVI: unsupported data type " + std::to_string(data_type));
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline double parse_double(const std::string& tok, const std::string& context) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
        if (pos != tok.size()) throw IoError("");
        return v;
    } catch (...) {
        throw IoError(context + ": non-numeric token '" + tok + "'");
    }
}

// key = value map; brace-delimited values are collected across lines
inline std::map<std::string, std::string> parse_envi_keys(std::istream& in) {
    std::map<std::string, std::string> keys;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = lower(trim(line.substr(0, eq)));
        std::string value = trim(line.substr(eq + 1));
        if (!value.empty() && value.front() == '{') {
            while (value.find('}') == std::string::npos) {
                std::string more;
                if (!std::getline(in, more)) throw IoError("ENVI header: unterminated brace value");
                value += ' ' + trim(more);
            }
            value = trim(value.substr(1, value.find('}') - 1));
        }
        keys[key] = value;
    }
    return keys;
}

inline std::uint64_t swap_bytes(std::uint64_t v, int width) {
    std::uint64_t r = 0;
    for (int i = 0; i < width; ++i) {
        r = (r << 8) | (v & 0xff);
        v >>= 8;
    }
    return r;
}

}  // namespace detail

inline EnviHeader read_envi_header(const std::filesystem::path& header_path) {
    std::ifstream in(header_path);
    if (!in) throw IoError("cannot open header: " + header_path.string());
    std::string magic;
    std::getline(in, magic);
    if (detail::trim(magic).rfind("ENVI", 0) != 0)
        throw IoError("not an ENVI header (missing magic): " + header_path.string());
    auto keys = detail::parse_envi_keys(in);

    auto require_int = [&](const std::string& key) {
        auto it = keys.find(key);
        if (it == keys.end()) throw IoError("ENVI header: missing key '" + key + "'");
        return static_cast<int>(detail::parse_double(it->second, "ENVI key " + key));
    };

    EnviHeader h;
    h.samples = require_int("samples");
    h.lines = require_int("lines");
    h.bands = require_int("bands");
    h.data_type = require_int("data type");
    if (h.data_type != 4 && h.data_type != 5 && h.data_type != 12)
        throw IoError("ENVI: unsupported data type " + std::to_string(h.data_type));
    if (h.samples < 1 || h.lines < 1 || h.bands < 1)
        throw IoError("ENVI: non-positive dimensions");

    auto it = keys.find("interleave");
    if (it == keys.end()) throw IoError("ENVI header: missing key 'interleave'");
    const std::string il = detail::lower(it->second);
    if (il == "bsq") h.interleave = Interleave::bsq;
    else if (il == "bil") h.interleave = Interleave::bil;
    else if (il == "bip") h.interleave = Interleave::bip;
    else throw IoError("ENVI: unsupported interleave '" + il + "'");

    h.byte_order = keys.count("byte order") ? require_int("byte order") : 0;
    if (h.byte_order != 0 && h.byte_order != 1)
        throw IoError("ENVI: byte order must be 0 or 1");
    h.header_offset = keys.count("header offset") ? require_int("header offset") : 0;
    if (keys.count("reflectance scale factor"))
        h.reflectance_scale = detail::parse_double(keys.at("reflectance scale factor"),
                                                   "reflectance scale factor");
    if (keys.count("wavelength")) {
        std::vector<double> wl;
        std::stringstream ss(keys.at("wavelength"));
        std::string tok;
        while (std::getline(ss, tok, ','))
            wl.push_back(detail::parse_double(detail::trim(tok), "wavelength"));
        if (static_cast<int>(wl.size()) == h.bands) h.wavelengths = std::move(wl);
    }
    return h;
}

// Raw cube load. Pixel columns are ordered row-major over (line, sample), so
// pixel = line * samples + sample regardless of interleave.
inline SpectralImage load_envi(const std::filesystem::path& header_path,
                               const std::filesystem::path& data_path) {
    const EnviHeader h = read_envi_header(header_path);
    const std::int64_t count =
        static_cast<std::int64_t>(h.samples) * h.lines * h.bands;
    const std::int64_t need = h.header_offset + count * h.bytes_per_value();

    std::ifstream in(data_path, std::ios::binary);
    if (!in) throw IoError("cannot open data file: " + data_path.string());
    in.seekg(0, std::ios::end);
    if (static_cast<std::int64_t>(in.tellg()) < need)
        throw IoError("ENVI: data file smaller than header promises (" +
                      std::to_string(static_cast<std::int64_t>(in.tellg())) + " < " +
                      std::to_string(need) + " bytes)");
    in.seekg(h.header_offset);
    std::vector<unsigned char> raw(static_cast<std::size_t>(count) * h.bytes_per_value());
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw IoError("ENVI: short read from " + data_path.string());

    const int width = h.bytes_per_value();
    const bool swap = (h.byte_order == 1);
    auto value_at = [&](std::int64_t idx) -> double {
        std::uint64_t bits = 0;
        std::memcpy(&bits, raw.data() + idx * width, static_cast<std::size_t>(width));
        if (swap) bits = detail::swap_bytes(bits, width);
        switch (h.data_type) {
            case 4: {
                float f;
                std::uint32_t b32 = static_cast<std::uint32_t>(bits);
                std::memcpy(&f, &b32, 4);
                return static_cast<double>(f);
            }
            case 5: {
                double d;
                std::memcpy(&d, &bits, 8);
                return d;
            }
            default:
                return static_cast<double>(static_cast<std::uint16_t>(bits));
        }
    };

    const int p = h.samples * h.lines;
    SpectralImage img;
    img.data.resize(h.bands, p);
    img.width = h.samples;
    img.height = h.lines;
    for (std::int64_t i = 0; i < count; ++i) {
        int band, pixel;
        switch (h.interleave) {
            case Interleave::bsq:  // [band][line][sample]
                band = static_cast<int>(i / p);
                pixel = static_cast<int>(i % p);
                break;
            case Interleave::bil: {  // [line][band][sample]
                const int line = static_cast<int>(i / (static_cast<std::int64_t>(h.bands) * h.samples));
                const int rem = static_cast<int>(i % (static_cast<std::int64_t>(h.bands) * h.samples));
                band = rem / h.samples;
                pixel = line * h.samples + rem % h.samples;
                break;
            }
            default: {  // bip: [line][sample][band]
                pixel = static_cast<int>(i / h.bands);
                band = static_cast<int>(i % h.bands);
                break;
            }
        }
        img.data(band, pixel) = value_at(i);
    }
    if (h.reflectance_scale) img.data /= *h.reflectance_scale;
    if (h.wavelengths) img.band_centers = h.wavelengths;
    if (!img.data.allFinite()) throw IoError("ENVI: non-finite values in cube");
    img.validate();
    return img;
}

// Write a cube as ENVI float64 with the given interleave, little-endian.
inline void save_envi(const SpectralImage& image, const std::filesystem::path& header_path,
                      const std::filesystem::path& data_path,
                      Interleave interleave = Interleave::bsq) {
    image.validate();
    const int samples = image.width.value_or(image.pixels());
    const int lines = image.height.value_or(1);

    std::ofstream hdr(header_path);
    if (!hdr) throw IoError("cannot write: " + header_path.string());
    hdr << "ENVI\n"
        << "samples = " << samples << '\n'
        << "lines = " << lines << '\n'
        << "bands = " << image.bands() << '\n'
        << "header offset = 0\n"
        << "data type = 5\n"
        << "interleave = "
        << (interleave == Interleave::bsq ? "bsq" : interleave == Interleave::bil ? "bil" : "bip")
        << '\n'
        << "byte order = 0\n";
    if (image.band_centers) {
        hdr << "wavelength = {";
        for (int b = 0; b < image.bands(); ++b)
            hdr << (b ? ", " : " ") << (*image.band_centers)[b];
        hdr << " }\n";
    }
    if (!hdr) throw IoError("write failed: " + header_path.string());

    std::ofstream out(data_path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + data_path.string());
    auto put = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    const int n = image.bands();
    const int p = image.pixels();
    switch (interleave) {
        case Interleave::bsq:
            for (int b = 0; b < n; ++b)
                for (int px = 0; px < p; ++px) put(image.data(b, px));
            break;
        case Interleave::bil:
            for (int line = 0; line < lines; ++line)
                for (int b = 0; b < n; ++b)
                    for (int s = 0; s < samples; ++s) put(image.data(b, line * samples + s));
            break;
        case Interleave::bip:
            for (int px = 0; px < p; ++px)
                for (int b = 0; b < n; ++b) put(image.data(b, px));
            break;
    }
    if (!out) throw IoError("write failed: " + data_path.string());
}

inline void save_csv_image(const SpectralImage& image, const std::filesystem::path& path) {
    image.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write: " + path.string());
    char buf[40];
    for (int px = 0; px < image.pixels(); ++px) {
        for (int b = 0; b < image.bands(); ++b) {
            if (b) out << ',';
            std::snprintf(buf, sizeof buf, "%.17g", image.data(b, px));
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

// Text cube: one pixel per row, comma-separated band values.
inline SpectralImage load_csv_image(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t columns = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ','))
            row.push_back(detail::parse_double(detail::trim(tok), path.string()));
        if (columns == 0) columns = row.size();
        else if (row.size() != columns)
            throw IoError(path.string() + ": ragged row " + std::to_string(rows.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty() || columns == 0) throw IoError(path.string() + ": empty image");
    SpectralImage img;
    img.data.resize(static_cast<int>(columns), static_cast<int>(rows.size()));
    for (std::size_t px = 0; px < rows.size(); ++px)
        for (std::size_t b = 0; b < columns; ++b)
            img.data(static_cast<int>(b), static_cast<int>(px)) = rows[px][b];
    img.validate();
    return img;
}

namespace detail {

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

// Endmember CSV: header of member names, then one row per band, one column
// per endmember. Values round-trip at 17 significant digits.
inline void save_endmembers(const EndmemberSet& set, const std::filesystem::path& path) {
    set.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write: " + path.string());
    for (int j = 0; j < set.size(); ++j) {
        if (j) out << ',';
        std::string name = set.members[j].name.empty() ? "em" + std::to_string(j)
                                                       : set.members[j].name;
        std::replace(name.begin(), name.end(), ',', ';');
        out << name;
    }
    out << '\n';
    for (int b = 0; b < set.bands(); ++b) {
        for (int j = 0; j < set.size(); ++j) {
            if (j) out << ',';
            out << detail::format_g17(set.spectra(b, j));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

inline EndmemberSet load_endmembers(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string header;
    if (!std::getline(in, header) || detail::trim(header).empty())
        throw IoError(path.string() + ": empty endmember file");
    EndmemberSet set;
    {
        std::stringstream ss(header);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            Provenance prov;
            prov.kind = ProvenanceKind::file;
            prov.name = detail::trim(tok);
            set.members.push_back(std::move(prov));
        }
    }
    const std::size_t m = set.members.size();
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ','))
            row.push_back(detail::parse_double(detail::trim(tok), path.string()));
        if (row.size() != m) throw IoError(path.string() + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(path.string() + ": no spectra rows");
    set.spectra.resize(static_cast<int>(rows.size()), static_cast<int>(m));
    for (std::size_t b = 0; b < rows.size(); ++b)
        for (std::size_t j = 0; j < m; ++j)
            set.spectra(static_cast<int>(b), static_cast<int>(j)) = rows[b][j];
    set.label = path.stem().string();
    set.validate();
    return set;
}

// Abundance CSV: '#' comment lines carry mode and tolerance, then one row
// per pixel with m columns.
inline void save_abundances(const AbundanceMap& map, const std::filesystem::path& path) {
    map.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write: " + path.string());
    out << "# mode = "
        << (map.mode == UnmixMode::fully_constrained ? "fully_constrained" : "unconstrained")
        << '\n';
    out << "# solver_tolerance = " << detail::format_g17(map.solver_tolerance) << '\n';
    for (int px = 0; px < map.pixels(); ++px) {
        for (int j = 0; j < map.endmembers(); ++j) {
            if (j) out << ',';
            out << detail::format_g17(map.values(j, px));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

inline AbundanceMap load_abundances(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    AbundanceMap map;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t m = 0;
    while (std::getline(in, line)) {
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            const auto eq = t.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = detail::trim(t.substr(1, eq - 1));
            const std::string value = detail::trim(t.substr(eq + 1));
            if (key == "mode")
                map.mode = (value == "unconstrained") ? UnmixMode::unconstrained
                                                      : UnmixMode::fully_constrained;
            else if (key == "solver_tolerance")
                map.solver_tolerance = detail::parse_double(value, "solver_tolerance");
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ','))
            row.push_back(detail::parse_double(detail::trim(tok), path.string()));
        if (m == 0) m = row.size();
        else if (row.size() != m) throw IoError(path.string() + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(path.string() + ": empty abundance file");
    map.values.resize(static_cast<int>(m), static_cast<int>(rows.size()));
    for (std::size_t px = 0; px < rows.size(); ++px)
        for (std::size_t j = 0; j < m; ++j)
            map.values(static_cast<int>(j), static_cast<int>(px)) = rows[px][j];
    map.validate();
    return map;
}

}  // namespace emreduce

#endif
