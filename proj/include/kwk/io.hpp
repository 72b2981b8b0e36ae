#pragma once

// Deterministic artifact output: CSV writers with unit-bearing headers,
// raw little-endian float64 field snapshots with JSON sidecars, and FNV
// hashing for config/media fingerprints. Timestamps never enter data files;
// they live only in the separate metadata file.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kwk/grid.hpp"

namespace kwk {

inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::uint64_t hash_field(const Vec& v, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()), h);
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw validation_error("cannot create output directory '" + path + "': " + ec.message());
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw validation_error("cannot open '" + path + "' for writing");
        for (std::size_t i = 0; i < header.size(); ++i)
            out_ << (i ? "," : "") << header[i];
        out_ << "\n";
    }
    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i)
            out_ << (i ? "," : "") << format_double(values[i]);
        out_ << "\n";
    }
    void labeled_row(const std::string& label, const double* values, std::int64_t n) {
        out_ << label;
        for (std::int64_t i = 0; i < n; ++i) out_ << "," << format_double(values[i]);
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

// Little-endian float64, row-major (x fastest), with a JSON sidecar carrying
// dims, spacing, field name, and time.
inline void write_field_snapshot(const std::string& path_base, const Grid& g, const Vec& field,
                                 const std::string& name, double t) {
    std::ofstream raw(path_base + ".f64", std::ios::binary);
    if (!raw) throw validation_error("cannot open '" + path_base + ".f64' for writing");
    raw.write(reinterpret_cast<const char*>(field.data()),
              static_cast<std::streamsize>(sizeof(double) * field.size()));

    nlohmann::json side;
    side["field"] = name;
    side["time_s"] = t;
    side["layout"] = "row-major, x fastest, little-endian float64";
    side["dims"] = std::vector<int>(g.dims.begin(), g.dims.begin() + g.ndim);
    side["spacing_m"] = std::vector<double>(g.spacing.begin(), g.spacing.begin() + g.ndim);
    std::ofstream js(path_base + ".json");
    js << side.dump(2) << "\n";
}

}  // namespace kwk
