#pragma once

// File formats: curvature documents, reduced-energy fields (JSON or CSV),
// JSON emission with 17 significant digits, and SHA-256 digests.

#include "yamabe/curvature.hpp"
#include "yamabe/errors.hpp"
#include "yamabe/reduction.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace yamabe::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline std::string format_double(double v) {
    if (std::isnan(v)) return "\"nan\"";
    if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// CSV cells: non-finite values are written bare.
inline std::string csv_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {
inline void dump(std::ostringstream& os, const json& j, int indent, int depth) {
    const std::string pad(std::size_t(indent * (depth + 1)), ' '), close(std::size_t(indent * depth), ' ');
    switch (j.type()) {
    case json::value_t::object: {
        if (j.empty()) {
            os << "{}";
            return;
        }
        os << "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) os << ",\n";
            first = false;
            os << pad << json(it.key()).dump() << ": ";
            dump(os, it.value(), indent, depth + 1);
        }
        os << "\n" << close << "}";
        return;
    }
    case json::value_t::array: {
        if (j.empty()) {
            os << "[]";
            return;
        }
        os << "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) os << ",\n";
            os << pad;
            dump(os, j[i], indent, depth + 1);
        }
        os << "\n" << close << "]";
        return;
    }
    case json::value_t::number_float: os << format_double(j.get<double>()); return;
    default: os << j.dump();
    }
}
} // namespace detail

// Keys are emitted in sorted order, so equal documents give equal bytes.
inline std::string dump(const json& j, int indent = 2) {
    std::ostringstream os;
    detail::dump(os, j, indent, 0);
    if (indent > 0) os << "\n";
    return os.str();
}

// Doubles that may be non-finite go into documents through this helper, since
// nlohmann would emit null for them.
inline json number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

inline std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read file '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json read_json(const fs::path& p) {
    try {
        return json::parse(read_text(p));
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed JSON in '" + p.string() + "': " + e.what());
    }
}

inline void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw fs::filesystem_error("cannot open output file", p, std::make_error_code(std::errc::io_error));
    out << text;
    if (!out) throw fs::filesystem_error("write failed", p, std::make_error_code(std::errc::io_error));
}

// {"N": n, "kind": "riemann", "riemann": [n^4 components, row-major in ijkl]}
// or a fixture: {"N": n, "kind": "flat" | "sphere", "radius": r}.
inline curvature::AlgebraicCurvature curvature_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("N") || !doc.contains("kind"))
        throw ConfigError("curvature document needs \"N\" and \"kind\"");
    const int N = doc.at("N").get<int>();
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "riemann") {
        if (!doc.contains("riemann")) throw ConfigError("curvature document of kind riemann needs \"riemann\"");
        try {
            return curvature::AlgebraicCurvature(N, doc.at("riemann").get<std::vector<double>>());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("curvature document: ") + e.what());
        }
    }
    if (kind == "flat") return curvature::flat(N);
    if (kind == "sphere") return curvature::sphere(N, doc.value("radius", 1.0));
    throw ConfigError("unsupported curvature document kind '" + kind + "'");
}

inline json curvature_to_json(const curvature::AlgebraicCurvature& R) {
    return {{"N", R.N()}, {"kind", "riemann"}, {"riemann", R.components()}};
}

inline reduction::ReducedEnergyField field_from_json(const json& doc) {
    if (!doc.contains("points") || !doc.at("points").is_array()) throw ConfigError("field document needs \"points\"");
    reduction::ReducedEnergyField f;
    for (const auto& p : doc.at("points")) {
        if (!p.contains("h") || !p.contains("W2")) throw ConfigError("every field point needs \"h\" and \"W2\"");
        f.h_vals.push_back(p.at("h").get<double>());
        f.W2_vals.push_back(p.at("W2").get<double>());
        if (p.contains("coords")) f.coords.push_back(p.at("coords").get<std::vector<double>>());
    }
    if (!f.coords.empty() && f.coords.size() != f.h_vals.size())
        throw ConfigError("either every field point has \"coords\" or none does");
    try {
        f.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("field: ") + e.what());
    }
    return f;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto a = cell.find_first_not_of(" \t\r"), b = cell.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
    }
    return out;
}

// Header with columns h and W2; every other column is a coordinate, in order.
inline reduction::ReducedEnergyField field_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("field CSV is empty");
    const auto head = split_csv(line);
    int ih = -1, iw = -1;
    std::vector<int> ic;
    for (int i = 0; i < int(head.size()); ++i) {
        if (head[i] == "h")
            ih = i;
        else if (head[i] == "W2")
            iw = i;
        else
            ic.push_back(i);
    }
    if (ih < 0 || iw < 0) throw ConfigError("field CSV header needs columns h and W2");
    reduction::ReducedEnergyField f;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv(line);
        if (cells.size() != head.size()) throw ConfigError("field CSV row " + std::to_string(row) + " has the wrong width");
        try {
            f.h_vals.push_back(std::stod(cells[ih]));
            f.W2_vals.push_back(std::stod(cells[iw]));
            if (!ic.empty()) {
                std::vector<double> c;
                for (int i : ic) c.push_back(std::stod(cells[i]));
                f.coords.push_back(c);
            }
        } catch (const std::logic_error&) {
            throw ConfigError("field CSV row " + std::to_string(row) + " has a non-numeric cell");
        }
    }
    try {
        f.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("field: ") + e.what());
    }
    return f;
}

inline reduction::ReducedEnergyField read_field(const fs::path& p) {
    if (p.extension() == ".csv") return field_from_csv(read_text(p));
    return field_from_json(read_json(p));
}

} // namespace yamabe::io
