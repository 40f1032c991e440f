// SPDX-License-Identifier: Apache-2.0
#include "smp/io.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace smp {

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::vector<std::string>& header) : columns_(header.size()) { row(header); }

std::string CsvWriter::escape(const std::string& field)
{
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void CsvWriter::row(const std::vector<std::string>& fields)
{
    if (fields.size() != columns_) throw std::invalid_argument("CsvWriter: row width differs from header");
    for (std::size_t n = 0; n < fields.size(); ++n) {
        if (n) text_ += ',';
        text_ += escape(fields[n]);
    }
    text_ += "\r\n";
}

std::string vtk_legacy(const Mesh& mesh, const std::vector<VtkCellField>& cells,
                       const std::vector<VtkPointVector>& points, const std::string& title)
{
    std::ostringstream out;
    out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.num_nodes() << " double\n";
    for (const auto& p : mesh.nodes) out << format_double(p.x()) << ' ' << format_double(p.y()) << " 0\n";
    out << "CELLS " << mesh.num_elements() << ' ' << 5 * mesh.num_elements() << '\n';
    for (const auto& e : mesh.elements) out << "4 " << e[0] << ' ' << e[1] << ' ' << e[2] << ' ' << e[3] << '\n';
    out << "CELL_TYPES " << mesh.num_elements() << '\n';
    for (int e = 0; e < mesh.num_elements(); ++e) out << "9\n";
    if (!cells.empty()) {
        out << "CELL_DATA " << mesh.num_elements() << '\n';
        for (const auto& f : cells) {
            if (static_cast<int>(f.values.size()) != mesh.num_elements()) {
                throw std::invalid_argument("vtk_legacy: cell field " + f.name + " has the wrong length");
            }
            out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : f.values) out << format_double(v) << '\n';
        }
    }
    if (!points.empty()) {
        out << "POINT_DATA " << mesh.num_nodes() << '\n';
        for (const auto& f : points) {
            if (f.values.size() != mesh.num_dofs) {
                throw std::invalid_argument("vtk_legacy: point field " + f.name + " has the wrong length");
            }
            out << "VECTORS " << f.name << " double\n";
            for (int n = 0; n < mesh.num_nodes(); ++n) {
                out << format_double(f.values[2 * n]) << ' ' << format_double(f.values[2 * n + 1]) << " 0\n";
            }
        }
    }
    return out.str();
}

void write_text(const std::string& path, const std::string& text)
{
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}

std::string checksum(const std::string& bytes)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace smp
