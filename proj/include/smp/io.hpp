// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

#include "smp/mesh.hpp"

namespace smp {

/// Round-trip formatting ("%.17g").
std::string format_double(double v);

/// RFC-4180 CSV: CRLF line ends, fields quoted when they hold a comma,
/// quote or line break.
class CsvWriter {
public:
    explicit CsvWriter(const std::vector<std::string>& header);
    void row(const std::vector<std::string>& fields);
    const std::string& str() const { return text_; }

    static std::string escape(const std::string& field);

private:
    std::size_t columns_;
    std::string text_;
};

struct VtkCellField {
    std::string name;
    std::vector<double> values;  // per element
};

struct VtkPointVector {
    std::string name;
    Eigen::VectorXd values;  // full dof vector, two components per node
};

/// Legacy ASCII unstructured grid of Q4 cells.
std::string vtk_legacy(const Mesh& mesh, const std::vector<VtkCellField>& cells,
                       const std::vector<VtkPointVector>& points, const std::string& title);

/// Writes text to path, creating parent directories. Throws std::runtime_error.
void write_text(const std::string& path, const std::string& text);

/// FNV-1a 64-bit of a byte string, as 16 hex digits.
std::string checksum(const std::string& bytes);

} // namespace smp
