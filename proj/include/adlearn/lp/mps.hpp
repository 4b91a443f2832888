#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "adlearn/lp/linear_program.hpp"

namespace adl::lp {

/// LP with optional integrality markers, as read back from an MPS file.
struct MpsModel {
    std::string name;
    LinearProgram<double> lp;
    std::vector<std::uint8_t> integer;
};

/// Fixed-format MPS (minimization). Rows and columns get generated 8-character
/// names; the original labels are listed in comment lines. Columns flagged in
/// `binary` are wrapped in INTORG/INTEND markers with bounds [0, 1].
void write_mps(std::ostream& out, const LinearProgram<double>& lp, const std::string& name = "ADLEARN",
               const std::vector<std::uint8_t>& binary = {});
void write_mps_file(const std::string& path, const LinearProgram<double>& lp,
                    const std::string& name = "ADLEARN", const std::vector<std::uint8_t>& binary = {});

/// Whitespace-token MPS reader; accepts files produced by write_mps and most
/// free-format MPS without RANGES. Throws SchemaError with the line number.
MpsModel read_mps(std::istream& in);
MpsModel read_mps_file(const std::string& path);

/// Shortest %g rendering of v that fits in `width` characters.
std::string mps_number(double v, int width = 12);

}  // namespace adl::lp
