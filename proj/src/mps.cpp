#include "adlearn/lp/mps.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace adl::lp {

std::string mps_number(double v, int width) {
    char buf[64];
    for (int prec = 17; prec >= 1; --prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (static_cast<int>(std::char_traits<char>::length(buf)) <= width) return buf;
    }
    throw IoError("cannot render " + std::to_string(v) + " in " + std::to_string(width) + " characters");
}

namespace {

std::string field(const std::string& s, std::size_t width) {
    std::string out = s;
    if (out.size() < width) out.append(width - out.size(), ' ');
    return out;
}

std::string row_code(Index i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "R%07ld", static_cast<long>(i + 1));
    return buf;
}

std::string col_code(Index j) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "C%07ld", static_cast<long>(j + 1));
    return buf;
}

// columns 2-3, 5-12, 15-22, 25-36, 40-47, 50-61
void entry(std::ostream& out, const std::string& code, const std::string& n1, const std::string& n2,
           double v) {
    out << ' ' << field(code, 2) << ' ' << field(n1, 8) << "  " << field(n2, 8) << "  "
        << mps_number(v) << '\n';
}

}  // namespace

void write_mps(std::ostream& out, const LinearProgram<double>& lp, const std::string& name,
               const std::vector<std::uint8_t>& binary) {
    lp.validate();
    const Index m = lp.rows();
    const Index n = lp.cols();
    if (!binary.empty() && static_cast<Index>(binary.size()) != n)
        throw DimensionError("binary flag count does not match column count");
    auto is_bin = [&](Index j) { return !binary.empty() && binary[static_cast<std::size_t>(j)] != 0; };

    out << "* rows\n";
    for (Index i = 0; i < m; ++i) out << "*   " << row_code(i) << ' ' << lp.row_label(i) << '\n';
    out << "* columns\n";
    for (Index j = 0; j < n; ++j) out << "*   " << col_code(j) << ' ' << lp.col_label(j) << '\n';
    out << "NAME          " << name << '\n';
    out << "ROWS\n";
    out << " N  OBJ\n";
    for (Index i = 0; i < m; ++i) {
        const char* s = "L";
        if (lp.senses[static_cast<std::size_t>(i)] == RowSense::Equal) s = "E";
        if (lp.senses[static_cast<std::size_t>(i)] == RowSense::GreaterEqual) s = "G";
        out << ' ' << field(s, 2) << ' ' << row_code(i) << '\n';
    }
    out << "COLUMNS\n";
    bool in_int = false;
    int marker = 0;
    for (Index j = 0; j < n; ++j) {
        if (is_bin(j) != in_int) {
            char mk[16];
            std::snprintf(mk, sizeof mk, "M%07d", ++marker);
            out << "    " << field(mk, 8) << "  'MARKER'                 "
                << (in_int ? "'INTEND'" : "'INTORG'") << '\n';
            in_int = !in_int;
        }
        const std::string c = col_code(j);
        if (lp.objective(j) != 0.0) entry(out, "", c, "OBJ", lp.objective(j));
        for (Index i = 0; i < m; ++i)
            if (lp.matrix(i, j) != 0.0) entry(out, "", c, row_code(i), lp.matrix(i, j));
        if (lp.objective(j) == 0.0 && (m == 0 || lp.matrix.col(j).isZero(0.0)))
            entry(out, "", c, "OBJ", 0.0);
    }
    if (in_int) out << "    M9999999  'MARKER'                 'INTEND'\n";
    out << "RHS\n";
    if (lp.objective_offset != 0.0) entry(out, "", "RHS", "OBJ", -lp.objective_offset);
    for (Index i = 0; i < m; ++i)
        if (lp.rhs(i) != 0.0) entry(out, "", "RHS", row_code(i), lp.rhs(i));
    out << "BOUNDS\n";
    for (Index j = 0; j < n; ++j) {
        const std::string c = col_code(j);
        const double lo = lp.lower(j);
        const double hi = lp.upper(j);
        if (is_bin(j)) {
            if (lo != 0.0 || hi != 1.0) throw MalformedLpError("binary column " + lp.col_label(j) + " must have bounds [0,1]");
            entry(out, "UP", "BND", c, 1.0);
            continue;
        }
        if (std::isinf(lo) && std::isinf(hi)) {
            out << " FR BND       " << c << '\n';
        } else if (lo == hi) {
            entry(out, "FX", "BND", c, lo);
        } else {
            if (std::isinf(lo)) out << " MI BND       " << c << '\n';
            else if (lo != 0.0) entry(out, "LO", "BND", c, lo);
            if (!std::isinf(hi)) entry(out, "UP", "BND", c, hi);
        }
    }
    out << "ENDATA\n";
}

void write_mps_file(const std::string& path, const LinearProgram<double>& lp, const std::string& name,
                    const std::vector<std::uint8_t>& binary) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    write_mps(f, lp, name, binary);
    if (!f) throw IoError("write failed: " + path);
}

MpsModel read_mps(std::istream& in) {
    enum class Section { None, Rows, Columns, Rhs, Bounds, End };
    Section sec = Section::None;
    MpsModel model;
    std::string obj_row;
    std::map<std::string, Index> row_index;
    std::map<std::string, Index> col_index;
    std::vector<RowSense> senses;
    std::vector<std::string> row_names, col_names;
    std::vector<std::map<Index, double>> col_entries;
    std::vector<double> obj, lower, upper;
    std::vector<std::uint8_t> integer;
    std::map<Index, double> rhs;
    double offset = 0.0;
    bool in_int = false;
    std::string line;
    int lineno = 0;

    auto fail = [&](const std::string& what) {
        throw SchemaError("mps line " + std::to_string(lineno) + ": " + what);
    };
    auto number = [&](const std::string& s) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) fail("bad number '" + s + "'");
            return v;
        } catch (const std::logic_error&) {
            fail("bad number '" + s + "'");
        }
        return 0.0;
    };
    auto column = [&](const std::string& c) {
        auto it = col_index.find(c);
        if (it != col_index.end()) return it->second;
        const Index j = static_cast<Index>(col_names.size());
        col_index[c] = j;
        col_names.push_back(c);
        col_entries.emplace_back();
        obj.push_back(0.0);
        lower.push_back(0.0);
        upper.push_back(in_int ? 1.0 : std::numeric_limits<double>::infinity());
        integer.push_back(in_int ? 1 : 0);
        return j;
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '*') continue;
        std::istringstream ss(line);
        std::vector<std::string> tok;
        for (std::string t; ss >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        if (line[0] != ' ' && line[0] != '\t') {
            if (tok[0] == "NAME") model.name = tok.size() > 1 ? tok[1] : "";
            else if (tok[0] == "ROWS") sec = Section::Rows;
            else if (tok[0] == "COLUMNS") sec = Section::Columns;
            else if (tok[0] == "RHS") sec = Section::Rhs;
            else if (tok[0] == "BOUNDS") sec = Section::Bounds;
            else if (tok[0] == "ENDATA") { sec = Section::End; break; }
            else fail("unsupported section " + tok[0]);
            continue;
        }
        switch (sec) {
            case Section::Rows: {
                if (tok.size() != 2) fail("ROWS entry needs 2 fields");
                if (tok[0] == "N") {
                    if (obj_row.empty()) obj_row = tok[1];
                    continue;
                }
                RowSense s;
                if (tok[0] == "L") s = RowSense::LessEqual;
                else if (tok[0] == "G") s = RowSense::GreaterEqual;
                else if (tok[0] == "E") s = RowSense::Equal;
                else fail("unknown row type " + tok[0]);
                row_index[tok[1]] = static_cast<Index>(senses.size());
                senses.push_back(s);
                row_names.push_back(tok[1]);
                break;
            }
            case Section::Columns: {
                if (tok.size() >= 3 && tok[1] == "'MARKER'") {
                    if (tok[2] == "'INTORG'") in_int = true;
                    else if (tok[2] == "'INTEND'") in_int = false;
                    else fail("unknown marker " + tok[2]);
                    continue;
                }
                if (tok.size() != 3 && tok.size() != 5) fail("COLUMNS entry needs 3 or 5 fields");
                const Index j = column(tok[0]);
                for (std::size_t k = 1; k + 1 < tok.size(); k += 2) {
                    const double v = number(tok[k + 1]);
                    if (tok[k] == obj_row) {
                        obj[static_cast<std::size_t>(j)] += v;
                    } else {
                        auto it = row_index.find(tok[k]);
                        if (it == row_index.end()) fail("unknown row " + tok[k]);
                        col_entries[static_cast<std::size_t>(j)][it->second] += v;
                    }
                }
                break;
            }
            case Section::Rhs: {
                if (tok.size() != 3 && tok.size() != 5) fail("RHS entry needs 3 or 5 fields");
                for (std::size_t k = 1; k + 1 < tok.size(); k += 2) {
                    const double v = number(tok[k + 1]);
                    if (tok[k] == obj_row) {
                        offset = -v;
                        continue;
                    }
                    auto it = row_index.find(tok[k]);
                    if (it == row_index.end()) fail("unknown row " + tok[k]);
                    rhs[it->second] = v;
                }
                break;
            }
            case Section::Bounds: {
                if (tok.size() < 3) fail("BOUNDS entry too short");
                auto it = col_index.find(tok[2]);
                if (it == col_index.end()) fail("unknown column " + tok[2]);
                const auto j = static_cast<std::size_t>(it->second);
                const std::string& type = tok[0];
                const double inf = std::numeric_limits<double>::infinity();
                if (type == "FR") { lower[j] = -inf; upper[j] = inf; continue; }
                if (type == "MI") { lower[j] = -inf; continue; }
                if (type == "PL") { upper[j] = inf; continue; }
                if (type == "BV") { lower[j] = 0; upper[j] = 1; integer[j] = 1; continue; }
                if (tok.size() != 4) fail("bound " + type + " needs a value");
                const double v = number(tok[3]);
                if (type == "UP") upper[j] = v;
                else if (type == "LO") lower[j] = v;
                else if (type == "FX") lower[j] = upper[j] = v;
                else fail("unsupported bound type " + type);
                break;
            }
            default: fail("data outside a section");
        }
    }
    if (sec != Section::End) throw SchemaError("mps: missing ENDATA");

    const auto m = static_cast<Index>(senses.size());
    const auto n = static_cast<Index>(col_names.size());
    LinearProgram<double> lp(m, n);
    lp.senses = senses;
    lp.row_names = row_names;
    lp.col_names = col_names;
    lp.objective_offset = offset;
    for (Index j = 0; j < n; ++j) {
        const auto k = static_cast<std::size_t>(j);
        lp.objective(j) = obj[k];
        lp.lower(j) = lower[k];
        lp.upper(j) = upper[k];
        for (const auto& [i, v] : col_entries[k]) lp.matrix(i, j) = v;
    }
    for (const auto& [i, v] : rhs) lp.rhs(i) = v;
    model.lp = std::move(lp);
    model.integer = std::move(integer);
    return model;
}

MpsModel read_mps_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    return read_mps(f);
}

}  // namespace adl::lp
