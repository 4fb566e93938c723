#pragma once

#include "mcglm/model.hpp"
#include "mcglm/solver.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mcglm {

/// An input error located by a JSON pointer or a line number.
class SpecError : public InvalidInput {
public:
    SpecError(const std::string& where, const std::string& what)
        : InvalidInput(where + ": " + what), where_(where) {}
    [[nodiscard]] const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::optional<std::size_t> find_column(const std::string& name) const;
};

/// RFC-4180: quoted fields, doubled quotes, embedded separators and line
/// breaks, CRLF or LF endings. Every record must have the header's width.
[[nodiscard]] CsvTable read_csv(std::istream& in, const std::string& source);
[[nodiscard]] CsvTable read_csv_file(const std::filesystem::path& path);

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);
void write_csv(std::ostream& out, const CsvTable& table);

/// Shortest text that reads back to the same double; "NA" for NaN.
[[nodiscard]] std::string format_double(double v);
/// Parses a finite double; throws InvalidInput naming `where` otherwise.
[[nodiscard]] double parse_double(const std::string& text, const std::string& where);

struct LoadedSpec {
    ModelSpec model;
    Dataset data;
    SolverOptions solver;
    CsvTable table;
    std::filesystem::path data_path;
    std::string missing = "NA";
    std::vector<std::string> response_columns;
};

/// Reads the JSON model spec and the CSV it points at (or `data_override`).
/// Relative paths resolve against the spec file's directory.
[[nodiscard]] LoadedSpec load_spec(const std::filesystem::path& spec_path,
                                   const std::optional<std::filesystem::path>& data_override = std::nullopt);

/// Same, from an in-memory document (relative paths resolve against `base_dir`).
[[nodiscard]] LoadedSpec load_spec_text(const std::string& text, const std::filesystem::path& base_dir,
                                        const std::optional<std::filesystem::path>& data_override = std::nullopt);

/// Reads a "parameter,value" table whose rows follow the layout order.
[[nodiscard]] ThetaPartition read_theta_file(const std::filesystem::path& path, const ParameterLayout& layout);

}  // namespace mcglm
