#include "mcglm/spec_io.hpp"

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace mcglm {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

// Typed access to a JSON object with pointer-style error locations.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

    [[nodiscard]] const std::string& path() const { return path_; }
    [[nodiscard]] const json& raw() const { return j_; }

    [[noreturn]] void fail(const std::string& what) const { throw SpecError(path_.empty() ? "/" : path_, what); }

    void require_object() const {
        if (!j_.is_object()) fail("expected an object");
    }
    void allow_keys(std::initializer_list<const char*> keys) const {
        require_object();
        for (const auto& [k, v] : j_.items()) {
            bool ok = false;
            for (const char* a : keys) ok = ok || k == a;
            if (!ok) child_path_fail(k, "unknown field");
        }
    }
    [[nodiscard]] bool has(const char* key) const { return j_.is_object() && j_.contains(key); }
    [[nodiscard]] Node at(const char* key) const {
        if (!has(key)) fail(std::string("missing required field '") + key + "'");
        return {j_.at(key), path_ + "/" + key};
    }
    [[nodiscard]] Node at(std::size_t i) const { return {j_.at(i), path_ + "/" + std::to_string(i)}; }
    [[nodiscard]] std::size_t size() const { return j_.size(); }

    [[nodiscard]] std::string str() const {
        if (!j_.is_string()) fail("expected a string");
        return j_.get<std::string>();
    }
    [[nodiscard]] double num() const {
        if (!j_.is_number()) fail("expected a number");
        return j_.get<double>();
    }
    [[nodiscard]] long long integer() const {
        if (!j_.is_number_integer()) fail("expected an integer");
        return j_.get<long long>();
    }
    [[nodiscard]] bool boolean() const {
        if (!j_.is_boolean()) fail("expected true or false");
        return j_.get<bool>();
    }
    void require_array() const {
        if (!j_.is_array()) fail("expected an array");
    }
    [[nodiscard]] std::string str_or(const char* key, std::string fallback) const {
        return has(key) ? at(key).str() : fallback;
    }

private:
    [[noreturn]] void child_path_fail(const std::string& key, const std::string& what) const {
        throw SpecError(path_ + "/" + key, what);
    }
    const json& j_;
    std::string path_;
};

template <typename Parse>
auto parse_enum(const Node& n, Parse parse) {
    try {
        return parse(n.str());
    } catch (const SpecError&) {
        throw;
    } catch (const InvalidInput& e) {
        n.fail(e.what());
    }
}

struct BuildContext {
    const CsvTable& table;
    Index n_rows;
    std::filesystem::path base_dir;

    std::vector<std::string> column(const Node& where, const std::string& name) const {
        const auto idx = table.find_column(name);
        if (!idx) where.fail("column '" + name + "' is not in the data file");
        std::vector<std::string> out;
        out.reserve(table.rows.size());
        for (const auto& row : table.rows) out.push_back(row[*idx]);
        return out;
    }
    std::vector<double> numeric_column(const Node& where, const std::string& name) const {
        const auto text = column(where, name);
        std::vector<double> out;
        out.reserve(text.size());
        for (std::size_t i = 0; i < text.size(); ++i) {
            out.push_back(parse_double(text[i], "data row " + std::to_string(i + 2) + ", column '" + name + "'"));
        }
        return out;
    }
};

StructureMatrix build_component(const Node& n, const BuildContext& ctx) {
    n.require_object();
    const std::string type = n.at("type").str();
    auto dim_or_rows = [&]() -> Index {
        if (!n.has("n")) return ctx.n_rows;
        const long long v = n.at("n").integer();
        if (v < 1) n.at("n").fail("dimension must be positive");
        return static_cast<Index>(v);
    };
    try {
        if (type == "identity") {
            n.allow_keys({"type", "n"});
            return mat_identity(dim_or_rows());
        }
        if (type == "compound_symmetry") {
            n.allow_keys({"type", "group"});
            return mat_compound_symmetry(ctx.column(n.at("group"), n.at("group").str()));
        }
        if (type == "inverse_distance") {
            n.allow_keys({"type", "position", "exponent", "group"});
            const long long e = n.has("exponent") ? n.at("exponent").integer() : 1;
            if (e != 1 && e != 2) n.at("exponent").fail("exponent must be 1 or 2");
            std::optional<std::vector<std::string>> groups;
            if (n.has("group")) groups = ctx.column(n.at("group"), n.at("group").str());
            return mat_inverse_distance(ctx.numeric_column(n.at("position"), n.at("position").str()),
                                        static_cast<int>(e), groups);
        }
        if (type == "pair_indicator") {
            n.allow_keys({"type", "level", "pair", "group"});
            const Node pair = n.at("pair");
            pair.require_array();
            if (pair.size() != 2) pair.fail("expected two level names");
            std::vector<std::string> groups = n.has("group") ? ctx.column(n.at("group"), n.at("group").str())
                                                             : std::vector<std::string>(ctx.table.rows.size(), "");
            return mat_pair_indicator(ctx.column(n.at("level"), n.at("level").str()), {pair.at(std::size_t{0}).str(), pair.at(std::size_t{1}).str()},
                                      groups);
        }
        if (type == "neighborhood") {
            n.allow_keys({"type", "n", "edges", "which"});
            const Index nodes = dim_or_rows();
            const Node edges = n.at("edges");
            edges.require_array();
            std::vector<std::pair<Index, Index>> list;
            for (std::size_t i = 0; i < edges.size(); ++i) {
                const Node e = edges.at(i);
                e.require_array();
                if (e.size() != 2) e.fail("an edge is a pair of 1-based node numbers");
                list.emplace_back(static_cast<Index>(e.at(std::size_t{0}).integer()) - 1, static_cast<Index>(e.at(std::size_t{1}).integer()) - 1);
            }
            const std::string which = n.at("which").str();
            if (which != "D" && which != "W") n.at("which").fail("expected \"D\" or \"W\"");
            Neighborhood nb = mat_neighborhood(nodes, list);
            return which == "D" ? nb.D : nb.W;
        }
        if (type == "kronecker") {
            n.allow_keys({"type", "left", "right"});
            return mat_kronecker(build_component(n.at("left"), ctx), build_component(n.at("right"), ctx));
        }
        if (type == "combine") {
            n.allow_keys({"type", "a", "b", "coef"});
            const double coef = n.has("coef") ? n.at("coef").num() : 1.0;
            return mat_combine(build_component(n.at("a"), ctx), build_component(n.at("b"), ctx), coef);
        }
        if (type == "file") {
            n.allow_keys({"type", "path", "n"});
            std::optional<Index> dim;
            if (n.has("n")) dim = dim_or_rows();
            return read_coordinate_list_file(resolve(ctx.base_dir, n.at("path").str()).string(), dim);
        }
    } catch (const SpecError&) {
        throw;
    } catch (const InvalidInput& e) {
        n.fail(e.what());
    }
    n.at("type").fail("unknown matrix builder '" + type + "'");
}

void apply_solver_overrides(const Node& n, SolverOptions& opts) {
    n.allow_keys({"algorithm", "tol_score", "tol_param", "max_iter", "alpha_step", "alpha_max", "correct_pearson",
                  "fourth_cumulant"});
    if (n.has("algorithm")) opts.algorithm = parse_enum(n.at("algorithm"), parse_algorithm);
    if (n.has("tol_score")) opts.tol_score = n.at("tol_score").num();
    if (n.has("tol_param")) opts.tol_param = n.at("tol_param").num();
    if (n.has("max_iter")) opts.max_iter = static_cast<int>(n.at("max_iter").integer());
    if (n.has("alpha_step")) opts.alpha_step = n.at("alpha_step").num();
    if (n.has("alpha_max")) opts.alpha_max = n.at("alpha_max").num();
    if (n.has("correct_pearson")) opts.correct_pearson = n.at("correct_pearson").boolean();
    if (n.has("fourth_cumulant")) {
        const std::string k = n.at("fourth_cumulant").str();
        if (k == "empirical") {
            opts.fourth_cumulant = FourthCumulant::empirical;
        } else if (k == "zero") {
            opts.fourth_cumulant = FourthCumulant::zero;
        } else {
            n.at("fourth_cumulant").fail("expected \"empirical\" or \"zero\"");
        }
    }
    try {
        opts.validate();
    } catch (const InvalidInput& e) {
        n.fail(e.what());
    }
}

}  // namespace

// ---------------------------------------------------------------------------

std::optional<std::size_t> CsvTable::find_column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::nullopt;
}

CsvTable read_csv(std::istream& in, const std::string& source) {
    CsvTable table;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_quoted = false;
    bool any = false;
    std::size_t line = 1;
    std::size_t record_line = 1;

    auto end_record = [&]() {
        record.push_back(field);
        field.clear();
        field_quoted = false;
        const bool blank = record.size() == 1 && record[0].empty();
        if (!blank) {
            if (table.header.empty()) {
                table.header = record;
            } else {
                if (record.size() != table.header.size()) {
                    throw SpecError(source + ":" + std::to_string(record_line),
                                    "record has " + std::to_string(record.size()) + " fields, header has " +
                                        std::to_string(table.header.size()));
                }
                table.rows.push_back(record);
            }
        }
        record.clear();
        any = false;
    };

    char c;
    while (in.get(c)) {
        if (!any) {
            record_line = line;
            any = true;
        }
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty() || field_quoted) {
                    throw SpecError(source + ":" + std::to_string(line), "stray quote inside an unquoted field");
                }
                in_quotes = true;
                field_quoted = true;
                break;
            case ',':
                record.push_back(field);
                field.clear();
                field_quoted = false;
                break;
            case '\r':
                if (in.peek() == '\n') in.get(c);
                ++line;
                end_record();
                break;
            case '\n':
                ++line;
                end_record();
                break;
            default:
                if (field_quoted) {
                    throw SpecError(source + ":" + std::to_string(line), "text after a closing quote");
                }
                field.push_back(c);
        }
    }
    if (in_quotes) throw SpecError(source + ":" + std::to_string(record_line), "unterminated quoted field");
    if (any) end_record();
    if (table.header.empty()) throw SpecError(source, "file is empty");
    return table;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
    return read_csv(in, path.string());
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out << ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\r\n") == std::string::npos) {
            out << f;
            continue;
        }
        out << '"';
        for (char c : f) {
            if (c == '"') out << '"';
            out << c;
        }
        out << '"';
    }
    out << '\n';
}

void write_csv(std::ostream& out, const CsvTable& table) {
    write_csv_row(out, table.header);
    for (const auto& row : table.rows) write_csv_row(out, row);
}

std::string format_double(double v) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& where) {
    std::size_t b = 0, e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    const char* first = text.data() + b;
    if (first != text.data() + e && *first == '+') ++first;
    double v = 0.0;
    const auto res = std::from_chars(first, text.data() + e, v);
    if (b == e || res.ec != std::errc() || res.ptr != text.data() + e || !std::isfinite(v)) {
        throw InvalidInput(where + ": '" + text + "' is not a finite number");
    }
    return v;
}

LoadedSpec load_spec(const std::filesystem::path& spec_path, const std::optional<std::filesystem::path>& data_override) {
    return load_spec_text(read_text(spec_path), spec_path.parent_path(), data_override);
}

LoadedSpec load_spec_text(const std::string& text, const std::filesystem::path& base_dir,
                          const std::optional<std::filesystem::path>& data_override) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
        throw SpecError("line " + std::to_string(line) + ", column " + std::to_string(col), "malformed JSON");
    }
    const Node root(doc, "");
    root.allow_keys({"schema_version", "data", "responses", "between", "solver"});
    if (root.has("schema_version") && root.at("schema_version").integer() != kSchemaVersion) {
        root.at("schema_version").fail("unsupported schema version (expected 1)");
    }

    LoadedSpec out;
    const Node data = root.at("data");
    data.allow_keys({"path", "missing"});
    out.missing = data.str_or("missing", "NA");
    if (data_override) {
        out.data_path = *data_override;
    } else {
        out.data_path = resolve(base_dir, data.at("path").str());
    }
    try {
        out.table = read_csv_file(out.data_path);
    } catch (const SpecError&) {
        throw;
    } catch (const InvalidInput& e) {
        if (data_override) throw;
        data.at("path").fail(e.what());
    }
    if (out.table.rows.empty()) throw SpecError(out.data_path.string(), "data file has no rows");
    const Index n = static_cast<Index>(out.table.rows.size());
    const BuildContext ctx{out.table, n, base_dir};

    const Node responses = root.at("responses");
    responses.require_array();
    if (responses.size() == 0) responses.fail("at least one response is required");
    for (std::size_t r = 0; r < responses.size(); ++r) {
        const Node rn = responses.at(r);
        rn.allow_keys({"name", "column", "link", "variance", "power_fixed", "covlink", "design", "predictor"});
        ResponseSpec resp;
        resp.name = rn.at("name").str();
        const std::string col = rn.str_or("column", resp.name);
        resp.link.kind = parse_enum(rn.at("link"), parse_link);
        resp.variance.kind = parse_enum(rn.at("variance"), parse_variance);
        resp.covlink.kind = parse_enum(rn.at("covlink"), parse_covlink);
        if (rn.has("power_fixed")) {
            if (!resp.variance.has_power()) rn.at("power_fixed").fail("this variance function has no power parameter");
            resp.variance.power_known = true;
            resp.power = rn.at("power_fixed").num();
        } else {
            resp.variance.power_known = !resp.variance.has_power();
        }

        // outcome column
        const auto ycol = out.table.find_column(col);
        if (!ycol) (rn.has("column") ? rn.at("column") : rn.at("name")).fail("column '" + col + "' is not in the data file");
        VectorXd y(n);
        for (Index i = 0; i < n; ++i) {
            const std::string& cell = out.table.rows[static_cast<std::size_t>(i)][*ycol];
            if (cell == out.missing || cell.empty()) {
                y(i) = std::numeric_limits<double>::quiet_NaN();
            } else {
                y(i) = parse_double(cell, "data row " + std::to_string(i + 2) + ", column '" + col + "'");
            }
        }

        // design
        const Node design = rn.at("design");
        design.require_array();
        MatrixXd X(n, static_cast<Index>(design.size()));
        for (std::size_t j = 0; j < design.size(); ++j) {
            const std::string name = design.at(j).str();
            resp.design_names.push_back(name);
            if (name == "(intercept)") {
                X.col(static_cast<Index>(j)).setOnes();
                continue;
            }
            const auto v = ctx.numeric_column(design.at(j), name);
            X.col(static_cast<Index>(j)) = Eigen::Map<const VectorXd>(v.data(), n);
        }

        // matrix linear predictor
        const Node pred = rn.at("predictor");
        pred.require_array();
        if (pred.size() == 0) pred.fail("at least one structure matrix is required");
        std::vector<StructureMatrix> comps;
        for (std::size_t d = 0; d < pred.size(); ++d) {
            StructureMatrix z = build_component(pred.at(d), ctx);
            if (z.dim() != n) {
                pred.at(d).fail("structure matrix has dimension " + std::to_string(z.dim()) + ", data has " +
                                std::to_string(n) + " rows");
            }
            comps.push_back(std::move(z));
        }
        resp.predictor = MatrixPredictor(std::move(comps));

        out.response_columns.push_back(col);
        out.model.responses.push_back(std::move(resp));
        out.data.y.push_back(std::move(y));
        out.data.X.push_back(std::move(X));
    }

    const Index R = static_cast<Index>(out.model.responses.size());
    if (root.has("between")) {
        const Node b = root.at("between");
        if (b.raw().is_string()) {
            if (b.str() != "free") b.fail("expected \"free\" or {\"fixed\": [...]}");
        } else {
            b.allow_keys({"fixed"});
            const Node f = b.at("fixed");
            f.require_array();
            if (static_cast<Index>(f.size()) != n_correlations(R)) {
                f.fail("expected " + std::to_string(n_correlations(R)) + " correlations");
            }
            VectorXd rho(static_cast<Index>(f.size()));
            for (std::size_t i = 0; i < f.size(); ++i) rho(static_cast<Index>(i)) = f.at(i).num();
            out.model.fixed_rho = rho;
        }
    }
    if (root.has("solver")) apply_solver_overrides(root.at("solver"), out.solver);
    return out;
}

ThetaPartition read_theta_file(const std::filesystem::path& path, const ParameterLayout& layout) {
    const CsvTable t = read_csv_file(path);
    const auto vcol = t.find_column("value") ? t.find_column("value") : t.find_column("estimate");
    if (!vcol) throw SpecError(path.string(), "expected a 'value' (or 'estimate') column");
    const auto ncol = t.find_column("parameter");
    const Index total = layout.K() + layout.Q();
    if (static_cast<Index>(t.rows.size()) != total) {
        throw SpecError(path.string(), "has " + std::to_string(t.rows.size()) + " parameters, model has " +
                                           std::to_string(total));
    }
    VectorXd flat(total);
    for (Index k = 0; k < total; ++k) {
        const auto& row = t.rows[static_cast<std::size_t>(k)];
        const std::string where = path.string() + ":" + std::to_string(k + 2);
        if (ncol && row[*ncol] != layout.slot(k).name) {
            throw SpecError(where, "parameter '" + row[*ncol] + "' found where '" + layout.slot(k).name + "' was expected");
        }
        flat(k) = parse_double(row[*vcol], where);
    }
    return ThetaPartition::from_flat(flat, layout.K());
}

}  // namespace mcglm
