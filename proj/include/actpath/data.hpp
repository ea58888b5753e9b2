#pragma once

// Tabular data: schema, CSV ingestion, train/test split, median imputation,
// standardization, 3-sigma outlier filtering and the three-cluster synthetic
// generator.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "actpath/common.hpp"

namespace actpath {

using Json = nlohmann::ordered_json;

enum class ColumnKind { continuous, discrete };
enum class ColumnRole { feature, response, identifier };

inline std::string to_string(ColumnKind k) { return k == ColumnKind::continuous ? "continuous" : "discrete"; }
inline std::string to_string(ColumnRole r) {
    switch (r) {
        case ColumnRole::feature: return "feature";
        case ColumnRole::response: return "response";
        case ColumnRole::identifier: return "identifier";
    }
    return "feature";
}

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::continuous;
    ColumnRole role = ColumnRole::feature;
    std::vector<std::string> levels;  // discrete only

    bool is_feature() const { return role == ColumnRole::feature; }
    bool is_continuous_feature() const { return is_feature() && kind == ColumnKind::continuous; }
    bool is_discrete_feature() const { return is_feature() && kind == ColumnKind::discrete; }

    bool operator==(const ColumnSpec&) const = default;
};

class Schema {
public:
    Schema() = default;
    explicit Schema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) { validate(); }

    const std::vector<ColumnSpec>& columns() const { return columns_; }
    std::size_t size() const { return columns_.size(); }
    const ColumnSpec& operator[](std::size_t i) const { return columns_.at(i); }

    std::optional<std::size_t> find(std::string_view name) const {
        for (std::size_t i = 0; i < columns_.size(); ++i)
            if (columns_[i].name == name) return i;
        return std::nullopt;
    }
    std::size_t index_of(std::string_view name) const {
        auto i = find(name);
        if (!i) throw ValidationError("unknown column '" + std::string(name) + "'");
        return *i;
    }

    std::size_t response_index() const { return response_; }
    std::optional<std::size_t> identifier_index() const { return identifier_; }
    // Column indices of features, in schema order.
    const std::vector<std::size_t>& feature_indices() const { return features_; }
    std::vector<std::string> feature_names() const {
        std::vector<std::string> out;
        for (auto i : features_) out.push_back(columns_[i].name);
        return out;
    }

    bool operator==(const Schema& o) const { return columns_ == o.columns_; }

    void validate() {
        features_.clear();
        identifier_.reset();
        std::size_t responses = 0;
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            const auto& c = columns_[i];
            if (c.name.empty()) throw ValidationError("schema: empty column name at position " + std::to_string(i));
            for (std::size_t j = 0; j < i; ++j)
                if (columns_[j].name == c.name) throw ValidationError("schema: duplicate column '" + c.name + "'");
            if (c.kind == ColumnKind::discrete && c.role != ColumnRole::identifier) {
                if (c.levels.empty()) throw ValidationError("schema: discrete column '" + c.name + "' has no levels");
                for (std::size_t a = 0; a < c.levels.size(); ++a)
                    for (std::size_t b = 0; b < a; ++b)
                        if (c.levels[a] == c.levels[b])
                            throw ValidationError("schema: duplicate level '" + c.levels[a] + "' in '" + c.name + "'");
            }
            switch (c.role) {
                case ColumnRole::response:
                    if (c.kind != ColumnKind::continuous)
                        throw ValidationError("schema: response '" + c.name + "' must be continuous");
                    response_ = i;
                    ++responses;
                    break;
                case ColumnRole::identifier:
                    if (identifier_) throw ValidationError("schema: more than one identifier column");
                    identifier_ = i;
                    break;
                case ColumnRole::feature: features_.push_back(i); break;
            }
        }
        if (responses != 1) throw ValidationError("schema: exactly one response column required, found " + std::to_string(responses));
    }

private:
    std::vector<ColumnSpec> columns_;
    std::vector<std::size_t> features_;
    std::size_t response_ = 0;
    std::optional<std::size_t> identifier_;
};

inline Json schema_to_json(const Schema& schema) {
    Json out = Json::object();
    for (const auto& c : schema.columns()) {
        Json col = {{"kind", to_string(c.kind)}, {"role", to_string(c.role)}};
        if (c.kind == ColumnKind::discrete) col["levels"] = c.levels;
        out[c.name] = std::move(col);
    }
    return out;
}

// Schema document: object mapping column name -> {kind, role, levels}. Key
// order is the column order.
inline Schema schema_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("schema: expected a JSON object of columns");
    std::vector<ColumnSpec> cols;
    for (auto it = j.begin(); it != j.end(); ++it) {
        ColumnSpec c;
        c.name = it.key();
        const Json& v = it.value();
        if (!v.is_object()) throw ValidationError("schema: column '" + c.name + "' must be an object");
        const std::string kind = v.value("kind", "continuous");
        if (kind == "continuous") c.kind = ColumnKind::continuous;
        else if (kind == "discrete") c.kind = ColumnKind::discrete;
        else throw ValidationError("schema: column '" + c.name + "' has unknown kind '" + kind + "'");
        const std::string role = v.value("role", "feature");
        if (role == "feature") c.role = ColumnRole::feature;
        else if (role == "response") c.role = ColumnRole::response;
        else if (role == "identifier") c.role = ColumnRole::identifier;
        else throw ValidationError("schema: column '" + c.name + "' has unknown role '" + role + "'");
        if (v.contains("levels")) {
            if (!v["levels"].is_array()) throw ValidationError("schema: levels of '" + c.name + "' must be an array");
            for (const auto& l : v["levels"]) {
                if (l.is_string()) c.levels.push_back(l.get<std::string>());
                else if (l.is_number()) c.levels.push_back(l.dump());
                else throw ValidationError("schema: level of '" + c.name + "' must be string or number");
            }
        }
        cols.push_back(std::move(c));
    }
    return Schema(std::move(cols));
}

inline bool is_missing(double v) { return std::isnan(v); }
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// Row-major cells. Continuous cells hold reals, discrete cells hold the
// category index, missing cells hold NaN. Identifier cells are unused; the
// row's identifier text lives in ids.
struct Dataset {
    Schema schema;
    std::vector<double> cells;
    std::vector<std::string> ids;
    std::string provenance;

    std::size_t rows() const { return ids.size(); }
    std::size_t cols() const { return schema.size(); }
    double at(std::size_t r, std::size_t c) const { return cells[r * cols() + c]; }
    double& at(std::size_t r, std::size_t c) { return cells[r * cols() + c]; }
    std::span<const double> row(std::size_t r) const { return {cells.data() + r * cols(), cols()}; }
    double response(std::size_t r) const { return at(r, schema.response_index()); }

    // Feature values of row r in schema feature order.
    std::vector<double> features(std::size_t r) const {
        std::vector<double> out;
        out.reserve(schema.feature_indices().size());
        for (auto c : schema.feature_indices()) out.push_back(at(r, c));
        return out;
    }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows());
        for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
        return out;
    }

    Dataset subset(std::span<const std::size_t> row_indices) const {
        Dataset out{schema, {}, {}, provenance};
        out.cells.reserve(row_indices.size() * cols());
        for (auto r : row_indices) {
            auto src = row(r);
            out.cells.insert(out.cells.end(), src.begin(), src.end());
            out.ids.push_back(ids.at(r));
        }
        return out;
    }

    std::optional<std::size_t> find_id(std::string_view id) const {
        for (std::size_t r = 0; r < rows(); ++r)
            if (ids[r] == id) return r;
        return std::nullopt;
    }

    void push_row(std::span<const double> values, std::string id) {
        if (values.size() != cols()) throw ValidationError("push_row: arity mismatch");
        cells.insert(cells.end(), values.begin(), values.end());
        ids.push_back(std::move(id));
    }
};

// ---------------------------------------------------------------------------
// CSV

struct CsvOptions {
    std::string missing_sentinel = "NA";
    char delimiter = ',';
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == delim) {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline std::string trim(std::string s) {
    auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && ws(s.back())) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && ws(s[b])) ++b;
    return s.substr(b);
}

inline std::string quote_csv(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    return out + "\"";
}

}  // namespace detail

inline Dataset parse_csv(std::istream& in, const Schema& schema, const CsvOptions& opt = {}, std::string provenance = {}) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("csv: empty input (no header row)");
    auto header = detail::split_csv_line(line, opt.delimiter);
    for (auto& h : header) h = detail::trim(h);
    for (std::size_t c = 0; c < std::max(header.size(), schema.size()); ++c) {
        const std::string got = c < header.size() ? header[c] : "<none>";
        const std::string want = c < schema.size() ? schema[c].name : "<none>";
        if (got != want)
            throw ValidationError("csv: header mismatch at column " + std::to_string(c + 1) + ": expected '" + want +
                                  "', found '" + got + "'");
    }
    Dataset ds{schema, {}, {}, std::move(provenance)};
    const auto id_col = schema.identifier_index();
    std::size_t line_no = 1;
    std::vector<double> values(schema.size());
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line, opt.delimiter);
        if (fields.size() != schema.size())
            throw ValidationError("csv: line " + std::to_string(line_no) + ": expected " + std::to_string(schema.size()) +
                                  " fields, found " + std::to_string(fields.size()));
        std::string id = std::to_string(ds.rows());
        for (std::size_t c = 0; c < schema.size(); ++c) {
            const std::string cell = detail::trim(fields[c]);
            const auto& spec = schema[c];
            auto where = [&] { return "csv: line " + std::to_string(line_no) + ", column '" + spec.name + "': "; };
            if (id_col && c == *id_col) {
                if (cell.empty()) throw ValidationError(where() + "empty identifier");
                id = cell;
                values[c] = kMissing;
                continue;
            }
            if (cell.empty() || cell == opt.missing_sentinel) {
                values[c] = kMissing;
                continue;
            }
            if (spec.kind == ColumnKind::continuous) {
                double v = 0.0;
                if (!parse_double(cell, v) || !std::isfinite(v)) throw ValidationError(where() + "unparseable number '" + cell + "'");
                values[c] = v;
            } else {
                auto it = std::find(spec.levels.begin(), spec.levels.end(), cell);
                if (it == spec.levels.end()) {
                    // Accept numeric spellings of numeric labels ("1.0" for level "1").
                    double v = 0.0;
                    if (parse_double(cell, v)) {
                        it = std::find_if(spec.levels.begin(), spec.levels.end(), [&](const std::string& l) {
                            double lv = 0.0;
                            return parse_double(l, lv) && lv == v;
                        });
                    }
                }
                if (it == spec.levels.end()) throw ValidationError(where() + "unknown category level '" + cell + "'");
                values[c] = static_cast<double>(it - spec.levels.begin());
            }
        }
        if (id_col && ds.find_id(id)) throw ValidationError("csv: line " + std::to_string(line_no) + ": duplicate identifier '" + id + "'");
        ds.push_row(values, std::move(id));
    }
    if (ds.rows() == 0) throw ValidationError("csv: no data rows");
    return ds;
}

inline Dataset load_csv(const std::filesystem::path& path, const Schema& schema, const CsvOptions& opt = {}) {
    std::ifstream in(path);
    if (!in) throw ValidationError("csv: cannot open '" + path.string() + "'");
    return parse_csv(in, schema, opt, path.filename().string());
}

inline std::string format_cell(const ColumnSpec& spec, double v, const CsvOptions& opt = {}) {
    if (is_missing(v)) return opt.missing_sentinel;
    if (spec.kind == ColumnKind::discrete) return detail::quote_csv(spec.levels.at(static_cast<std::size_t>(v)));
    return format_double(v);
}

inline void write_csv(std::ostream& out, const Dataset& ds, const CsvOptions& opt = {}) {
    const auto& cols = ds.schema.columns();
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << detail::quote_csv(cols[c].name);
    out << "\n";
    const auto id_col = ds.schema.identifier_index();
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (c) out << ",";
            if (id_col && c == *id_col) out << detail::quote_csv(ds.ids[r]);
            else out << format_cell(cols[c], ds.at(r, c), opt);
        }
        out << "\n";
    }
}

inline void write_csv(const std::filesystem::path& path, const Dataset& ds, const CsvOptions& opt = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
    write_csv(out, ds, opt);
}

// Prepends an identifier column carrying the row ids (no-op if one exists).
inline Dataset with_identifier(const Dataset& ds, const std::string& name = "row_id") {
    if (ds.schema.identifier_index()) return ds;
    std::vector<ColumnSpec> cols{{name, ColumnKind::continuous, ColumnRole::identifier, {}}};
    cols.insert(cols.end(), ds.schema.columns().begin(), ds.schema.columns().end());
    Dataset out{Schema(std::move(cols)), {}, {}, ds.provenance};
    std::vector<double> row(out.cols());
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        row[0] = kMissing;
        auto src = ds.row(r);
        std::copy(src.begin(), src.end(), row.begin() + 1);
        out.push_row(row, ds.ids[r]);
    }
    return out;
}

// Keeps the rows whose index satisfies keep(row).
template <class Pred>
Dataset filter_rows(const Dataset& ds, Pred keep) {
    std::vector<std::size_t> idx;
    for (std::size_t r = 0; r < ds.rows(); ++r)
        if (keep(r)) idx.push_back(r);
    return ds.subset(idx);
}

// ---------------------------------------------------------------------------
// split

struct TrainTest {
    Dataset train;
    Dataset test;
};

// Random partition; train size = round(n * fraction). Both parts keep the
// original relative row order.
inline TrainTest split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ValidationError("split: train_fraction must lie in (0, 1), got " + format_double(train_fraction));
    const std::size_t n = ds.rows();
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
    if (n_train == 0 || n_train >= n)
        throw ValidationError("split: " + std::to_string(n) + " rows at fraction " + format_double(train_fraction) +
                              " leaves an empty partition");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> tr(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> te(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());
    return {ds.subset(tr), ds.subset(te)};
}

// ---------------------------------------------------------------------------
// standardization (population std, divide by n)

struct Standardizer {
    static constexpr const char* convention = "population";
    std::vector<std::string> names;  // continuous feature columns covered
    std::vector<double> mean;
    std::vector<double> std;

    std::optional<std::size_t> position(std::string_view name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        return std::nullopt;
    }

    double apply_value(std::size_t pos, double v) const { return is_missing(v) ? v : (v - mean[pos]) / std[pos]; }
    double invert_value(std::size_t pos, double z) const { return is_missing(z) ? z : z * std[pos] + mean[pos]; }

    Dataset apply(const Dataset& ds) const { return transform(ds, false); }
    Dataset invert(const Dataset& ds) const { return transform(ds, true); }

    Json to_json() const { return {{"convention", convention}, {"names", names}, {"mean", mean}, {"std", std}}; }
    static Standardizer from_json(const Json& j) {
        if (j.value("convention", std::string{}) != convention)
            throw ValidationError("standardizer: unsupported std convention");
        Standardizer s{j.at("names").get<std::vector<std::string>>(), j.at("mean").get<std::vector<double>>(),
                       j.at("std").get<std::vector<double>>()};
        if (s.mean.size() != s.names.size() || s.std.size() != s.names.size())
            throw ValidationError("standardizer: inconsistent lengths");
        return s;
    }

private:
    Dataset transform(const Dataset& ds, bool inverse) const {
        Dataset out = ds;
        for (std::size_t p = 0; p < names.size(); ++p) {
            const std::size_t c = ds.schema.index_of(names[p]);
            for (std::size_t r = 0; r < ds.rows(); ++r)
                out.at(r, c) = inverse ? invert_value(p, ds.at(r, c)) : apply_value(p, ds.at(r, c));
        }
        return out;
    }
};

struct ColumnMoments {
    std::size_t count = 0;
    double mean = 0.0;
    double std = 0.0;  // population
};

inline ColumnMoments column_moments(const Dataset& ds, std::size_t c) {
    ColumnMoments m;
    double sum = 0.0;
    for (std::size_t r = 0; r < ds.rows(); ++r)
        if (double v = ds.at(r, c); !is_missing(v)) {
            sum += v;
            ++m.count;
        }
    if (m.count == 0) return m;
    m.mean = sum / static_cast<double>(m.count);
    double ss = 0.0;
    for (std::size_t r = 0; r < ds.rows(); ++r)
        if (double v = ds.at(r, c); !is_missing(v)) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(m.count));
    return m;
}

inline Standardizer fit_standardizer(const Dataset& train) {
    Standardizer s;
    for (auto c : train.schema.feature_indices()) {
        const auto& spec = train.schema[c];
        if (spec.kind != ColumnKind::continuous) continue;
        const auto m = column_moments(train, c);
        if (m.count < 2) throw ValidationError("standardizer: column '" + spec.name + "' has fewer than 2 values");
        if (!(m.std > 0.0)) throw ValidationError("standardizer: column '" + spec.name + "' has zero variance");
        s.names.push_back(spec.name);
        s.mean.push_back(m.mean);
        s.std.push_back(m.std);
    }
    return s;
}

// ---------------------------------------------------------------------------
// imputation

// Per-feature fill values learned from a training split: median for
// continuous features, mode for discrete ones (ties -> lowest index).
struct Imputer {
    std::vector<std::string> names;
    std::vector<double> fill;

    Dataset apply(const Dataset& ds) const {
        Dataset out = ds;
        for (std::size_t p = 0; p < names.size(); ++p) {
            const std::size_t c = ds.schema.index_of(names[p]);
            for (std::size_t r = 0; r < ds.rows(); ++r)
                if (is_missing(out.at(r, c))) out.at(r, c) = fill[p];
        }
        return out;
    }

    Json to_json() const { return {{"names", names}, {"fill", fill}}; }
    static Imputer from_json(const Json& j) {
        return {j.at("names").get<std::vector<std::string>>(), j.at("fill").get<std::vector<double>>()};
    }
};

inline Imputer fit_imputer(const Dataset& train) {
    Imputer imp;
    for (auto c : train.schema.feature_indices()) {
        const auto& spec = train.schema[c];
        std::vector<double> vals;
        for (std::size_t r = 0; r < train.rows(); ++r)
            if (double v = train.at(r, c); !is_missing(v)) vals.push_back(v);
        if (vals.empty()) throw ValidationError("impute: feature '" + spec.name + "' is missing in every training row");
        double fill = 0.0;
        if (spec.kind == ColumnKind::continuous) {
            fill = median_of(std::move(vals));
        } else {
            std::vector<std::size_t> counts(spec.levels.size(), 0);
            for (double v : vals) ++counts.at(static_cast<std::size_t>(v));
            fill = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        }
        imp.names.push_back(spec.name);
        imp.fill.push_back(fill);
    }
    return imp;
}

inline Dataset impute_median(const Dataset& train, const Dataset& target) { return fit_imputer(train).apply(target); }

// ---------------------------------------------------------------------------
// outliers

// Drops rows where any continuous feature has |z| > 3, with z taken from this
// dataset's own population mean/std. Zero-variance columns never flag.
inline Dataset drop_outliers_3sigma(const Dataset& ds) {
    std::vector<std::pair<std::size_t, ColumnMoments>> stats;
    for (auto c : ds.schema.feature_indices())
        if (ds.schema[c].kind == ColumnKind::continuous) stats.emplace_back(c, column_moments(ds, c));
    return filter_rows(ds, [&](std::size_t r) {
        for (const auto& [c, m] : stats) {
            const double v = ds.at(r, c);
            if (is_missing(v) || !(m.std > 0.0)) continue;
            if (std::abs((v - m.mean) / m.std) > 3.0) return false;
        }
        return true;
    });
}

// ---------------------------------------------------------------------------
// synthetic three-cluster data

struct SyntheticSpec {
    std::array<std::array<double, 3>, 3> means{{{0.0, -5.0, -5.0}, {5.0, 0.0, -5.0}, {5.0, 5.0, 0.0}}};
    // Diagonal covariance entries (variances) per component.
    std::array<std::array<double, 3>, 3> variances{{{5.0, 1.0, 1.0}, {1.0, 5.0, 1.0}, {1.0, 1.0, 5.0}}};
    std::size_t points_per_component = 200;
    double noise_std = 2.0;

    void validate() const {
        if (!(noise_std > 0.0)) throw ValidationError("synthetic: noise_std must be > 0");
        if (points_per_component == 0) throw ValidationError("synthetic: points_per_component must be >= 1");
        for (const auto& v : variances)
            for (double x : v)
                if (!(x > 0.0)) throw ValidationError("synthetic: variances must be > 0");
    }

    Json to_json() const {
        return {{"means", means}, {"variances", variances}, {"points_per_component", points_per_component}, {"noise_std", noise_std}};
    }
    static SyntheticSpec from_json(const Json& j) {
        SyntheticSpec s;
        if (j.contains("means")) s.means = j["means"].get<decltype(s.means)>();
        if (j.contains("variances")) s.variances = j["variances"].get<decltype(s.variances)>();
        if (j.contains("points_per_component")) s.points_per_component = j["points_per_component"].get<std::size_t>();
        if (j.contains("noise_std")) s.noise_std = j["noise_std"].get<double>();
        s.validate();
        return s;
    }
};

inline Schema synthetic_schema() {
    return Schema({{"X1", ColumnKind::continuous, ColumnRole::feature, {}},
                   {"X2", ColumnKind::continuous, ColumnRole::feature, {}},
                   {"X3", ColumnKind::continuous, ColumnRole::feature, {}},
                   {"Y", ColumnKind::continuous, ColumnRole::response, {}}});
}

// Components are emitted in order; response = X1 + X2 + X3 + N(0, noise_std^2).
inline Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    Dataset ds{synthetic_schema(), {}, {}, "synthetic(seed=" + std::to_string(seed) + ")"};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::array<double, 4> row{};
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t i = 0; i < spec.points_per_component; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < 3; ++j) {
                row[j] = spec.means[k][j] + std::sqrt(spec.variances[k][j]) * normal(rng);
                sum += row[j];
            }
            row[3] = sum + spec.noise_std * normal(rng);
            ds.push_row(row, std::to_string(ds.rows()));
        }
    }
    return ds;
}

}  // namespace actpath
