// SPDX-License-Identifier: Apache-2.0
#include "sargcp/io_formats.hpp"

#include "sargcp/error.hpp"
#include "sargcp/text.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace sargcp::io {

namespace {

[[noreturn]] void fail_line(const std::string& source, std::size_t line, const std::string& why) {
    throw ParseError(source, ParseError::Unit::Line, line, why);
}

[[noreturn]] void fail_byte(const std::string& source, std::size_t byte, const std::string& why) {
    throw ParseError(source, ParseError::Unit::Byte, byte, why);
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> lines = text::split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    for (auto& l : lines)
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    return lines;
}

}  // namespace

std::string num(double v) { return text::format_double(v); }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Metadata

namespace {

enum class Quantity { Time, Frequency, Angle, Length, Days, None };

// Scale to the canonical unit, or nullopt when the unit does not belong to
// the quantity.
std::optional<double> unit_scale(Quantity q, std::string_view unit) {
    switch (q) {
        case Quantity::Time:
            if (unit == "s") return 1.0;
            if (unit == "ms") return 1e-3;
            if (unit == "us") return 1e-6;
            break;
        case Quantity::Frequency:
            if (unit == "Hz") return 1.0;
            if (unit == "kHz") return 1e3;
            if (unit == "MHz") return 1e6;
            break;
        case Quantity::Angle:
            if (unit == "deg") return 1.0;
            if (unit == "rad") return 180.0 / 3.14159265358979323846;
            break;
        case Quantity::Length:
            if (unit == "m") return 1.0;
            if (unit == "km") return 1e3;
            break;
        case Quantity::Days:
            if (unit == "d") return 1.0;
            break;
        case Quantity::None:
            if (unit.empty()) return 1.0;
            break;
    }
    return std::nullopt;
}

std::string orbit_unit(int k) {
    if (k == 0) return "m";
    if (k == 1) return "m/s";
    return "m/s^" + std::to_string(k);
}

struct MetaLine {
    std::size_t line;
    std::vector<std::string_view> tokens;
};

}  // namespace

AcquisitionMetadata parse_metadata(std::string_view content, const std::string& source) {
    std::map<std::string, MetaLine, std::less<>> entries;
    const auto lines = lines_of(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string_view s = text::trim(lines[i]);
        if (s.empty() || s.front() == '#') continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) fail_line(source, i + 1, "expected 'key = value'");
        const std::string key(text::trim(s.substr(0, eq)));
        if (key.empty()) fail_line(source, i + 1, "empty key");
        auto tokens = text::split_ws(text::trim(s.substr(eq + 1)));
        if (tokens.empty()) fail_line(source, i + 1, "missing value for '" + key + "'");
        if (!entries.emplace(key, MetaLine{i + 1, tokens}).second)
            fail_line(source, i + 1, "duplicate key '" + key + "'");
    }
    const std::size_t end_line = lines.size() + 1;
    auto get = [&](std::string_view key) -> const MetaLine& {
        const auto it = entries.find(key);
        if (it == entries.end()) fail_line(source, end_line, "missing key '" + std::string(key) + "'");
        return it->second;
    };
    auto word = [&](std::string_view key) -> std::string {
        const MetaLine& m = get(key);
        if (m.tokens.size() != 1) fail_line(source, m.line, "expected a single word for '" + std::string(key) + "'");
        return std::string(m.tokens[0]);
    };
    auto number_at = [&](const MetaLine& m, std::string_view tok) {
        const auto v = text::parse_double(tok);
        if (!v || !std::isfinite(*v)) fail_line(source, m.line, "bad number '" + std::string(tok) + "'");
        return *v;
    };
    auto quantity = [&](std::string_view key, Quantity q) -> double {
        const MetaLine& m = get(key);
        const std::string_view unit = m.tokens.size() >= 2 ? m.tokens[1] : std::string_view{};
        if (m.tokens.size() > 2) fail_line(source, m.line, "trailing tokens after unit");
        const auto scale = unit_scale(q, unit);
        if (!scale) fail_line(source, m.line, "unknown or unsuitable unit '" + std::string(unit) + "'");
        return number_at(m, m.tokens[0]) * *scale;
    };

    const MetaLine& version = get("format_version");
    if (version.tokens.size() != 1 || version.tokens[0] != "1")
        fail_line(source, version.line, "unsupported format_version");

    const double epoch = quantity("orbit.epoch", Quantity::Time);
    const double begin = quantity("orbit.valid_begin", Quantity::Time);
    const double end = quantity("orbit.valid_end", Quantity::Time);
    const MetaLine& deg_line = get("orbit.degree");
    const double deg_value = quantity("orbit.degree", Quantity::None);
    if (deg_value != std::floor(deg_value) || deg_value < 2 || deg_value > 12)
        fail_line(source, deg_line.line, "orbit degree must be an integer in [2, 12]");
    const int degree = static_cast<int>(deg_value);
    std::vector<Eigen::Vector3d> coeffs;
    for (int k = 0; k <= degree; ++k) {
        const std::string key = "orbit.c" + std::to_string(k);
        const MetaLine& m = get(key);
        if (m.tokens.size() != 4) fail_line(source, m.line, "expected three components and a unit");
        if (m.tokens[3] != orbit_unit(k))
            fail_line(source, m.line, "unknown or unsuitable unit '" + std::string(m.tokens[3]) + "'");
        coeffs.emplace_back(number_at(m, m.tokens[0]), number_at(m, m.tokens[1]),
                            number_at(m, m.tokens[2]));
    }
    for (const auto& [key, m] : entries) {
        if (key.rfind("orbit.c", 0) == 0) {
            const auto idx = text::parse_int(std::string_view(key).substr(7));
            if (!idx || *idx < 0 || *idx > degree) fail_line(source, m.line, "unexpected key '" + key + "'");
        }
    }

    try {
        AcquisitionMetadata meta{
            word("acquisition_id"),
            word("geometry_id"),
            word("stack_id"),
            quantity("epoch_days", Quantity::Days),
            quantity("calibration", Quantity::None),
            AcquisitionGeometry{OrbitModel(epoch, std::move(coeffs), begin, end),
                                quantity("prf", Quantity::Frequency),
                                quantity("rsf", Quantity::Frequency),
                                quantity("t_az_first", Quantity::Time),
                                quantity("tau_rg_first", Quantity::Time),
                                parse_heading(word("heading")),
                                quantity("incidence", Quantity::Angle),
                                parse_look_side(word("look_side"))},
        };
        meta.geometry.validate();
        if (!(meta.calibration > 0.0)) throw DomainError("calibration must be positive");
        return meta;
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        fail_line(source, end_line, e.what());
    }
}

std::string format_metadata(const AcquisitionMetadata& m) {
    std::ostringstream o;
    const AcquisitionGeometry& g = m.geometry;
    o << "format_version = 1\n";
    o << "acquisition_id = " << m.acquisition_id << "\n";
    o << "geometry_id = " << m.geometry_id << "\n";
    o << "stack_id = " << m.stack_id << "\n";
    o << "epoch_days = " << num(m.epoch_days) << " d\n";
    o << "calibration = " << num(m.calibration) << "\n";
    o << "heading = " << to_string(g.heading) << "\n";
    o << "look_side = " << to_string(g.side) << "\n";
    o << "incidence = " << num(g.incidence_deg) << " deg\n";
    o << "prf = " << num(g.prf) << " Hz\n";
    o << "rsf = " << num(g.rsf) << " Hz\n";
    o << "t_az_first = " << num(g.t_az_first) << " s\n";
    o << "tau_rg_first = " << num(g.tau_rg_first) << " s\n";
    o << "orbit.epoch = " << num(g.orbit.epoch()) << " s\n";
    o << "orbit.valid_begin = " << num(g.orbit.valid_begin()) << " s\n";
    o << "orbit.valid_end = " << num(g.orbit.valid_end()) << " s\n";
    o << "orbit.degree = " << g.orbit.degree() << "\n";
    for (int k = 0; k <= g.orbit.degree(); ++k) {
        const auto& c = g.orbit.coefficients()[static_cast<std::size_t>(k)];
        o << "orbit.c" << k << " = " << num(c.x()) << " " << num(c.y()) << " " << num(c.z()) << " "
          << orbit_unit(k) << "\n";
    }
    return o.str();
}

AcquisitionMetadata read_metadata(const std::string& path) {
    return parse_metadata(read_file(path), path);
}

void write_metadata(const std::string& path, const AcquisitionMetadata& meta) {
    write_file(path, format_metadata(meta));
}

// ---------------------------------------------------------------------------
// Raster tiles

namespace {

constexpr char kMagic[8] = {'G', 'C', 'P', 'R', 'T', '1', '\0', '\0'};

template <class T>
void put(std::string& out, T value) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

template <class T>
T get(std::string_view bytes, std::size_t offset) {
    T v;
    std::memcpy(&v, bytes.data() + offset, sizeof(T));
    return v;
}

}  // namespace

Georef Georef::pixel_origin(const PixelCoord& origin) {
    Georef g;
    g.kind = GeorefKind::PixelOrigin;
    g.params = {origin.line, origin.sample, 0.0, 0.0, 0.0, 0.0};
    return g;
}

Georef Georef::map_grid(double easting0, double northing0, double step_e, double step_n, int zone,
                        bool north) {
    Georef g;
    g.kind = GeorefKind::MapGrid;
    g.params = {easting0, northing0, step_e, step_n, static_cast<double>(zone), north ? 1.0 : 0.0};
    return g;
}

PixelCoord Georef::origin() const { return {params[0], params[1]}; }

RasterType RasterTile::type() const {
    return std::holds_alternative<Grid<float>>(data) ? RasterType::Float32 : RasterType::Complex64;
}

std::size_t RasterTile::rows() const {
    return std::visit([](const auto& g) { return g.rows(); }, data);
}

std::size_t RasterTile::cols() const {
    return std::visit([](const auto& g) { return g.cols(); }, data);
}

std::string encode_raster(const RasterTile& tile) {
    std::string out(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(kFormatVersion));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tile.type()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tile.cols()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tile.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tile.georef.kind));
    for (double p : tile.georef.params) put<double>(out, p);
    std::visit(
        [&out](const auto& g) {
            out.append(reinterpret_cast<const char*>(g.data()),
                       g.size() * sizeof(typename std::decay_t<decltype(g.values())>::value_type));
        },
        tile.data);
    return out;
}

RasterTile decode_raster(std::string_view bytes, const std::string& source) {
    if (bytes.size() < kRasterHeaderBytes)
        fail_byte(source, bytes.size(), "truncated header (" + std::to_string(bytes.size()) + " bytes)");
    for (std::size_t i = 0; i < sizeof kMagic; ++i)
        if (bytes[i] != kMagic[i]) fail_byte(source, i, "bad magic");
    const auto version = get<std::uint32_t>(bytes, 8);
    if (version != static_cast<std::uint32_t>(kFormatVersion))
        fail_byte(source, 8, "unsupported version " + std::to_string(version));
    const auto dtype = get<std::uint32_t>(bytes, 12);
    if (dtype != 1 && dtype != 2) fail_byte(source, 12, "unknown dtype " + std::to_string(dtype));
    const std::uint64_t width = get<std::uint32_t>(bytes, 16);
    const std::uint64_t height = get<std::uint32_t>(bytes, 20);
    const auto kind = get<std::uint32_t>(bytes, 24);
    if (kind > 2) fail_byte(source, 24, "unknown georef kind " + std::to_string(kind));
    RasterTile tile;
    tile.georef.kind = static_cast<GeorefKind>(kind);
    for (std::size_t i = 0; i < 6; ++i) {
        tile.georef.params[i] = get<double>(bytes, 28 + 8 * i);
        if (!std::isfinite(tile.georef.params[i])) fail_byte(source, 28 + 8 * i, "non-finite georef");
    }
    const std::uint64_t elem = dtype == 1 ? 4 : 8;
    const std::uint64_t expected = width * height * elem;
    const std::uint64_t have = bytes.size() - kRasterHeaderBytes;
    if (have != expected)
        fail_byte(source, bytes.size(),
                  "payload is " + std::to_string(have) + " bytes, header declares " +
                      std::to_string(expected));
    const char* payload = bytes.data() + kRasterHeaderBytes;
    if (dtype == 1) {
        Grid<float> g(height, width);
        std::memcpy(g.data(), payload, expected);
        tile.data = std::move(g);
    } else {
        Grid<std::complex<float>> g(height, width);
        std::memcpy(static_cast<void*>(g.data()), payload, expected);
        tile.data = std::move(g);
    }
    return tile;
}

RasterTile read_raster(const std::string& path) { return decode_raster(read_file(path), path); }

void write_raster(const std::string& path, const RasterTile& tile) {
    write_file(path, encode_raster(tile));
}

// ---------------------------------------------------------------------------
// Point tables

namespace {

void check_cell(const std::string& cell) {
    if (cell.find_first_of(",\n\r") != std::string::npos)
        throw DomainError("table cell contains a delimiter: '" + cell + "'");
}

}  // namespace

PointTable::PointTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
    if (columns_.empty()) throw DomainError("table needs at least one column");
    for (const auto& c : columns_) {
        check_cell(c);
        if (c.empty()) throw DomainError("empty column name");
    }
    metadata_.emplace_back("format_version", "1");
}

void PointTable::set_meta(const std::string& key, const std::string& value) {
    if (key.find_first_of("=\n\r") != std::string::npos || value.find_first_of("\n\r") != std::string::npos)
        throw DomainError("metadata key/value contains a reserved character");
    for (auto& kv : metadata_)
        if (kv.first == key) {
            kv.second = value;
            return;
        }
    metadata_.emplace_back(key, value);
}

std::optional<std::string> PointTable::meta(std::string_view key) const {
    for (const auto& kv : metadata_)
        if (kv.first == key) return kv.second;
    return std::nullopt;
}

std::optional<std::size_t> PointTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i] == name) return i;
    return std::nullopt;
}

std::size_t PointTable::require_column(std::string_view name) const {
    const auto c = column(name);
    if (!c) fail_line(source_, schema_line_, "schema lacks column '" + std::string(name) + "'");
    return *c;
}

void PointTable::require_columns(std::initializer_list<std::string_view> names) const {
    for (auto n : names) require_column(n);
}

void PointTable::add_row(std::vector<std::string> cells) {
    if (cells.size() != columns_.size())
        throw DomainError("row has " + std::to_string(cells.size()) + " cells, schema has " +
                          std::to_string(columns_.size()));
    for (const auto& c : cells) check_cell(c);
    rows_.push_back(std::move(cells));
    row_lines_.push_back(0);
}

std::size_t PointTable::line_of(std::size_t row) const {
    return row < row_lines_.size() ? row_lines_[row] : 0;
}

const std::string& PointTable::text(std::size_t row, std::string_view col) const {
    return rows_.at(row)[require_column(col)];
}

double PointTable::number(std::size_t row, std::string_view col) const {
    const std::string& cell = text(row, col);
    const auto v = text::parse_double(cell);
    if (!v) fail_line(source_, line_of(row), "column '" + std::string(col) + "': bad number '" + cell + "'");
    return *v;
}

long long PointTable::integer(std::size_t row, std::string_view col) const {
    const std::string& cell = text(row, col);
    const auto v = text::parse_int(cell);
    if (!v) fail_line(source_, line_of(row), "column '" + std::string(col) + "': bad integer '" + cell + "'");
    return *v;
}

std::optional<double> PointTable::optional_number(std::size_t row, std::string_view col) const {
    if (text(row, col).empty()) return std::nullopt;
    return number(row, col);
}

PointTable parse_table(std::string_view content, const std::string& source) {
    PointTable t;
    t.source_ = source;
    const auto lines = lines_of(content);
    std::size_t i = 0;
    for (; i < lines.size() && !lines[i].empty() && lines[i].front() == '#'; ++i) {
        std::string_view body = lines[i].substr(1);
        if (!body.empty() && body.front() == ' ') body.remove_prefix(1);
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) fail_line(source, i + 1, "metadata line lacks '='");
        const std::string key(body.substr(0, eq));
        if (key.empty()) fail_line(source, i + 1, "empty metadata key");
        for (const auto& kv : t.metadata_)
            if (kv.first == key) fail_line(source, i + 1, "duplicate metadata key '" + key + "'");
        t.metadata_.emplace_back(key, std::string(body.substr(eq + 1)));
    }
    const auto version = t.meta("format_version");
    if (!version) fail_line(source, i + 1, "missing format_version metadata");
    if (*version != "1") fail_line(source, i + 1, "unsupported format_version '" + *version + "'");
    if (i >= lines.size() || lines[i].empty()) fail_line(source, i + 1, "missing schema row");
    t.schema_line_ = i + 1;
    for (auto c : text::split(lines[i], ',')) {
        if (c.empty()) fail_line(source, i + 1, "empty column name");
        for (const auto& existing : t.columns_)
            if (existing == c) fail_line(source, i + 1, "duplicate column '" + std::string(c) + "'");
        t.columns_.emplace_back(c);
    }
    for (++i; i < lines.size(); ++i) {
        auto cells = text::split(lines[i], ',');
        if (cells.size() != t.columns_.size())
            fail_line(source, i + 1,
                      "expected " + std::to_string(t.columns_.size()) + " cells, found " +
                          std::to_string(cells.size()));
        std::vector<std::string> row;
        row.reserve(cells.size());
        for (auto c : cells) row.emplace_back(c);
        t.rows_.push_back(std::move(row));
        t.row_lines_.push_back(i + 1);
    }
    // A file must end with a newline unless it is empty.
    if (!content.empty() && content.back() != '\n')
        fail_line(source, lines.size(), "missing final newline");
    return t;
}

std::string format_table(const PointTable& table) {
    std::string out;
    for (const auto& [k, v] : table.metadata()) out += "# " + k + "=" + v + "\n";
    for (std::size_t c = 0; c < table.columns().size(); ++c)
        out += (c ? "," : "") + table.columns()[c];
    out += "\n";
    for (std::size_t r = 0; r < table.size(); ++r) {
        const auto& row = table.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + row[c];
        out += "\n";
    }
    return out;
}

PointTable read_table(const std::string& path) { return parse_table(read_file(path), path); }

void write_table(const std::string& path, const PointTable& table) {
    write_file(path, format_table(table));
}

// ---------------------------------------------------------------------------
// Roads

void RoadNetwork::validate() const {
    if (zone < 1 || zone > 60) throw DomainError("road network: zone out of range");
    if (!std::isfinite(default_height)) throw DomainError("road network: non-finite default height");
    std::size_t vertices = 0;
    for (const auto& r : roads) {
        for (const auto& v : r.vertices) {
            if (!std::isfinite(v.easting) || !std::isfinite(v.northing) ||
                (v.height && !std::isfinite(*v.height)))
                throw DomainError("road '" + r.id + "': non-finite vertex");
            ++vertices;
        }
    }
    if (vertices == 0) throw DomainError("road network has no vertices");
}

RoadNetwork roads_from_table(const PointTable& t) {
    t.require_columns({"road_id", "easting", "northing", "height"});
    RoadNetwork net;
    const auto zone = t.meta("zone");
    const auto north = t.meta("north");
    const auto dh = t.meta("default_height");
    if (!zone || !text::parse_int(*zone)) fail_line(t.source(), 1, "road table lacks integer 'zone' metadata");
    if (!dh || !text::parse_double(*dh))
        fail_line(t.source(), 1, "road table lacks numeric 'default_height' metadata");
    net.zone = static_cast<int>(*text::parse_int(*zone));
    net.north = !north || *north != "false";
    net.default_height = *text::parse_double(*dh);
    for (std::size_t r = 0; r < t.size(); ++r) {
        const std::string& id = t.text(r, "road_id");
        if (net.roads.empty() || net.roads.back().id != id) net.roads.push_back({id, {}});
        net.roads.back().vertices.push_back(
            {t.number(r, "easting"), t.number(r, "northing"), t.optional_number(r, "height")});
    }
    try {
        net.validate();
    } catch (const DomainError& e) {
        fail_line(t.source(), 1, e.what());
    }
    return net;
}

PointTable roads_to_table(const RoadNetwork& net) {
    PointTable t({"road_id", "easting", "northing", "height"});
    t.set_meta("kind", "roads");
    t.set_meta("zone", std::to_string(net.zone));
    t.set_meta("north", net.north ? "true" : "false");
    t.set_meta("default_height", num(net.default_height));
    for (const auto& r : net.roads)
        for (const auto& v : r.vertices)
            t.add_row({r.id, num(v.easting), num(v.northing), v.height ? num(*v.height) : ""});
    return t;
}

RoadNetwork parse_roads_geojson(std::string_view content, const std::string& source) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(content.begin(), content.end());
    } catch (const nlohmann::json::parse_error& e) {
        fail_byte(source, e.byte, "invalid JSON");
    } catch (const nlohmann::json::exception& e) {
        // Number overflow carries no position; locate the quoted token.
        const std::string what = e.what();
        const auto open = what.find('\''), close = what.rfind('\'');
        std::size_t at = 0;
        if (open != std::string::npos && close > open) {
            const auto pos = content.find(what.substr(open + 1, close - open - 1));
            if (pos != std::string_view::npos) at = pos;
        }
        fail_byte(source, at, "invalid JSON value");
    }
    auto bad = [&](const std::string& why) -> RoadNetwork { fail_byte(source, 0, why); };
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection")
        return bad("expected a FeatureCollection");
    RoadNetwork net;
    if (!doc.contains("utm_zone") || !doc["utm_zone"].is_number_integer())
        return bad("missing integer 'utm_zone'");
    net.zone = doc["utm_zone"].get<int>();
    net.north = doc.value("north", true);
    if (!doc.contains("default_height") || !doc["default_height"].is_number())
        return bad("missing numeric 'default_height'");
    net.default_height = doc["default_height"].get<double>();
    if (!doc.contains("features") || !doc["features"].is_array()) return bad("missing 'features' array");
    std::size_t n = 0;
    for (const auto& f : doc["features"]) {
        const std::string where = "feature " + std::to_string(n++);
        if (!f.is_object() || !f.contains("geometry") || !f["geometry"].is_object())
            return bad(where + ": missing geometry");
        const auto& g = f["geometry"];
        if (g.value("type", "") != "LineString") return bad(where + ": only LineString is supported");
        if (!g.contains("coordinates") || !g["coordinates"].is_array())
            return bad(where + ": missing coordinates");
        RoadPolyline road;
        road.id = std::to_string(n - 1);
        if (f.contains("properties") && f["properties"].is_object()) {
            const auto& p = f["properties"];
            if (p.contains("id")) {
                if (p["id"].is_string()) road.id = p["id"].get<std::string>();
                else if (p["id"].is_number_integer()) road.id = std::to_string(p["id"].get<long long>());
            }
        }
        for (const auto& c : g["coordinates"]) {
            if (!c.is_array() || c.size() < 2 || c.size() > 3) return bad(where + ": bad coordinate");
            for (const auto& x : c)
                if (!x.is_number()) return bad(where + ": non-numeric coordinate");
            RoadVertex v{c[0].get<double>(), c[1].get<double>(), std::nullopt};
            if (c.size() == 3) v.height = c[2].get<double>();
            road.vertices.push_back(v);
        }
        net.roads.push_back(std::move(road));
    }
    try {
        net.validate();
    } catch (const DomainError& e) {
        return bad(e.what());
    }
    return net;
}

std::string format_roads_geojson(const RoadNetwork& net) {
    nlohmann::json doc;
    doc["type"] = "FeatureCollection";
    doc["utm_zone"] = net.zone;
    doc["north"] = net.north;
    doc["default_height"] = net.default_height;
    doc["features"] = nlohmann::json::array();
    for (const auto& r : net.roads) {
        nlohmann::json coords = nlohmann::json::array();
        for (const auto& v : r.vertices) {
            nlohmann::json c = {v.easting, v.northing};
            if (v.height) c.push_back(*v.height);
            coords.push_back(c);
        }
        doc["features"].push_back({{"type", "Feature"},
                                   {"properties", {{"id", r.id}}},
                                   {"geometry", {{"type", "LineString"}, {"coordinates", coords}}}});
    }
    return doc.dump(1) + "\n";
}

RoadNetwork read_roads(const std::string& path) {
    const auto ends_with = [&](std::string_view suffix) {
        return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".geojson") || ends_with(".json")) return parse_roads_geojson(read_file(path), path);
    return roads_from_table(read_table(path));
}

}  // namespace sargcp::io
