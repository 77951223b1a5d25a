// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sargcp/grid.hpp"
#include "sargcp/range_doppler.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sargcp::io {

inline constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Acquisition metadata: "key = value [unit]" lines.

struct AcquisitionMetadata {
    std::string acquisition_id;
    std::string geometry_id;
    std::string stack_id;
    double epoch_days = 0.0;
    double calibration = 1.0;
    AcquisitionGeometry geometry;
};

AcquisitionMetadata parse_metadata(std::string_view text, const std::string& source);
std::string format_metadata(const AcquisitionMetadata& meta);
AcquisitionMetadata read_metadata(const std::string& path);
void write_metadata(const std::string& path, const AcquisitionMetadata& meta);

// ---------------------------------------------------------------------------
// Binary raster tiles, little-endian.

enum class RasterType : std::uint32_t { Float32 = 1, Complex64 = 2 };
enum class GeorefKind : std::uint32_t { None = 0, PixelOrigin = 1, MapGrid = 2 };

/// PixelOrigin: params[0] line and params[1] sample of element (0, 0).
/// MapGrid: easting and northing of the centre of element (0, 0),
/// easting step per column, northing step per row, zone, north flag.
struct Georef {
    GeorefKind kind = GeorefKind::None;
    std::array<double, 6> params{};

    static Georef pixel_origin(const PixelCoord& origin);
    static Georef map_grid(double easting0, double northing0, double step_e, double step_n,
                           int zone, bool north);
    PixelCoord origin() const;
    double easting_of(double col) const { return params[0] + col * params[2]; }
    double northing_of(double row) const { return params[1] + row * params[3]; }
    double col_of(double easting) const { return (easting - params[0]) / params[2]; }
    double row_of(double northing) const { return (northing - params[1]) / params[3]; }
    int zone() const { return static_cast<int>(params[4]); }
    bool north() const { return params[5] != 0.0; }

    friend bool operator==(const Georef&, const Georef&) = default;
};

struct RasterTile {
    Georef georef;
    std::variant<Grid<float>, Grid<std::complex<float>>> data;

    RasterType type() const;
    std::size_t rows() const;
    std::size_t cols() const;
};

inline constexpr std::size_t kRasterHeaderBytes = 76;

std::string encode_raster(const RasterTile& tile);
RasterTile decode_raster(std::string_view bytes, const std::string& source);
RasterTile read_raster(const std::string& path);
void write_raster(const std::string& path, const RasterTile& tile);

// ---------------------------------------------------------------------------
// Delimited point tables: "# key=value" metadata, a schema row, CSV rows.

class PointTable {
public:
    PointTable() = default;
    explicit PointTable(std::vector<std::string> columns);

    const std::vector<std::string>& columns() const { return columns_; }
    const std::vector<std::pair<std::string, std::string>>& metadata() const { return metadata_; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }

    void set_meta(const std::string& key, const std::string& value);
    std::optional<std::string> meta(std::string_view key) const;

    std::optional<std::size_t> column(std::string_view name) const;
    /// Throws ParseError at the schema line when a column is missing.
    std::size_t require_column(std::string_view name) const;
    void require_columns(std::initializer_list<std::string_view> names) const;

    void add_row(std::vector<std::string> cells);
    const std::vector<std::string>& row(std::size_t i) const { return rows_.at(i); }

    const std::string& text(std::size_t row, std::string_view col) const;
    /// Numeric cell; ParseError with the row's line number on failure.
    double number(std::size_t row, std::string_view col) const;
    long long integer(std::size_t row, std::string_view col) const;
    /// Empty cells yield nullopt.
    std::optional<double> optional_number(std::size_t row, std::string_view col) const;

    const std::string& source() const { return source_; }
    std::size_t line_of(std::size_t row) const;

    friend PointTable parse_table(std::string_view text, const std::string& source);

private:
    std::vector<std::pair<std::string, std::string>> metadata_;
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
    std::string source_;
    std::size_t schema_line_ = 0;
    std::vector<std::size_t> row_lines_;
};

PointTable parse_table(std::string_view text, const std::string& source);
std::string format_table(const PointTable& table);
PointTable read_table(const std::string& path);
void write_table(const std::string& path, const PointTable& table);

std::string num(double v);

// ---------------------------------------------------------------------------
// Road networks.

struct RoadVertex {
    double easting = 0.0;
    double northing = 0.0;
    std::optional<double> height;
};

struct RoadPolyline {
    std::string id;
    std::vector<RoadVertex> vertices;
};

struct RoadNetwork {
    int zone = 0;
    bool north = true;
    double default_height = 0.0;
    std::vector<RoadPolyline> roads;

    void validate() const;
};

RoadNetwork roads_from_table(const PointTable& table);
PointTable roads_to_table(const RoadNetwork& net);
/// FeatureCollection of LineString features; coordinates are
/// [easting, northing] or [easting, northing, height].
RoadNetwork parse_roads_geojson(std::string_view text, const std::string& source);
std::string format_roads_geojson(const RoadNetwork& net);
/// Dispatches on extension: .geojson / .json or delimited text.
RoadNetwork read_roads(const std::string& path);

// ---------------------------------------------------------------------------

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace sargcp::io
