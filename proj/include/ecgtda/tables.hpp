#pragma once

// On-disk tables: beat windows (binary), numeric CSV, barcode / Betti CSV and
// an SVG rendering of a barcode pair with its Betti curves.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ecgtda/segmentation.hpp"
#include "ecgtda/tda.hpp"

namespace ecgtda::io {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double x);

// Binary layout, little-endian: "ECGW", u32 version, u32 window length,
// u64 count; per window: u16 id length, id bytes, u8 label, i64 start,
// i64 end, u32 centre beat index, u32 beat count, f64 centre position,
// f64 source rate, then `length` f64 samples.
void write_windows(const std::filesystem::path& path, const std::vector<seg::BeatWindow>& windows);
std::vector<seg::BeatWindow> read_windows(const std::filesystem::path& path);

/// Header "patient_id,label,center_beat,<columns...>", one row per window.
void write_window_table(std::ostream& out, const std::vector<std::string>& columns,
                        const std::vector<seg::BeatWindow>& windows, const Eigen::Ref<const Eigen::MatrixXd>& values);

/// "birth,death,essential" rows in canonical order.
std::string barcode_csv(const tda::Barcode<double>& bc);
/// "alpha,count" rows.
std::string betti_csv(const tda::BettiCurve<double>& curve);

/// Both filtrations of one signal with their Betti curves.
struct TdaBundle {
  tda::Barcode<double> sublevel, superlevel;
  tda::BettiCurve<double> sublevel_curve, superlevel_curve;
};

/// {"sublevel": {"filtration", "intervals": [{birth, death, essential}]},
///  "superlevel": ..., "betti": {"sublevel": {"alpha", "count"}, "superlevel": ...}}
std::string tda_json(const TdaBundle& b);
/// Throws ParseError on malformed input.
TdaBundle tda_from_json(const std::string& text);

// Row-major f64 matrix, little-endian: "ECGM", u32 version, u64 rows,
// u64 cols, then rows*cols f64 values.
void write_matrix(const std::filesystem::path& path, const Eigen::Ref<const Eigen::MatrixXd>& m);
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);

/// Bars on top, Betti curves below. Superlevel values are drawn in signal
/// coordinates (negated back).
std::string barcode_svg(const tda::Barcode<double>& sublevel, const tda::Barcode<double>& superlevel,
                        const tda::BettiCurve<double>& sub_curve, const tda::BettiCurve<double>& super_curve,
                        const std::string& title = {});

/// Simple polyline chart of one or more series sharing an x axis.
std::string series_svg(const std::vector<std::pair<std::string, std::vector<double>>>& series,
                       const std::string& title = {});

}  // namespace ecgtda::io
