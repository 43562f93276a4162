#include "ecgtda/tables.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ecgtda/errors.hpp"
#include "json.hpp"

namespace ecgtda::io {

static_assert(std::endian::native == std::endian::little, "window tables assume a little-endian host");

std::string format_number(double x) {
  if (x == 0) x = 0.0;  // drop the sign of negative zero
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

constexpr char kMagic[4] = {'E', 'C', 'G', 'W'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw TruncatedData("truncated file " + path.string());
  return v;
}

}  // namespace

void write_windows(const std::filesystem::path& path, const std::vector<seg::BeatWindow>& windows) {
  const auto length = windows.empty() ? 0 : windows.front().samples.size();
  for (const auto& w : windows) {
    if (w.samples.size() != length) throw InvalidInput("write_windows: windows differ in length");
    if (w.patient_id.size() > 0xFFFF) throw InvalidInput("write_windows: patient id too long");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(length));
  put<std::uint64_t>(out, windows.size());
  for (const auto& w : windows) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(w.patient_id.size()));
    out.write(w.patient_id.data(), static_cast<std::streamsize>(w.patient_id.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(w.label));
    put<std::int64_t>(out, w.raw_start);
    put<std::int64_t>(out, w.raw_end);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(w.center_beat_index));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(w.beat_count));
    put<double>(out, w.center_position);
    put<double>(out, w.sample_rate_hz);
    out.write(reinterpret_cast<const char*>(w.samples.data()), static_cast<std::streamsize>(length * sizeof(double)));
  }
  if (!out) throw InvalidInput("failed writing " + path.string());
}

std::vector<seg::BeatWindow> read_windows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw ParseError(path.string() + ": not a window table", 0);
  if (get<std::uint32_t>(in, path) != kVersion) throw UnsupportedFormat(path.string() + ": unknown window table version");
  const auto length = get<std::uint32_t>(in, path);
  const auto count = get<std::uint64_t>(in, path);
  std::vector<seg::BeatWindow> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    seg::BeatWindow w;
    w.patient_id.resize(get<std::uint16_t>(in, path));
    if (!in.read(w.patient_id.data(), static_cast<std::streamsize>(w.patient_id.size())))
      throw TruncatedData("truncated window table " + path.string());
    w.label = static_cast<char>(get<std::uint8_t>(in, path));
    w.raw_start = static_cast<long>(get<std::int64_t>(in, path));
    w.raw_end = static_cast<long>(get<std::int64_t>(in, path));
    w.center_beat_index = get<std::uint32_t>(in, path);
    w.beat_count = static_cast<int>(get<std::uint32_t>(in, path));
    w.center_position = get<double>(in, path);
    w.sample_rate_hz = get<double>(in, path);
    w.samples.resize(length);
    if (!in.read(reinterpret_cast<char*>(w.samples.data()), static_cast<std::streamsize>(length * sizeof(double))))
      throw TruncatedData("truncated window table " + path.string());
    out.push_back(std::move(w));
  }
  return out;
}

void write_window_table(std::ostream& out, const std::vector<std::string>& columns,
                        const std::vector<seg::BeatWindow>& windows, const Eigen::Ref<const Eigen::MatrixXd>& values) {
  if (values.rows() != static_cast<Eigen::Index>(windows.size()) ||
      values.cols() != static_cast<Eigen::Index>(columns.size()))
    throw InvalidInput("write_window_table: shape mismatch");
  out << "patient_id,label,center_beat";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < windows.size(); ++r) {
    out << windows[r].patient_id << ',' << windows[r].label << ',' << windows[r].center_beat_index;
    for (Eigen::Index c = 0; c < values.cols(); ++c) out << ',' << format_number(values(static_cast<Eigen::Index>(r), c));
    out << '\n';
  }
}

std::string barcode_csv(const tda::Barcode<double>& bc) {
  std::string s = "birth,death,essential\n";
  for (const auto& iv : bc.intervals)
    s += format_number(iv.birth) + ',' + format_number(iv.death) + ',' + (iv.essential ? "true" : "false") + '\n';
  return s;
}

std::string betti_csv(const tda::BettiCurve<double>& curve) {
  std::string s = "alpha,count\n";
  for (Eigen::Index i = 0; i < curve.grid.size(); ++i)
    s += format_number(curve.grid[i]) + ',' + std::to_string(curve.counts[i]) + '\n';
  return s;
}

namespace {

nlohmann::ordered_json barcode_node(const tda::Barcode<double>& bc) {
  nlohmann::ordered_json j;
  j["filtration"] = bc.kind == tda::Filtration::sublevel ? "sublevel" : "superlevel";
  auto& arr = j["intervals"] = nlohmann::ordered_json::array();
  for (const auto& iv : bc.intervals)
    arr.push_back({{"birth", iv.birth}, {"death", iv.death}, {"essential", iv.essential}});
  return j;
}

nlohmann::ordered_json curve_node(const tda::BettiCurve<double>& c) {
  return {{"alpha", std::vector<double>(c.grid.data(), c.grid.data() + c.grid.size())},
          {"count", std::vector<int>(c.counts.data(), c.counts.data() + c.counts.size())}};
}

tda::Barcode<double> barcode_from(const nlohmann::json& j) {
  tda::Barcode<double> bc;
  const auto kind = j.at("filtration").get<std::string>();
  if (kind != "sublevel" && kind != "superlevel") throw ParseError("unknown filtration '" + kind + "'");
  bc.kind = kind == "sublevel" ? tda::Filtration::sublevel : tda::Filtration::superlevel;
  for (const auto& iv : j.at("intervals"))
    bc.intervals.push_back({iv.at("birth").get<double>(), iv.at("death").get<double>(), iv.at("essential").get<bool>()});
  return bc;
}

tda::BettiCurve<double> curve_from(const nlohmann::json& j) {
  const auto alpha = j.at("alpha").get<std::vector<double>>();
  const auto count = j.at("count").get<std::vector<int>>();
  if (alpha.size() != count.size()) throw ParseError("betti curve: alpha and count differ in length");
  tda::BettiCurve<double> c;
  c.grid = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
  c.counts = Eigen::Map<const Eigen::VectorXi>(count.data(), static_cast<Eigen::Index>(count.size()));
  return c;
}

constexpr char kMatrixMagic[4] = {'E', 'C', 'G', 'M'};

}  // namespace

std::string tda_json(const TdaBundle& b) {
  nlohmann::ordered_json j;
  j["sublevel"] = barcode_node(b.sublevel);
  j["superlevel"] = barcode_node(b.superlevel);
  j["betti"] = {{"sublevel", curve_node(b.sublevel_curve)}, {"superlevel", curve_node(b.superlevel_curve)}};
  return j.dump(2) + '\n';
}

TdaBundle tda_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    TdaBundle b;
    b.sublevel = barcode_from(j.at("sublevel"));
    b.superlevel = barcode_from(j.at("superlevel"));
    b.sublevel_curve = curve_from(j.at("betti").at("sublevel"));
    b.superlevel_curve = curve_from(j.at("betti").at("superlevel"));
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("barcode json: ") + e.what());
  }
}

void write_matrix(const std::filesystem::path& path, const Eigen::Ref<const Eigen::MatrixXd>& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
  out.write(kMatrixMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!out) throw InvalidInput("failed writing " + path.string());
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMatrixMagic, 4) != 0) throw ParseError(path.string() + ": not a matrix file", 0);
  if (get<std::uint32_t>(in, path) != kVersion) throw UnsupportedFormat(path.string() + ": unknown matrix version");
  const auto rows = get<std::uint64_t>(in, path), cols = get<std::uint64_t>(in, path);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  if (!in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double))))
    throw TruncatedData("truncated matrix file " + path.string());
  return rm;
}

namespace {

std::string escape(const std::string& text) {
  std::string s;
  for (const char c : text) {
    switch (c) {
      case '&': s += "&amp;"; break;
      case '<': s += "&lt;"; break;
      case '>': s += "&gt;"; break;
      case '"': s += "&quot;"; break;
      default: s += c;
    }
  }
  return s;
}

struct Frame {
  double x0, y0, w, h;
  double lo, hi;  // data range on x

  double x(double v) const { return hi > lo ? x0 + (v - lo) / (hi - lo) * w : x0 + w / 2; }
};

void draw_bars(std::ostringstream& out, const tda::Barcode<double>& bc, bool negate, const Frame& f,
               const char* colour) {
  const double row = bc.empty() ? 0 : std::min(12.0, f.h / double(bc.size()));
  for (std::size_t i = 0; i < bc.size(); ++i) {
    double a = bc.intervals[i].birth, b = bc.intervals[i].death;
    if (negate) std::tie(a, b) = std::pair(-b, -a);
    const double y = f.y0 + row * (double(i) + 0.5);
    out << "<line x1=\"" << f.x(a) << "\" y1=\"" << y << "\" x2=\"" << std::max(f.x(b), f.x(a) + 1) << "\" y2=\"" << y
        << "\" stroke=\"" << colour << "\" stroke-width=\"" << std::max(1.0, row * 0.6) << "\"/>\n";
  }
}

void draw_curve(std::ostringstream& out, const tda::BettiCurve<double>& c, bool negate, int max_count, const Frame& f,
                const char* colour) {
  out << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"";
  for (Eigen::Index i = 0; i < c.grid.size(); ++i) {
    const double a = negate ? -c.grid[i] : c.grid[i];
    const double y = f.y0 + f.h - f.h * double(c.counts[i]) / double(std::max(1, max_count));
    out << f.x(a) << ',' << y << ' ';
  }
  out << "\"/>\n";
}

}  // namespace

std::string barcode_svg(const tda::Barcode<double>& sublevel, const tda::Barcode<double>& superlevel,
                        const tda::BettiCurve<double>& sub_curve, const tda::BettiCurve<double>& super_curve,
                        const std::string& title) {
  double lo = 0, hi = 0;
  bool first = true;
  auto extend = [&](double v) {
    lo = first ? v : std::min(lo, v);
    hi = first ? v : std::max(hi, v);
    first = false;
  };
  for (const auto& iv : sublevel.intervals) extend(iv.birth), extend(iv.death);
  for (const auto& iv : superlevel.intervals) extend(-iv.birth), extend(-iv.death);
  const int max_count = std::max(sub_curve.counts.size() ? sub_curve.counts.maxCoeff() : 0,
                                 super_curve.counts.size() ? super_curve.counts.maxCoeff() : 0);

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" viewBox=\"0 0 640 480\">\n"
      << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n"
      << "<text x=\"20\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << escape(title) << "</text>\n";
  const Frame bars{40, 35, 560, 200, lo, hi};
  const Frame curves{40, 260, 560, 180, lo, hi};
  draw_bars(out, sublevel, false, {bars.x0, bars.y0, bars.w, bars.h / 2, lo, hi}, "steelblue");
  draw_bars(out, superlevel, true, {bars.x0, bars.y0 + bars.h / 2, bars.w, bars.h / 2, lo, hi}, "firebrick");
  out << "<line x1=\"40\" y1=\"440\" x2=\"600\" y2=\"440\" stroke=\"black\"/>\n";
  draw_curve(out, sub_curve, false, max_count, curves, "steelblue");
  draw_curve(out, super_curve, true, max_count, curves, "firebrick");
  out << "<text x=\"40\" y=\"460\" font-family=\"sans-serif\" font-size=\"11\">" << format_number(lo) << "</text>\n"
      << "<text x=\"600\" y=\"460\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
      << format_number(hi) << "</text>\n"
      << "</svg>\n";
  return out.str();
}

std::string series_svg(const std::vector<std::pair<std::string, std::vector<double>>>& series, const std::string& title) {
  static const char* colours[] = {"steelblue", "firebrick", "seagreen", "darkorange", "purple"};
  double lo = 0, hi = 0;
  std::size_t len = 0;
  bool first = true;
  for (const auto& [_, v] : series) {
    len = std::max(len, v.size());
    for (const double x : v) {
      if (!std::isfinite(x)) continue;
      lo = first ? x : std::min(lo, x);
      hi = first ? x : std::max(hi, x);
      first = false;
    }
  }
  if (hi <= lo) hi = lo + 1;
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\" viewBox=\"0 0 640 360\">\n"
      << "<rect width=\"640\" height=\"360\" fill=\"white\"/>\n"
      << "<text x=\"20\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << escape(title) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& v = series[s].second;
    out << "<polyline fill=\"none\" stroke=\"" << colours[s % 5] << "\" points=\"";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i])) continue;
      const double x = 40 + 560 * (len > 1 ? double(i) / double(len - 1) : 0.5);
      const double y = 320 - 280 * (v[i] - lo) / (hi - lo);
      out << x << ',' << y << ' ';
    }
    out << "\"/>\n<text x=\"" << 480 << "\" y=\"" << 40 + 16 * s << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
        << colours[s % 5] << "\">" << escape(series[s].first) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace ecgtda::io
