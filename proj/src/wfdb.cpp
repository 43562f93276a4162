#include "ecgtda/wfdb.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ecgtda::wfdb {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Leading numeric prefix of `s`; returns the rest through `rest`.
template <typename T>
bool parse_prefix(std::string_view s, T& out, std::string_view& rest) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr == s.data()) return false;
  rest = std::string_view(ptr, static_cast<std::size_t>(s.data() + s.size() - ptr));
  return true;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void parse_record_line(const std::string& line, std::size_t lineno, RecordHeader& h) {
  const auto tok = split_ws(line);
  if (tok.size() < 2) throw ParseError("record line needs a name and a signal count", lineno);
  const auto& name = tok[0];
  if (name.find('/') != std::string::npos) throw UnsupportedFormat("multi-segment records are not supported");
  h.record_name = name;
  if (!parse_number(tok[1], h.channel_count) || h.channel_count < 0)
    throw ParseError("bad signal count '" + tok[1] + "'", lineno);
  if (tok.size() > 2) {
    std::string_view rest;
    if (!parse_prefix(std::string_view(tok[2]), h.sampling_frequency, rest) || !(h.sampling_frequency > 0))
      throw ParseError("bad sampling frequency '" + tok[2] + "'", lineno);
    if (!rest.empty()) {
      if (rest.front() != '/') throw ParseError("bad sampling frequency '" + tok[2] + "'", lineno);
      rest.remove_prefix(1);
      std::string_view tail;
      if (!parse_prefix(rest, h.counter_frequency, tail)) throw ParseError("bad counter frequency", lineno);
      if (!tail.empty()) {
        if (tail.front() != '(' || tail.back() != ')') throw ParseError("bad base counter", lineno);
        if (!parse_number(tail.substr(1, tail.size() - 2), h.base_counter))
          throw ParseError("bad base counter", lineno);
      }
    }
  }
  if (tok.size() > 3 && (!parse_number(tok[3], h.samples_per_channel) || h.samples_per_channel < 0))
    throw ParseError("bad sample count '" + tok[3] + "'", lineno);
  if (tok.size() > 4) h.base_time = tok[4];
  if (tok.size() > 5) h.base_date = tok[5];
}

ChannelSpec parse_signal_line(const std::string& line, std::size_t lineno) {
  const auto tok = split_ws(line);
  if (tok.size() < 2) throw ParseError("signal line needs a file name and a format", lineno);
  ChannelSpec c;
  c.file_name = tok[0];

  std::string_view fmt = tok[1], rest;
  if (!parse_prefix(fmt, c.format, rest)) throw ParseError("bad format '" + tok[1] + "'", lineno);
  while (!rest.empty()) {
    const char tag = rest.front();
    rest.remove_prefix(1);
    std::string_view tail;
    bool ok = false;
    if (tag == 'x') ok = parse_prefix(rest, c.samples_per_frame, tail);
    if (tag == ':') ok = parse_prefix(rest, c.skew, tail);
    if (tag == '+') ok = parse_prefix(rest, c.byte_offset, tail);
    if (!ok) throw ParseError("bad format modifier in '" + tok[1] + "'", lineno);
    rest = tail;
  }
  if (c.format != 212 && c.format != 16)
    throw UnsupportedFormat("unsupported signal format " + std::to_string(c.format));
  if (c.samples_per_frame != 1) throw UnsupportedFormat("multi-frequency signals are not supported");

  std::optional<int> baseline;
  if (tok.size() > 2) {
    std::string_view g = tok[2], tail;
    if (!parse_prefix(g, c.adc_gain, tail)) throw ParseError("bad gain '" + tok[2] + "'", lineno);
    if (!tail.empty() && tail.front() == '(') {
      const auto close = tail.find(')');
      int b = 0;
      if (close == std::string_view::npos || !parse_number(tail.substr(1, close - 1), b))
        throw ParseError("bad baseline in '" + tok[2] + "'", lineno);
      baseline = b;
      tail.remove_prefix(close + 1);
    }
    if (!tail.empty()) {
      if (tail.front() != '/') throw ParseError("bad gain '" + tok[2] + "'", lineno);
      c.units = std::string(tail.substr(1));
    }
  }
  if (c.adc_gain == 0.0) c.adc_gain = 200.0;
  auto int_field = [&](std::size_t i, int& dst, const char* what) {
    if (tok.size() > i && !parse_number(tok[i], dst))
      throw ParseError(std::string("bad ") + what + " '" + tok[i] + "'", lineno);
  };
  int_field(3, c.adc_resolution, "ADC resolution");
  int_field(4, c.adc_zero, "ADC zero");
  int_field(5, c.initial_value, "initial value");
  int_field(6, c.checksum, "checksum");
  int_field(7, c.block_size, "block size");
  for (std::size_t i = 8; i < tok.size(); ++i) c.description += (i > 8 ? " " : "") + tok[i];
  c.baseline = baseline.value_or(c.adc_zero);
  return c;
}

int sign_extend_12(int v) { return (v & 0x800) ? v - 0x1000 : v; }

std::vector<int> demux(const std::vector<int>& all, int channel_count, long n_samples, int channel_index) {
  std::vector<int> out(static_cast<std::size_t>(n_samples));
  for (long i = 0; i < n_samples; ++i)
    out[static_cast<std::size_t>(i)] = all[static_cast<std::size_t>(i * channel_count + channel_index)];
  return out;
}

void check_channel(int channel_count, int channel_index) {
  if (channel_count < 1) throw InvalidInput("channel count must be >= 1");
  if (channel_index < 0 || channel_index >= channel_count)
    throw InvalidInput("channel index " + std::to_string(channel_index) + " out of range");
}

std::span<const std::uint8_t> after_offset(const std::vector<std::uint8_t>& bytes, long byte_offset) {
  if (byte_offset < 0 || static_cast<std::size_t>(byte_offset) > bytes.size())
    throw TruncatedData("byte offset beyond end of signal file");
  return std::span<const std::uint8_t>(bytes).subspan(static_cast<std::size_t>(byte_offset));
}

const std::array<const char*, 50>& mnemonics() {
  static const std::array<const char*, 50> table = {
      "",  "N", "L", "R", "a", "V", "F", "J", "A", "S", "E", "j", "/", "Q", "~", "",  "|",
      "",  "s", "T", "*", "D", "\"", "=", "p", "B", "^", "t", "+", "u", "?", "!", "[", "]",
      "e", "n", "@", "x", "f", "(", ")", "r", "",  "",  "",  "",  "",  "",  "",  ""};
  return table;
}

}  // namespace

RecordHeader parse_header(std::istream& in) {
  RecordHeader h;
  bool have_record = false;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      h.comments.push_back(line.substr(first + 1));
      continue;
    }
    if (!have_record) {
      parse_record_line(line, lineno, h);
      have_record = true;
    } else if (static_cast<int>(h.channels.size()) < h.channel_count) {
      h.channels.push_back(parse_signal_line(line, lineno));
    }
  }
  if (!have_record) throw ParseError("no record line in header");
  if (static_cast<int>(h.channels.size()) != h.channel_count)
    throw ParseError("header declares " + std::to_string(h.channel_count) + " signals but describes " +
                     std::to_string(h.channels.size()), lineno);
  return h;
}

RecordHeader read_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return parse_header(in);
}

std::vector<int> decode_212(std::span<const std::uint8_t> bytes, std::size_t total_samples) {
  const std::size_t needed = (3 * total_samples + 1) / 2;
  if (bytes.size() < needed)
    throw TruncatedData("format 212 data holds " + std::to_string(bytes.size()) + " bytes, need " +
                        std::to_string(needed));
  std::vector<int> out(total_samples);
  for (std::size_t i = 0, b = 0; i < total_samples; i += 2, b += 3) {
    const int b0 = bytes[b], b1 = bytes[b + 1];
    out[i] = sign_extend_12(b0 | ((b1 & 0x0F) << 8));
    if (i + 1 < total_samples) out[i + 1] = sign_extend_12(bytes[b + 2] | ((b1 & 0xF0) << 4));
  }
  return out;
}

std::vector<std::uint8_t> encode_212(std::span<const int> samples) {
  std::vector<std::uint8_t> out;
  out.reserve((3 * samples.size() + 1) / 2);
  for (std::size_t i = 0; i < samples.size(); i += 2) {
    const int a = samples[i];
    const int b = i + 1 < samples.size() ? samples[i + 1] : 0;
    if (a < -2048 || a > 2047 || b < -2048 || b > 2047) throw InvalidInput("sample outside 12-bit range");
    const unsigned ua = static_cast<unsigned>(a) & 0xFFFu, ub = static_cast<unsigned>(b) & 0xFFFu;
    out.push_back(static_cast<std::uint8_t>(ua & 0xFF));
    out.push_back(static_cast<std::uint8_t>(((ua >> 8) & 0x0F) | ((ub >> 4) & 0xF0)));
    if (i + 1 < samples.size()) out.push_back(static_cast<std::uint8_t>(ub & 0xFF));
  }
  return out;
}

std::vector<int> decode_16(std::span<const std::uint8_t> bytes, std::size_t total_samples) {
  if (bytes.size() < 2 * total_samples) throw TruncatedData("format 16 data is truncated");
  std::vector<int> out(total_samples);
  for (std::size_t i = 0; i < total_samples; ++i)
    out[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8)));
  return out;
}

std::vector<std::uint8_t> encode_16(std::span<const int> samples) {
  std::vector<std::uint8_t> out;
  out.reserve(2 * samples.size());
  for (const int s : samples) {
    if (s < -32768 || s > 32767) throw InvalidInput("sample outside 16-bit range");
    const auto u = static_cast<std::uint16_t>(s);
    out.push_back(static_cast<std::uint8_t>(u & 0xFF));
    out.push_back(static_cast<std::uint8_t>(u >> 8));
  }
  return out;
}

std::vector<int> read_signal_212(const std::filesystem::path& path, int channel_count, long n_samples,
                                 int channel_index, long byte_offset) {
  check_channel(channel_count, channel_index);
  const auto bytes = read_bytes(path);
  const auto data = after_offset(bytes, byte_offset);
  if (n_samples == 0) n_samples = static_cast<long>(data.size() * 2 / 3) / channel_count;
  const auto all = decode_212(data, static_cast<std::size_t>(n_samples) * static_cast<std::size_t>(channel_count));
  return demux(all, channel_count, n_samples, channel_index);
}

std::vector<int> read_signal_16(const std::filesystem::path& path, int channel_count, long n_samples,
                                int channel_index, long byte_offset) {
  check_channel(channel_count, channel_index);
  const auto bytes = read_bytes(path);
  const auto data = after_offset(bytes, byte_offset);
  if (n_samples == 0) n_samples = static_cast<long>(data.size() / 2) / channel_count;
  const auto all = decode_16(data, static_cast<std::size_t>(n_samples) * static_cast<std::size_t>(channel_count));
  return demux(all, channel_count, n_samples, channel_index);
}

Eigen::VectorXd to_physical(std::span<const int> raw, double adc_gain, int adc_zero) {
  if (adc_gain == 0.0 || !std::isfinite(adc_gain)) throw InvalidInput("to_physical: ADC gain must be non-zero");
  Eigen::VectorXd out(static_cast<Eigen::Index>(raw.size()));
  for (std::size_t i = 0; i < raw.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = (raw[i] - adc_zero) / adc_gain;
  return out;
}

std::string symbol_for_code(int code) {
  if (code < 0 || code >= static_cast<int>(mnemonics().size())) return "";
  return mnemonics()[static_cast<std::size_t>(code)];
}

std::optional<int> code_for_symbol(const std::string& symbol) {
  if (symbol.empty()) return std::nullopt;
  const auto& t = mnemonics();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (symbol == t[i]) return static_cast<int>(i);
  return std::nullopt;
}

std::vector<Annotation> decode_annotations(std::span<const std::uint8_t> bytes) {
  std::vector<Annotation> out;
  long long time = 0;
  int chan = 0, num = 0;
  std::size_t pos = 0;
  auto word_at = [&](std::size_t p) { return static_cast<unsigned>(bytes[p] | (bytes[p + 1] << 8)); };

  while (pos + 1 < bytes.size()) {
    const unsigned w = word_at(pos);
    pos += 2;
    const int a = static_cast<int>(w >> 10);
    const int inc = static_cast<int>(w & 0x3FF);
    if (a == 0 && inc == 0) return out;
    switch (a) {
      case code::kSkip: {
        if (pos + 4 > bytes.size()) throw ParseError("annotation SKIP without its 32-bit interval");
        const auto hi = word_at(pos), lo = word_at(pos + 2);
        pos += 4;
        time += static_cast<std::int32_t>((hi << 16) | lo);
        break;
      }
      case code::kNum:
        num = inc >= 512 ? inc - 1024 : inc;
        if (!out.empty()) out.back().num = num;
        break;
      case code::kSub:
        if (!out.empty()) out.back().subtype = inc;
        break;
      case code::kChn:
        chan = inc;
        if (!out.empty()) out.back().channel = chan;
        break;
      case code::kAux: {
        if (pos + static_cast<std::size_t>(inc) > bytes.size())
          throw ParseError("AUX length " + std::to_string(inc) + " runs past end of annotation file");
        if (out.empty()) throw ParseError("AUX string before any annotation");
        out.back().aux.assign(reinterpret_cast<const char*>(bytes.data() + pos), static_cast<std::size_t>(inc));
        pos += static_cast<std::size_t>(inc + (inc & 1));
        break;
      }
      default: {
        time += inc;
        if (time < 0) throw ParseError("annotation time underflow");
        Annotation ann;
        ann.sample = static_cast<long>(time);
        ann.code = a;
        ann.channel = chan;
        ann.num = num;
        out.push_back(std::move(ann));
      }
    }
  }
  if (pos != bytes.size()) throw ParseError("annotation file ends mid-word");
  return out;
}

std::vector<std::uint8_t> encode_annotations(std::span<const Annotation> annotations) {
  std::vector<std::uint8_t> out;
  auto put_word = [&out](unsigned w) {
    out.push_back(static_cast<std::uint8_t>(w & 0xFF));
    out.push_back(static_cast<std::uint8_t>((w >> 8) & 0xFF));
  };
  long long time = 0;
  int chan = 0, num = 0;
  for (const auto& ann : annotations) {
    if (ann.code < 1 || ann.code > code::kAcMax) throw InvalidInput("annotation code out of range");
    const long long delta = ann.sample - time;
    if (delta < 0 || delta > 0x3FF) {
      if (delta < INT32_MIN || delta > INT32_MAX) throw InvalidInput("annotation interval exceeds 32 bits");
      const auto d = static_cast<std::uint32_t>(static_cast<std::int32_t>(delta));
      put_word(static_cast<unsigned>(code::kSkip) << 10);
      put_word(d >> 16);
      put_word(d & 0xFFFF);
      put_word(static_cast<unsigned>(ann.code) << 10);
    } else {
      put_word((static_cast<unsigned>(ann.code) << 10) | static_cast<unsigned>(delta));
    }
    time = ann.sample;
    if (ann.subtype != 0) put_word((static_cast<unsigned>(code::kSub) << 10) | (ann.subtype & 0x3FF));
    if (ann.channel != chan) {
      put_word((static_cast<unsigned>(code::kChn) << 10) | (ann.channel & 0x3FF));
      chan = ann.channel;
    }
    if (ann.num != num) {
      put_word((static_cast<unsigned>(code::kNum) << 10) | (static_cast<unsigned>(ann.num) & 0x3FF));
      num = ann.num;
    }
    if (!ann.aux.empty()) {
      if (ann.aux.size() > 0x3FF) throw InvalidInput("AUX string too long");
      put_word((static_cast<unsigned>(code::kAux) << 10) | static_cast<unsigned>(ann.aux.size()));
      out.insert(out.end(), ann.aux.begin(), ann.aux.end());
      if (ann.aux.size() & 1) out.push_back(0);
    }
  }
  put_word(0);
  return out;
}

std::vector<Annotation> read_annotations(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return decode_annotations(bytes);
}

BeatCodeSet BeatCodeSet::standard() {
  BeatCodeSet s;
  s.symbols_ = {"N", "L", "R", "B", "A", "a", "J", "S", "V", "r", "F", "e", "j", "n", "E", "/", "f", "Q", "?"};
  return s;
}

BeatCodeSet BeatCodeSet::parse(std::istream& in) {
  BeatCodeSet s;
  for (std::string line; std::getline(in, line);) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (auto& tok : split_ws(line)) {
      if (!code_for_symbol(tok)) throw ParseError("unknown annotation symbol '" + tok + "'");
      s.symbols_.insert(tok);
    }
  }
  return s;
}

BeatCodeSet BeatCodeSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return parse(in);
}

std::vector<BeatAnnotation> select_beats(std::span<const Annotation> annotations, const BeatCodeSet& beats,
                                         long signal_length) {
  std::vector<BeatAnnotation> out;
  for (const auto& a : annotations) {
    auto sym = symbol_for_code(a.code);
    if (!beats.is_beat(sym) || a.sample < 0 || a.sample >= signal_length) continue;
    if (!out.empty() && a.sample <= out.back().sample)
      throw ParseError("beat annotations not strictly increasing at sample " + std::to_string(a.sample));
    out.push_back({a.sample, std::move(sym)});
  }
  return out;
}

AnnotatedRecord read_record(const std::filesystem::path& record, const ReadOptions& opts) {
  auto base = record;
  if (base.extension() == ".hea") base.replace_extension();
  auto hea = base;
  hea += ".hea";
  const auto header = read_header(hea);
  if (opts.channel < 0 || opts.channel >= header.channel_count)
    throw InvalidInput("record " + header.record_name + " has no channel " + std::to_string(opts.channel));

  const auto& spec = header.channels[static_cast<std::size_t>(opts.channel)];
  int in_file = 0, index_in_file = 0;
  for (int c = 0; c < header.channel_count; ++c) {
    if (header.channels[static_cast<std::size_t>(c)].file_name != spec.file_name) continue;
    if (c == opts.channel) index_in_file = in_file;
    ++in_file;
  }
  const auto dat = base.parent_path() / spec.file_name;
  const auto raw = spec.format == 212
                       ? read_signal_212(dat, in_file, header.samples_per_channel, index_in_file, spec.byte_offset)
                       : read_signal_16(dat, in_file, header.samples_per_channel, index_in_file, spec.byte_offset);

  AnnotatedRecord rec;
  rec.patient_id = header.record_name;
  rec.source_rate_hz = header.sampling_frequency;
  rec.adc_gain = spec.adc_gain;
  rec.adc_zero = spec.baseline;
  rec.signal = Signal(to_physical(raw, spec.adc_gain, spec.baseline), header.sampling_frequency);

  auto atr = base;
  atr += "." + opts.annotator;
  const auto anns = read_annotations(atr);
  rec.beat_annotations = select_beats(anns, opts.beats, rec.signal.size());
  return rec;
}

void DatasetManifest::add(ManifestEntry entry) {
  for (const auto& e : entries)
    if (e.database == entry.database && e.patient_id == entry.patient_id)
      throw InvalidInput("duplicate patient '" + entry.patient_id + "' in database '" + entry.database + "'");
  entries.push_back(std::move(entry));
}

std::map<std::string, DatabaseSummary> DatasetManifest::summarize() const {
  std::map<std::string, DatabaseSummary> out;
  for (const auto& e : entries) {
    auto& s = out[e.database];
    ++s.patients;
    s.labels += e.beat_count;
    s.duration_hours += e.duration_hours;
    for (const auto& [sym, n] : e.labels) s.histogram[sym] += n;
  }
  return out;
}

std::string DatasetManifest::to_json() const {
  nlohmann::ordered_json j;
  j["records"] = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json r;
    r["record"] = e.record_path;
    r["database"] = e.database;
    r["patient_id"] = e.patient_id;
    r["beats"] = e.beat_count;
    r["duration_hours"] = e.duration_hours;
    r["labels"] = e.labels;
    j["records"].push_back(std::move(r));
  }
  auto& dbs = j["databases"] = nlohmann::ordered_json::object();
  std::size_t patients = 0, labels = 0;
  for (const auto& [name, s] : summarize()) {
    dbs[name] = {{"patients", s.patients}, {"labels", s.labels}, {"duration_hours", s.duration_hours},
                 {"histogram", s.histogram}};
    patients += s.patients;
    labels += s.labels;
  }
  j["totals"] = {{"patients", patients}, {"labels", labels}};
  j["failures"] = failures;
  return j.dump(2);
}

ManifestEntry manifest_entry(const AnnotatedRecord& rec, const std::string& record_path,
                             const std::string& database) {
  ManifestEntry e;
  e.record_path = record_path;
  e.database = database;
  e.patient_id = rec.patient_id;
  e.beat_count = rec.beat_annotations.size();
  e.duration_hours = rec.signal.duration_s() / 3600.0;
  for (const auto& b : rec.beat_annotations) ++e.labels[b.symbol];
  return e;
}

}  // namespace ecgtda::wfdb
