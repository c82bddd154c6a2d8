#pragma once

#include <advrisk/bootstrap.hpp>
#include <advrisk/core.hpp>
#include <advrisk/detection.hpp>
#include <advrisk/estimators.hpp>
#include <advrisk/models.hpp>

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

// Text formats are UTF-8 with LF line endings and '.' decimals regardless of
// locale. Header lines start with '#'; the first line names the format and
// its version.

namespace advrisk::io {

inline constexpr int kVersion = 1;

// ---------------------------------------------------------------------------
// Primitives

// Shortest text that round-trips when `digits` is 0, otherwise %.{digits}g.
inline std::string format_double(double v, int digits = 17) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto res = digits > 0 ? std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, digits)
                        : std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::string format_fixed(double v, int decimals) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, decimals);
  return std::string(buf.data(), res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s, int base = 10) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string hex64(std::uint64_t v) {
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(v));
  return buf.data();
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// A parsed text file: versioned magic line, `# key=value` headers, and
// numbered body lines.
struct TextDocument {
  std::map<std::string, std::pair<std::string, std::size_t>> headers;  // value, line
  std::vector<std::pair<std::size_t, std::string_view>> body;          // line number, text
  std::string storage;

  const std::string& header(const std::string& key) const {
    auto it = headers.find(key);
    if (it == headers.end()) throw FormatError(FormatErrc::bad_header, 0, "missing header '" + key + "'");
    return it->second.first;
  }
  std::size_t header_line(const std::string& key) const {
    auto it = headers.find(key);
    return it == headers.end() ? 0 : it->second.second;
  }
};

inline TextDocument parse_document(std::string content, std::string_view kind) {
  TextDocument doc;
  doc.storage = std::move(content);
  std::string_view all = doc.storage;
  if (!all.empty() && all.back() == '\n') all.remove_suffix(1);
  const auto lines = split(all, '\n');
  const std::string magic = "# advrisk " + std::string(kind) + " v";
  if (lines.empty() || !lines[0].starts_with(magic)) {
    throw FormatError(FormatErrc::bad_header, 1, "expected '" + magic + std::to_string(kVersion) + "'");
  }
  if (lines[0].substr(magic.size()) != std::to_string(kVersion)) {
    throw FormatError(FormatErrc::version_mismatch, 1,
                      "unsupported version '" + std::string(lines[0].substr(magic.size())) + "'");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = lines[i];
    if (line.starts_with("# ")) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw FormatError(FormatErrc::bad_header, i + 1, std::string(line));
      doc.headers[std::string(line.substr(2, eq - 2))] = {std::string(line.substr(eq + 1)), i + 1};
    } else if (!line.empty() || i + 1 < lines.size()) {
      doc.body.emplace_back(i + 1, line);
    }
  }
  return doc;
}

inline std::string format_features(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

inline Vector parse_features(std::string_view s, std::size_t line) {
  Vector out;
  if (s.empty()) return out;
  for (auto tok : split(s, ',')) {
    auto v = parse_double(tok);
    if (!v || !std::isfinite(*v)) throw FormatError(FormatErrc::malformed_number, line, std::string(tok));
    out.push_back(*v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Perturbation records

inline std::string format_records(const AttackOutcomeSet& o) {
  std::string s = "# advrisk records v" + std::to_string(kVersion) + "\n";
  s += "# metric=" + std::string(to_string(o.metric())) + "\n";
  s += "# model_id=" + o.model_id() + "\n";
  s += "# sample_hash=" + hex64(o.sample_hash()) + "\n";
  for (const auto& r : o.records()) {
    s += r.observation_id + "\t" + (r.d_a.is_finite() ? format_double(r.d_a.value()) : "inf") + "\n";
  }
  return s;
}

inline AttackOutcomeSet parse_records(std::string content) {
  const auto doc = parse_document(std::move(content), "records");
  Metric metric;
  try {
    metric = parse_metric(doc.header("metric"));
  } catch (const ConfigError& e) {
    throw FormatError(FormatErrc::bad_header, doc.header_line("metric"), e.what());
  }
  const auto hash = parse_int<std::uint64_t>(doc.header("sample_hash"), 16);
  if (!hash) throw FormatError(FormatErrc::bad_header, doc.header_line("sample_hash"), "bad sample hash");

  std::vector<PerturbationRecord> records;
  std::unordered_set<std::string> seen;
  for (const auto& [line_no, line] : doc.body) {
    const auto fields = split(line, '\t');
    if (fields.size() != 2 || fields[0].empty()) throw FormatError(FormatErrc::malformed_line, line_no, std::string(line));
    if (!seen.insert(std::string(fields[0])).second) {
      throw FormatError(FormatErrc::duplicate_id, line_no, std::string(fields[0]));
    }
    const auto d = parse_double(fields[1]);
    if (!d || std::isnan(*d) || !(*d > 0.0)) throw FormatError(FormatErrc::malformed_number, line_no, std::string(fields[1]));
    records.push_back({std::string(fields[0]), "",
                       std::isinf(*d) ? PerturbationSize::infinite() : PerturbationSize::finite(*d)});
  }
  AttackOutcomeSet out(doc.header("model_id"), metric, std::move(records));
  if (out.sample_hash() != *hash) {
    throw FormatError(FormatErrc::hash_mismatch, doc.header_line("sample_hash"),
                      "header says " + hex64(*hash) + ", records hash to " + hex64(out.sample_hash()));
  }
  return out;
}

inline void write_records(const AttackOutcomeSet& o, const std::filesystem::path& path) {
  write_file(path, format_records(o));
}

inline AttackOutcomeSet read_records(const std::filesystem::path& path) {
  try {
    return parse_records(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(e.code(), e.line(), path.string() + ": " + e.what());
  }
}

// Reads record files that will be pooled: all must share metric and sample.
inline std::vector<AttackOutcomeSet> read_record_pool(std::span<const std::filesystem::path> paths) {
  std::vector<AttackOutcomeSet> out;
  for (const auto& p : paths) {
    out.push_back(read_records(p));
    const auto& first = out.front();
    const auto& last = out.back();
    if (last.metric() != first.metric()) {
      throw FormatError(FormatErrc::metric_mismatch, 2,
                        p.string() + " uses " + std::string(to_string(last.metric())) + ", expected " +
                            std::string(to_string(first.metric())));
    }
    if (last.sample_hash() != first.sample_hash()) {
      throw FormatError(FormatErrc::hash_mismatch, 4, p.string() + " was computed on a different sample");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attack candidates

inline std::string format_candidates(std::span<const AttackCandidate> candidates, const std::string& model_id,
                                     Metric metric) {
  std::string s = "# advrisk candidates v" + std::to_string(kVersion) + "\n";
  s += "# metric=" + std::string(to_string(metric)) + "\n";
  s += "# model_id=" + model_id + "\n";
  s += "# columns=observation_id,attack,params,distance,success,features\n";
  for (const auto& c : candidates) {
    std::string params;
    for (const auto& [k, v] : c.attack_params) {
      if (!params.empty()) params += ';';
      params += k + "=" + format_double(v);
    }
    s += c.observation_id + "\t" + c.attack_name + "\t" + params + "\t" + format_double(c.distance) + "\t" +
         (c.success ? "1" : "0") + "\t" + format_features(c.perturbed_features) + "\n";
  }
  return s;
}

struct CandidateFile {
  std::string model_id;
  Metric metric = Metric::linf;
  std::vector<AttackCandidate> candidates;
};

inline CandidateFile parse_candidates(std::string content) {
  const auto doc = parse_document(std::move(content), "candidates");
  CandidateFile out;
  out.model_id = doc.header("model_id");
  try {
    out.metric = parse_metric(doc.header("metric"));
  } catch (const ConfigError& e) {
    throw FormatError(FormatErrc::bad_header, doc.header_line("metric"), e.what());
  }
  for (const auto& [line_no, line] : doc.body) {
    const auto f = split(line, '\t');
    if (f.size() != 6 || f[0].empty()) throw FormatError(FormatErrc::malformed_line, line_no, std::string(line));
    AttackCandidate c;
    c.observation_id = std::string(f[0]);
    c.attack_name = std::string(f[1]);
    if (!f[2].empty()) {
      for (auto kv : split(f[2], ';')) {
        const auto eq = kv.find('=');
        if (eq == std::string_view::npos) throw FormatError(FormatErrc::malformed_line, line_no, std::string(kv));
        const auto v = parse_double(kv.substr(eq + 1));
        if (!v) throw FormatError(FormatErrc::malformed_number, line_no, std::string(kv));
        c.attack_params[std::string(kv.substr(0, eq))] = *v;
      }
    }
    const auto d = parse_double(f[3]);
    if (!d || !std::isfinite(*d) || *d < 0.0) throw FormatError(FormatErrc::malformed_number, line_no, std::string(f[3]));
    c.distance = *d;
    if (f[4] != "0" && f[4] != "1") throw FormatError(FormatErrc::malformed_line, line_no, "success must be 0 or 1");
    c.success = f[4] == "1";
    c.perturbed_features = parse_features(f[5], line_no);
    out.candidates.push_back(std::move(c));
  }
  return out;
}

inline void write_candidates(std::span<const AttackCandidate> candidates, const std::string& model_id, Metric metric,
                             const std::filesystem::path& path) {
  write_file(path, format_candidates(candidates, model_id, metric));
}

inline CandidateFile read_candidates(const std::filesystem::path& path) { return parse_candidates(read_file(path)); }

// ---------------------------------------------------------------------------
// Datasets

inline std::string format_dataset(const Dataset& ds) {
  std::string s = "# advrisk dataset v" + std::to_string(kVersion) + "\n";
  s += "# dim=" + std::to_string(ds.dim()) + "\n";
  s += "# num_classes=" + std::to_string(ds.num_classes()) + "\n";
  for (const auto& o : ds.observations()) {
    s += o.id + "\t" + std::to_string(o.label) + "\t" + format_features(o.features) + "\n";
  }
  return s;
}

inline Dataset parse_dataset(std::string content) {
  const auto doc = parse_document(std::move(content), "dataset");
  const auto dim = parse_int<std::size_t>(doc.header("dim"));
  const auto k = parse_int<int>(doc.header("num_classes"));
  if (!dim || *dim == 0) throw FormatError(FormatErrc::bad_header, doc.header_line("dim"), "bad dim");
  if (!k || *k <= 0) throw FormatError(FormatErrc::bad_header, doc.header_line("num_classes"), "bad num_classes");
  std::vector<Observation> obs;
  std::unordered_set<std::string> seen;
  for (const auto& [line_no, line] : doc.body) {
    const auto f = split(line, '\t');
    if (f.size() != 3 || f[0].empty()) throw FormatError(FormatErrc::malformed_line, line_no, std::string(line));
    if (!seen.insert(std::string(f[0])).second) throw FormatError(FormatErrc::duplicate_id, line_no, std::string(f[0]));
    const auto label = parse_int<int>(f[1]);
    if (!label || *label < 0 || *label >= *k) throw FormatError(FormatErrc::malformed_number, line_no, std::string(f[1]));
    auto features = parse_features(f[2], line_no);
    if (features.size() != *dim) {
      throw FormatError(FormatErrc::malformed_line, line_no, "expected " + std::to_string(*dim) + " features");
    }
    obs.push_back({std::string(f[0]), std::move(features), *label});
  }
  return Dataset(std::move(obs), *k, *dim);
}

inline void write_dataset(const Dataset& ds, const std::filesystem::path& path) { write_file(path, format_dataset(ds)); }
inline Dataset read_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

// ---------------------------------------------------------------------------
// Models
//
// Binary, little-endian:
//   magic "ADVRMODL" (8 bytes), u32 version,
//   u32 id length, id bytes,
//   u32 kind (0 linear, 1 mlp), u32 activation (0 relu, 1 tanh),
//   u32 dim, u32 num_classes, u32 hidden count, u32 hidden sizes...,
//   u64 weight count, f64 weights...

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

class ByteReader {
public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint64_t get(int bytes) {
    if (pos_ + static_cast<std::size_t>(bytes) > data_.size()) {
      throw FormatError(FormatErrc::malformed_line, 0, "truncated model file");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::string_view bytes(std::size_t n) {
    if (pos_ + n > data_.size()) throw FormatError(FormatErrc::malformed_line, 0, "truncated model file");
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline constexpr std::string_view kModelMagic = "ADVRMODL";

inline std::string format_model(const Predictor& p) {
  std::string out(kModelMagic);
  detail::put_u32(out, kVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(p.model_id().size()));
  out += p.model_id();
  const auto& arch = p.architecture();
  detail::put_u32(out, arch.kind == Architecture::Kind::linear ? 0U : 1U);
  detail::put_u32(out, arch.activation == Activation::relu ? 0U : 1U);
  detail::put_u32(out, static_cast<std::uint32_t>(p.dim()));
  detail::put_u32(out, static_cast<std::uint32_t>(p.num_classes()));
  detail::put_u32(out, static_cast<std::uint32_t>(arch.hidden.size()));
  for (auto h : arch.hidden) detail::put_u32(out, static_cast<std::uint32_t>(h));
  detail::put_u64(out, p.weights().size());
  for (double w : p.weights()) detail::put_u64(out, std::bit_cast<std::uint64_t>(w));
  return out;
}

inline Predictor parse_model(std::string_view data) {
  detail::ByteReader r(data);
  if (r.bytes(kModelMagic.size()) != kModelMagic) throw FormatError(FormatErrc::bad_header, 0, "not a model file");
  const auto version = r.u32();
  if (version != kVersion) {
    throw FormatError(FormatErrc::version_mismatch, 0, "model file version " + std::to_string(version));
  }
  std::string id(r.bytes(r.u32()));
  const auto kind = r.u32();
  const auto act = r.u32();
  const auto dim = r.u32();
  const auto classes = r.u32();
  const auto n_hidden = r.u32();
  if (kind > 1 || act > 1) throw FormatError(FormatErrc::bad_header, 0, "unknown architecture descriptor");
  std::vector<std::size_t> hidden;
  for (std::uint32_t i = 0; i < n_hidden; ++i) hidden.push_back(r.u32());
  Architecture arch = kind == 0 ? Architecture::linear()
                                : Architecture::mlp(hidden, act == 0 ? Activation::relu : Activation::tanh);
  if (kind == 0 && n_hidden != 0) throw FormatError(FormatErrc::bad_header, 0, "linear model with hidden layers");
  const auto count = r.u64();
  if (count > data.size() / 8) throw FormatError(FormatErrc::malformed_line, 0, "truncated model file");
  Vector w(static_cast<std::size_t>(count));
  for (auto& v : w) v = std::bit_cast<double>(r.u64());
  if (!r.done()) throw FormatError(FormatErrc::malformed_line, 0, "trailing bytes in model file");
  return Predictor(std::move(id), std::move(arch), dim, static_cast<int>(classes), std::move(w));
}

inline void write_model(const Predictor& p, const std::filesystem::path& path) { write_file(path, format_model(p)); }
inline Predictor read_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

// ---------------------------------------------------------------------------
// Detection samples (CSV `tau,undetected`) and detection parameter files

inline std::vector<DetectionSample> parse_detection_samples(std::string_view content) {
  if (!content.empty() && content.back() == '\n') content.remove_suffix(1);
  const auto lines = split(content, '\n');
  if (lines.empty() || lines[0] != "tau,undetected") {
    throw FormatError(FormatErrc::bad_header, 1, "expected header 'tau,undetected'");
  }
  std::vector<DetectionSample> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 2) throw FormatError(FormatErrc::malformed_line, i + 1, std::string(lines[i]));
    const auto tau = parse_double(f[0]);
    if (!tau || !std::isfinite(*tau) || !(*tau > 0.0)) {
      throw FormatError(FormatErrc::malformed_number, i + 1, std::string(f[0]));
    }
    if (f[1] != "0" && f[1] != "1") throw FormatError(FormatErrc::malformed_number, i + 1, std::string(f[1]));
    out.push_back({*tau, f[1] == "1" ? 1 : 0});
  }
  return out;
}

inline std::string format_detection_samples(std::span<const DetectionSample> samples) {
  std::string s = "tau,undetected\n";
  for (const auto& d : samples) s += format_double(d.tau) + "," + std::to_string(d.undetected) + "\n";
  return s;
}

inline std::vector<DetectionSample> read_detection_samples(const std::filesystem::path& path) {
  return parse_detection_samples(read_file(path));
}

inline std::string format_logistic_fit(const LogisticFit& fit) {
  std::string s = "# advrisk detection v" + std::to_string(kVersion) + "\n";
  s += "# variant=logistic\n";
  s += "# beta0=" + format_double(fit.beta0) + "\n";
  s += "# beta1=" + format_double(fit.beta1) + "\n";
  s += "# log_likelihood=" + format_double(fit.log_likelihood) + "\n";
  s += "# iterations=" + std::to_string(fit.iterations) + "\n";
  return s;
}

inline LogisticFit parse_logistic_fit(std::string content) {
  const auto doc = parse_document(std::move(content), "detection");
  if (doc.header("variant") != "logistic") {
    throw FormatError(FormatErrc::bad_header, doc.header_line("variant"), "only logistic parameter files are supported");
  }
  auto number = [&](const std::string& key) {
    const auto v = parse_double(doc.header(key));
    if (!v || !std::isfinite(*v)) throw FormatError(FormatErrc::malformed_number, doc.header_line(key), key);
    return *v;
  };
  LogisticFit fit;
  fit.beta0 = number("beta0");
  fit.beta1 = number("beta1");
  fit.log_likelihood = number("log_likelihood");
  const auto it = parse_int<std::size_t>(doc.header("iterations"));
  if (!it) throw FormatError(FormatErrc::malformed_number, doc.header_line("iterations"), "iterations");
  fit.iterations = *it;
  fit.increasing = fit.beta1 < 0.0;
  return fit;
}

// CSV `tau,value` with ascending tau and non-increasing values.
inline DetectionFunction parse_detection_table(std::string_view content) {
  if (!content.empty() && content.back() == '\n') content.remove_suffix(1);
  const auto lines = split(content, '\n');
  if (lines.empty() || lines[0] != "tau,value") throw FormatError(FormatErrc::bad_header, 1, "expected 'tau,value'");
  std::vector<std::pair<double, double>> bps;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    const auto tau = f.size() == 2 ? parse_double(f[0]) : std::nullopt;
    const auto val = f.size() == 2 ? parse_double(f[1]) : std::nullopt;
    if (!tau || !val) throw FormatError(FormatErrc::malformed_number, i + 1, std::string(lines[i]));
    bps.emplace_back(*tau, *val);
  }
  try {
    return DetectionFunction::table(std::move(bps));
  } catch (const ConfigError& e) {
    throw FormatError(FormatErrc::malformed_line, 0, e.what());
  }
}

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { tsv, markdown };

struct ReportStyle {
  int probability_decimals = 4;
  int size_decimals = 6;
};

inline std::string emit_report(const SummaryTable& t, ReportFormat format, const ReportStyle& style = {}) {
  if (t.rows.empty()) throw ConfigError("report needs at least one row");
  const bool with_risk = t.rows.front().risk.has_value();
  std::vector<std::string> header{"Model", "P^dam"};
  for (double tau : t.taus) header.push_back("ASR(" + format_double(tau, 4) + ")");
  header.push_back("MPS");
  if (with_risk) header.push_back("Risk");

  auto cell = [&](const std::string& text, bool best) {
    if (!best) return text;
    return format == ReportFormat::markdown ? "**" + text + "**" : text + "*";
  };
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    auto flagged = [&](std::size_t col) { return !t.best.empty() && t.best[col][i]; };
    std::vector<std::string> cells{r.model, cell(format_fixed(r.pdam, style.probability_decimals), flagged(0))};
    for (std::size_t k = 0; k < t.taus.size(); ++k) {
      cells.push_back(cell(format_fixed(r.asr.at(k), style.probability_decimals), flagged(1 + k)));
    }
    cells.push_back(r.mps ? cell(format_fixed(*r.mps, style.size_decimals), flagged(1 + t.taus.size())) : "-");
    if (with_risk) cells.push_back(r.risk ? format_double(*r.risk, 6) : "-");
    rows.push_back(std::move(cells));
  }

  std::string out;
  auto join = [&](const std::vector<std::string>& cells) {
    std::string line;
    if (format == ReportFormat::markdown) {
      line = "|";
      for (const auto& c : cells) line += " " + c + " |";
    } else {
      for (std::size_t k = 0; k < cells.size(); ++k) line += (k ? "\t" : "") + cells[k];
    }
    return line + "\n";
  };
  out += join(header);
  if (format == ReportFormat::markdown) {
    std::string sep = "|";
    for (std::size_t k = 0; k < header.size(); ++k) sep += "---|";
    out += sep + "\n";
  }
  for (const auto& r : rows) out += join(r);
  return out;
}

// ---------------------------------------------------------------------------
// Curves and bands

// CSV `tau,value` plus a closing copy of the last point for step plots.
inline std::string format_curve(std::span<const CurvePoint> points) {
  std::string s = "tau,value\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i > 0 && !(points[i].tau > points[i - 1].tau)) throw ConfigError("curve breakpoints must be ascending");
    if (!(points[i].value >= 0.0 && points[i].value <= 1.0)) throw ConfigError("curve values must lie in [0, 1]");
    if (!std::isfinite(points[i].tau)) throw ConfigError("curve breakpoints must be finite");
  }
  for (const auto& p : points) s += format_double(p.tau) + "," + format_double(p.value) + "\n";
  if (!points.empty()) s += format_double(points.back().tau) + "," + format_double(points.back().value) + "\n";
  return s;
}

inline void emit_curve(std::span<const CurvePoint> points, const std::filesystem::path& path) {
  write_file(path, format_curve(points));
}

inline std::string format_bands(std::span<const BootstrapBand> bands) {
  std::string s = "metric,n,p05,p50,p95,excluded\n";
  for (const auto& b : bands) {
    for (const auto& p : b.points) {
      auto num = [](double v) { return std::isnan(v) ? std::string("nan") : format_double(v); };
      s += b.metric_name + ":" + b.model_id + "," + std::to_string(p.n) + "," + num(p.p05) + "," + num(p.p50) + "," +
           num(p.p95) + "," + std::to_string(p.excluded) + "\n";
    }
  }
  return s;
}

}  // namespace advrisk::io
