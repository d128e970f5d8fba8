// Copyright 2026 The dppkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dppkit/features.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include "json.hpp"
#include <sstream>

#include "dppkit/errors.hpp"
#include "dppkit/rng.hpp"

namespace dppkit {
namespace {

constexpr std::array<char, 4> kMagic = {'D', 'S', 'F', '1'};
constexpr std::size_t kHeaderBytes = 16;

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u32_le(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_finite(const RowMatrix& values) {
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (!std::isfinite(values(i, j))) {
        throw ValidationError(
            fmt::format("non-finite value at row {}, column {}", i, j));
      }
    }
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

// Accepts the same spellings as strtod for finite values, plus nan/inf so
// that those reach validation with a location instead of a parse error.
bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  // Trailing blank lines are tolerated; interior ones are not.
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

FeatureMatrix parse_dsf1(const std::string& bytes, const std::filesystem::path& path) {
  if (bytes.size() < kHeaderBytes) {
    throw FormatError(fmt::format("'{}': truncated DSF1 header", path.string()));
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t n = read_u32_le(p + 4);
  const std::uint32_t d = read_u32_le(p + 8);
  const unsigned flag = p[12];
  if (n == 0 || d == 0) {
    throw FormatError(fmt::format("'{}': DSF1 header declares an empty matrix ({} x {})",
                                  path.string(), n, d));
  }
  if (flag > 1 || p[13] != 0 || p[14] != 0 || p[15] != 0) {
    throw FormatError(fmt::format("'{}': malformed DSF1 flag/reserved bytes", path.string()));
  }
  const std::uint64_t expected = std::uint64_t{n} * d * 4;
  const std::uint64_t actual = bytes.size() - kHeaderBytes;
  if (actual != expected) {
    throw LengthMismatchError(fmt::format(
        "'{}': header declares {} x {} values ({} bytes) but payload has {} bytes",
        path.string(), n, d, expected, actual));
  }
  RowMatrix values(n, d);
  const unsigned char* q = p + kHeaderBytes;
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j, q += 4) {
      values(i, j) = static_cast<double>(std::bit_cast<float>(read_u32_le(q)));
    }
  }
  return FeatureMatrix(std::move(values));
}

FeatureMatrix parse_csv_features(const std::string& text, const std::filesystem::path& path) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw FormatError(fmt::format("'{}': empty feature file", path.string()));
  std::vector<double> flat;
  std::size_t d = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto cells = split_commas(lines[i]);
    if (i == 0) d = cells.size();
    if (cells.size() != d) {
      throw FormatError(fmt::format("'{}': line {} has {} values, expected {}",
                                    path.string(), i + 1, cells.size(), d));
    }
    for (std::size_t j = 0; j < d; ++j) {
      double v;
      if (!parse_double(cells[j], v)) {
        throw FormatError(fmt::format("'{}': line {} column {}: not a number: '{}'",
                                      path.string(), i + 1, j, cells[j]));
      }
      flat.push_back(v);
    }
  }
  const std::size_t n = lines.size();
  RowMatrix values(n, d);
  std::copy(flat.begin(), flat.end(), values.data());
  return FeatureMatrix(std::move(values));
}

RowMatrix sphere_rows(std::size_t n, std::size_t d, Rng& rng) {
  RowMatrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    do {
      sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double z = rng.normal();
        out(i, j) = z;
        sq += z * z;
      }
    } while (sq == 0.0);
    out.row(i) /= std::sqrt(sq);
  }
  return out;
}

}  // namespace

FeatureMatrix::FeatureMatrix(RowMatrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw ValidationError(fmt::format("feature matrix must be non-empty, got {} x {}",
                                      values_.rows(), values_.cols()));
  }
  check_finite(values_);
  normalized_ = rows_are_unit(values_);
}

bool rows_are_unit(const RowMatrix& values, double tol) {
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    if (std::abs(values.row(i).norm() - 1.0) > tol) return false;
  }
  return true;
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 4 && std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    return parse_dsf1(bytes, path);
  }
  return parse_csv_features(bytes, path);
}

void save_features(const FeatureMatrix& m, const std::filesystem::path& path) {
  std::string out;
  out.reserve(kHeaderBytes + m.rows() * m.cols() * 4);
  out.append(kMagic.begin(), kMagic.end());
  write_u32_le(out, static_cast<std::uint32_t>(m.rows()));
  write_u32_le(out, static_cast<std::uint32_t>(m.cols()));
  out.push_back(m.normalized() ? 1 : 0);
  out.append(3, '\0');
  const RowMatrix& v = m.values();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      write_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v(i, j))));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(fmt::format("cannot write '{}'", path.string()));
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

FeatureMatrix normalize_rows(const FeatureMatrix& m) {
  RowMatrix v = m.values();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double norm = v.row(i).norm();
    if (norm == 0.0) {
      throw DegenerateInputError(fmt::format("row {} is the zero vector", i));
    }
    v.row(i) /= norm;
  }
  return FeatureMatrix(std::move(v));
}

std::string_view to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::kHypersphere:
      return "hypersphere";
    case SynthKind::kClusteredMixture:
      return "clustered";
    case SynthKind::kDuplicated:
      return "duplicated";
  }
  return "?";
}

SynthKind parse_synth_kind(std::string_view name) {
  if (name == "hypersphere" || name == "sphere") return SynthKind::kHypersphere;
  if (name == "clustered" || name == "clustered-mixture") return SynthKind::kClusteredMixture;
  if (name == "duplicated") return SynthKind::kDuplicated;
  throw ValidationError(fmt::format("unknown synthetic kind '{}'", name));
}

void SynthSpec::validate() const {
  if (n < 1 || d < 1) {
    throw ValidationError(fmt::format("synth: n and d must be >= 1 (n={}, d={})", n, d));
  }
  if (kind == SynthKind::kClusteredMixture) {
    if (n_clusters < 1) throw ValidationError("synth: n_clusters must be >= 1");
    if (!(intra_cluster_scale >= 0.0) || !std::isfinite(intra_cluster_scale)) {
      throw ValidationError("synth: intra_cluster_scale must be finite and >= 0");
    }
  }
  if (kind == SynthKind::kDuplicated && dup_factor < 1) {
    throw ValidationError("synth: dup_factor must be >= 1");
  }
}

FeatureMatrix synthesize(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  switch (spec.kind) {
    case SynthKind::kHypersphere:
      return FeatureMatrix(sphere_rows(spec.n, spec.d, rng));
    case SynthKind::kClusteredMixture: {
      const RowMatrix centroids = sphere_rows(spec.n_clusters, spec.d, rng);
      RowMatrix out(spec.n, spec.d);
      for (std::size_t i = 0; i < spec.n; ++i) {
        const auto c = static_cast<Eigen::Index>(i % spec.n_clusters);
        double sq = 0.0;
        do {
          sq = 0.0;
          for (std::size_t j = 0; j < spec.d; ++j) {
            const double v = centroids(c, j) + spec.intra_cluster_scale * rng.normal();
            out(i, j) = v;
            sq += v * v;
          }
        } while (sq == 0.0);
        out.row(i) /= std::sqrt(sq);
      }
      return FeatureMatrix(std::move(out));
    }
    case SynthKind::kDuplicated: {
      const std::size_t base_n = (spec.n + spec.dup_factor - 1) / spec.dup_factor;
      const RowMatrix base = sphere_rows(base_n, spec.d, rng);
      RowMatrix out(spec.n, spec.d);
      for (std::size_t i = 0; i < spec.n; ++i) {
        out.row(i) = base.row(i / spec.dup_factor);
      }
      return FeatureMatrix(std::move(out));
    }
  }
  throw ValidationError("synth: unknown kind");
}

bool ScoreTable::has_column(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const std::vector<double>& ScoreTable::column(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) {
    throw ValidationError(fmt::format("score column '{}' not found", name));
  }
  return columns_[static_cast<std::size_t>(it - names_.begin())];
}

void ScoreTable::add_column(std::string name, std::vector<double> values) {
  if (name.empty()) throw ValidationError("score column name is empty");
  if (has_column(name)) {
    throw ValidationError(fmt::format("duplicate score column '{}'", name));
  }
  if (values.size() != n_rows_) {
    throw LengthMismatchError(fmt::format("score column '{}' has {} rows, expected {}",
                                          name, values.size(), n_rows_));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ValidationError(
          fmt::format("score column '{}' row {}: non-finite value", name, i));
    }
  }
  names_.push_back(std::move(name));
  columns_.push_back(std::move(values));
}

namespace {

ScoreTable parse_scores_csv(const std::string& text, const std::filesystem::path& path,
                            std::size_t n_rows) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw FormatError(fmt::format("'{}': empty score file", path.string()));
  const auto header = split_commas(lines[0]);
  if (header.empty() || header[0] != "index") {
    throw FormatError(fmt::format("'{}': header must start with 'index'", path.string()));
  }
  const std::size_t n_cols = header.size() - 1;
  for (std::size_t a = 1; a < header.size(); ++a) {
    for (std::size_t b = 1; b < a; ++b) {
      if (header[a] == header[b]) {
        throw ValidationError(
            fmt::format("'{}': duplicate score column '{}'", path.string(), header[a]));
      }
    }
  }
  const std::size_t data_rows = lines.size() - 1;
  if (data_rows != n_rows) {
    throw LengthMismatchError(fmt::format("'{}': {} score rows, expected {}",
                                          path.string(), data_rows, n_rows));
  }
  std::vector<std::vector<double>> cols(n_cols, std::vector<double>(n_rows));
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto cells = split_commas(lines[r + 1]);
    if (cells.size() != header.size()) {
      throw FormatError(fmt::format("'{}': line {} has {} cells, expected {}",
                                    path.string(), r + 2, cells.size(), header.size()));
    }
    double idx;
    if (!parse_double(cells[0], idx) || idx != static_cast<double>(r)) {
      throw FormatError(fmt::format("'{}': line {}: index must be {}, got '{}'",
                                    path.string(), r + 2, r, cells[0]));
    }
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (!parse_double(cells[c + 1], cols[c][r])) {
        throw FormatError(fmt::format("'{}': line {} column '{}': not a number: '{}'",
                                      path.string(), r + 2, header[c + 1], cells[c + 1]));
      }
    }
  }
  ScoreTable table(n_rows);
  for (std::size_t c = 0; c < n_cols; ++c) {
    table.add_column(std::string(header[c + 1]), std::move(cols[c]));
  }
  return table;
}

ScoreTable parse_scores_jsonl(const std::string& text, const std::filesystem::path& path,
                              std::size_t n_rows) {
  using ordered = nlohmann::ordered_json;
  const auto lines = split_lines(text);
  if (lines.size() != n_rows) {
    throw LengthMismatchError(fmt::format("'{}': {} score rows, expected {}",
                                          path.string(), lines.size(), n_rows));
  }
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    ordered obj;
    try {
      obj = ordered::parse(lines[r]);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(fmt::format("'{}': line {}: {}", path.string(), r + 1, e.what()));
    }
    if (!obj.is_object()) {
      throw FormatError(fmt::format("'{}': line {} is not an object", path.string(), r + 1));
    }
    std::size_t seen = 0;
    for (const auto& [key, value] : obj.items()) {
      if (key == "index") {
        if (!value.is_number() || value.get<double>() != static_cast<double>(r)) {
          throw FormatError(fmt::format("'{}': line {}: index must be {}", path.string(), r + 1, r));
        }
        continue;
      }
      if (!value.is_number()) {
        throw FormatError(fmt::format("'{}': line {} field '{}': not a number",
                                      path.string(), r + 1, key));
      }
      if (r == 0) {
        names.push_back(key);
        cols.emplace_back(n_rows);
      }
      const auto it = std::find(names.begin(), names.end(), key);
      if (it == names.end()) {
        throw FormatError(fmt::format("'{}': line {}: unexpected field '{}'",
                                      path.string(), r + 1, key));
      }
      cols[static_cast<std::size_t>(it - names.begin())][r] = value.get<double>();
      ++seen;
    }
    if (seen != names.size()) {
      throw FormatError(fmt::format("'{}': line {}: expected {} score fields, got {}",
                                    path.string(), r + 1, names.size(), seen));
    }
  }
  ScoreTable table(n_rows);
  for (std::size_t c = 0; c < names.size(); ++c) {
    table.add_column(names[c], std::move(cols[c]));
  }
  return table;
}

}  // namespace

ScoreTable load_scores(const std::filesystem::path& path, std::size_t n_rows) {
  const std::string text = read_file(path);
  const std::string ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".json") return parse_scores_jsonl(text, path, n_rows);
  return parse_scores_csv(text, path, n_rows);
}

void save_scores(const ScoreTable& table, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError(fmt::format("cannot write '{}'", path.string()));
  f << "index";
  for (const auto& name : table.names()) f << ',' << name;
  f << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    f << r;
    for (const auto& name : table.names()) f << fmt::format(",{}", table.column(name)[r]);
    f << '\n';
  }
  if (!f) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

}  // namespace dppkit
