#include "bgcon/dataset.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "bgcon/errors.hpp"
#include "bgcon/io.hpp"

namespace bgcon {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void expect_header(const std::vector<std::string>& got, const std::vector<std::string>& want,
                   const std::string& path) {
  if (got != want) {
    std::string joined;
    for (const auto& w : want) joined += (joined.empty() ? "" : ",") + w;
    throw ParseError(path, 1, "expected header '" + joined + "'");
  }
}

}  // namespace

int ConnectomeDataset::edge_index(int j, int k) const {
  if (j > k) std::swap(j, k);
  if (j < 0 || k >= J || (j == k && !self_edges)) return -1;
  // Edges are enumerated row by row over the upper triangle.
  const int before = self_edges ? j * J - j * (j - 1) / 2 : j * (J - 1) - j * (j - 1) / 2;
  return before + (self_edges ? k - j : k - j - 1);
}

std::vector<Edge> ConnectomeDataset::make_edges(int J, bool self_edges) {
  std::vector<Edge> out;
  for (int j = 0; j < J; ++j) {
    for (int k = self_edges ? j : j + 1; k < J; ++k) out.push_back({j, k});
  }
  return out;
}

ConnectomeDataset ConnectomeDataset::empty(int n, int J, int d, bool self_edges) {
  ConnectomeDataset data;
  data.n = n;
  data.J = J;
  data.self_edges = self_edges;
  data.edge_list = make_edges(J, self_edges);
  const std::size_t total = static_cast<std::size_t>(n) * data.edge_list.size();
  data.counts.assign(total, 0);
  data.lengths.assign(total, kNaN);
  data.log_lengths.assign(total, kNaN);
  data.Z = Eigen::MatrixXd::Zero(n, d);
  for (int i = 0; i < n; ++i) data.subject_ids.push_back("s" + std::to_string(i + 1));
  for (int j = 0; j < J; ++j) data.region_names.push_back("r" + std::to_string(j + 1));
  if (d != 4) {
    data.covariate_names.clear();
    for (int l = 0; l < d; ++l) data.covariate_names.push_back("z" + std::to_string(l + 1));
  }
  return data;
}

void ConnectomeDataset::set(int i, int e, std::int32_t count, double length) {
  const std::size_t o = obs(i, e);
  counts[o] = count;
  lengths[o] = count >= 1 ? length : kNaN;
  log_lengths[o] = count >= 1 ? std::log(length) : kNaN;
}

void ConnectomeDataset::validate() const {
  const std::size_t total = static_cast<std::size_t>(n) * edge_list.size();
  if (counts.size() != total || lengths.size() != total || log_lengths.size() != total) {
    throw InvariantError("observation arrays do not match n x edges");
  }
  if (Z.rows() != n) throw InvariantError("covariate rows do not match subject count");
  if (!Z.allFinite()) throw InvariantError("covariate matrix has missing values");
  for (int i = 0; i < n; ++i) {
    for (int e = 0; e < edges(); ++e) {
      const std::size_t o = obs(i, e);
      const auto where = [&] {
        return "subject " + subject_ids[i] + ", edge " + region_names[edge_list[e].a] + "-" +
               region_names[edge_list[e].b];
      };
      if (counts[o] < 0) throw InvariantError("negative count at " + where());
      const bool has_length = !std::isnan(lengths[o]);
      if (has_length != (counts[o] >= 1)) {
        throw InvariantError("length must be present exactly when count >= 1 at " + where());
      }
      if (has_length && !(lengths[o] > 0.0)) {
        throw InvariantError("non-positive mean length at " + where());
      }
    }
  }
}

ConnectomeDataset ConnectomeDataset::subset(const std::vector<int>& subjects) const {
  ConnectomeDataset out = *this;
  out.n = static_cast<int>(subjects.size());
  const int E = edges();
  const std::size_t total = static_cast<std::size_t>(out.n) * E;
  out.counts.assign(total, 0);
  out.lengths.assign(total, kNaN);
  out.log_lengths.assign(total, kNaN);
  out.Z.resize(out.n, Z.cols());
  out.subject_ids.clear();
  for (int r = 0; r < out.n; ++r) {
    const int i = subjects[r];
    out.subject_ids.push_back(subject_ids[i]);
    out.Z.row(r) = Z.row(i);
    for (int e = 0; e < E; ++e) {
      out.counts[out.obs(r, e)] = counts[obs(i, e)];
      out.lengths[out.obs(r, e)] = lengths[obs(i, e)];
      out.log_lengths[out.obs(r, e)] = log_lengths[obs(i, e)];
    }
  }
  return out;
}

std::size_t ConnectomeDataset::observed_lengths() const {
  std::size_t count = 0;
  for (auto c : counts) count += c >= 1 ? 1 : 0;
  return count;
}

ConnectomeDataset read_dataset(const std::string& edges_path, const std::string& covariates_path,
                               const IngestOptions& options) {
  for (const auto& p : {covariates_path, edges_path}) {
    if (!std::filesystem::exists(p)) throw IoError("input file not found: " + p);
  }

  // Covariates fix the subject order.
  const auto cov_lines = lines_of(io::read_file(covariates_path));
  if (cov_lines.empty()) throw ParseError(covariates_path, 1, "empty file");
  expect_header(io::split_csv(cov_lines[0]), {"subject", "mci", "ad", "male", "age"},
                covariates_path);
  std::vector<std::string> subjects;
  std::unordered_map<std::string, int> subject_index;
  std::vector<std::array<double, 4>> rows;
  for (std::size_t ln = 1; ln < cov_lines.size(); ++ln) {
    if (cov_lines[ln].empty()) continue;
    const auto f = io::split_csv(cov_lines[ln]);
    if (f.size() != 5) throw ParseError(covariates_path, ln + 1, "expected 5 fields");
    std::array<double, 4> row{};
    for (int c = 0; c < 4; ++c) {
      if (f[c + 1].empty() || f[c + 1] == "NA") {
        throw ParseError(covariates_path, ln + 1,
                         "missing covariate value for subject " + f[0] +
                             " (impute before ingestion)");
      }
      row[c] = io::parse_double(f[c + 1], covariates_path, ln + 1);
    }
    if (subject_index.count(f[0])) {
      throw ParseError(covariates_path, ln + 1, "duplicate subject " + f[0]);
    }
    subject_index[f[0]] = static_cast<int>(subjects.size());
    subjects.push_back(f[0]);
    rows.push_back(row);
  }

  struct RawEdge {
    std::string subject, a, b;
    long long count;
    double length;
    std::size_t line;
  };
  const auto edge_lines = lines_of(io::read_file(edges_path));
  if (edge_lines.empty()) throw ParseError(edges_path, 1, "empty file");
  expect_header(io::split_csv(edge_lines[0]),
                {"subject", "region_a", "region_b", "count", "mean_length"}, edges_path);
  std::vector<RawEdge> raw;
  std::vector<std::string> regions;
  std::unordered_map<std::string, int> region_index;
  for (std::size_t ln = 1; ln < edge_lines.size(); ++ln) {
    if (edge_lines[ln].empty()) continue;
    const auto f = io::split_csv(edge_lines[ln]);
    if (f.size() != 5) throw ParseError(edges_path, ln + 1, "expected 5 fields");
    RawEdge r{f[0], f[1], f[2], io::parse_int(f[3], edges_path, ln + 1), kNaN, ln + 1};
    if (r.count < 0) throw ParseError(edges_path, ln + 1, "negative count");
    if (!f[4].empty()) r.length = io::parse_double(f[4], edges_path, ln + 1);
    for (const auto& name : {r.a, r.b}) {
      if (!region_index.count(name)) {
        region_index[name] = static_cast<int>(regions.size());
        regions.push_back(name);
      }
    }
    raw.push_back(std::move(r));
  }

  ConnectomeDataset data =
      ConnectomeDataset::empty(static_cast<int>(subjects.size()), static_cast<int>(regions.size()),
                               4, options.self_edges);
  data.subject_ids = subjects;
  data.region_names = regions;
  for (int i = 0; i < data.n; ++i) {
    for (int c = 0; c < 4; ++c) data.Z(i, c) = rows[i][c];
  }
  if (options.center_age && data.n > 0) {
    data.age_center = data.Z.col(3).mean();
    data.Z.col(3).array() -= data.age_center;
  }

  std::vector<std::uint8_t> seen(static_cast<std::size_t>(data.n) * data.edges(), 0);
  for (const auto& r : raw) {
    const auto it = subject_index.find(r.subject);
    if (it == subject_index.end()) {
      throw ParseError(edges_path, r.line, "subject " + r.subject + " has no covariate row");
    }
    const int ja = region_index[r.a];
    const int jb = region_index[r.b];
    if (ja == jb && !options.self_edges) continue;
    const int e = data.edge_index(ja, jb);
    const std::size_t o = data.obs(it->second, e);
    if (seen[o]) {
      throw ParseError(edges_path, r.line,
                       "duplicate edge " + r.a + "-" + r.b + " for subject " + r.subject);
    }
    seen[o] = 1;
    if (r.count >= 1 && std::isnan(r.length)) {
      throw ParseError(edges_path, r.line, "count >= 1 requires a mean_length");
    }
    if (r.count == 0 && !std::isnan(r.length)) {
      throw ParseError(edges_path, r.line, "mean_length must be empty when count is 0");
    }
    if (r.count >= 1 && !(r.length > 0.0)) {
      throw ParseError(edges_path, r.line, "mean_length must be positive");
    }
    if (r.count > std::numeric_limits<std::int32_t>::max()) {
      throw ParseError(edges_path, r.line, "count too large");
    }
    data.set(it->second, e, static_cast<std::int32_t>(r.count), r.length);
  }
  for (int i = 0; i < data.n; ++i) {
    for (int e = 0; e < data.edges(); ++e) {
      if (!seen[data.obs(i, e)]) {
        throw InvariantError("missing edge " + data.region_names[data.edge_list[e].a] + "-" +
                             data.region_names[data.edge_list[e].b] + " for subject " +
                             data.subject_ids[i]);
      }
    }
  }
  data.validate();
  return data;
}

void write_edges_csv(const ConnectomeDataset& data, const std::string& path) {
  std::string out = "subject,region_a,region_b,count,mean_length\n";
  for (int i = 0; i < data.n; ++i) {
    for (int e = 0; e < data.edges(); ++e) {
      const std::size_t o = data.obs(i, e);
      out += data.subject_ids[i] + "," + data.region_names[data.edge_list[e].a] + "," +
             data.region_names[data.edge_list[e].b] + "," + std::to_string(data.counts[o]) + ",";
      if (data.counts[o] >= 1) out += io::format_double(data.lengths[o]);
      out += "\n";
    }
  }
  io::write_file_atomic(path, out);
}

void write_covariates_csv(const ConnectomeDataset& data, const std::string& path) {
  std::string out = "subject,mci,ad,male,age\n";
  for (int i = 0; i < data.n; ++i) {
    out += data.subject_ids[i];
    for (int c = 0; c < data.covariates(); ++c) {
      const double v = c == 3 ? data.Z(i, c) + data.age_center : data.Z(i, c);
      out += "," + io::format_double(v);
    }
    out += "\n";
  }
  io::write_file_atomic(path, out);
}

}  // namespace bgcon
