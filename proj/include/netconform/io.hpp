#ifndef NETCONFORM_IO_HPP
#define NETCONFORM_IO_HPP

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <fmt/core.h>

#include "netconform/error.hpp"
#include "netconform/experiments.hpp"
#include "netconform/graph.hpp"
#include "netconform/linalg.hpp"
#include "netconform/rng.hpp"

namespace netconform {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline std::string where(const fs::path& path, long line) { return fmt::format("{}:{}", path.string(), line); }

inline double parse_double(std::string_view text, const fs::path& path, long line) {
  text = trim(text);
  if (text.empty() || text == "NA" || text == "nan" || text == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end)
    fail(ErrorCode::parse, fmt::format("{}: cannot parse number '{}'", where(path, line), text));
  return value;
}

inline long parse_index(std::string_view text, const fs::path& path, long line) {
  text = trim(text);
  long value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || value < 0)
    fail(ErrorCode::parse, fmt::format("{}: cannot parse node index '{}'", where(path, line), text));
  return value;
}

/// Shortest decimal text that parses back to the same double.
inline std::string exact(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

}  // namespace detail

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Calls fn(line_number, line) for every line, 1-based, without the newline.
template <class Fn>
void for_each_line(const std::string& text, Fn fn) {
  long number = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++number;
    std::string_view line(text.data() + start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(number, line);
    start = end + 1;
  }
}

// ---------------------------------------------------------------------------
// Atomic writes
// ---------------------------------------------------------------------------

/// Hook invoked with the temporary path right before the final rename. Tests
/// install a throwing hook to simulate a crash between write and rename.
inline std::function<void(const fs::path&)>& before_rename_hook() {
  static std::function<void(const fs::path&)> hook;
  return hook;
}

inline void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path temp = path;
  temp += ".partial";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::io, fmt::format("cannot write '{}'", temp.string()));
    out << content;
    out.flush();
    if (!out) {
      out.close();
      fs::remove(temp);
      fail(ErrorCode::io, fmt::format("write to '{}' failed", temp.string()));
    }
  }
  try {
    if (before_rename_hook()) before_rename_hook()(temp);
    fs::rename(temp, path);
  } catch (...) {
    std::error_code ignored;
    fs::remove(temp, ignored);
    throw;
  }
}

// ---------------------------------------------------------------------------
// Dense CSV
// ---------------------------------------------------------------------------

struct DenseTable {
  std::vector<std::string> header;
  Matrix values;

  int column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    require(it != header.end(), ErrorCode::config, fmt::format("no column named '{}'", name));
    return static_cast<int>(it - header.begin());
  }
};

/// Comma-separated numeric matrix with one header row. Empty cells, NA and
/// nan read as NaN.
inline DenseTable parse_dense_csv(const std::string& text, const fs::path& origin = "<memory>") {
  DenseTable table;
  std::vector<std::vector<double>> rows;
  bool have_header = false;
  for_each_line(text, [&](long number, std::string_view line) {
    if (detail::trim(line).empty()) return;
    const auto fields = detail::split_fields(line, ',');
    if (!have_header) {
      for (auto f : fields) table.header.emplace_back(detail::trim(f));
      have_header = true;
      return;
    }
    if (fields.size() != table.header.size())
      fail(ErrorCode::parse, fmt::format("{}: expected {} fields, found {}", detail::where(origin, number),
                                         table.header.size(), fields.size()));
    std::vector<double> row;
    for (auto f : fields) row.push_back(detail::parse_double(f, origin, number));
    rows.push_back(std::move(row));
  });
  require(have_header, ErrorCode::parse, fmt::format("{}: missing header row", origin.string()));
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return table;
}

inline DenseTable read_dense_csv(const fs::path& path) { return parse_dense_csv(read_text_file(path), path); }

inline std::string format_dense_csv(const DenseTable& table) {
  require(static_cast<Eigen::Index>(table.header.size()) == table.values.cols(), ErrorCode::parameter,
          "header and matrix width differ");
  std::string out;
  for (std::size_t c = 0; c < table.header.size(); ++c) out += (c ? "," : "") + table.header[c];
  out += '\n';
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) out += (c ? "," : "") + detail::exact(table.values(r, c));
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Edge lists
// ---------------------------------------------------------------------------

/// Tab-separated "i<TAB>j[<TAB>weight]" rows with 0-based node indices; the
/// graph is undirected. Lines starting with '#' are comments. Node count is
/// `nodes` when given, otherwise one more than the largest index.
inline Graph parse_edge_list(const std::string& text, std::optional<int> nodes = std::nullopt,
                             const fs::path& origin = "<memory>") {
  struct Edge {
    long i, j;
    double w;
    long line;
  };
  std::vector<Edge> edges;
  long max_index = -1;
  for_each_line(text, [&](long number, std::string_view line) {
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') return;
    const auto fields = detail::split_fields(t, '\t');
    if (fields.size() != 2 && fields.size() != 3)
      fail(ErrorCode::parse, fmt::format("{}: expected 2 or 3 tab-separated fields", detail::where(origin, number)));
    Edge e{detail::parse_index(fields[0], origin, number), detail::parse_index(fields[1], origin, number),
           fields.size() == 3 ? detail::parse_double(fields[2], origin, number) : 1.0, number};
    if (e.i == e.j) fail(ErrorCode::parse, fmt::format("{}: self-loop on node {}", detail::where(origin, number), e.i));
    if (!(std::isfinite(e.w) && e.w >= 0.0))
      fail(ErrorCode::parse, fmt::format("{}: weight must be finite and non-negative", detail::where(origin, number)));
    max_index = std::max({max_index, e.i, e.j});
    edges.push_back(e);
  });
  const long n = nodes ? *nodes : max_index + 1;
  require(max_index < n, ErrorCode::parse,
          fmt::format("{}: node index {} exceeds node count {}", origin.string(), max_index, n));
  Matrix a = Matrix::Zero(n, n);
  for (const auto& e : edges) {
    const double existing = a(e.i, e.j);
    if (existing != 0.0 && existing != e.w)
      fail(ErrorCode::parse, fmt::format("{}: conflicting weights for edge ({}, {})", detail::where(origin, e.line), e.i, e.j));
    a(e.i, e.j) = a(e.j, e.i) = e.w;
  }
  return Graph(std::move(a));
}

inline Graph read_edge_list(const fs::path& path, std::optional<int> nodes = std::nullopt) {
  return parse_edge_list(read_text_file(path), nodes, path);
}

inline std::string format_edge_list(const Graph& graph) {
  std::string out = fmt::format("# nodes={}\n", graph.size());
  for (int i = 0; i < graph.size(); ++i)
    for (const auto& nb : graph.neighbors(i))
      if (nb.node > i) out += fmt::format("{}\t{}\t{}\n", i, nb.node, detail::exact(nb.weight));
  return out;
}

/// Reads the "# nodes=N" comment written by format_edge_list, if present.
inline std::optional<int> edge_list_node_count(const std::string& text) {
  const std::string key = "# nodes=";
  if (text.rfind(key, 0) != 0) return std::nullopt;
  const auto end = text.find('\n');
  return static_cast<int>(detail::parse_index(std::string_view(text).substr(key.size(), end - key.size()), "<header>", 1));
}

// ---------------------------------------------------------------------------
// Node datasets and splits
// ---------------------------------------------------------------------------

struct Splits {
  IndexSet train, calibration, test;
};

struct NodeDataset {
  Graph graph;
  Matrix x;
  std::vector<std::string> x_names;
  Vector y;  // real response, or class index for categorical data; NaN = unknown
  std::vector<std::string> categories;  // empty for real responses
  std::vector<std::string> node_ids;
  Splits splits;

  int size() const { return graph.size(); }

  void validate() const {
    const auto n = static_cast<Eigen::Index>(graph.size());
    require(x.rows() == n && y.size() == n, ErrorCode::parameter, "dataset blocks must have one row per node");
    require(static_cast<Eigen::Index>(x_names.size()) == x.cols(), ErrorCode::parameter, "one name per column");
    require(node_ids.empty() || static_cast<Eigen::Index>(node_ids.size()) == n, ErrorCode::parameter,
            "one id per node");
    std::vector<int> all = splits.train;
    all.insert(all.end(), splits.calibration.begin(), splits.calibration.end());
    all.insert(all.end(), splits.test.begin(), splits.test.end());
    std::sort(all.begin(), all.end());
    require(std::adjacent_find(all.begin(), all.end()) == all.end(), ErrorCode::parameter, "splits overlap");
    for (int i : all) require(i >= 0 && i < n, ErrorCode::parameter, "split index out of range");
  }
};

/// Requested split sizes, either absolute or as fractions of n.
struct SplitRequest {
  std::optional<std::array<int, 3>> sizes;
  std::optional<std::array<double, 3>> fractions;
};

/// Seeded uniform partition without replacement; each part is returned sorted.
inline Splits make_splits(int n, const SplitRequest& request, RngStream& rng) {
  require(request.sizes.has_value() != request.fractions.has_value(), ErrorCode::config,
          "give either split sizes or split fractions");
  std::array<int, 3> sizes{};
  if (request.sizes) {
    sizes = *request.sizes;
  } else {
    for (int k = 0; k < 3; ++k) {
      const double f = (*request.fractions)[static_cast<std::size_t>(k)];
      require(f >= 0.0 && f <= 1.0, ErrorCode::config, "split fractions must lie in [0, 1]");
      sizes[static_cast<std::size_t>(k)] = static_cast<int>(std::floor(f * n + 1e-9));
    }
  }
  for (int s : sizes) require(s >= 0, ErrorCode::config, "split sizes must be non-negative");
  require(static_cast<long>(sizes[0]) + sizes[1] + sizes[2] <= n, ErrorCode::config,
          fmt::format("split sizes {}+{}+{} exceed {} nodes", sizes[0], sizes[1], sizes[2], n));
  const auto s = random_split(n, sizes[0], sizes[1], sizes[2], rng);
  return {s.train, s.calibration, s.test};
}

/// nodes.csv (features then y) and edges.tsv in `dir`.
inline void save_node_dataset(const NodeDataset& data, const fs::path& dir) {
  data.validate();
  DenseTable table;
  table.header = data.x_names;
  table.header.push_back("y");
  table.values.resize(data.x.rows(), data.x.cols() + 1);
  table.values << data.x, data.y;
  write_file_atomic(dir / "nodes.csv", format_dense_csv(table));
  write_file_atomic(dir / "edges.tsv", format_edge_list(data.graph));
}

inline NodeDataset load_node_dataset(const fs::path& dir) {
  const auto table = read_dense_csv(dir / "nodes.csv");
  require(!table.header.empty() && table.header.back() == "y", ErrorCode::parse,
          "nodes.csv must end with a 'y' column");
  const std::string edges = read_text_file(dir / "edges.tsv");
  NodeDataset data{parse_edge_list(edges, static_cast<int>(table.values.rows()), dir / "edges.tsv"),
                   table.values.leftCols(table.values.cols() - 1),
                   std::vector<std::string>(table.header.begin(), table.header.end() - 1),
                   table.values.col(table.values.cols() - 1),
                   {},
                   {},
                   {}};
  data.validate();
  return data;
}

// ---------------------------------------------------------------------------
// Cora-format corpora
// ---------------------------------------------------------------------------

struct CoraOptions {
  std::optional<std::string> target_class;  // binary label: target vs rest
};

struct CoraLoad {
  NodeDataset dataset;          // undirected, deduplicated citation graph
  Matrix directed;              // directed[citing, cited] = 1
  std::vector<std::string> labels;  // raw label per node
  long skipped_citations = 0;   // rows naming an unknown id
  long self_citations = 0;
  long duplicate_citations = 0;  // repeated pairs after symmetrization
};

/// content rows: id<TAB>w_1 ... w_m<TAB>label; cites rows: cited<TAB>citing.
inline CoraLoad parse_cora(const std::string& content, const std::string& cites, const CoraOptions& options = {},
                           const fs::path& content_origin = "<content>", const fs::path& cites_origin = "<cites>") {
  CoraLoad out;
  std::unordered_map<std::string, int> index;
  std::vector<std::vector<double>> words;
  std::optional<std::size_t> width;
  for_each_line(content, [&](long number, std::string_view line) {
    if (detail::trim(line).empty()) return;
    const auto fields = detail::split_fields(line, '\t');
    if (fields.size() < 3)
      fail(ErrorCode::parse, fmt::format("{}: expected id, word indicators and label",
                                         detail::where(content_origin, number)));
    if (width && fields.size() != *width)
      fail(ErrorCode::parse, fmt::format("{}: expected {} fields, found {}", detail::where(content_origin, number),
                                         *width, fields.size()));
    width = fields.size();
    const std::string id(detail::trim(fields.front()));
    require(!id.empty(), ErrorCode::parse, fmt::format("{}: empty node id", detail::where(content_origin, number)));
    if (index.count(id))
      fail(ErrorCode::parse, fmt::format("{}: duplicate node id '{}'", detail::where(content_origin, number), id));
    index.emplace(id, static_cast<int>(out.dataset.node_ids.size()));
    out.dataset.node_ids.push_back(id);
    std::vector<double> row;
    for (std::size_t f = 1; f + 1 < fields.size(); ++f) {
      const double v = detail::parse_double(fields[f], content_origin, number);
      if (!std::isfinite(v))
        fail(ErrorCode::parse, fmt::format("{}: word indicator must be finite", detail::where(content_origin, number)));
      row.push_back(v);
    }
    words.push_back(std::move(row));
    out.labels.emplace_back(detail::trim(fields.back()));
  });
  const auto n = static_cast<Eigen::Index>(out.dataset.node_ids.size());
  require(n > 0, ErrorCode::parse, fmt::format("{}: no nodes", content_origin.string()));

  out.directed = Matrix::Zero(n, n);
  Matrix a = Matrix::Zero(n, n);
  for_each_line(cites, [&](long number, std::string_view line) {
    if (detail::trim(line).empty()) return;
    const auto fields = detail::split_fields(detail::trim(line), '\t');
    if (fields.size() != 2)
      fail(ErrorCode::parse, fmt::format("{}: expected cited<TAB>citing", detail::where(cites_origin, number)));
    const auto cited = index.find(std::string(detail::trim(fields[0])));
    const auto citing = index.find(std::string(detail::trim(fields[1])));
    if (cited == index.end() || citing == index.end()) {
      ++out.skipped_citations;
      return;
    }
    if (cited->second == citing->second) {
      ++out.self_citations;
      return;
    }
    out.directed(citing->second, cited->second) = 1.0;
    if (a(cited->second, citing->second) != 0.0) ++out.duplicate_citations;
    a(cited->second, citing->second) = a(citing->second, cited->second) = 1.0;
  });

  auto& data = out.dataset;
  data.graph = Graph(std::move(a));
  data.x.resize(n, static_cast<Eigen::Index>(words.front().size()));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < data.x.cols(); ++c) data.x(i, c) = words[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
  for (Eigen::Index c = 0; c < data.x.cols(); ++c) data.x_names.push_back(fmt::format("w{}", c));
  data.y.resize(n);
  if (options.target_class) {
    data.categories = {"other", *options.target_class};
    for (Eigen::Index i = 0; i < n; ++i) data.y(i) = out.labels[static_cast<std::size_t>(i)] == *options.target_class ? 1.0 : 0.0;
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& label = out.labels[static_cast<std::size_t>(i)];
      auto it = std::find(data.categories.begin(), data.categories.end(), label);
      if (it == data.categories.end()) it = data.categories.insert(data.categories.end(), label);
      data.y(i) = static_cast<double>(it - data.categories.begin());
    }
  }
  return out;
}

inline CoraLoad load_cora_format(const fs::path& content_path, const fs::path& cites_path,
                                 const CoraOptions& options = {}) {
  return parse_cora(read_text_file(content_path), read_text_file(cites_path), options, content_path, cites_path);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace detail {
inline std::string fixed(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.6f}", v);
}
}  // namespace detail

inline std::string format_report_csv(const std::vector<CoverageReport>& reports) {
  std::string out = "method,cell,coverage,ci_lo,ci_hi,mean_width,replicates\n";
  for (const auto& r : reports)
    out += fmt::format("{},{},{},{},{},{},{}\n", r.method, r.cell, detail::fixed(r.coverage),
                       detail::fixed(r.coverage_ci.lower), detail::fixed(r.coverage_ci.upper),
                       detail::fixed(r.mean_width), r.replicates);
  return out;
}

inline std::string format_curves_csv(const std::vector<CurveRow>& curves) {
  std::string out = "method,cell,z,coverage_smooth\n";
  for (const auto& c : curves)
    out += fmt::format("{},{},{},{}\n", c.method, c.cell, detail::fixed(c.z),
                       c.defined ? detail::fixed(c.coverage_smooth) : "nan");
  return out;
}

inline std::string format_records_csv(const std::vector<ConditionalRecord>& records) {
  std::string out = "method,cell,z_true,hit,width\n";
  for (const auto& r : records)
    out += fmt::format("{},{},{},{},{}\n", r.method, r.cell, detail::exact(r.z_true), r.hit ? 1 : 0,
                       detail::exact(r.width));
  return out;
}

}  // namespace netconform

#endif  // NETCONFORM_IO_HPP
