#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "netconform/io.hpp"

using namespace netconform;
namespace fs = std::filesystem;

namespace {

const fs::path fixtures{NETCONFORM_FIXTURES};

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("netconform_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::parameter;
}

}  // namespace

TEST(DenseCsv, ParsesHeaderAndMissingValues) {
  const auto t = parse_dense_csv("a,b\n1,2.5\nNA,\n");
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(t.values.rows(), 2);
  EXPECT_EQ(t.values(0, 1), 2.5);
  EXPECT_TRUE(std::isnan(t.values(1, 0)));
  EXPECT_TRUE(std::isnan(t.values(1, 1)));
  EXPECT_EQ(t.column("b"), 1);
  EXPECT_THROW(t.column("c"), Error);
}

TEST(DenseCsv, ErrorsCarryLineNumbers) {
  try {
    parse_dense_csv("a,b\n1,2\n3\n", "f.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse);
    EXPECT_NE(std::string(e.what()).find("f.csv:3"), std::string::npos) << e.what();
  }
  EXPECT_EQ(code_of([] { parse_dense_csv("a\nxyz\n"); }), ErrorCode::parse);
  EXPECT_EQ(code_of([] { parse_dense_csv(""); }), ErrorCode::parse);
}

TEST(DenseCsv, RoundTripIsBitExact) {
  DenseTable t;
  t.header = {"x", "y"};
  t.values.resize(2, 2);
  t.values << 0.1 + 0.2, 1.0 / 3.0, -1e-300, 123456789.123456789;
  const auto back = parse_dense_csv(format_dense_csv(t));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_EQ(back.values(i, j), t.values(i, j));
}

TEST(EdgeList, ParsesAndValidates) {
  const Graph g = parse_edge_list("# comment\n0\t1\n1\t2\t0.5\n", 4);
  EXPECT_EQ(g.size(), 4);
  EXPECT_EQ(g(1, 0), 1.0);
  EXPECT_EQ(g(2, 1), 0.5);
  EXPECT_EQ(parse_edge_list("0\t3\n").size(), 4);
  EXPECT_EQ(code_of([] { parse_edge_list("0\t0\n"); }), ErrorCode::parse);
  EXPECT_EQ(code_of([] { parse_edge_list("0\t1\t-1\n"); }), ErrorCode::parse);
  EXPECT_EQ(code_of([] { parse_edge_list("0\t5\n", 3); }), ErrorCode::parse);
  EXPECT_EQ(code_of([] { parse_edge_list("0 1\n"); }), ErrorCode::parse);
  EXPECT_EQ(code_of([] { parse_edge_list("0\t1\t1\n1\t0\t2\n"); }), ErrorCode::parse);
}

TEST(EdgeList, FormatRoundTripKeepsIsolatedNodes) {
  Matrix a = Matrix::Zero(5, 5);
  a(0, 3) = a(3, 0) = 0.25;
  const Graph g(a);
  const std::string text = format_edge_list(g);
  EXPECT_EQ(edge_list_node_count(text), 5);
  EXPECT_EQ(parse_edge_list(text, edge_list_node_count(text)).adjacency(), a);
}

TEST(NodeDataset, SaveLoadRoundTrip) {
  const fs::path dir = scratch_dir("dataset");
  Matrix a = Matrix::Zero(3, 3);
  a(0, 1) = a(1, 0) = 1.0;
  NodeDataset d{Graph(a), Matrix(3, 2), {"u", "v"}, Vector(3), {}, {}, {}};
  d.x << 0.1, -2.0, 1.0 / 7.0, 3.0, 5e-17, 8.0;
  d.y << 1.5, std::numeric_limits<double>::quiet_NaN(), -0.3;
  save_node_dataset(d, dir);
  const auto back = load_node_dataset(dir);
  EXPECT_EQ(back.x, d.x);
  EXPECT_EQ(back.x_names, d.x_names);
  EXPECT_EQ(back.y(0), d.y(0));
  EXPECT_TRUE(std::isnan(back.y(1)));
  EXPECT_EQ(back.graph.adjacency(), a);
  fs::remove_all(dir);
}

TEST(Splits, SizesFractionsAndDeterminism) {
  SplitRequest half;
  half.fractions = std::array<double, 3>{0.5, 0.5, 0.0};
  RngStream rng(1, 0);
  const auto s = make_splits(10, half, rng);
  EXPECT_EQ(s.train.size(), 5u);
  EXPECT_EQ(s.calibration.size(), 5u);
  EXPECT_EQ(s.test.size(), 0u);
  RngStream rng2(1, 0);
  EXPECT_EQ(make_splits(10, half, rng2).train, s.train);

  SplitRequest sizes;
  sizes.sizes = std::array<int, 3>{4, 4, 3};
  EXPECT_EQ(code_of([&] { make_splits(10, sizes, rng); }), ErrorCode::config);
  EXPECT_EQ(code_of([&] { make_splits(10, SplitRequest{}, rng); }), ErrorCode::config);
}

TEST(AtomicWrite, FailureBeforeRenameLeavesNothing) {
  const fs::path dir = scratch_dir("atomic");
  const fs::path target = dir / "out.csv";
  write_file_atomic(target, "old\n");
  before_rename_hook() = [](const fs::path&) { throw Error(ErrorCode::io, "simulated crash"); };
  EXPECT_THROW(write_file_atomic(target, "new\n"), Error);
  before_rename_hook() = nullptr;
  EXPECT_EQ(read_text_file(target), "old\n");
  EXPECT_FALSE(fs::exists(dir / "out.csv.partial"));
  write_file_atomic(target, "new\n");
  EXPECT_EQ(read_text_file(target), "new\n");
  fs::remove_all(dir);
}

TEST(Cora, TinyFixture) {
  const auto load = load_cora_format(fixtures / "tiny.content", fixtures / "tiny.cites");
  const auto& d = load.dataset;
  EXPECT_EQ(d.size(), 3);
  EXPECT_EQ(d.graph.edge_count(), 2u);
  EXPECT_EQ(d.x.cols(), 4);
  EXPECT_EQ(d.node_ids, (std::vector<std::string>{"p1", "p2", "p3"}));
  EXPECT_EQ(d.categories, (std::vector<std::string>{"Neural_Networks", "Theory"}));
  EXPECT_EQ(d.y(1), 1.0);
  // "p1<TAB>p2": p2 cites p1
  EXPECT_EQ(load.directed(1, 0), 1.0);
  EXPECT_EQ(load.directed(0, 1), 0.0);
  EXPECT_EQ(load.skipped_citations, 0);
}

TEST(Cora, UnknownSelfAndDuplicateCitations) {
  const auto load = load_cora_format(fixtures / "tiny.content", fixtures / "tiny_unknown.cites");
  EXPECT_EQ(load.skipped_citations, 1);
  EXPECT_EQ(load.self_citations, 1);
  EXPECT_EQ(load.duplicate_citations, 1);
  EXPECT_EQ(load.dataset.graph.edge_count(), 2u);
}

TEST(Cora, MalformedRowNamesLine) {
  try {
    load_cora_format(fixtures / "malformed.content", fixtures / "tiny.cites");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse);
    EXPECT_NE(std::string(e.what()).find("malformed.content:2"), std::string::npos) << e.what();
  }
}

TEST(Cora, DuplicateIdRejected) {
  try {
    load_cora_format(fixtures / "duplicate.content", fixtures / "tiny.cites");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate node id 'p1'"), std::string::npos) << e.what();
  }
}

TEST(Cora, TargetClassBinarizes) {
  CoraOptions opt;
  opt.target_class = "Neural_Networks";
  const auto load = load_cora_format(fixtures / "small.content", fixtures / "small.cites", opt);
  EXPECT_EQ(load.dataset.size(), 60);
  EXPECT_EQ(load.dataset.y.sum(), 19.0);

  // Edge count against an independent pass over the citation file.
  std::set<std::string> ids(load.dataset.node_ids.begin(), load.dataset.node_ids.end());
  std::set<std::pair<std::string, std::string>> pairs;
  std::ifstream in(fixtures / "small.cites");
  std::string a, b;
  while (in >> a >> b)
    if (a != b && ids.count(a) && ids.count(b)) pairs.insert(std::minmax(a, b));
  EXPECT_EQ(load.dataset.graph.edge_count(), pairs.size());
}

TEST(Reports, FixedPrecisionColumns) {
  CoverageReport r;
  r.method = "conformal";
  r.cell = "c";
  r.coverage = 0.9;
  r.coverage_ci = {0.85, 0.95};
  r.mean_width = infinity;
  r.replicates = 3;
  EXPECT_EQ(format_report_csv({r}),
            "method,cell,coverage,ci_lo,ci_hi,mean_width,replicates\nconformal,c,0.900000,0.850000,0.950000,inf,3\n");
  EXPECT_EQ(format_curves_csv({{"m", "c", 0.5, 0.0, false}}), "method,cell,z,coverage_smooth\nm,c,0.500000,nan\n");
}
