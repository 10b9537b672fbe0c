#include <gtest/gtest.h>

#include "mrgnn/graph_io.hpp"
#include "mrgnn/synthetic.hpp"
#include "test_helpers.hpp"

namespace mrgnn {
namespace {

using testing::TempDir;
using testing::write_file;

struct Files {
  TempDir dir;
  Files() {
    write_file(dir / "x.csv", "0.5,1\n-2,3e-1\n4,0\n");
    write_file(dir / "y.txt", "0\n1\n0\n");
    write_file(dir / "path.edges", "0 1\n1 2\n");
    write_file(dir / "none.edges", "");
  }
};

TEST(LoadGraph, PathRelationAndEmptyRelation) {
  Files f;
  const auto g = load_graph(f.dir / "x.csv", f.dir / "y.txt", {f.dir / "path.edges", f.dir / "none.edges"},
                            RatioSplit{0.4, 0.1, 1});
  EXPECT_EQ(g.num_nodes(), 3u);
  EXPECT_EQ(g.num_classes, 2);
  EXPECT_DOUBLE_EQ(g.features(1, 1), 0.3);
  ASSERT_EQ(g.num_relations(), 2u);
  EXPECT_EQ(g.relations[0].name(), "path");
  EXPECT_EQ(g.relations[0].degree(1), 2u);
  EXPECT_EQ(g.relations[1].num_edges(), 0u);
}

TEST(LoadGraph, OutOfRangeEdge) {
  Files f;
  write_file(f.dir / "bad.edges", "0 5\n");
  EXPECT_THROW(load_graph(f.dir / "x.csv", f.dir / "y.txt", {f.dir / "bad.edges"}, RatioSplit{}), ValidationError);
}

TEST(LoadGraph, MalformedLineReportsLineNumber) {
  Files f;
  write_file(f.dir / "bad.edges", "0 1\n1 two\n");
  try {
    load_graph(f.dir / "x.csv", f.dir / "y.txt", {f.dir / "bad.edges"}, RatioSplit{});
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadGraph, RaggedFeatureRow) {
  Files f;
  write_file(f.dir / "x.csv", "1,2\n3\n4,5\n");
  EXPECT_THROW(load_graph(f.dir / "x.csv", f.dir / "y.txt", {}, RatioSplit{}), ParseError);
}

TEST(LoadGraph, RowCountMismatchIsShapeError) {
  Files f;
  write_file(f.dir / "y.txt", "0\n1\n");
  EXPECT_THROW(load_graph(f.dir / "x.csv", f.dir / "y.txt", {}, RatioSplit{}), ShapeError);
}

TEST(LoadGraph, MissingFileIsIoError) {
  Files f;
  EXPECT_THROW(load_graph(f.dir / "nope.csv", f.dir / "y.txt", {}, RatioSplit{}), IoError);
}

TEST(LoadGraph, ExplicitSplitFiles) {
  Files f;
  write_file(f.dir / "tr", "0\n");
  write_file(f.dir / "va", "");
  write_file(f.dir / "te", "2\n1\n");
  const auto g = load_graph(f.dir / "x.csv", f.dir / "y.txt", {}, ExplicitSplit{f.dir / "tr", f.dir / "va", f.dir / "te"});
  EXPECT_EQ(g.split.train, (std::vector<NodeId>{0}));
  EXPECT_TRUE(g.split.val.empty());
  EXPECT_EQ(g.split.test, (std::vector<NodeId>{2, 1}));
}

TEST(SaveGraph, RoundTripIsExact) {
  SyntheticSpec spec;
  spec.num_nodes = 60;
  spec.feature_dim = 3;
  spec.relations = {{"u", 80, 0.7}, {"w", 0, 0.5}};
  spec.seed = 9;
  const auto g = generate_synthetic(spec);
  TempDir dir;
  const auto written = save_graph(g, dir.path());
  EXPECT_EQ(written.size(), 7u);
  EXPECT_TRUE(std::filesystem::exists(dir / "w.edges"));
  EXPECT_EQ(std::filesystem::file_size(dir / "w.edges"), 0u);
  const auto back = load_graph_dir(dir.path(), {"u", "w"});
  EXPECT_TRUE(back == g);
}

TEST(SaveGraph, RejectsUnsafeRelationName) {
  auto g = testing::tiny_graph(3, 1, 2, 2, 0);
  g.relations[0] = RelationAdjacency::from_edges("../x", 3, std::vector<Edge>{});
  TempDir dir;
  EXPECT_THROW(save_graph(g, dir.path()), ValidationError);
}

}  // namespace
}  // namespace mrgnn
