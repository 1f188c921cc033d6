#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "provega/data_source.hpp"

using namespace provega;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
  auto p = std::filesystem::temp_directory_path() / ("provega_ds_" + name);
  std::ofstream(p, std::ios::binary) << content;
  return p;
}

}  // namespace

TEST(Csv, ParsesTypesAndIds) {
  auto ds = csv::parse("a,b\n1,x\n2,y");
  ASSERT_EQ(ds.rows.size(), 2u);
  EXPECT_EQ(ds.types, (std::vector<ColumnType>{ColumnType::integer, ColumnType::string}));
  EXPECT_EQ(ds.rows[0].id, 0u);
  EXPECT_EQ(ds.rows[1].id, 1u);
  EXPECT_EQ(std::get<std::int64_t>(*ds.rows[1].columns.find("a")), 2);
  EXPECT_EQ(std::get<std::string>(*ds.rows[0].columns.find("b")), "x");
}

TEST(Csv, FloatPromotesWholeColumn) {
  auto ds = csv::parse("v\n1\n3.5\n7\n");
  EXPECT_EQ(ds.types[0], ColumnType::floating);
  for (const auto& row : ds.rows) EXPECT_TRUE(std::holds_alternative<double>(*row.columns.find("v")));
  EXPECT_EQ(std::get<double>(*ds.rows[2].columns.find("v")), 7.0);
}

TEST(Csv, QuotedFieldsAndCrlf) {
  auto ds = csv::parse("name,n\r\n\"a, \"\"b\"\"\",1\r\n\"multi\nline\",2\r\n");
  ASSERT_EQ(ds.rows.size(), 2u);
  EXPECT_EQ(std::get<std::string>(*ds.rows[0].columns.find("name")), "a, \"b\"");
  EXPECT_EQ(std::get<std::string>(*ds.rows[1].columns.find("name")), "multi\nline");
}

TEST(Csv, EmptyCellsAreNull) {
  auto ds = csv::parse("a,b\n1,\n,true\n");
  EXPECT_EQ(ds.types[1], ColumnType::boolean);
  EXPECT_TRUE(is_null(*ds.rows[0].columns.find("b")));
  EXPECT_TRUE(is_null(*ds.rows[1].columns.find("a")));
}

TEST(Csv, Errors) {
  EXPECT_THROW(csv::parse("a,b\n1\n"), FormatError);
  EXPECT_THROW(csv::parse("a\n\"open\n"), FormatError);
  EXPECT_THROW(csv::parse("a,a\n1,2\n"), FormatError);
  EXPECT_THROW(csv::parse("_id\n1\n"), FormatError);
  EXPECT_THROW(csv::parse("a,b\n"), EmptyDatasetError);
  try {
    csv::parse("a,b\n1,2\n3,4\n5\n");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.record(), 4u);
  }
}

TEST(Csv, TypeInferenceIsOrderIndependent) {
  std::string header = "i,f,s,b,m\n";
  std::vector<std::string> lines = {"1,1.5,x,true,1", "2,2,y,false,2.25", "-3,3e2,z,true,", "4,,w,,7"};
  auto reference = csv::parse(header + lines[0] + "\n" + lines[1] + "\n" + lines[2] + "\n" + lines[3] + "\n").types;
  std::mt19937 rng(5);
  for (int t = 0; t < 50; ++t) {
    std::shuffle(lines.begin(), lines.end(), rng);
    std::string text = header;
    for (const auto& l : lines) text += l + "\n";
    EXPECT_EQ(csv::parse(text).types, reference);
  }
}

TEST(DataSource, EmptyFileIsEmptyDataset) {
  auto p = write_temp("empty.csv", "");
  EXPECT_THROW(load_complete(file_source(p)), EmptyDatasetError);
}

TEST(DataSource, MissingFileIsIoError) {
  EXPECT_THROW(load_complete(file_source("/nonexistent/provega.csv")), IoError);
}

TEST(DataSource, IdsAreBijection) {
  std::string text = "v\n";
  for (int i = 0; i < 1000; ++i) text += std::to_string(i) + "\n";
  auto ds = load_complete(file_source(write_temp("bij.csv", text)));
  for (std::size_t i = 0; i < ds.rows.size(); ++i) EXPECT_EQ(ds.rows[i].id, i);
}

TEST(DataSource, InlineJsonValues) {
  auto ds = load_complete(inline_source(Json::parse(R"([{"a": 1, "b": "x"}, {"a": 2.5}])")));
  EXPECT_EQ(ds.header, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ds.types[0], ColumnType::floating);
  EXPECT_TRUE(is_null(*ds.rows[1].columns.find("b")));
}

TEST(DataSource, JsonFile) {
  auto ds = load_complete(file_source(write_temp("d.json", R"([{"x": 1}, {"x": 2}])")));
  EXPECT_EQ(ds.rows.size(), 2u);
}

TEST(DataSource, WebSocketHasNoCompleteForm) {
  EXPECT_THROW(load_complete(websocket_source("ws://localhost:1/x")), IoError);
}

TEST(DataSource, DescribeResolvesRelativeUrls) {
  auto d = describe_source(Json::parse(R"({"data": {"url": "points.csv"}})"), "/data/dir");
  ASSERT_TRUE(std::holds_alternative<FileSource>(d.kind));
  EXPECT_EQ(std::get<FileSource>(d.kind).path, std::filesystem::path("/data/dir/points.csv"));
  auto w = describe_source(Json::parse(R"({"data": {"url": "ws://h:1/g"}})"), "/");
  EXPECT_FALSE(w.complete_input());
}

TEST(ChunkStream, AssignsIdsInArrivalOrder) {
  ChunkStream s;
  for (std::uint64_t b = 0; b < 3; ++b) {
    std::vector<Columns> rows(10);
    for (auto& r : rows) r.set("v", std::int64_t{1});
    s.push_batch(b, rows);
  }
  s.push_end();
  RowId expected = 0;
  for (int b = 0; b < 3; ++b) {
    auto ev = s.pop();
    auto& batch = std::get<BatchEvent>(ev);
    EXPECT_EQ(batch.batch, static_cast<std::uint64_t>(b));
    for (const auto& r : batch.rows) EXPECT_EQ(r.id, expected++);
  }
  EXPECT_TRUE(std::holds_alternative<EndEvent>(s.pop()));
  EXPECT_EQ(expected, 30u);
}

TEST(ChunkStream, NewColumnRejected) {
  ChunkStream s;
  Columns a;
  a.set("x", 1.0);
  s.push_batch(0, {a});
  Columns b;
  b.set("zzz", 1.0);
  EXPECT_THROW(s.push_batch(1, {b}), ProtocolError);
  EXPECT_EQ(s.pending(), 1u);
}

TEST(ChunkStream, DisconnectClosesStream) {
  ChunkStream s;
  s.push_disconnect("gone");
  s.push_batch(0, {Columns{}});
  auto ev = s.pop();
  EXPECT_EQ(std::get<DisconnectEvent>(ev).reason, "gone");
  EXPECT_FALSE(s.try_pop());
}
