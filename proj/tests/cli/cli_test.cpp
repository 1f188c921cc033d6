#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct Result {
  int status = -1;
  std::string out;
};

Result run(const std::string& args) {
  std::string cmd = std::string("'") + PROVEGA_CLI + "' " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  int rc = ::pclose(pipe);
  r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
}

std::vector<Json> lines(const fs::path& p) {
  std::vector<Json> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(Json::parse(line));
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("provega_cli_" + std::to_string(::getpid()) + "_" +
                                       ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  void write(const std::string& name, const std::string& text) { std::ofstream(dir / name) << text; }

  std::string spec(const std::string& url, const std::string& extra_progression = "") {
    return R"({"data":{"url":")" + url + R"("},"mark":"point",
      "encoding":{"x":{"field":"a","type":"quantitative"},"y":{"field":"b","type":"quantitative"}},
      "provega":{"progression":{"chunking":{"type":"data","reading":{"method":"ascending","chunk_size":3,"frequency":100}},
                 "monitoring":{"quality":{"absolute_progress":true}})" +
           extra_progression + "}}}";
  }

  fs::path dir;
};

TEST_F(Cli, RunWritesOneTraceLinePerStep) {
  std::string csv = "a,b\n";
  for (int i = 0; i < 10; ++i) csv += std::to_string(i) + "," + std::to_string(10 - i) + "\n";
  write("rows.csv", csv);
  write("spec.json", spec("rows.csv"));
  auto r = run("run --spec " + (dir / "spec.json").string() + " --trace " + (dir / "t.jsonl").string());
  ASSERT_EQ(r.status, 0);
  auto summary = Json::parse(r.out);
  EXPECT_EQ(summary["status"], "done");
  EXPECT_EQ(summary["rows"], 10);
  auto trace = lines(dir / "t.jsonl");
  ASSERT_EQ(trace.size(), 4u);
  EXPECT_EQ(summary["trace_lines"], 4);
  EXPECT_EQ(summary["absolute_progress"], 1.0);
}

TEST_F(Cli, SameSeedSameTrace) {
  std::string csv = "a,b\n";
  for (int i = 0; i < 50; ++i) csv += std::to_string(i * 7 % 13) + "," + std::to_string(i) + "\n";
  write("rows.csv", csv);
  write("spec.json", spec("rows.csv"));
  auto a = run("run --spec " + (dir / "spec.json").string() + " --seed 9");
  auto b = run("run --spec " + (dir / "spec.json").string() + " --seed 9");
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST_F(Cli, CorruptCsvIsDataErrorWithoutTrace) {
  write("rows.csv", "a,b\n1,2\n3\n");
  write("spec.json", spec("rows.csv"));
  auto r = run("run --spec " + (dir / "spec.json").string() + " --trace " + (dir / "t.jsonl").string());
  EXPECT_EQ(r.status, 2);
  EXPECT_FALSE(fs::exists(dir / "t.jsonl"));
}

TEST_F(Cli, MissingDataIsDataError) {
  write("spec.json", spec("absent.csv"));
  EXPECT_EQ(run("run --spec " + (dir / "spec.json").string()).status, 2);
}

TEST_F(Cli, InvalidSpecIsSpecError) {
  write("rows.csv", "a,b\n1,2\n");
  write("spec.json", spec("rows.csv", R"(,"bogus":1)"));
  EXPECT_EQ(run("run --spec " + (dir / "spec.json").string()).status, 1);
  write("broken.json", "{\"data\":");
  EXPECT_EQ(run("run --spec " + (dir / "broken.json").string()).status, 1);
}

TEST_F(Cli, GallerySubcommands) {
  auto list = run("gallery list");
  ASSERT_EQ(list.status, 0);
  for (const char* name : {"backend_demo", "density_data_chunking", "kmeans_mixed", "kmeans_process"})
    EXPECT_NE(list.out.find(name), std::string::npos) << name;
  ASSERT_EQ(run("gallery export kmeans_process --out " + (dir / "k").string()).status, 0);
  EXPECT_TRUE(fs::exists(dir / "k" / "spec.json"));
  EXPECT_TRUE(fs::exists(dir / "k" / "expected.json"));
  EXPECT_NE(run("gallery export nope --out " + (dir / "n").string()).status, 0);
}

TEST_F(Cli, ExportedBundleReproducesItsExpectedSummary) {
  ASSERT_EQ(run("gallery export kmeans_mixed --out " + (dir / "m").string()).status, 0);
  auto expected = Json::parse(std::ifstream(dir / "m" / "expected.json"));
  std::string args = "run --spec " + (dir / "m" / "spec.json").string();
  for (const auto& a : expected["run_args"]) {
    auto s = a.get<std::string>();
    args += " " + (fs::exists(dir / "m" / s) ? (dir / "m" / s).string() : s);
  }
  auto r = run(args);
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(Json::parse(r.out), expected["summary"]);
}

}  // namespace
