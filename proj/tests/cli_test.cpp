#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <sys/wait.h>

#include "donald/commands.hpp"
#include "test_support.hpp"

namespace donald {
namespace {

using testing::read_file;
using testing::TempDir;
using testing::write_states;

std::filesystem::path constant_input(const TempDir& dir, const std::string& name, std::size_t L = 4,
                                     std::size_t T = 6, std::size_t H = 8) {
  nlohmann::json meta = {{"layout", "LTH"}, {"model_name", "const"}};
  return write_states(dir / name, {L, T, H}, std::vector<double>(L * T * H, 0.3), &meta);
}

// Every hidden unit of token j carries j, so M[i][j] = j after the mean.
std::filesystem::path ramp_input(const TempDir& dir, const std::string& name, std::size_t L = 5,
                                 std::size_t T = 9, std::size_t H = 16) {
  std::vector<double> v(L * T * H);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < T; ++j)
      for (std::size_t h = 0; h < H; ++h) v[(i * T + j) * H + h] = double(j);
  std::vector<std::string> toks;
  for (std::size_t j = 0; j < T; ++j) toks.push_back("tok" + std::to_string(j));
  nlohmann::json meta = {{"layout", "LTH"}, {"model_name", "ramp"}, {"tokens", toks}};
  return write_states(dir / name, {L, T, H}, v, &meta);
}

std::filesystem::path random_input(const TempDir& dir, const std::string& name, unsigned seed,
                                   std::size_t L = 6, std::size_t T = 10, std::size_t H = 32,
                                   bool with_embedding = true) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  const std::size_t stored = L + (with_embedding ? 1 : 0);
  std::vector<double> v(stored * T * H);
  for (double& x : v) x = d(rng);
  nlohmann::json meta = {{"layout", "LTH"}, {"model_name", "rand"}, {"includes_embedding_output", with_embedding}};
  return write_states(dir / name, {stored, T, H}, v, &meta);
}

TEST(CmdAnalyze, ConstantInputFlagsEveryLayerAboveHalf) {
  TempDir dir;
  AnalyzeOptions opt;
  opt.input = constant_input(dir, "c.npy");
  opt.utilization_threshold = 0.55;
  opt.out = dir / "r.json";
  const auto printed = cmd_analyze(opt);
  const auto j = nlohmann::json::parse(read_file(opt.out));
  EXPECT_EQ(j["L"], 4);
  EXPECT_EQ(j["T"], 6);
  for (const auto& row : j["anisotropy"])
    for (double a : row) EXPECT_NEAR(a, 0.0, 1e-9);
  EXPECT_EQ(j["underutilized_layers"], (std::vector<int>{1, 2, 3, 4}));
  for (const auto& l : j["utilization"]["per_layer"]) EXPECT_NEAR(l["utilization"].get<double>(), 0.5, 1e-6);
  EXPECT_NE(printed.find("Mean     50.00"), std::string::npos) << printed;
}

TEST(CmdAnalyze, HorizontalRampFlagsNothing) {
  TempDir dir;
  AnalyzeOptions opt;
  opt.input = ramp_input(dir, "ramp.npy");
  opt.out = dir / "r.json";
  cmd_analyze(opt);
  const auto j = nlohmann::json::parse(read_file(opt.out));
  EXPECT_TRUE(j["underutilized_layers"].empty());
  for (const auto& l : j["utilization"]["per_layer"]) EXPECT_GE(l["utilization"].get<double>(), 0.99);
  for (const auto& row : j["principal_directions"])
    for (double a : row) EXPECT_NEAR(a, 0.0, 1e-6);
  EXPECT_EQ(j["tokens"][3], "tok3");
  EXPECT_EQ(j["model_name"], "ramp");
  EXPECT_EQ(j["parameters"]["normalization"], "row");
  EXPECT_EQ(j["parameters"]["sigma_grad"], 1.0);
  EXPECT_EQ(j["parameters"]["sigma_tensor"], 1.5);
}

TEST(CmdAnalyze, ReportKeysAndShapes) {
  TempDir dir;
  AnalyzeOptions opt;
  opt.input = random_input(dir, "x.npy", 1);
  opt.out = dir / "r.json";
  cmd_analyze(opt);
  const auto j = nlohmann::ordered_json::parse(read_file(opt.out));
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"model_name", "tokens", "L", "T", "parameters", "matrix", "anisotropy",
                                            "principal_directions", "utilization", "underutilized_layers"}));
  EXPECT_EQ(j["L"], 6);  // embedding output dropped
  for (const char* k : {"matrix", "anisotropy", "principal_directions"}) {
    ASSERT_EQ(j[k].size(), 6u);
    for (const auto& row : j[k]) EXPECT_EQ(row.size(), 10u);
  }
  for (const auto& row : j["principal_directions"])
    for (double a : row) {
      EXPECT_GE(a, 0.0);
      EXPECT_LT(a, std::numbers::pi);
    }
}

TEST(CmdAnalyze, ReportRoundTripsByteIdentical) {
  TempDir dir;
  AnalyzeOptions opt;
  opt.input = random_input(dir, "x.npy", 2);
  opt.out = dir / "r.json";
  cmd_analyze(opt);
  const auto text = read_file(opt.out);
  EXPECT_EQ(nlohmann::ordered_json::parse(text).dump(2) + "\n", text);
}

TEST(CmdAnalyze, TableMatchesReportSummary) {
  TempDir dir;
  AnalyzeOptions opt;
  opt.input = random_input(dir, "x.npy", 3);
  opt.out = dir / "r.json";
  const auto printed = cmd_analyze(opt);
  const auto j = nlohmann::json::parse(read_file(opt.out));
  EXPECT_NE(printed.find(fmt::format("Mean  {:>8.2f}", 100.0 * j["utilization"]["mean"].get<double>())),
            std::string::npos);
  EXPECT_NE(printed.find(fmt::format("SD  {:>8.2f}", 100.0 * j["utilization"]["std_dev"].get<double>())),
            std::string::npos);
  // Layers listed top-down.
  EXPECT_LT(printed.find("     6  "), printed.find("     1  "));
}

TEST(CmdAnalyze, ErrorPaths) {
  TempDir dir;
  AnalyzeOptions opt;
  opt.input = dir / "nope.npy";
  opt.out = dir / "r.json";
  try {
    cmd_analyze(opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotFound);
    EXPECT_EQ(exit_code_for(e.code()), kExitData);
  }
  opt.input = random_input(dir, "x.npy", 4);
  opt.out = dir / "no_such_dir" / "r.json";
  try {
    cmd_analyze(opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnwritableOutput);
  }
  opt.out = dir / "r.json";
  opt.utilization_threshold = 1.5;
  EXPECT_THROW(cmd_analyze(opt), Error);
}

TEST(CmdVisualize, TileCountAndNoEllipses) {
  TempDir dir;
  VisualizeOptions opt;
  opt.input = random_input(dir, "x.npy", 5);
  opt.out = dir / "f.svg";
  cmd_visualize(opt);
  auto svg = read_file(opt.out);
  auto count = [&](const std::string& n) {
    std::size_t c = 0;
    for (auto p = svg.find(n); p != std::string::npos; p = svg.find(n, p + 1)) ++c;
    return c;
  };
  EXPECT_EQ(count("class=\"tile\""), 60u);
  EXPECT_EQ(count("class=\"glyph\""), 60u);

  opt.plot.show_ellipses = false;
  cmd_visualize(opt);
  svg = read_file(opt.out);
  EXPECT_EQ(count("<ellipse"), 0u);
  EXPECT_EQ(count("<circle"), 0u);

  opt.plot.cell_size_px = 4;
  try {
    cmd_visualize(opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(exit_code_for(e.code()), kExitUsage);
  }
}

TEST(CmdCompare, SameFileHasZeroDeltas) {
  TempDir dir;
  CompareOptions opt;
  opt.input_a = opt.input_b = random_input(dir, "x.npy", 6);
  opt.highlight_a = opt.highlight_b = {2};
  opt.out = dir / "c.svg";
  const auto printed = cmd_compare(opt);
  std::istringstream lines(printed);
  std::string line;
  std::getline(lines, line);  // header
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    EXPECT_NE(line.find("+0.00"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 7);
}

TEST(CmdCompare, PerturbedColumnChangesUtilization) {
  TempDir dir;
  const std::size_t L = 6, T = 10, H = 16;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> d;
  std::vector<double> a(L * T * H);
  for (double& x : a) x = d(rng);
  auto b = a;
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t h = 0; h < H; ++h) b[(i * T + 4) * H + h] += 2.0;
  nlohmann::json meta = {{"layout", "LTH"}};
  CompareOptions opt;
  opt.input_a = write_states(dir / "a.npy", {L, T, H}, a, &meta);
  opt.input_b = write_states(dir / "b.npy", {L, T, H}, b, &meta);
  opt.highlight_a = opt.highlight_b = {4};
  opt.out = dir / "c.svg";
  cmd_compare(opt);

  AnalysisParams params;
  const auto ua = analyze(load_embedding_space(opt.input_a), params).utilization;
  const auto ub = analyze(load_embedding_space(opt.input_b), params).utilization;
  double total = 0.0;
  for (std::size_t i = 0; i < L; ++i) total += std::abs(ua.per_layer[i].utilization - ub.per_layer[i].utilization);
  EXPECT_GT(total, 1e-3);
  const auto svg = read_file(opt.out);
  std::size_t hl = 0;
  for (auto p = svg.find("class=\"highlight\""); p != std::string::npos; p = svg.find("class=\"highlight\"", p + 1)) ++hl;
  EXPECT_EQ(hl, 2u);
}

TEST(CmdCompare, OutOfRangeHighlightNamesIndex) {
  TempDir dir;
  CompareOptions opt;
  opt.input_a = random_input(dir, "a.npy", 8, 6, 10);
  opt.input_b = random_input(dir, "b.npy", 9, 6, 12);
  opt.highlight_b = {11};
  opt.out = dir / "c.svg";
  EXPECT_NO_THROW(cmd_compare(opt));  // differing token counts are fine
  opt.highlight_a = {10};
  try {
    cmd_compare(opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("10"), std::string::npos);
  }
}

#ifdef DONALD_CLI_PATH
int run(const std::string& args) {
  const int status = std::system((std::string(DONALD_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Executable, ExitCodes) {
  TempDir dir;
  const auto in = random_input(dir, "x.npy", 10).string();
  const auto out = (dir / "o").string();
  EXPECT_EQ(run("analyze " + in + " --out " + out + ".json"), 0);
  EXPECT_EQ(run("visualize " + in + " --out " + out + ".svg --highlight 1,2"), 0);
  EXPECT_EQ(run("compare " + in + " " + in + " --highlight 3 --out " + out + "2.svg"), 0);
  EXPECT_EQ(run("analyze " + (dir / "missing.npy").string() + " --out " + out + ".json"), 2);
  EXPECT_EQ(run("visualize " + in + " --cell-size 4 --out " + out + ".svg"), 1);
  EXPECT_EQ(run("analyze " + in + " --normalize sideways --out " + out + ".json"), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("compare " + in + " " + in + " --highlight 99 --out " + out + "2.svg"), 2);
  EXPECT_EQ(run("--help"), 0);
}
#endif

}  // namespace
}  // namespace donald
