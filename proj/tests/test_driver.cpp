#include <gtest/gtest.h>

#include <sstream>

#include "awcm/driver.hpp"

namespace {

using namespace awcm;

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, DefaultsAndSedovPreset) {
  const auto m = parse_config("{}");
  EXPECT_EQ(m.problem, ProblemId::kAdvectionDiffusion);
  EXPECT_EQ(m.p, 6);
  const auto s = parse_config(R"({"problem": "sedov"})");
  EXPECT_EQ(s.n0, 16);
  EXPECT_EQ(s.p, 8);
  EXPECT_EQ(s.hi[0], 2.0);
  EXPECT_EQ(s.integrator, "rkf45");
  EXPECT_EQ(s.cap_policy, CapPolicy::kSaturate);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(config_error(R"({"bogus": 1})"), "bogus: unknown field");
  EXPECT_EQ(config_error(R"({"model": {"speed": 1}})"), "model.speed: unknown field");
  EXPECT_EQ(config_error(R"({"p": 5})").rfind("p: ", 0), 0u);
  EXPECT_EQ(config_error(R"({"p": 2})").rfind("p: ", 0), 0u);
  EXPECT_EQ(config_error(R"({"eps": -1})").rfind("eps: ", 0), 0u);
  EXPECT_EQ(config_error(R"({"problem": "sedov", "threshold_scales": [1]})").rfind("threshold_scales: ", 0), 0u);
  EXPECT_EQ(config_error(R"({"t_end": 0.1, "output": {"times": [0.2]}})").rfind("output.times: ", 0), 0u);
  EXPECT_EQ(config_error("{").rfind("config: ", 0), 0u);
  EXPECT_THROW(load_config("/nonexistent/awcm.json"), ConfigError);
}

TEST(Driver, LoglogSlope) {
  EXPECT_FALSE(loglog_slope({1e-3}, {2e-3}).has_value());
  const auto s = loglog_slope({1e-2, 1e-3, 1e-4}, {2e-2, 2e-3, 2e-4});
  ASSERT_TRUE(s.has_value());
  EXPECT_NEAR(*s, 1.0, 1e-12);
}

TEST(Driver, ZeroDurationRunReportsInitialState) {
  auto c = parse_config(R"({"n0": 8, "p": 4, "j_max_cap": 4, "eps": 1e-2, "t_end": 0})");
  RunOptions opt;
  opt.write_files = false;
  const auto rep = run(c, opt);
  ASSERT_TRUE(rep.ok) << rep.failure;
  EXPECT_EQ(rep.steps, 0);
  ASSERT_EQ(rep.outputs.size(), 1u);
  ASSERT_TRUE(rep.outputs[0].max_error.has_value());
  EXPECT_LT(*rep.outputs[0].max_error, 1e-12);  // points hold exact data
}

TEST(Driver, ShortModelRunStaysWithinTolerance) {
  auto c = parse_config(R"({"n0": 16, "p": 4, "j_max_cap": 4, "eps": 1e-2, "t_end": 0.05})");
  RunOptions opt;
  opt.write_files = false;
  const auto rep = run(c, opt);
  ASSERT_TRUE(rep.ok) << rep.failure;
  EXPECT_GT(rep.steps, 0);
  EXPECT_DOUBLE_EQ(rep.t_final, 0.05);
  EXPECT_LT(*rep.outputs.back().max_error, 10 * c.eps);
  std::ostringstream os;
  rep.write(os);
  EXPECT_NE(os.str().find("status=ok"), std::string::npos);
}

TEST(Driver, SingleEpsilonConvergenceHasUndefinedSlope) {
  auto c = parse_config(R"({"n0": 16, "p": 4, "j_max_cap": 4, "t_end": 0.02})");
  const auto table = converge(c, {1e-2}, {4});
  ASSERT_EQ(table.rows.size(), 1u);
  std::ostringstream os;
  table.write(os);
  EXPECT_NE(os.str().find("slope p=4 field=undefined derivative=undefined"), std::string::npos);
}

TEST(Driver, ConvergeRejectsSedov) {
  EXPECT_THROW(converge(parse_config(R"({"problem": "sedov"})"), {1e-2, 1e-3}, {8}), ConfigError);
}

}  // namespace
