#include <gtest/gtest.h>

#include "schauder/core/kv_config.hpp"

using schauder::ConfigError;
using schauder::KeyValueConfig;

TEST(KeyValueConfig, ParsesTypedFields) {
  auto cfg = KeyValueConfig::parse(
      "# domain\n"
      "kind = ball   # trailing comment\n"
      "n = 3\n"
      "\n"
      "sides = 1, 2.5\n"
      "flag = yes\n");
  EXPECT_EQ(cfg.get_string("kind"), "ball");
  EXPECT_EQ(cfg.get_int("n"), 3);
  EXPECT_EQ(cfg.get_list("sides"), (std::vector<double>{1.0, 2.5}));
  EXPECT_TRUE(cfg.get_bool("flag", false));
  EXPECT_EQ(cfg.line_of("n"), 3);
  EXPECT_EQ(cfg.keys().front(), "kind");
  EXPECT_DOUBLE_EQ(cfg.get_double("missing", 7.0), 7.0);
}

TEST(KeyValueConfig, DiagnosticsNameLineAndField) {
  try {
    KeyValueConfig::parse("a = 1\nb = 2\na = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_EQ(e.field(), "a");
  }
  auto cfg = KeyValueConfig::parse("n = three\n");
  try {
    cfg.get_int("n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 1);
    EXPECT_NE(std::string(e.what()).find("[n]"), std::string::npos);
  }
  EXPECT_THROW(cfg.get_string("kind"), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse("no equals sign\n"), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse("n = 2.5\n").get_int("n"), ConfigError);
}

TEST(KeyValueConfig, TextRoundTrip) {
  auto cfg = KeyValueConfig::parse("x = 1\ny = a, b\n");
  cfg.set("z", "2");
  auto again = KeyValueConfig::parse(cfg.to_text());
  EXPECT_EQ(again.to_text(), cfg.to_text());
  EXPECT_EQ(again.keys().size(), 3u);
}

TEST(KeyValueConfig, SubsetStripsPrefixAndKeepsLines) {
  auto cfg = KeyValueConfig::parse("experiment = norms\ndomain.kind = ball\ndomain.r0 = 2\ndomainx = 1\n");
  auto dom = cfg.subset("domain.");
  EXPECT_EQ(dom.keys().size(), 2u);
  EXPECT_EQ(dom.get_string("kind"), "ball");
  EXPECT_EQ(dom.line_of("r0"), 3);
  EXPECT_TRUE(cfg.subset("nothing.").keys().empty());
}
