#include "support.hpp"

#include "wgcn/config.hpp"
#include "wgcn/errors.hpp"

#include <doctest.h>

using namespace wgcn;
using namespace wgcn::testing;

TEST_SUITE("config") {
  TEST_CASE("key-value files") {
    const auto kv = KeyValueFile::parse("# comment\n  a = 1 \n\nb=two words # trailing\nc =\n", "t");
    CHECK(kv.get("a") == "1");
    CHECK(kv.get("b") == "two words");
    CHECK(kv.get("c").empty());
    CHECK(kv.get_or("d", "x") == "x");
    CHECK_THROWS_AS(kv.get("d"), ConfigError);
    CHECK_THROWS_AS(kv.reject_unknown({"a", "b"}), ConfigError);
    CHECK_NOTHROW(kv.reject_unknown({"a", "b", "c"}));
    CHECK_THROWS_AS(KeyValueFile::parse("a = 1\na = 2\n", "t"), ConfigError);
    CHECK_THROWS_AS(KeyValueFile::parse("no equals sign\n", "t"), ConfigError);
  }

  TEST_CASE("value parsing") {
    CHECK(parse_int(" 42 ", "x") == 42);
    CHECK_THROWS_AS(parse_int("4.2", "x"), ConfigError);
    CHECK(parse_double("1e-3", "x") == 1e-3);
    CHECK_THROWS_AS(parse_double("fast", "x"), ConfigError);
    CHECK(parse_bool("true", "x"));
    CHECK_FALSE(parse_bool("0", "x"));
    CHECK_THROWS_AS(parse_bool("maybe", "x"), ConfigError);
    CHECK(split_list("16, 32,64") == std::vector<std::string>{"16", "32", "64"});
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 123456789.125})
      CHECK(parse_double(format_double(v), "x") == v);
  }

  TEST_CASE("run config file") {
    TempDir dir("cfg");
    std::filesystem::create_directories(dir / "sub");
    write_file(dir / "sub" / "run.cfg",
               "dataset = dutch\ndata = ../data/knmi.csv\nhorizon = 4\nlearning_rate = 0.0005\n"
               "block_channels = 8,8,8\ngamma_variant = true\n");
    const RunConfig c = RunConfig::from_file(dir / "sub" / "run.cfg");
    CHECK(c.train.dataset == DatasetKind::dutch);
    CHECK(c.data == (dir / "data" / "knmi.csv").lexically_normal());
    CHECK(c.train.horizon == 4);
    CHECK(c.train.learning_rate == 0.0005);
    CHECK(c.train.block_channels == std::vector<Index>{8, 8, 8});
    CHECK(c.train.gamma_variant);
    CHECK(c.train.batch_size == 64);
    CHECK(c.train.patience == 10);
    CHECK(c.entries().at("horizon") == "4");
    CHECK(c.entries().size() == RunConfig::keys().size());

    write_file(dir / "typo.cfg", "dataset = danish\nhorizn = 6\n");
    CHECK_THROWS_AS(RunConfig::from_file(dir / "typo.cfg"), ConfigError);
    write_file(dir / "nodata.cfg", "dataset = danish\n");
    CHECK_THROWS_AS(RunConfig::from_file(dir / "nodata.cfg").validate(), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_file(dir / "absent.cfg"), ConfigError);
  }

  TEST_CASE("overrides replace file values") {
    RunConfig c;
    c.set("horizon", "12");
    c.set("seed", "7");
    CHECK(c.train.horizon == 12);
    CHECK(c.train.seed == 7u);
    CHECK_THROWS_AS(c.set("seed", "-1"), ConfigError);
    CHECK_THROWS_AS(c.set("nonsense", "1"), ConfigError);
  }

  TEST_CASE("protocol horizons") {
    CHECK(protocol_horizons(DatasetKind::danish) == std::vector<Index>{6, 12, 18, 24});
    CHECK(protocol_horizons(DatasetKind::dutch) == std::vector<Index>{2, 4, 6, 8, 10});
  }

  TEST_CASE("sha256") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  }
}
