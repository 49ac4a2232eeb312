#include "support.hpp"

#include "wgcn/errors.hpp"

#include <doctest.h>

#include <set>
#include <sstream>

using namespace wgcn;
using namespace wgcn::testing;

namespace {

RawSeries parse(const std::string& text, const DatasetSchema& schema = DatasetSchema::danish(), GapPolicy gaps = {}) {
  std::istringstream in(text);
  return parse_csv(in, schema, "test.csv", gaps);
}

std::string csv(Hour start, Index hours, std::uint64_t seed = 1, DatasetKind kind = DatasetKind::danish) {
  SyntheticOptions o;
  o.kind = kind;
  o.start = start;
  o.hours = hours;
  o.seed = seed;
  return synthetic_csv(o);
}

// One variable, one city, values given per hour.
std::shared_ptr<RawSeries> line_series(Hour start, const std::vector<double>& values) {
  auto s = std::make_shared<RawSeries>();
  s->cities = {"a"};
  s->variables = {"w"};
  s->units = {"m/s"};
  s->values = Tensor(Shape{static_cast<Index>(values.size()), 1, 1});
  for (std::size_t i = 0; i < values.size(); ++i) {
    s->timestamps.push_back(start + static_cast<Hour>(i));
    s->values[static_cast<Index>(i)] = values[i];
  }
  return s;
}

std::shared_ptr<RawSeries> hourly_series(Hour start, Index hours) {
  return line_series(start, std::vector<double>(static_cast<std::size_t>(hours), 1.0));
}

}  // namespace

TEST_SUITE("data-pipeline") {
  TEST_CASE("timestamps") {
    CHECK(parse_timestamp("1970-01-01T00:00") == 0);
    CHECK(parse_timestamp("1970-01-02 01:00:00") == 25);
    CHECK(parse_timestamp("2010-01-01T00:00:00Z") == parse_timestamp("2010-01-01 00:00"));
    CHECK(format_timestamp(parse_timestamp("2019-03-31T23:00")) == "2019-03-31T23:00:00");
    CHECK_THROWS_AS(parse_timestamp("2019-02-30T00:00"), LoadError);
    CHECK_THROWS_AS(parse_timestamp("2019-01-01T00:30"), LoadError);
    CHECK_THROWS_AS(parse_timestamp("yesterday"), LoadError);
  }

  TEST_CASE("schemas") {
    const auto dk = DatasetSchema::danish();
    CHECK(dk.cities.size() == 5);
    CHECK(dk.variables.size() == 4);
    CHECK(dk.target_cities == std::vector<std::string>{"Esbjerg", "Odense", "Roskilde"});
    CHECK(dk.wind_unit() == "m/s");
    const auto nl = DatasetSchema::dutch();
    CHECK(nl.cities.size() == 7);
    CHECK(nl.variables.size() == 6);
    CHECK(nl.target_cities.size() == 7);
    CHECK(nl.wind_unit() == "0.1 m/s");
    std::set<std::string> vars(nl.variables.begin(), nl.variables.end());
    CHECK(vars.count("dew_point") == 1);
    CHECK(vars.count("rain_amount") == 1);
    CHECK(vars.count("pressure") == 1);
  }

  TEST_CASE("schema file") {
    TempDir dir("schema");
    write_file(dir / "s.schema",
               "kind = danish\ncities = A,B,C,D,E\nvariables = t,p,ws,wd\nunits = C,hPa,m/s,deg\n"
               "wind_variable = ws\ntarget_cities = C,E\n");
    const auto s = DatasetSchema::load(dir / "s.schema");
    CHECK(s.target_indices() == std::vector<Index>{2, 4});
    CHECK(s.wind_index() == 2);
    write_file(dir / "bad.schema", "kind = danish\ncities = A,B\nvariables = t,p,ws,wd\nunits = C,hPa,m/s,deg\n"
                                   "wind_variable = ws\ntarget_cities = A\n");
    CHECK_THROWS_AS(DatasetSchema::load(dir / "bad.schema"), ConfigError);
    write_file(dir / "typo.schema", "kind = danish\ncitys = A\n");
    CHECK_THROWS_AS(DatasetSchema::load(dir / "typo.schema"), ConfigError);
  }

  TEST_CASE("load a well-formed file") {
    const RawSeries s = parse(csv(parse_timestamp("2009-06-01T00:00"), 48));
    CHECK(s.length() == 48);
    CHECK(s.vertex_count() == 5);
    CHECK(s.variable_count() == 4);
    CHECK(s.filled_hours == 0);
    for (Index t = 1; t < s.length(); ++t) CHECK(s.timestamps[t] == s.timestamps[t - 1] + 1);
  }

  TEST_CASE("column order and extra columns do not matter") {
    const std::string text = "Aalborg.wind_speed,timestamp";
    CHECK_THROWS_AS(parse(text + "\n1,2009-01-01T00:00\n"), LoadError);  // timestamp must come first

    const auto schema = DatasetSchema::danish();
    std::string header = "timestamp,extra";
    std::vector<std::string> cols;
    for (auto it = schema.cities.rbegin(); it != schema.cities.rend(); ++it)
      for (const auto& v : schema.variables) cols.push_back(*it + "." + v);
    for (const auto& c : cols) header += "," + c;
    std::string row1 = "2009-01-01T00:00,xx", row2 = "2009-01-01T01:00,yy";
    for (std::size_t i = 0; i < cols.size(); ++i) {
      row1 += "," + std::to_string(i);
      row2 += "," + std::to_string(100 + i);
    }
    const RawSeries s = parse(header + "\n" + row1 + "\n" + row2 + "\n");
    // Roskilde is the last city in the schema but first in the file.
    CHECK(s.at(0, 4, 0) == 0.0);
    CHECK(s.at(1, 0, 3) == 100.0 + 19.0);
  }

  TEST_CASE("shuffled rows load identically") {
    SyntheticOptions o;
    o.start = parse_timestamp("2009-06-01T00:00");
    o.hours = 60;
    const RawSeries a = parse(synthetic_csv(o));
    o.shuffle_rows = true;
    const RawSeries b = parse(synthetic_csv(o));
    CHECK(a.timestamps == b.timestamps);
    CHECK(a.values == b.values);
  }

  TEST_CASE("forward fill") {
    SyntheticOptions o;
    o.start = parse_timestamp("2009-06-01T00:00");
    o.hours = 20;
    const RawSeries full = parse(synthetic_csv(o));
    o.drop_rows = {7};
    const RawSeries filled = parse(synthetic_csv(o));
    CHECK(filled.length() == 20);
    CHECK(filled.filled_hours == 1);
    for (Index v = 0; v < 5; ++v)
      for (Index c = 0; c < 4; ++c) {
        CHECK(filled.at(7, v, c) == full.at(6, v, c));
        CHECK(filled.at(8, v, c) == full.at(8, v, c));
      }

    o.drop_rows = {5, 6, 7};
    CHECK(parse(synthetic_csv(o)).filled_hours == 3);
    o.drop_rows = {5, 6, 7, 8};
    try {
      parse(synthetic_csv(o));
      FAIL("expected a gap error");
    } catch (const LoadError& e) {
      CHECK(std::string(e.what()).find("test.csv:7") != std::string::npos);
      CHECK(std::string(e.what()).find("4 missing hours") != std::string::npos);
    }
    GapPolicy strict{0};
    o.drop_rows = {7};
    CHECK_THROWS_AS(parse(synthetic_csv(o), DatasetSchema::danish(), strict), LoadError);
  }

  TEST_CASE("malformed files") {
    const std::string good = csv(parse_timestamp("2009-06-01T00:00"), 3);
    CHECK_THROWS_AS(parse(""), LoadError);
    CHECK_THROWS_AS(parse(good.substr(0, good.find('\n') + 1)), LoadError);  // header only
    // duplicate timestamp
    const auto second_line = good.substr(good.find('\n') + 1, good.find('\n', good.find('\n') + 1) - good.find('\n'));
    CHECK_THROWS_AS(parse(good + second_line), LoadError);
    // non-numeric value
    std::string bad = good;
    bad.replace(bad.rfind(',') + 1, std::string::npos, "abc\n");
    CHECK_THROWS_AS(parse(bad), LoadError);
    // missing column
    CHECK_THROWS_AS(parse(good, DatasetSchema::dutch()), LoadError);
    CHECK_THROWS_AS(load_csv("/nonexistent/data.csv", DatasetSchema::danish()), LoadError);
  }

  TEST_CASE("normalization statistics") {
    const SplitSpec split = SplitSpec::danish();
    auto s = line_series(split.test_start - 4, {0.0, 10.0, 5.0, 5.0, 50.0, -3.0});
    NormStats st = compute_norm_stats(*s, split, "w");
    CHECK(st.min[0] == 0.0);
    CHECK(st.max[0] == 10.0);

    SUBCASE("test rows do not influence the statistics") {
      auto altered = std::make_shared<RawSeries>(*s);
      altered->values[4] = 1e6;
      altered->values[5] = -1e6;
      const NormStats st2 = compute_norm_stats(*altered, split, "w");
      CHECK(st2.min == st.min);
      CHECK(st2.max == st.max);
    }
    SUBCASE("endpoints and no clamping") {
      const RawSeries n = normalize(*s, st);
      CHECK(n.values[0] == 0.0);
      CHECK(n.values[1] == 1.0);
      CHECK(n.values[4] == 5.0);
      CHECK(n.values[5] < 0.0);
    }
    SUBCASE("round trip") {
      Vector x(3);
      x << 0.3, 7.7, 12.0;
      Vector nx(3);
      for (Index i = 0; i < 3; ++i) nx[i] = normalize_wind(x[i], st);
      CHECK((denormalize_wind(nx, st) - x).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("constant variable maps to zero") {
      auto c = line_series(split.test_start - 3, {5.0, 5.0, 5.0});
      const NormStats cs = compute_norm_stats(*c, split, "w");
      CHECK(cs.min[0] == 5.0);
      CHECK(cs.max[0] == 5.0);
      const RawSeries n = normalize(*c, cs);
      CHECK(n.values == Tensor(Shape{3, 1, 1}));
    }
    SUBCASE("no training rows") {
      auto late = line_series(split.test_start, {1.0, 2.0});
      CHECK_THROWS_AS(compute_norm_stats(*late, split, "w"), ConfigError);
    }
  }

  TEST_CASE("windows") {
    CHECK(make_windows(hourly_series(0, 100), 30, 6, {0}, 0).size() == 65);
    CHECK(make_windows(hourly_series(0, 36), 30, 6, {0}, 0).size() == 1);
    CHECK(make_windows(hourly_series(0, 35), 30, 6, {0}, 0).empty());

    std::vector<double> ramp(50);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
    const auto w = make_windows(line_series(0, ramp), 10, 3, {0}, 0);
    REQUIRE(w.size() == 38);
    CHECK(w[0].anchor() == 9);
    CHECK(w[0].target_time() == 12);
    CHECK(w[0].y[0] == 12.0);
    const Tensor x = w[5].x();
    CHECK(x.shape() == Shape{1, 10, 1});
    CHECK(x[0] == 5.0);
    CHECK(x[9] == 14.0);
  }

  TEST_CASE("danish targets in city order") {
    const RawSeries raw = parse(csv(parse_timestamp("2009-06-01T00:00"), 40));
    const auto schema = DatasetSchema::danish();
    const auto series = std::make_shared<const RawSeries>(raw);
    const auto w = make_windows(series, 30, 6, schema.target_indices(), schema.wind_index());
    REQUIRE(w.size() == 5);
    CHECK(w[0].y.size() == 3);
    for (Index k = 0; k < 3; ++k) CHECK(w[0].y[k] == raw.at(35, 2 + k, schema.wind_index()));
    const Tensor x = w[0].x();
    CHECK(x.shape() == Shape{4, 30, 5});
    CHECK(x.at({1, 3, 4}) == raw.at(3, 4, 1));
  }

  TEST_CASE("chronological splits") {
    SUBCASE("window crossing into the test year is discarded") {
      const SplitSpec spec = SplitSpec::danish();
      const auto series = hourly_series(parse_timestamp("2009-12-31T00:00"), 72);
      const auto w = make_windows(series, 30, 6, {0}, 0);
      const auto s = split_samples(w, spec);
      for (const auto& x : s.train) CHECK(x.target_time() < spec.test_start);
      for (const auto& x : s.val) CHECK(x.target_time() < spec.test_start);
      for (const auto& x : s.test) CHECK(x.window_start() >= spec.test_start);
      CHECK(s.train.size() + s.val.size() + s.test.size() + s.discarded == w.size());
      // Windows starting 2009-12-31 with targets in 2010 all land in `discarded`.
      bool found = false;
      for (const auto& x : w)
        if (x.window_start() < spec.test_start && x.target_time() >= spec.test_start) found = true;
      CHECK(found);
      CHECK(s.discarded == 24);
    }
    SUBCASE("validation is the chronological tail") {
      SplitSpec spec = SplitSpec::danish();
      const auto series = hourly_series(parse_timestamp("2005-01-01T00:00"), 1000 + 35);
      const auto s = split_samples(make_windows(series, 30, 6, {0}, 0), spec);
      REQUIRE(s.train.size() == 900);
      REQUIRE(s.val.size() == 100);
      CHECK(s.val.front().start == 900);
      CHECK(s.train.back().anchor() < s.val.front().anchor());
    }
    SUBCASE("dutch test period starts at 2019-01-01 00:00") {
      const SplitSpec spec = SplitSpec::dutch();
      const auto series = hourly_series(parse_timestamp("2018-12-30T00:00"), 200);
      const auto s = split_samples(make_windows(series, 30, 2, {0}, 0), spec);
      REQUIRE(!s.test.empty());
      CHECK(format_timestamp(s.test.front().window_start()) == "2019-01-01T00:00:00");
    }
    SUBCASE("samples past the test end are dropped") {
      const SplitSpec spec = SplitSpec::danish();
      const auto series = hourly_series(spec.test_end - 50, 100);
      const auto s = split_samples(make_windows(series, 30, 6, {0}, 0), spec);
      for (const auto& x : s.test) CHECK(x.target_time() < spec.test_end);
    }
  }

  TEST_CASE("batching") {
    const auto series = hourly_series(0, 130 + 35);
    const auto samples = make_windows(series, 30, 6, {0}, 0);
    REQUIRE(samples.size() == 130);
    SUBCASE("sizes") {
      BatchIterator it(samples, 64, 3u);
      const auto b = it.next_epoch();
      REQUIRE(b.size() == 3);
      CHECK(b[0].size() == 64);
      CHECK(b[1].size() == 64);
      CHECK(b[2].size() == 2);
      std::set<std::size_t> all;
      for (const auto& batch : b) all.insert(batch.begin(), batch.end());
      CHECK(all.size() == 130);
      const Batch first = make_batch(samples, b[2]);
      CHECK(first.x.shape() == Shape{2, 1, 30, 1});
      CHECK(first.y.shape() == Shape{2, 1});
    }
    SUBCASE("same seed, same permutations; epochs differ") {
      BatchIterator a(samples, 64, 5u), b(samples, 64, 5u);
      const auto a1 = a.next_epoch(), a2 = a.next_epoch();
      CHECK(a1 == b.next_epoch());
      CHECK(a2 == b.next_epoch());
      CHECK(a1 != a2);
    }
    SUBCASE("unshuffled order is chronological") {
      BatchIterator it(samples, 64);
      Hour last = -1;
      for (const auto& batch : it.next_epoch())
        for (auto i : batch) {
          CHECK(samples[i].anchor() > last);
          last = samples[i].anchor();
        }
    }
    CHECK_THROWS_AS(BatchIterator(samples, 0), ConfigError);
  }

  TEST_CASE("prepared synthetic data") {
    const PreparedData d = small_danish(8, 2);
    CHECK(!d.samples.train.empty());
    CHECK(!d.samples.val.empty());
    CHECK(!d.samples.test.empty());
    CHECK(d.samples.val.size() == (d.samples.train.size() + d.samples.val.size()) / 10);
    CHECK(d.norm.min.size() == 4);
  }
}
