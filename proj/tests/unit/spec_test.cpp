#include <gtest/gtest.h>

#include <random>

#include "provega/spec.hpp"

using namespace provega;

namespace {

Json minimal_doc() {
  return Json::parse(R"({
    "data": {"values": [{"x": 1, "y": 2}]},
    "mark": "point",
    "provega": {"progression": {"chunking": {"type": "data",
      "reading": {"method": "ascending", "chunk_size": 2, "frequency": 250}}}}
  })");
}

Json full_doc() {
  return Json::parse(R"({
    "data": {"url": "points.csv"},
    "mark": "point",
    "encoding": {"x": {"field": "x", "type": "quantitative"}, "y": {"field": "y", "type": "quantitative"}},
    "provega": {
      "progression": {
        "chunking": {"type": "mixed",
                     "reading": {"method": "random", "chunk_size": 50, "frequency": 500, "seed": 9},
                     "processor": {"name": "kmeans", "k": 3, "x": "x", "y": "y"}},
        "control": {"pause": true, "stop": false, "step": true, "mode": "exploration",
                    "min_rendering_frequency": 330, "ack": {"enabled": true, "window": 2}},
        "monitoring": {"aliveness": true, "progress": true, "etc": true,
                       "quality": {"absolute_progress": true, "stability": "builtin", "certainty": {"field": "c"}},
                       "change": {"mark": true, "area": {"enabled": true, "highlight_duration": 900}}}
      },
      "visualization": {"visual_stability": false},
      "guidance": {"anything": [1, 2]}
    }
  })");
}

template <class E>
std::string error_path(const Json& doc) {
  try {
    parse_spec(doc);
  } catch (const E& e) {
    return e.path();
  }
  return "<no error>";
}

}  // namespace

TEST(Spec, MinimalDocumentGetsDefaults) {
  auto spec = parse_spec(minimal_doc());
  EXPECT_EQ(spec.progression.control.mode, ControlMode::monitoring);
  EXPECT_TRUE(spec.visualization.visual_stability);
  EXPECT_EQ(spec.progression.control.ack_window, 1u);
  EXPECT_FALSE(spec.progression.control.ack_flow_control);
  ASSERT_TRUE(spec.progression.chunking.reading);
  EXPECT_EQ(spec.progression.chunking.reading->chunk_size, 2u);
  EXPECT_EQ(spec.progression.chunking.reading->frequency_ms, 250u);
  EXPECT_EQ(spec.base_view["mark"], "point");
  EXPECT_FALSE(spec.base_view.contains("provega"));
}

TEST(Spec, MissingProvegaBlock) {
  Json doc = minimal_doc();
  doc.erase("provega");
  try {
    parse_spec(doc);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("provega block required"), std::string::npos);
  }
}

TEST(Spec, MixedKmeansResolvesAgainstRegistry) {
  Json doc = minimal_doc();
  doc["provega"]["progression"]["chunking"] = {{"type", "mixed"}, {"processor", {{"name", "kmeans"}, {"k", 3}}}};
  auto spec = parse_spec(doc);
  ASSERT_TRUE(spec.progression.chunking.processor);
  EXPECT_EQ(spec.progression.chunking.processor->name, "kmeans");
  EXPECT_EQ(spec.progression.chunking.processor->parameters["k"], 3);
  EXPECT_EQ(spec.progression.chunking.processor->parameters["x"], "x");
}

TEST(Spec, ProcessWithoutProcessor) {
  Json doc = minimal_doc();
  doc["provega"]["progression"]["chunking"]["type"] = "process";
  EXPECT_THROW(parse_spec(doc), MissingProcessorError);
}

TEST(Spec, UnknownProcessorNamesPath) {
  Json doc = minimal_doc();
  doc["provega"]["progression"]["chunking"]["processor"] = {{"name", "tsne"}};
  EXPECT_EQ(error_path<ValidationError>(doc), "provega.progression.chunking.processor.name");
}

TEST(Spec, SyntaxErrorOnMalformedText) { EXPECT_THROW(parse_spec(std::string_view("{\"provega\": ")), SyntaxError); }

TEST(Spec, UnknownKeyNamesPath) {
  Json doc = minimal_doc();
  doc["provega"]["progression"]["chunking"]["reading"]["speed"] = 3;
  EXPECT_EQ(error_path<ValidationError>(doc), "provega.progression.chunking.reading.speed");
}

TEST(Spec, WrongTypeAndBounds) {
  Json doc = minimal_doc();
  doc["provega"]["progression"]["chunking"]["reading"]["frequency"] = 0;
  EXPECT_EQ(error_path<ValidationError>(doc), "provega.progression.chunking.reading.frequency");
  doc = minimal_doc();
  doc["provega"]["progression"]["chunking"]["reading"]["method"] = "sideways";
  EXPECT_EQ(error_path<ValidationError>(doc), "provega.progression.chunking.reading.method");
  doc = minimal_doc();
  doc["provega"]["progression"]["chunking"]["reading"]["chunk_size"] = "big";
  EXPECT_EQ(error_path<ValidationError>(doc), "provega.progression.chunking.reading.chunk_size");
}

TEST(Spec, ReadingForbiddenForWebSocketSource) {
  Json doc = minimal_doc();
  doc["data"] = {{"url", "ws://localhost:9000/gen"}};
  EXPECT_EQ(error_path<ValidationError>(doc), "provega.progression.chunking.reading");
  doc["provega"]["progression"]["chunking"].erase("reading");
  auto spec = parse_spec(doc);
  EXPECT_FALSE(spec.progression.chunking.reading);
}

TEST(Spec, ExplorationRequiresStepping) {
  Json doc = minimal_doc();
  doc["provega"]["progression"]["control"] = {{"mode", "exploration"}, {"step", false}};
  EXPECT_EQ(error_path<ValidationError>(doc), "provega.progression.control.step");
}

TEST(Spec, RandomWithoutSeedWarns) {
  Json doc = minimal_doc();
  doc["provega"]["progression"]["chunking"]["reading"]["method"] = "random";
  auto spec = parse_spec(doc);
  ASSERT_EQ(spec.warnings.size(), 1u);
  EXPECT_EQ(spec.progression.chunking.reading->seed, 0u);
}

TEST(Spec, ExplicitValuesSurviveNormalization) {
  auto spec = parse_spec(full_doc());
  const auto& p = spec.progression;
  EXPECT_EQ(p.chunking.type, ChunkingType::mixed);
  EXPECT_EQ(p.chunking.reading->method, ReadingMethod::random);
  EXPECT_EQ(p.chunking.reading->chunk_size, 50u);
  EXPECT_EQ(p.chunking.reading->frequency_ms, 500u);
  EXPECT_EQ(p.chunking.reading->seed, 9u);
  EXPECT_FALSE(p.control.stop_enabled);
  EXPECT_EQ(p.control.mode, ControlMode::exploration);
  EXPECT_EQ(p.control.min_rendering_frequency_ms, 330u);
  EXPECT_TRUE(p.control.ack_flow_control);
  EXPECT_EQ(p.control.ack_window, 2u);
  EXPECT_TRUE(p.monitoring.aliveness);
  EXPECT_EQ(p.monitoring.quality.absolute_progress.kind, QualityBinding::Kind::builtin);
  EXPECT_EQ(p.monitoring.quality.relative_progress.kind, QualityBinding::Kind::off);
  EXPECT_EQ(p.monitoring.quality.certainty, QualityBinding::bound_to("c"));
  EXPECT_TRUE(p.monitoring.change.mark.enabled);
  EXPECT_EQ(p.monitoring.change.area.highlight_duration_ms, 900u);
  EXPECT_FALSE(spec.visualization.visual_stability);
  ASSERT_TRUE(spec.guidance);
  EXPECT_EQ((*spec.guidance)["anything"][1], 2);
}

TEST(Spec, RoundTripIsIdempotent) {
  for (const Json& doc : {minimal_doc(), full_doc()}) {
    auto once = parse_spec(doc);
    auto text = serialize_spec(once);
    auto twice = parse_spec(std::string_view(text));
    EXPECT_EQ(once, twice);
    EXPECT_EQ(text, serialize_spec(twice));
  }
}

// Mutates keys and values of valid documents; every result either parses or
// fails with a path-carrying error, never anything else.
TEST(Spec, MutatedKeyFuzzNeverCrashes) {
  std::mt19937_64 rng(1234);
  const std::vector<Json> junk = {Json(nullptr), Json(-1), Json(0), Json(3.5), Json("zzz"), Json::array(), Json::object(), Json(true)};
  std::size_t rejected = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    Json doc = trial % 2 ? full_doc() : minimal_doc();
    // Collect every object path under provega.
    std::vector<Json::json_pointer> objects;
    std::function<void(const Json&, Json::json_pointer)> walk = [&](const Json& j, Json::json_pointer p) {
      if (!j.is_object()) return;
      objects.push_back(p);
      for (const auto& [k, v] : j.items()) walk(v, p / k);
    };
    walk(doc["provega"], Json::json_pointer("/provega"));
    auto& target = doc[objects[rng() % objects.size()]];
    switch (rng() % 3) {
      case 0: target["bogus_" + std::to_string(rng() % 5)] = 1; break;
      case 1:
        if (!target.empty()) {
          auto it = target.begin();
          std::advance(it, static_cast<long>(rng() % target.size()));
          it.value() = junk[rng() % junk.size()];
        }
        break;
      case 2:
        if (!target.empty()) {
          auto it = target.begin();
          std::advance(it, static_cast<long>(rng() % target.size()));
          std::string key = it.key();
          Json v = it.value();
          target.erase(key);
          target[key + "_"] = v;
        }
        break;
    }
    try {
      parse_spec(doc);
    } catch (const ValidationError& e) {
      ++rejected;
      EXPECT_FALSE(e.path().empty()) << e.what();
    }
  }
  EXPECT_GT(rejected, 1000u);
}

TEST(Spec, DefaultSpecForSources) {
  Json values = Json::array();
  for (int i = 0; i < 500; ++i) values.push_back({{"v", i}});
  auto spec = default_spec_for(inline_source(values));
  EXPECT_EQ(spec.progression.chunking.reading->chunk_size, 5u);
  EXPECT_EQ(spec.progression.chunking.reading->frequency_ms, 250u);
  EXPECT_EQ(spec.progression.chunking.type, ChunkingType::data);

  auto small = default_spec_for(inline_source(Json::array({{{"v", 1}}, {{"v", 2}}, {{"v", 3}}})));
  EXPECT_EQ(small.progression.chunking.reading->chunk_size, 1u);

  auto file = default_spec_for(file_source("whatever.csv"));
  EXPECT_EQ(file.progression.chunking.reading->chunk_size, 1u);
  EXPECT_TRUE(file.progression.chunking.reading->chunk_size_auto);
  EXPECT_EQ(auto_chunk_size(1234), 13u);
}

TEST(Spec, EncodingsExtracted) {
  auto e = encodings_of(full_doc());
  EXPECT_EQ(e.x_field, "x");
  EXPECT_EQ(e.y_field, "y");
  EXPECT_FALSE(e.categorical);
  auto c = encodings_of(Json::parse(R"({"encoding": {"x": {"field": "k", "type": "nominal"}}})"));
  EXPECT_TRUE(c.categorical);
}
