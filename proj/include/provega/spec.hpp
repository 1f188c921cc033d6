#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "provega/config.hpp"
#include "provega/error.hpp"
#include "provega/processors.hpp"
#include "provega/source.hpp"
#include "provega/value.hpp"

namespace provega {

namespace detail {

// Cursor over one object of the `provega` tree. Every error names the full
// dotted path of the offending property.
class Node {
 public:
  Node(const Json& json, std::string path) : json_(json), path_(std::move(path)) {
    if (!json_.is_object()) throw ValidationError(path_, "expected an object");
  }

  std::string at(std::string_view key) const { return path_ + "." + std::string(key); }
  const std::string& path() const { return path_; }

  // Unknown keys inside `provega` are hard errors.
  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [key, _] : json_.items()) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end())
        throw ValidationError(at(key), "unknown property");
    }
  }

  const Json* get(std::string_view key) const {
    auto it = json_.find(std::string(key));
    return it == json_.end() ? nullptr : &*it;
  }

  std::optional<Node> child(std::string_view key) const {
    const Json* v = get(key);
    if (!v) return std::nullopt;
    return Node(*v, at(key));
  }

  std::optional<bool> boolean(std::string_view key) const {
    const Json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) throw ValidationError(at(key), "expected a boolean");
    return v->get<bool>();
  }

  std::optional<std::uint64_t> uint(std::string_view key, std::uint64_t min) const {
    const Json* v = get(key);
    if (!v || v->is_null()) return std::nullopt;
    return uint_value(*v, at(key), min);
  }

  std::optional<std::string> string(std::string_view key) const {
    const Json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) throw ValidationError(at(key), "expected a string");
    return v->get<std::string>();
  }

  template <class Enum>
  std::optional<Enum> choice(std::string_view key, std::initializer_list<std::pair<std::string_view, Enum>> options) const {
    auto s = string(key);
    if (!s) return std::nullopt;
    for (const auto& [name, value] : options)
      if (*s == name) return value;
    std::string allowed;
    for (const auto& [name, _] : options) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
    throw ValidationError(at(key), "expected one of {" + allowed + "}, got '" + *s + "'");
  }

  static std::uint64_t uint_value(const Json& v, const std::string& path, std::uint64_t min) {
    if (!v.is_number_integer()) throw ValidationError(path, "expected an integer");
    std::uint64_t u = 0;
    if (v.is_number_unsigned()) {
      u = v.get<std::uint64_t>();
    } else {
      auto i = v.get<std::int64_t>();
      if (i < 0) throw ValidationError(path, "must be >= " + std::to_string(min));
      u = static_cast<std::uint64_t>(i);
    }
    if (u < min) throw ValidationError(path, "must be >= " + std::to_string(min));
    return u;
  }

 private:
  const Json& json_;
  std::string path_;
};

inline QualityBinding parse_binding(const Json& v, const std::string& path) {
  if (v.is_boolean()) return v.get<bool>() ? QualityBinding::builtin() : QualityBinding::off();
  if (v.is_string()) {
    auto s = v.get<std::string>();
    if (s == "off") return QualityBinding::off();
    if (s == "builtin") return QualityBinding::builtin();
    if (s.empty()) throw ValidationError(path, "field name must not be empty");
    return QualityBinding::bound_to(std::move(s));
  }
  if (v.is_object()) {
    Node n(v, path);
    n.allow({"field"});
    auto f = n.string("field");
    if (!f || f->empty()) throw ValidationError(n.at("field"), "required");
    return QualityBinding::bound_to(*f);
  }
  throw ValidationError(path, "expected a boolean, \"builtin\", a field name or {\"field\": name}");
}

inline HighlightConfig parse_highlight(const Json& v, const std::string& path) {
  HighlightConfig h;
  if (v.is_boolean()) {
    h.enabled = v.get<bool>();
    return h;
  }
  Node n(v, path);
  n.allow({"enabled", "highlight_duration"});
  h.enabled = n.boolean("enabled").value_or(true);
  h.highlight_duration_ms = n.uint("highlight_duration", 0).value_or(h.highlight_duration_ms);
  return h;
}

inline ReadingConfig parse_reading(const Node& n, std::vector<std::string>& warnings) {
  n.allow({"method", "chunk_size", "frequency", "seed"});
  ReadingConfig r;
  r.method = n.choice<ReadingMethod>("method", {{"ascending", ReadingMethod::ascending},
                                                {"descending", ReadingMethod::descending},
                                                {"random", ReadingMethod::random}})
                 .value_or(r.method);
  if (const Json* cs = n.get("chunk_size"); cs && cs->is_string()) {
    if (cs->get<std::string>() != "auto") throw ValidationError(n.at("chunk_size"), "expected an integer or \"auto\"");
    r.chunk_size_auto = true;
  } else if (auto size = n.uint("chunk_size", 1)) {
    r.chunk_size = *size;
  } else {
    r.chunk_size_auto = true;
  }
  r.frequency_ms = n.uint("frequency", 1).value_or(r.frequency_ms);
  if (auto seed = n.uint("seed", 0)) {
    r.seed = *seed;
  } else if (r.method == ReadingMethod::random) {
    warnings.push_back(n.at("seed") + ": random reading without a seed; using 0");
  }
  return r;
}

inline ProcessorConfig parse_processor(const Json& v, const std::string& path) {
  Node n(v, path);
  auto name = n.string("name");
  if (!name) throw MissingProcessorError(n.at("name"), "processor name required");
  const auto* entry = find_processor(*name);
  if (!entry) throw ValidationError(n.at("name"), "unknown processor '" + *name + "'");
  return {*name, entry->normalize(v, path)};
}

}  // namespace detail

// Parses and normalizes a document. `base_dir` resolves relative data URLs
// when checking whether the input is complete or progressive.
inline ProvegaSpec parse_spec(const Json& document) {
  if (!document.is_object()) throw ValidationError("", "document must be an object");
  auto pv = document.find("provega");
  if (pv == document.end()) throw ValidationError("provega", "provega block required");

  ProvegaSpec spec;
  for (const auto& [key, value] : document.items())
    if (key != "provega") spec.base_view[key] = value;

  detail::Node root(*pv, "provega");
  root.allow({"progression", "visualization", "interaction", "guidance"});

  bool progressive_input = false;
  if (auto data = spec.base_view.find("data"); data != spec.base_view.end() && data->is_object()) {
    if (auto url = data->find("url"); url != data->end() && url->is_string())
      progressive_input = is_websocket_url(url->get<std::string>());
  }

  auto& prog = spec.progression;
  if (auto p = root.child("progression")) {
    p->allow({"chunking", "control", "monitoring"});

    if (auto c = p->child("chunking")) {
      c->allow({"type", "reading", "processor"});
      prog.chunking.type = c->choice<ChunkingType>("type", {{"data", ChunkingType::data},
                                                           {"process", ChunkingType::process},
                                                           {"mixed", ChunkingType::mixed}})
                               .value_or(ChunkingType::data);
      if (auto r = c->child("reading")) {
        if (progressive_input)
          throw ValidationError(r->path(), "not allowed with a WebSocket source; the generator owns chunking");
        prog.chunking.reading = detail::parse_reading(*r, spec.warnings);
      }
      if (const Json* proc = c->get("processor")) {
        prog.chunking.processor = detail::parse_processor(*proc, c->at("processor"));
      }
    }

    if (auto c = p->child("control")) {
      c->allow({"pause", "stop", "step", "mode", "min_rendering_frequency", "ack"});
      auto& ctl = prog.control;
      ctl.pause_enabled = c->boolean("pause").value_or(ctl.pause_enabled);
      ctl.stop_enabled = c->boolean("stop").value_or(ctl.stop_enabled);
      auto step = c->boolean("step");
      ctl.mode = c->choice<ControlMode>("mode", {{"monitoring", ControlMode::monitoring},
                                                 {"exploration", ControlMode::exploration}})
                     .value_or(ctl.mode);
      if (ctl.mode == ControlMode::exploration) {
        if (step && !*step) throw ValidationError(c->at("step"), "exploration mode requires stepping");
        ctl.step_enabled = true;
      } else {
        ctl.step_enabled = step.value_or(ctl.step_enabled);
      }
      ctl.min_rendering_frequency_ms = c->uint("min_rendering_frequency", 1);
      if (const Json* ack = c->get("ack")) {
        if (ack->is_boolean()) {
          ctl.ack_flow_control = ack->get<bool>();
        } else {
          detail::Node a(*ack, c->at("ack"));
          a.allow({"enabled", "window"});
          ctl.ack_flow_control = a.boolean("enabled").value_or(true);
          ctl.ack_window = a.uint("window", 1).value_or(ctl.ack_window);
        }
      }
    }

    if (auto m = p->child("monitoring")) {
      m->allow({"aliveness", "progress", "etc", "quality", "change"});
      auto& mon = prog.monitoring;
      mon.aliveness = m->boolean("aliveness").value_or(mon.aliveness);
      mon.progress = m->boolean("progress").value_or(mon.progress);
      mon.etc = m->boolean("etc").value_or(mon.etc);
      if (auto q = m->child("quality")) {
        q->allow({"absolute_progress", "relative_progress", "stability", "certainty"});
        auto bind = [&](std::string_view key, QualityBinding& out) {
          if (const Json* v = q->get(key)) out = detail::parse_binding(*v, q->at(key));
        };
        bind("absolute_progress", mon.quality.absolute_progress);
        bind("relative_progress", mon.quality.relative_progress);
        bind("stability", mon.quality.stability);
        bind("certainty", mon.quality.certainty);
      }
      if (auto ch = m->child("change")) {
        ch->allow({"mark", "area"});
        if (const Json* v = ch->get("mark")) mon.change.mark = detail::parse_highlight(*v, ch->at("mark"));
        if (const Json* v = ch->get("area")) mon.change.area = detail::parse_highlight(*v, ch->at("area"));
      }
    }
  }

  if (auto v = root.child("visualization")) {
    v->allow({"visual_stability"});
    spec.visualization.visual_stability = v->boolean("visual_stability").value_or(true);
  }
  if (const Json* i = root.get("interaction")) spec.interaction = *i;
  if (const Json* g = root.get("guidance")) spec.guidance = *g;

  auto& chunking = prog.chunking;
  if (chunking.type != ChunkingType::data && !chunking.processor) {
    throw MissingProcessorError("provega.progression.chunking.processor",
                                std::string("required for ") + std::string(to_string(chunking.type)) + " chunking");
  }
  if (!progressive_input && !chunking.reading) {
    ReadingConfig r;
    r.chunk_size_auto = true;
    chunking.reading = r;
  }
  return spec;
}

inline ProvegaSpec parse_spec(std::string_view text) {
  Json document;
  try {
    document = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SyntaxError(e.what());
  }
  return parse_spec(document);
}

inline ProvegaSpec load_spec_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_spec(std::string_view(ss.str()));
}

namespace detail {

inline Json binding_json(const QualityBinding& b) {
  switch (b.kind) {
    case QualityBinding::Kind::off: return false;
    case QualityBinding::Kind::builtin: return true;
    case QualityBinding::Kind::field: return Json{{"field", b.field}};
  }
  return false;
}

inline Json highlight_json(const HighlightConfig& h) {
  return Json{{"enabled", h.enabled}, {"highlight_duration", h.highlight_duration_ms}};
}

}  // namespace detail

// The normalized `provega` object with every property spelled out.
inline Json provega_json(const ProvegaSpec& spec) {
  const auto& p = spec.progression;
  Json chunking{{"type", to_string(p.chunking.type)}};
  if (p.chunking.reading) {
    const auto& r = *p.chunking.reading;
    Json reading{{"method", to_string(r.method)}};
    reading["chunk_size"] = r.chunk_size_auto ? Json("auto") : Json(r.chunk_size);
    reading["frequency"] = r.frequency_ms;
    reading["seed"] = r.seed;
    chunking["reading"] = std::move(reading);
  }
  if (p.chunking.processor) {
    Json proc{{"name", p.chunking.processor->name}};
    for (const auto& [k, v] : p.chunking.processor->parameters.items()) proc[k] = v;
    chunking["processor"] = std::move(proc);
  }

  const auto& c = p.control;
  Json control{{"pause", c.pause_enabled}, {"stop", c.stop_enabled}, {"step", c.step_enabled},
               {"mode", to_string(c.mode)}};
  if (c.min_rendering_frequency_ms) control["min_rendering_frequency"] = *c.min_rendering_frequency_ms;
  control["ack"] = Json{{"enabled", c.ack_flow_control}, {"window", c.ack_window}};

  const auto& m = p.monitoring;
  Json monitoring{{"aliveness", m.aliveness},
                  {"progress", m.progress},
                  {"etc", m.etc},
                  {"quality",
                   {{"absolute_progress", detail::binding_json(m.quality.absolute_progress)},
                    {"relative_progress", detail::binding_json(m.quality.relative_progress)},
                    {"stability", detail::binding_json(m.quality.stability)},
                    {"certainty", detail::binding_json(m.quality.certainty)}}},
                  {"change", {{"mark", detail::highlight_json(m.change.mark)},
                              {"area", detail::highlight_json(m.change.area)}}}};

  Json out{{"progression", {{"chunking", chunking}, {"control", control}, {"monitoring", monitoring}}},
           {"visualization", {{"visual_stability", spec.visualization.visual_stability}}}};
  if (spec.interaction) out["interaction"] = *spec.interaction;
  if (spec.guidance) out["guidance"] = *spec.guidance;
  return out;
}

// Host document with the normalized `provega` block appended.
inline Json to_document(const ProvegaSpec& spec) {
  Json doc = spec.base_view;
  doc["provega"] = provega_json(spec);
  return doc;
}

inline std::string serialize_spec(const ProvegaSpec& spec) { return to_document(spec).dump(2); }

// A runnable data-chunking spec for a bare source: ascending reading,
// chunk_size = ceil(n / 100) (recomputed at load when n is unknown), 250 ms.
inline ProvegaSpec default_spec_for(const DataSourceDescriptor& source) {
  ProvegaSpec spec;
  spec.base_view = Json{{"data", to_data_property(source)}, {"mark", "point"}};
  if (source.complete_input()) {
    ReadingConfig r;
    r.frequency_ms = 250;
    if (source.declared_row_count) {
      r.chunk_size = auto_chunk_size(*source.declared_row_count);
    } else {
      r.chunk_size = 1;
      r.chunk_size_auto = true;
    }
    spec.progression.chunking.reading = r;
  }
  return spec;
}

// Host x/y encoding fields, used for area change detection.
struct Encodings {
  std::optional<std::string> x_field;
  std::optional<std::string> y_field;
  bool categorical = false;  // either channel declared nominal/ordinal
};

inline Encodings encodings_of(const Json& base_view) {
  Encodings e;
  auto enc = base_view.find("encoding");
  if (enc == base_view.end() || !enc->is_object()) return e;
  auto channel = [&](const char* name, std::optional<std::string>& field) {
    auto ch = enc->find(name);
    if (ch == enc->end() || !ch->is_object()) return;
    if (auto f = ch->find("field"); f != ch->end() && f->is_string()) field = f->get<std::string>();
    if (auto t = ch->find("type"); t != ch->end() && t->is_string()) {
      auto type = t->get<std::string>();
      if (type == "nominal" || type == "ordinal") e.categorical = true;
    }
  };
  channel("x", e.x_field);
  channel("y", e.y_field);
  return e;
}

}  // namespace provega
