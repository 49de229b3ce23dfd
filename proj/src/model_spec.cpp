#include "posiv/model_spec.hpp"

#include <algorithm>

#include "posiv/error.hpp"

namespace posiv {

using nlohmann::json;

const std::vector<std::string>& edge_columns() {
  static const std::vector<std::string> cols{"outcome", "position", "relevance_score",
                                             "session_depth"};
  return cols;
}

const std::vector<std::string>& session_columns() {
  static const std::vector<std::string> cols{"invite_total", "n_top_spot", "n_bottom_spot"};
  return cols;
}

std::string to_string(Level level) { return level == Level::Edge ? "edge" : "session"; }

std::string to_string(InstrumentExpr expr) {
  switch (expr) {
    case InstrumentExpr::None: return "none";
    case InstrumentExpr::Arm: return "arm";
    case InstrumentExpr::ArmByReason: return "arm_x_reason";
  }
  return "none";
}

std::string to_string(Method method) {
  switch (method) {
    case Method::OLS: return "OLS";
    case Method::TwoSLS: return "2SLS";
    case Method::ILS: return "ILS";
  }
  return "OLS";
}

namespace {

[[noreturn]] void invalid(const ModelSpec& spec, const std::string& why) {
  throw Error(ErrorCode::InvalidSpec, "'" + spec.name + "': " + why);
}

template <typename T>
T parse_enum(const json& value, std::initializer_list<std::pair<const char*, T>> options,
             const char* field) {
  const auto text = value.get<std::string>();
  for (const auto& [label, v] : options) {
    if (text == label) return v;
  }
  throw Error(ErrorCode::InvalidSpec, std::string("bad ") + field + " '" + text + "'");
}

}  // namespace

void validate(const ModelSpec& spec) {
  if (spec.name.empty()) invalid(spec, "name is empty");
  const auto& allowed = spec.level == Level::Edge ? edge_columns() : session_columns();
  auto check_column = [&](const std::string& col) {
    if (std::ranges::find(allowed, col) == allowed.end()) {
      invalid(spec, "column '" + col + "' is not a " + to_string(spec.level) + "-level column");
    }
  };
  check_column(spec.outcome);
  for (const auto& c : spec.endogenous) check_column(c);
  for (const auto& c : spec.controls) check_column(c);

  std::vector<std::string> all = spec.endogenous;
  all.insert(all.end(), spec.controls.begin(), spec.controls.end());
  all.push_back(spec.outcome);
  auto sorted = all;
  std::ranges::sort(sorted);
  if (std::ranges::adjacent_find(sorted) != sorted.end()) {
    invalid(spec, "a column is used more than once");
  }

  const bool ols = spec.method == Method::OLS;
  if (ols != (spec.instruments == InstrumentExpr::None)) {
    invalid(spec, "OLS specs take no instruments and IV specs need them");
  }
  if (ols && !spec.endogenous.empty()) invalid(spec, "OLS specs list regressors as controls");
  if (!ols && spec.endogenous.empty()) invalid(spec, "IV specs need an endogenous column");
  if (spec.method == Method::ILS &&
      (spec.endogenous.size() != 1 || spec.instruments != InstrumentExpr::Arm)) {
    invalid(spec, "ILS needs one endogenous column and the single arm instrument");
  }
  if (spec.cluster != "user_id") invalid(spec, "cluster column must be user_id");
}

const std::vector<ModelSpec>& builtin_specs() {
  static const std::vector<ModelSpec> specs = [] {
    std::vector<ModelSpec> s;
    auto iv = [](std::string name, std::vector<std::string> endog, InstrumentExpr z,
                 std::vector<std::string> controls) {
      ModelSpec m;
      m.name = std::move(name);
      m.outcome = "outcome";
      m.endogenous = std::move(endog);
      m.instruments = z;
      m.controls = std::move(controls);
      m.method = Method::TwoSLS;
      return m;
    };
    auto ols = [](std::string name, std::vector<std::string> regressors) {
      ModelSpec m;
      m.name = std::move(name);
      m.outcome = "outcome";
      m.controls = std::move(regressors);
      m.method = Method::OLS;
      return m;
    };
    s.push_back(iv("spec1", {"position"}, InstrumentExpr::Arm, {}));
    s.push_back(iv("spec2", {"position"}, InstrumentExpr::Arm, {"relevance_score"}));
    s.back().preferred = "ads";
    s.push_back(ols("spec3", {"position", "relevance_score"}));
    s.push_back(iv("spec4", {"position"}, InstrumentExpr::ArmByReason, {}));
    s.push_back(iv("spec5", {"position"}, InstrumentExpr::ArmByReason, {"relevance_score"}));
    s.push_back(iv("spec6", {"position", "session_depth"}, InstrumentExpr::ArmByReason,
                   {"relevance_score"}));
    s.back().preferred = "pymk";
    s.push_back(ols("spec7", {"position", "session_depth", "relevance_score"}));
    s.push_back(iv("specA1", {"n_top_spot", "n_bottom_spot"}, InstrumentExpr::ArmByReason, {}));
    s.back().level = Level::Session;
    s.back().outcome = "invite_total";
    s.back().preferred = "pymk-session";
    s.push_back(ols("specA2", {"n_top_spot", "n_bottom_spot"}));
    s.back().level = Level::Session;
    s.back().outcome = "invite_total";
    for (const auto& m : s) validate(m);
    return s;
  }();
  return specs;
}

const ModelSpec& builtin_spec(const std::string& name) {
  for (const auto& s : builtin_specs()) {
    if (s.name == name) return s;
  }
  throw Error(ErrorCode::InvalidSpec, "no builtin spec named '" + name + "'");
}

json to_json(const ModelSpec& spec) {
  json j{{"name", spec.name},
         {"level", to_string(spec.level)},
         {"outcome", spec.outcome},
         {"endogenous", spec.endogenous},
         {"instruments", to_string(spec.instruments)},
         {"controls", spec.controls},
         {"cluster", spec.cluster},
         {"method", to_string(spec.method)}};
  j["preferred"] = spec.preferred ? json(*spec.preferred) : json(nullptr);
  return j;
}

ModelSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidSpec, "spec must be a JSON object");
  static const std::vector<std::string> known{"name",     "level",   "outcome",
                                              "endogenous", "instruments", "controls",
                                              "cluster",  "method",  "preferred"};
  for (const auto& [key, value] : j.items()) {
    if (std::ranges::find(known, key) == known.end()) {
      throw Error(ErrorCode::InvalidSpec, "unknown spec field '" + key + "'");
    }
  }
  for (const char* required : {"name", "outcome", "method"}) {
    if (!j.contains(required)) {
      throw Error(ErrorCode::InvalidSpec, std::string("missing spec field '") + required + "'");
    }
  }
  ModelSpec spec;
  try {
    spec.name = j.at("name").get<std::string>();
    spec.outcome = j.at("outcome").get<std::string>();
    spec.method = parse_enum<Method>(
        j.at("method"), {{"OLS", Method::OLS}, {"2SLS", Method::TwoSLS}, {"ILS", Method::ILS}},
        "method");
    if (j.contains("level")) {
      spec.level = parse_enum<Level>(j["level"], {{"edge", Level::Edge}, {"session", Level::Session}},
                                     "level");
    }
    if (j.contains("endogenous")) spec.endogenous = j["endogenous"].get<std::vector<std::string>>();
    if (j.contains("controls")) spec.controls = j["controls"].get<std::vector<std::string>>();
    if (j.contains("instruments")) {
      spec.instruments = parse_enum<InstrumentExpr>(
          j["instruments"],
          {{"none", InstrumentExpr::None},
           {"arm", InstrumentExpr::Arm},
           {"arm_x_reason", InstrumentExpr::ArmByReason}},
          "instruments");
    }
    if (j.contains("cluster")) spec.cluster = j["cluster"].get<std::string>();
    if (j.contains("preferred") && !j["preferred"].is_null()) {
      spec.preferred = j["preferred"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, e.what());
  }
  validate(spec);
  return spec;
}

ModelSpec parse_spec(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return spec_from_json(j);
}

}  // namespace posiv
