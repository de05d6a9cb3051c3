#include "instasim/scenario_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace instasim::scene {

using nlohmann::json;

namespace {

const json& require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw SchemaError("missing field '" + where + key + "'");
  return obj.at(key);
}

template <typename T>
T get(const json& obj, const std::string& key, const std::string& where) {
  const json& v = require(obj, key, where);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw SchemaError("field '" + where + key + "' has the wrong type");
  }
}

const json& require_array(const json& obj, const std::string& key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_array()) throw SchemaError("field '" + where + key + "' must be an array");
  return v;
}

json pose_to_json(const AnchorPose& p) { return {{"x", p.position.x}, {"y", p.position.y}, {"heading", p.heading}}; }

AnchorPose pose_from_json(const json& j, const std::string& where) {
  return {{get<double>(j, "x", where), get<double>(j, "y", where)}, get<double>(j, "heading", where)};
}

}  // namespace

std::string scenario_to_json(const Scenario& s) {
  json doc;
  doc["meta"] = {{"dt", s.dt}, {"horizon", s.horizon}, {"seed", s.seed}};
  json polylines = json::array();
  for (const Polyline& p : s.polylines) {
    json vectors = json::array();
    for (const auto& v : p.vectors) vectors.push_back({v.start.x, v.start.y, v.end.x, v.end.y});
    polylines.push_back({{"type", to_string(p.element_type)}, {"anchor", pose_to_json(p.anchor)}, {"vectors", vectors}});
  }
  doc["polylines"] = polylines;
  json routes = json::array();
  for (const Route& r : s.routes) {
    routes.push_back({{"polyline_ids", r.polyline_ids}, {"corridor_halfwidth", r.corridor_halfwidth}});
  }
  doc["routes"] = routes;
  json agents = json::array();
  for (const AgentSpec& a : s.agents) {
    agents.push_back({{"width", a.features.width},
                      {"length", a.features.length},
                      {"speed", a.features.speed},
                      {"speed_limit", a.features.speed_limit},
                      {"vru", a.features.vru},
                      {"pose", pose_to_json(a.pose)},
                      {"route_id", a.route_id}});
  }
  doc["agents"] = agents;
  json expert = json::array();
  for (const auto& traj : s.expert) {
    json steps = json::array();
    for (const ExpertStep& e : traj) {
      steps.push_back({e.pose.position.x, e.pose.position.y, e.pose.heading, e.speed, e.accel, e.steer});
    }
    expert.push_back(steps);
  }
  doc["expert"] = expert;
  return doc.dump();
}

Scenario scenario_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
  Scenario s;
  const json& meta = require(doc, "meta", "");
  s.dt = get<double>(meta, "dt", "meta.");
  s.horizon = get<int>(meta, "horizon", "meta.");
  s.seed = get<std::uint64_t>(meta, "seed", "meta.");

  const json& polylines = require_array(doc, "polylines", "");
  for (std::size_t i = 0; i < polylines.size(); ++i) {
    const std::string where = "polylines[" + std::to_string(i) + "].";
    const json& pj = polylines[i];
    Polyline p;
    try {
      p.element_type = element_type_from_string(get<std::string>(pj, "type", where));
    } catch (const std::invalid_argument& e) {
      throw SchemaError("field '" + where + "type': " + e.what());
    }
    p.anchor = pose_from_json(require(pj, "anchor", where), where + "anchor.");
    const json& vectors = require_array(pj, "vectors", where);
    for (std::size_t l = 0; l < vectors.size(); ++l) {
      const json& v = vectors[l];
      if (!v.is_array() || v.size() != 4) {
        throw SchemaError("field '" + where + "vectors[" + std::to_string(l) + "]' must hold 4 numbers");
      }
      p.vectors.push_back({{v[0].get<double>(), v[1].get<double>()}, {v[2].get<double>(), v[3].get<double>()}, p.element_type});
    }
    s.polylines.push_back(std::move(p));
  }

  const json& routes = require_array(doc, "routes", "");
  for (std::size_t i = 0; i < routes.size(); ++i) {
    const std::string where = "routes[" + std::to_string(i) + "].";
    Route r;
    r.polyline_ids = get<std::vector<int>>(routes[i], "polyline_ids", where);
    r.corridor_halfwidth = get<double>(routes[i], "corridor_halfwidth", where);
    s.routes.push_back(std::move(r));
  }

  const json& agents = require_array(doc, "agents", "");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string where = "agents[" + std::to_string(i) + "].";
    const json& aj = agents[i];
    AgentSpec a;
    a.features.width = get<double>(aj, "width", where);
    a.features.length = get<double>(aj, "length", where);
    a.features.speed = get<double>(aj, "speed", where);
    a.features.speed_limit = get<double>(aj, "speed_limit", where);
    a.features.vru = get<bool>(aj, "vru", where);
    a.pose = pose_from_json(require(aj, "pose", where), where + "pose.");
    a.route_id = get<int>(aj, "route_id", where);
    s.agents.push_back(a);
  }

  const json& expert = require_array(doc, "expert", "");
  for (std::size_t i = 0; i < expert.size(); ++i) {
    std::vector<ExpertStep> traj;
    for (std::size_t t = 0; t < expert[i].size(); ++t) {
      const json& e = expert[i][t];
      if (!e.is_array() || e.size() != 6) {
        throw SchemaError("field 'expert[" + std::to_string(i) + "][" + std::to_string(t) + "]' must hold 6 numbers");
      }
      traj.push_back({{{e[0].get<double>(), e[1].get<double>()}, e[2].get<double>()},
                      e[3].get<double>(), e[4].get<double>(), e[5].get<double>()});
    }
    s.expert.push_back(std::move(traj));
  }

  try {
    validate(s);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
  return s;
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << scenario_to_json(scenario) << '\n';
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_json(buf.str());
}

}  // namespace instasim::scene
