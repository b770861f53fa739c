#include "seglab/model_io.hpp"

#include <cstdint>
#include <fstream>

#include <json.hpp>

#include "seglab/digest.hpp"
#include "seglab/logmath.hpp"

namespace seglab {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

// -inf is not representable in JSON; encode as null.
json vec_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i)
    out.push_back(v[i] == kNegInf ? json(nullptr) : json(v[i]));
  return out;
}

Eigen::VectorXd vec_from_json(const json& j) {
  Eigen::VectorXd out(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    out[static_cast<int>(i)] = j[i].is_null() ? kNegInf : j[i].get<double>();
  return out;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (int r = 0; r < m.rows(); ++r) out.push_back(vec_to_json(m.row(r).transpose()));
  return out;
}

Eigen::MatrixXd mat_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  const int cols = static_cast<int>(j[0].size());
  Eigen::MatrixXd out(rows, cols);
  for (int r = 0; r < rows; ++r) out.row(r) = vec_from_json(j[r]).transpose();
  return out;
}

json params_to_json(const ModelParams& p) {
  json j;
  j["state_names"] = p.space.names;
  json base = json::array();
  for (const Label& l : p.space.base) base.push_back(l.raw());
  j["state_base"] = base;
  j["state_cls"] = p.space.cls;
  j["init_log"] = vec_to_json(p.init_log);
  j["trans_log"] = mat_to_json(p.trans_log);
  j["final_log"] = vec_to_json(p.final_log);
  j["dur_mean"] = vec_to_json(p.dur_mean);
  j["emit_mean"] = mat_to_json(p.emit_mean);
  j["var_diag"] = vec_to_json(p.var_diag);
  j["max_duration"] = p.max_duration;
  j["final_duration_survival"] = p.final_duration_survival;
  return j;
}

ModelParams params_from_json(const json& j) {
  ModelParams p;
  p.space.names = j.at("state_names").get<std::vector<std::string>>();
  for (const json& b : j.at("state_base")) p.space.base.push_back(Label::from_raw(b.get<int>()));
  p.space.cls = j.at("state_cls").get<std::vector<int>>();
  p.init_log = vec_from_json(j.at("init_log"));
  p.trans_log = mat_from_json(j.at("trans_log"));
  p.final_log = vec_from_json(j.at("final_log"));
  p.dur_mean = vec_from_json(j.at("dur_mean"));
  p.emit_mean = mat_from_json(j.at("emit_mean"));
  p.var_diag = vec_from_json(j.at("var_diag"));
  p.max_duration = j.at("max_duration").get<int>();
  p.final_duration_survival = j.at("final_duration_survival").get<bool>();
  p.check();
  return p;
}

json pca_to_json(const PcaModel& pca) {
  json j;
  j["specs"] = json::array();
  for (const FeatureGroupSpec& s : pca.specs)
    j["specs"].push_back(
        {{"name", s.name}, {"raw_dim", s.raw_dim}, {"components", s.components}});
  json tasks;
  for (const auto& [task_id, groups] : pca.by_task) {
    json arr = json::array();
    for (const PcaGroupModel& g : groups)
      arr.push_back({{"mean", vec_to_json(g.mean)},
                     {"projection", mat_to_json(g.projection)},
                     {"explained_variance_ratio", vec_to_json(g.explained_variance_ratio)},
                     {"effective_components", g.effective_components}});
    tasks[task_id] = arr;
  }
  j["tasks"] = tasks;
  return j;
}

PcaModel pca_from_json(const json& j) {
  PcaModel pca;
  for (const json& s : j.at("specs")) {
    FeatureGroupSpec spec;
    spec.name = s.at("name").get<std::string>();
    spec.raw_dim = s.at("raw_dim").get<int>();
    spec.components = s.at("components").get<int>();
    pca.specs.push_back(spec);
  }
  for (const auto& [task_id, arr] : j.at("tasks").items()) {
    std::vector<PcaGroupModel> groups;
    for (const json& g : arr) {
      PcaGroupModel pg;
      pg.mean = vec_from_json(g.at("mean"));
      pg.projection = mat_from_json(g.at("projection"));
      pg.explained_variance_ratio = vec_from_json(g.at("explained_variance_ratio"));
      pg.effective_components = g.at("effective_components").get<int>();
      groups.push_back(std::move(pg));
    }
    pca.by_task.emplace(task_id, std::move(groups));
  }
  return pca;
}

}  // namespace

void save_model(const ModelBundle& bundle, const std::filesystem::path& path) {
  json payload;
  payload["created_by"] = kVersionString;
  if (bundle.pca) payload["pca"] = pca_to_json(*bundle.pca);
  json tasks;
  for (const auto& [task_id, tm] : bundle.tasks) {
    json jt = params_to_json(tm.params);
    jt["ordered"] = tm.ordered;
    tasks[task_id] = jt;
  }
  payload["tasks"] = tasks;

  json j;
  j["format_version"] = kFormatVersion;
  const std::string dump = payload.dump();
  j["checksum"] = fnv1a_hex(dump);
  j["payload"] = std::move(payload);

  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write model file: " + path.string());
  out << j.dump(1) << "\n";
}

ModelBundle load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("model file not found: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError("model file " + path.string() + ": " + e.what());
  }
  if (j.value("format_version", -1) != kFormatVersion)
    throw ValidationError("model file " + path.string() + ": unknown format version");
  const json& payload = j.at("payload");
  if (fnv1a_hex(payload.dump()) != j.at("checksum").get<std::string>())
    throw ValidationError("model file " + path.string() + ": checksum mismatch");

  ModelBundle bundle;
  if (payload.contains("pca")) bundle.pca = pca_from_json(payload.at("pca"));
  for (const auto& [task_id, jt] : payload.at("tasks").items()) {
    TaskModel tm;
    tm.params = params_from_json(jt);
    tm.ordered = jt.at("ordered").get<bool>();
    bundle.tasks.emplace(task_id, std::move(tm));
  }
  return bundle;
}

}  // namespace seglab
