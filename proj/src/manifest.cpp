#include "seglab/manifest.hpp"

#include <cstdint>
#include <fstream>

#include <json.hpp>

namespace seglab {

using nlohmann::json;

namespace {

json load_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ValidationError(std::string(what) + " not found: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string(what) + " " + path.string() + ": " + e.what());
  }
  return j;
}

}  // namespace

Eigen::MatrixXd read_feature_file(const std::filesystem::path& path, int num_timesteps,
                                  int dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("feature file not found: " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::uint64_t>(in.tellg());
  const std::uint64_t expected =
      static_cast<std::uint64_t>(num_timesteps) * static_cast<std::uint64_t>(dim) * 4;
  if (size != expected)
    throw ValidationError("feature file " + path.string() + ": " + std::to_string(size) +
                          " bytes, expected " + std::to_string(expected));
  in.seekg(0);
  std::vector<float> buffer(static_cast<std::size_t>(num_timesteps) * dim);
  in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(expected));
  Eigen::MatrixXd out(num_timesteps, dim);
  for (int t = 0; t < num_timesteps; ++t)
    for (int f = 0; f < dim; ++f)
      out(t, f) = buffer[static_cast<std::size_t>(t) * dim + f];
  return out;
}

void write_feature_file(const std::filesystem::path& path, const Eigen::MatrixXd& features,
                        const std::vector<int>& group_dims) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write feature file: " + path.string());
  const int T = static_cast<int>(features.rows());
  const int F = static_cast<int>(features.cols());
  std::vector<float> buffer(static_cast<std::size_t>(T) * F);
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < F; ++f)
      buffer[static_cast<std::size_t>(t) * F + f] = static_cast<float>(features(t, f));
  out.write(reinterpret_cast<const char*>(buffer.data()),
            static_cast<std::streamsize>(buffer.size() * 4));

  json sidecar;
  sidecar["num_timesteps"] = T;
  sidecar["dim"] = F;
  sidecar["group_dims"] = group_dims;
  std::ofstream side(path.string() + ".json");
  side << sidecar.dump(2) << "\n";
}

LoadedDataset load_dataset(const std::filesystem::path& manifest_path) {
  const json j = load_json_file(manifest_path, "manifest");
  const std::filesystem::path base = manifest_path.parent_path();

  LoadedDataset out;
  if (j.value("format_version", 1) != 1)
    throw ValidationError("manifest format version not supported");

  std::vector<int> group_dims;
  for (const json& g : j.at("feature_groups")) {
    FeatureGroupSpec spec;
    spec.name = g.at("name").get<std::string>();
    spec.raw_dim = g.at("dim").get<int>();
    group_dims.push_back(spec.raw_dim);
    out.groups.push_back(spec);
  }
  int total_dim = 0;
  for (int d : group_dims) total_dim += d;

  for (const json& t : j.at("tasks")) {
    TaskDefinition task;
    task.task_id = t.at("task_id").get<std::string>();
    for (const json& s : t.at("steps")) task.steps.push_back(s.get<std::string>());
    out.dataset.tasks.push_back(std::move(task));
  }

  for (const json& v : j.at("videos")) {
    VideoInstance video;
    video.video_id = v.at("video_id").get<std::string>();
    video.task_id = v.at("task_id").get<std::string>();
    const int T = v.at("num_timesteps").get<int>();
    const std::filesystem::path feat_path = base / v.at("features_path").get<std::string>();

    const json sidecar = load_json_file(feat_path.string() + ".json", "feature sidecar");
    if (sidecar.at("num_timesteps").get<int>() != T)
      throw ValidationError("video '" + video.video_id +
                            "': manifest num_timesteps disagrees with sidecar");
    if (sidecar.at("dim").get<int>() != total_dim)
      throw ValidationError("video '" + video.video_id +
                            "': sidecar dim disagrees with declared feature groups");
    if (sidecar.at("group_dims").get<std::vector<int>>() != group_dims)
      throw ValidationError("video '" + video.video_id + "': sidecar group dims disagree");

    video.features = read_feature_file(feat_path, T, total_dim);

    if (v.contains("annotations")) {
      video.has_reference = true;
      for (const json& a : v.at("annotations")) {
        AnnotatedInterval ann;
        ann.step = a.at("step").get<int>();
        ann.span = {a.at("begin").get<int>(), a.at("end").get<int>()};
        video.reference.push_back(ann);
      }
    }
    if (v.contains("narration_constraints")) {
      video.has_narration = true;
      for (const json& c : v.at("narration_constraints")) {
        const int step = c.at("step").get<int>();
        video.narration_constraints[step].push_back(
            {c.at("begin").get<int>(), c.at("end").get<int>()});
      }
    }
    out.dataset.videos.push_back(std::move(video));
  }

  const ValidationReport report = validate_dataset(out.dataset);
  if (!report.ok())
    throw ValidationError("dataset failed validation:\n" + report.to_string());
  return out;
}

void save_dataset(const Dataset& ds, const std::vector<FeatureGroupSpec>& groups,
                  const std::filesystem::path& manifest_path) {
  const std::filesystem::path base = manifest_path.parent_path();
  std::filesystem::create_directories(base / "feats");
  std::vector<int> group_dims;
  for (const FeatureGroupSpec& g : groups) group_dims.push_back(g.raw_dim);

  json j;
  j["format_version"] = 1;
  j["feature_groups"] = json::array();
  for (const FeatureGroupSpec& g : groups)
    j["feature_groups"].push_back({{"name", g.name}, {"dim", g.raw_dim}});

  j["tasks"] = json::array();
  for (const TaskDefinition& t : ds.tasks)
    j["tasks"].push_back({{"task_id", t.task_id}, {"steps", t.steps}});

  j["videos"] = json::array();
  for (const VideoInstance& v : ds.videos) {
    const std::string rel = "feats/" + v.video_id + ".f32";
    write_feature_file(base / rel, v.features, group_dims);
    json jv;
    jv["video_id"] = v.video_id;
    jv["task_id"] = v.task_id;
    jv["num_timesteps"] = v.num_timesteps();
    jv["features_path"] = rel;
    if (v.has_reference) {
      json arr = json::array();
      for (const AnnotatedInterval& a : v.reference)
        arr.push_back({{"step", a.step}, {"begin", a.span.begin}, {"end", a.span.end}});
      jv["annotations"] = arr;
    }
    if (v.has_narration) {
      json arr = json::array();
      for (const auto& [step, spans] : v.narration_constraints)
        for (const Interval& span : spans)
          arr.push_back({{"step", step}, {"begin", span.begin}, {"end", span.end}});
      jv["narration_constraints"] = arr;
    }
    j["videos"].push_back(std::move(jv));
  }

  std::ofstream out(manifest_path);
  if (!out) throw ValidationError("cannot write manifest: " + manifest_path.string());
  out << j.dump(2) << "\n";
}

}  // namespace seglab
