#include "sevq/report.hpp"

#include <fmt/format.h>

namespace sevq {

using nlohmann::json;

json config_to_json(const TrainConfig& c) {
  return {{"tau", c.threshold},
          {"subset_n", c.subset_size},
          {"stages", c.stages},
          {"anchors_per_cluster", c.anchors_per_cluster},
          {"max_nodes", c.max_nodes},
          {"seed", c.seed},
          {"disentangle", c.disentangle},
          {"disentangle_steps", c.disentangle_steps},
          {"learning_rate", c.learning_rate},
          {"disentangle_samples", c.disentangle_samples},
          {"euclidean_stages", c.euclidean_stages}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.threshold = j.value("tau", c.threshold);
  c.subset_size = j.value("subset_n", c.subset_size);
  c.stages = j.value("stages", c.stages);
  c.anchors_per_cluster = j.value("anchors_per_cluster", c.anchors_per_cluster);
  c.max_nodes = j.value("max_nodes", c.max_nodes);
  c.seed = j.value("seed", c.seed);
  c.disentangle = j.value("disentangle", c.disentangle);
  c.disentangle_steps = j.value("disentangle_steps", c.disentangle_steps);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.disentangle_samples = j.value("disentangle_samples", c.disentangle_samples);
  c.euclidean_stages = j.value("euclidean_stages", c.euclidean_stages);
  return c;
}

json distortion_to_json(const DistortionReport& r) {
  return {{"stage_mse", r.stage_mse},
          {"final_mse", r.final_mse},
          {"mean_cosine", r.mean_cosine},
          {"rmse", r.rmse}};
}

json train_report(const CodecModel& model, const TrainLog& log, double total_seconds) {
  json stages = json::array();
  json stage_seconds = json::array();
  for (std::size_t s = 0; s < log.stages.size(); ++s) {
    const auto& st = log.stages[s];
    json entry = {{"stage", s + 1},
                  {"k", st.clusters},
                  {"method", model.stages[s].method() == StageMethod::kEuclidean ? "euclidean"
                                                                                 : "structural_entropy"},
                  {"rows", st.rows},
                  {"edges", st.edges},
                  {"isolated", st.isolated},
                  {"anchors", st.anchors},
                  {"hierarchy_rounds", st.hierarchy_rounds},
                  {"se_singletons", st.se_singletons},
                  {"se_minimized", st.se_minimized}};
    if (model.config.disentangle) {
      entry["vclub_start"] = st.disentangle_start;
      entry["vclub_end"] = st.disentangle_end;
    }
    stages.push_back(std::move(entry));
    stage_seconds.push_back(st.seconds);
  }
  std::vector<std::size_t> ks;
  for (const auto& s : model.stages) ks.push_back(s.size());
  return {{"config", config_to_json(model.config)},
          {"feature_dim", model.dim},
          {"stages_trained", model.stages.size()},
          {"codebook_sizes", ks},
          {"truncated", model.truncated},
          {"stop_reason", model.stop_reason},
          {"stages", stages},
          {"timing", {{"stage_seconds", stage_seconds}, {"total_seconds", total_seconds}}}};
}

std::string train_report_csv(const TrainLog& log) {
  std::string out = "stage,k,se_singletons,se_minimized\n";
  for (std::size_t s = 0; s < log.stages.size(); ++s) {
    const auto& st = log.stages[s];
    out += fmt::format("{},{},{},{}\n", s + 1, st.clusters, st.se_singletons, st.se_minimized);
  }
  return out;
}

std::string distortion_csv(const DistortionReport& r) {
  std::string out = "stage,mse\n";
  for (std::size_t s = 0; s < r.stage_mse.size(); ++s) out += fmt::format("{},{}\n", s + 1, r.stage_mse[s]);
  return out;
}

}  // namespace sevq
