#pragma once

#include <string>

#include <json.hpp>

#include "sevq/quantizer.hpp"

namespace sevq {

nlohmann::json config_to_json(const TrainConfig& config);
/// Missing keys keep their defaults.
TrainConfig config_from_json(const nlohmann::json& j);

/// {stage_mse: [...], final_mse, mean_cosine, rmse: [...]}
nlohmann::json distortion_to_json(const DistortionReport& report);

/// Deterministic content first; wall-clock seconds live under "timing" only.
nlohmann::json train_report(const CodecModel& model, const TrainLog& log, double total_seconds);

/// Plot-ready rows: `stage,k,se_singletons,se_minimized`.
std::string train_report_csv(const TrainLog& log);
/// Plot-ready rows: `stage,mse`.
std::string distortion_csv(const DistortionReport& report);

}  // namespace sevq
