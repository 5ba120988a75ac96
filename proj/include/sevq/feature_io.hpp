#pragma once

#include <filesystem>
#include <string>

#include "sevq/matrix.hpp"
#include "sevq/quantizer.hpp"

namespace sevq {

enum class FeatureFormat { kCsv, kRawF32 };
enum class TokenFormat { kCsv, kJson };

inline constexpr int kModelFormatVersion = 1;

/// `.f32` / `.bin` / `.raw` map to raw-f32, everything else to CSV.
FeatureFormat feature_format_for(const std::filesystem::path& path);
/// `.json` maps to JSON, everything else to CSV.
TokenFormat token_format_for(const std::filesystem::path& path);

/// CSV: one frame per line, comma-separated; lines starting with '#' are
/// skipped. Raw-f32: little-endian IEEE-754 floats, row-major, with a JSON
/// sidecar `<path>.json` holding {"rows": T, "cols": H}.
FeatureMatrix load_features(const std::filesystem::path& path, FeatureFormat format);
FeatureMatrix load_features(const std::filesystem::path& path);

/// CSV output uses shortest round-trip decimal formatting.
void save_features(const FeatureMatrix& features, const std::filesystem::path& path,
                   FeatureFormat format);

void save_model(const CodecModel& model, const std::filesystem::path& path);
CodecModel load_model(const std::filesystem::path& path);

/// Model <-> JSON text, used by save_model/load_model.
std::string model_to_json(const CodecModel& model);
CodecModel model_from_json(const std::string& text);

void save_tokens(const TokenSequence& tokens, const std::filesystem::path& path, TokenFormat format);
TokenSequence load_tokens(const std::filesystem::path& path, TokenFormat format);

std::string tokens_to_csv(const TokenSequence& tokens);

}  // namespace sevq
