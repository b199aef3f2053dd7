#pragma once

#include <filesystem>
#include <utility>

#include <json.hpp>

#include "malprotect/dataset.hpp"
#include "malprotect/dataset_stats.hpp"
#include "malprotect/families.hpp"

namespace malprotect {

// Dataset on disk: `<stem>.header.json` holds
//   {"dim": M, "families": [family per feature], "addable": {"<family>": bool}, "removable": {...}}
// and `<stem>.jsonl` one sample per line:
//   {"label": 0|1, "features": [sorted indices], "split": "train"|"validation"|"test"}

void write_dataset(const std::filesystem::path& stem, const Dataset& dataset, const FeatureFamilyTable& table);
std::pair<Dataset, FeatureFamilyTable> read_dataset(const std::filesystem::path& stem);

nlohmann::json family_table_to_json(const FeatureFamilyTable& table);
FeatureFamilyTable family_table_from_json(const nlohmann::json& header);

nlohmann::json stats_to_json(const DatasetStats& stats);
DatasetStats stats_from_json(const nlohmann::json& j);

/// Reads a whole JSON file; missing or unparsable files raise ArtifactError.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace malprotect
