#include "malprotect/dataset_io.hpp"

#include <fstream>
#include <string>

#include "malprotect/errors.hpp"

namespace malprotect {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path with_suffix(const fs::path& stem, const char* suffix) { return fs::path(stem.string() + suffix); }

}  // namespace

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("missing artifact: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ArtifactError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json family_table_to_json(const FeatureFamilyTable& table) {
  json addable = json::object(), removable = json::object();
  for (std::size_t f = 0; f < table.family_count(); ++f) {
    addable[std::to_string(f)] = table.permission(static_cast<FamilyId>(f)).addable;
    removable[std::to_string(f)] = table.permission(static_cast<FamilyId>(f)).removable;
  }
  return json{{"dim", table.dim()}, {"families", table.families()}, {"addable", addable}, {"removable", removable}};
}

FeatureFamilyTable family_table_from_json(const json& header) {
  try {
    auto families = header.at("families").get<std::vector<FamilyId>>();
    if (families.size() != header.at("dim").get<std::size_t>())
      throw ArtifactError("family list length differs from dim");
    const auto& addable = header.at("addable");
    std::vector<Permission> permissions(addable.size());
    for (std::size_t f = 0; f < permissions.size(); ++f) {
      const auto key = std::to_string(f);
      permissions[f] = {addable.at(key).get<bool>(), header.at("removable").at(key).get<bool>()};
    }
    return FeatureFamilyTable(std::move(families), std::move(permissions));
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed dataset header: ") + e.what());
  } catch (const ConfigError& e) {
    throw ArtifactError(std::string("invalid family table: ") + e.what());
  }
}

void write_dataset(const fs::path& stem, const Dataset& dataset, const FeatureFamilyTable& table) {
  write_json_file(with_suffix(stem, ".header.json"), family_table_to_json(table));
  std::ofstream out(with_suffix(stem, ".jsonl"));
  if (!out) throw ArtifactError("cannot write dataset " + stem.string());
  for (const auto& s : dataset.samples) {
    json line{{"label", to_int(s.label)},
              {"features", std::vector<FeatureIndex>(s.vector.enabled().begin(), s.vector.enabled().end())},
              {"split", to_string(s.split)}};
    out << line.dump() << '\n';
  }
}

std::pair<Dataset, FeatureFamilyTable> read_dataset(const fs::path& stem) {
  const json header = read_json_file(with_suffix(stem, ".header.json"));
  FeatureFamilyTable table = family_table_from_json(header);
  Dataset dataset;
  dataset.dim = table.dim();

  const auto lines_path = with_suffix(stem, ".jsonl");
  std::ifstream in(lines_path);
  if (!in) throw ArtifactError("missing artifact: " + lines_path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      LabeledSample s;
      s.label = label_from_int(j.at("label").get<int>());
      s.vector = FeatureVector(dataset.dim, j.at("features").get<std::vector<FeatureIndex>>());
      s.split = j.contains("split") ? split_from_string(j.at("split").get<std::string>()) : Split::train;
      dataset.samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ArtifactError(lines_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DimensionMismatch& e) {
      throw ArtifactError(lines_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return {std::move(dataset), std::move(table)};
}

json stats_to_json(const DatasetStats& stats) {
  return json{{"avgDistD", stats.avg_dist},
              {"avgSharedD", stats.avg_shared},
              {"avgFeaturesD", stats.avg_features},
              {"pair_budget", stats.pair_budget},
              {"pairs_used", stats.pairs_used}};
}

DatasetStats stats_from_json(const json& j) {
  try {
    DatasetStats s;
    s.avg_dist = j.at("avgDistD").get<double>();
    s.avg_shared = j.at("avgSharedD").get<double>();
    s.avg_features = j.at("avgFeaturesD").get<double>();
    s.pair_budget = j.at("pair_budget").get<std::size_t>();
    s.pairs_used = j.value("pairs_used", std::size_t{0});
    return s;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed stats: ") + e.what());
  }
}

}  // namespace malprotect
