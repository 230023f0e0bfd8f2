#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "lanpredict/estimate.hpp"
#include "lanpredict/risk_mc.hpp"
#include "lanpredict/simulate.hpp"

namespace lanpredict {

inline constexpr const char* kVersion = "0.1.0";

/// Full run configuration as seen by the command line front end.
struct RunConfig {
  ExperimentConfig experiment;
  Estimator estimator{Estimator::Newton};
  std::string out_dir{"."};
  std::string format{"csv"};  // csv | json
};

nlohmann::json to_json(const RunConfig& cfg);
/// Applies the recognised keys of `j` on top of `cfg`. Unknown keys are rejected.
void apply_json(RunConfig& cfg, const nlohmann::json& j);

/// "# key: value" comment block recording version, command, config, seed and RNG.
std::string comment_header(const std::string& command, const RunConfig& cfg);
nlohmann::json metadata(const std::string& command, const RunConfig& cfg);

/// Writes to a sibling temp file and renames it into place.
void write_atomically(const std::filesystem::path& path, const std::string& content);

/// Path CSV: header `t,x1,x2,dw1,dw2`, one row per node, dw empty on the last row.
std::string path_csv(const SamplePath& path);
/// Reads a path CSV (comment lines starting with '#' are skipped). Missing dw
/// columns leave brown_incr empty.
SamplePath read_path_csv(std::istream& in);

struct RiskRow {
  double T;
  std::string stat;  // t_qer | t_qep | t_qer_aux | t_qep_aux | mle_var | bound
  RiskEstimate risk;
};

std::vector<RiskRow> risk_rows(const ConvergenceRow& row);

std::string risks_csv(const std::vector<RiskRow>& rows);
nlohmann::json risks_json(const std::vector<RiskRow>& rows);

std::string convergence_csv(const ConvergenceReport& report);
nlohmann::json convergence_json(const ConvergenceReport& report);

std::string dt_refinement_csv(const DtRefinement& ref);

nlohmann::json mle_json(const MleResult& r, const std::string& method);

}  // namespace lanpredict
