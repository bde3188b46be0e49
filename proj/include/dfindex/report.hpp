#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfindex/certifier.hpp"
#include "dfindex/conditions.hpp"
#include "dfindex/domain.hpp"
#include "dfindex/errors.hpp"

namespace dfindex {

enum class Command { certify, estimate_index, conditions, worm_sweep };
const char* command_name(Command c);
/// Throws SpecError for unknown names.
Command parse_command(const std::string& name);

struct Tolerances {
  double psd_tol = 1e-10;
  double denom_tol = 1e-8;
  double leviflat_tol = 1e-6;
  double bisect_tol = 1e-2;
};

/// Finite-difference steps of the signed-distance pipeline; delta <= 0 picks
/// the per-point default of delta_jet.
struct FdSteps {
  double delta = 0.0;
  double third = 1e-3;
  double boundary_offset = 1e-3;
};

struct NumericConfig {
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  Tolerances tols{};
  double tubular_width = 0.05;
  FdSteps fd_steps{};
  double min_depth = 1e-6;
  int levels = 10;
  std::size_t sigma_samples = 500;
  std::size_t search_budget = 200;
  int restarts = 3;
  /// Reruns after a ConvergenceError or TubularError, each with halved steps.
  int retries = 2;
  double sweep_slack = 0.05;
};

struct OutputConfig {
  std::string path = ".";
  bool json = true;
  bool csv = true;
};

/// psi as an explicit program, or as a member of a named linear family.
struct PsiSpec {
  std::optional<std::string> family;
  std::vector<double> params;
  FieldProgram program;

  FieldProgram resolve() const;
  PsiFamily family_basis() const;
  nlohmann::json to_json() const;
  /// null selects psi = 0. Throws SpecError.
  static PsiSpec from_json(const nlohmann::json& j);
};

struct RunConfig {
  Command command = Command::certify;
  DomainSpec domain{};
  PsiSpec psi{};
  std::vector<PsiSpec> psi_sequence;  // conditions only: a psi_j family to compare
  double eta = 0.5;
  int n = 1;
  std::vector<double> betas;  // worm-sweep only
  NumericConfig numeric{};
  OutputConfig output{};

  /// The fully resolved configuration, defaults included.
  nlohmann::json to_json() const;
  /// Throws SpecError on malformed or invalid input.
  static RunConfig from_json(const nlohmann::json& j);
};

/// Throws SpecError when a field violates its constraint.
void validate(const RunConfig& cfg);

/// Reads and parses a JSON file. Throws SpecError.
RunConfig load_config(const std::filesystem::path& path);

/// Writes via a temporary file in the same directory and a rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

struct SweepRow {
  double beta = 0.0;
  double certified_eta_lower = 0.0;
  double implied_eta_upper = 0.0;  // NaN when the first condition gives no bound
  double paper_bound = 0.0;        // 2 pi / (2 beta - pi)
  bool vacuous = false;            // bound >= 1
  bool consistent = false;
  std::string status = "ok";
};

/// 2 pi / (2 beta - pi).
double worm_upper_bound(double beta);

std::vector<SweepRow> worm_sweep(const std::vector<double>& betas, const RunConfig& cfg);
std::string sweep_csv(const std::vector<SweepRow>& rows);
nlohmann::json sweep_json(const std::vector<SweepRow>& rows);

/// Output files of a run, keyed by file name.
struct RunOutput {
  nlohmann::json report;
  std::vector<std::pair<std::string, std::string>> csv;
};

RunOutput run_certify(const RunConfig& cfg);
RunOutput run_estimate_index(const RunConfig& cfg);
RunOutput run_conditions(const RunConfig& cfg);
RunOutput run_worm_sweep(const RunConfig& cfg);

/// Sigma samples as CSV: coordinates, Levi form, torsion and weight.
std::string sigma_csv(const std::vector<LeviFlatSample>& sigma);

namespace exit_code {
constexpr int ok = 0;
constexpr int config_error = 2;
constexpr int numerical_failure = 3;
}  // namespace exit_code

/// Dispatches on cfg.command, writes the reports and maps failures to exit
/// codes. Diagnostics go to err.
int run(const RunConfig& cfg, std::ostream& err);

}  // namespace dfindex
