#pragma once

// Run configuration, offline/online pipelines, reports and field export.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cutrom/assembly.hpp"
#include "cutrom/fom.hpp"
#include "cutrom/geometry.hpp"
#include "cutrom/mesh.hpp"
#include "cutrom/rom.hpp"

namespace cutrom {

enum class CaseKind { SteadyWavy, UnsteadyWavy, UnsteadyCylinder };

std::string_view case_name(CaseKind kind);
CaseKind parse_case(std::string_view name);  // throws ValidationError

struct RunConfig {
  CaseKind kind = CaseKind::SteadyWavy;
  // [geometry]
  LevelsetFamily family = LevelsetFamily::wavy_wall();
  ParameterSpace space = ParameterSpace::wavy_default();
  Point anchor{0.0, 0.0};
  // [mesh]
  Rect rect{};
  double h = 0.07;
  // [physics]
  double mu = 0.05;
  Point u_in{1.0, 0.0};
  // [stabilization]
  StabilizationParams stab{};
  GhostFacetPolicy ghost_policy = GhostFacetPolicy::AnyCutNeighbor;
  // [quadrature] and the Jacobian mode
  AssemblyOptions assembly{};
  // [solver]
  NewtonOptions newton{};
  bool unsteady = false;
  double tau = 0.011;
  double final_time = 0.7;
  // [rom]
  int n_train = 150;
  int n_test = 30;
  std::vector<int> n_list{1, 2, 5, 10, 15, 20, 30, 40, 50};
  int n_max = 50;
  std::uint64_t seed_train = 12345;
  std::uint64_t seed_test = 67890;
  bool supremizers = true;
  ReducedMass reduced_mass = ReducedMass::Background;
  double rank_tolerance = 1e-3;  // reduced inf-sup constant below which a warning is raised
  double failure_budget = 0.05;
  bool train_smoke = true;       // add a training parameter to the online report
  // [io]
  std::string output_dir = "cutrom_out";
  int threads = 0;  // 0: CUTROM_THREADS or the hardware concurrency
  bool vtk = false;
};

/// Defaults of the three reference experiments.
RunConfig preset(CaseKind kind);

/// INI text with an optional top-level `case` key (default steady_wavy) and
/// the sections geometry, mesh, physics, stabilization, quadrature, solver,
/// rom, io. Unknown sections or keys are rejected with ParseError; invalid
/// values with ValidationError.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::filesystem::path& path);
/// Applies "section.key" = value on top of an existing config.
void apply_override(RunConfig& config, const std::string& dotted_key, const std::string& value);
/// Every key with its current value; parse_config_text inverts it.
/// `with_io` = false drops the [io] section (used for hashing).
std::string serialize_config(const RunConfig& config, bool with_io = true);
/// All accepted "section.key" names.
std::vector<std::string> config_keys();
void validate(const RunConfig& config);

/// Physics parameters implied by a config.
PhysicsParams physics_of(const RunConfig& config);
/// Time levels of an unsteady run (empty for steady).
std::vector<double> time_levels(const RunConfig& config);

/// Worker count: the configured value (or hardware concurrency when 0),
/// capped by CUTROM_THREADS when that is set.
int resolve_threads(int configured);
/// Runs fn(i) for i in [0, n) on `threads` workers; results must go to
/// per-index slots. The first exception (lowest index) is rethrown.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

/// Everything that stays fixed across parameters.
struct Discretization {
  explicit Discretization(const RunConfig& config);
  BackgroundMesh mesh;
  DofSystem dofs;
  SparseMatrix mass_u;  // background P2 velocity mass
  SparseMatrix mass_p;  // background P1 pressure mass
};

/// Oriented levelset for one parameter (sign from the configured anchor).
OrientedLevelset levelset_of(const RunConfig& config, double theta);
std::unique_ptr<FomProblem> make_fom(const RunConfig& config, const Discretization& disc, double theta);

class BudgetExceeded : public Error {
  using Error::Error;
};

struct OfflineSummary {
  int trained = 0;
  int failed = 0;
  int rank_u = 0, rank_s = 0, rank_p = 0;
  int n_basis = 0;
  std::string manifest_hash;
};

/// Snapshots, supremizers, POD bases, eigenvalue CSV and manifest under
/// config.output_dir. Throws BudgetExceeded when too many solves fail.
OfflineSummary run_offline(const RunConfig& config, std::ostream* log = nullptr);

/// Loads the persisted basis of an offline run.
ReducedBasis load_basis(const std::filesystem::path& output_dir);

struct OnlineSummary {
  int rows = 0;
  int failures = 0;
  int rank_warnings = 0;
};

/// Test sweep: reference solves, reduced solves over config.n_list, report
/// CSVs under output_dir/online.
OnlineSummary run_online(const RunConfig& config, std::ostream* log = nullptr);

/// Mean errors per N over the ok test rows of a report CSV.
void summarize_report(const std::filesystem::path& report, const std::filesystem::path& summary);

/// Eigenvalue CSV: index, lambda_{u,s,p} / lambda_1, cumulative energy fractions.
void eigen_decay_report(const Vector& lu, const Vector& ls, const Vector& lp, std::ostream& os);

/// VTK with full-order, reduced and error fields for one parameter (final
/// time level for unsteady runs). Requires an offline basis.
void export_fields(const RunConfig& config, double theta, int n, const std::filesystem::path& path);

/// Mesh, classification and dof dumps for one parameter.
void export_mesh(const RunConfig& config, double theta, const std::filesystem::path& dir, bool operators);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};
/// Invariant suite on the configured discretization (and basis, when an
/// offline run exists in output_dir).
std::vector<CheckResult> verify_invariants(const RunConfig& config);

}  // namespace cutrom
