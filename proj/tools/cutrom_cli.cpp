// cutrom: command-line front end for the offline/online pipelines.
//
//   cutrom <verb> [--config FILE] [--case NAME] [--section.key VALUE ...]
//
// verbs: mesh, offline, online, errors, export, verify

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "cutrom/errors.hpp"
#include "cutrom/harness.hpp"
#include "cutrom/io.hpp"
#include "cutrom/kernels/kernels.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitBudget = 3;
constexpr int kExitFailure = 1;

struct Common {
  std::string config_path;
  std::string case_name;
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* app, Common& common) {
  app->add_option("--config", common.config_path, "INI run configuration")->check(CLI::ExistingFile);
  app->add_option("--case", common.case_name, "preset: steady_wavy, unsteady_wavy, unsteady_cylinder");
  for (const std::string& key : cutrom::config_keys()) {
    app->add_option_function<std::string>(
           "--" + key, [&common, key](const std::string& v) { common.overrides[key] = v; },
           "override " + key)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)
        ->group("Config overrides");
  }
}

cutrom::RunConfig load(const Common& common) {
  cutrom::RunConfig cfg;
  if (!common.config_path.empty()) {
    cfg = cutrom::parse_config(common.config_path);
    if (!common.case_name.empty() && cutrom::parse_case(common.case_name) != cfg.kind) {
      throw cutrom::ValidationError("--case disagrees with the case in " + common.config_path);
    }
  } else {
    cfg = cutrom::preset(common.case_name.empty() ? cutrom::CaseKind::SteadyWavy
                                                  : cutrom::parse_case(common.case_name));
  }
  for (const auto& [key, value] : common.overrides) cutrom::apply_override(cfg, key, value);
  cutrom::validate(cfg);
  return cfg;
}

double default_theta(const cutrom::RunConfig& cfg) { return 0.5 * (cfg.space.lo + cfg.space.hi); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cut finite element Navier-Stokes solver with POD-Galerkin reduced models"};
  app.require_subcommand(1);

  Common c_mesh, c_off, c_on, c_err, c_exp, c_ver;
  double theta_mesh = std::nan(""), theta_exp = std::nan("");
  std::string mesh_dir = "mesh_out", export_path, report_path;
  bool operators = false;
  int export_n = -1;

  auto* mesh = app.add_subcommand("mesh", "dump the mesh, classification and dof table for one theta");
  add_common(mesh, c_mesh);
  mesh->add_option("--theta", theta_mesh, "parameter value (default: midpoint of the range)");
  mesh->add_option("--out", mesh_dir, "output directory");
  mesh->add_flag("--operators", operators, "also write the Jacobian at zero and the fluid mass as COO");

  auto* offline = app.add_subcommand("offline", "training solves, supremizers, POD bases and manifest");
  add_common(offline, c_off);

  auto* online = app.add_subcommand("online", "test sweep over the configured N list");
  add_common(online, c_on);

  auto* errors = app.add_subcommand("errors", "recompute summary.csv from an online report");
  add_common(errors, c_err);
  errors->add_option("--report", report_path, "report CSV (default: <output_dir>/online/report.csv)");

  auto* exp = app.add_subcommand("export", "VTK of full-order, reduced and error fields");
  add_common(exp, c_exp);
  exp->add_option("--theta", theta_exp, "parameter value (default: midpoint of the range)");
  exp->add_option("--n", export_n, "reduced dimension (default: largest available)");
  exp->add_option("--out", export_path, "VTK path (default: <output_dir>/fields.vtk)");

  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  add_common(verify, c_ver);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  cutrom::RunConfig cfg;
  try {
    if (*mesh) cfg = load(c_mesh);
    if (*offline) cfg = load(c_off);
    if (*online) cfg = load(c_on);
    if (*errors) cfg = load(c_err);
    if (*exp) cfg = load(c_exp);
    if (*verify) cfg = load(c_ver);
  } catch (const cutrom::ParseError& e) {
    std::cerr << "config error (line " << e.line() << "): " << e.what() << '\n';
    return kExitConfig;
  } catch (const cutrom::Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*mesh) {
      const double th = std::isnan(theta_mesh) ? default_theta(cfg) : theta_mesh;
      cutrom::export_mesh(cfg, th, mesh_dir, operators);
      std::cout << "wrote " << mesh_dir << " for theta " << cutrom::format_double(th) << '\n';
    } else if (*offline) {
      std::cout << "kernels: " << cutrom::kernels::isa_name(cutrom::kernels::active_isa()) << '\n';
      const auto s = cutrom::run_offline(cfg, &std::cout);
      std::cout << "basis size " << s.n_basis << ", manifest " << s.manifest_hash << '\n';
    } else if (*online) {
      const auto s = cutrom::run_online(cfg, &std::cout);
      if (s.failures > 0) std::cerr << s.failures << " reduced or reference solves failed\n";
    } else if (*errors) {
      const fs::path report = report_path.empty() ? fs::path(cfg.output_dir) / "online" / "report.csv"
                                                  : fs::path(report_path);
      const fs::path summary = report.parent_path() / "summary.csv";
      cutrom::summarize_report(report, summary);
      std::cout << cutrom::read_csv_file(summary).rows.size() << " rows written to " << summary.string() << '\n';
    } else if (*exp) {
      const double th = std::isnan(theta_exp) ? default_theta(cfg) : theta_exp;
      int n = export_n;
      if (n <= 0) n = cutrom::load_basis(cfg.output_dir).max_n(cfg.supremizers);
      const fs::path out = export_path.empty() ? fs::path(cfg.output_dir) / "fields.vtk" : fs::path(export_path);
      cutrom::export_fields(cfg, th, n, out);
      std::cout << "wrote " << out.string() << '\n';
    } else if (*verify) {
      bool all = true;
      for (const auto& r : cutrom::verify_invariants(cfg)) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << (r.detail.empty() ? "" : ": " + r.detail) << '\n';
        all = all && r.passed;
      }
      return all ? kExitOk : kExitFailure;
    }
  } catch (const cutrom::BudgetExceeded& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return kExitBudget;
  } catch (const cutrom::ValidationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cutrom::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
