#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include <Eigen/SVD>
#include <json.hpp>

#include "cutrom/errors.hpp"
#include "cutrom/harness.hpp"
#include "cutrom/io.hpp"
#include "cutrom/kernels/kernels.hpp"
#include "cutrom/quadrature.hpp"

namespace cutrom {
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

class Log {
 public:
  explicit Log(std::ostream* os) : os_(os) {}
  void operator()(const std::string& line) const {
    if (os_ == nullptr) return;
    const std::lock_guard<std::mutex> lock(mu_);
    *os_ << line << '\n';
    os_->flush();
  }

 private:
  std::ostream* os_;
  mutable std::mutex mu_;
};

std::string padded(int i, int width = 4) {
  std::ostringstream os;
  os << std::setw(width) << std::setfill('0') << i;
  return os.str();
}

std::string snapshot_name(FieldKind kind, int theta_index, int level) {
  return "snapshots/" + std::string(field_kind_name(kind)) + "_" + padded(theta_index) + "_" +
         padded(level) + ".bin";
}

std::string basis_name(FieldKind kind) { return "basis/" + std::string(field_kind_name(kind)) + ".bin"; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) throw IoError("no offline manifest in " + dir.string());
  try {
    return json::parse(read_text(p));
  } catch (const json::exception& e) {
    throw IoError("manifest " + p.string() + " is not valid JSON: " + e.what());
  }
}

Vector full_velocity(const Vector& u0, const FomProblem& fom) { return u0 + fom.lifting(); }

Matrix load_snapshot_matrix(const std::vector<fs::path>& files, std::uint64_t rows) {
  Matrix s(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(files.size()));
  for (std::size_t j = 0; j < files.size(); ++j) {
    const Container c = read_container(files[j]);
    if (c.header.rows != rows || c.header.cols != 1) throw ShapeMismatch(files[j].string() + ": unexpected shape");
    s.col(static_cast<Eigen::Index>(j)) = c.data.col(0);
  }
  return s;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string num(double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); }

}  // namespace

PhysicsParams physics_of(const RunConfig& config) {
  PhysicsParams ph;
  ph.mu = config.mu;
  ph.u_in = config.u_in;
  return ph;
}

std::vector<double> time_levels(const RunConfig& config) {
  if (!config.unsteady) return {};
  return time_grid(config.tau, config.final_time);
}

int resolve_threads(int configured) {
  int n = configured > 0 ? configured : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("CUTROM_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) n = std::min<int>(n, static_cast<int>(cap));
  }
  return n;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int workers = std::max(1, std::min(threads, n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Discretization::Discretization(const RunConfig& config)
    : mesh(build_background_mesh(config.rect, config.h)),
      dofs(mesh),
      mass_u(assemble_background_velocity_mass(dofs)),
      mass_p(assemble_background_pressure_mass(dofs)) {}

OrientedLevelset levelset_of(const RunConfig& config, double theta) {
  return orient_fluid_sign(config.family, theta, config.anchor);
}

std::unique_ptr<FomProblem> make_fom(const RunConfig& config, const Discretization& disc, double theta) {
  const OrientedLevelset ls = levelset_of(config, theta);
  return std::make_unique<FomProblem>(
      disc.dofs, [ls](double x, double y) { return ls(x, y); }, physics_of(config), config.stab,
      config.assembly, config.ghost_policy);
}

void eigen_decay_report(const Vector& lu, const Vector& ls, const Vector& lp, std::ostream& os) {
  const Eigen::Index n = std::max({lu.size(), ls.size(), lp.size()});
  auto normalized = [n](const Vector& l) {
    std::vector<double> value(static_cast<std::size_t>(n), 0.0), cumulative(static_cast<std::size_t>(n), 1.0);
    if (l.size() == 0 || !(l[0] > 0.0)) return std::make_pair(value, cumulative);
    const double total = l.sum();
    double run = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double li = i < l.size() ? l[i] : 0.0;
      run += li;
      value[static_cast<std::size_t>(i)] = li / l[0];
      cumulative[static_cast<std::size_t>(i)] = i + 1 == l.size() ? 1.0 : std::min(run / total, 1.0);
    }
    return std::make_pair(value, cumulative);
  };
  const auto [vu, cu] = normalized(lu);
  const auto [vs, cs] = normalized(ls);
  const auto [vp, cp] = normalized(lp);
  CsvWriter csv(os);
  csv.row({"index", "lambda_u", "lambda_s", "lambda_p", "cumulative_u", "cumulative_s", "cumulative_p"});
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    csv.row({std::to_string(i + 1), num(vu[k]), num(vs[k]), num(vp[k]), num(cu[k]), num(cs[k]), num(cp[k])});
  }
}

OfflineSummary run_offline(const RunConfig& config, std::ostream* log_stream) {
  validate(config);
  const Log log(log_stream);
  const auto t_start = Clock::now();
  const fs::path out = config.output_dir;
  fs::create_directories(out / "snapshots");
  fs::create_directories(out / "basis");
  write_text(out / "config.ini", serialize_config(config));

  const Discretization disc(config);
  const std::vector<double> times = time_levels(config);
  const ParameterSample sample = sample_parameters(config.space, config.n_train, config.seed_train);
  const int threads = resolve_threads(config.threads);
  log("offline: case " + std::string(case_name(config.kind)) + ", " + std::to_string(config.n_train) +
      " parameters, " + std::to_string(disc.dofs.nu()) + " velocity / " + std::to_string(disc.dofs.np()) +
      " pressure dofs, " + std::to_string(threads) + " worker(s)");

  struct TrainResult {
    bool ok = false;
    int sign = 0;
    std::string error;
    int newton_iterations = 0;
    int fluid = 0, cut = 0, solid = 0;
    std::vector<double> t;
    std::vector<std::array<std::string, 3>> hashes;  // per level: u, s, p
    double seconds = 0.0;
  };
  std::vector<TrainResult> results(static_cast<std::size_t>(config.n_train));
  const std::array<FieldKind, 3> kinds{FieldKind::Velocity, FieldKind::Supremizer, FieldKind::Pressure};

  parallel_for(config.n_train, threads, [&](int i) {
    TrainResult& r = results[static_cast<std::size_t>(i)];
    const double theta = sample.values[static_cast<std::size_t>(i)];
    const auto t0 = Clock::now();
    try {
      const auto fom = make_fom(config, disc, theta);
      r.sign = levelset_of(config, theta).sign();
      r.fluid = fom->classification().fluid_count;
      r.cut = fom->classification().cut_count;
      r.solid = fom->classification().solid_count;
      std::vector<Vector> u0, p;
      if (config.unsteady) {
        Trajectory tr = fom->solve_unsteady(times, config.newton);
        if (tr.failed_step >= 0) {
          throw NewtonDiverged("Newton failed at time step " + std::to_string(tr.failed_step),
                               tr.failure_history, tr.failed_step);
        }
        for (int k : tr.newton_iterations) r.newton_iterations += k;
        r.t = tr.times;
        u0 = std::move(tr.u0);
        p = std::move(tr.p);
      } else {
        SteadySolution sol = fom->solve_steady(config.newton);
        r.newton_iterations = sol.report.iterations;
        r.t = {0.0};
        u0.push_back(std::move(sol.u0));
        p.push_back(std::move(sol.p));
      }
      for (std::size_t k = 0; k < u0.size(); ++k) {
        const Vector s = fom->solve_supremizer(p[k]);
        std::array<std::string, 3> h;
        const std::array<const Vector*, 3> fields{&u0[k], &s, &p[k]};
        for (int f = 0; f < 3; ++f) {
          ContainerHeader hd;
          hd.nu = static_cast<std::uint64_t>(disc.dofs.nu());
          hd.np = static_cast<std::uint64_t>(disc.dofs.np());
          hd.theta = theta;
          hd.time = r.t[k];
          hd.kind = kinds[static_cast<std::size_t>(f)];
          const fs::path path = out / snapshot_name(hd.kind, i, static_cast<int>(k));
          write_container(path, hd, *fields[static_cast<std::size_t>(f)]);
          h[static_cast<std::size_t>(f)] = sha256_file(path);
        }
        r.hashes.push_back(std::move(h));
      }
      r.ok = true;
    } catch (const Error& e) {
      r.ok = false;
      r.error = e.what();
    }
    r.seconds = seconds_since(t0);
    std::ostringstream os;
    os << "offline: theta[" << i << "] = " << format_double(theta) << (r.ok ? " ok" : " FAILED: " + r.error)
       << " (" << r.newton_iterations << " Newton iterations, " << std::fixed << std::setprecision(1)
       << r.seconds << " s)";
    log(os.str());
  });

  OfflineSummary summary;
  for (const auto& r : results) (r.ok ? summary.trained : summary.failed) += 1;
  if (summary.failed > 0 &&
      static_cast<double>(summary.failed) >= config.failure_budget * static_cast<double>(config.n_train)) {
    throw BudgetExceeded(std::to_string(summary.failed) + " of " + std::to_string(config.n_train) +
                         " offline solves failed, above the failure budget");
  }
  if (summary.trained == 0) throw BudgetExceeded("no offline solve succeeded");

  // snapshot matrices are rebuilt from the persisted files
  const auto t_pod = Clock::now();
  std::array<PodResult, 3> pods;
  for (int f = 0; f < 3; ++f) {
    const FieldKind kind = kinds[static_cast<std::size_t>(f)];
    std::vector<fs::path> files;
    for (int i = 0; i < config.n_train; ++i) {
      const auto& r = results[static_cast<std::size_t>(i)];
      if (!r.ok) continue;
      for (std::size_t k = 0; k < r.hashes.size(); ++k) files.push_back(out / snapshot_name(kind, i, static_cast<int>(k)));
    }
    const auto rows = f == 2 ? disc.dofs.np() : disc.dofs.nu();
    const Matrix s = load_snapshot_matrix(files, static_cast<std::uint64_t>(rows));
    pods[static_cast<std::size_t>(f)] = pod_up_to(s, f == 2 ? disc.mass_p : disc.mass_u, config.n_max);
  }
  summary.rank_u = pods[0].rank;
  summary.rank_s = pods[1].rank;
  summary.rank_p = pods[2].rank;
  const std::array<FieldKind, 3> mode_kinds{FieldKind::VelocityModes, FieldKind::SupremizerModes,
                                            FieldKind::PressureModes};
  for (int f = 0; f < 3; ++f) {
    ContainerHeader hd;
    hd.nu = static_cast<std::uint64_t>(disc.dofs.nu());
    hd.np = static_cast<std::uint64_t>(disc.dofs.np());
    hd.kind = mode_kinds[static_cast<std::size_t>(f)];
    write_container(out / basis_name(hd.kind), hd, pods[static_cast<std::size_t>(f)].modes);
  }
  {
    std::ofstream os(out / "eigenvalues.csv", std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write eigenvalues.csv");
    eigen_decay_report(pods[0].eigenvalues, pods[1].eigenvalues, pods[2].eigenvalues, os);
  }
  const double pod_seconds = seconds_since(t_pod);
  summary.n_basis = std::min({static_cast<int>(pods[0].modes.cols()), static_cast<int>(pods[1].modes.cols()),
                              static_cast<int>(pods[2].modes.cols())});

  json m;
  m["format"] = "cutrom-offline-manifest";
  m["version"] = 1;
  m["case"] = std::string(case_name(config.kind));
  m["config"] = serialize_config(config, false);
  m["kernel_isa"] = std::string(kernels::isa_name(kernels::active_isa()));
  m["linear_solver"] = SparseDirectSolver::backend();
  m["seeds"] = {{"train", config.seed_train}, {"test", config.seed_test}};
  m["mesh"] = {{"nx", disc.mesh.nx()}, {"ny", disc.mesh.ny()}, {"triangles", disc.mesh.num_triangles()},
               {"h", disc.mesh.h()}};
  m["dofs"] = {{"nu", disc.dofs.nu()}, {"np", disc.dofs.np()}};
  m["time_levels"] = times;
  json train = json::array();
  for (int i = 0; i < config.n_train; ++i) {
    const auto& r = results[static_cast<std::size_t>(i)];
    json e;
    e["index"] = i;
    e["theta"] = sample.values[static_cast<std::size_t>(i)];
    e["sign"] = r.sign;
    e["status"] = r.ok ? "ok" : "failed";
    if (!r.ok) e["error"] = r.error;
    e["newton_iterations"] = r.newton_iterations;
    e["elements"] = {{"fluid", r.fluid}, {"cut", r.cut}, {"solid", r.solid}};
    json files = json::array();
    for (std::size_t k = 0; k < r.hashes.size(); ++k) {
      json level;
      level["t"] = r.t[k];
      for (int f = 0; f < 3; ++f) {
        const FieldKind kind = kinds[static_cast<std::size_t>(f)];
        level[std::string(field_kind_name(kind))] = {{"file", snapshot_name(kind, i, static_cast<int>(k))},
                                                     {"sha256", r.hashes[k][static_cast<std::size_t>(f)]}};
      }
      files.push_back(std::move(level));
    }
    e["snapshots"] = std::move(files);
    train.push_back(std::move(e));
  }
  m["training"] = std::move(train);
  json basis;
  for (int f = 0; f < 3; ++f) {
    const auto& pr = pods[static_cast<std::size_t>(f)];
    const FieldKind kind = mode_kinds[static_cast<std::size_t>(f)];
    basis[std::string(field_kind_name(kinds[static_cast<std::size_t>(f)]))] = {
        {"file", basis_name(kind)},
        {"sha256", sha256_file(out / basis_name(kind))},
        {"rank", pr.rank},
        {"modes", pr.modes.cols()},
        {"lambda_1", pr.eigenvalues[0]},
        {"columns", pr.eigenvalues.size()}};
  }
  m["basis"] = std::move(basis);
  m["eigenvalues"] = {{"file", "eigenvalues.csv"}, {"sha256", sha256_file(out / "eigenvalues.csv")}};
  m["failures"] = summary.failed;
  const std::string text = m.dump(2) + "\n";
  write_text(out / "manifest.json", text);
  summary.manifest_hash = sha256_hex(text);
  write_text(out / "manifest.sha256", summary.manifest_hash + "  manifest.json\n");

  json timings;
  timings["total_seconds"] = seconds_since(t_start);
  timings["pod_seconds"] = pod_seconds;
  timings["threads"] = threads;
  json per = json::array();
  for (const auto& r : results) per.push_back(r.seconds);
  timings["solve_seconds"] = std::move(per);
  write_text(out / "timings.json", timings.dump(2) + "\n");

  log("offline: " + std::to_string(summary.trained) + " solves ok, " + std::to_string(summary.failed) +
      " failed; ranks u/s/p = " + std::to_string(summary.rank_u) + "/" + std::to_string(summary.rank_s) + "/" +
      std::to_string(summary.rank_p) + "; manifest " + summary.manifest_hash);
  return summary;
}

ReducedBasis load_basis(const fs::path& output_dir) {
  const json m = read_manifest(output_dir);
  ReducedBasis b;
  const auto read = [&](const char* field, FieldKind expect) {
    const std::string file = m.at("basis").at(field).at("file").get<std::string>();
    Container c = read_container(output_dir / file);
    if (c.header.kind != expect) throw IoError(file + ": unexpected field kind");
    return c.data;
  };
  b.velocity = read("velocity", FieldKind::VelocityModes);
  b.supremizer = read("supremizer", FieldKind::SupremizerModes);
  b.pressure = read("pressure", FieldKind::PressureModes);
  const CsvTable eig = read_csv_file(output_dir / "eigenvalues.csv");
  const auto column = [&](const char* name, const char* field) {
    const int c = eig.column(name);
    if (c < 0) throw IoError(std::string("eigenvalues.csv lacks column ") + name);
    const double l1 = m.at("basis").at(field).at("lambda_1").get<double>();
    Vector v(static_cast<Eigen::Index>(eig.rows.size()));
    for (std::size_t i = 0; i < eig.rows.size(); ++i) v[static_cast<Eigen::Index>(i)] = std::stod(eig.rows[i][static_cast<std::size_t>(c)]) * l1;
    return v;
  };
  b.lambda_u = column("lambda_u", "velocity");
  b.lambda_s = column("lambda_s", "supremizer");
  b.lambda_p = column("lambda_p", "pressure");
  return b;
}

namespace {

struct OnlineRow {
  std::string role;
  int index = 0;
  double theta = 0.0;
  int n = 0;
  double eps_u = std::nan("");
  double eps_p = std::nan("");
  std::string status;
  int iterations = 0;
  double coupling_smin = 0.0;
  double inf_sup = 0.0;
  bool rank_warning = false;
  std::vector<std::array<double, 3>> per_time;  // t, eps_u, eps_p
};

struct OnlineItem {
  std::string role;
  int index;
  double theta;
  std::vector<int> ns;
};

}  // namespace

OnlineSummary run_online(const RunConfig& config, std::ostream* log_stream) {
  validate(config);
  const Log log(log_stream);
  const auto t_start = Clock::now();
  const fs::path out = config.output_dir;
  const json manifest = read_manifest(out);
  const Discretization disc(config);
  if (manifest.at("dofs").at("nu").get<int>() != disc.dofs.nu() ||
      manifest.at("dofs").at("np").get<int>() != disc.dofs.np()) {
    throw ShapeMismatch("offline run in " + out.string() + " used a different mesh");
  }
  const ReducedBasis basis = load_basis(out);
  const int n_avail = basis.max_n(config.supremizers);
  std::vector<int> ns;
  for (int n : config.n_list) {
    if (n <= n_avail && std::find(ns.begin(), ns.end(), n) == ns.end()) ns.push_back(n);
  }
  if (ns.empty()) ns.push_back(n_avail);
  const std::vector<double> times = time_levels(config);

  std::vector<OnlineItem> items;
  const ParameterSample test = sample_parameters(config.space, std::max(config.n_test, 1), config.seed_test);
  for (int i = 0; i < config.n_test; ++i) items.push_back({"test", i, test.values[static_cast<std::size_t>(i)], ns});
  if (config.train_smoke) {
    for (const auto& e : manifest.at("training")) {
      if (e.at("status").get<std::string>() == "ok") {
        items.push_back({"train", e.at("index").get<int>(), e.at("theta").get<double>(), {n_avail}});
        break;
      }
    }
  }
  const int threads = resolve_threads(config.threads);
  log("online: " + std::to_string(items.size()) + " parameters, N in {" + [&] {
    std::string s;
    for (int n : ns) s += (s.empty() ? "" : ",") + std::to_string(n);
    return s;
  }() + "}, " + std::to_string(threads) + " worker(s)");

  std::vector<std::vector<OnlineRow>> rows(items.size());
  std::vector<double> item_seconds(items.size(), 0.0);
  if (config.vtk) fs::create_directories(out / "online" / "vtk");
  fs::create_directories(out / "online");

  parallel_for(static_cast<int>(items.size()), threads, [&](int it) {
    const OnlineItem& item = items[static_cast<std::size_t>(it)];
    auto& out_rows = rows[static_cast<std::size_t>(it)];
    const auto t0 = Clock::now();
    auto base_row = [&](int n) {
      OnlineRow r;
      r.role = item.role;
      r.index = item.index;
      r.theta = item.theta;
      r.n = n;
      return r;
    };
    std::unique_ptr<FomProblem> fom;
    std::vector<Vector> ref_u, ref_p;
    try {
      fom = make_fom(config, disc, item.theta);
      if (config.unsteady) {
        Trajectory tr = fom->solve_unsteady(times, config.newton);
        if (tr.failed_step >= 0) throw NewtonDiverged("reference solve failed", tr.failure_history, tr.failed_step);
        ref_u = std::move(tr.u0);
        ref_p = std::move(tr.p);
      } else {
        SteadySolution sol = fom->solve_steady(config.newton);
        ref_u.push_back(std::move(sol.u0));
        ref_p.push_back(std::move(sol.p));
      }
    } catch (const Error& e) {
      for (int n : item.ns) {
        OnlineRow r = base_row(n);
        r.status = "fom_failed";
        out_rows.push_back(std::move(r));
      }
      log("online: theta " + format_double(item.theta) + " reference solve failed: " + e.what());
      return;
    }
    const auto& mask_u = fom->space().active().velocity;
    const auto& mask_p = fom->space().active().pressure;
    for (int n : item.ns) {
      OnlineRow r = base_row(n);
      try {
        const ReducedProblem rp(*fom, basis.velocity_space(n, config.supremizers), basis.pressure_space(n),
                                disc.mass_u, config.reduced_mass);
        const Eigen::JacobiSVD<Matrix> svd(rp.coupling_block());
        r.coupling_smin = svd.singularValues().size() > 0 ? svd.singularValues().minCoeff() : 0.0;
        r.inf_sup = rp.inf_sup_constant(disc.mass_p);
        r.rank_warning = r.inf_sup < config.rank_tolerance;
        if (r.rank_warning) {
          log("online: WARNING reduced pressure coupling is nearly rank deficient at theta " +
              format_double(item.theta) + ", N = " + std::to_string(n) + " (inf-sup " + num(r.inf_sup) + ")");
        }
        std::vector<std::pair<Vector, Vector>> rom_fields;
        if (config.unsteady) {
          const ReducedTrajectory rt = rp.solve_unsteady(times, config.newton);
          for (int k : rt.newton_iterations) r.iterations += k;
          for (std::size_t k = 1; k < rt.coefficients.size(); ++k) {
            auto [u0, p] = rp.reconstruct(rt.coefficients[k]);
            const double eu = relative_error_L2(full_velocity(ref_u[k], *fom), full_velocity(u0, *fom), disc.mass_u, mask_u);
            const double ep = relative_error_L2(ref_p[k], p, disc.mass_p, mask_p);
            r.per_time.push_back({rt.times[k], eu, ep});
            if (k + 1 == rt.coefficients.size()) rom_fields.emplace_back(std::move(u0), std::move(p));
          }
          if (rt.failed_step >= 0) {
            r.status = "rom_failed";
          } else {
            std::vector<double> eu, ep;
            for (const auto& pt : r.per_time) {
              eu.push_back(pt[1]);
              ep.push_back(pt[2]);
            }
            r.eps_u = mean(eu);
            r.eps_p = mean(ep);
            r.status = "ok";
          }
        } else {
          const ReducedSolution rs = rp.solve_steady(config.newton);
          r.iterations = rs.report.iterations;
          auto [u0, p] = rp.reconstruct(rs.coefficients);
          r.eps_u = relative_error_L2(full_velocity(ref_u[0], *fom), full_velocity(u0, *fom), disc.mass_u, mask_u);
          r.eps_p = relative_error_L2(ref_p[0], p, disc.mass_p, mask_p);
          r.status = "ok";
          rom_fields.emplace_back(std::move(u0), std::move(p));
        }
        if (config.vtk && item.role == "test" && n == item.ns.back() && !rom_fields.empty()) {
          const Vector fu = full_velocity(ref_u.back(), *fom);
          const Vector ru = full_velocity(rom_fields.back().first, *fom);
          const Vector eu = (fu - ru).cwiseAbs();
          const Vector ep = (ref_p.back() - rom_fields.back().second).cwiseAbs();
          std::ofstream os(out / "online" / "vtk" / ("theta_" + padded(item.index) + ".vtk"));
          write_field_vtk(os, disc.dofs, fom->classification(),
                          {{"fom_velocity", &fu, true}, {"rom_velocity", &ru, true}, {"error_velocity", &eu, true},
                           {"fom_pressure", &ref_p.back(), false}, {"rom_pressure", &rom_fields.back().second, false},
                           {"error_pressure", &ep, false}});
        }
      } catch (const Error& e) {
        r.status = "rom_failed";
        log("online: theta " + format_double(item.theta) + ", N = " + std::to_string(n) + " failed: " + e.what());
      }
      out_rows.push_back(std::move(r));
    }
    item_seconds[static_cast<std::size_t>(it)] = seconds_since(t0);
    std::ostringstream os;
    os << "online: " << item.role << "[" << item.index << "] theta = " << format_double(item.theta);
    for (const auto& r : out_rows) os << " | N=" << r.n << " eps_u=" << num(r.eps_u) << " eps_p=" << num(r.eps_p);
    log(os.str());
  });

  OnlineSummary summary;
  {
    std::ofstream os(out / "online" / "report.csv", std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write online/report.csv");
    CsvWriter csv(os);
    csv.row({"role", "index", "theta", "N", "supremizers", "eps_u", "eps_p", "status", "newton_iterations",
             "coupling_smin", "inf_sup", "rank_warning"});
    for (const auto& item_rows : rows) {
      for (const auto& r : item_rows) {
        csv.row({r.role, std::to_string(r.index), format_double(r.theta), std::to_string(r.n),
                 config.supremizers ? "true" : "false", num(r.eps_u), num(r.eps_p), r.status,
                 std::to_string(r.iterations), num(r.coupling_smin), num(r.inf_sup),
                 r.rank_warning ? "true" : "false"});
        ++summary.rows;
        if (r.status != "ok") ++summary.failures;
        if (r.rank_warning) ++summary.rank_warnings;
      }
    }
  }
  if (config.unsteady) {
    std::ofstream os(out / "online" / "report_time.csv", std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write online/report_time.csv");
    CsvWriter csv(os);
    csv.row({"role", "index", "theta", "N", "step", "t", "eps_u", "eps_p"});
    for (const auto& item_rows : rows) {
      for (const auto& r : item_rows) {
        for (std::size_t k = 0; k < r.per_time.size(); ++k) {
          csv.row({r.role, std::to_string(r.index), format_double(r.theta), std::to_string(r.n),
                   std::to_string(k + 1), format_double(r.per_time[k][0]), num(r.per_time[k][1]),
                   num(r.per_time[k][2])});
        }
      }
    }
  }
  summarize_report(out / "online" / "report.csv", out / "online" / "summary.csv");
  json timings;
  timings["total_seconds"] = seconds_since(t_start);
  timings["threads"] = threads;
  timings["item_seconds"] = item_seconds;
  write_text(out / "online" / "timings.json", timings.dump(2) + "\n");
  log("online: " + std::to_string(summary.rows) + " rows, " + std::to_string(summary.failures) + " failures, " +
      std::to_string(summary.rank_warnings) + " rank warnings");
  return summary;
}

void summarize_report(const fs::path& report, const fs::path& summary) {
  const CsvTable t = read_csv_file(report);
  const int c_role = t.column("role"), c_n = t.column("N"), c_u = t.column("eps_u"), c_p = t.column("eps_p"),
            c_status = t.column("status");
  if (c_role < 0 || c_n < 0 || c_u < 0 || c_p < 0 || c_status < 0) {
    throw IoError(report.string() + " is not an online report");
  }
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_n;
  std::map<int, int> failures;
  for (const auto& row : t.rows) {
    if (row[static_cast<std::size_t>(c_role)] != "test") continue;
    const int n = std::stoi(row[static_cast<std::size_t>(c_n)]);
    if (row[static_cast<std::size_t>(c_status)] != "ok") {
      ++failures[n];
      by_n[n];
      continue;
    }
    by_n[n].first.push_back(std::stod(row[static_cast<std::size_t>(c_u)]));
    by_n[n].second.push_back(std::stod(row[static_cast<std::size_t>(c_p)]));
  }
  std::ofstream os(summary, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + summary.string());
  CsvWriter csv(os);
  csv.row({"N", "count", "failures", "mean_eps_u", "mean_eps_p"});
  for (const auto& [n, v] : by_n) {
    csv.row({std::to_string(n), std::to_string(v.first.size()), std::to_string(failures[n]),
             v.first.empty() ? "nan" : num(mean(v.first)), v.second.empty() ? "nan" : num(mean(v.second))});
  }
}

void export_fields(const RunConfig& config, double theta, int n, const fs::path& path) {
  validate(config);
  const Discretization disc(config);
  const ReducedBasis basis = load_basis(config.output_dir);
  const auto fom = make_fom(config, disc, theta);
  const ReducedProblem rp(*fom, basis.velocity_space(n, config.supremizers), basis.pressure_space(n), disc.mass_u,
                          config.reduced_mass);
  Vector fu0, fp, ru0, rp_field;
  if (config.unsteady) {
    const std::vector<double> times = time_levels(config);
    const Trajectory tr = fom->solve_unsteady(times, config.newton);
    if (tr.failed_step >= 0) throw NewtonDiverged("reference solve failed", tr.failure_history, tr.failed_step);
    const ReducedTrajectory rt = rp.solve_unsteady(times, config.newton);
    if (rt.failed_step >= 0) throw NewtonDiverged("reduced solve failed", rt.failure_history, rt.failed_step);
    fu0 = tr.u0.back();
    fp = tr.p.back();
    std::tie(ru0, rp_field) = rp.reconstruct(rt.coefficients.back());
  } else {
    const SteadySolution sol = fom->solve_steady(config.newton);
    fu0 = sol.u0;
    fp = sol.p;
    std::tie(ru0, rp_field) = rp.reconstruct(rp.solve_steady(config.newton).coefficients);
  }
  const Vector fu = full_velocity(fu0, *fom);
  const Vector ru = full_velocity(ru0, *fom);
  const Vector eu = (fu - ru).cwiseAbs();
  const Vector ep = (fp - rp_field).cwiseAbs();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string());
  write_field_vtk(os, disc.dofs, fom->classification(),
                  {{"fom_velocity", &fu, true}, {"rom_velocity", &ru, true}, {"error_velocity", &eu, true},
                   {"fom_pressure", &fp, false}, {"rom_pressure", &rp_field, false}, {"error_pressure", &ep, false}});
}

void export_mesh(const RunConfig& config, double theta, const fs::path& dir, bool operators) {
  validate(config);
  fs::create_directories(dir);
  const Discretization disc(config);
  const auto fom = make_fom(config, disc, theta);
  const CutClassification& cls = fom->classification();
  {
    std::ofstream os(dir / "mesh.vtk");
    if (!os) throw IoError("cannot write mesh.vtk");
    write_mesh_vtk(os, disc.mesh, &cls);
  }
  {
    std::ofstream os(dir / "elements.csv", std::ios::binary);
    if (!os) throw IoError("cannot write elements.csv");
    CsvWriter csv(os);
    csv.row({"element", "status", "fluid_area", "interface_length"});
    const char* names[] = {"fluid", "cut", "solid"};
    for (int t = 0; t < disc.mesh.num_triangles(); ++t) {
      const CutStatus s = cls.status[static_cast<std::size_t>(t)];
      double area = 0.0, length = 0.0;
      if (s != CutStatus::Solid) area = physical_quadrature(disc.mesh, cls, t, 1).total_weight();
      if (s == CutStatus::Cut) length = interface_quadrature(disc.mesh, cls, t, 1).total_weight();
      csv.row({std::to_string(t), names[static_cast<int>(s)], format_double(area), format_double(length)});
    }
  }
  {
    std::ofstream os(dir / "dofs.csv", std::ios::binary);
    if (!os) throw IoError("cannot write dofs.csv");
    write_dof_csv(os, disc.dofs);
  }
  if (operators) {
    const Vector x = fom->compact_state(Vector::Zero(disc.dofs.nu()), Vector::Zero(disc.dofs.np()));
    const Linearization lin = fom->assembler().residual(x, true);
    std::ofstream j(dir / "jacobian.coo");
    write_coo(j, lin.jacobian);
    std::ofstream m(dir / "mass.coo");
    write_coo(m, fom->physical_mass());
  }
}

std::vector<CheckResult> verify_invariants(const RunConfig& config) {
  validate(config);
  std::vector<CheckResult> out;
  const Discretization disc(config);
  const double mid = 0.5 * (config.space.lo + config.space.hi);
  auto record = [&](const std::string& name, bool ok, const std::string& detail) {
    out.push_back({name, ok, detail});
  };

  {
    double total = 0.0;
    for (int t = 0; t < disc.mesh.num_triangles(); ++t) total += disc.mesh.area(t);
    const double err = std::abs(total - config.rect.area());
    record("mesh_partition", err <= 1e-12 * config.rect.area(), "|sum area - rect area| = " + num(err));
  }
  const auto fom = make_fom(config, disc, mid);
  const CutClassification& cls = fom->classification();
  {
    double fluid = 0.0;
    bool ok = true;
    for (int t : cls.active_elements) {
      const double a = physical_quadrature(disc.mesh, cls, t, 1).total_weight();
      ok = ok && a >= -1e-14 && a <= disc.mesh.area(t) * (1.0 + 1e-12);
      fluid += a;
    }
    record("fluid_area_bounds", ok && fluid > 0.0 && fluid <= config.rect.area() * (1.0 + 1e-12),
           "fluid area " + num(fluid) + " at theta " + num(mid));
  }
  {
    bool ok = true;
    for (int f : cls.ghost_facets) {
      const Facet& fc = disc.mesh.facets()[static_cast<std::size_t>(f)];
      ok = ok && cls.is_active(fc.elements[0]) && cls.is_active(fc.elements[1]) &&
           (cls.is_cut(fc.elements[0]) || cls.is_cut(fc.elements[1]));
    }
    record("ghost_facets_touch_cut", ok, std::to_string(cls.ghost_facets.size()) + " ghost facets");
  }
  {
    // ghost penalties alone, linear in the state: x^T G x >= 0
    std::mt19937_64 rng(config.seed_train);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const unsigned mask = terms::kGhostU | terms::kGhostMu | terms::kGhostP;
    double worst = 0.0;
    for (int probe = 0; probe < 10; ++probe) {
      Vector x(fom->space().size());
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = uni(rng);
      const Vector r = fom->assembler().residual(x, false, mask).residual;
      worst = std::min(worst, x.dot(r) / std::max(x.squaredNorm(), 1e-300));
    }
    record("ghost_psd", worst >= -1e-12, "min x.G(x)/|x|^2 = " + num(worst));
  }
  {
    std::mt19937_64 rng(config.seed_test);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Vector x = fom->compact_state(Vector::Zero(disc.dofs.nu()), Vector::Zero(disc.dofs.np()));
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += 0.1 * uni(rng);
    Vector d(x.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = uni(rng);
    const Linearization lin = fom->assembler().residual(x, true);
    const Vector jd = lin.jacobian * d;
    const double eps = 1e-6;
    const Vector fd = (fom->assembler().residual(x + eps * d, false).residual -
                       fom->assembler().residual(x - eps * d, false).residual) / (2.0 * eps);
    const double rel = (fd - jd).norm() / std::max(jd.norm(), 1e-300);
    record("jacobian_fd", rel <= 1e-5, "central difference mismatch " + num(rel));
  }
  if (fs::exists(fs::path(config.output_dir) / "manifest.json")) {
    const ReducedBasis b = load_basis(config.output_dir);
    const auto orth = [](const Matrix& l, const SparseMatrix& m) {
      if (l.cols() == 0) return 0.0;
      return (l.transpose() * (m * l) - Matrix::Identity(l.cols(), l.cols())).cwiseAbs().maxCoeff();
    };
    const double e = std::max({orth(b.velocity, disc.mass_u), orth(b.supremizer, disc.mass_u),
                               orth(b.pressure, disc.mass_p)});
    record("basis_orthonormal", e <= 1e-10, "max |L^T M L - I| = " + num(e));
    bool mono = true;
    for (const Vector* l : {&b.lambda_u, &b.lambda_s, &b.lambda_p}) {
      for (Eigen::Index i = 1; i < l->size(); ++i) mono = mono && (*l)[i] <= (*l)[i - 1];
    }
    record("eigenvalues_non_increasing", mono, "");
  }
  return out;
}

}  // namespace cutrom
