#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cutrom/errors.hpp"
#include "cutrom/harness.hpp"
#include "cutrom/io.hpp"

namespace cutrom {
namespace {

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ValidationError(key + ": expected a finite number, got '" + v + "'");
  }
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ValidationError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < -2147483647LL || x > 2147483647LL) throw ValidationError(key + ": out of range");
  return static_cast<int>(x);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ValidationError(key + ": expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError(key + ": expected true or false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ValidationError(key + ": empty list entry");
    out.push_back(to_int(key, item.substr(b, e - b + 1)));
  }
  return out;
}

std::string str(double v) { return format_double(v); }
std::string str(bool v) { return v ? "true" : "false"; }
std::string str(int v) { return std::to_string(v); }
std::string str(std::uint64_t v) { return std::to_string(v); }

struct Key {
  std::string name;  // section.key
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CUTROM_DOUBLE_KEY(NAME, FIELD)                                                        \
  Key {                                                                                       \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = to_double(NAME, v); },           \
        [](const RunConfig& c) { return str(c.FIELD); }                                       \
  }
#define CUTROM_INT_KEY(NAME, FIELD)                                                           \
  Key {                                                                                       \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = to_int(NAME, v); },              \
        [](const RunConfig& c) { return str(c.FIELD); }                                       \
  }
#define CUTROM_BOOL_KEY(NAME, FIELD)                                                          \
  Key {                                                                                       \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = to_bool(NAME, v); },             \
        [](const RunConfig& c) { return str(c.FIELD); }                                       \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table{
      Key{"geometry.family",
          [](RunConfig& c, const std::string& v) {
            if (v == "wavy") {
              c.family.kind = LevelsetKind::WavyWall;
            } else if (v == "cylinder") {
              c.family.kind = LevelsetKind::Cylinder;
            } else {
              throw ValidationError("geometry.family: expected wavy or cylinder, got '" + v + "'");
            }
          },
          [](const RunConfig& c) {
            return std::string(c.family.kind == LevelsetKind::WavyWall ? "wavy" : "cylinder");
          }},
      CUTROM_DOUBLE_KEY("geometry.k1", family.wavy.k1),
      CUTROM_DOUBLE_KEY("geometry.k2", family.wavy.k2),
      CUTROM_DOUBLE_KEY("geometry.k3", family.wavy.k3),
      CUTROM_DOUBLE_KEY("geometry.k4", family.wavy.k4),
      CUTROM_DOUBLE_KEY("geometry.k5", family.wavy.k5),
      CUTROM_DOUBLE_KEY("geometry.radius", family.radius),
      CUTROM_DOUBLE_KEY("geometry.center_x", family.center_x),
      CUTROM_DOUBLE_KEY("geometry.theta_min", space.lo),
      CUTROM_DOUBLE_KEY("geometry.theta_max", space.hi),
      CUTROM_DOUBLE_KEY("geometry.anchor_x", anchor.x),
      CUTROM_DOUBLE_KEY("geometry.anchor_y", anchor.y),
      CUTROM_DOUBLE_KEY("mesh.x0", rect.x0),
      CUTROM_DOUBLE_KEY("mesh.y0", rect.y0),
      CUTROM_DOUBLE_KEY("mesh.x1", rect.x1),
      CUTROM_DOUBLE_KEY("mesh.y1", rect.y1),
      CUTROM_DOUBLE_KEY("mesh.h", h),
      CUTROM_DOUBLE_KEY("physics.mu", mu),
      CUTROM_DOUBLE_KEY("physics.u_in_x", u_in.x),
      CUTROM_DOUBLE_KEY("physics.u_in_y", u_in.y),
      CUTROM_DOUBLE_KEY("stabilization.gamma", stab.gamma),
      CUTROM_DOUBLE_KEY("stabilization.gamma_phi", stab.gamma_phi),
      CUTROM_DOUBLE_KEY("stabilization.gamma_u", stab.gamma_u),
      CUTROM_DOUBLE_KEY("stabilization.gamma_p", stab.gamma_p),
      CUTROM_DOUBLE_KEY("stabilization.gamma_mu", stab.gamma_mu),
      CUTROM_DOUBLE_KEY("stabilization.gamma_beta", stab.gamma_beta),
      CUTROM_DOUBLE_KEY("stabilization.alpha", stab.alpha),
      CUTROM_DOUBLE_KEY("stabilization.c_u", stab.c_u),
      CUTROM_DOUBLE_KEY("stabilization.lambda_s", stab.lambda_s),
      CUTROM_DOUBLE_KEY("stabilization.gamma_s0", stab.gamma_s0),
      CUTROM_DOUBLE_KEY("stabilization.gamma_s1", stab.gamma_s1),
      CUTROM_INT_KEY("stabilization.ghost_u_max_j", stab.ghost_u_max_j),
      Key{"stabilization.ghost_facets",
          [](RunConfig& c, const std::string& v) {
            if (v == "any_cut") {
              c.ghost_policy = GhostFacetPolicy::AnyCutNeighbor;
            } else if (v == "cut_cut") {
              c.ghost_policy = GhostFacetPolicy::CutCutOnly;
            } else {
              throw ValidationError("stabilization.ghost_facets: expected any_cut or cut_cut");
            }
          },
          [](const RunConfig& c) {
            return std::string(c.ghost_policy == GhostFacetPolicy::AnyCutNeighbor ? "any_cut"
                                                                                  : "cut_cut");
          }},
      CUTROM_INT_KEY("quadrature.volume", assembly.volume_order),
      CUTROM_INT_KEY("quadrature.interface", assembly.interface_order),
      CUTROM_INT_KEY("quadrature.supremizer", assembly.supremizer_order),
      CUTROM_INT_KEY("quadrature.ghost", assembly.ghost_order),
      CUTROM_DOUBLE_KEY("solver.newton_tol", newton.tol),
      CUTROM_DOUBLE_KEY("solver.newton_abs_floor", newton.abs_floor),
      CUTROM_INT_KEY("solver.newton_max_iter", newton.max_iter),
      CUTROM_INT_KEY("solver.growth_limit", newton.growth_limit),
      CUTROM_INT_KEY("solver.max_halvings", newton.max_halvings),
      CUTROM_BOOL_KEY("solver.continuation", newton.continuation),
      Key{"solver.jacobian",
          [](RunConfig& c, const std::string& v) {
            if (v == "exact") {
              c.assembly.jacobian = JacobianMode::Exact;
            } else if (v == "frozen") {
              c.assembly.jacobian = JacobianMode::Frozen;
            } else {
              throw ValidationError("solver.jacobian: expected exact or frozen");
            }
          },
          [](const RunConfig& c) {
            return std::string(c.assembly.jacobian == JacobianMode::Exact ? "exact" : "frozen");
          }},
      CUTROM_BOOL_KEY("solver.unsteady", unsteady),
      CUTROM_DOUBLE_KEY("solver.tau", tau),
      CUTROM_DOUBLE_KEY("solver.final_time", final_time),
      CUTROM_INT_KEY("rom.n_train", n_train),
      CUTROM_INT_KEY("rom.n_test", n_test),
      Key{"rom.n_list",
          [](RunConfig& c, const std::string& v) { c.n_list = to_int_list("rom.n_list", v); },
          [](const RunConfig& c) {
            std::string out;
            for (std::size_t i = 0; i < c.n_list.size(); ++i) {
              if (i > 0) out += ',';
              out += std::to_string(c.n_list[i]);
            }
            return out;
          }},
      CUTROM_INT_KEY("rom.n_max", n_max),
      Key{"rom.seed_train",
          [](RunConfig& c, const std::string& v) { c.seed_train = to_u64("rom.seed_train", v); },
          [](const RunConfig& c) { return str(c.seed_train); }},
      Key{"rom.seed_test",
          [](RunConfig& c, const std::string& v) { c.seed_test = to_u64("rom.seed_test", v); },
          [](const RunConfig& c) { return str(c.seed_test); }},
      CUTROM_BOOL_KEY("rom.supremizers", supremizers),
      Key{"rom.reduced_mass",
          [](RunConfig& c, const std::string& v) {
            if (v == "background") {
              c.reduced_mass = ReducedMass::Background;
            } else if (v == "physical") {
              c.reduced_mass = ReducedMass::Physical;
            } else {
              throw ValidationError("rom.reduced_mass: expected background or physical");
            }
          },
          [](const RunConfig& c) {
            return std::string(c.reduced_mass == ReducedMass::Background ? "background" : "physical");
          }},
      CUTROM_DOUBLE_KEY("rom.rank_tolerance", rank_tolerance),
      CUTROM_DOUBLE_KEY("rom.failure_budget", failure_budget),
      CUTROM_BOOL_KEY("rom.train_smoke", train_smoke),
      Key{"io.output_dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
          [](const RunConfig& c) { return c.output_dir; }},
      CUTROM_INT_KEY("io.threads", threads),
      CUTROM_BOOL_KEY("io.vtk", vtk),
  };
  return table;
}

#undef CUTROM_DOUBLE_KEY
#undef CUTROM_INT_KEY
#undef CUTROM_BOOL_KEY

const Key* find_key(const std::string& name) {
  for (const Key& k : keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

const std::set<std::string>& sections() {
  static const std::set<std::string> s{"geometry", "mesh",   "physics", "stabilization",
                                       "quadrature", "solver", "rom",     "io"};
  return s;
}

}  // namespace

std::string_view case_name(CaseKind kind) {
  switch (kind) {
    case CaseKind::SteadyWavy: return "steady_wavy";
    case CaseKind::UnsteadyWavy: return "unsteady_wavy";
    case CaseKind::UnsteadyCylinder: return "unsteady_cylinder";
  }
  return "unknown";
}

CaseKind parse_case(std::string_view name) {
  for (CaseKind k : {CaseKind::SteadyWavy, CaseKind::UnsteadyWavy, CaseKind::UnsteadyCylinder}) {
    if (case_name(k) == name) return k;
  }
  throw ValidationError("unknown case '" + std::string(name) +
                        "' (expected steady_wavy, unsteady_wavy or unsteady_cylinder)");
}

RunConfig preset(CaseKind kind) {
  RunConfig c;
  c.kind = kind;
  switch (kind) {
    case CaseKind::SteadyWavy:
      c.n_train = 150;
      c.n_test = 30;
      break;
    case CaseKind::UnsteadyWavy:
      c.unsteady = true;
      c.n_train = 200;
      c.n_test = 30;
      c.tau = 0.011;
      c.final_time = 0.7;
      break;
    case CaseKind::UnsteadyCylinder:
      c.family = LevelsetFamily::cylinder(0.2, -1.5);
      c.space = ParameterSpace::cylinder_default();
      c.anchor = {0.5 * (c.rect.x0 + c.rect.x1), 0.5 * (c.rect.y0 + c.rect.y1)};
      c.unsteady = true;
      c.n_train = 200;
      c.n_test = 30;
      c.tau = c.h / 6.0;
      c.final_time = 0.7;
      break;
  }
  return c;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Key& k : keys()) out.push_back(k.name);
  return out;
}

void apply_override(RunConfig& config, const std::string& dotted_key, const std::string& value) {
  if (dotted_key == "case") {
    config.kind = parse_case(value);
    return;
  }
  const Key* k = find_key(dotted_key);
  if (k == nullptr) throw ParseError("unknown configuration key '" + dotted_key + "'", 0);
  k->set(config, value);
}

RunConfig parse_config_text(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(e.message(), static_cast<int>(e.line()));
  }
  CaseKind kind = CaseKind::SteadyWavy;
  for (const auto& [name, node] : tree) {
    if (node.empty() && sections().count(name) == 0) {
      if (name != "case") throw ParseError("unknown top-level key '" + name + "'", 0);
      kind = parse_case(node.data());
    }
  }
  RunConfig c = preset(kind);
  for (const auto& [name, node] : tree) {
    if (node.empty() && sections().count(name) == 0) continue;
    if (sections().count(name) == 0) throw ParseError("unknown section [" + name + "]", 0);
    if (node.empty() && !node.data().empty()) {
      throw ParseError("'" + name + "' is a section name, not a key", 0);
    }
    for (const auto& [key, leaf] : node) {
      if (!leaf.empty()) throw ParseError("nested key in section [" + name + "]", 0);
      const std::string dotted = name + "." + key;
      const Key* k = find_key(dotted);
      if (k == nullptr) throw ParseError("unknown key '" + key + "' in section [" + name + "]", 0);
      k->set(c, leaf.data());
    }
  }
  validate(c);
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open configuration " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const RunConfig& config, bool with_io) {
  std::ostringstream os;
  os << "case = " << case_name(config.kind) << "\n";
  std::string section;
  for (const Key& k : keys()) {
    const auto dot = k.name.find('.');
    const std::string s = k.name.substr(0, dot);
    if (!with_io && s == "io") continue;
    if (s != section) {
      os << "\n[" << s << "]\n";
      section = s;
    }
    os << k.name.substr(dot + 1) << " = " << k.get(config) << "\n";
  }
  return os.str();
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& what) { throw ValidationError(what); };
  if (!(c.h > 0.0)) fail("mesh.h must be positive");
  if (!(c.rect.x1 > c.rect.x0) || !(c.rect.y1 > c.rect.y0)) fail("mesh rectangle is degenerate");
  if (c.rect.x1 - c.rect.x0 < c.h || c.rect.y1 - c.rect.y0 < c.h) fail("mesh.h exceeds the rectangle");
  if (!(c.mu > 0.0)) fail("physics.mu must be positive");
  if (!(c.space.lo < c.space.hi)) fail("geometry.theta_min must be below geometry.theta_max");
  if (c.family.kind == LevelsetKind::Cylinder && !(c.family.radius > 0.0)) {
    fail("geometry.radius must be positive");
  }
  if (c.anchor.x < c.rect.x0 || c.anchor.x > c.rect.x1 || c.anchor.y < c.rect.y0 ||
      c.anchor.y > c.rect.y1) {
    fail("geometry anchor must lie inside the mesh rectangle");
  }
  if (c.stab.ghost_u_max_j < 0 || c.stab.ghost_u_max_j > 1) fail("stabilization.ghost_u_max_j must be 0 or 1");
  for (double g : {c.stab.gamma, c.stab.gamma_phi, c.stab.gamma_u, c.stab.gamma_p, c.stab.gamma_mu,
                   c.stab.gamma_beta, c.stab.c_u, c.stab.lambda_s, c.stab.gamma_s0, c.stab.gamma_s1}) {
    if (g < 0.0) fail("stabilization constants must be non-negative");
  }
  auto order_ok = [](int o) { return o >= 1 && o <= 6; };
  if (!order_ok(c.assembly.volume_order) || !order_ok(c.assembly.interface_order) ||
      !order_ok(c.assembly.supremizer_order) || !order_ok(c.assembly.ghost_order)) {
    fail("quadrature orders must lie in 1..6");
  }
  if (!(c.newton.tol > 0.0) || c.newton.abs_floor < 0.0) fail("solver tolerances must be positive");
  if (c.newton.max_iter < 1 || c.newton.growth_limit < 1 || c.newton.max_halvings < 0) {
    fail("solver iteration limits must be positive");
  }
  if (c.unsteady && (!(c.tau > 0.0) || !(c.final_time > 0.0))) fail("solver.tau and solver.final_time must be positive");
  if (c.n_train < 1) fail("rom.n_train must be at least 1");
  if (c.n_test < 0) fail("rom.n_test must be non-negative");
  if (c.n_max < 1) fail("rom.n_max must be at least 1");
  for (int n : c.n_list) {
    if (n < 1) fail("rom.n_list entries must be at least 1");
  }
  if (!(c.rank_tolerance >= 0.0)) fail("rom.rank_tolerance must be non-negative");
  if (!(c.failure_budget >= 0.0) || !(c.failure_budget < 1.0)) fail("rom.failure_budget must lie in [0, 1)");
  if (c.threads < 0) fail("io.threads must be non-negative");
  if (c.output_dir.empty()) fail("io.output_dir must not be empty");
}

}  // namespace cutrom
