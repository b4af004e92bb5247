#include "cutrom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "cutrom/errors.hpp"

namespace cutrom {

double wavy_levelset_eval(double x, double y, double theta, const WavyConstants& k) {
  const double a = std::sqrt(k.k1) * std::abs(x - k.k3);
  const double b = std::sqrt(k.k2) * std::abs(y - k.k4);
  const double c = std::sqrt(k.k2) * std::abs(y - k.k5);
  const double dx = x - k.k3;
  const double d = std::exp(-theta) * k.k1 * dx * dx * theta - 4.0;
  const double lower = std::abs(a + b - 1.0) + std::abs(a - b - 2.0) + d;
  const double upper = std::abs(a + c - 1.0) + std::abs(a - c - 2.0) + d;
  return -lower * upper;
}

double cylinder_levelset_eval(double x, double y, double theta, double radius, double center_x) {
  const double dx = x - center_x;
  const double dy = y - theta;
  return dx * dx + dy * dy - radius * radius;
}

LevelsetFamily LevelsetFamily::wavy_wall(const WavyConstants& k) {
  LevelsetFamily f;
  f.kind = LevelsetKind::WavyWall;
  f.wavy = k;
  return f;
}

LevelsetFamily LevelsetFamily::cylinder(double radius, double center_x) {
  if (!(radius > 0.0)) throw ValidationError("cylinder radius must be positive");
  LevelsetFamily f;
  f.kind = LevelsetKind::Cylinder;
  f.radius = radius;
  f.center_x = center_x;
  return f;
}

double LevelsetFamily::eval(double x, double y, double theta) const {
  switch (kind) {
    case LevelsetKind::WavyWall:
      return wavy_levelset_eval(x, y, theta, wavy);
    case LevelsetKind::Cylinder:
      return cylinder_levelset_eval(x, y, theta, radius, center_x);
  }
  return 0.0;
}

OrientedLevelset::OrientedLevelset(LevelsetFamily family, double theta, int sign)
    : family_(family), theta_(theta), sign_(sign >= 0 ? 1 : -1) {}

OrientedLevelset orient_fluid_sign(const LevelsetFamily& family, double theta, Point anchor) {
  const double value = family.eval(anchor.x, anchor.y, theta);
  if (std::abs(value) < 1e-12) {
    std::ostringstream os;
    os << "anchor (" << anchor.x << ", " << anchor.y << ") lies on the interface at theta="
       << theta;
    throw AnchorOnInterface(os.str());
  }
  return OrientedLevelset(family, theta, value < 0.0 ? 1 : -1);
}

OrientedLevelset orient_fluid_sign(const OrientedLevelset& oriented, Point anchor) {
  const double value = oriented(anchor);
  if (std::abs(value) < 1e-12) throw AnchorOnInterface("anchor lies on the interface");
  const int sign = value < 0.0 ? oriented.sign() : -oriented.sign();
  return OrientedLevelset(oriented.family(), oriented.theta(), sign);
}

ParameterSample sample_parameters(const ParameterSpace& space, int count, std::uint64_t seed) {
  if (count < 1) throw ValidationError("sample_parameters: count must be >= 1");
  if (!(space.lo < space.hi)) throw ValidationError("parameter space requires lo < hi");
  std::mt19937_64 rng(seed);
  ParameterSample sample;
  sample.values.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    sample.values.push_back(space.lo + (space.hi - space.lo) * unit);
  }
  sample.sorted = sample.values;
  std::sort(sample.sorted.begin(), sample.sorted.end());
  return sample;
}

}  // namespace cutrom
