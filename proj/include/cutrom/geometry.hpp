#pragma once

// Parameterized levelset families and the fluid-side orientation.

#include <cstdint>
#include <vector>

namespace cutrom {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

enum class LevelsetKind { WavyWall, Cylinder };

/// Shape constants of the wavy-wall family (dimensionless).
struct WavyConstants {
  double k1 = 10.0;
  double k2 = 10.0;
  double k3 = -2.0;
  double k4 = -1.0;
  double k5 = 1.0;
  friend bool operator==(const WavyConstants&, const WavyConstants&) = default;
};

/// Solid walls attached to the top and bottom of the channel:
///   phi = -(|A+B-1| + |A-B-2| + D) * (|A+C-1| + |A-C-2| + D)
/// with A = sqrt(k1)|x-k3|, B = sqrt(k2)|y-k4|, C = sqrt(k2)|y-k5|,
/// D = exp(-theta) * k1 (x-k3)^2 * theta - 4.
double wavy_levelset_eval(double x, double y, double theta, const WavyConstants& k);

/// Circle of radius r centred at (center_x, theta).
double cylinder_levelset_eval(double x, double y, double theta, double radius,
                              double center_x = -1.5);

struct LevelsetFamily {
  LevelsetKind kind = LevelsetKind::WavyWall;
  WavyConstants wavy{};
  double center_x = -1.5;  // cm
  double radius = 0.2;     // cm

  static LevelsetFamily wavy_wall(const WavyConstants& k = {});
  static LevelsetFamily cylinder(double radius = 0.2, double center_x = -1.5);

  double eval(double x, double y, double theta) const;
  friend bool operator==(const LevelsetFamily&, const LevelsetFamily&) = default;
};

/// A levelset at fixed theta whose sign is flipped so that the fluid is the
/// negative side: fluid = { sign * phi < 0 }.
class OrientedLevelset {
 public:
  OrientedLevelset(LevelsetFamily family, double theta, int sign);

  double operator()(double x, double y) const { return sign_ * family_.eval(x, y, theta_); }
  double operator()(Point p) const { return (*this)(p.x, p.y); }

  const LevelsetFamily& family() const { return family_; }
  double theta() const { return theta_; }
  int sign() const { return sign_; }

 private:
  LevelsetFamily family_;
  double theta_;
  int sign_;
};

/// Picks the sign so that the anchor lies on the fluid side. The anchor must be
/// a point known to be fluid; passing a solid point silently flips the result.
/// Throws AnchorOnInterface when |phi(anchor)| < 1e-12.
OrientedLevelset orient_fluid_sign(const LevelsetFamily& family, double theta, Point anchor);

/// Re-orienting keeps the sign of an already oriented levelset.
OrientedLevelset orient_fluid_sign(const OrientedLevelset& oriented, Point anchor);

struct ParameterSpace {
  double lo = -0.1;
  double hi = 0.5;

  static ParameterSpace wavy_default() { return {-0.1, 0.5}; }
  static ParameterSpace cylinder_default() { return {-0.65, 0.65}; }
  friend bool operator==(const ParameterSpace&, const ParameterSpace&) = default;
};

struct ParameterSample {
  std::vector<double> values;  // draw order
  std::vector<double> sorted;
};

/// i.i.d. uniform draws on [lo, hi] from mt19937_64(seed). Each draw uses the
/// top 53 bits of one generator output, so the sequence is identical on every
/// standard library.
ParameterSample sample_parameters(const ParameterSpace& space, int count, std::uint64_t seed);

}  // namespace cutrom
