#pragma once

// Binary snapshot container, CSV helpers, hashing and VTK field export.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cutrom/fe_space.hpp"
#include "cutrom/linalg.hpp"
#include "cutrom/mesh.hpp"

namespace cutrom {

enum class FieldKind : std::uint8_t {
  Velocity = 0,    // homogeneous velocity u0
  Supremizer = 1,
  Pressure = 2,
  VelocityModes = 3,
  SupremizerModes = 4,
  PressureModes = 5,
};

std::string_view field_kind_name(FieldKind kind);

inline constexpr std::uint32_t kContainerVersion = 1;

/// Layout on disk (little endian): "CUTROM1\0", u32 version, u64 nu, u64 np,
/// f64 theta, f64 t, u8 kind, u64 rows, u64 cols, rows*cols f64 row-major.
struct ContainerHeader {
  std::uint32_t version = kContainerVersion;
  std::uint64_t nu = 0;
  std::uint64_t np = 0;
  double theta = 0.0;
  double time = 0.0;
  FieldKind kind = FieldKind::Velocity;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
};

struct Container {
  ContainerHeader header;
  Matrix data;
};

/// Header rows/cols are taken from `data`. Throws IoError.
void write_container(const std::filesystem::path& path, ContainerHeader header, const Matrix& data);
/// Throws IoError on a bad magic, version, truncated payload or missing file
/// (MissingSnapshot when the file does not exist).
Container read_container(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// Minimal RFC 4180 writer: quotes fields containing comma, quote or newline.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(&os) {}
  CsvWriter& row(const std::vector<std::string>& fields);

 private:
  std::ostream* os_;
};

/// Parses a CSV with a header row into string cells (quoted fields allowed).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(std::string_view name) const;  // -1 when absent
};
CsvTable read_csv(std::istream& is);
CsvTable read_csv_file(const std::filesystem::path& path);

/// A named background field for VTK export: velocity-like fields are nu
/// long, pressure-like fields np long.
struct VtkField {
  std::string name;
  const Vector* values = nullptr;
  bool vector = false;
};

/// Legacy ASCII VTK of the background mesh with vertex-sampled fields. Values
/// at vertices that belong to no active element are written as zero; a
/// point array `mask` and cell arrays `cut_status` and `mask` mark the active
/// part.
void write_field_vtk(std::ostream& os, const DofSystem& dofs, const CutClassification& cls,
                     const std::vector<VtkField>& fields);

}  // namespace cutrom
