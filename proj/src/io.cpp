#include "cutrom/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "cutrom/errors.hpp"

namespace cutrom {
namespace {

constexpr std::array<char, 8> kMagic{'C', 'U', 'T', 'R', 'O', 'M', '1', '\0'};

template <typename T>
void put(std::string& buf, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  buf.append(bytes.data(), bytes.size());
}

template <typename T>
T get(const char*& p) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  p += sizeof(T);
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

constexpr std::size_t kHeaderBytes = 8 + 4 + 8 + 8 + 8 + 8 + 1 + 8 + 8;

std::string hex(const unsigned char* data, unsigned len) {
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(data[i]);
  return os.str();
}

}  // namespace

std::string_view field_kind_name(FieldKind kind) {
  switch (kind) {
    case FieldKind::Velocity: return "velocity";
    case FieldKind::Supremizer: return "supremizer";
    case FieldKind::Pressure: return "pressure";
    case FieldKind::VelocityModes: return "velocity_modes";
    case FieldKind::SupremizerModes: return "supremizer_modes";
    case FieldKind::PressureModes: return "pressure_modes";
  }
  return "unknown";
}

void write_container(const std::filesystem::path& path, ContainerHeader header, const Matrix& data) {
  header.rows = static_cast<std::uint64_t>(data.rows());
  header.cols = static_cast<std::uint64_t>(data.cols());
  std::string buf;
  buf.reserve(kHeaderBytes + static_cast<std::size_t>(data.size()) * 8);
  buf.append(kMagic.data(), kMagic.size());
  put(buf, header.version);
  put(buf, header.nu);
  put(buf, header.np);
  put(buf, header.theta);
  put(buf, header.time);
  put(buf, static_cast<std::uint8_t>(header.kind));
  put(buf, header.rows);
  put(buf, header.cols);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) put(buf, data(i, j));
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    if (!std::filesystem::exists(path)) throw MissingSnapshot("missing container " + path.string());
    throw IoError("cannot open " + path.string());
  }
  const std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < kHeaderBytes) throw IoError(path.string() + ": truncated header");
  if (std::memcmp(buf.data(), kMagic.data(), kMagic.size()) != 0) {
    throw IoError(path.string() + ": bad magic");
  }
  const char* p = buf.data() + kMagic.size();
  Container c;
  c.header.version = get<std::uint32_t>(p);
  if (c.header.version != kContainerVersion) {
    throw IoError(path.string() + ": unsupported version " + std::to_string(c.header.version));
  }
  c.header.nu = get<std::uint64_t>(p);
  c.header.np = get<std::uint64_t>(p);
  c.header.theta = get<double>(p);
  c.header.time = get<double>(p);
  const auto kind = get<std::uint8_t>(p);
  if (kind > static_cast<std::uint8_t>(FieldKind::PressureModes)) {
    throw IoError(path.string() + ": unknown field kind " + std::to_string(kind));
  }
  c.header.kind = static_cast<FieldKind>(kind);
  c.header.rows = get<std::uint64_t>(p);
  c.header.cols = get<std::uint64_t>(p);
  const std::uint64_t count = c.header.rows * c.header.cols;
  if (buf.size() != kHeaderBytes + count * 8) throw IoError(path.string() + ": payload size mismatch");
  c.data.resize(static_cast<Eigen::Index>(c.header.rows), static_cast<Eigen::Index>(c.header.cols));
  for (Eigen::Index i = 0; i < c.data.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.data.cols(); ++j) c.data(i, j) = get<double>(p);
  }
  return c;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 failed");
  }
  return hex(md, len);
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return sha256_hex(buf);
}

std::string format_double(double v) {
  std::array<char, 64> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

CsvWriter& CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) *os_ << ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\n\r") == std::string::npos) {
      *os_ << f;
    } else {
      *os_ << '"';
      for (char ch : f) {
        if (ch == '"') *os_ << '"';
        *os_ << ch;
      }
      *os_ << '"';
    }
  }
  *os_ << "\r\n";
  return *this;
}

int CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

CsvTable read_csv(std::istream& is) {
  const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      field.clear();
      record.clear();
      any = false;
    } else {
      field += ch;
      any = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted CSV field", static_cast<int>(records.size()) + 1);
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  CsvTable t;
  if (records.empty()) throw ParseError("CSV has no header row", 1);
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size()) {
      throw ParseError("CSV row has " + std::to_string(records[r].size()) + " fields, header has " +
                           std::to_string(t.header.size()),
                       static_cast<int>(r) + 1);
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  return read_csv(is);
}

void write_field_vtk(std::ostream& os, const DofSystem& dofs, const CutClassification& cls,
                     const std::vector<VtkField>& fields) {
  const BackgroundMesh& mesh = dofs.mesh();
  const int nv = mesh.num_vertices();
  std::vector<char> vertex_active(static_cast<std::size_t>(nv), 0);
  for (int t : cls.active_elements) {
    for (int v : mesh.triangles()[static_cast<std::size_t>(t)]) vertex_active[static_cast<std::size_t>(v)] = 1;
  }
  for (const VtkField& f : fields) {
    const Eigen::Index want = f.vector ? dofs.nu() : dofs.np();
    if (f.values == nullptr || f.values->size() != want) {
      throw ShapeMismatch("vtk field '" + f.name + "' has the wrong length");
    }
  }
  write_mesh_vtk(os, mesh, &cls);
  os << "SCALARS mask int 1\nLOOKUP_TABLE default\n";
  for (CutStatus s : cls.status) os << (s == CutStatus::Solid ? 0 : 1) << '\n';
  os << "POINT_DATA " << nv << '\n';
  os << "SCALARS mask int 1\nLOOKUP_TABLE default\n";
  for (char a : vertex_active) os << static_cast<int>(a) << '\n';
  for (const VtkField& f : fields) {
    const Vector& v = *f.values;
    if (f.vector) {
      // vertices are the first P2 nodes, so node i carries dofs 2i, 2i+1
      os << "VECTORS " << f.name << " double\n";
      for (int i = 0; i < nv; ++i) {
        const bool on = vertex_active[static_cast<std::size_t>(i)] != 0;
        os << (on ? v[2 * i] : 0.0) << ' ' << (on ? v[2 * i + 1] : 0.0) << " 0\n";
      }
    } else {
      os << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
      for (int i = 0; i < nv; ++i) os << (vertex_active[static_cast<std::size_t>(i)] != 0 ? v[i] : 0.0) << '\n';
    }
  }
  if (!os) throw IoError("VTK write failed");
}

}  // namespace cutrom
