#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "cutrom/errors.hpp"
#include "cutrom/geometry.hpp"
#include "cutrom/io.hpp"

using namespace cutrom;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cutrom_io_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("container round trip is bit exact") {
  TempDir tmp;
  Matrix m(5, 3);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = std::ldexp(1.0 + i, -j) / 3.0 - 0.1 * j;
  }
  m(4, 2) = -0.0;
  ContainerHeader h;
  h.nu = 5;
  h.np = 7;
  h.theta = -0.123456789;
  h.time = 0.011;
  h.kind = FieldKind::PressureModes;
  h.rows = 99;  // overwritten from the data
  const fs::path p = tmp.path / "a.bin";
  write_container(p, h, m);
  // header 8 + 4 + 8 + 8 + 8 + 8 + 1 + 8 + 8 bytes then the payload
  CHECK(fs::file_size(p) == 61 + 15 * 8);
  const Container c = read_container(p);
  CHECK(c.header.version == kContainerVersion);
  CHECK(c.header.nu == 5);
  CHECK(c.header.np == 7);
  CHECK(c.header.theta == h.theta);
  CHECK(c.header.time == h.time);
  CHECK(c.header.kind == FieldKind::PressureModes);
  CHECK(c.header.rows == 5);
  CHECK(c.header.cols == 3);
  CHECK((c.data - m).cwiseAbs().maxCoeff() == 0.0);
  CHECK(std::signbit(c.data(4, 2)));
  // row-major payload: first value after the header is m(0,0), then m(0,1)
  const std::string bytes = slurp(p);
  double first = 0.0, second = 0.0;
  std::memcpy(&first, bytes.data() + 61, 8);
  std::memcpy(&second, bytes.data() + 69, 8);
  CHECK(first == m(0, 0));
  CHECK(second == m(0, 1));
  CHECK(bytes.substr(0, 8) == std::string("CUTROM1\0", 8));
}

TEST_CASE("container errors") {
  TempDir tmp;
  CHECK_THROWS_AS(read_container(tmp.path / "none.bin"), MissingSnapshot);
  const fs::path p = tmp.path / "b.bin";
  write_container(p, {}, Matrix::Ones(2, 2));
  std::string good = slurp(p);

  auto write_bytes = [&](const std::string& s) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    os << s;
  };
  std::string bad = good;
  bad[0] = 'X';
  write_bytes(bad);
  CHECK_THROWS_AS(read_container(p), IoError);
  bad = good;
  bad[8] = 2;  // version
  write_bytes(bad);
  CHECK_THROWS_AS(read_container(p), IoError);
  bad = good;
  bad[44] = 17;  // kind
  write_bytes(bad);
  CHECK_THROWS_AS(read_container(p), IoError);
  write_bytes(good.substr(0, good.size() - 1));
  CHECK_THROWS_AS(read_container(p), IoError);
  write_bytes(good + "x");
  CHECK_THROWS_AS(read_container(p), IoError);
  write_bytes(good.substr(0, 20));
  CHECK_THROWS_AS(read_container(p), IoError);
  write_bytes(good);
  CHECK_NOTHROW(read_container(p));
  CHECK_THROWS_AS(write_container(tmp.path / "no" / "dir.bin", {}, Matrix::Ones(1, 1)), IoError);
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  TempDir tmp;
  std::ofstream(tmp.path / "abc.txt") << "abc";
  CHECK(sha256_file(tmp.path / "abc.txt") == sha256_hex("abc"));
  CHECK_THROWS_AS(sha256_file(tmp.path / "none"), IoError);
}

TEST_CASE("shortest round-trip doubles") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e22, 0.07, 6.02214076e23}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.25) == "0.25");
  CHECK(format_double(12345.0) == "12345");
}

TEST_CASE("CSV quoting and parsing") {
  std::ostringstream os;
  CsvWriter(os).row({"a", "b", "c"}).row({"plain", "with,comma", "say \"hi\""}).row({"multi\nline", "", "x"});
  CHECK(os.str() == "a,b,c\r\nplain,\"with,comma\",\"say \"\"hi\"\"\"\r\n\"multi\nline\",,x\r\n");
  std::istringstream is(os.str());
  const CsvTable t = read_csv(is);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  CHECK(t.rows[0][1] == "with,comma");
  CHECK(t.rows[0][2] == "say \"hi\"");
  CHECK(t.rows[1][0] == "multi\nline");
  CHECK(t.rows[1][1].empty());
  CHECK(t.column("c") == 2);
  CHECK(t.column("z") == -1);

  std::istringstream unterminated("a,b\n\"x,y\n");
  CHECK_THROWS_AS(read_csv(unterminated), ParseError);
  std::istringstream ragged("a,b\n1,2,3\n");
  CHECK_THROWS_AS(read_csv(ragged), ParseError);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_csv(empty), ParseError);
  CHECK_THROWS_AS(read_csv_file("/nonexistent/x.csv"), IoError);
}

TEST_CASE("field VTK masks follow the classification") {
  const auto mesh = build_background_mesh({-2, -1, 2, 1}, 0.5);
  const DofSystem dofs(mesh);
  const auto ls = orient_fluid_sign(LevelsetFamily::wavy_wall(), 0.2, {0.0, 0.0});
  const auto cls = classify_elements(mesh, ls);
  Vector u(dofs.nu()), p(dofs.np());
  for (int i = 0; i < dofs.nu(); ++i) u[i] = (i % 2 == 0) ? 1.0 : 0.0;
  for (int i = 0; i < dofs.np(); ++i) p[i] = 2.0;
  std::ostringstream os;
  write_field_vtk(os, dofs, cls, {{"u", &u, true}, {"p", &p, false}});
  const std::string text = os.str();

  std::istringstream in(text);
  std::string line;
  std::vector<int> cell_mask, point_mask;
  std::vector<double> pvals;
  double umax = 0.0;
  while (std::getline(in, line)) {
    if (line == "SCALARS mask int 1") {
      std::getline(in, line);  // lookup table
      auto& dst = cell_mask.empty() ? cell_mask : point_mask;
      const int n = cell_mask.empty() ? mesh.num_triangles() : mesh.num_vertices();
      for (int i = 0; i < n; ++i) {
        int v = 0;
        in >> v;
        dst.push_back(v);
      }
    } else if (line == "VECTORS u double") {
      for (int i = 0; i < mesh.num_vertices(); ++i) {
        double x = 0, y = 0, z = 0;
        in >> x >> y >> z;
        umax = std::max(umax, std::hypot(x, y));
        CHECK(y == 0.0);
        CHECK(z == 0.0);
      }
    } else if (line == "SCALARS p double 1") {
      std::getline(in, line);
      for (int i = 0; i < mesh.num_vertices(); ++i) {
        double v = 0;
        in >> v;
        pvals.push_back(v);
      }
    }
  }
  REQUIRE(cell_mask.size() == static_cast<std::size_t>(mesh.num_triangles()));
  REQUIRE(point_mask.size() == static_cast<std::size_t>(mesh.num_vertices()));
  REQUIRE(pvals.size() == point_mask.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    CHECK(cell_mask[t] == (cls.status[t] == CutStatus::Solid ? 0 : 1));
  }
  for (std::size_t i = 0; i < pvals.size(); ++i) CHECK(pvals[i] == (point_mask[i] ? 2.0 : 0.0));
  CHECK(umax == 1.0);

  const Vector short_p(dofs.np() - 1);
  std::ostringstream sink;
  CHECK_THROWS_AS(write_field_vtk(sink, dofs, cls, {{"p", &short_p, false}}), ShapeMismatch);
}
