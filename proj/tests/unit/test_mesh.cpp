#include <doctest.h>

#include <numbers>

#include "eit/error.hpp"
#include "eit/experiments.hpp"
#include "fixtures.hpp"

using namespace eit;

TEST_CASE("square split into two triangles has a four-edge loop") {
  const TriMesh sq = test::unit_square();
  CHECK(sq.num_boundary() == 4);
  CHECK(sq.perimeter == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(sq.boundary_nodes.front() == 0);
  CHECK(sq.boundary_polygon_area() == doctest::Approx(1.0));
}

TEST_CASE("disk perimeter is the chord sum") {
  const TriMesh disk = make_disk_mesh(1.0, 64);
  const double chords = 64 * 2.0 * std::sin(std::numbers::pi / 64);
  CHECK(disk.num_boundary() == 64);
  CHECK(disk.perimeter == doctest::Approx(chords).epsilon(1e-13));
  CHECK(std::abs(disk.perimeter - 2 * std::numbers::pi) < 2 * std::numbers::pi * 1e-3);
}

TEST_CASE("triangulation errors") {
  SUBCASE("two disjoint triangles") {
    CHECK_THROWS_WITH_AS(build_boundary({{0, 0}, {1, 0}, {0, 1}, {5, 5}, {6, 5}, {5, 6}},
                                        {{0, 1, 2}, {3, 4, 5}}),
                         "multiple boundary components", InputError);
  }
  SUBCASE("edge shared by three triangles") {
    CHECK_THROWS_WITH_AS(build_boundary({{0, 0}, {1, 0}, {0, 1}, {0, -1}, {1, 1}},
                                        {{0, 1, 2}, {0, 3, 1}, {0, 1, 4}}),
                         "non-manifold edge shared by more than two triangles", InputError);
  }
  SUBCASE("index out of range") {
    CHECK_THROWS_AS(build_boundary({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 3}}), InputError);
  }
  SUBCASE("degenerate triangle") {
    CHECK_THROWS_AS(build_boundary({{0, 0}, {1, 0}, {2, 0}}, {{0, 1, 2}}), InputError);
  }
}

TEST_CASE("clockwise triangles are re-oriented") {
  const TriMesh m = build_boundary({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 2, 1}, {0, 3, 2}});
  for (int t = 0; t < m.num_triangles(); ++t) CHECK(m.triangle_area(t) > 0.0);
  CHECK(m.boundary_polygon_area() > 0.0);
}

TEST_CASE("triangle areas sum to the boundary polygon area") {
  for (const TriMesh& m : {make_disk_mesh(0.2, 48, 1.1), refine_uniform(make_disk_mesh(1.0, 20, 1.2)),
                           test::unit_square()}) {
    CHECK(std::abs(m.total_area() - m.boundary_polygon_area()) <= 1e-12 * m.total_area());
  }
}

TEST_CASE("arclength is strictly increasing and wraps at the perimeter") {
  const TriMesh m = make_disk_mesh(0.5, 40, 1.1);
  for (int p = 1; p < m.num_boundary(); ++p) CHECK(m.arclength[p] > m.arclength[p - 1]);
  CHECK(m.arclength.front() == 0.0);
  CHECK(m.arclength.back() + m.boundary_edge_length(m.num_boundary() - 1) ==
        doctest::Approx(m.perimeter).epsilon(1e-14));
}

TEST_CASE("sixteen tank electrodes") {
  const TankGeometry tank;
  const TriMesh mesh = tank_mesh(tank);
  CHECK(mesh.perimeter == doctest::Approx(1.06).epsilon(1e-4));
  const auto electrodes = locate_electrodes(mesh, tank.electrode_intervals());
  REQUIRE(electrodes.size() == 16);
  for (const auto& e : electrodes) {
    CHECK(e.num_nodes() >= 2);
    CHECK(e.num_interior_nodes() >= 1);
    // Electrode ends are mesh nodes, so snapping leaves the widths intact.
    CHECK(e.length() == doctest::Approx(0.02).epsilon(1e-4));
    CHECK(e.num_edges() == 8);
  }
}

TEST_CASE("disk mesh with prescribed boundary angles") {
  std::vector<double> angles;
  for (int i = 0; i < 60; ++i) angles.push_back(2.0 * std::numbers::pi * (i + 0.3 * std::sin(0.5 * i) * (i > 0)) / 60);
  const TriMesh m = make_disk_mesh(0.3, angles, 1.1);
  REQUIRE(m.num_boundary() == 60);
  for (int p = 0; p < 60; ++p) {
    const Vec2& x = m.nodes[m.boundary_nodes[p]];
    CHECK(std::atan2(x.y(), x.x()) == doctest::Approx(std::remainder(angles[p], 2.0 * std::numbers::pi)));
  }
  for (int t = 0; t < m.num_triangles(); ++t) CHECK(m.triangle_area(t) > 0.0);
  CHECK(std::abs(m.total_area() - m.boundary_polygon_area()) <= 1e-12 * m.total_area());
  const std::vector<double> unsorted{0.0, 1.0, 0.5, 2.0, 3.0, 4.0};
  CHECK_THROWS_AS(make_disk_mesh(0.3, unsorted), InputError);
  const std::vector<double> offset{0.1, 1.0, 1.5, 2.0, 3.0, 4.0};
  CHECK_THROWS_AS(make_disk_mesh(0.3, offset), InputError);
}

TEST_CASE("electrode placement errors") {
  const TriMesh disk = make_disk_mesh(1.0, 64);
  SUBCASE("overlap") {
    const std::vector<Interval> iv{{0.0, 0.1}, {0.05, 0.2}};
    CHECK_THROWS_WITH_AS(locate_electrodes(disk, iv), doctest::Contains("overlapping intervals"),
                         InputError);
  }
  SUBCASE("narrower than an edge") {
    const double h = disk.perimeter / 64;
    const std::vector<Interval> iv{{1.0, 1.0 + 0.4 * h}, {3.0, 3.5}};
    CHECK_THROWS_WITH_AS(locate_electrodes(disk, iv), doctest::Contains("no interior boundary node"),
                         InputError);
  }
  SUBCASE("no node between neighbors") {
    const double h = disk.perimeter / 64;
    const std::vector<Interval> iv{{1.0, 1.0 + 4 * h}, {1.0 + 4.6 * h, 1.0 + 8 * h}};
    CHECK_THROWS_WITH_AS(locate_electrodes(disk, iv), doctest::Contains("missing separating"),
                         InputError);
  }
  SUBCASE("unsorted") {
    const std::vector<Interval> iv{{3.0, 3.5}, {1.0, 1.5}};
    CHECK_THROWS_AS(locate_electrodes(disk, iv), InputError);
  }
}

TEST_CASE("locate_electrodes snaps to nodes and is idempotent") {
  const auto s = test::disk_setup();
  const auto again = locate_electrodes(*s.mesh, s.intervals);
  for (std::size_t m = 0; m < s.electrodes.size(); ++m) {
    const auto& e = s.electrodes[m];
    CHECK(e.node_ids == again[m].node_ids);
    CHECK(e.node_t.front() == 0.0);
    CHECK(e.node_t.back() == 1.0);
    CHECK(std::abs(e.a - s.intervals[m].a) <= 0.5 * s.mesh->perimeter / 64 + 1e-12);
    CHECK(std::abs(e.b - s.intervals[m].b) <= 0.5 * s.mesh->perimeter / 64 + 1e-12);
    CHECK(e.to_t(e.to_arclength(0.3)) == doctest::Approx(0.3));
  }
}

TEST_CASE("uniform refinement counts") {
  const TriMesh sq = test::unit_square();
  const TriMesh r1 = refine_uniform(sq);
  CHECK(r1.num_triangles() == 8);
  CHECK(r1.num_nodes() == 9);
  const TriMesh r2 = refine_uniform(r1);
  CHECK(r2.num_triangles() == 32);
  CHECK(r2.num_nodes() == 25);

  const TriMesh disk = make_disk_mesh(0.3, 32, 1.1);
  const TriMesh fine = refine_uniform(disk);
  // Euler: E = N + T - 1 for a disk.
  CHECK(fine.num_nodes() == disk.num_nodes() + disk.num_nodes() + disk.num_triangles() - 1);
  CHECK(fine.perimeter == doctest::Approx(disk.perimeter).epsilon(1e-14));
  CHECK(fine.num_boundary() == 2 * disk.num_boundary());
}

TEST_CASE("refined electrodes cover the coarse span") {
  const auto s = test::disk_setup();
  const TriMesh fine = refine_uniform(*s.mesh);
  std::vector<Interval> snapped;
  for (const auto& e : s.electrodes) snapped.push_back({e.a, e.b});
  const auto refined = locate_electrodes(fine, snapped);
  for (std::size_t m = 0; m < refined.size(); ++m) {
    CHECK(refined[m].a == doctest::Approx(s.electrodes[m].a).epsilon(1e-12));
    CHECK(refined[m].b == doctest::Approx(s.electrodes[m].b).epsilon(1e-12));
    CHECK(refined[m].num_nodes() == 2 * s.electrodes[m].num_nodes() - 1);
  }
}

TEST_CASE("mesh and interval files round-trip") {
  test::TempDir dir;
  const TriMesh disk = make_disk_mesh(0.2, 24, 1.1);
  write_mesh(dir / "disk.mesh", disk);
  const TriMesh back = read_mesh(dir / "disk.mesh");
  CHECK(back.fingerprint == disk.fingerprint);
  CHECK(back.boundary_nodes == disk.boundary_nodes);

  const std::vector<Interval> iv{{0.01, 0.05}, {0.3, 0.35}};
  write_intervals(dir / "el.txt", iv);
  CHECK(read_intervals(dir / "el.txt") == iv);
  CHECK_THROWS_AS(read_mesh(dir / "missing.mesh"), InputError);
}
