#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace eit {

using Vec2 = Eigen::Vector2d;
using Triangle = std::array<int, 3>;

/// Triangulated, simply connected 2D domain with a counterclockwise boundary
/// loop parametrized by arclength.
///
/// `boundary_nodes[p]` is the node at loop position p; boundary edge p joins
/// positions p and p+1 (mod n). `arclength[p]` is the arclength of position p
/// measured from position 0, which is always the lowest-indexed boundary node.
struct TriMesh {
  std::vector<Vec2> nodes;
  std::vector<Triangle> triangles;
  std::vector<int> boundary_nodes;
  std::vector<double> arclength;
  double perimeter = 0.0;
  std::vector<int> loop_position;  // per node, -1 for interior nodes
  std::uint64_t fingerprint = 0;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  int num_boundary() const { return static_cast<int>(boundary_nodes.size()); }

  double triangle_area(int t) const;
  double total_area() const;
  /// Signed area of the polygon traced by the boundary loop.
  double boundary_polygon_area() const;
  std::pair<int, int> boundary_edge(int p) const {
    return {boundary_nodes[p], boundary_nodes[(p + 1) % num_boundary()]};
  }
  double boundary_edge_length(int p) const;
};

/// Validates a raw triangulation, re-orients clockwise triangles and extracts
/// the single boundary loop.
TriMesh build_boundary(std::vector<Vec2> nodes, std::vector<Triangle> triangles);

/// Splits every triangle into four through its edge midpoints.
TriMesh refine_uniform(const TriMesh& mesh);

/// Half-open arclength interval [a, b) in meters.
struct Interval {
  double a = 0.0;
  double b = 0.0;
  double length() const { return b - a; }
  double midpoint() const { return 0.5 * (a + b); }
  bool operator==(const Interval&) const = default;
};

/// Boundary arc E_m snapped to whole boundary edges.
struct ExtendedElectrode {
  int index = 0;  // 0-based; reported 1-based in files
  Interval requested;
  double a = 0.0;  // snapped start (arclength)
  double b = 0.0;  // snapped end
  int first_position = 0;  // loop position of the start node
  int last_position = 0;   // loop position of the end node, > first_position
  std::vector<int> node_ids;   // global node ids, first..last
  std::vector<double> node_t;  // normalized coordinate of each node, 0..1

  double length() const { return b - a; }
  double to_t(double s) const { return (s - a) / (b - a); }
  double to_arclength(double t) const { return a + t * (b - a); }
  int num_nodes() const { return static_cast<int>(node_ids.size()); }
  int num_edges() const { return last_position - first_position; }
  int num_interior_nodes() const { return num_nodes() - 2; }
};

std::vector<ExtendedElectrode> locate_electrodes(const TriMesh& mesh,
                                                 std::span<const Interval> intervals);

/// Quasi-uniform disk triangulation made of concentric rings whose spacing
/// grows by `growth` from the boundary inwards. Node 0 sits at angle 0 on the
/// boundary so the arclength origin is on the positive x axis.
TriMesh make_disk_mesh(double radius, int boundary_nodes, double growth = 1.0);
/// Same, with the boundary nodes at the given increasing angles (first one 0).
TriMesh make_disk_mesh(double radius, std::span<const double> boundary_angles, double growth = 1.0);

// Text formats: `nodes N triangles T`, N lines `x y`, T lines `i j k`.
TriMesh read_mesh(const std::filesystem::path& path);
void write_mesh(const std::filesystem::path& path, const TriMesh& mesh);
// One `a b` pair per line.
std::vector<Interval> read_intervals(const std::filesystem::path& path);
void write_intervals(const std::filesystem::path& path, std::span<const Interval> intervals);

}  // namespace eit
