#include "eit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "eit/error.hpp"
#include "eit/hash.hpp"

namespace eit {

namespace {

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

std::uint64_t mesh_fingerprint(const TriMesh& mesh) {
  Hasher h;
  for (const auto& p : mesh.nodes) h.add(p.x()).add(p.y());
  for (const auto& t : mesh.triangles) h.add(t);
  return h.digest();
}

}  // namespace

double TriMesh::triangle_area(int t) const {
  const auto& tri = triangles[t];
  return signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
}

double TriMesh::total_area() const {
  double area = 0.0;
  for (int t = 0; t < num_triangles(); ++t) area += triangle_area(t);
  return area;
}

double TriMesh::boundary_polygon_area() const {
  double area = 0.0;
  const int n = num_boundary();
  for (int p = 0; p < n; ++p) {
    const Vec2& a = nodes[boundary_nodes[p]];
    const Vec2& b = nodes[boundary_nodes[(p + 1) % n]];
    area += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * area;
}

double TriMesh::boundary_edge_length(int p) const {
  auto [i, j] = boundary_edge(p);
  return (nodes[j] - nodes[i]).norm();
}

TriMesh build_boundary(std::vector<Vec2> nodes, std::vector<Triangle> triangles) {
  const int n_nodes = static_cast<int>(nodes.size());
  if (triangles.empty()) throw InputError("mesh has no triangles");

  for (auto& tri : triangles) {
    for (int v : tri) {
      if (v < 0 || v >= n_nodes) {
        throw InputError("triangle references node " + std::to_string(v) + " outside [0, " +
                         std::to_string(n_nodes) + ")");
      }
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
      throw InputError("triangle with repeated node");
    }
    const double area = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
    if (area == 0.0) throw InputError("degenerate triangle with zero area");
    if (area < 0.0) std::swap(tri[1], tri[2]);
  }

  // Directed edge (a -> b) of a counterclockwise triangle, keyed by sorted pair.
  struct EdgeUse {
    int count = 0;
    int from = -1;
    int to = -1;
  };
  std::map<std::pair<int, int>, EdgeUse> edges;
  for (const auto& tri : triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k];
      const int b = tri[(k + 1) % 3];
      auto& use = edges[{std::min(a, b), std::max(a, b)}];
      ++use.count;
      use.from = a;
      use.to = b;
    }
  }

  std::vector<int> next(n_nodes, -1);
  int boundary_edges = 0;
  for (const auto& [key, use] : edges) {
    if (use.count > 2) throw InputError("non-manifold edge shared by more than two triangles");
    if (use.count == 1) {
      if (next[use.from] != -1) throw InputError("non-manifold boundary vertex");
      next[use.from] = use.to;
      ++boundary_edges;
    }
  }
  if (boundary_edges == 0) throw InputError("mesh has no boundary");

  const int start = static_cast<int>(std::find_if(next.begin(), next.end(),
                                                  [](int v) { return v != -1; }) -
                                     next.begin());
  TriMesh mesh;
  mesh.nodes = std::move(nodes);
  mesh.triangles = std::move(triangles);
  mesh.boundary_nodes.push_back(start);
  for (int v = next[start]; v != start; v = next[v]) {
    if (v == -1 || static_cast<int>(mesh.boundary_nodes.size()) > boundary_edges) {
      throw InputError("open boundary chain");
    }
    mesh.boundary_nodes.push_back(v);
  }
  if (static_cast<int>(mesh.boundary_nodes.size()) != boundary_edges) {
    throw InputError("multiple boundary components");
  }

  const int nb = mesh.num_boundary();
  mesh.loop_position.assign(n_nodes, -1);
  mesh.arclength.resize(nb);
  double s = 0.0;
  for (int p = 0; p < nb; ++p) {
    mesh.loop_position[mesh.boundary_nodes[p]] = p;
    mesh.arclength[p] = s;
    s += mesh.boundary_edge_length(p);
  }
  mesh.perimeter = s;

  // A hole would have produced a second loop; a clockwise outer loop means the
  // triangles describe the complement of the polygon.
  if (mesh.boundary_polygon_area() <= 0.0) throw InputError("boundary loop is not counterclockwise");

  mesh.fingerprint = mesh_fingerprint(mesh);
  return mesh;
}

TriMesh refine_uniform(const TriMesh& mesh) {
  std::vector<Vec2> nodes = mesh.nodes;
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = std::make_pair(std::min(a, b), std::max(a, b));
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(0.5 * (mesh.nodes[a] + mesh.nodes[b]));
    midpoint.emplace(key, id);
    return id;
  };

  std::vector<Triangle> triangles;
  triangles.reserve(4 * mesh.triangles.size());
  for (const auto& [a, b, c] : mesh.triangles) {
    const int ab = mid(a, b);
    const int bc = mid(b, c);
    const int ca = mid(c, a);
    triangles.push_back({a, ab, ca});
    triangles.push_back({ab, b, bc});
    triangles.push_back({ca, bc, c});
    triangles.push_back({ab, bc, ca});
  }
  return build_boundary(std::move(nodes), std::move(triangles));
}

std::vector<ExtendedElectrode> locate_electrodes(const TriMesh& mesh,
                                                 std::span<const Interval> intervals) {
  const int nb = mesh.num_boundary();
  const int count = static_cast<int>(intervals.size());
  for (int m = 0; m < count; ++m) {
    const auto& iv = intervals[m];
    if (!(iv.a < iv.b)) {
      throw InputError("electrode " + std::to_string(m + 1) + " has empty interval");
    }
    if (iv.a < 0.0 || iv.b > mesh.perimeter) {
      throw InputError("electrode " + std::to_string(m + 1) + " interval outside [0, perimeter)");
    }
    if (m > 0 && iv.a < intervals[m - 1].a) throw InputError("intervals not sorted");
    if (m > 0 && iv.a < intervals[m - 1].b) {
      throw InputError("overlapping intervals: electrodes " + std::to_string(m) + " and " +
                       std::to_string(m + 1));
    }
  }

  auto nearest_position = [&](double s) {
    const auto it = std::lower_bound(mesh.arclength.begin(), mesh.arclength.end(), s);
    int p = static_cast<int>(it - mesh.arclength.begin());
    if (p == nb) return nb - 1;
    if (p > 0 && s - mesh.arclength[p - 1] <= mesh.arclength[p] - s) --p;
    return p;
  };

  std::vector<ExtendedElectrode> electrodes;
  electrodes.reserve(count);
  for (int m = 0; m < count; ++m) {
    ExtendedElectrode e;
    e.index = m;
    e.requested = intervals[m];
    e.first_position = nearest_position(intervals[m].a);
    e.last_position = nearest_position(intervals[m].b);
    if (e.last_position - e.first_position < 2) {
      throw InputError("electrode " + std::to_string(m + 1) + ": no interior boundary node");
    }
    e.a = mesh.arclength[e.first_position];
    e.b = mesh.arclength[e.last_position];
    for (int p = e.first_position; p <= e.last_position; ++p) {
      e.node_ids.push_back(mesh.boundary_nodes[p]);
      e.node_t.push_back(e.to_t(mesh.arclength[p]));
    }
    e.node_t.back() = 1.0;
    electrodes.push_back(std::move(e));
  }

  for (int m = 0; m + 1 < count; ++m) {
    if (electrodes[m + 1].first_position - electrodes[m].last_position < 2) {
      throw InputError("missing separating boundary node between electrodes " +
                       std::to_string(m + 1) + " and " + std::to_string(m + 2));
    }
  }
  if (count > 1 && nb - electrodes.back().last_position + electrodes.front().first_position < 2) {
    throw InputError("missing separating boundary node between electrodes " +
                     std::to_string(count) + " and 1");
  }
  return electrodes;
}

TriMesh make_disk_mesh(double radius, int boundary_nodes, double growth) {
  if (boundary_nodes < 6) throw InputError("make_disk_mesh: need >= 6 boundary nodes");
  std::vector<double> angles(boundary_nodes);
  for (int i = 0; i < boundary_nodes; ++i) angles[i] = 2.0 * std::numbers::pi * i / boundary_nodes;
  return make_disk_mesh(radius, angles, growth);
}

TriMesh make_disk_mesh(double radius, std::span<const double> boundary_angles, double growth) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const int boundary_nodes = static_cast<int>(boundary_angles.size());
  if (radius <= 0.0 || boundary_nodes < 6 || growth < 1.0) {
    throw InputError("make_disk_mesh: need radius > 0, >= 6 boundary nodes, growth >= 1");
  }
  if (boundary_angles[0] != 0.0 || boundary_angles.back() >= two_pi ||
      !std::is_sorted(boundary_angles.begin(), boundary_angles.end(), std::less_equal<>())) {
    throw InputError("make_disk_mesh: boundary angles must increase from 0 and stay below 2 pi");
  }

  // Rings past the first are uniform; the first may follow `boundary_angles`.
  struct Ring {
    int first;
    int count;
    double offset;
    std::span<const double> angles;
  };
  std::vector<Vec2> nodes;
  std::vector<Ring> rings;

  double r = radius;
  double h = two_pi * radius / boundary_nodes;
  int count = boundary_nodes;
  double offset = 0.0;
  std::span<const double> given = boundary_angles;
  while (true) {
    rings.push_back({static_cast<int>(nodes.size()), count, offset, given});
    for (int i = 0; i < count; ++i) {
      const double phi = given.empty() ? offset + two_pi * i / count : given[i];
      nodes.emplace_back(r * std::cos(phi), r * std::sin(phi));
    }
    given = {};
    const double h_next = h * growth;
    const double r_next = r - 0.5 * std::sqrt(3.0) * 0.5 * (h + h_next);
    const int count_next = static_cast<int>(std::lround(two_pi * r_next / h_next));
    if (r_next <= 0.0 || count_next < 6) break;
    offset += 0.5 * two_pi / count_next;
    r = r_next;
    h = h_next;
    count = count_next;
  }
  const int center = static_cast<int>(nodes.size());
  nodes.emplace_back(0.0, 0.0);

  std::vector<Triangle> triangles;
  for (std::size_t k = 0; k + 1 < rings.size(); ++k) {
    const Ring& outer = rings[k];
    const Ring& inner = rings[k + 1];
    auto angle = [](const Ring& ring, int i) {
      if (ring.angles.empty()) return ring.offset + two_pi * i / ring.count;
      const int wraps = i / ring.count;
      return ring.angles[i - wraps * ring.count] + two_pi * wraps;
    };
    auto id = [](const Ring& ring, int i) { return ring.first + i % ring.count; };
    // Align the inner ring so that its starting node trails the outer one.
    int j0 = 0;
    while (angle(inner, j0 + 1) <= angle(outer, 0)) ++j0;
    int i = 0;
    int j = j0;
    while (i < outer.count || j < j0 + inner.count) {
      const bool advance_outer =
          j == j0 + inner.count ||
          (i < outer.count && angle(outer, i + 1) < angle(inner, j + 1));
      if (advance_outer) {
        triangles.push_back({id(outer, i), id(outer, i + 1), id(inner, j)});
        ++i;
      } else {
        triangles.push_back({id(inner, j), id(outer, i), id(inner, j + 1)});
        ++j;
      }
    }
  }
  const Ring& last = rings.back();
  for (int i = 0; i < last.count; ++i) {
    triangles.push_back({last.first + i, last.first + (i + 1) % last.count, center});
  }
  return build_boundary(std::move(nodes), std::move(triangles));
}

TriMesh read_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh file " + path.string());
  std::string word_nodes, word_triangles;
  long n = -1, t = -1;
  in >> word_nodes >> n >> word_triangles >> t;
  if (!in || word_nodes != "nodes" || word_triangles != "triangles" || n < 3 || t < 1) {
    throw InputError(path.string() + ": expected header `nodes <N> triangles <T>`");
  }
  std::vector<Vec2> nodes(n);
  for (auto& p : nodes) {
    if (!(in >> p.x() >> p.y())) throw InputError(path.string() + ": truncated node list");
  }
  std::vector<Triangle> triangles(t);
  for (auto& tri : triangles) {
    if (!(in >> tri[0] >> tri[1] >> tri[2])) {
      throw InputError(path.string() + ": truncated triangle list");
    }
  }
  return build_boundary(std::move(nodes), std::move(triangles));
}

void write_mesh(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write mesh file " + path.string());
  out << std::setprecision(17);
  out << "nodes " << mesh.num_nodes() << " triangles " << mesh.num_triangles() << '\n';
  for (const auto& p : mesh.nodes) out << p.x() << ' ' << p.y() << '\n';
  for (const auto& [a, b, c] : mesh.triangles) out << a << ' ' << b << ' ' << c << '\n';
}

std::vector<Interval> read_intervals(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open electrode file " + path.string());
  std::vector<Interval> intervals;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream row(line);
    Interval iv;
    if (!(row >> iv.a >> iv.b)) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected `a b`");
    }
    intervals.push_back(iv);
  }
  if (intervals.size() < 2) throw InputError(path.string() + ": need at least two electrodes");
  return intervals;
}

void write_intervals(const std::filesystem::path& path, std::span<const Interval> intervals) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write electrode file " + path.string());
  out << std::setprecision(17);
  for (const auto& iv : intervals) out << iv.a << ' ' << iv.b << '\n';
}

}  // namespace eit
