#include "surs/mesh.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <omp.h>

namespace surs {

void set_thread_count(int n) { omp_set_num_threads(n < 1 ? 1 : n); }
int thread_count() { return omp_get_max_threads(); }

Vec3 TriMesh::face_normal(int f) const {
  const auto& t = faces[f];
  Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
  double len = n.norm();
  if (len < 1e-30) return Vec3::Zero();
  return n / len;
}

double TriMesh::face_area(int f) const {
  const auto& t = faces[f];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

double TriMesh::total_area() const {
  double a = 0.0;
  for (int f = 0; f < (int)faces.size(); ++f) a += face_area(f);
  return a;
}

Aabb TriMesh::bounds() const {
  if (vertices.empty()) throw ValidationError("bounds: empty mesh");
  Aabb box;
  box.lo = box.hi = vertices[0];
  for (const Vec3& v : vertices) box.expand(v);
  return box;
}

void TriMesh::validate() const {
  const int nv = (int)vertices.size();
  for (int i = 0; i < nv; ++i) {
    if (!vertices[i].allFinite())
      throw ValidationError("vertex " + std::to_string(i) + " is not finite");
  }
  for (size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      int idx = faces[f][k];
      if (idx < 0 || idx >= nv)
        throw ValidationError("face " + std::to_string(f) + " references vertex " +
                              std::to_string(idx) + " out of range");
    }
  }
  if (!(units_per_cm > 0.0)) throw ValidationError("units_per_cm must be positive");
}

WatertightReport check_watertight(const TriMesh& mesh) {
  struct EdgeUse { int forward = 0, backward = 0; };
  std::map<std::pair<int, int>, EdgeUse> edges;
  for (const auto& t : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      bool fwd = a < b;
      auto key = fwd ? std::make_pair(a, b) : std::make_pair(b, a);
      auto& use = edges[key];
      (fwd ? use.forward : use.backward)++;
    }
  }
  WatertightReport rep;
  rep.closed = true;
  rep.oriented = true;
  rep.edge_manifold = true;
  for (const auto& [key, use] : edges) {
    int total = use.forward + use.backward;
    if (total == 1) {
      rep.boundary_edges++;
      rep.closed = false;
    } else if (total > 2) {
      rep.nonmanifold_edges++;
      rep.edge_manifold = false;
      rep.closed = false;
    } else if (use.forward != 1 || use.backward != 1) {
      rep.oriented = false;  // shared edge traversed twice in the same direction
    }
  }
  if (mesh.faces.empty()) rep.closed = rep.oriented = rep.edge_manifold = false;
  return rep;
}

UnitizeTransform normalize_to_unit(TriMesh& mesh) {
  mesh.validate();
  if (mesh.vertices.empty()) throw ValidationError("normalize_to_unit: empty mesh");
  Aabb box = mesh.bounds();
  double longest = box.extent().maxCoeff();
  if (!(longest > 0.0)) throw ValidationError("normalize_to_unit: degenerate bounding box");
  UnitizeTransform tf;
  tf.translation = box.center();
  tf.scale = 1.0 / longest;
  for (Vec3& v : mesh.vertices) v = tf.apply(v);
  mesh.units_per_cm *= tf.scale;
  return tf;
}

// ---------------------------------------------------------------- OBJ / PLY

namespace {

int resolve_obj_index(long raw, long n_vertices, long line) {
  long idx = raw > 0 ? raw - 1 : n_vertices + raw;  // negative = relative
  if (raw == 0 || idx < 0 || idx >= n_vertices)
    throw FormatError("face index out of range", line);
  return (int)idx;
}

TriMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  TriMesh mesh;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    line_no++;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) throw FormatError("malformed vertex", line_no);
      if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
        throw FormatError("non-finite vertex", line_no);
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ss >> tok) {
        // accept i, i/j, i//k, i/j/k; only the vertex index matters here
        size_t slash = tok.find('/');
        std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
        long raw = 0;
        try {
          raw = std::stol(head);
        } catch (...) {
          throw FormatError("malformed face token '" + tok + "'", line_no);
        }
        poly.push_back(resolve_obj_index(raw, (long)mesh.vertices.size(), line_no));
      }
      if (poly.size() < 3) throw FormatError("face with fewer than 3 vertices", line_no);
      for (size_t k = 2; k < poly.size(); ++k)
        mesh.faces.push_back({poly[0], poly[k - 1], poly[k]});
    }
    // everything else (vn, vt, usemtl, o, g, s, ...) is ignored
  }
  mesh.validate();
  return mesh;
}

struct PlyProperty {
  std::string name;
  std::string type;        // scalar type, or element type for lists
  std::string count_type;  // empty unless list
  bool is_list = false;
};

struct PlyElement {
  std::string name;
  long count = 0;
  std::vector<PlyProperty> props;
};

size_t ply_type_size(const std::string& t, long line) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
      t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  throw FormatError("unknown ply type '" + t + "'", line);
}

double ply_read_binary_scalar(std::ifstream& in, const std::string& t) {
  unsigned char buf[8];
  in.read((char*)buf, ply_type_size(t, -1));
  if (!in) throw FormatError("unexpected end of ply data");
  auto as = [&](auto v) {
    std::memcpy(&v, buf, sizeof v);
    return (double)v;
  };
  if (t == "char" || t == "int8") return as(std::int8_t{});
  if (t == "uchar" || t == "uint8") return as(std::uint8_t{});
  if (t == "short" || t == "int16") return as(std::int16_t{});
  if (t == "ushort" || t == "uint16") return as(std::uint16_t{});
  if (t == "int" || t == "int32") return as(std::int32_t{});
  if (t == "uint" || t == "uint32") return as(std::uint32_t{});
  if (t == "float" || t == "float32") return as(float{});
  return as(double{});
}

TriMesh load_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw FormatError("empty file", 1);
  line_no++;
  if (line.rfind("ply", 0) != 0) throw FormatError("missing ply magic", 1);

  bool binary = false;
  std::vector<PlyElement> elements;
  while (std::getline(in, line)) {
    line_no++;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "comment" || tag == "obj_info") continue;
    if (tag == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "ascii")
        binary = false;
      else if (fmt == "binary_little_endian")
        binary = true;
      else
        throw FormatError("unsupported ply format '" + fmt + "'", line_no);
    } else if (tag == "element") {
      PlyElement el;
      if (!(ss >> el.name >> el.count)) throw FormatError("malformed element", line_no);
      elements.push_back(el);
    } else if (tag == "property") {
      if (elements.empty()) throw FormatError("property before element", line_no);
      PlyProperty p;
      std::string t;
      ss >> t;
      if (t == "list") {
        p.is_list = true;
        if (!(ss >> p.count_type >> p.type >> p.name))
          throw FormatError("malformed list property", line_no);
      } else {
        p.type = t;
        if (!(ss >> p.name)) throw FormatError("malformed property", line_no);
      }
      elements.back().props.push_back(p);
    } else if (tag == "end_header") {
      break;
    } else if (!tag.empty()) {
      throw FormatError("unexpected header token '" + tag + "'", line_no);
    }
  }

  TriMesh mesh;
  for (const PlyElement& el : elements) {
    int ix = -1, iy = -1, iz = -1;
    if (el.name == "vertex") {
      for (size_t i = 0; i < el.props.size(); ++i) {
        if (el.props[i].name == "x") ix = (int)i;
        if (el.props[i].name == "y") iy = (int)i;
        if (el.props[i].name == "z") iz = (int)i;
      }
      if (ix < 0 || iy < 0 || iz < 0) throw FormatError("vertex element lacks x/y/z", line_no);
    }
    for (long n = 0; n < el.count; ++n) {
      if (!binary) {
        std::string row;
        do {
          if (!std::getline(in, row)) throw FormatError("unexpected end of ply data", line_no);
          line_no++;
        } while (row.empty());
        std::istringstream ss(row);
        if (el.name == "vertex") {
          std::vector<double> vals(el.props.size());
          for (size_t i = 0; i < el.props.size(); ++i)
            if (!(ss >> vals[i])) throw FormatError("malformed vertex row", line_no);
          mesh.vertices.emplace_back(vals[ix], vals[iy], vals[iz]);
        } else if (el.name == "face") {
          long cnt;
          if (!(ss >> cnt) || cnt < 3) throw FormatError("malformed face row", line_no);
          std::vector<long> poly(cnt);
          for (long i = 0; i < cnt; ++i)
            if (!(ss >> poly[i])) throw FormatError("malformed face row", line_no);
          for (long k = 2; k < cnt; ++k)
            mesh.faces.push_back({(int)poly[0], (int)poly[k - 1], (int)poly[k]});
        }
        // other elements: row already consumed
      } else {
        if (el.name == "vertex") {
          std::vector<double> vals(el.props.size());
          for (size_t i = 0; i < el.props.size(); ++i) {
            if (el.props[i].is_list) throw FormatError("list property on vertex", line_no);
            vals[i] = ply_read_binary_scalar(in, el.props[i].type);
          }
          mesh.vertices.emplace_back(vals[ix], vals[iy], vals[iz]);
        } else {
          for (const PlyProperty& p : el.props) {
            if (p.is_list) {
              long cnt = (long)ply_read_binary_scalar(in, p.count_type);
              std::vector<long> items(cnt);
              for (long i = 0; i < cnt; ++i)
                items[i] = (long)ply_read_binary_scalar(in, p.type);
              if (el.name == "face" && p.name == "vertex_indices") {
                if (cnt < 3) throw FormatError("face with fewer than 3 vertices");
                for (long k = 2; k < cnt; ++k)
                  mesh.faces.push_back({(int)items[0], (int)items[k - 1], (int)items[k]});
              }
            } else {
              ply_read_binary_scalar(in, p.type);
            }
          }
        }
      }
    }
  }
  mesh.validate();
  return mesh;
}

}  // namespace

TriMesh load_mesh(const std::string& path) {
  auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (char& c : ext) c = (char)std::tolower(c);
  if (ext == "obj") return load_obj(path);
  if (ext == "ply") return load_ply(path);
  throw FormatError("unsupported mesh extension '" + ext + "' for " + path);
}

void save_obj(const std::string& path, const TriMesh& mesh) {
  mesh.validate();
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out.precision(9);
  for (const Vec3& v : mesh.vertices) out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
  if (!out) throw FormatError("write failed for " + path);
}

// ------------------------------------------------------------- primitives

TriMesh make_cube(const Vec3& lo, const Vec3& hi) {
  TriMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.emplace_back(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(),
                            i & 4 ? hi.z() : lo.z());
  // 12 triangles, outward CCW
  const int quads[6][4] = {
      {0, 2, 3, 1},  // z = lo
      {4, 5, 7, 6},  // z = hi
      {0, 1, 5, 4},  // y = lo
      {2, 6, 7, 3},  // y = hi
      {0, 4, 6, 2},  // x = lo
      {1, 3, 7, 5},  // x = hi
  };
  for (const auto& q : quads) {
    m.faces.push_back({q[0], q[1], q[2]});
    m.faces.push_back({q[0], q[2], q[3]});
  }
  return m;
}

TriMesh make_icosphere(int subdivisions, double radius) {
  if (subdivisions < 0 || subdivisions > 8)
    throw ValidationError("make_icosphere: subdivisions out of range");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},
      {5, 11, 4}, {11, 10, 2}, {10, 7, 6},  {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
      {3, 2, 6},  {3, 6, 8},  {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10},
      {8, 6, 7},  {9, 8, 1}};
  for (Vec3& v : verts) v.normalize();

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vec3 m = (verts[a] + verts[b]).normalized();
      verts.push_back(m);
      int idx = (int)verts.size() - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces.swap(next);
  }

  TriMesh m;
  m.vertices.reserve(verts.size());
  for (const Vec3& v : verts) m.vertices.push_back(v * radius);
  m.faces = std::move(faces);
  return m;
}

TriMesh make_quad(const Vec3& center, const Vec3& u, const Vec3& v) {
  TriMesh m;
  m.vertices = {center - u - v, center + u - v, center + u + v, center - u + v};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

std::vector<Vec3> sample_on_surface(const TriMesh& mesh, int count, Rng& rng) {
  if (mesh.faces.empty()) throw ValidationError("sample_on_surface: no faces");
  if (count < 0) throw ValidationError("sample_on_surface: negative count");
  std::vector<double> cumulative(mesh.faces.size());
  double acc = 0.0;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    acc += mesh.face_area((int)f);
    cumulative[f] = acc;
  }
  if (!(acc > 0.0)) throw ValidationError("sample_on_surface: zero total area");
  std::vector<Vec3> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    double pick = rng.uniform() * acc;
    size_t f = std::lower_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin();
    if (f >= mesh.faces.size()) f = mesh.faces.size() - 1;
    const auto& tri = mesh.faces[f];
    double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
    double a = 1.0 - r1, b = r1 * (1.0 - r2), c = r1 * r2;
    out.push_back(a * mesh.vertices[tri[0]] + b * mesh.vertices[tri[1]] +
                  c * mesh.vertices[tri[2]]);
  }
  return out;
}

}  // namespace surs
