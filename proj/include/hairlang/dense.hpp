#pragma once

#include "hairlang/hairmodel.hpp"

#include <charconv>
#include <random>
#include <sstream>

namespace hairlang {

// Dense strands for viewing: roots drawn from the density raster by
// rejection, shapes blended from the three nearest guides.
inline std::vector<Strand> interpolate_dense(std::span<const Strand> guides, const ScalpManifold& scalp,
                                             const DensityMap& density, int n_dense, std::uint64_t seed) {
  if (guides.empty()) throw Error(Errc::invalid_argument, "empty guide set");
  if (n_dense < 0) throw Error(Errc::invalid_argument, "negative dense count");
  const std::size_t L = guides.front().size();
  for (const auto& g : guides)
    if (g.size() != L || L == 0) throw Error(Errc::invalid_argument, "guides must share one point count");
  const int res = density.resolution;
  if (res < 1 || density.values.size() != static_cast<std::size_t>(res) * static_cast<std::size_t>(res))
    throw Error(Errc::invalid_argument, "malformed density map");
  double mx = 0.0;
  for (double v : density.values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(Errc::invalid_argument, "density must be finite and non-negative");
    mx = std::max(mx, v);
  }
  if (mx <= 0.0) throw Error(Errc::invalid_argument, "all-zero density");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t k = std::min<std::size_t>(3, guides.size());
  std::vector<Strand> out;
  out.reserve(static_cast<std::size_t>(n_dense));
  std::vector<std::pair<double, std::size_t>> dist(guides.size());
  for (int i = 0; i < n_dense; ++i) {
    UVCoord uv;
    for (;;) {
      uv = {unit(rng), unit(rng)};
      const int col = std::min(res - 1, static_cast<int>(uv.u * res));
      const int row = std::min(res - 1, static_cast<int>(uv.v * res));
      if (unit(rng) * mx < density.at(row, col)) break;
    }
    const Vec3 root = uv_to_position(uv, scalp);
    for (std::size_t g = 0; g < guides.size(); ++g) dist[g] = {(guides[g].root() - root).norm(), g};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<double> w(k);
    if (dist[0].first < 1e-12) {
      w[0] = 1.0;
    } else {
      double total = 0.0;
      for (std::size_t j = 0; j < k; ++j) total += (w[j] = 1.0 / dist[j].first);
      for (auto& x : w) x /= total;
    }
    Strand s;
    s.root_uv = uv;
    s.points.assign(L, root);
    for (std::size_t j = 0; j < k; ++j) {
      if (w[j] == 0.0) continue;
      const Strand& g = guides[dist[j].second];
      for (std::size_t p = 0; p < L; ++p) s.points[p] += w[j] * (g.points[p] - g.root());
    }
    s.points[0] = root;
    out.push_back(std::move(s));
  }
  return out;
}

// One `l` polyline per strand.
inline std::string export_obj(std::span<const Strand> strands) {
  if (strands.empty()) throw Error(Errc::invalid_argument, "nothing to export");
  std::string out;
  out.reserve(strands.size() * strands.front().size() * 48);
  char buf[128];
  for (const auto& s : strands)
    for (const auto& p : s.points) {
      const int n = std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", p.x(), p.y(), p.z());
      out.append(buf, static_cast<std::size_t>(n));
    }
  std::size_t index = 1;
  for (const auto& s : strands) {
    out += 'l';
    for (std::size_t i = 0; i < s.size(); ++i) {
      out += ' ';
      out += std::to_string(index++);
    }
    out += '\n';
  }
  return out;
}

// Reads back `v` and `l` records.
inline std::vector<std::vector<Vec3>> parse_obj_polylines(const std::string& text) {
  std::vector<Vec3> verts;
  std::vector<std::vector<Vec3>> lines;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) throw Error(Errc::format, "bad vertex at line " + std::to_string(lineno));
      verts.push_back(p);
    } else if (tag == "l") {
      std::vector<Vec3> poly;
      long idx;
      while (ls >> idx) {
        if (idx < 1 || static_cast<std::size_t>(idx) > verts.size())
          throw Error(Errc::format, "bad vertex index at line " + std::to_string(lineno));
        poly.push_back(verts[static_cast<std::size_t>(idx - 1)]);
      }
      if (poly.size() < 2) throw Error(Errc::format, "short polyline at line " + std::to_string(lineno));
      lines.push_back(std::move(poly));
    }
  }
  return lines;
}

}  // namespace hairlang
