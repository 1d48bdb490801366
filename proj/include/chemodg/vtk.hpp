#ifndef CHEMODG_VTK_HPP
#define CHEMODG_VTK_HPP

// Legacy ASCII VTK snapshots of the discontinuous fields. Every element is
// split once into four triangles and writes its own six points, so jumps
// between elements stay visible.

#include <array>
#include <iomanip>
#include <ostream>

#include "chemodg/stepper.hpp"

namespace chemodg {

inline constexpr std::array<Point2, 6> kVisPoints = {Point2{0.0, 0.0}, Point2{1.0, 0.0}, Point2{0.0, 1.0},
                                                     Point2{0.5, 0.0}, Point2{0.5, 0.5}, Point2{0.0, 0.5}};
inline constexpr std::array<std::array<int, 3>, 4> kVisTriangles = {
    std::array<int, 3>{0, 3, 5}, std::array<int, 3>{3, 1, 4}, std::array<int, 3>{5, 4, 2}, std::array<int, 3>{3, 4, 5}};

inline void write_snapshot_vtk(std::ostream& os, const Stepper& stepper, const State& s) {
  const auto& disc = stepper.discretization();
  const auto& mesh = *disc.mesh;
  const int ne = mesh.element_count();
  const int np = ne * static_cast<int>(kVisPoints.size());
  const int nc = ne * static_cast<int>(kVisTriangles.size());
  const FieldCoeffs rho = stepper.density(s);

  os << "# vtk DataFile Version 3.0\n";
  os << "chemotaxis-fluid snapshot t=" << std::setprecision(10) << s.time << " step=" << s.step << "\n";
  os << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << std::setprecision(12);
  os << "POINTS " << np << " double\n";
  for (int e = 0; e < ne; ++e) {
    const auto& map = mesh.element_geometry(e).map;
    for (const auto& r : kVisPoints) {
      const Point2 x = map.to_physical(r);
      os << x.x << ' ' << x.y << " 0\n";
    }
  }
  os << "CELLS " << nc << ' ' << 4 * nc << '\n';
  for (int e = 0; e < ne; ++e) {
    const int base = e * static_cast<int>(kVisPoints.size());
    for (const auto& t : kVisTriangles) os << "3 " << base + t[0] << ' ' << base + t[1] << ' ' << base + t[2] << '\n';
  }
  os << "CELL_TYPES " << nc << '\n';
  for (int i = 0; i < nc; ++i) os << "5\n";

  os << "CELL_DATA " << nc << "\nSCALARS element_id int 1\nLOOKUP_TABLE default\n";
  for (int e = 0; e < ne; ++e)
    for (std::size_t t = 0; t < kVisTriangles.size(); ++t) os << e << '\n';

  os << "POINT_DATA " << np << '\n';
  auto scalar = [&](const char* name, const DgSpace& space, const FieldCoeffs& f) {
    os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (int e = 0; e < ne; ++e)
      for (const auto& r : kVisPoints) os << eval_field(space, f, e, r).value << '\n';
  };
  scalar("rho", disc.scalar, rho);
  scalar("c", disc.scalar, s.c);
  scalar("p", disc.pressure, s.p);
  os << "VECTORS u double\n";
  for (int e = 0; e < ne; ++e)
    for (const auto& r : kVisPoints)
      os << eval_field(disc.velocity, s.u, e, r, 0).value << ' ' << eval_field(disc.velocity, s.u, e, r, 1).value
         << " 0\n";
}

}  // namespace chemodg

#endif  // CHEMODG_VTK_HPP
