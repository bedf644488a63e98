#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "pflow/csv.hpp"
#include "pflow/integrate.hpp"

namespace pflow {

struct GridBounds {
  double xmin = -1.0, xmax = 1.0;
  double ymin = -1.0, ymax = 1.0;

  void validate() const {
    if (!(xmax > xmin) || !(ymax > ymin) || !std::isfinite(xmin) || !std::isfinite(xmax) ||
        !std::isfinite(ymin) || !std::isfinite(ymax))
      throw ConfigError("grid bounds must be finite with xmax > xmin and ymax > ymin");
  }
};

// sigma is stored row-major over y (index j) then x (index i). NaN marks
// nodes where the exponent is not computable: the grid boundary (central
// differences only) and nodes whose advection diverged.
struct FTLEGrid {
  std::vector<double> x_coords, y_coords;
  std::vector<double> sigma;
  double horizon_T = 0.0;

  int nx() const { return static_cast<int>(x_coords.size()); }
  int ny() const { return static_cast<int>(y_coords.size()); }
  double at(int i, int j) const {
    return sigma[static_cast<std::size_t>(j) * x_coords.size() + i];
  }
  bool is_missing(int i, int j) const { return std::isnan(at(i, j)); }
};

// Applies the flow map to every grid node (noiseless). A node whose
// integration diverges is marked missing rather than aborting the grid.
template <field_evaluator F>
std::vector<Vec2> advect_grid(const F& f, std::span<const double> x_coords,
                              std::span<const double> y_coords, const IntegratorSpec& spec) {
  if (x_coords.size() < 3 || y_coords.size() < 3)
    throw ContractError("advect_grid: grid must be at least 3x3");
  spec.validate();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<Vec2> out(x_coords.size() * y_coords.size());
  for (std::size_t j = 0; j < y_coords.size(); ++j)
    for (std::size_t i = 0; i < x_coords.size(); ++i) {
      try {
        out[j * x_coords.size() + i] = flow_map(f, Vec2{x_coords[i], y_coords[j]}, spec);
      } catch (const NumericError&) {
        out[j * x_coords.size() + i] = {nan, nan};
      }
    }
  return out;
}

struct FlowMapJacobian {
  double dphi[2][2];          // central-difference flow map Jacobian
  double cauchy_green[2][2];  // (DPhi)^T DPhi
  double lambda_max = 0.0;    // largest eigenvalue of the Cauchy-Green tensor
};

// Central differences over the advected neighbors:
//   dphi = [ (x_{i+1,j}(T) - x_{i-1,j}(T)) / (x_{i+1} - x_{i-1}),  ... ]
// Boundary nodes and nodes with missing neighbors are not computable.
inline std::optional<FlowMapJacobian> flow_map_jacobian(std::span<const Vec2> advected,
                                                        std::span<const double> x_coords,
                                                        std::span<const double> y_coords,
                                                        int i, int j) {
  const int nx = static_cast<int>(x_coords.size());
  const int ny = static_cast<int>(y_coords.size());
  if (i < 1 || j < 1 || i > nx - 2 || j > ny - 2) return std::nullopt;
  const auto at = [&](int ii, int jj) { return advected[static_cast<std::size_t>(jj) * nx + ii]; };
  const Vec2 xp = at(i + 1, j), xm = at(i - 1, j);
  const Vec2 yp = at(i, j + 1), ym = at(i, j - 1);
  if (!xp.finite() || !xm.finite() || !yp.finite() || !ym.finite()) return std::nullopt;

  const double dx0 = x_coords[i + 1] - x_coords[i - 1];
  const double dy0 = y_coords[j + 1] - y_coords[j - 1];
  FlowMapJacobian jac;
  jac.dphi[0][0] = (xp.x - xm.x) / dx0;
  jac.dphi[0][1] = (yp.x - ym.x) / dy0;
  jac.dphi[1][0] = (xp.y - xm.y) / dx0;
  jac.dphi[1][1] = (yp.y - ym.y) / dy0;

  const double a = jac.dphi[0][0] * jac.dphi[0][0] + jac.dphi[1][0] * jac.dphi[1][0];
  const double b = jac.dphi[0][0] * jac.dphi[0][1] + jac.dphi[1][0] * jac.dphi[1][1];
  const double c = jac.dphi[0][1] * jac.dphi[0][1] + jac.dphi[1][1] * jac.dphi[1][1];
  jac.cauchy_green[0][0] = a;
  jac.cauchy_green[0][1] = b;
  jac.cauchy_green[1][0] = b;
  jac.cauchy_green[1][1] = c;
  // closed-form largest eigenvalue of a symmetric 2x2 PSD matrix
  const double mean = 0.5 * (a + c);
  const double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  jac.lambda_max = std::max(0.0, mean + disc);
  return jac;
}

// sigma = (1/T) ln sqrt(lambda_max); lambda_max = 0 maps to -infinity.
inline double ftle_value(const FlowMapJacobian& jac, double T) {
  if (!(T > 0.0)) throw ContractError("ftle_value: horizon must be positive");
  if (jac.lambda_max == 0.0) return -std::numeric_limits<double>::infinity();
  return 0.5 * std::log(jac.lambda_max) / T;
}

template <field_evaluator F>
FTLEGrid ftle_field(const F& f, const GridBounds& bounds, int nx, int ny,
                    const IntegratorSpec& spec) {
  if (nx < 3 || ny < 3) throw ContractError("ftle_field: nx and ny must be >= 3");
  bounds.validate();
  spec.validate();
  FTLEGrid grid;
  grid.horizon_T = spec.horizon();
  grid.x_coords.resize(nx);
  grid.y_coords.resize(ny);
  for (int i = 0; i < nx; ++i)
    grid.x_coords[i] = bounds.xmin + (bounds.xmax - bounds.xmin) * i / (nx - 1);
  for (int j = 0; j < ny; ++j)
    grid.y_coords[j] = bounds.ymin + (bounds.ymax - bounds.ymin) * j / (ny - 1);

  const std::vector<Vec2> advected = advect_grid(f, grid.x_coords, grid.y_coords, spec);
  grid.sigma.assign(static_cast<std::size_t>(nx) * ny, std::numeric_limits<double>::quiet_NaN());
  for (int j = 1; j < ny - 1; ++j)
    for (int i = 1; i < nx - 1; ++i)
      if (const auto jac = flow_map_jacobian(advected, grid.x_coords, grid.y_coords, i, j))
        grid.sigma[static_cast<std::size_t>(j) * nx + i] = ftle_value(*jac, grid.horizon_T);
  return grid;
}

// Missing sigma values are written as empty fields.
inline void write_ftle_csv(const std::filesystem::path& path, const FTLEGrid& grid) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "i,j,x,y,sigma\n";
  for (int j = 0; j < grid.ny(); ++j)
    for (int i = 0; i < grid.nx(); ++i) {
      out << i << ',' << j << ',' << format_double(grid.x_coords[i]) << ','
          << format_double(grid.y_coords[j]) << ',';
      if (!grid.is_missing(i, j)) out << format_double(grid.at(i, j));
      out << '\n';
    }
  if (!out.good()) throw IoError("failed writing " + path.string());
}

}  // namespace pflow
