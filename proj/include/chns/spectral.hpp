#pragma once

#include "chns/grid.hpp"

#include <functional>
#include <span>

namespace chns {

/// Multiplier applied to an eigenvalue λ ≥ 0 of -Δ_h.
using SpectralSymbol = std::function<double(double)>;

/// out = f(-Δ_h) in on cell-centered data, using the cosine basis that
/// diagonalizes the Neumann Laplacian. f(0) multiplies the mean.
void apply_neumann_symbol(const Grid& g, std::span<const double> in, std::span<double> out,
                          const SpectralSymbol& f);

/// Same for one face component of a no-slip velocity: the sine bases that
/// diagonalize the componentwise vector Laplacian with zero wall-normal faces
/// and mirrored-negative ghosts across tangential walls. Boundary faces of
/// `out` are set to zero.
void apply_face_symbol(const Grid& g, int axis, std::span<const double> in, std::span<double> out,
                       const SpectralSymbol& f);

} // namespace chns
