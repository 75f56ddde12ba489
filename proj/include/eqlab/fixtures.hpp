#pragma once

#include "eqlab/projection.hpp"

#include <vector>

namespace eqlab {

// n points with every weight row uniform in the unit ball of F^m.
PhiCloud uniform_phi_cloud(const RepSpace& rep, std::size_t n, Rng& rng);

VecCloud uniform_vec_cloud(const Field& f, int m, std::size_t n, Rng& rng);

// t e_d (x) e_0 for t on the delta-grid of [-1, 1] (Real only).
PhiCloud lowest_row_grid(const RepSpace& rep, int k);

// Points of base + sum_j t_j u_j (t_j uniform in B_1^F) in F^m.
VecCloud box_vec_cloud(const Field& f, const FVector& base, const std::vector<BoxDirection>& dirs, std::size_t n,
                       double noise, Rng& rng);

// base + t u with t running over every residue mod p^k once, lifted by a
// random multiple of p^k (so each coset of the line at scale k is hit once).
VecCloud padic_line_cloud(const Field& f, const FVector& base, const FVector& u, int k, Rng& rng);

// G x G with G = { e^{-j theta} : 0 <= j < count }, mapped affinely from
// [0, 1]^2 into the unit disc by x -> (2x - 1) / sqrt 2.
VecCloud geometric_product_cloud(double theta, int count);

// Random orthonormal pair of directions in R^2 with the given ladder indices.
std::vector<BoxDirection> random_plane_directions(Rng& rng, int k0, int k1);

} // namespace eqlab
