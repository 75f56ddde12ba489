#include "eqlab/fixtures.hpp"

#include <cmath>
#include <numbers>

namespace eqlab {

PhiCloud uniform_phi_cloud(const RepSpace& rep, std::size_t n, Rng& rng)
{
    PhiCloud out{rep, {}};
    out.data.reserve(n * rep.dim());
    for(std::size_t i = 0; i < n; ++i)
        for(int row = 0; row < rep.rows(); ++row) {
            auto v = sample_unit_ball(rng, rep.field, rep.m);
            out.data.insert(out.data.end(), v.coords.begin(), v.coords.end());
        }
    return out;
}

VecCloud uniform_vec_cloud(const Field& f, int m, std::size_t n, Rng& rng)
{
    VecCloud out{f, m, {}};
    out.data.reserve(n * m);
    for(std::size_t i = 0; i < n; ++i)
        out.push(sample_unit_ball(rng, f, m).coords);
    return out;
}

PhiCloud lowest_row_grid(const RepSpace& rep, int k)
{
    PhiCloud out{rep, {}};
    const double h = rep.field.scale(k);
    const auto steps = static_cast<long>(std::floor(1.0 / h));
    for(long s = -steps; s <= steps; ++s) {
        PhiPoint p = zero_point(rep);
        p.at(rep.d, 0) = double(s) * h;
        out.push(p);
    }
    return out;
}

VecCloud box_vec_cloud(const Field& f, const FVector& base, const std::vector<BoxDirection>& dirs, std::size_t n,
                       double noise, Rng& rng)
{
    const int m = int(base.size());
    RepSpace flat{f, 0, m};
    RepBox box{PhiPoint{base.coords, m}, dirs};
    auto c = planted_box_generator(flat, box, n, noise, rng);
    return VecCloud{f, m, std::move(c.data)};
}

VecCloud padic_line_cloud(const Field& f, const FVector& base, const FVector& u, int k, Rng& rng)
{
    const int m = int(base.size());
    VecCloud out{f, m, {}};
    std::int64_t pk = 1;
    for(int i = 0; i < k; ++i)
        pk *= f.prime();
    const std::int64_t lift = f.modulus() / pk;
    std::uniform_int_distribution<std::int64_t> hi(0, lift - 1);
    std::vector<double> x(m);
    for(std::int64_t j = 0; j < pk; ++j) {
        double t = double(j + pk * hi(rng));
        for(int c = 0; c < m; ++c)
            x[c] = f.add(base[c], f.mul(t, u[c]));
        out.push(x);
    }
    return out;
}

VecCloud geometric_product_cloud(double theta, int count)
{
    VecCloud out{Field::real(), 2, {}};
    std::vector<double> g(count);
    for(int j = 0; j < count; ++j)
        g[j] = (2.0 * std::exp(-j * theta) - 1.0) / std::numbers::sqrt2;
    for(double x : g)
        for(double y : g)
            out.push(std::vector<double>{x, y});
    return out;
}

std::vector<BoxDirection> random_plane_directions(Rng& rng, int k0, int k1)
{
    const Field f = Field::real();
    double angle = std::uniform_real_distribution<double>(0.0, std::numbers::pi)(rng);
    FVector u0{{std::cos(angle), std::sin(angle)}};
    FVector u1{{-std::sin(angle), std::cos(angle)}};
    return {make_direction(f, u0, k0), make_direction(f, u1, k1)};
}

} // namespace eqlab
