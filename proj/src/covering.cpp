#include "eqlab/covering.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace eqlab {

namespace detail {

namespace {

template <class Key>
std::size_t sort_unique(std::vector<Key>& keys)
{
    std::sort(keys.begin(), keys.end());
    return std::size_t(std::unique(keys.begin(), keys.end()) - keys.begin());
}

} // namespace

std::size_t count_distinct(std::vector<std::int64_t>& coords, int dim, const std::vector<std::int64_t>& lo,
                           const std::vector<std::int64_t>& range, CoverStats* stats)
{
    const std::size_t n = coords.size() / std::size_t(dim);
    double log2_total = 0.0;
    for(int a = 0; a < dim; ++a)
        log2_total += std::log2(double(range[a]));

    std::size_t count = 0;
    if(log2_total < 63.5) {
        std::vector<std::uint64_t> keys(n);
        for(std::size_t i = 0; i < n; ++i) {
            std::uint64_t key = 0;
            for(int a = 0; a < dim; ++a)
                key = key * std::uint64_t(range[a]) + std::uint64_t(coords[i * dim + a] - lo[a]);
            keys[i] = key;
        }
        count = sort_unique(keys);
        if(stats)
            stats->path = CoverStats::Path::Packed64;
    }
    else if(log2_total < 127.5) {
        using u128 = unsigned __int128;
        std::vector<u128> keys(n);
        for(std::size_t i = 0; i < n; ++i) {
            u128 key = 0;
            for(int a = 0; a < dim; ++a)
                key = key * u128(range[a]) + u128(coords[i * dim + a] - lo[a]);
            keys[i] = key;
        }
        count = sort_unique(keys);
        if(stats)
            stats->path = CoverStats::Path::Packed128;
    }
    else {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t(0));
        auto less = [&](std::size_t x, std::size_t y) {
            return std::lexicographical_compare(coords.begin() + x * dim, coords.begin() + (x + 1) * dim,
                                                coords.begin() + y * dim, coords.begin() + (y + 1) * dim);
        };
        std::sort(order.begin(), order.end(), less);
        for(std::size_t i = 0; i < n; ++i)
            if(i == 0 || less(order[i - 1], order[i]))
                ++count;
        if(stats)
            stats->path = CoverStats::Path::Lexicographic;
    }
    if(stats)
        stats->peak_set_size = std::max(stats->peak_set_size, n);
    return count;
}

} // namespace detail

std::size_t covering_number(const CloudView& pts, ScaleIndex k, ScaleBase base, CoverStats* stats)
{
    const Field& f = *pts.field;
    const int dim = pts.dim;
    const double* data = pts.data.data();
    if(f.is_real()) {
        double inv = 1.0 / f.scale(k.k, base);
        return count_cells(
            pts.size(), dim,
            [&](std::size_t i, std::int64_t* out) {
                for(int a = 0; a < dim; ++a)
                    out[a] = real_cell(data[i * dim + a], inv);
            },
            stats);
    }
    if(k.k > f.precision())
        throw PrecisionExceeded("covering scale exceeds p-adic precision");
    std::int64_t pk = 1;
    for(int i = 0; i < k.k; ++i)
        pk *= f.prime();
    return count_cells(
        pts.size(), dim,
        [&](std::size_t i, std::int64_t* out) {
            for(int a = 0; a < dim; ++a)
                out[a] = padic_cell(data[i * dim + a], pk);
        },
        stats);
}

std::size_t covering_number_bruteforce(const CloudView& pts, ScaleIndex k, ScaleBase base)
{
    const Field& f = *pts.field;
    std::set<std::vector<std::int64_t>> cells;
    double delta = f.scale(k.k, base);
    for(std::size_t i = 0; i < pts.size(); ++i) {
        std::vector<std::int64_t> key;
        for(double x : pts.point(i)) {
            if(f.is_padic()) {
                // coset x + p^k Z_p is named by the first k p-adic digits
                auto r = std::int64_t(x);
                for(int j = 0; j < k.k; ++j) {
                    key.push_back(r % f.prime());
                    r /= f.prime();
                }
            }
            else {
                key.push_back(std::int64_t(std::floor(x / delta)));
            }
        }
        cells.insert(std::move(key));
    }
    return cells.size();
}

LocalDimension local_dimension(const CloudView& pts, ScaleIndex k1, ScaleIndex k2, ScaleBase base)
{
    if(k2.k <= k1.k)
        throw std::invalid_argument("local_dimension needs k2 > k1");
    double n1 = double(covering_number(pts, k1, base));
    double n2 = double(covering_number(pts, k2, base));
    LocalDimension out;
    if(n1 == 1.0 && n2 == 1.0) {
        out.degenerate = true;
        return out;
    }
    const Field& f = *pts.field;
    double logq = (f.is_real() && base == ScaleBase::Dyadic) ? std::log(2.0) : std::log(f.q());
    out.value = (std::log(n2) - std::log(n1)) / (double(k2.k - k1.k) * logq);
    return out;
}

std::size_t nhd_covering(const PhiCloud& pts, const RepBox& box, double radius, ScaleIndex k)
{
    PhiCloud sub = box_nhd_filter(pts, box, radius);
    if(sub.size() == 0)
        return 0;
    return covering_number(sub.view(), k);
}

std::size_t nhd_covering(const PhiCloud& pts, const PhiCloud& centers, double radius, ScaleIndex k)
{
    const auto& rep = pts.rep;
    const Field& f = rep.field;
    PhiCloud sub{rep, {}};
    std::vector<double> diff(rep.dim());
    for(std::size_t n = 0; n < pts.size(); ++n) {
        auto x = pts.point(n);
        for(std::size_t c = 0; c < centers.size(); ++c) {
            auto y = centers.point(c);
            for(int j = 0; j < rep.dim(); ++j)
                diff[j] = f.sub(x[j], y[j]);
            if(phi_norm(rep, diff) <= radius) {
                sub.push(x);
                break;
            }
        }
    }
    if(sub.size() == 0)
        return 0;
    return covering_number(sub.view(), k);
}

} // namespace eqlab
