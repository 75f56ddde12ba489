#pragma once

#include "eqlab/localfield.hpp"
#include "eqlab/rep.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace eqlab {

// Profiling counters for the performance suite.
struct CoverStats {
    std::size_t cells_touched = 0;
    std::size_t peak_set_size = 0;
    enum class Path { Bitmap, Packed64, Packed128, Lexicographic } path = Path::Bitmap;
};

namespace detail {

// Counts distinct integer tuples. `coords` holds n * dim values; `lo` and
// `range` describe the per-axis bounding box.
std::size_t count_distinct(std::vector<std::int64_t>& coords, int dim, const std::vector<std::int64_t>& lo,
                           const std::vector<std::int64_t>& range, CoverStats* stats);

struct Bitmap {
    std::vector<std::uint64_t> words;
    std::size_t count = 0;

    explicit Bitmap(std::size_t bits) : words((bits + 63) / 64, 0) {}
    void set(std::uint64_t i)
    {
        auto& w = words[i >> 6];
        auto bit = std::uint64_t(1) << (i & 63);
        count += (w & bit) == 0;
        w |= bit;
    }
};

inline constexpr double kBitmapMaxLog2 = 27.0;

} // namespace detail

// Number of distinct integer cells among n points.  `cell_of(i, out)` writes
// the dim integer cell coordinates of point i.  Keys are exact (a dense
// bitmap, a mixed-radix packing into 64/128 bits, or a lexicographic sort),
// never hashed.
template <class CellFn>
std::size_t count_cells(std::size_t n, int dim, CellFn&& cell_of, CoverStats* stats = nullptr)
{
    if(n == 0)
        return 0;
    std::vector<std::int64_t> lo(dim, std::numeric_limits<std::int64_t>::max());
    std::vector<std::int64_t> hi(dim, std::numeric_limits<std::int64_t>::min());
    std::vector<std::int64_t> cell(dim);
    for(std::size_t i = 0; i < n; ++i) {
        cell_of(i, cell.data());
        for(int a = 0; a < dim; ++a) {
            lo[a] = std::min(lo[a], cell[a]);
            hi[a] = std::max(hi[a], cell[a]);
        }
    }
    std::vector<std::int64_t> range(dim);
    double log2_total = 0.0;
    for(int a = 0; a < dim; ++a) {
        range[a] = hi[a] - lo[a] + 1;
        log2_total += std::log2(double(range[a]));
    }
    if(stats)
        stats->cells_touched += n;
    if(log2_total <= detail::kBitmapMaxLog2) {
        std::uint64_t total = 1;
        for(int a = 0; a < dim; ++a)
            total *= std::uint64_t(range[a]);
        detail::Bitmap bits(total);
        for(std::size_t i = 0; i < n; ++i) {
            cell_of(i, cell.data());
            std::uint64_t key = 0;
            for(int a = 0; a < dim; ++a)
                key = key * std::uint64_t(range[a]) + std::uint64_t(cell[a] - lo[a]);
            bits.set(key);
        }
        if(stats) {
            stats->path = CoverStats::Path::Bitmap;
            stats->peak_set_size = std::max(stats->peak_set_size, bits.count);
        }
        return bits.count;
    }
    std::vector<std::int64_t> coords(n * std::size_t(dim));
    for(std::size_t i = 0; i < n; ++i)
        cell_of(i, coords.data() + i * dim);
    return detail::count_distinct(coords, dim, lo, range, stats);
}

inline std::int64_t real_cell(double x, double inv_delta)
{
    // floor without the libm call: truncate, then step down for negatives
    double v = x * inv_delta;
    auto c = static_cast<std::int64_t>(v);
    return c - (v < static_cast<double>(c));
}

inline std::int64_t padic_cell(double x, std::int64_t pk)
{
    return static_cast<std::int64_t>(x) % pk;
}

// Real: occupied cells of the axis-aligned grid of side delta.
// Padic: distinct residues mod p^k (exact covering number).
std::size_t covering_number(const CloudView& pts, ScaleIndex k, ScaleBase base = ScaleBase::Native,
                            CoverStats* stats = nullptr);

// Brute-force reference used by tests: distinct cosets via std::set.
std::size_t covering_number_bruteforce(const CloudView& pts, ScaleIndex k, ScaleBase base = ScaleBase::Native);

struct LocalDimension {
    double value = 0.0;
    bool degenerate = false; // both coverings were 1
};

// (log N_{k2} - log N_{k1}) / ((k2 - k1) log q)
LocalDimension local_dimension(const CloudView& pts, ScaleIndex k1, ScaleIndex k2,
                               ScaleBase base = ScaleBase::Native);

// Covering number of the points within `radius` of a representation box.
std::size_t nhd_covering(const PhiCloud& pts, const RepBox& box, double radius, ScaleIndex k);
// ... or of a finite center set (max-row distance).
std::size_t nhd_covering(const PhiCloud& pts, const PhiCloud& centers, double radius, ScaleIndex k);

} // namespace eqlab
