#include "eqlab/sumproduct.hpp"

#include "eqlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace eqlab {

SumCount sum_covering(const VecCloud& a, const VecCloud& b, double r, int k, std::size_t budget, bool strict,
                      std::uint64_t sample_seed)
{
    if(a.size() == 0 || b.size() == 0)
        throw EmptyCloud("sum_covering: empty cloud");
    const Field& f = a.field;
    const int m = a.m;
    const std::size_t na = a.size(), nb = b.size();
    const double* pa = a.data.data();
    const double* pb = b.data.data();
    SumCount out;
    std::vector<std::uint64_t> picks;
    std::size_t n = na * nb;
    if(n > budget) {
        if(strict)
            throw BudgetExceeded("sum_covering: pair count exceeds the budget");
        Rng rng(sample_seed);
        std::uniform_int_distribution<std::uint64_t> pick(0, n - 1);
        picks.resize(budget);
        for(auto& p : picks)
            p = pick(rng);
        n = budget;
        out.exact = false;
    }
    out.pairs_used = n;
    auto pair = [&](std::size_t t) -> std::size_t { return picks.empty() ? t : picks[t]; };
    if(f.is_real()) {
        double inv = 1.0 / f.scale(k);
        out.count = count_cells(n, m, [&](std::size_t t, std::int64_t* cell) {
            std::size_t p = pair(t);
            const double* x = pa + (p / nb) * m;
            const double* y = pb + (p % nb) * m;
            for(int c = 0; c < m; ++c)
                cell[c] = real_cell(x[c] + r * y[c], inv);
        });
        return out;
    }
    std::int64_t pk = 1;
    for(int i = 0; i < k; ++i)
        pk *= f.prime();
    const auto ri = std::int64_t(r) % pk;
    out.count = count_cells(n, m, [&](std::size_t t, std::int64_t* cell) {
        std::size_t p = pair(t);
        const double* x = pa + (p / nb) * m;
        const double* y = pb + (p % nb) * m;
        for(int c = 0; c < m; ++c)
            cell[c] = (std::int64_t(x[c]) % pk + ri * (std::int64_t(y[c]) % pk)) % pk;
    });
    return out;
}

ExcResult exceptional_measure(const VecCloud& a, const VecCloud& b, const SumProdConfig& cfg, Rng& rng)
{
    const Field& f = a.field;
    const double L = double(cfg.k) * std::log(f.q());
    ExcResult out;
    out.threshold = std::exp(L * (cfg.alpha_hat + cfg.eps1));
    out.measure_threshold = std::exp(-L * cfg.eps2);
    double need = cfg.alpha_hat * L - 1e-9;
    out.hypothesis_ok = std::log(double(covering_number(a.view(), ScaleIndex{cfg.k}))) >= need &&
                        std::log(double(covering_number(b.view(), ScaleIndex{cfg.k}))) >= need;

    auto rv = sample_r_values(rng, f, cfg.r_samples);
    std::vector<std::uint64_t> seeds(rv.size());
    for(auto& s : seeds)
        s = rng();
    out.rows.resize(rv.size());
    parallel_for(rv.size(), cfg.threads, [&](std::size_t i) {
        ExcRow row;
        row.r = rv[i];
        row.sum = sum_covering(a, b, rv[i], cfg.k, cfg.pair_budget, cfg.strict, seeds[i]);
        row.threshold = out.threshold;
        row.exceptional = double(row.sum.count) < out.threshold;
        out.rows[i] = row;
    });
    std::size_t exc = 0;
    for(const auto& row : out.rows) {
        exc += row.exceptional;
        out.all_exact = out.all_exact && row.sum.exact;
    }
    out.fraction = rv.empty() ? 0.0 : double(exc) / rv.size();
    out.ci = wilson_interval(exc, rv.size());
    out.large = out.fraction > out.measure_threshold;
    return out;
}

void write_exc_csv(std::ostream& os, const Field& f, const ExcResult& e)
{
    os << "r_repr,sum_count,threshold,exceptional\r\n";
    char buf[64];
    for(const auto& row : e.rows) {
        std::snprintf(buf, sizeof buf, "%.17g", row.threshold);
        os << format_scalar(f, row.r) << "," << row.sum.count << "," << buf << "," << (row.exceptional ? 1 : 0)
           << "\r\n";
    }
}

PhiCloud as_phi_cloud(const VecCloud& v) { return PhiCloud{RepSpace{v.field, 0, v.m}, v.data}; }

namespace {

FVector anchor_of(const VecCloud& v)
{
    FVector out{std::vector<double>(v.m, 0.0)};
    if(v.field.is_padic()) {
        out.coords.assign(v.point(0).begin(), v.point(0).end());
        return out;
    }
    for(std::size_t i = 0; i < v.size(); ++i)
        for(int c = 0; c < v.m; ++c)
            out[c] += v.data[i * v.m + c];
    for(auto& x : out.coords)
        x /= double(v.size());
    return out;
}

std::vector<double> recentre(const VecCloud& v, const FVector& base)
{
    std::vector<double> rows(v.data.size());
    for(std::size_t i = 0; i < v.size(); ++i)
        for(int c = 0; c < v.m; ++c)
            rows[i * v.m + c] = v.field.sub(v.data[i * v.m + c], base[c]);
    return rows;
}

} // namespace

CommonBoxSearch find_common_box(const VecCloud& a, const VecCloud& b, const SumProdConfig& cfg)
{
    CommonBoxSearch out;
    if(a.size() == 0 || b.size() == 0) {
        out.reason = "empty cloud";
        return out;
    }
    const Field& f = a.field;
    const int m = a.m;
    const int k = cfg.k;
    const double eps = cfg.eps();

    bool ladder_hit = false;
    for(int s = 0; s <= m * k && !ladder_hit; ++s) {
        double e = double(s) / k;
        ladder_hit = e >= cfg.alpha_hat - cfg.C * eps - 1e-9 && e <= cfg.alpha_hat + cfg.C * eps + 1e-9;
    }
    if(!ladder_hit) {
        out.reason = "no ladder box has its covering number inside the window";
        return out;
    }

    CommonBox box;
    box.base1 = anchor_of(a);
    box.base2 = anchor_of(b);
    auto rows1 = recentre(a, box.base1);
    auto rows2 = recentre(b, box.base2);
    std::vector<double> pooled = rows1;
    pooled.insert(pooled.end(), rows2.begin(), rows2.end());
    auto fits = fit_directions(f, m, pooled);
    std::vector<FVector> units;
    for(const auto& fit : fits)
        units.push_back(fit.unit);
    auto e1 = direction_extents(f, m, units, rows1);
    auto e2 = direction_extents(f, m, units, rows2);
    for(std::size_t j = 0; j < units.size(); ++j) {
        // the shared structure is the intersection of the two extent profiles
        int kj = std::max(0, int(std::lround(std::max(e1[j], e2[j]))));
        if(kj >= k)
            continue;
        box.dirs.push_back(make_direction(f, units[j], kj));
    }

    auto check = [&](const VecCloud& v, const FVector& base) {
        RepBox rb{PhiPoint{base.coords, m}, box.dirs};
        return verify_box(as_phi_cloud(v), rb, cfg.alpha_hat, eps, cfg.C, cfg.c, k,
                          covering_number(v.view(), ScaleIndex{k}));
    };
    box.check1 = check(a, box.base1);
    box.check2 = check(b, box.base2);
    if(box.check1.ok() && box.check2.ok()) {
        out.box = std::move(box);
        return out;
    }
    out.reason = "shared box failed verification";
    return out;
}

} // namespace eqlab
