#include "eqlab/projection.hpp"

#include "eqlab/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

namespace eqlab {

Interval wilson_interval(std::size_t successes, std::size_t n, double z)
{
    if(n == 0)
        return {0.0, 1.0};
    double p = double(successes) / double(n);
    double nn = double(n);
    double denom = 1.0 + z * z / nn;
    double centre = (p + z * z / (2 * nn)) / denom;
    double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::vector<double> sample_r_values(Rng& rng, const Field& f, int n)
{
    std::vector<double> r(std::max(n, 0));
    for(auto& x : r)
        x = sample_unit_scalar(rng, f);
    return r;
}

std::size_t projected_covering(const PhiCloud& theta, double r, int rows, ScaleIndex k)
{
    const auto& rep = theta.rep;
    const Field& f = rep.field;
    const int m = rep.m;
    const int n_rows = rep.rows();
    FMatrix u = u_matrix(f, r, rep.d);
    const double* data = theta.data.data();
    const std::size_t stride = std::size_t(rep.dim());
    const int dim = rows * m;
    if(f.is_real()) {
        const double inv = 1.0 / f.scale(k.k);
        // the top rows of u, flattened, so the per-point loop is tight
        std::vector<double> coef(std::size_t(rows) * n_rows, 0.0);
        for(int j = 0; j < rows; ++j)
            for(int i = j; i < n_rows; ++i)
                coef[std::size_t(j) * n_rows + i] = u(j, i);
        const double* cu = coef.data();
        if(rows == 1 && m == 1)
            return count_cells(theta.size(), 1, [&](std::size_t n, std::int64_t* out) {
                const double* x = data + n * stride;
                double s = 0.0;
                for(int i = 0; i < n_rows; ++i)
                    s += cu[i] * x[i];
                out[0] = real_cell(s, inv);
            });
        return count_cells(theta.size(), dim, [&](std::size_t n, std::int64_t* out) {
            const double* x = data + n * stride;
            for(int j = 0; j < rows; ++j)
                for(int c = 0; c < m; ++c) {
                    double s = 0.0;
                    for(int i = j; i < n_rows; ++i)
                        s += cu[j * n_rows + i] * x[i * m + c];
                    out[j * m + c] = real_cell(s, inv);
                }
        });
    }
    std::int64_t pk = 1;
    for(int i = 0; i < k.k; ++i)
        pk *= f.prime();
    return count_cells(theta.size(), dim, [&](std::size_t n, std::int64_t* out) {
        const double* x = data + n * stride;
        for(int j = 0; j < rows; ++j)
            for(int c = 0; c < m; ++c) {
                double s = 0.0;
                for(int i = j; i < n_rows; ++i)
                    s = f.add(s, f.mul(u(j, i), x[i * m + c]));
                out[j * m + c] = padic_cell(s, pk);
            }
    });
}

namespace {

double ladder_log(const Field& f, int k) { return double(k) * std::log(f.q()); }

// Real projected counts for a chunk of r values in one pass over the points,
// one bitmap per r.  Cells are bounded a priori by the row maxima, so the
// bitmaps stay small whenever the projection is low dimensional.  Returns
// false when a single bitmap would be too large.
bool batched_counts(const PhiCloud& theta, const std::vector<double>& rv, int rows, int k, int threads,
                    std::vector<std::size_t>& counts)
{
    const auto& rep = theta.rep;
    const int m = rep.m, n_rows = rep.rows(), dims = rows * m;
    if(!rep.field.is_real() || dims > 4 || rows > n_rows)
        return false;
    const double inv = 1.0 / rep.field.scale(k);
    std::vector<double> row_max(std::size_t(n_rows) * m, 0.0);
    for(std::size_t n = 0; n < theta.size(); ++n) {
        auto x = theta.point(n);
        for(std::size_t a = 0; a < x.size(); ++a)
            row_max[a] = std::max(row_max[a], std::fabs(x[a]));
    }
    struct Plan {
        std::vector<double> coef; // rows x n_rows
        std::array<std::int64_t, 4> lo{}, range{};
        std::size_t bits = 1;
    };
    constexpr double max_bits = double(std::size_t(1) << 29);
    std::vector<Plan> plans(rv.size());
    std::size_t widest = 1;
    for(std::size_t t = 0; t < rv.size(); ++t) {
        FMatrix u = u_matrix(rep.field, rv[t], rep.d);
        auto& pl = plans[t];
        double bits = 1.0;
        for(int j = 0; j < rows; ++j)
            for(int i = 0; i < n_rows; ++i)
                pl.coef.push_back(u(j, i));
        for(int j = 0; j < rows; ++j)
            for(int c = 0; c < m; ++c) {
                double bound = 0.0;
                for(int i = 0; i < n_rows; ++i)
                    bound += std::fabs(pl.coef[j * n_rows + i]) * row_max[std::size_t(i) * m + c];
                const int a = j * m + c;
                pl.lo[a] = real_cell(-bound, inv) - 1;
                pl.range[a] = real_cell(bound, inv) + 2 - pl.lo[a];
                bits *= double(pl.range[a]);
            }
        if(bits > max_bits)
            return false;
        pl.bits = std::size_t(bits);
        widest = std::max(widest, pl.bits);
    }
    // A bitmap much larger than the cloud is slower than sorting its keys.
    if(double(widest) > 256.0 * double(theta.size()))
        return false;
    const std::size_t chunk = std::clamp<std::size_t>((std::size_t(1) << 30) / widest, 1, 16);
    const std::size_t n_chunks = (rv.size() + chunk - 1) / chunk;
    const double* data = theta.data.data();
    const std::size_t stride = std::size_t(rep.dim());
    parallel_for(n_chunks, threads, [&](std::size_t ci) {
        const std::size_t t0 = ci * chunk, t1 = std::min(rv.size(), t0 + chunk);
        std::vector<std::vector<std::uint64_t>> maps;
        for(std::size_t t = t0; t < t1; ++t)
            maps.emplace_back((plans[t].bits + 63) / 64, 0);
        for(std::size_t n = 0; n < theta.size(); ++n) {
            const double* x = data + n * stride;
            for(std::size_t t = t0; t < t1; ++t) {
                const auto& pl = plans[t];
                std::uint64_t key = 0;
                for(int j = 0; j < rows; ++j)
                    for(int c = 0; c < m; ++c) {
                        double s = 0.0;
                        for(int i = j; i < n_rows; ++i)
                            s += pl.coef[j * n_rows + i] * x[i * m + c];
                        const int a = j * m + c;
                        key = key * std::uint64_t(pl.range[a]) + std::uint64_t(real_cell(s, inv) - pl.lo[a]);
                    }
                maps[t - t0][key >> 6] |= std::uint64_t(1) << (key & 63);
            }
        }
        for(std::size_t t = t0; t < t1; ++t) {
            std::size_t c = 0;
            for(auto w : maps[t - t0])
                c += std::size_t(std::popcount(w));
            counts[t] = c;
        }
    });
    return true;
}

std::vector<std::size_t> parallel_counts(const PhiCloud& theta, const std::vector<double>& rv, int rows, int k,
                                         int threads)
{
    std::vector<std::size_t> counts(rv.size());
    if(batched_counts(theta, rv, rows, k, threads, counts))
        return counts;
    parallel_for(rv.size(), threads,
                 [&](std::size_t i) { counts[i] = projected_covering(theta, rv[i], rows, ScaleIndex{k}); });
    return counts;
}

} // namespace

ProjProfile projection_profile(const PhiCloud& theta, const ProjConfig& cfg, Rng& rng)
{
    if(theta.size() == 0)
        throw EmptyCloud("projection_profile: empty cloud");
    const auto& rep = theta.rep;
    const Field& f = rep.field;
    ProjProfile out;
    out.cloud_covering = covering_number(theta.view(), ScaleIndex{cfg.k});
    const double L = ladder_log(f, cfg.k);
    out.hypothesis_ok = std::log(double(out.cloud_covering)) >= cfg.alpha * L - 1e-9;
    out.threshold = std::exp(L * (cfg.alpha / (rep.d + 1) + cfg.eps));

    auto rv = sample_r_values(rng, f, cfg.r_samples);
    auto counts = parallel_counts(theta, rv, 1, cfg.k, cfg.threads);
    std::size_t good = 0;
    for(std::size_t i = 0; i < rv.size(); ++i) {
        ProjRow row{rv[i], counts[i], out.threshold, double(counts[i]) >= out.threshold};
        good += row.good;
        out.rows.push_back(row);
    }
    std::size_t n = rv.size();
    out.good_fraction = n ? double(good) / n : 0.0;
    out.exceptional_fraction = n ? double(n - good) / n : 0.0;
    out.exceptional_ci = wilson_interval(n - good, n);
    return out;
}

void write_profile_csv(std::ostream& os, const Field& f, const ProjProfile& p)
{
    os << "r_repr,count,threshold,classification\r\n";
    char buf[64];
    for(const auto& row : p.rows) {
        std::snprintf(buf, sizeof buf, "%.17g", row.threshold);
        os << format_scalar(f, row.r) << "," << row.count << "," << buf << ","
           << (row.good ? "good" : "exceptional") << "\r\n";
    }
}

TrivialAudit trivial_estimate_audit(const PhiCloud& theta, const ProjConfig& cfg, Rng& rng)
{
    const auto& rep = theta.rep;
    if(rep.d != 2)
        throw WrongDegree("trivial_estimate_audit needs d = 2");
    if(theta.size() == 0)
        throw EmptyCloud("trivial_estimate_audit: empty cloud");
    const Field& f = rep.field;
    const double L = ladder_log(f, cfg.k);
    TrivialAudit out;
    double cover = double(covering_number(theta.view(), ScaleIndex{cfg.k}));
    out.alpha_used = std::min(cfg.alpha, std::log(cover) / L);
    out.zero_threshold = std::exp(L * (2.0 * out.alpha_used / 3.0 - cfg.eps));
    out.plus_threshold = std::exp(L * (out.alpha_used / 3.0 - cfg.eps));
    out.r = sample_r_values(rng, f, cfg.r_samples);
    out.zero_counts = parallel_counts(theta, out.r, 2, cfg.k, cfg.threads);
    out.plus_counts = parallel_counts(theta, out.r, 1, cfg.k, cfg.threads);
    std::size_t zf = 0, pf = 0;
    for(std::size_t i = 0; i < out.r.size(); ++i) {
        zf += double(out.zero_counts[i]) < out.zero_threshold;
        pf += double(out.plus_counts[i]) < out.plus_threshold;
    }
    if(!out.r.empty()) {
        out.zero_failure = double(zf) / out.r.size();
        out.plus_failure = double(pf) / out.r.size();
    }
    return out;
}

std::vector<DirectionFit> fit_directions(const Field& f, int m, const std::vector<double>& rows)
{
    const std::size_t n = rows.size() / std::size_t(m);
    std::vector<DirectionFit> out;
    if(n == 0)
        return out;
    if(f.is_real()) {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
        for(std::size_t r = 0; r < n; ++r) {
            Eigen::Map<const Eigen::VectorXd> y(rows.data() + r * m, m);
            s.noalias() += y * y.transpose();
        }
        s /= double(n);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
        for(int j = m - 1; j >= 0; --j) {
            DirectionFit fit;
            fit.unit.coords.resize(m);
            for(int i = 0; i < m; ++i)
                fit.unit[i] = es.eigenvectors()(i, j);
            double lambda = es.eigenvalues()(j);
            fit.kq = lambda > 0 ? -0.5 * std::log(3.0 * lambda) / std::log(f.q()) : 1e9;
            out.push_back(std::move(fit));
        }
        return out;
    }
    // Valuation-pivoted elimination: each pivot row is a direction whose
    // norm is the next elementary divisor of the row module.
    const std::int64_t mod = f.modulus();
    const int K = f.precision();
    std::vector<std::int64_t> a(rows.size());
    for(std::size_t i = 0; i < rows.size(); ++i)
        a[i] = std::int64_t(rows[i]);
    std::vector<char> used_row(n, 0), used_col(m, 0);
    for(int step = 0; step < m; ++step) {
        int best_v = K;
        std::size_t pr = 0;
        int pc = -1;
        for(std::size_t r = 0; r < n && best_v > 0; ++r) {
            if(used_row[r])
                continue;
            for(int c = 0; c < m; ++c) {
                if(used_col[c])
                    continue;
                int v = f.valuation(double(a[r * m + c]));
                if(v < best_v) {
                    best_v = v;
                    pr = r;
                    pc = c;
                    if(v == 0)
                        break;
                }
            }
        }
        if(pc < 0)
            break;
        used_row[pr] = 1;
        used_col[pc] = 1;
        std::int64_t pv = 1;
        for(int i = 0; i < best_v; ++i)
            pv *= f.prime();
        const std::int64_t* w = a.data() + pr * m;
        auto inv = std::int64_t(f.inverse_unit(double(w[pc] / pv)));
        for(std::size_t r = 0; r < n; ++r) {
            if(used_row[r] || a[r * m + pc] == 0)
                continue;
            std::int64_t factor = (a[r * m + pc] / pv) % mod * inv % mod;
            for(int c = 0; c < m; ++c) {
                std::int64_t t = (a[r * m + c] - factor * w[c]) % mod;
                a[r * m + c] = t < 0 ? t + mod : t;
            }
        }
        DirectionFit fit;
        fit.unit.coords.resize(m);
        for(int c = 0; c < m; ++c)
            fit.unit[c] = double(w[c] / pv);
        fit.kq = best_v;
        out.push_back(std::move(fit));
    }
    return out;
}

std::vector<double> direction_extents(const Field& f, int m, const std::vector<FVector>& units,
                                      const std::vector<double>& rows)
{
    std::vector<BoxDirection> dirs;
    for(const auto& u : units)
        dirs.push_back(make_direction(f, u, 0));
    BoxFrame frame(f, m, dirs);
    const std::size_t n = rows.size() / std::size_t(m);
    const std::size_t nd = units.size();
    std::vector<double> out(nd, 1e9);
    if(n == 0)
        return out;
    if(f.is_real()) {
        std::vector<double> ss(nd, 0.0);
        for(std::size_t r = 0; r < n; ++r) {
            auto c = frame.coordinates(std::span<const double>(rows.data() + r * m, m));
            for(std::size_t j = 0; j < nd; ++j)
                ss[j] += c[j] * c[j];
        }
        for(std::size_t j = 0; j < nd; ++j) {
            double lambda = ss[j] / double(n);
            out[j] = lambda > 0 ? -0.5 * std::log(3.0 * lambda) / std::log(f.q()) : 1e9;
        }
        return out;
    }
    std::vector<int> vmin(nd, f.precision());
    for(std::size_t r = 0; r < n; ++r) {
        auto c = frame.coordinates(std::span<const double>(rows.data() + r * m, m));
        for(std::size_t j = 0; j < nd; ++j)
            vmin[j] = std::min(vmin[j], f.valuation(c[j]));
    }
    for(std::size_t j = 0; j < nd; ++j)
        out[j] = vmin[j];
    return out;
}

BoxCheck verify_box(const PhiCloud& theta, const RepBox& box, double alpha, double eps, double C, double c, int k,
                    std::size_t theta_covering)
{
    const auto& rep = theta.rep;
    const Field& f = rep.field;
    const double L = ladder_log(f, k);
    BoxCheck out;
    out.cover_exponent = log_box_covering_number(rep, box, ScaleIndex{k}) / L;
    out.lo = alpha - C * eps;
    out.hi = alpha + C * eps;
    out.display1 = out.cover_exponent >= out.lo - 1e-9 && out.cover_exponent <= out.hi + 1e-9;
    out.nhd_count = nhd_covering(theta, box, C * f.scale(k), ScaleIndex{k});
    out.nhd_required = c * std::min(std::exp(L * (alpha - C * eps)), std::exp(-L * C * eps) * double(theta_covering));
    out.display2 = double(out.nhd_count) >= out.nhd_required;
    return out;
}

namespace {

// Base points for the box search: the sample mean (Real) or first point
// (Padic), then representatives of the densest cells at scale k/2.
std::vector<PhiPoint> search_anchors(const PhiCloud& theta, int k, int budget)
{
    const auto& rep = theta.rep;
    const Field& f = rep.field;
    const int dim = rep.dim();
    const std::size_t n = theta.size();
    std::vector<PhiPoint> anchors;
    PhiPoint first = zero_point(rep);
    if(f.is_real()) {
        for(std::size_t i = 0; i < n; ++i)
            for(int j = 0; j < dim; ++j)
                first.entries[j] += theta.data[i * dim + j];
        for(auto& x : first.entries)
            x /= double(n);
    }
    else {
        first.entries.assign(theta.point(0).begin(), theta.point(0).end());
    }
    anchors.push_back(first);
    if(budget <= 1)
        return anchors;

    const int kh = k / 2;
    std::vector<std::int64_t> cells(n * std::size_t(dim));
    double inv = 1.0 / f.scale(kh);
    std::int64_t pk = 1;
    if(f.is_padic())
        for(int i = 0; i < kh; ++i)
            pk *= f.prime();
    for(std::size_t i = 0; i < n; ++i)
        for(int j = 0; j < dim; ++j) {
            double x = theta.data[i * dim + j];
            cells[i * dim + j] = f.is_real() ? real_cell(x, inv) : padic_cell(x, pk);
        }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    auto cell_less = [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(cells.begin() + a * dim, cells.begin() + (a + 1) * dim,
                                            cells.begin() + b * dim, cells.begin() + (b + 1) * dim);
    };
    std::stable_sort(order.begin(), order.end(), cell_less);
    struct Run {
        std::size_t begin, end;
    };
    std::vector<Run> runs;
    for(std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while(j < n && !cell_less(order[i], order[j]))
            ++j;
        runs.push_back({i, j});
        i = j;
    }
    std::stable_sort(runs.begin(), runs.end(),
                     [](const Run& a, const Run& b) { return a.end - a.begin > b.end - b.begin; });
    for(std::size_t r = 0; r < runs.size() && int(anchors.size()) < budget; ++r) {
        PhiPoint a = zero_point(rep);
        if(f.is_real()) {
            for(std::size_t i = runs[r].begin; i < runs[r].end; ++i)
                for(int j = 0; j < dim; ++j)
                    a.entries[j] += theta.data[order[i] * dim + j];
            for(auto& x : a.entries)
                x /= double(runs[r].end - runs[r].begin);
        }
        else {
            auto p = theta.point(order[runs[r].begin]);
            a.entries.assign(p.begin(), p.end());
        }
        anchors.push_back(std::move(a));
    }
    return anchors;
}

std::vector<double> recentred_rows(const PhiCloud& theta, const PhiPoint& anchor)
{
    const auto& rep = theta.rep;
    const Field& f = rep.field;
    const int dim = rep.dim();
    std::vector<double> rows(theta.data.size());
    for(std::size_t i = 0; i < theta.size(); ++i)
        for(int j = 0; j < dim; ++j)
            rows[i * dim + j] = f.sub(theta.data[i * dim + j], anchor.entries[j]);
    return rows;
}

} // namespace

BoxSearch find_representation_box(const PhiCloud& theta, const ProjConfig& cfg)
{
    BoxSearch out;
    if(theta.size() == 0) {
        out.reason = "empty cloud";
        return out;
    }
    const auto& rep = theta.rep;
    const Field& f = rep.field;
    const int k = cfg.k;

    // A ladder box with s = sum_j (k - k_j) has covering exponent (d+1) s / k.
    bool ladder_hit = false;
    for(int s = 0; s <= rep.m * k && !ladder_hit; ++s) {
        double e = double(rep.rows()) * s / k;
        ladder_hit = e >= cfg.alpha - cfg.C * cfg.eps - 1e-9 && e <= cfg.alpha + cfg.C * cfg.eps + 1e-9;
    }
    if(!ladder_hit) {
        out.reason = "no ladder box has its covering number inside the window";
        return out;
    }

    std::size_t cover = covering_number(theta.view(), ScaleIndex{k});
    for(const auto& anchor : search_anchors(theta, k, cfg.anchor_budget)) {
        ++out.candidates_tried;
        auto fits = fit_directions(f, rep.m, recentred_rows(theta, anchor));
        RepBox box{anchor, {}};
        for(const auto& fit : fits) {
            int kj = std::max(0, int(std::lround(fit.kq)));
            if(kj >= k)
                continue;
            box.dirs.push_back(make_direction(f, fit.unit, kj));
        }
        auto check = verify_box(theta, box, cfg.alpha, cfg.eps, cfg.C, cfg.c, k, cover);
        if(check.ok()) {
            out.box = std::move(box);
            out.check = check;
            return out;
        }
        if(out.candidates_tried == 1)
            out.check = check;
    }
    out.reason = "no candidate passed verification";
    return out;
}

PhiCloud planted_box_generator(const RepSpace& rep, const RepBox& box, std::size_t count, double noise, Rng& rng)
{
    const Field& f = rep.field;
    const int m = rep.m;
    PhiCloud out{rep, {}};
    out.data.reserve(count * rep.dim());
    int noise_k = -1;
    if(f.is_padic() && noise > 0) {
        noise_k = 0;
        while(noise_k < f.precision() && f.scale(noise_k) > noise * (1 + 1e-12))
            ++noise_k;
    }
    std::vector<double> x(rep.dim());
    for(std::size_t n = 0; n < count; ++n) {
        x = box.base.entries;
        for(int i = 0; i < rep.rows(); ++i) {
            for(const auto& dir : box.dirs) {
                double r = sample_unit_scalar(rng, f);
                for(int c = 0; c < m; ++c)
                    x[i * m + c] = f.add(x[i * m + c], f.mul(r, dir.u[c]));
            }
            if(f.is_real() && noise > 0) {
                auto e = sample_unit_ball(rng, f, m);
                for(int c = 0; c < m; ++c)
                    x[i * m + c] += noise * e[c];
            }
            else if(noise_k >= 0 && noise_k < f.precision()) {
                auto e = sample_unit_ball(rng, f, m);
                for(int c = 0; c < m; ++c)
                    x[i * m + c] = f.add(x[i * m + c], f.mul(f.unif_pow(noise_k), e[c]));
            }
        }
        out.push(x);
    }
    return out;
}

std::string format_box(const RepSpace& rep, const RepBox& box)
{
    std::ostringstream os;
    const Field& f = rep.field;
    os << "BOX field=" << f.to_string() << " d=" << rep.d << " m=" << rep.m << " directions=" << box.dirs.size()
       << "\n";
    os << "BOX base=(";
    for(std::size_t i = 0; i < box.base.entries.size(); ++i)
        os << (i ? "," : "") << format_scalar(f, box.base.entries[i]);
    os << ")\n";
    for(std::size_t j = 0; j < box.dirs.size(); ++j) {
        os << "BOX dir=" << j << " radius=q^-" << box.dirs[j].k << " u=(";
        for(std::size_t c = 0; c < box.dirs[j].u.size(); ++c)
            os << (c ? "," : "") << format_scalar(f, box.dirs[j].u[c]);
        os << ")\n";
    }
    return os.str();
}

} // namespace eqlab
