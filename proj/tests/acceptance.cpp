#include "eqlab/cli.hpp"
#include "eqlab/csv.hpp"
#include "eqlab/fixtures.hpp"
#include "eqlab/flow.hpp"
#include "eqlab/focusing.hpp"
#include "eqlab/projection.hpp"
#include "eqlab/sumproduct.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

using namespace eqlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    std::string csv;
};

class Clock {
  public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

class Csv {
  public:
    explicit Csv(std::initializer_list<std::string_view> header) { row(header); }

    template <class... T> void add(const T&... cells)
    {
        std::vector<std::string> v{cell(cells)...};
        for(std::size_t i = 0; i < v.size(); ++i)
            text_ += (i ? "," : "") + csv_field(v[i]);
        text_ += "\r\n";
    }
    const std::string& str() const { return text_; }

  private:
    void row(std::initializer_list<std::string_view> cells)
    {
        bool first = true;
        for(auto c : cells) {
            text_ += (first ? "" : ",") + csv_field(c);
            first = false;
        }
        text_ += "\r\n";
    }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    static std::string cell(double x) { return csv_double(x); }
    static std::string cell(int x) { return std::to_string(x); }
    static std::string cell(std::size_t x) { return std::to_string(x); }
    static std::string cell(bool x) { return x ? "1" : "0"; }

    std::string text_;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1: p-adic covering exactness

Outcome padic_exactness(int)
{
    Clock clock;
    Csv csv{"p", "cloud", "k", "covering", "bruteforce"};
    int mismatches = 0, checks = 0;
    for(int p : {2, 3, 5}) {
        Field f = Field::padic(p, 6);
        Rng rng(1000 + p);
        for(int cloud = 0; cloud < 20; ++cloud) {
            auto c = uniform_vec_cloud(f, 2, 10000, rng);
            for(int k = 1; k <= 5; ++k) {
                auto fast = covering_number(c.view(), ScaleIndex{k});
                auto slow = covering_number_bruteforce(c.view(), ScaleIndex{k});
                mismatches += fast != slow;
                ++checks;
                csv.add(p, cloud, k, fast, slow);
            }
        }
    }
    double t = clock.seconds();
    return {mismatches == 0 && t < 5.0, fmt("%d/%d exact, %.2f s (limit 5 s)", checks - mismatches, checks, t),
            csv.str()};
}

// 2: representation identities

double max_abs(const FMatrix& m)
{
    double s = 0.0;
    for(double x : m.a)
        s = std::max(s, std::fabs(x));
    return s;
}

Outcome rep_identities(int)
{
    Csv csv{"identity", "field", "d", "max_error"};
    Rng rng(2);
    bool ok = true;
    const Field fields[] = {Field::real(), Field::padic(3, 10), Field::padic(2, 20)};
    for(const auto& f : fields)
        for(int d = 1; d <= 3; ++d) {
            double cocycle = 0.0, conj = 0.0, weight = 0.0;
            for(int n = 0; n < 100; ++n) {
                double r = sample_unit_scalar(rng, f), s = sample_unit_scalar(rng, f);
                auto lhs = matmul(f, u_matrix(f, r, d), u_matrix(f, s, d));
                cocycle = std::max(cocycle, matrix_distance(f, lhs, u_matrix(f, f.add(r, s), d)));

                int t = std::uniform_int_distribution<int>(-2, 2)(rng);
                if(f.is_real()) {
                    auto a = matmul(f, matmul(f, a_matrix(f, t, d), u_matrix(f, r, d)), a_matrix(f, -t, d));
                    auto b = u_matrix(f, std::exp(2.0 * t) * r, d);
                    conj = std::max(conj, matrix_distance(f, a, b) / std::max(1.0, max_abs(b)));
                }
                else {
                    // a_t is not integral; compare A u_r = u_{p^-2t r} A with A = p^{|t|d} a_t
                    double r_lhs = t > 0 ? f.mul(f.unif_pow(2 * t), r) : r;
                    double r_rhs = t > 0 ? r : f.mul(f.unif_pow(-2 * t), r);
                    auto at = a_matrix_cleared(f, t, d);
                    conj = std::max(conj, matrix_distance(f, matmul(f, at, u_matrix(f, r_lhs, d)),
                                                          matmul(f, u_matrix(f, r_rhs, d), at)));
                }
            }
            for(int t = -3; t <= 3; ++t) {
                auto a = f.is_real() ? a_matrix(f, t, d) : a_matrix_cleared(f, t, d);
                for(int i = 0; i <= d; ++i)
                    for(int j = 0; j <= d; ++j) {
                        double expect = 0.0;
                        if(i == j)
                            expect = f.is_real() ? std::exp(double((d - 2 * i) * t))
                                                 : std::pow(double(f.prime()), -double(std::abs(t) * d - t * (d - 2 * i)));
                        double got = f.is_real() ? std::fabs(a(i, j)) : (a(i, j) == 0.0 ? 0.0 : f.abs(a(i, j)));
                        if(!f.is_real() && i == j && std::abs(t) * d - t * (d - 2 * i) >= f.precision())
                            expect = 0.0; // p^K vanishes at precision K
                        weight = std::max(weight, std::fabs(got - expect));
                    }
            }
            double tol = f.is_real() ? 1e-9 : 0.0;
            ok = ok && cocycle <= tol && conj <= tol && weight == 0.0;
            csv.add("cocycle", f.to_string(), d, cocycle);
            csv.add("conjugation", f.to_string(), d, conj);
            csv.add("weight", f.to_string(), d, weight);
        }
    return {ok, "cocycle and conjugation <= 1e-9 relative (real) / exact (p-adic), weight law exact", csv.str()};
}

// 3 and 4: planted boxes

struct PlantedFixture {
    int seed;
    int k0, k1;
    RepBox box;
    PhiCloud theta;
    double alpha;
};

const RepSpace plane_rep{Field::real(), 2, 2};
constexpr int kDelta = 8;

PlantedFixture planted_fixture(int seed)
{
    static const std::pair<int, int> radii[] = {{0, 4}, {0, 8}, {4, 8}, {0, 0}, {4, 4}};
    auto [k0, k1] = radii[seed % 5];
    Rng rng(3000 + seed);
    auto dirs = random_plane_directions(rng, k0, k1);
    RepBox box{zero_point(plane_rep), dirs};
    for(auto& x : box.base.entries)
        x = 0.1 * sample_unit_scalar(rng, plane_rep.field);
    auto theta = planted_box_generator(plane_rep, box, 50000, std::exp(-double(kDelta)), rng);
    double alpha = log_box_covering_number(plane_rep, box, ScaleIndex{kDelta}) / kDelta;
    return {seed, k0, k1, box, std::move(theta), alpha};
}

ProjConfig planted_config(const PlantedFixture& fx, int threads)
{
    ProjConfig cfg;
    cfg.alpha = fx.alpha;
    cfg.eps = 0.35;
    cfg.k = kDelta;
    cfg.r_samples = 200;
    cfg.threads = threads;
    return cfg;
}

double unit_dot(const FVector& a, const FVector& b)
{
    return std::fabs(a[0] * b[0] + a[1] * b[1]) / (norm(Field::real(), a) * norm(Field::real(), b));
}

// Occupied directions (radius above delta) match in number; extents agree to
// one ladder step; when the radii differ each direction is also aligned.
bool recovered(const PlantedFixture& fx, const RepBox& found)
{
    std::vector<BoxDirection> planted;
    for(const auto& d : fx.box.dirs)
        if(d.k < kDelta)
            planted.push_back(d);
    if(found.dirs.size() != planted.size())
        return false;
    const bool distinct = planted.size() == 2 ? planted[0].k != planted[1].k : true;
    std::vector<bool> used(found.dirs.size(), false);
    for(const auto& p : planted) {
        bool matched = false;
        for(std::size_t j = 0; j < found.dirs.size() && !matched; ++j) {
            if(used[j] || std::abs(found.dirs[j].k - p.k) > 1)
                continue;
            if(distinct && unit_dot(found.dirs[j].u, p.u) <= 0.99)
                continue;
            used[j] = matched = true;
        }
        if(!matched)
            return false;
    }
    return true;
}

std::string box_dirs(const RepBox& b)
{
    std::string s;
    for(const auto& d : b.dirs)
        s += (s.empty() ? "" : ";") + std::to_string(d.k);
    return s;
}

Outcome planted_recovery(int threads)
{
    Csv csv{"seed", "k0", "k1", "found", "found_radii", "recovered"};
    int good = 0;
    double worst = 0.0;
    for(int seed = 0; seed < 20; ++seed) {
        Clock clock;
        auto fx = planted_fixture(seed);
        auto found = find_representation_box(fx.theta, planted_config(fx, threads));
        double t = clock.seconds();
        worst = std::max(worst, t);
        bool rec = found.box && recovered(fx, *found.box);
        good += rec && t < 30.0;
        csv.add(seed, fx.k0, fx.k1, found.box.has_value(), found.box ? box_dirs(*found.box) : std::string(), rec);
    }
    return {good >= 19, fmt("%d/20 seeds recovered (need 19), slowest seed %.1f s (limit 30 s)", good, worst),
            csv.str()};
}

// 4: dichotomy classification

PhiCloud generic_cloud(int seed)
{
    Rng rng(4000 + seed);
    return uniform_phi_cloud(RepSpace{Field::real(), 2, 1}, std::size_t(std::exp(16.0)), rng);
}

ProjConfig generic_config(int threads)
{
    ProjConfig cfg;
    cfg.alpha = 2.0;
    cfg.eps = 0.0; // threshold delta^{-alpha/3}
    cfg.k = kDelta;
    cfg.r_samples = 200;
    cfg.threads = threads;
    return cfg;
}

Outcome dichotomy_classification(int threads)
{
    Csv csv{"family", "seed", "fraction", "box_found", "verdict_ok"};
    int planted_total = 0, planted_ok = 0;
    for(int seed = 0; seed < 20; ++seed) {
        auto fx = planted_fixture(seed);
        if(fx.k0 == 0 && fx.k1 == 0)
            continue; // the ambient box is not an obstruction
        auto cfg = planted_config(fx, threads);
        // A delta-thickened box of radius rho projects onto at most about
        // (2 sqrt2 rho s / delta + 2)(2 sqrt2 s + 2) cells, s = 1 + |r| + r^2,
        // i.e. 90 delta^{-alpha/3} at |r| = 1; delta^{-0.6} absorbs that.
        ProjConfig classify = cfg;
        classify.eps = 0.6;
        Rng rng(4100 + seed);
        auto profile = projection_profile(fx.theta, classify, rng);
        double exc = 1.0 - profile.good_fraction;
        bool found = find_representation_box(fx.theta, cfg).box.has_value();
        bool ok = exc >= 0.9 && found;
        ++planted_total;
        planted_ok += ok;
        csv.add("planted", seed, exc, found, ok);
    }
    int generic_ok = 0;
    for(int seed = 0; seed < 20; ++seed) {
        auto theta = generic_cloud(seed);
        auto cfg = generic_config(threads);
        Rng rng(4200 + seed);
        auto profile = projection_profile(theta, cfg, rng);
        ProjConfig search = cfg;
        search.eps = 0.05;
        bool found = find_representation_box(theta, search).box.has_value();
        bool ok = profile.good_fraction >= 0.8 && !found;
        generic_ok += ok;
        csv.add("generic", seed, profile.good_fraction, found, ok);
    }
    return {planted_ok == planted_total && generic_ok >= 18,
            fmt("planted obstructed %d/%d (need all), generic improving %d/20 (need 18)", planted_ok,
                planted_total, generic_ok),
            csv.str()};
}

// 5: trivial estimate audit

Outcome trivial_audit(int threads)
{
    Csv csv{"family", "seed", "alpha_used", "zero_failure", "plus_failure"};
    double worst = 0.0;
    auto audit = [&](const char* family, int seed, const PhiCloud& theta, double alpha) {
        ProjConfig cfg;
        cfg.alpha = alpha;
        cfg.eps = 0.15;
        cfg.k = kDelta;
        cfg.r_samples = 200;
        cfg.threads = threads;
        Rng rng(5000 + seed);
        auto a = trivial_estimate_audit(theta, cfg, rng);
        worst = std::max({worst, a.zero_failure, a.plus_failure});
        csv.add(family, seed, a.alpha_used, a.zero_failure, a.plus_failure);
    };
    for(int seed = 0; seed < 5; ++seed) {
        auto fx = planted_fixture(seed);
        audit("planted", seed, fx.theta, fx.alpha);
    }
    audit("generic", 0, generic_cloud(0), 2.0);
    audit("lowest_row", 0, lowest_row_grid(RepSpace{Field::real(), 2, 1}, kDelta), 1.0);
    return {worst <= 0.1, fmt("largest failure fraction %.3f (limit 0.1)", worst), csv.str()};
}

// 6: sum-product

Outcome sum_product(int threads)
{
    Csv csv{"fixture", "fraction", "box_found", "box_radii", "ok"};
    SumProdConfig cfg;
    cfg.k = 6;
    cfg.alpha_hat = 1.0;
    cfg.eps1 = 0.35;
    cfg.r_samples = 200;
    cfg.threads = threads;
    bool ok = true;
    double slowest = 0.0;
    auto shared = [&](const char* name, const VecCloud& a, const VecCloud& b, const FVector& u, int k, int seed) {
        Clock clock;
        Rng rng(6000 + seed);
        auto e = exceptional_measure(a, b, cfg, rng);
        auto found = find_common_box(a, b, cfg);
        bool box_ok = found.box && found.box->dirs.size() == 1 && std::abs(found.box->dirs[0].k - k) <= 1;
        if(box_ok && a.field.is_real())
            box_ok = unit_dot(found.box->dirs[0].u, u) > 0.99;
        if(box_ok && a.field.is_padic()) {
            // the found direction spans the same line mod p
            auto w = found.box->dirs[0].u;
            std::int64_t p = a.field.prime();
            box_ok = (std::int64_t(w[0]) * std::int64_t(u[1]) - std::int64_t(w[1]) * std::int64_t(u[0])) % p == 0;
        }
        double t = clock.seconds();
        slowest = std::max(slowest, t);
        bool row_ok = e.fraction >= 0.9 && box_ok && t < 60.0;
        ok = ok && row_ok;
        std::string radii;
        if(found.box)
            radii = box_dirs(RepBox{{}, found.box->dirs});
        csv.add(name, e.fraction, found.box.has_value(), radii, row_ok);
    };
    auto generic = [&](const char* name, const VecCloud& a, const VecCloud& b, int seed) {
        Clock clock;
        Rng rng(6000 + seed);
        auto e = exceptional_measure(a, b, cfg, rng);
        double t = clock.seconds();
        slowest = std::max(slowest, t);
        bool row_ok = e.fraction <= 0.2 && t < 60.0;
        ok = ok && row_ok;
        csv.add(name, e.fraction, false, "", row_ok);
    };

    Rng rng(6);
    auto f = Field::real();
    auto dirs = random_plane_directions(rng, 0, 9);
    auto a = box_vec_cloud(f, FVector{{0.1, -0.2}}, {dirs[0]}, 1600, 0.0, rng);
    auto b = box_vec_cloud(f, FVector{{-0.3, 0.05}}, {dirs[0]}, 1600, 0.0, rng);
    shared("real_segment", a, b, dirs[0].u, 0, 1);

    auto z3 = Field::padic(3, 12);
    FVector u{{1, 5}};
    auto pa = padic_line_cloud(z3, FVector{{10, 200}}, u, 6, rng);
    auto pb = padic_line_cloud(z3, FVector{{7, 11}}, u, 6, rng);
    shared("z3_line", pa, pb, u, 0, 2);

    auto g = geometric_product_cloud(0.2, 30);
    generic("geometric_product", g, g, 3);
    auto ia = uniform_vec_cloud(f, 2, std::size_t(std::exp(6.0)), rng);
    auto ib = uniform_vec_cloud(f, 2, std::size_t(std::exp(6.0)), rng);
    generic("iid_real", ia, ib, 4);
    auto za = uniform_vec_cloud(z3, 2, 729, rng);
    auto zb = uniform_vec_cloud(z3, 2, 729, rng);
    generic("iid_z3", za, zb, 5);
    return {ok, fmt("shared >= 0.9 with box, generic <= 0.2, slowest run %.1f s (limit 60 s)", slowest), csv.str()};
}

// 7: focusing

Outcome focusing(int threads)
{
    const Field R = Field::real();
    Csv csv{"check", "value", "required", "ok"};
    FocusParams p; // (k1, k2) = (4, 12), A = e^2, eps' = 0.2
    p.threads = threads;
    Rng rng(7);
    FVector u{{0.6, 0.8}};
    RepBox planted{zero_point(plane_rep), {make_direction(R, u, 3)}};
    auto mu = planted_focus_measure(plane_rep, planted, 20000, R.scale(p.k2), std::exp(-36.0), rng);

    auto scan = scan_focused(mu, p);
    RepBox rel{zero_point(plane_rep), {make_direction(R, u, p.k1)}};
    std::size_t exact = 0;
    std::optional<PhiPoint> anchor;
    for(auto idx : scan.net) {
        auto y = mu.cloud.get(idx);
        if(is_exactly_focused(mu, y, rel, p).exact) {
            ++exact;
            if(!anchor)
                anchor = y;
        }
    }
    double share = scan.net.empty() ? 0.0 : double(exact) / double(scan.net.size());
    bool focus_ok = share >= 0.9;
    csv.add("exact_share", share, 0.9, focus_ok);

    bool mult_ok = false;
    std::string mult_note = "no exactly focused net point";
    if(anchor) {
        auto m = multiple_of_three_audit(mu, *anchor, rel, p);
        mult_ok = m.gap <= 0.3 && m.nearest == m.expected;
        csv.add("mult3_alpha_est", m.alpha_est, double(m.expected), mult_ok);
        csv.add("mult3_gap", m.gap, 0.3, m.gap <= 0.3);
        mult_note = fmt("alpha_est %.2f vs %d", m.alpha_est, m.expected);
    }

    auto d = ip_fs_decompose(mu, ScaleIndex{p.k1}, (p.k2 - p.k1) / 2, p);
    std::size_t seen[3] = {0, 0, 0};
    const WeightedMeasure* parts[3] = {&d.ip, &d.fs, &d.negligible};
    bool conserved = d.part.size() == mu.size();
    for(std::size_t i = 0; i < mu.size() && conserved; ++i) {
        int part = d.part[i];
        conserved = seen[part] < parts[part]->size() && parts[part]->weights[seen[part]] == mu.weights[i];
        ++seen[part];
    }
    conserved = conserved && seen[0] == d.ip.size() && seen[1] == d.fs.size() && seen[2] == d.negligible.size();
    csv.add("conservation", conserved, true, conserved);

    return {focus_ok && mult_ok && conserved,
            fmt("exactly focused at %zu/%zu net points, multiple of three: %s, conservation %s", exact,
                scan.net.size(), mult_note.c_str(), conserved ? "exact" : "broken"),
            csv.str()};
}

// 8: interpolation audit

Outcome interpolation(int threads)
{
    // half the mass uniform on a box of radius b, half on a box of radius
    // e^{-2l} b nested inside it
    const int l = 2, bk = 1;
    RepSpace rep{Field::real(), 2, 1};
    Rng rng(8);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const double outer = std::exp(-double(bk)), inner = std::exp(-double(bk + 2 * l));
    PhiCloud c{rep, {}};
    for(int i = 0; i < 100000; ++i) {
        double s = i % 2 ? outer : inner;
        c.push(std::vector<double>{s * U(rng), s * U(rng), s * U(rng)});
    }
    auto mu = uniform_measure(c, 1.0 / double(c.size()));
    auto audit = interpolation_audit(mu, l, 100, ScaleIndex{bk}, rng, 0.2, threads);
    Csv csv{"r", "alpha1", "alpha2", "pushed", "margin", "ok"};
    for(const auto& row : audit.rows)
        csv.add(row.r, row.alpha1, row.alpha2, row.pushed, row.margin, row.ok);
    return {audit.ok_fraction >= 0.8, fmt("margin >= -0.2 at %.0f%% of 100 r (need 80%%)", 100 * audit.ok_fraction),
            csv.str()};
}

// 9: Haar baseline

Outcome haar_baseline(int threads)
{
    const double expect = 0.5 / (std::numbers::pi / 3.0);
    Rng rng(9);
    int high[3] = {0, 0, 0};
    const int n = 100000;
    for(int i = 0; i < n; ++i) {
        auto x = haar_sample(rng);
        for(int j = 0; j < 3; ++j)
            high[j] += x.z(j).imag() >= 2.0;
    }
    Csv csv{"quantity", "value", "target", "ok"};
    bool ok = true;
    for(int j = 0; j < 3; ++j) {
        double v = double(high[j]) / n;
        bool row = std::fabs(v - 0.47746) <= 0.01;
        ok = ok && row;
        csv.add(fmt("P(Im z%d >= 2)", j + 1), v, expect, row);
    }
    Rng r2(10);
    auto d = discrepancy(generic_point(), 6, 2000, constant_one(), 5000, r2, threads);
    bool zero = d.value == 0.0;
    csv.add("constant discrepancy", d.value, 0.0, zero);
    return {ok && zero,
            fmt("P(Im >= 2) = %.4f/%.4f/%.4f vs 0.47746 +- 0.01, constant discrepancy %g", double(high[0]) / n,
                double(high[1]) / n, double(high[2]) / n, d.value),
            csv.str()};
}

// 10: flow dichotomy

template <class F> double fd_average(F f, double ymax)
{
    const int nx = 400, ny = 4000;
    const double y0 = std::sqrt(3.0) / 2.0;
    double s = 0.0;
    for(int i = 0; i < nx; ++i) {
        double x = -0.5 + (i + 0.5) / nx;
        for(int k = 0; k < ny; ++k) {
            double y = y0 + (k + 0.5) * (ymax - y0) / ny;
            if(x * x + y * y < 1.0)
                continue;
            s += f(std::complex<double>(x, y)) / (y * y);
        }
    }
    return s * (1.0 / nx) * ((ymax - y0) / ny) / (std::numbers::pi / 3.0);
}

Outcome flow_dichotomy(int threads)
{
    Csv csv{"part", "T", "quantity", "value"};
    auto suite = standard_suite();

    // (a) proxies on the H-orbit
    std::size_t nonzero = 0;
    auto grid = arc_grid(100);
    auto x0 = identity_point();
    for(int T = 0; T <= 15; ++T)
        for(double r : grid) {
            auto x = arc_point(x0, T, r);
            for(const auto& cand : proper_candidates())
                nonzero += orbit_proximity(x, cand, 10) != 0.0;
        }
    csv.add("a", 15, "nonzero proxies", nonzero);

    // H-orbit mean integral(psi^2) against the Haar mean (integral psi)^2, by quadrature
    std::vector<std::size_t> separated;
    for(std::size_t i = 0; i < suite.size(); ++i) {
        const auto& phi = suite[i];
        if(phi.kind != TestFunction::Kind::Product)
            continue;
        const Bump& b = phi.bumps[0];
        double m1 = fd_average([&](std::complex<double> z) { return b(z); }, 3.5);
        double m2 = fd_average([&](std::complex<double> z) { return b(z) * b(z); }, 3.5);
        double gap = std::fabs(m2 - std::pow(m1, double(phi.bumps.size())));
        csv.add("a", 0, phi.id + " mean gap", gap);
        if(gap >= 0.15)
            separated.push_back(i);
    }
    double min_disc = 1e300;
    for(int T : {0, 3, 6, 10, 15}) {
        Rng rng(100 + T);
        auto ds = discrepancy_suite(x0, T, 2000, suite, 100000, rng, threads);
        for(auto i : separated) {
            min_disc = std::min(min_disc, ds[i].value);
            csv.add("a", T, suite[i].id + " discrepancy", ds[i].value);
        }
    }
    bool a_ok = nonzero == 0 && !separated.empty() && min_disc > 0.1;

    // (b) the generic point
    Clock clock;
    auto xg = generic_point();
    Rng r2(2), r12(12);
    auto d2 = discrepancy_suite(xg, 2, 20000, suite, 100000, r2, threads);
    auto d12 = discrepancy_suite(xg, 12, 20000, suite, 100000, r12, threads);
    double t = clock.seconds();
    bool b_ok = t < 120.0;
    double worst = 0.0;
    for(std::size_t i = 0; i < suite.size(); ++i) {
        b_ok = b_ok && d12[i].value < 0.05 && d12[i].value < d2[i].value;
        worst = std::max(worst, d12[i].value);
        csv.add("b", 2, suite[i].id, d2[i].value);
        csv.add("b", 12, suite[i].id, d12[i].value);
    }
    return {a_ok && b_ok,
            fmt("(a) %zu nonzero proxies, min separated-bump discrepancy %.3f (> 0.1); (b) max T=12 discrepancy "
                "%.4f (< 0.05 and below T=2), %.1f s (limit 120 s)",
                nonzero, min_disc, worst, t),
            csv.str()};
}

// 11: an end-to-end command line run as well

std::string cli_flow_outputs(int threads, const fs::path& scratch)
{
    auto dir = scratch / ("cli_threads_" + std::to_string(threads));
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto cfg = dir / "run.cfg";
    std::ofstream(cfg) << "experiment=flow\nflow.x0=generic\nflow.T=8\nflow.nR=2000\nflow.nHaar=20000\n";
    std::vector<std::string> args{"eqlab", "--config", cfg.string(), "--out", (dir / "out").string(),
                                  "--threads", std::to_string(threads), "--seed", "11"};
    std::vector<const char*> argv;
    for(const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    if(cli_main(int(argv.size()), argv.data(), out, err) != 0)
        return "cli failed: " + err.str();
    std::string all;
    for(const char* f : {"arc.csv", "proximity.csv", "discrepancy.csv", "summary.csv"}) {
        std::ifstream in(dir / "out" / f, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        all += ss.str();
    }
    return all;
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome(int)> run;
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"eqlab acceptance suite"};
    std::vector<int> only, allow;
    std::string out_dir;
    app.add_option("--only", only, "criteria to run (default all)")->delimiter(',');
    app.add_option("--allow-fail", allow, "criteria whose failure does not fail the run")->delimiter(',');
    app.add_option("--out", out_dir, "directory for the criterion CSVs");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria = {
        {1, "p-adic covering exactness", padic_exactness},
        {2, "representation identities", rep_identities},
        {3, "planted-box recovery", planted_recovery},
        {4, "dichotomy classification", dichotomy_classification},
        {5, "trivial estimate audit", trivial_audit},
        {6, "sum-product", sum_product},
        {7, "focusing", focusing},
        {8, "interpolation audit", interpolation},
        {9, "Haar baseline", haar_baseline},
        {10, "flow dichotomy", flow_dichotomy},
    };
    auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
    std::set<int> allowed(allow.begin(), allow.end());
    if(!out_dir.empty())
        fs::create_directories(out_dir);

    int unexpected = 0;
    std::ofstream summary;
    if(!out_dir.empty())
        summary.open(fs::path(out_dir) / "summary.txt");
    auto report = [&](int id, const char* name, bool pass, const std::string& detail) {
        auto line = fmt("%s %2d %s: %s%s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str(),
                        !pass && allowed.count(id) ? " [allowed]" : "");
        std::fputs(line.c_str(), stdout);
        std::fflush(stdout);
        summary << line << std::flush;
        if(!pass && !allowed.count(id))
            ++unexpected;
    };

    bool all_identical = true;
    std::string differing;
    for(const auto& c : criteria) {
        if(!wanted(c.id) && !wanted(11))
            continue;
        Outcome one, four;
        try {
            one = c.run(1);
            four = wanted(11) ? c.run(4) : one;
        }
        catch(const std::exception& e) {
            one = {false, std::string("exception: ") + e.what(), ""};
            four = {};
        }
        if(wanted(c.id))
            report(c.id, c.name, one.pass, one.detail);
        if(one.csv != four.csv) {
            all_identical = false;
            differing += " " + std::to_string(c.id);
        }
        if(!out_dir.empty()) {
            std::ofstream(fs::path(out_dir) / ("criterion" + std::to_string(c.id) + ".csv"), std::ios::binary)
                << one.csv;
        }
    }
    if(wanted(11)) {
        auto scratch = fs::temp_directory_path() / "eqlab_acceptance";
        bool cli_same = cli_flow_outputs(1, scratch) == cli_flow_outputs(4, scratch);
        report(11, "determinism and thread invariance", all_identical && cli_same,
               std::string(all_identical ? "criterion CSVs byte-identical at 1 and 4 threads"
                                         : "criterion CSVs differ for" + differing) +
                   (cli_same ? ", CLI flow outputs identical" : ", CLI flow outputs differ"));
    }
    return unexpected == 0 ? 0 : 1;
}
