#include "eqlab/flow.hpp"

#include "eqlab/csv.hpp"
#include "eqlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace eqlab {

Mat2 operator*(const Mat2& x, const Mat2& y)
{
    return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
}

Mat2 inverse(const Mat2& g)
{
    double det = g.det();
    return {g.d / det, -g.b / det, -g.c / det, g.a / det};
}

std::complex<double> mobius(const Mat2& g, std::complex<double> z) { return (g.a * z + g.b) / (g.c * z + g.d); }

Mat2 u_mat(double r) { return {1.0, r, 0.0, 1.0}; }

Mat2 a_mat(double t) { return {std::exp(t), 0.0, 0.0, std::exp(-t)}; }

std::complex<double> base_point(const Mat2& g) { return mobius(inverse(g), {0.0, 1.0}); }

bool in_fundamental_domain(std::complex<double> z, double tol)
{
    return z.imag() > 0.0 && std::fabs(z.real()) <= 0.5 + tol && std::abs(z) >= 1.0 - tol;
}

ReduceResult reduce(const Mat2& g)
{
    if(!(std::fabs(g.det() - 1.0) <= 1e-6))
        throw NonUnimodular("reduce: |det g - 1| > 1e-6");
    double norm = std::sqrt(g.a * g.a + g.b * g.b + g.c * g.c + g.d * g.d);
    const int cap = int(10.0 * (1.0 + std::log(std::max(norm, 1.0))));
    const Mat2 s_inv{0.0, 1.0, -1.0, 0.0};
    ReduceResult out{g, Mat2{}, 0};
    for(;;) {
        auto w = base_point(out.g);
        if(std::fabs(w.real()) > 0.5 + 1e-12) {
            double n = std::round(w.real());
            Mat2 t{1.0, n, 0.0, 1.0};
            out.g = out.g * t;
            out.gamma = out.gamma * t;
            ++out.iterations;
            w = base_point(out.g);
        }
        if(std::norm(w) >= 1.0 - 1e-12)
            break;
        out.g = out.g * s_inv;
        out.gamma = out.gamma * s_inv;
        if(++out.iterations > cap)
            throw IterationCap("reduce: iteration cap exceeded");
    }
    if(out.iterations > cap)
        throw IterationCap("reduce: iteration cap exceeded");
    return out;
}

GPoint make_gpoint(const std::array<Mat2, 3>& g)
{
    GPoint x;
    for(int j = 0; j < 3; ++j) {
        x.g[j] = reduce(g[j]).g;
        x.reduced[j] = true;
    }
    return x;
}

GPoint identity_point() { return make_gpoint({Mat2{}, Mat2{}, Mat2{}}); }

GPoint arc_point(const GPoint& x0, int T, double r)
{
    if(T < 0)
        throw std::invalid_argument("arc_point needs T >= 0");
    const Mat2 u = u_mat(r);
    const Mat2 a = a_mat(1.0);
    GPoint x;
    for(int j = 0; j < 3; ++j) {
        Mat2 h = reduce(u * x0.g[j]).g;
        for(int t = 0; t < T; ++t)
            h = reduce(a * h).g;
        x.g[j] = h;
        x.reduced[j] = true;
    }
    return x;
}

double haar_cap_deficit(double cap) { return 3.0 / (std::numbers::pi * cap); }

GPoint haar_sample(Rng& rng, double cap)
{
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double ymin = std::sqrt(3.0) / 2.0;
    GPoint x;
    for(int j = 0; j < 3; ++j) {
        double re, im;
        do {
            // inverse CDF of dy / y^2 on [ymin, cap]
            double v = U(rng);
            im = 1.0 / (1.0 / ymin - v * (1.0 / ymin - 1.0 / cap));
            re = U(rng) - 0.5;
        } while(re * re + im * im < 1.0);
        double th = 2.0 * std::numbers::pi * U(rng);
        double sy = std::sqrt(im);
        Mat2 n{1.0, re, 0.0, 1.0};
        Mat2 ay{sy, 0.0, 0.0, 1.0 / sy};
        Mat2 k{std::cos(th), -std::sin(th), std::sin(th), std::cos(th)};
        x.g[j] = inverse(n * ay * k);
        x.reduced[j] = true;
    }
    return x;
}

namespace {

double smooth_h(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

} // namespace

double Bump::operator()(std::complex<double> z) const
{
    double sx = (z.real() - cx) / rx, sy = (z.imag() - cy) / ry;
    double s = std::sqrt(sx * sx + sy * sy);
    if(s <= plateau)
        return 1.0;
    if(s >= 1.0)
        return 0.0;
    double t = (s - plateau) / (1.0 - plateau);
    return smooth_h(1.0 - t) / (smooth_h(1.0 - t) + smooth_h(t));
}

double TestFunction::operator()(const GPoint& x) const
{
    if(kind == Kind::Constant)
        return 1.0;
    double v = 1.0;
    for(const auto& b : bumps)
        v *= b(x.z(b.factor));
    return v;
}

TestFunction constant_one() { return {}; }

TestFunction single_bump(std::string id, const Bump& b) { return {TestFunction::Kind::Bump, std::move(id), {b}}; }

TestFunction product_bump(std::string id, std::vector<Bump> bs)
{
    return {TestFunction::Kind::Product, std::move(id), std::move(bs)};
}

std::vector<TestFunction> standard_suite()
{
    Bump b1{0, 0.0, 1.6, 0.45, 0.5, 0.4};
    Bump wide{0, 0.0, 2.2, 10.0, 1.0, 0.6};
    Bump wide2 = wide;
    wide2.factor = 1;
    Bump b3{2, 0.2, 1.3, 0.3, 0.3, 0.3};
    return {single_bump("bump1", b1), product_bump("pair12", {wide, wide2}), single_bump("bump3", b3)};
}

GPoint generic_point()
{
    const double s[3] = {std::sqrt(2.0), std::numbers::pi / 2.5, std::sqrt(3.0) - 0.2};
    const double c[3] = {std::sqrt(2.0) - 1.0, std::numbers::pi - 3.0, std::exp(1.0) - 2.0};
    std::array<Mat2, 3> g;
    for(int j = 0; j < 3; ++j)
        g[j] = inverse(u_mat(c[j]) * a_mat(s[j]));
    return make_gpoint(g);
}

std::vector<double> arc_grid(int nR)
{
    std::vector<double> r(std::max(nR, 0));
    for(int i = 0; i < nR; ++i)
        r[i] = (i + 0.5) / nR;
    return r;
}

namespace {

Mean mean_of(const std::vector<double>& v)
{
    Mean m;
    if(v.empty())
        return m;
    double s = 0.0;
    for(double x : v)
        s += x;
    m.value = s / double(v.size());
    if(v.size() > 1) {
        double ss = 0.0;
        for(double x : v)
            ss += (x - m.value) * (x - m.value);
        m.stderr_ = std::sqrt(ss / double(v.size() - 1) / double(v.size()));
    }
    return m;
}

// values[f][i] = suite[f](x_i) for the arc points at time T.
std::vector<std::vector<double>> arc_values(const GPoint& x0, int T, const std::vector<double>& rs,
                                            const std::vector<TestFunction>& suite, int threads)
{
    std::vector<std::vector<double>> vals(suite.size(), std::vector<double>(rs.size()));
    parallel_for(rs.size(), threads, [&](std::size_t i) {
        GPoint x = arc_point(x0, T, rs[i]);
        for(std::size_t f = 0; f < suite.size(); ++f)
            vals[f][i] = suite[f](x);
    });
    return vals;
}

std::vector<std::vector<double>> haar_values(int nHaar, const std::vector<TestFunction>& suite, Rng& rng)
{
    std::vector<std::vector<double>> vals(suite.size(), std::vector<double>(nHaar));
    for(int i = 0; i < nHaar; ++i) {
        GPoint x = haar_sample(rng);
        for(std::size_t f = 0; f < suite.size(); ++f)
            vals[f][i] = suite[f](x);
    }
    return vals;
}

} // namespace

std::vector<Discrepancy> discrepancy_suite(const GPoint& x0, int T, int nR, const std::vector<TestFunction>& suite,
                                           int nHaar, Rng& rng, int threads)
{
    if(nR < 1 || nHaar < 1)
        throw std::invalid_argument("discrepancy needs nR, nHaar >= 1");
    auto arc = arc_values(x0, T, arc_grid(nR), suite, threads);
    auto haar = haar_values(nHaar, suite, rng);
    std::vector<Discrepancy> out(suite.size());
    for(std::size_t f = 0; f < suite.size(); ++f) {
        out[f].arc = mean_of(arc[f]);
        out[f].haar = mean_of(haar[f]);
        out[f].value = std::fabs(out[f].arc.value - out[f].haar.value);
    }
    return out;
}

Discrepancy discrepancy(const GPoint& x0, int T, int nR, const TestFunction& phi, int nHaar, Rng& rng, int threads)
{
    return discrepancy_suite(x0, T, nR, {phi}, nHaar, rng, threads)[0];
}

std::string SubgroupCandidate::name() const
{
    switch(kind) {
    case Kind::FullDiagonal:
        return "full_diagonal";
    case Kind::PairDiagonal:
        return "pair_" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
    case Kind::Ambient:
        break;
    }
    return "ambient";
}

namespace {

double pair_proxy(const GPoint& x, int i, int j, int H)
{
    // adj(g_j) g_i / det(g_j): exactly the identity when g_i == g_j
    const Mat2& gj = x.g[j];
    Mat2 adj{gj.d, -gj.b, -gj.c, gj.a};
    Mat2 m = adj * x.g[i];
    double det = gj.det();
    double s = 0.0;
    for(double e : {m.a / det, m.b / det, m.c / det, m.d / det}) {
        double n = std::clamp(std::round(e), double(-H), double(H));
        s += (e - n) * (e - n);
    }
    return std::sqrt(s);
}

} // namespace

double orbit_proximity(const GPoint& x, const SubgroupCandidate& cand, int search_height)
{
    switch(cand.kind) {
    case SubgroupCandidate::Kind::PairDiagonal:
        return pair_proxy(x, cand.i, cand.j, search_height);
    case SubgroupCandidate::Kind::FullDiagonal:
        return std::max(pair_proxy(x, 0, 1, search_height), pair_proxy(x, 0, 2, search_height));
    case SubgroupCandidate::Kind::Ambient:
        break;
    }
    return 0.0;
}

std::vector<SubgroupCandidate> proper_candidates()
{
    using K = SubgroupCandidate::Kind;
    return {{K::FullDiagonal, 0, 1}, {K::PairDiagonal, 0, 1}, {K::PairDiagonal, 0, 2}, {K::PairDiagonal, 1, 2}};
}

DichotomyReport dichotomy_report(const GPoint& x0, int T, int R, const std::vector<TestFunction>& suite,
                                 const DichotomyConfig& cfg, Rng& rng)
{
    DichotomyReport rep;
    rep.haar_deficit = haar_cap_deficit();
    auto rs = arc_grid(cfg.nR);
    auto arc = arc_values(x0, T, rs, suite, cfg.threads);
    auto haar = haar_values(cfg.nHaar, suite, rng);
    rep.part1_threshold = std::pow(cfg.qhat, -cfg.k_const * R);
    for(std::size_t f = 0; f < suite.size(); ++f) {
        Discrepancy d;
        d.arc = mean_of(arc[f]);
        d.haar = mean_of(haar[f]);
        d.value = std::fabs(d.arc.value - d.haar.value);
        rep.phi_ids.push_back(suite[f].id);
        rep.disc.push_back(d);
        rep.part1.push_back(d.value <= rep.part1_threshold);
    }
    for(std::size_t i = 0; i < rs.size(); ++i)
        for(std::size_t f = 0; f < suite.size(); ++f)
            rep.arc_rows.push_back({rs[i], T, suite[f].id, arc[f][i]});

    // proximity of a_tau u_r x0 to the proper periodic-orbit candidates
    auto grid = arc_grid(cfg.proximity_grid);
    const int t0 = std::max(0, T - cfg.tau_window);
    const auto cands = proper_candidates();
    std::vector<std::vector<double>> best(grid.size(), std::vector<double>(cands.size()));
    parallel_for(grid.size(), cfg.threads, [&](std::size_t i) {
        GPoint x = arc_point(x0, t0, grid[i]);
        std::vector<double> b(cands.size(), INFINITY);
        const Mat2 a = a_mat(1.0);
        for(int tau = t0;; ++tau) {
            for(std::size_t c = 0; c < cands.size(); ++c)
                b[c] = std::min(b[c], orbit_proximity(x, cands[c], cfg.search_height));
            if(tau == T)
                break;
            for(int j = 0; j < 3; ++j)
                x.g[j] = reduce(a * x.g[j]).g;
        }
        best[i] = b;
    });
    rep.min_proximity = INFINITY;
    for(std::size_t c = 0; c < cands.size(); ++c) {
        double m = INFINITY;
        for(const auto& b : best)
            m = std::min(m, b[c]);
        rep.proximity.push_back({cands[c].name(), m});
        rep.min_proximity = std::min(rep.min_proximity, m);
    }
    rep.part2_threshold = std::pow(double(std::max(T, 1)), cfg.a_const) * std::pow(cfg.qhat, -2.0 * T + cfg.a_const * R);
    rep.part2 = rep.min_proximity <= rep.part2_threshold;
    return rep;
}

void write_arc_csv(std::ostream& os, const DichotomyReport& rep)
{
    os << "r,tau,phi_id,value\r\n";
    for(const auto& row : rep.arc_rows)
        os << csv_double(row.r) << "," << row.tau << "," << csv_field(row.phi) << "," << csv_double(row.value)
           << "\r\n";
}

void write_proximity_csv(std::ostream& os, const DichotomyReport& rep)
{
    os << "candidate,proxy\r\n";
    for(const auto& row : rep.proximity)
        os << csv_field(row.candidate) << "," << csv_double(row.proxy) << "\r\n";
}

void write_gpoint_csv(std::ostream& os, const std::vector<GPoint>& xs)
{
    os << "g1_a,g1_b,g1_c,g1_d,g2_a,g2_b,g2_c,g2_d,g3_a,g3_b,g3_c,g3_d,reduced1,reduced2,reduced3\r\n";
    for(const auto& x : xs) {
        for(int j = 0; j < 3; ++j)
            os << csv_double(x.g[j].a) << "," << csv_double(x.g[j].b) << "," << csv_double(x.g[j].c) << ","
               << csv_double(x.g[j].d) << ",";
        os << int(x.reduced[0]) << "," << int(x.reduced[1]) << "," << int(x.reduced[2]) << "\r\n";
    }
}

} // namespace eqlab
