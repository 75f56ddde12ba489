#include "eqlab/focusing.hpp"

#include "eqlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace eqlab {

double WeightedMeasure::total() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

void validate_measure(const WeightedMeasure& mu)
{
    if(mu.cloud.rep.d != 2)
        throw WrongDegree("weighted measures live on sl2 (x) F^m, d = 2");
    if(mu.weights.size() != mu.cloud.size())
        throw InvalidMeasure("one weight per point is required");
    for(double w : mu.weights)
        if(!std::isfinite(w) || w < 0.0)
            throw InvalidMeasure("weights must be finite and nonnegative");
    if(mu.total() > 1.0 + 1e-9)
        throw InvalidMeasure("total mass exceeds 1");
}

WeightedMeasure uniform_measure(PhiCloud cloud, double weight)
{
    WeightedMeasure mu{std::move(cloud), {}};
    mu.weights.assign(mu.cloud.size(), weight);
    return mu;
}

void validate_params(const Field& f, const FocusParams& p)
{
    if(!(p.k1 >= 0 && p.k1 < p.k2))
        throw std::invalid_argument("focus scales need 0 <= k1 < k2");
    if(f.is_padic() && p.k2 > f.precision())
        throw PrecisionExceeded("focus scale k2 exceeds the p-adic precision");
    if(!(p.alpha > 0.0))
        throw std::invalid_argument("alpha must be positive");
    if(!(p.eps > 0.0 && p.eps < 1.0))
        throw std::invalid_argument("eps' must lie in (0, 1)");
    if(!(p.A >= 1.0))
        throw std::invalid_argument("A must be at least 1");
    if(!(p.nhd > 0.0) || !(p.kappa > 0.0))
        throw std::invalid_argument("neighbourhood factor and kappa must be positive");
}

namespace {

double phi_dist(const RepSpace& rep, std::span<const double> x, std::span<const double> y)
{
    const Field& f = rep.field;
    double out = 0.0;
    for(int i = 0; i < rep.rows(); ++i) {
        double s = 0.0;
        for(int c = 0; c < rep.m; ++c) {
            double t = f.sub(x[i * rep.m + c], y[i * rep.m + c]);
            if(f.is_real())
                s += t * t;
            else
                s = std::max(s, f.abs(t));
        }
        out = std::max(out, f.is_real() ? std::sqrt(s) : s);
    }
    return out;
}

bool within(double dist, double radius) { return dist <= radius * (1.0 + 1e-9); }

// Ball queries.  Real clouds are sorted by their first coordinate so a query
// only scans the slab |x_0 - y_0| <= radius; p-adic clouds by the reversed
// digits of the first coordinate, which turns every ball into a key range.
class BallIndex {
  public:
    explicit BallIndex(const PhiCloud& c) : cloud_(c)
    {
        const Field& f = c.rep.field;
        order_.resize(c.size());
        std::iota(order_.begin(), order_.end(), std::size_t(0));
        std::vector<double> key(c.size());
        for(std::size_t i = 0; i < c.size(); ++i)
            key[i] = f.is_real() ? c.point(i)[0] : reversed(f, c.point(i)[0]);
        std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
        key_.resize(c.size());
        for(std::size_t i = 0; i < c.size(); ++i)
            key_[i] = key[order_[i]];
    }

    template <class Fn>
    void for_each(std::span<const double> y, double radius, Fn&& fn) const
    {
        const Field& f = cloud_.rep.field;
        double a, b;
        std::int64_t pk = 1;
        if(f.is_real()) {
            double slack = radius * (1.0 + 1e-9);
            a = y[0] - slack;
            b = y[0] + slack;
        } else {
            // |x - y| <= p^-k  iff  the first k digits agree: a contiguous key range
            int k = 0;
            while(k < f.precision() && f.scale(k) > radius * (1.0 + 1e-9))
                ++k;
            for(int i = 0; i < k; ++i)
                pk *= f.prime();
            double width = std::pow(double(f.prime()), f.precision() - k);
            a = std::floor(reversed(f, y[0]) / width) * width;
            b = a + width - 0.5;
        }
        std::size_t lo = std::size_t(std::lower_bound(key_.begin(), key_.end(), a) - key_.begin());
        std::size_t hi = std::size_t(std::upper_bound(key_.begin(), key_.end(), b) - key_.begin());
        for(std::size_t t = lo; t < hi; ++t) {
            std::size_t i = order_[t];
            auto x = cloud_.point(i);
            bool in = true;
            if(f.is_real())
                in = within(phi_dist(cloud_.rep, x, y), radius);
            else
                for(std::size_t c = 0; c < x.size() && in; ++c)
                    in = (std::int64_t(x[c]) - std::int64_t(y[c])) % pk == 0;
            if(in)
                fn(i);
        }
    }

  private:
    // p-adic digits of a residue in reverse order, read as an integer
    static double reversed(const Field& f, double x)
    {
        auto v = std::int64_t(x);
        std::int64_t out = 0;
        for(int i = 0; i < f.precision(); ++i) {
            out = out * f.prime() + v % f.prime();
            v /= f.prime();
        }
        return double(out);
    }

    const PhiCloud& cloud_;
    std::vector<std::size_t> order_;
    std::vector<double> key_;
};

double ball_mass(const WeightedMeasure& mu, const BallIndex& idx, std::span<const double> y, double radius)
{
    double s = 0.0;
    idx.for_each(y, radius, [&](std::size_t i) { s += mu.weights[i]; });
    return s;
}

RepBox shifted(const RepSpace& rep, const PhiPoint& y, const RepBox& box)
{
    RepBox out = box;
    for(std::size_t i = 0; i < out.base.entries.size(); ++i)
        out.base.entries[i] = rep.field.add(y.entries[i], box.base.entries[i]);
    out.base.m = rep.m;
    return out;
}

void check_box_size(const RepSpace& rep, const RepBox& box, double d1)
{
    const Field& f = rep.field;
    bool ok = box.base.entries.size() == std::size_t(rep.dim()) &&
              within(phi_norm(rep, box.base.entries), 2.0 * d1);
    for(const auto& dir : box.dirs)
        ok = ok && within(f.scale(dir.k), 2.0 * d1);
    if(!ok)
        throw PreconditionFailed("focus box must lie in B_{2 delta_1}");
}

FocusCheck focus_check(const WeightedMeasure& mu, const BallIndex& idx, const PhiPoint& y, const RepBox& box,
                       const FocusParams& p, bool exact)
{
    const auto& rep = mu.cloud.rep;
    const Field& f = rep.field;
    const double d1 = f.scale(p.k1), d2 = f.scale(p.k2);
    const double L = double(p.k2 - p.k1) * std::log(f.q());
    check_box_size(rep, box, d1);

    FocusCheck out;
    double logN = log_box_covering_number(rep, box, ScaleIndex{p.k2});
    out.cover_exponent = logN / L;
    double logA = std::log(p.A);
    out.almost_filled = logN >= -logA + (p.alpha - p.eps) * L - 1e-9 && logN <= logA + (p.alpha + p.eps) * L + 1e-9;

    RepBox abs_box = shifted(rep, y, box);
    BoxFrame frame(f, rep.m, abs_box.dirs);
    std::vector<std::size_t> ball;
    idx.for_each(y.entries, d1, [&](std::size_t i) { ball.push_back(i); });
    for(auto i : ball) {
        double w = mu.weights[i];
        out.ball_mass += w;
        if(within(box_distance(rep, abs_box, frame, mu.cloud.point(i)), p.nhd * d2))
            out.box_mass += w;
    }
    if(out.ball_mass <= 0.0)
        throw ZeroMass("mu(B_{delta_1}(y)) = 0");
    out.mass_ratio = out.box_mass / out.ball_mass;
    out.mass_required = std::exp(-logA - p.eps * L);
    out.non_concentrated = out.mass_ratio >= out.mass_required * (1.0 - 1e-12);
    out.focused = out.almost_filled && out.non_concentrated;
    if(!exact)
        return out;

    out.small_ball_required = std::exp(-logA - p.eps * L - p.alpha * p.k2 * std::log(f.q()));
    out.min_small_ball = std::numeric_limits<double>::infinity();
    for(auto i : ball) {
        if(mu.weights[i] <= 0.0)
            continue;
        out.min_small_ball = std::min(out.min_small_ball, ball_mass(mu, idx, mu.cloud.point(i), d2));
    }
    out.exact = out.focused && out.min_small_ball >= out.small_ball_required * (1.0 - 1e-12);
    return out;
}

// (x - y) / unif^k, in the field of the rescaled ball.
PhiCloud rescaled_ball(const PhiCloud& c, const std::vector<std::size_t>& ball, std::span<const double> y, int k)
{
    const Field& f = c.rep.field;
    Field lf = f;
    std::int64_t pk = 1;
    if(f.is_padic()) {
        lf = Field::padic(f.prime(), f.precision() - k);
        for(int i = 0; i < k; ++i)
            pk *= f.prime();
    }
    const double s = f.is_real() ? std::exp(double(k)) : 1.0;
    PhiCloud out{RepSpace{lf, c.rep.d, c.rep.m}, {}};
    out.data.reserve(ball.size() * c.rep.dim());
    for(auto i : ball) {
        auto x = c.point(i);
        for(int a = 0; a < c.rep.dim(); ++a) {
            double t = f.sub(x[a], y[a]);
            out.data.push_back(f.is_real() ? t * s : double(std::int64_t(t) / pk));
        }
    }
    return out;
}

// Back to the ambient ladder: multiply by unif^k.
RepBox unrescaled_box(const Field& f, const RepBox& local, int k)
{
    const double u = f.unif_pow(k);
    RepBox out;
    out.base = local.base;
    for(auto& x : out.base.entries)
        x = f.mul(x, u);
    for(const auto& dir : local.dirs) {
        BoxDirection g{dir.u, dir.k + k};
        for(auto& x : g.u.coords)
            x = f.mul(x, u);
        out.dirs.push_back(std::move(g));
    }
    return out;
}

bool ambient(const RepBox& local, int m)
{
    if(int(local.dirs.size()) != m)
        return false;
    for(const auto& dir : local.dirs)
        if(dir.k != 0)
            return false;
    return true;
}

} // namespace

FocusCheck is_focused(const WeightedMeasure& mu, const PhiPoint& y, const RepBox& box, const FocusParams& p)
{
    validate_measure(mu);
    validate_params(mu.cloud.rep.field, p);
    BallIndex idx(mu.cloud);
    return focus_check(mu, idx, y, box, p, false);
}

FocusCheck is_exactly_focused(const WeightedMeasure& mu, const PhiPoint& y, const RepBox& box,
                              const FocusParams& p)
{
    validate_measure(mu);
    validate_params(mu.cloud.rep.field, p);
    BallIndex idx(mu.cloud);
    return focus_check(mu, idx, y, box, p, true);
}

namespace {

FocusScan scan_with_index(const WeightedMeasure& mu, const BallIndex& idx, const FocusParams& p)
{
    const auto& rep = mu.cloud.rep;
    const Field& f = rep.field;
    const double d1 = f.scale(p.k1);
    constexpr auto none = std::numeric_limits<std::size_t>::max();

    FocusScan out;
    out.owner.assign(mu.size(), none);
    // net points keyed by their first coordinate (real) for slab lookups
    std::multimap<double, std::size_t> by_key;
    auto nearest_net = [&](std::size_t i) {
        auto x = mu.cloud.point(i);
        std::size_t best = none;
        auto visit = [&](std::size_t pos) {
            if(pos < best && within(phi_dist(rep, x, mu.cloud.point(out.net[pos])), d1))
                best = pos;
        };
        if(f.is_real()) {
            auto lo = by_key.lower_bound(x[0] - d1 * (1 + 1e-9));
            auto hi = by_key.upper_bound(x[0] + d1 * (1 + 1e-9));
            for(auto it = lo; it != hi; ++it)
                visit(it->second);
        } else {
            for(std::size_t pos = 0; pos < out.net.size(); ++pos)
                visit(pos);
        }
        return best;
    };
    for(std::size_t i = 0; i < mu.size(); ++i) {
        if(mu.weights[i] <= 0.0)
            continue;
        std::size_t pos = nearest_net(i);
        if(pos == none) {
            pos = out.net.size();
            out.net.push_back(i);
            by_key.emplace(mu.cloud.point(i)[0], pos);
        }
        out.owner[i] = pos;
    }
    for(std::size_t i = 0; i < mu.size(); ++i)
        if(mu.weights[i] <= 0.0)
            out.owner[i] = nearest_net(i);

    ProjConfig cfg;
    cfg.alpha = p.alpha;
    cfg.eps = p.eps;
    cfg.C = p.C;
    cfg.c = p.c;
    cfg.k = p.k2 - p.k1;
    cfg.anchor_budget = p.anchor_budget;

    std::vector<std::optional<FocusWitness>> slots(out.net.size());
    parallel_for(out.net.size(), p.threads, [&](std::size_t pos) {
        const std::size_t yi = out.net[pos];
        PhiPoint y = mu.cloud.get(yi);
        std::vector<std::size_t> ball;
        idx.for_each(y.entries, d1, [&](std::size_t i) { ball.push_back(i); });
        auto local = rescaled_ball(mu.cloud, ball, y.entries, p.k1);
        auto search = find_representation_box(local, cfg);
        if(!search.box || ambient(*search.box, rep.m))
            return;
        RepBox box = unrescaled_box(f, *search.box, p.k1);
        auto check = focus_check(mu, idx, y, box, p, false);
        if(check.focused)
            slots[pos] = FocusWitness{pos, yi, std::move(box), check};
    });
    for(auto& s : slots)
        if(s)
            out.focused.push_back(std::move(*s));
    return out;
}

WeightedMeasure restrict(const WeightedMeasure& mu, const std::vector<int>& part, int which)
{
    WeightedMeasure out{PhiCloud{mu.cloud.rep, {}}, {}};
    for(std::size_t i = 0; i < mu.size(); ++i)
        if(part[i] == which) {
            out.cloud.push(mu.cloud.point(i));
            out.weights.push_back(mu.weights[i]);
        }
    return out;
}

} // namespace

FocusScan scan_focused(const WeightedMeasure& mu, const FocusParams& p)
{
    validate_measure(mu);
    validate_params(mu.cloud.rep.field, p);
    BallIndex idx(mu.cloud);
    return scan_with_index(mu, idx, p);
}

DecompResult ip_fs_decompose(const WeightedMeasure& mu, ScaleIndex b, int l, const FocusParams& params)
{
    FocusParams p = params;
    p.k1 = b.k;
    p.k2 = b.k + 2 * l;
    if(l < 1)
        throw PreconditionFailed("ip_fs_decompose needs l >= 1");
    validate_measure(mu);
    validate_params(mu.cloud.rep.field, p);
    const auto& rep = mu.cloud.rep;
    const Field& f = rep.field;
    BallIndex idx(mu.cloud);

    DecompResult out;
    auto scan = scan_with_index(mu, idx, p);
    std::vector<char> focused_net(scan.net.size(), 0);
    for(const auto& w : scan.focused)
        focused_net[w.net_index] = 1;
    out.part.assign(mu.size(), PartIp);
    for(std::size_t i = 0; i < mu.size(); ++i)
        if(scan.owner[i] < scan.net.size() && focused_net[scan.owner[i]])
            out.part[i] = PartFs;
    out.witnesses = std::move(scan.focused);

    // greedy trimming of the heaviest over-concentrated b-balls
    const double bb = f.scale(p.k1);
    const double cap = p.A * std::exp(-p.alpha * p.k1 * std::log(f.q()));
    out.budget = std::exp(-p.kappa * p.k2 * std::log(f.q()));
    std::vector<double> mass(mu.size(), 0.0);
    auto local_mass = [&](std::size_t i) {
        double s = 0.0;
        idx.for_each(mu.cloud.point(i), bb, [&](std::size_t j) {
            if(out.part[j] == PartIp)
                s += mu.weights[j];
        });
        return s;
    };
    for(std::size_t i = 0; i < mu.size(); ++i)
        if(out.part[i] == PartIp && mu.weights[i] > 0.0)
            mass[i] = local_mass(i);
    double trimmed = 0.0;
    for(;;) {
        std::size_t top = mu.size();
        for(std::size_t i = 0; i < mu.size(); ++i)
            if(out.part[i] == PartIp && mu.weights[i] > 0.0 && (top == mu.size() || mass[i] > mass[top]))
                top = i;
        if(top == mu.size() || mass[top] <= cap * (1.0 + 1e-12))
            break;
        if(trimmed + mass[top] > out.budget) {
            out.budget_exceeded = true;
            break;
        }
        trimmed += mass[top];
        auto centre = mu.cloud.point(top);
        idx.for_each(centre, bb, [&](std::size_t j) {
            if(out.part[j] == PartIp)
                out.part[j] = PartNegligible;
        });
        idx.for_each(centre, 2.0 * bb, [&](std::size_t j) {
            if(out.part[j] == PartIp && mu.weights[j] > 0.0)
                mass[j] = local_mass(j);
        });
    }

    out.ip = restrict(mu, out.part, PartIp);
    out.fs = restrict(mu, out.part, PartFs);
    out.negligible = restrict(mu, out.part, PartNegligible);
    return out;
}

double collision_dimension(const PhiCloud& cloud, const std::vector<double>& weights, int k)
{
    const Field& f = cloud.rep.field;
    if(k < 1)
        throw std::invalid_argument("collision_dimension needs k >= 1");
    const int dim = cloud.rep.dim();
    const std::size_t n = cloud.size();
    std::vector<std::int64_t> cells(n * std::size_t(dim));
    const double inv = 1.0 / f.scale(k);
    std::int64_t pk = 1;
    if(f.is_padic())
        for(int i = 0; i < k; ++i)
            pk *= f.prime();
    for(std::size_t i = 0; i < n; ++i)
        for(int a = 0; a < dim; ++a) {
            double x = cloud.point(i)[a];
            cells[i * dim + a] = f.is_real() ? real_cell(x, inv) : padic_cell(x, pk);
        }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    auto cell = [&](std::size_t i) { return std::span<const std::int64_t>(cells.data() + i * dim, dim); };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        auto x = cell(a), y = cell(b);
        return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
    });

    // sums over ordered pairs of distinct points: same cell / all pairs
    double same = 0.0, total = 0.0, sq = 0.0;
    for(std::size_t t = 0; t < n;) {
        std::size_t u = t;
        double wc = 0.0, wc2 = 0.0;
        while(u < n && std::ranges::equal(cell(order[u]), cell(order[t]))) {
            wc += weights[order[u]];
            wc2 += weights[order[u]] * weights[order[u]];
            ++u;
        }
        same += wc * wc - wc2;
        total += wc;
        sq += wc2;
        t = u;
    }
    double pairs = total * total - sq;
    if(!(pairs > 1e-15 * total * total))
        return 0.0; // a single atom
    if(!(same > 0.0))
        return std::numeric_limits<double>::quiet_NaN();
    return std::log(same / pairs) / std::log(f.scale(k));
}

InterpolationAudit interpolation_audit(const WeightedMeasure& mu, int l, int r_samples, ScaleIndex b, Rng& rng,
                                       double tol, int threads)
{
    validate_measure(mu);
    if(l < 0)
        throw std::invalid_argument("interpolation_audit needs l >= 0");
    const auto& rep = mu.cloud.rep;
    const Field& f = rep.field;
    const FMatrix a = a_matrix(f, l, rep.d);
    auto rv = sample_r_values(rng, f, r_samples);

    InterpolationAudit out;
    out.rows.resize(rv.size());
    parallel_for(rv.size(), threads, [&](std::size_t i) {
        InterpolationRow row;
        row.r = rv[i];
        PhiCloud y = apply_group(u_matrix(f, rv[i], rep.d), mu.cloud);
        row.alpha1 = collision_dimension(y, mu.weights, b.k);
        row.alpha2 = collision_dimension(y, mu.weights, b.k + 2 * l);
        row.pushed = collision_dimension(apply_group(a, y), mu.weights, b.k);
        row.margin = row.pushed - (2.0 / 3.0 * row.alpha1 + 1.0 / 3.0 * row.alpha2);
        row.ok = row.margin >= -tol;
        out.rows[i] = row;
    });
    std::size_t ok = 0;
    for(const auto& row : out.rows)
        ok += row.ok;
    out.ok_fraction = out.rows.empty() ? 0.0 : double(ok) / double(out.rows.size());
    return out;
}

MultipleOfThree multiple_of_three_audit(const WeightedMeasure& mu, const PhiPoint& y, const RepBox& box,
                                        const FocusParams& p)
{
    validate_measure(mu);
    validate_params(mu.cloud.rep.field, p);
    const auto& rep = mu.cloud.rep;
    const Field& f = rep.field;
    BallIndex idx(mu.cloud);
    auto check = focus_check(mu, idx, y, box, p, true);
    if(!check.exact)
        throw PreconditionFailed("measure is not exactly focused at y");

    const double d1 = f.scale(p.k1);
    std::vector<std::size_t> ball;
    idx.for_each(y.entries, d1, [&](std::size_t i) { ball.push_back(i); });
    for(auto i : ball) {
        if(mu.weights[i] <= 0.0)
            continue;
        for(int k = p.k1; k <= p.k2; ++k) {
            double cap = p.A * std::exp(-p.alpha * k * std::log(f.q()));
            if(ball_mass(mu, idx, mu.cloud.point(i), f.scale(k)) > cap * (1.0 + 1e-12))
                throw PreconditionFailed("upper regularity mu(B_b(z)) <= A b^alpha fails at scale index " +
                                         std::to_string(k));
        }
    }

    MultipleOfThree out;
    PhiCloud local{rep, {}};
    for(auto i : ball)
        local.push(mu.cloud.point(i));
    auto ld = local_dimension(local.view(), ScaleIndex{p.k1}, ScaleIndex{p.k2});
    out.alpha_est = ld.value;
    out.nearest = 3;
    for(int j = 1; j <= rep.m; ++j)
        if(std::fabs(out.alpha_est - 3.0 * j) < std::fabs(out.alpha_est - out.nearest))
            out.nearest = 3 * j;
    out.gap = std::fabs(out.alpha_est - out.nearest);
    out.expected = 3 * int(box.dirs.size());

    // occupied directions near delta_1; the local cloud is delta_2-thin in the rest
    bool occupied = !box.dirs.empty();
    for(const auto& dir : box.dirs)
        occupied = occupied && std::abs(dir.k - p.k1) <= 1;
    RepBox abs_box = shifted(rep, y, box);
    std::vector<double> rows;
    for(auto i : ball)
        for(int r = 0; r < rep.rows(); ++r)
            for(int c = 0; c < rep.m; ++c)
                rows.push_back(f.sub(mu.cloud.point(i)[r * rep.m + c], abs_box.base.at(r, c)));
    auto fits = fit_directions(f, rep.m, rows);
    bool thin = true;
    for(std::size_t j = box.dirs.size(); j < fits.size(); ++j)
        thin = thin && fits[j].kq >= p.k2 - 1 - 1e-9;
    out.profile_ok = occupied && thin;
    return out;
}

WeightedMeasure planted_focus_measure(const RepSpace& rep, const RepBox& box, std::size_t n, double noise,
                                      double w, Rng& rng)
{
    return uniform_measure(planted_box_generator(rep, box, n, noise, rng), w);
}

} // namespace eqlab
