#include "eqlab/localfield.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace eqlab {

bool is_prime(int n)
{
    if(n < 2)
        return false;
    for(int d = 2; d * d <= n; ++d)
        if(n % d == 0)
            return false;
    return true;
}

Field Field::real()
{
    Field f;
    f.kind_ = FieldKind::Real;
    f.q_ = std::exp(1.0);
    return f;
}

Field Field::padic(int p, int K)
{
    if(!is_prime(p))
        throw InvalidField("padic field needs a prime p, got " + std::to_string(p));
    if(K < 1)
        throw InvalidField("padic precision K must be >= 1");
    std::int64_t mod = 1;
    for(int i = 0; i < K; ++i) {
        mod *= p;
        if(mod >= (std::int64_t(1) << 31))
            throw PrecisionExceeded("p^K must stay below 2^31 (p=" + std::to_string(p) +
                                    ", K=" + std::to_string(K) + ")");
    }
    Field f;
    f.kind_ = FieldKind::Padic;
    f.p_ = p;
    f.K_ = K;
    f.mod_ = mod;
    f.q_ = p;
    return f;
}

Field Field::parse(const std::string& spec)
{
    if(spec == "real")
        return real();
    const std::string prefix = "padic:";
    if(spec.rfind(prefix, 0) != 0)
        throw InvalidField("unknown field descriptor '" + spec + "'");
    int p = -1;
    int K = -1;
    std::stringstream ss(spec.substr(prefix.size()));
    std::string item;
    while(std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if(eq == std::string::npos)
            throw InvalidField("malformed field parameter '" + item + "'");
        auto key = item.substr(0, eq);
        int value = 0;
        try {
            value = std::stoi(item.substr(eq + 1));
        }
        catch(const std::exception&) {
            throw InvalidField("non-integer field parameter '" + item + "'");
        }
        if(key == "p")
            p = value;
        else if(key == "K")
            K = value;
        else
            throw InvalidField("unknown field parameter '" + key + "'");
    }
    if(p < 0 || K < 0)
        throw InvalidField("padic field needs both p and K: '" + spec + "'");
    return padic(p, K);
}

std::string Field::to_string() const
{
    if(is_real())
        return "real";
    return "padic:p=" + std::to_string(p_) + ",K=" + std::to_string(K_);
}

double Field::uniformizer() const
{
    return is_real() ? std::exp(-1.0) : double(p_);
}

double Field::from_int(std::int64_t n) const
{
    if(is_real())
        return double(n);
    std::int64_t r = n % mod_;
    if(r < 0)
        r += mod_;
    return double(r);
}

double Field::add(double a, double b) const
{
    if(is_real())
        return a + b;
    auto s = std::int64_t(a) + std::int64_t(b);
    return double(s >= mod_ ? s - mod_ : s);
}

double Field::sub(double a, double b) const
{
    if(is_real())
        return a - b;
    auto s = std::int64_t(a) - std::int64_t(b);
    return double(s < 0 ? s + mod_ : s);
}

double Field::mul(double a, double b) const
{
    if(is_real())
        return a * b;
    return double((std::int64_t(a) * std::int64_t(b)) % mod_);
}

double Field::neg(double a) const
{
    if(is_real())
        return -a;
    auto v = std::int64_t(a);
    return double(v == 0 ? 0 : mod_ - v);
}

double Field::unif_pow(int n) const
{
    if(is_real())
        return std::exp(-double(n));
    if(n < 0)
        throw PrecisionExceeded("p^" + std::to_string(n) + " is not an integral residue");
    if(n >= K_)
        return 0.0;
    std::int64_t r = 1;
    for(int i = 0; i < n; ++i)
        r *= p_;
    return double(r);
}

int Field::valuation(double x) const
{
    auto r = std::int64_t(x);
    if(r == 0)
        return K_;
    int v = 0;
    while(r % p_ == 0) {
        r /= p_;
        ++v;
    }
    return v;
}

double Field::abs(double x) const
{
    if(is_real())
        return std::fabs(x);
    if(std::int64_t(x) == 0)
        return 0.0;
    return std::pow(q_, -double(valuation(x)));
}

double Field::unit_part(double x) const
{
    auto r = std::int64_t(x);
    if(r == 0)
        throw std::domain_error("unit part of zero");
    while(r % p_ == 0)
        r /= p_;
    return double(r);
}

double Field::inverse_unit(double u) const
{
    // extended Euclid on (u, p^K)
    std::int64_t a = std::int64_t(u), m = mod_;
    std::int64_t x0 = 1, x1 = 0;
    std::int64_t b = m;
    while(b != 0) {
        std::int64_t t = a / b;
        std::int64_t tmp = a - t * b;
        a = b;
        b = tmp;
        tmp = x0 - t * x1;
        x0 = x1;
        x1 = tmp;
    }
    if(a != 1)
        throw std::domain_error("residue is not a p-adic unit");
    x0 %= m;
    if(x0 < 0)
        x0 += m;
    return double(x0);
}

bool Field::equal(double a, double b, double tol) const
{
    if(is_real())
        return std::fabs(a - b) <= tol;
    return std::int64_t(a) == std::int64_t(b);
}

double Field::scale(int k, ScaleBase base) const
{
    if(is_real())
        return base == ScaleBase::Dyadic ? std::ldexp(1.0, -k) : std::exp(-double(k));
    return std::pow(q_, -double(k));
}

ScaleIndex make_scale(const Field& f, int k)
{
    if(k < 0)
        throw std::invalid_argument("scale index must be >= 0");
    if(f.is_padic() && k > f.precision())
        throw PrecisionExceeded("scale index " + std::to_string(k) + " exceeds precision K=" +
                                std::to_string(f.precision()));
    return ScaleIndex{k};
}

double norm(const Field& f, std::span<const double> v)
{
    if(f.is_real()) {
        double s = 0.0;
        for(double x : v)
            s += x * x;
        return std::sqrt(s);
    }
    double m = 0.0;
    for(double x : v)
        m = std::max(m, f.abs(x));
    return m;
}

FVector scale_vector(const Field& f, double c, const FVector& v)
{
    FVector out{v.coords};
    for(auto& x : out.coords)
        x = f.mul(c, x);
    return out;
}

double sample_unit_scalar(Rng& rng, const Field& f)
{
    if(f.is_real())
        return std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    return double(std::uniform_int_distribution<std::int64_t>(0, f.modulus() - 1)(rng));
}

FVector sample_unit_ball(Rng& rng, const Field& f, int m)
{
    if(m < 1)
        throw std::invalid_argument("sample_unit_ball needs m >= 1");
    FVector v;
    v.coords.resize(m);
    if(f.is_padic()) {
        for(auto& x : v.coords)
            x = sample_unit_scalar(rng, f);
        return v;
    }
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for(;;) {
        double s = 0.0;
        for(auto& x : v.coords) {
            x = u(rng);
            s += x * x;
        }
        if(s <= 1.0)
            return v;
    }
}

namespace {

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for(std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

std::vector<FVector> gram_schmidt(const std::vector<FVector>& vs)
{
    std::vector<FVector> out;
    for(const auto& v : vs) {
        FVector w = v;
        for(const auto& u : out) {
            double c = dot(w.coords, u.coords) / dot(u.coords, u.coords);
            for(std::size_t i = 0; i < w.size(); ++i)
                w[i] -= c * u[i];
        }
        double nv = std::sqrt(dot(v.coords, v.coords));
        double nw = std::sqrt(dot(w.coords, w.coords));
        if(nw <= 1e-10 * std::max(nv, 1.0))
            throw DependentInput("orthogonalize: input vectors are linearly dependent");
        out.push_back(std::move(w));
    }
    return out;
}

// Divide a residue by p^v (exact when p^v divides it).
std::int64_t shift_down(std::int64_t r, int p, int v)
{
    for(int i = 0; i < v; ++i)
        r /= p;
    return r;
}

std::vector<FVector> padic_orthogonalize(const Field& f, const std::vector<FVector>& vs)
{
    struct Pivot {
        FVector unit_scaled;
        std::size_t col;
        double inv;
    };
    std::vector<Pivot> pivots;
    std::vector<FVector> out;
    for(const auto& v : vs) {
        FVector w = v;
        for(const auto& pv : pivots) {
            double c = f.mul(w[pv.col], pv.inv);
            for(std::size_t i = 0; i < w.size(); ++i)
                w[i] = f.sub(w[i], f.mul(c, pv.unit_scaled[i]));
        }
        int vmin = f.precision();
        std::size_t col = 0;
        for(std::size_t i = 0; i < w.size(); ++i) {
            int vi = f.valuation(w[i]);
            if(vi < vmin) {
                vmin = vi;
                col = i;
            }
        }
        if(vmin >= f.precision())
            throw DependentInput("orthogonalize: input vectors are dependent modulo p^K");
        FVector scaled = w;
        for(auto& x : scaled.coords)
            x = double(shift_down(std::int64_t(x), f.prime(), vmin));
        pivots.push_back({scaled, col, f.inverse_unit(scaled[col])});
        out.push_back(std::move(w));
    }
    return out;
}

// Rank over F_p of the given rows (entries already reduced mod p).
int rank_mod_p(std::vector<std::vector<std::int64_t>> rows, int p)
{
    if(rows.empty())
        return 0;
    std::size_t ncols = rows.front().size();
    int rank = 0;
    for(std::size_t c = 0; c < ncols && rank < int(rows.size()); ++c) {
        int piv = -1;
        for(int r = rank; r < int(rows.size()); ++r)
            if(rows[r][c] % p != 0) {
                piv = r;
                break;
            }
        if(piv < 0)
            continue;
        std::swap(rows[rank], rows[piv]);
        std::int64_t inv = 1;
        while((rows[rank][c] * inv) % p != 1)
            ++inv;
        for(int r = 0; r < int(rows.size()); ++r) {
            if(r == rank || rows[r][c] % p == 0)
                continue;
            std::int64_t factor = (rows[r][c] * inv) % p;
            for(std::size_t j = 0; j < ncols; ++j)
                rows[r][j] = ((rows[r][j] - factor * rows[rank][j]) % p + p) % p;
        }
        ++rank;
    }
    return rank;
}

} // namespace

std::vector<FVector> orthogonalize(const Field& f, const std::vector<FVector>& vs)
{
    if(f.is_real())
        return gram_schmidt(vs);
    return padic_orthogonalize(f, vs);
}

bool is_orthogonal(const Field& f, const std::vector<FVector>& vs, double tol)
{
    if(f.is_real()) {
        for(std::size_t i = 0; i < vs.size(); ++i)
            for(std::size_t j = i + 1; j < vs.size(); ++j) {
                double ni = std::sqrt(dot(vs[i].coords, vs[i].coords));
                double nj = std::sqrt(dot(vs[j].coords, vs[j].coords));
                if(std::fabs(dot(vs[i].coords, vs[j].coords)) > tol * std::max(ni * nj, 1.0))
                    return false;
            }
        return true;
    }
    std::vector<std::vector<std::int64_t>> rows;
    for(const auto& v : vs) {
        int vmin = f.precision();
        for(double x : v.coords)
            vmin = std::min(vmin, f.valuation(x));
        if(vmin >= f.precision())
            return false;
        std::vector<std::int64_t> row;
        for(double x : v.coords)
            row.push_back(shift_down(std::int64_t(x), f.prime(), vmin) % f.prime());
        rows.push_back(std::move(row));
    }
    return rank_mod_p(std::move(rows), f.prime()) == int(vs.size());
}

} // namespace eqlab
