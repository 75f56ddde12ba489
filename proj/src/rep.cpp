#include "eqlab/rep.hpp"

#include "eqlab/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace eqlab {

FMatrix FMatrix::identity(int n)
{
    FMatrix m(n, n);
    for(int i = 0; i < n; ++i)
        m(i, i) = 1.0;
    return m;
}

FMatrix matmul(const Field& f, const FMatrix& x, const FMatrix& y)
{
    if(x.cols != y.rows)
        throw std::invalid_argument("matmul: dimension mismatch");
    FMatrix z(x.rows, y.cols);
    for(int i = 0; i < x.rows; ++i)
        for(int j = 0; j < y.cols; ++j) {
            double s = 0.0;
            for(int l = 0; l < x.cols; ++l)
                s = f.add(s, f.mul(x(i, l), y(l, j)));
            z(i, j) = s;
        }
    return z;
}

double determinant(const Field& f, const FMatrix& x)
{
    if(x.rows != x.cols)
        throw std::invalid_argument("determinant of a non-square matrix");
    int n = x.rows;
    if(n == 1)
        return x(0, 0);
    double det = 0.0;
    for(int c = 0; c < n; ++c) {
        FMatrix minor(n - 1, n - 1);
        for(int i = 1; i < n; ++i)
            for(int j = 0, jj = 0; j < n; ++j) {
                if(j == c)
                    continue;
                minor(i - 1, jj++) = x(i, j);
            }
        double term = f.mul(x(0, c), determinant(f, minor));
        det = (c % 2 == 0) ? f.add(det, term) : f.sub(det, term);
    }
    return det;
}

double matrix_distance(const Field& f, const FMatrix& x, const FMatrix& y)
{
    double d = 0.0;
    for(std::size_t i = 0; i < x.a.size(); ++i)
        d = std::max(d, f.abs(f.sub(x.a[i], y.a[i])));
    return d;
}

PhiPoint zero_point(const RepSpace& rep)
{
    PhiPoint p;
    p.m = rep.m;
    p.entries.assign(std::size_t(rep.dim()), 0.0);
    return p;
}

double phi_norm(const RepSpace& rep, std::span<const double> x)
{
    double n = 0.0;
    for(int i = 0; i < rep.rows(); ++i)
        n = std::max(n, norm(rep.field, x.subspan(std::size_t(i) * rep.m, rep.m)));
    return n;
}

PhiPoint PhiCloud::get(std::size_t i) const
{
    PhiPoint p;
    p.m = rep.m;
    auto s = point(i);
    p.entries.assign(s.begin(), s.end());
    return p;
}

namespace {

double binomial(const Field& f, int n, int k)
{
    // Pascal's rule keeps the p-adic case exact.
    std::vector<double> row(std::size_t(n) + 1, 0.0);
    row[0] = 1.0;
    for(int i = 1; i <= n; ++i)
        for(int j = i; j >= 1; --j)
            row[j] = f.add(row[j], row[j - 1]);
    return row[k];
}

} // namespace

FMatrix u_matrix(const Field& f, double r, int d)
{
    FMatrix u(d + 1, d + 1);
    for(int i = 0; i <= d; ++i) {
        double power = 1.0;
        for(int j = i; j >= 0; --j) {
            u(j, i) = f.mul(binomial(f, i, j), power);
            power = f.mul(power, r);
        }
    }
    return u;
}

FMatrix a_matrix(const Field& f, int t, int d)
{
    FMatrix a(d + 1, d + 1);
    for(int i = 0; i <= d; ++i)
        a(i, i) = f.unif_pow(-t * (d - 2 * i));
    return a;
}

FMatrix a_matrix_cleared(const Field& f, int t, int d)
{
    FMatrix a(d + 1, d + 1);
    int shift = std::abs(t) * d;
    for(int i = 0; i <= d; ++i)
        a(i, i) = f.unif_pow(shift - t * (d - 2 * i));
    return a;
}

PhiPoint apply_group(const RepSpace& rep, const FMatrix& g, const PhiPoint& x)
{
    if(g.rows != rep.rows() || g.cols != rep.rows())
        throw std::invalid_argument("apply_group: matrix size does not match d+1");
    const Field& f = rep.field;
    PhiPoint y = zero_point(rep);
    for(int i = 0; i < rep.rows(); ++i)
        for(int l = 0; l < rep.rows(); ++l) {
            double gil = g(i, l);
            if(gil == 0.0)
                continue;
            for(int c = 0; c < rep.m; ++c)
                y.at(i, c) = f.add(y.at(i, c), f.mul(gil, x.at(l, c)));
        }
    return y;
}

PhiCloud apply_group(const FMatrix& g, const PhiCloud& theta)
{
    const RepSpace& rep = theta.rep;
    if(g.rows != rep.rows() || g.cols != rep.rows())
        throw std::invalid_argument("apply_group: matrix size does not match d+1");
    const Field& f = rep.field;
    PhiCloud out{rep, std::vector<double>(theta.data.size(), 0.0)};
    const int rows = rep.rows(), m = rep.m, dim = rep.dim();
    for(std::size_t n = 0; n < theta.size(); ++n) {
        const double* x = theta.data.data() + n * dim;
        double* y = out.data.data() + n * dim;
        for(int i = 0; i < rows; ++i)
            for(int l = 0; l < rows; ++l) {
                double gil = g(i, l);
                if(gil == 0.0)
                    continue;
                for(int c = 0; c < m; ++c)
                    y[i * m + c] = f.add(y[i * m + c], f.mul(gil, x[l * m + c]));
            }
    }
    return out;
}

FVector pi_plus(const RepSpace& rep, const PhiPoint& x)
{
    auto r = x.row(0);
    (void)rep;
    return FVector{std::vector<double>(r.begin(), r.end())};
}

std::vector<double> pi_zero(const RepSpace& rep, const PhiPoint& x)
{
    if(rep.d != 2)
        throw WrongDegree("pi_zero is defined for d = 2 only");
    return std::vector<double>(x.entries.begin(), x.entries.begin() + 2 * rep.m);
}

BoxDirection make_direction(const Field& f, const FVector& u, int k)
{
    BoxDirection dir;
    dir.k = k;
    if(f.is_real()) {
        double n = norm(f, u);
        if(n == 0.0)
            throw DependentInput("box direction must be nonzero");
        dir.u = scale_vector(f, std::exp(-double(k)) / n, u);
        return dir;
    }
    int vmin = f.precision();
    for(double x : u.coords)
        vmin = std::min(vmin, f.valuation(x));
    if(vmin >= f.precision())
        throw DependentInput("box direction must be nonzero");
    FVector unit = u;
    for(auto& x : unit.coords) {
        auto r = std::int64_t(x);
        for(int i = 0; i < vmin; ++i)
            r /= f.prime();
        x = double(r);
    }
    dir.u = scale_vector(f, f.unif_pow(k), unit);
    return dir;
}

double log_box_covering_number(const RepSpace& rep, const RepBox& box, ScaleIndex k)
{
    double logq = std::log(rep.field.q());
    double s = 0.0;
    for(const auto& dir : box.dirs)
        s += std::max(k.k - dir.k, 0) * logq;
    return s * rep.rows();
}

double box_covering_number(const RepSpace& rep, const RepBox& box, ScaleIndex k)
{
    if(rep.field.is_padic()) {
        double n = 1.0;
        for(const auto& dir : box.dirs)
            for(int i = 0; i < std::max(k.k - dir.k, 0) * rep.rows(); ++i)
                n *= rep.field.q();
        return n;
    }
    return std::exp(log_box_covering_number(rep, box, k));
}

std::vector<double> solve_linear(const Field& f, const FMatrix& b, std::span<const double> y)
{
    int n = b.rows;
    FMatrix a = b;
    std::vector<double> rhs(y.begin(), y.end());
    for(int c = 0; c < n; ++c) {
        int piv = -1;
        if(f.is_real()) {
            double best = 0.0;
            for(int r = c; r < n; ++r)
                if(std::fabs(a(r, c)) > best) {
                    best = std::fabs(a(r, c));
                    piv = r;
                }
            if(best < 1e-14)
                piv = -1;
        }
        else {
            for(int r = c; r < n; ++r)
                if(f.valuation(a(r, c)) == 0) {
                    piv = r;
                    break;
                }
        }
        if(piv < 0)
            throw DependentInput("solve_linear: singular system");
        if(piv != c) {
            for(int j = 0; j < n; ++j)
                std::swap(a(c, j), a(piv, j));
            std::swap(rhs[c], rhs[piv]);
        }
        double inv = f.is_real() ? 1.0 / a(c, c) : f.inverse_unit(a(c, c));
        for(int r = 0; r < n; ++r) {
            if(r == c)
                continue;
            double factor = f.mul(a(r, c), inv);
            if(factor == 0.0)
                continue;
            for(int j = 0; j < n; ++j)
                a(r, j) = f.sub(a(r, j), f.mul(factor, a(c, j)));
            rhs[r] = f.sub(rhs[r], f.mul(factor, rhs[c]));
        }
        for(int j = 0; j < n; ++j)
            a(c, j) = f.mul(a(c, j), inv);
        rhs[c] = f.mul(rhs[c], inv);
    }
    return rhs;
}

BoxFrame::BoxFrame(const Field& f, int m, const std::vector<BoxDirection>& dirs) : field_(f), m_(m)
{
    for(const auto& dir : dirs)
        radii_.push_back(f.scale(dir.k));
    if(f.is_real()) {
        std::vector<std::vector<double>> basis;
        auto add_orth = [&](std::vector<double> v) {
            for(const auto& b : basis) {
                double c = 0.0;
                for(int i = 0; i < m; ++i)
                    c += v[i] * b[i];
                for(int i = 0; i < m; ++i)
                    v[i] -= c * b[i];
            }
            double n = 0.0;
            for(double x : v)
                n += x * x;
            n = std::sqrt(n);
            if(n < 1e-9)
                return false;
            for(auto& x : v)
                x /= n;
            basis.push_back(std::move(v));
            return true;
        };
        for(const auto& dir : dirs)
            if(!add_orth(dir.u.coords))
                throw DependentInput("box directions are not independent");
        for(int c = 0; c < m && int(basis.size()) < m; ++c) {
            std::vector<double> e(m, 0.0);
            e[c] = 1.0;
            add_orth(e);
        }
        frame_ = std::move(basis);
        return;
    }
    // Padic: basis = unit-scaled directions completed by standard vectors,
    // invertible mod p; frame_ holds the rows of its inverse.
    std::vector<std::vector<double>> cols;
    for(const auto& dir : dirs) {
        int vmin = f.precision();
        for(double x : dir.u.coords)
            vmin = std::min(vmin, f.valuation(x));
        std::vector<double> unit(dir.u.coords);
        for(auto& x : unit) {
            auto r = std::int64_t(x);
            for(int i = 0; i < vmin; ++i)
                r /= f.prime();
            x = double(r);
        }
        cols.push_back(std::move(unit));
    }
    auto independent = [&](const std::vector<std::vector<double>>& cs) {
        std::vector<FVector> vs;
        for(const auto& c : cs)
            vs.push_back(FVector{c});
        return is_orthogonal(f, vs);
    };
    if(!independent(cols))
        throw DependentInput("box directions are not orthogonal mod p");
    for(int c = 0; c < m && int(cols.size()) < m; ++c) {
        std::vector<double> e(m, 0.0);
        e[c] = 1.0;
        cols.push_back(e);
        if(!independent(cols))
            cols.pop_back();
    }
    FMatrix b(m, m);
    for(int j = 0; j < m; ++j)
        for(int i = 0; i < m; ++i)
            b(i, j) = cols[j][i];
    frame_.assign(m, std::vector<double>(m, 0.0));
    for(int l = 0; l < m; ++l) {
        std::vector<double> e(m, 0.0);
        e[l] = 1.0;
        auto x = solve_linear(f, b, e);
        for(int j = 0; j < m; ++j)
            frame_[j][l] = x[j];
    }
}

double BoxFrame::row_distance(std::span<const double> y) const
{
    const Field& f = field_;
    double dist = 0.0;
    if(f.is_real()) {
        double comp2 = 0.0;
        for(std::size_t j = 0; j < frame_.size(); ++j) {
            double c = 0.0;
            for(int i = 0; i < m_; ++i)
                c += frame_[j][i] * y[i];
            if(j < radii_.size())
                dist = std::max(dist, std::fabs(c) - radii_[j]);
            else
                comp2 += c * c;
        }
        return std::max(dist, std::sqrt(comp2));
    }
    for(std::size_t j = 0; j < frame_.size(); ++j) {
        double c = 0.0;
        for(int i = 0; i < m_; ++i)
            c = f.add(c, f.mul(frame_[j][i], y[i]));
        double a = f.abs(c);
        if(j < radii_.size() && a <= radii_[j] * (1.0 + 1e-12))
            continue;
        dist = std::max(dist, a);
    }
    return dist;
}

std::vector<double> BoxFrame::coordinates(std::span<const double> y) const
{
    const Field& f = field_;
    std::vector<double> out(frame_.size(), 0.0);
    for(std::size_t j = 0; j < frame_.size(); ++j) {
        double c = 0.0;
        for(int i = 0; i < m_; ++i)
            c = f.add(c, f.mul(frame_[j][i], y[i]));
        out[j] = c;
    }
    return out;
}

double box_distance(const RepSpace& rep, const RepBox& box, const BoxFrame& frame, std::span<const double> x)
{
    const Field& f = rep.field;
    std::vector<double> y(rep.m);
    double dist = 0.0;
    for(int i = 0; i < rep.rows(); ++i) {
        for(int c = 0; c < rep.m; ++c)
            y[c] = f.sub(x[i * rep.m + c], box.base.at(i, c));
        dist = std::max(dist, frame.row_distance(y));
    }
    return dist;
}

double box_distance(const RepSpace& rep, const RepBox& box, std::span<const double> x)
{
    BoxFrame frame(rep.field, rep.m, box.dirs);
    return box_distance(rep, box, frame, x);
}

std::vector<std::size_t> box_nhd_indices(const PhiCloud& theta, const RepBox& box, double radius)
{
    BoxFrame frame(theta.rep.field, theta.rep.m, box.dirs);
    std::vector<std::size_t> idx;
    for(std::size_t n = 0; n < theta.size(); ++n)
        if(box_distance(theta.rep, box, frame, theta.point(n)) <= radius)
            idx.push_back(n);
    return idx;
}

PhiCloud box_nhd_filter(const PhiCloud& theta, const RepBox& box, double radius)
{
    PhiCloud out{theta.rep, {}};
    for(auto n : box_nhd_indices(theta, box, radius))
        out.push(theta.point(n));
    return out;
}

std::string format_scalar(const Field& f, double x)
{
    char buf[64];
    if(f.is_padic())
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(x));
    else
        std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_cloud_csv(std::ostream& os, const PhiCloud& cloud, const std::vector<double>* weights)
{
    const auto& rep = cloud.rep;
    bool first = true;
    for(int i = 0; i < rep.rows(); ++i)
        for(int c = 0; c < rep.m; ++c) {
            os << (first ? "" : ",") << "w" << i << "_c" << c;
            first = false;
        }
    if(weights)
        os << ",weight";
    os << "\r\n";
    for(std::size_t n = 0; n < cloud.size(); ++n) {
        auto x = cloud.point(n);
        for(std::size_t j = 0; j < x.size(); ++j)
            os << (j ? "," : "") << format_scalar(rep.field, x[j]);
        if(weights)
            os << "," << csv_double((*weights)[n]);
        os << "\r\n";
    }
}

PhiCloud read_cloud_csv(std::istream& is, const RepSpace& rep, std::vector<double>* weights)
{
    auto next_line = [&](std::string& line) {
        if(!std::getline(is, line))
            return false;
        if(!line.empty() && line.back() == '\r')
            line.pop_back();
        return true;
    };
    std::string line;
    if(!next_line(line))
        throw std::runtime_error("cloud csv: missing header row");
    const int dim = rep.dim();
    int header_cols = int(std::count(line.begin(), line.end(), ',')) + 1;
    bool has_weight = line.size() >= 6 && line.compare(line.size() - 6, 6, "weight") == 0;
    if(header_cols != dim + (has_weight ? 1 : 0))
        throw std::runtime_error("cloud csv: header has " + std::to_string(header_cols) + " columns, expected " +
                                 std::to_string(dim + (has_weight ? 1 : 0)));
    PhiCloud cloud;
    cloud.rep = rep;
    while(next_line(line)) {
        if(line.empty())
            continue;
        std::stringstream ss(line);
        std::string cell;
        int col = 0;
        while(std::getline(ss, cell, ',')) {
            double v = std::stod(cell);
            if(col < dim)
                cloud.data.push_back(v);
            else if(has_weight && weights)
                weights->push_back(v);
            ++col;
        }
        if(col != header_cols)
            throw std::runtime_error("cloud csv: wrong column count in row '" + line + "'");
    }
    return cloud;
}

} // namespace eqlab
