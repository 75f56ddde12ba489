#pragma once

#include "eqlab/localfield.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace eqlab {

class WrongDegree : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Dense matrix over a Field (row-major).
struct FMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    FMatrix() = default;
    FMatrix(int r, int c) : rows(r), cols(c), a(std::size_t(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[std::size_t(i) * cols + j]; }
    double operator()(int i, int j) const { return a[std::size_t(i) * cols + j]; }

    static FMatrix identity(int n);
};

FMatrix matmul(const Field& f, const FMatrix& x, const FMatrix& y);
double determinant(const Field& f, const FMatrix& x);
// Max-entry distance (Real) / 0-or-1 exact equality indicator (Padic).
double matrix_distance(const Field& f, const FMatrix& x, const FMatrix& y);

// Phi = Phi_0 (x) F^m with Phi_0 = Sym^d of the standard representation.
struct RepSpace {
    Field field;
    int d = 2;
    int m = 1;

    int rows() const { return d + 1; }
    int dim() const { return (d + 1) * m; }
};

// A (d+1) x m matrix; row i is the e_i component (weight d - 2i).
struct PhiPoint {
    std::vector<double> entries;
    int m = 1;

    double& at(int row, int col) { return entries[std::size_t(row) * m + col]; }
    double at(int row, int col) const { return entries[std::size_t(row) * m + col]; }
    std::span<const double> row(int i) const { return {entries.data() + std::size_t(i) * m, std::size_t(m)}; }
};

PhiPoint zero_point(const RepSpace& rep);
// Max over rows of the row norm.
double phi_norm(const RepSpace& rep, std::span<const double> x);

// Non-owning view of n points of a given dimension over a field.
struct CloudView {
    const Field* field = nullptr;
    int dim = 0;
    std::span<const double> data;

    std::size_t size() const { return dim == 0 ? 0 : data.size() / std::size_t(dim); }
    std::span<const double> point(std::size_t i) const { return data.subspan(i * dim, dim); }
};

// Finite point set in F^m.
struct VecCloud {
    Field field;
    int m = 1;
    std::vector<double> data;

    std::size_t size() const { return data.size() / std::size_t(m); }
    std::span<const double> point(std::size_t i) const { return {data.data() + i * m, std::size_t(m)}; }
    void push(std::span<const double> x) { data.insert(data.end(), x.begin(), x.end()); }
    CloudView view() const { return {&field, m, data}; }
};

struct PhiCloud {
    RepSpace rep;
    std::vector<double> data;

    std::size_t size() const { return data.size() / std::size_t(rep.dim()); }
    std::span<const double> point(std::size_t i) const
    {
        return {data.data() + i * rep.dim(), std::size_t(rep.dim())};
    }
    void push(std::span<const double> x) { data.insert(data.end(), x.begin(), x.end()); }
    void push(const PhiPoint& x) { push(std::span<const double>(x.entries)); }
    PhiPoint get(std::size_t i) const;
    CloudView view() const { return {&rep.field, rep.dim(), data}; }
};

// Sym^d action of [[1, r], [0, 1]] in the monomial basis e_i = x^{d-i} y^i:
// entry (j, i) = C(i, j) r^{i-j} for j <= i.
FMatrix u_matrix(const Field& f, double r, int d);

// diag(unif^{-t(d-2i)}). Padic throws PrecisionExceeded when some exponent is
// negative (i.e. unless t = 0).
FMatrix a_matrix(const Field& f, int t, int d);

// unif^{|t| d} * a_t, which is integral over either field.
FMatrix a_matrix_cleared(const Field& f, int t, int d);

PhiCloud apply_group(const FMatrix& g, const PhiCloud& theta);
PhiPoint apply_group(const RepSpace& rep, const FMatrix& g, const PhiPoint& x);

FVector pi_plus(const RepSpace& rep, const PhiPoint& x);
// Rows 0 and 1 (weights 2 and 0), flattened row-major (2 x m); d must be 2.
std::vector<double> pi_zero(const RepSpace& rep, const PhiPoint& x);

// One direction of a representation box: ||u|| = q^-k.
struct BoxDirection {
    FVector u;
    int k = 0;
};

// v + V with V = { sum_{i,j} r_ij e_i (x) u_j : |r_ij| <= 1 }.
struct RepBox {
    PhiPoint base;
    std::vector<BoxDirection> dirs;
};

// Scales u to norm q^-k (Real: Euclidean; Padic: multiply the unit-scaled
// vector by p^k).
BoxDirection make_direction(const Field& f, const FVector& u, int k);

// prod_j max(rho_j / delta, 1)^{d+1}, on the native ladder.
double box_covering_number(const RepSpace& rep, const RepBox& box, ScaleIndex k);
double log_box_covering_number(const RepSpace& rep, const RepBox& box, ScaleIndex k);

// Orthonormal frame of F^m adapted to a family of orthogonal directions;
// used to measure distance to a box (or to an F^m box, rows = 1).
class BoxFrame {
  public:
    BoxFrame(const Field& f, int m, const std::vector<BoxDirection>& dirs);

    // Distance from a row vector y (already recentred) to { sum r_j u_j }.
    double row_distance(std::span<const double> y) const;
    // Coordinates of y in the frame (directions first, then the complement).
    std::vector<double> coordinates(std::span<const double> y) const;
    const Field& field() const { return field_; }

  private:
    Field field_;
    int m_ = 0;
    std::vector<double> radii_;
    // Real: unit directions followed by an orthonormal complement.
    // Padic: rows of the inverse of the basis matrix [u-bar | e_c].
    std::vector<std::vector<double>> frame_;
};

double box_distance(const RepSpace& rep, const RepBox& box, std::span<const double> x);
double box_distance(const RepSpace& rep, const RepBox& box, const BoxFrame& frame, std::span<const double> x);
PhiCloud box_nhd_filter(const PhiCloud& theta, const RepBox& box, double radius);
std::vector<std::size_t> box_nhd_indices(const PhiCloud& theta, const RepBox& box, double radius);

// Solve B x = y over the field, B invertible (Padic: invertible mod p).
std::vector<double> solve_linear(const Field& f, const FMatrix& b, std::span<const double> y);

// RFC-4180 CSV with a `w{i}_c{j}` header; optional weights add a trailing
// `weight` column.  The field and shape are not stored: the reader takes them.
void write_cloud_csv(std::ostream& os, const PhiCloud& cloud, const std::vector<double>* weights = nullptr);
PhiCloud read_cloud_csv(std::istream& is, const RepSpace& rep, std::vector<double>* weights = nullptr);

std::string format_scalar(const Field& f, double x);

} // namespace eqlab
