#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eqlab {

class DependentInput : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class PrecisionExceeded : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class InvalidField : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

using Rng = std::mt19937_64;

enum class FieldKind { Real, Padic };

// Scale ladders. The native ladder is delta = q^-k; the dyadic override
// (delta = 2^-k) only exists for the real field.
enum class ScaleBase { Native, Dyadic };

// A local field: R, or Q_p truncated to Z/p^K.
//
// Elements of either field are carried as `double`.  Real elements are the
// numbers themselves; p-adic elements are exact integer residues in
// [0, p^K), which is why p^K is capped below 2^31 (products stay exact in
// 64-bit integers).
class Field {
  public:
    static Field real();
    static Field padic(int p, int K);

    // `field=real` / `field=padic:p=3,K=12` (the value part after `=`).
    static Field parse(const std::string& spec);
    std::string to_string() const;

    FieldKind kind() const { return kind_; }
    bool is_real() const { return kind_ == FieldKind::Real; }
    bool is_padic() const { return kind_ == FieldKind::Padic; }
    int prime() const { return p_; }
    int precision() const { return K_; }
    std::int64_t modulus() const { return mod_; }
    double q() const { return q_; }

    // |uniformizer| = 1/q. Real: e^-1. Padic: p.
    double uniformizer() const;

    double zero() const { return 0.0; }
    double one() const { return 1.0; }
    double from_int(std::int64_t n) const;
    double add(double a, double b) const;
    double sub(double a, double b) const;
    double mul(double a, double b) const;
    double neg(double a) const;
    // uniformizer^n for n >= 0 (Real also accepts n < 0).
    double unif_pow(int n) const;

    double abs(double x) const;
    // Padic valuation of a residue; K for 0.
    int valuation(double x) const;
    // Unit part u with x = p^v u (Padic only, x != 0).
    double unit_part(double x) const;
    // Multiplicative inverse of a p-adic unit modulo p^K.
    double inverse_unit(double u) const;

    // Real: |a - b| within tol; Padic: exact.
    bool equal(double a, double b, double tol = 1e-12) const;

    double scale(int k, ScaleBase base = ScaleBase::Native) const;

    bool operator==(const Field& o) const
    {
        return kind_ == o.kind_ && p_ == o.p_ && K_ == o.K_;
    }

  private:
    FieldKind kind_ = FieldKind::Real;
    int p_ = 0;
    int K_ = 0;
    std::int64_t mod_ = 0;
    double q_ = 0.0;
};

bool is_prime(int n);

// Scale index k, delta = q^-k.
struct ScaleIndex {
    int k = 0;
};

// Checked constructor: Padic requires k <= K.
ScaleIndex make_scale(const Field& f, int k);

// A vector in F^m.
struct FVector {
    std::vector<double> coords;

    std::size_t size() const { return coords.size(); }
    double& operator[](std::size_t i) { return coords[i]; }
    double operator[](std::size_t i) const { return coords[i]; }
};

// Euclidean norm for R, max norm for Q_p.
double norm(const Field& f, std::span<const double> v);
inline double norm(const Field& f, const FVector& v) { return norm(f, std::span<const double>(v.coords)); }

FVector scale_vector(const Field& f, double c, const FVector& v);

double sample_unit_scalar(Rng& rng, const Field& f);
FVector sample_unit_ball(Rng& rng, const Field& f, int m);

// Real: Gram-Schmidt (orthogonal, not normalized).  Padic: valuation-pivoted
// elimination; the output vectors reduce to independent vectors mod p after
// dividing out their norms, so ||sum c_i u_i|| = max |c_i| ||u_i||.
std::vector<FVector> orthogonalize(const Field& f, const std::vector<FVector>& vs);

// Is the family orthogonal in the sense above (Real to tolerance tol).
bool is_orthogonal(const Field& f, const std::vector<FVector>& vs, double tol = 1e-9);

} // namespace eqlab
