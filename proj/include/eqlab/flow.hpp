#pragma once

#include "eqlab/localfield.hpp"

#include <array>
#include <complex>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace eqlab {

class IterationCap : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class NonUnimodular : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// [[a, b], [c, d]]
struct Mat2 {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

    double det() const { return a * d - b * c; }
    bool operator==(const Mat2&) const = default;
};

Mat2 operator*(const Mat2& x, const Mat2& y);
// adj(g) / det(g); exact identity when multiplied by g bitwise equal to it
Mat2 inverse(const Mat2& g);
std::complex<double> mobius(const Mat2& g, std::complex<double> z);

Mat2 u_mat(double r);
Mat2 a_mat(double t); // diag(e^t, e^-t)

struct ReduceResult {
    Mat2 g;     // g * gamma
    Mat2 gamma; // integer entries, det 1
    int iterations = 0;
};

// Right reduction modulo SL2(Z): gamma is chosen so that (g gamma)^-1 . i lies
// in the standard fundamental domain |Re z| <= 1/2, |z| >= 1.
ReduceResult reduce(const Mat2& g);

// The base point of the coset g SL2(Z) in SL2(Z)\H.
std::complex<double> base_point(const Mat2& g);

bool in_fundamental_domain(std::complex<double> z, double tol = 1e-9);

// x = (g_1, g_2, g_3) SL2(Z)^3 with each g_j reduced.
struct GPoint {
    std::array<Mat2, 3> g;
    std::array<bool, 3> reduced{false, false, false};

    std::complex<double> z(int j) const { return base_point(g[j]); }
};

GPoint make_gpoint(const std::array<Mat2, 3>& g);
GPoint identity_point();

// a_T u_r x0: u_r once, then T single a_1 steps, reducing every factor after
// each step.
GPoint arc_point(const GPoint& x0, int T, double r);

// Haar sample: per factor z with density dx dy / y^2 on the fundamental
// domain truncated at height `cap`, and a uniform rotation angle.
GPoint haar_sample(Rng& rng, double cap = 1e4);
double haar_cap_deficit(double cap = 1e4); // lost mass fraction 3 / (pi cap)

// Smooth plateau bump on one factor: 1 where the elliptic radius s <= plateau,
// decaying smoothly to 0 at s = 1, with s^2 = ((x - cx) / rx)^2 + ((y - cy) / ry)^2.
struct Bump {
    int factor = 0;
    double cx = 0.0, cy = 2.0;
    double rx = 0.5, ry = 1.0;
    double plateau = 0.5;

    double operator()(std::complex<double> z) const;
};

struct TestFunction {
    enum class Kind { Constant, Bump, Product } kind = Kind::Constant;
    std::string id = "one";
    std::vector<Bump> bumps; // one for Bump, several (distinct factors) for Product

    double operator()(const GPoint& x) const;
};

TestFunction constant_one();
TestFunction single_bump(std::string id, const Bump& b);
TestFunction product_bump(std::string id, std::vector<Bump> bs);

// bump1 on factor 1, pair12 = psi(z_1) psi(z_2) with psi a wide plateau in y,
// and bump3 on factor 3.  On the diagonal pair12 averages psi^2 rather than
// (int psi)^2, which separates the H-orbit mean from the Haar mean.
std::vector<TestFunction> standard_suite();

// g_j^-1 = u_{c_j} a_{s_j} with irrational c_j, s_j.
GPoint generic_point();

struct Mean {
    double value = 0.0;
    double stderr_ = 0.0;
};

struct Discrepancy {
    Mean arc;
    Mean haar;
    double value = 0.0; // |arc - haar|
};

// r_i = (i + 1/2) / nR, i < nR.
std::vector<double> arc_grid(int nR);

Discrepancy discrepancy(const GPoint& x0, int T, int nR, const TestFunction& phi, int nHaar, Rng& rng,
                        int threads = 1);
// Same, with the arc and Haar samples shared across a suite.
std::vector<Discrepancy> discrepancy_suite(const GPoint& x0, int T, int nR, const std::vector<TestFunction>& suite,
                                           int nHaar, Rng& rng, int threads = 1);

struct SubgroupCandidate {
    enum class Kind { FullDiagonal, PairDiagonal, Ambient } kind = Kind::FullDiagonal;
    int i = 0, j = 1; // PairDiagonal factors

    std::string name() const;
};

// PairDiagonal(i, j): Frobenius distance from g_j^-1 g_i to the integer
// matrices with entries in [-H, H]; FullDiagonal: the larger of the (0,1) and
// (0,2) proxies; Ambient: 0.
double orbit_proximity(const GPoint& x, const SubgroupCandidate& cand, int search_height);

std::vector<SubgroupCandidate> proper_candidates();

struct DichotomyConfig {
    int nR = 2000;
    int nHaar = 20000;
    double a_const = 1.0; // the exponent constant in part (2)
    double k_const = 0.1; // the rate constant in part (1)
    double qhat = std::exp(1.0);
    int tau_window = 2;   // proximity sampled at tau in [T - window, T]
    int proximity_grid = 100;
    int search_height = 10;
    int threads = 1;
};

struct DichotomyReport {
    struct ArcRow {
        double r;
        int tau;
        std::string phi;
        double value;
    };
    struct ProxRow {
        std::string candidate;
        double proxy;
    };
    std::vector<std::string> phi_ids;
    std::vector<Discrepancy> disc;
    double part1_threshold = 0.0; // qhat^{-k R}
    std::vector<bool> part1;      // per phi: discrepancy <= threshold
    std::vector<ProxRow> proximity;
    double min_proximity = 0.0;
    double part2_threshold = 0.0; // T^a qhat^{-2T + a R}
    bool part2 = false;
    std::vector<ArcRow> arc_rows;
    double haar_deficit = 0.0;
};

DichotomyReport dichotomy_report(const GPoint& x0, int T, int R, const std::vector<TestFunction>& suite,
                                 const DichotomyConfig& cfg, Rng& rng);

// RFC-4180 bodies: `r,tau,phi_id,value` and `candidate,proxy`.
void write_arc_csv(std::ostream& os, const DichotomyReport& rep);
void write_proximity_csv(std::ostream& os, const DichotomyReport& rep);
void write_gpoint_csv(std::ostream& os, const std::vector<GPoint>& xs);

} // namespace eqlab
