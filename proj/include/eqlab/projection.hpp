#pragma once

#include "eqlab/covering.hpp"
#include "eqlab/rep.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace eqlab {

class EmptyCloud : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct ProjConfig {
    double alpha = 1.0;
    double eps = 0.05;
    double C = 2.0;
    double c = 0.5;     // constant in front of the second box display
    int k = 8;          // scale index, delta = q^-k
    int r_samples = 200;
    int anchor_budget = 4;
    int threads = 1;
};

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

// Wilson score interval at z = 1.96.
Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.96);

// Uniform draws from B_1^F, generated sequentially so that parallel
// consumers see the same values regardless of thread count.
std::vector<double> sample_r_values(Rng& rng, const Field& f, int n);

struct ProjRow {
    double r = 0.0;
    std::size_t count = 0;
    double threshold = 0.0;
    bool good = false;
};

struct ProjProfile {
    std::vector<ProjRow> rows;
    double threshold = 0.0;
    double good_fraction = 0.0;
    double exceptional_fraction = 0.0;
    Interval exceptional_ci;
    std::size_t cloud_covering = 0;
    bool hypothesis_ok = true; // N_delta(Theta) >= delta^-alpha
};

// Covering number of pi_plus(u_r Theta) (rows = 1) or pi_zero(u_r Theta)
// (rows = 2) at scale k, without materialising the image.
std::size_t projected_covering(const PhiCloud& theta, double r, int rows, ScaleIndex k);

ProjProfile projection_profile(const PhiCloud& theta, const ProjConfig& cfg, Rng& rng);
void write_profile_csv(std::ostream& os, const Field& f, const ProjProfile& p);

struct TrivialAudit {
    double alpha_used = 0.0; // min(cfg.alpha, log N_delta(Theta) / log(1/delta))
    double zero_threshold = 0.0;
    double plus_threshold = 0.0;
    double zero_failure = 0.0;
    double plus_failure = 0.0;
    std::vector<double> r;
    std::vector<std::size_t> zero_counts;
    std::vector<std::size_t> plus_counts;
};

TrivialAudit trivial_estimate_audit(const PhiCloud& theta, const ProjConfig& cfg, Rng& rng);

// Principal directions of a set of recentred rows in F^m.  `kq` is the
// extent on the ladder, extent = q^-kq (Real: sqrt(3 * variance); Padic: the
// valuation of the elementary divisor).  Sorted by kq ascending.
struct DirectionFit {
    FVector unit;
    double kq = 0.0;
};
std::vector<DirectionFit> fit_directions(const Field& f, int m, const std::vector<double>& rows);

// Per-direction extent (as kq) of `rows` in the frame of the given unit
// directions.
std::vector<double> direction_extents(const Field& f, int m, const std::vector<FVector>& units,
                                      const std::vector<double>& rows);

struct BoxCheck {
    double cover_exponent = 0.0; // log N_delta(V) / log(1/delta)
    double lo = 0.0;
    double hi = 0.0;
    bool display1 = false;
    std::size_t nhd_count = 0;
    double nhd_required = 0.0;
    bool display2 = false;
    bool ok() const { return display1 && display2; }
};

// Both box displays: alpha - C eps <= cover_exponent <= alpha + C eps, and
// N_delta(Theta cap Nhd_{C delta}(box)) >= c * min(delta^{-alpha + C eps},
// delta^{C eps} N_delta(Theta)).
BoxCheck verify_box(const PhiCloud& theta, const RepBox& box, double alpha, double eps, double C, double c, int k,
                    std::size_t theta_covering);

struct BoxSearch {
    std::optional<RepBox> box;
    BoxCheck check;
    int candidates_tried = 0;
    std::string reason;
};

BoxSearch find_representation_box(const PhiCloud& theta, const ProjConfig& cfg);

// count points: base + sum_ij r_ij e_i (x) u_j with |r_ij| <= 1 uniform, plus
// noise uniform in a row ball of radius `noise` (Padic: the ball p^j Z_p^m
// with p^-j <= noise).
PhiCloud planted_box_generator(const RepSpace& rep, const RepBox& box, std::size_t count, double noise, Rng& rng);

// `BOX dir=j radius=q^-k u=(...)` lines.
std::string format_box(const RepSpace& rep, const RepBox& box);

} // namespace eqlab
