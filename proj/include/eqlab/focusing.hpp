#pragma once

#include "eqlab/projection.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace eqlab {

class ZeroMass : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class PreconditionFailed : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class InvalidMeasure : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Finitely supported measure on Phi: one weight per cloud point.
struct WeightedMeasure {
    PhiCloud cloud;
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    double total() const;
};

// Weights finite and nonnegative, total <= 1, one weight per point.
void validate_measure(const WeightedMeasure& mu);

WeightedMeasure uniform_measure(PhiCloud cloud, double weight);

struct FocusParams {
    double alpha = 3.0;
    double eps = 0.2;               // epsilon'
    double A = std::exp(2.0);       // slack in the covering and mass conditions
    int k1 = 4;                     // delta_1 = q^-k1
    int k2 = 12;                    // delta_2 = q^-k2
    double nhd = 1.0;               // neighbourhood factor: Nhd_{nhd * delta_2}
    double kappa = 0.05;            // negligible budget delta_2^kappa
    double C = 2.0;                 // box search window
    double c = 0.5;
    int anchor_budget = 4;
    int threads = 1;
};

void validate_params(const Field& f, const FocusParams& p);

struct FocusCheck {
    double cover_exponent = 0.0; // log N_{delta_2}(V) / log(delta_1 / delta_2)
    bool almost_filled = false;  // both sides of the covering condition
    double ball_mass = 0.0;      // mu(B_{delta_1}(y))
    double box_mass = 0.0;       // mu(B_{delta_1}(y) cap Nhd(y + v + V))
    double mass_ratio = 0.0;
    double mass_required = 0.0;  // A^-1 (delta_1 / delta_2)^-eps
    bool non_concentrated = false;
    bool focused = false;

    // exact focus only
    double min_small_ball = 0.0; // min over support z of mu(B_{delta_2}(z))
    double small_ball_required = 0.0;
    bool exact = false;
};

// The box is given relative to y: base = v, and the tested set is y + v + V.
FocusCheck is_focused(const WeightedMeasure& mu, const PhiPoint& y, const RepBox& box, const FocusParams& p);
FocusCheck is_exactly_focused(const WeightedMeasure& mu, const PhiPoint& y, const RepBox& box,
                              const FocusParams& p);

struct FocusWitness {
    std::size_t net_index = 0; // position in FocusScan::net
    std::size_t point = 0;     // index of y in the measure
    RepBox box;                // relative to y
    FocusCheck check;
};

struct FocusScan {
    std::vector<std::size_t> net;   // point indices of the greedy delta_1-net
    std::vector<std::size_t> owner; // per point: position in `net` of its net point
    std::vector<FocusWitness> focused;
};

// Greedy delta_1-net in point order.  Each net ball is recentred at y,
// rescaled by 1/delta_1 and searched for a proper (non-ambient) box at
// delta = delta_2 / delta_1, which is then tested with is_focused.
FocusScan scan_focused(const WeightedMeasure& mu, const FocusParams& p);

struct DecompResult {
    WeightedMeasure ip;
    WeightedMeasure fs;
    WeightedMeasure negligible;
    std::vector<int> part; // per input point: 0 ip, 1 fs, 2 negligible
    std::vector<FocusWitness> witnesses;
    double budget = 0.0;
    bool budget_exceeded = false;
};

enum : int { PartIp = 0, PartFs = 1, PartNegligible = 2 };

// Focus at (e^{-2 l} b, b): k1 = b, k2 = b + 2 l on the ladder.  fs takes the
// net balls with a focus witness; the rest is trimmed greedily (heaviest
// b-ball above A b^alpha first) into the negligible part, up to the budget
// q^{-k2 kappa}; ip is what remains.
DecompResult ip_fs_decompose(const WeightedMeasure& mu, ScaleIndex b, int l, const FocusParams& p);

// log(sum of squared cell masses, self-pairs removed) / log(b) on the grid
// at scale k.  An atom has dimension 0; NaN when no two points share a cell.
double collision_dimension(const PhiCloud& cloud, const std::vector<double>& weights, int k);

struct InterpolationRow {
    double r = 0.0;
    double alpha1 = 0.0; // u_r mu at b
    double alpha2 = 0.0; // u_r mu at e^{-2 l} b
    double pushed = 0.0; // a_l u_r mu at b
    double margin = 0.0; // pushed - (2/3 alpha1 + 1/3 alpha2)
    bool ok = false;     // margin >= -tol
};

struct InterpolationAudit {
    std::vector<InterpolationRow> rows;
    double ok_fraction = 0.0;
};

InterpolationAudit interpolation_audit(const WeightedMeasure& mu, int l, int r_samples, ScaleIndex b, Rng& rng,
                                       double tol = 0.2, int threads = 1);

struct MultipleOfThree {
    double alpha_est = 0.0;
    int nearest = 0;
    double gap = 0.0;
    int expected = 0;          // 3 * occupied directions
    bool profile_ok = false;   // occupied directions ~ delta_1, no direction between
};

MultipleOfThree multiple_of_three_audit(const WeightedMeasure& mu, const PhiPoint& y, const RepBox& box,
                                        const FocusParams& p);

// n points uniform on base + V plus row noise, every point of weight w.
WeightedMeasure planted_focus_measure(const RepSpace& rep, const RepBox& box, std::size_t n, double noise,
                                      double w, Rng& rng);

} // namespace eqlab
