#pragma once

#include "eqlab/projection.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace eqlab {

class BudgetExceeded : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct SumProdConfig {
    double alpha_hat = 1.0;
    double eps1 = 0.35;
    double eps2 = 0.1;
    double C = 2.0;
    double c = 0.5;
    int k = 6;
    int r_samples = 200;
    std::size_t pair_budget = 100000000;
    bool strict = false;
    int threads = 1;

    double eps() const { return std::max(eps1, eps2); }
};

struct SumCount {
    std::size_t count = 0;
    bool exact = true;
    std::size_t pairs_used = 0;
};

// N_delta({a + r b}).  All pairs are streamed when |A||B| <= budget;
// otherwise `budget` pairs are drawn uniformly with replacement and the
// (lower-bound) count of the sample is returned with exact = false.
SumCount sum_covering(const VecCloud& a, const VecCloud& b, double r, int k, std::size_t budget = 100000000,
                      bool strict = false, std::uint64_t sample_seed = 0);

struct ExcRow {
    double r = 0.0;
    SumCount sum;
    double threshold = 0.0;
    bool exceptional = false;
};

struct ExcResult {
    std::vector<ExcRow> rows;
    double threshold = 0.0;
    double fraction = 0.0;
    Interval ci;
    double measure_threshold = 0.0; // delta^{eps2}
    bool large = false;             // fraction > delta^{eps2}
    bool hypothesis_ok = true;      // both N_delta(Theta_i) >= delta^{-alpha_hat}
    bool all_exact = true;
};

// Exceptional iff N_delta(Theta_1 + r Theta_2) < delta^{-alpha_hat - eps1};
// ties count as not exceptional.
ExcResult exceptional_measure(const VecCloud& a, const VecCloud& b, const SumProdConfig& cfg, Rng& rng);
void write_exc_csv(std::ostream& os, const Field& f, const ExcResult& e);

struct CommonBox {
    FVector base1;
    FVector base2;
    std::vector<BoxDirection> dirs;
    BoxCheck check1;
    BoxCheck check2;
};

struct CommonBoxSearch {
    std::optional<CommonBox> box;
    std::string reason;
};

CommonBoxSearch find_common_box(const VecCloud& a, const VecCloud& b, const SumProdConfig& cfg);

// A VecCloud seen as a PhiCloud with a single weight row (d = 0).
PhiCloud as_phi_cloud(const VecCloud& v);

} // namespace eqlab
