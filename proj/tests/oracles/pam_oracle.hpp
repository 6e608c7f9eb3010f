#ifndef STRUCTOSCOPE_TESTS_PAM_ORACLE_HPP
#define STRUCTOSCOPE_TESTS_PAM_ORACLE_HPP

#include "structoscope/sequence.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace oracle {

inline double assignment_cost(const structoscope::DistanceMatrix& d, const std::vector<std::size_t>& medoids)
{
    double total = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (auto m : medoids) {
            best = std::min(best, d(i, m));
        }
        total += best;
    }
    return total;
}

// Minimum assignment cost over every m-subset of items.
inline double brute_medoid_cost(const structoscope::DistanceMatrix& d, int m)
{
    std::vector<bool> pick(d.n, false);
    std::fill(pick.begin(), pick.begin() + m, true);
    double best = std::numeric_limits<double>::infinity();
    do {
        std::vector<std::size_t> medoids;
        for (std::size_t i = 0; i < d.n; ++i) {
            if (pick[i]) {
                medoids.push_back(i);
            }
        }
        best = std::min(best, assignment_cost(d, medoids));
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return best;
}

// True if no exchange of one medoid with one non-medoid lowers the cost.
inline bool no_improving_swap(const structoscope::DistanceMatrix& d, const std::vector<std::size_t>& medoids,
                              double tol = 1e-9)
{
    const double base = assignment_cost(d, medoids);
    for (std::size_t k = 0; k < medoids.size(); ++k) {
        for (std::size_t h = 0; h < d.n; ++h) {
            if (std::find(medoids.begin(), medoids.end(), h) != medoids.end()) {
                continue;
            }
            auto trial = medoids;
            trial[k] = h;
            if (assignment_cost(d, trial) < base - tol) {
                return false;
            }
        }
    }
    return true;
}

} // namespace oracle

#endif
