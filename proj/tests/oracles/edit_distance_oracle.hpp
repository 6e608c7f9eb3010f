#ifndef STRUCTOSCOPE_TESTS_EDIT_DISTANCE_ORACLE_HPP
#define STRUCTOSCOPE_TESTS_EDIT_DISTANCE_ORACLE_HPP

#include <algorithm>
#include <cstddef>
#include <vector>

namespace oracle {

// Plain recursion over edit scripts: drop the first element of a, of b, or
// of both (substitution / match). Equal heads are matched directly, which
// never loses optimality. Exponential; only for short inputs.
inline int brute_edit_distance(const std::vector<int>& a, std::size_t i, const std::vector<int>& b, std::size_t j)
{
    if (i == a.size()) {
        return static_cast<int>(b.size() - j);
    }
    if (j == b.size()) {
        return static_cast<int>(a.size() - i);
    }
    if (a[i] == b[j]) {
        return brute_edit_distance(a, i + 1, b, j + 1);
    }
    const int del = brute_edit_distance(a, i + 1, b, j);
    const int ins = brute_edit_distance(a, i, b, j + 1);
    const int sub = brute_edit_distance(a, i + 1, b, j + 1);
    return 1 + std::min({del, ins, sub});
}

inline int brute_edit_distance(const std::vector<int>& a, const std::vector<int>& b)
{
    return brute_edit_distance(a, 0, b, 0);
}

} // namespace oracle

#endif
