#ifndef STRUCTOSCOPE_TESTS_BETA_ORACLE_HPP
#define STRUCTOSCOPE_TESTS_BETA_ORACLE_HPP

#include <boost/math/distributions/beta.hpp>

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

// W1 between two Beta laws: integral over [0,1] of |F1 - F2|, composite
// Simpson rule.
inline double beta_w1(double a1, double b1, double a2, double b2, int intervals = 20000)
{
    const boost::math::beta_distribution<double> p(a1, b1);
    const boost::math::beta_distribution<double> q(a2, b2);
    auto f = [&](double x) { return std::abs(boost::math::cdf(p, x) - boost::math::cdf(q, x)); };
    const double h = 1.0 / intervals;
    double s = f(0.0) + f(1.0);
    for (int i = 1; i < intervals; ++i) {
        s += (i % 2 == 1 ? 4.0 : 2.0) * f(i * h);
    }
    return s * h / 3.0;
}

// Inverse-CDF sampling with the standard library generator.
inline std::vector<double> beta_samples(double a, double b, std::size_t n, std::uint64_t seed)
{
    const boost::math::beta_distribution<double> dist(a, b);
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> out(n);
    for (auto& x : out) {
        double v = u(eng);
        while (v <= 0.0) {
            v = u(eng);
        }
        x = boost::math::quantile(dist, v);
    }
    return out;
}

inline double beta_pdf(double a, double b, double x)
{
    return boost::math::pdf(boost::math::beta_distribution<double>(a, b), x);
}

} // namespace oracle

#endif
