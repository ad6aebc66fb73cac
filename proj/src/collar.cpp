#include "rfp/collar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rfp {

// erfc from the C library is accurate to a few ulp, well inside 1e-7.
double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double black_scholes_price(OptionKind kind, double S, double K, double r, double sigma, double tenor) {
    if (!(S > 0.0 && K > 0.0 && sigma > 0.0 && tenor > 0.0))
        throw std::invalid_argument("black_scholes_price: spot, strike, sigma and tenor must be positive");
    const double sq = sigma * std::sqrt(tenor);
    const double d1 = (std::log(S / K) + (r + 0.5 * sigma * sigma) * tenor) / sq;
    const double d2 = d1 - sq;
    const double disc = K * std::exp(-r * tenor);
    if (kind == OptionKind::call) return S * standard_normal_cdf(d1) - disc * standard_normal_cdf(d2);
    return disc * standard_normal_cdf(-d2) - S * standard_normal_cdf(-d1);
}

double collar_floor(double r_min, double w, double r_f, double inflation) {
    if (!(w > 0.0)) throw std::invalid_argument("collar_floor: stock weight must be positive");
    return std::min((r_min - (1.0 - w) * r_f + inflation) / w, r_f);
}

double solve_cap(double floor, double spot, double r_f, double sigma, double tenor) {
    const double put = black_scholes_price(OptionKind::put, spot, spot * (1.0 + floor), r_f, sigma, tenor);
    if (!(put > 1e-14 * spot)) return std::numeric_limits<double>::infinity();
    auto call = [&](double K) { return black_scholes_price(OptionKind::call, spot, K, r_f, sigma, tenor); };
    double lo = spot * 1e-6, hi = spot * 2.0;
    if (call(lo) < put) throw std::invalid_argument("solve_cap: floor too high for a self-financing collar");
    while (call(hi) > put) {
        hi *= 2.0;
        if (hi > spot * 1e12) return std::numeric_limits<double>::infinity();
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double c = call(mid);
        if (std::abs(c - put) <= 1e-13 * spot) {
            lo = hi = mid;
            break;
        }
        (c > put ? lo : hi) = mid;
        if (hi - lo <= 1e-15 * hi) break;
    }
    return 0.5 * (lo + hi) / spot - 1.0;
}

double collared_return(double market_r, double floor, double cap, double w, double treasury_r, double inflation) {
    if (cap < floor) throw std::invalid_argument("collared_return: cap below floor");
    return w * std::clamp(market_r, floor, cap) + (1.0 - w) * treasury_r - inflation;
}

} // namespace rfp
