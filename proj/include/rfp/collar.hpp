#pragma once

namespace rfp {

enum class OptionKind { put, call };

double standard_normal_cdf(double x);

// European option value under Black-Scholes with continuous compounding.
double black_scholes_price(OptionKind kind, double spot, double strike, double r_f, double sigma, double tenor = 1.0);

// min{(r_min - (1-w) r_f + i) / w, r_f}
double collar_floor(double r_min, double w, double r_f, double inflation);

// Cap C such that the call struck at spot*(1+C) costs as much as the put struck at
// spot*(1+F). Returns +infinity when the put is worthless.
double solve_cap(double floor, double spot, double r_f, double sigma, double tenor = 1.0);

// w * clip(market_r, F, C) + (1-w) * treasury_r - inflation
double collared_return(double market_r, double floor, double cap, double w, double treasury_r, double inflation);

struct CollarConfig {
    bool enabled = false;
    bool floor_from_min_return = false;  // use collar_floor() instead of a fixed floor
    double floor = -0.075;
    double min_return = 0.0;
    double sigma = 0.0;  // 0: use the market model's standard deviation
};

} // namespace rfp
