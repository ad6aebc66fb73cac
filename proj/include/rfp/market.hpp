#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace rfp {

struct GaussianMixture {
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> std_devs;

    // Throws DataError on length mismatch, weights off the simplex or negative std devs.
    // Zero std devs are allowed and give point masses.
    void validate() const;
    double mean() const;
    double stddev() const;
    double cdf(double x) const;
    double sample(std::mt19937_64& rng) const;
};

std::vector<double> sample_market_returns(const GaussianMixture& gmm, std::size_t n, std::uint64_t seed);

struct GmmFit {
    GaussianMixture model;
    std::vector<double> log_likelihood;  // one entry per EM iteration
};

// Expectation-maximization. Requires returns.size() >= 10 * m.
GmmFit fit_gmm(const std::vector<double>& returns, int m, std::uint64_t seed, int max_iterations = 1000,
               double tolerance = 1e-10, double min_std = 1e-6);

struct PWLTransform {
    double kink = 0.029;
    double slope_below = 2.5;
    double slope_above = 0.75;

    void validate() const;
};

double transform_inflation(double z, const PWLTransform& t);
double inverse_transform(double y, const PWLTransform& t);

// x_{t+1} = mu + A (x_t - mu) + eps,  eps ~ N(0, noise_cov); x = (treasury, transformed inflation)
struct VARModel {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d coefficient = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d noise_cov = Eigen::Matrix2d::Zero();

    void validate() const;
    double spectral_radius() const;
};

VARModel fit_var(const std::vector<Eigen::Vector2d>& series);

// Returns x_1 .. x_horizon (x0 excluded).
std::vector<Eigen::Vector2d> simulate_var(const VARModel& model, const Eigen::Vector2d& x0, int horizon,
                                          std::mt19937_64& rng);
std::vector<Eigen::Vector2d> simulate_var(const VARModel& model, const Eigen::Vector2d& x0, int horizon,
                                          std::uint64_t seed);

Eigen::Matrix2d steady_state_cov(const VARModel& model);
Eigen::Vector2d sample_steady_state(const VARModel& model, std::mt19937_64& rng);

// mu + A^h (x_t - mu) for each h.
std::vector<Eigen::Vector2d> forecast_var(const VARModel& model, const Eigen::Vector2d& x_t,
                                          const std::vector<int>& horizons);

double portfolio_real_return(double market_r, double treasury_r, double inflation, double stock_weight);

struct MarketModels {
    GaussianMixture gmm;
    PWLTransform transform;
    VARModel var;
    double initial_treasury = 0.0395;
    double initial_inflation = 0.012;  // untransformed
    double market_forecast = 0.12;
};

struct RatePath {
    std::vector<double> treasury;
    std::vector<double> inflation;  // untransformed
};

// Simulates `years` steps from the transformed state x0 and maps inflation back.
RatePath simulate_rates(const MarketModels& models, const Eigen::Vector2d& x0, int years, std::mt19937_64& rng);

// The preset's initial (treasury, inflation) mapped into VAR coordinates.
Eigen::Vector2d initial_state(const MarketModels& models);

MarketModels load_market_models(const std::filesystem::path& path);
void save_market_models(const MarketModels& models, const std::filesystem::path& path);
std::string market_models_json(const MarketModels& models);

} // namespace rfp
