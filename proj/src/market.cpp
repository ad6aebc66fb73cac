#include "rfp/market.hpp"

#include "rfp/errors.hpp"

#include "json.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace rfp {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310002;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double log_normal_pdf(double x, double mu, double sd) {
    const double z = (x - mu) / sd;
    return -0.5 * z * z - std::log(sd * kSqrt2Pi);
}

// Symmetric square root factor L with L L' = S for PSD S (tolerates singular S).
Eigen::Matrix2d psd_factor(const Eigen::Matrix2d& S) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(S);
    const Eigen::Vector2d d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal();
}

} // namespace

void GaussianMixture::validate() const {
    if (weights.empty() || weights.size() != means.size() || weights.size() != std_devs.size())
        throw DataError("mixture: weights, means and std_devs must have the same nonzero length");
    double sum = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (!(weights[k] >= 0.0)) throw DataError("mixture: negative weight");
        if (!(std_devs[k] >= 0.0)) throw DataError("mixture: negative standard deviation");
        sum += weights[k];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DataError("mixture: weights must sum to one");
}

double GaussianMixture::mean() const {
    double m = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) m += weights[k] * means[k];
    return m;
}

double GaussianMixture::stddev() const {
    const double mu = mean();
    double v = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const double d = means[k] - mu;
        v += weights[k] * (std_devs[k] * std_devs[k] + d * d);
    }
    return std::sqrt(v);
}

double GaussianMixture::cdf(double x) const {
    double c = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (std_devs[k] > 0.0) c += weights[k] * normal_cdf((x - means[k]) / std_devs[k]);
        else c += x >= means[k] ? weights[k] : 0.0;
    }
    return c;
}

double GaussianMixture::sample(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = u(rng);
    std::size_t k = 0;
    double acc = weights[0];
    while (r >= acc && k + 1 < weights.size()) acc += weights[++k];
    std::normal_distribution<double> z(0.0, 1.0);
    return means[k] + std_devs[k] * z(rng);
}

std::vector<double> sample_market_returns(const GaussianMixture& gmm, std::size_t n, std::uint64_t seed) {
    gmm.validate();
    std::mt19937_64 rng(seed);
    std::vector<double> out(n);
    for (auto& x : out) x = gmm.sample(rng);
    return out;
}

GmmFit fit_gmm(const std::vector<double>& x, int m, std::uint64_t seed, int max_iterations, double tolerance,
               double min_std) {
    if (m < 1) throw DataError("fit_gmm: need at least one component");
    if (x.size() < 10 * static_cast<std::size_t>(m))
        throw DataError("fit_gmm: need at least 10 observations per component");
    const std::size_t n = x.size();
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);

    GaussianMixture g;
    g.weights.assign(static_cast<std::size_t>(m), 1.0 / m);
    g.std_devs.assign(static_cast<std::size_t>(m), std::max(sd, min_std));
    // k-means++ style seeding
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    g.means.push_back(x[pick(rng)]);
    std::vector<double> d2(n);
    while (g.means.size() < static_cast<std::size_t>(m)) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (double c : g.means) best = std::min(best, (x[i] - c) * (x[i] - c));
            d2[i] = best;
        }
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        if (total <= 0.0) {
            g.means.push_back(x[pick(rng)]);
            continue;
        }
        std::discrete_distribution<std::size_t> dd(d2.begin(), d2.end());
        g.means.push_back(x[dd(rng)]);
    }

    GmmFit fit;
    std::vector<double> resp(n * static_cast<std::size_t>(m));
    std::vector<double> lp(static_cast<std::size_t>(m));
    for (int it = 0; it < max_iterations; ++it) {
        // E step
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int k = 0; k < m; ++k) {
                const auto kk = static_cast<std::size_t>(k);
                lp[kk] = std::log(std::max(g.weights[kk], 1e-300)) + log_normal_pdf(x[i], g.means[kk], g.std_devs[kk]);
                mx = std::max(mx, lp[kk]);
            }
            double s = 0.0;
            for (int k = 0; k < m; ++k) s += std::exp(lp[static_cast<std::size_t>(k)] - mx);
            ll += mx + std::log(s);
            for (int k = 0; k < m; ++k)
                resp[i * m + k] = std::exp(lp[static_cast<std::size_t>(k)] - mx) / s;
        }
        fit.log_likelihood.push_back(ll);
        // M step
        for (int k = 0; k < m; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            double nk = 0.0, s1 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                nk += resp[i * m + k];
                s1 += resp[i * m + k] * x[i];
            }
            if (nk <= 0.0) continue;
            const double mu = s1 / nk;
            double s2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) s2 += resp[i * m + k] * (x[i] - mu) * (x[i] - mu);
            g.weights[kk] = nk / static_cast<double>(n);
            g.means[kk] = mu;
            g.std_devs[kk] = std::max(std::sqrt(s2 / nk), min_std);
        }
        const auto sz = fit.log_likelihood.size();
        if (sz >= 2 && std::abs(fit.log_likelihood[sz - 1] - fit.log_likelihood[sz - 2]) <=
                           tolerance * std::max(1.0, std::abs(fit.log_likelihood[sz - 1])))
            break;
    }
    const double wsum = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
    for (auto& w : g.weights) w /= wsum;
    fit.model = g;
    return fit;
}

void PWLTransform::validate() const {
    if (!(slope_below > 0.0 && slope_above > 0.0)) throw DataError("inflation transform slopes must be positive");
}

double transform_inflation(double z, const PWLTransform& t) {
    return z <= t.kink ? (z - t.kink) * t.slope_below + t.kink : (z - t.kink) * t.slope_above + t.kink;
}

double inverse_transform(double y, const PWLTransform& t) {
    return y <= t.kink ? (y - t.kink) / t.slope_below + t.kink : (y - t.kink) / t.slope_above + t.kink;
}

double VARModel::spectral_radius() const {
    Eigen::EigenSolver<Eigen::Matrix2d> es(coefficient, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

void VARModel::validate() const {
    if ((noise_cov - noise_cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw DataError("VAR noise covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(noise_cov);
    if (es.eigenvalues().minCoeff() < -1e-14) throw DataError("VAR noise covariance must be PSD");
}

VARModel fit_var(const std::vector<Eigen::Vector2d>& series) {
    if (series.size() < 3) throw DataError("fit_var: need at least 3 observations");
    VARModel m;
    for (const auto& x : series) m.mean += x;
    m.mean /= static_cast<double>(series.size());
    // Least squares for x_{t+1} - mu = c + A (x_t - mu); the intercept absorbs the
    // finite-sample gap between the lagged means and mu.
    const std::size_t nres = series.size() - 1;
    Eigen::Vector2d xbar = Eigen::Vector2d::Zero(), ybar = Eigen::Vector2d::Zero();
    for (std::size_t t = 0; t < nres; ++t) {
        xbar += series[t] - m.mean;
        ybar += series[t + 1] - m.mean;
    }
    xbar /= static_cast<double>(nres);
    ybar /= static_cast<double>(nres);
    Eigen::Matrix2d Sxx = Eigen::Matrix2d::Zero(), Syx = Eigen::Matrix2d::Zero();
    for (std::size_t t = 0; t < nres; ++t) {
        const Eigen::Vector2d a = series[t] - m.mean - xbar, b = series[t + 1] - m.mean - ybar;
        Sxx += a * a.transpose();
        Syx += b * a.transpose();
    }
    const double scale = Sxx.cwiseAbs().maxCoeff();
    if (!(scale > 1e-300)) throw DataError("fit_var: regressor covariance is singular");
    Eigen::FullPivLU<Eigen::Matrix2d> lu(Sxx / scale);
    lu.setThreshold(1e-10);
    if (lu.rank() < 2) throw DataError("fit_var: regressor covariance is singular");
    m.coefficient = Syx * Sxx.inverse();
    const Eigen::Vector2d c = ybar - m.coefficient * xbar;
    for (std::size_t t = 0; t < nres; ++t) {
        const Eigen::Vector2d r = (series[t + 1] - m.mean) - c - m.coefficient * (series[t] - m.mean);
        m.noise_cov += r * r.transpose();
    }
    m.noise_cov /= static_cast<double>(nres);
    m.noise_cov = (0.5 * (m.noise_cov + m.noise_cov.transpose())).eval();
    return m;
}

std::vector<Eigen::Vector2d> simulate_var(const VARModel& model, const Eigen::Vector2d& x0, int horizon,
                                          std::mt19937_64& rng) {
    if (horizon < 1) throw DataError("simulate_var: horizon must be positive");
    const Eigen::Matrix2d L = psd_factor(model.noise_cov);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<Eigen::Vector2d> path(static_cast<std::size_t>(horizon));
    Eigen::Vector2d x = x0;
    for (auto& out : path) {
        const double z0 = z(rng), z1 = z(rng);
        x = model.mean + model.coefficient * (x - model.mean) + L * Eigen::Vector2d(z0, z1);
        out = x;
    }
    return path;
}

std::vector<Eigen::Vector2d> simulate_var(const VARModel& model, const Eigen::Vector2d& x0, int horizon,
                                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return simulate_var(model, x0, horizon, rng);
}

Eigen::Matrix2d steady_state_cov(const VARModel& model) {
    if (model.spectral_radius() >= 1.0) throw DataError("steady state requires spectral radius below one");
    const Eigen::Matrix2d& A = model.coefficient;
    // vec(A S A') = kron(A, A) vec(S) with column-major vec
    Eigen::Matrix4d K;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) K.block<2, 2>(2 * i, 2 * j) = A(i, j) * A;
    const Eigen::Vector4d rhs = Eigen::Map<const Eigen::Vector4d>(model.noise_cov.data());
    const Eigen::Vector4d v = (Eigen::Matrix4d::Identity() - K).fullPivLu().solve(rhs);
    Eigen::Matrix2d S = Eigen::Map<const Eigen::Matrix2d>(v.data());
    return 0.5 * (S + S.transpose());
}

Eigen::Vector2d sample_steady_state(const VARModel& model, std::mt19937_64& rng) {
    const Eigen::Matrix2d L = psd_factor(steady_state_cov(model));
    std::normal_distribution<double> z(0.0, 1.0);
    const double z0 = z(rng), z1 = z(rng);
    return model.mean + L * Eigen::Vector2d(z0, z1);
}

std::vector<Eigen::Vector2d> forecast_var(const VARModel& model, const Eigen::Vector2d& x_t,
                                          const std::vector<int>& horizons) {
    std::vector<Eigen::Vector2d> out;
    out.reserve(horizons.size());
    for (int h : horizons) {
        if (h < 1) throw DataError("forecast horizon must be at least 1");
        Eigen::Matrix2d P = Eigen::Matrix2d::Identity();
        for (int k = 0; k < h; ++k) P = P * model.coefficient;
        out.push_back(model.mean + P * (x_t - model.mean));
    }
    return out;
}

RatePath simulate_rates(const MarketModels& models, const Eigen::Vector2d& x0, int years, std::mt19937_64& rng) {
    const auto path = simulate_var(models.var, x0, years, rng);
    RatePath out;
    out.treasury.reserve(path.size());
    out.inflation.reserve(path.size());
    for (const auto& x : path) {
        out.treasury.push_back(x[0]);
        out.inflation.push_back(inverse_transform(x[1], models.transform));
    }
    return out;
}

Eigen::Vector2d initial_state(const MarketModels& models) {
    return {models.initial_treasury, transform_inflation(models.initial_inflation, models.transform)};
}

double portfolio_real_return(double market_r, double treasury_r, double inflation, double w) {
    return w * market_r + (1.0 - w) * treasury_r - inflation;
}

MarketModels load_market_models(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model preset " + path.string());
    MarketModels m;
    try {
        const auto j = nlohmann::json::parse(in);
        const auto& g = j.at("gmm");
        m.gmm.weights = g.at("weights").get<std::vector<double>>();
        m.gmm.means = g.at("means").get<std::vector<double>>();
        m.gmm.std_devs = g.at("std_devs").get<std::vector<double>>();
        // published weights are rounded; renormalize onto the simplex
        const double s = std::accumulate(m.gmm.weights.begin(), m.gmm.weights.end(), 0.0);
        if (!(s > 0.0)) throw DataError("model preset: mixture weights sum to zero");
        for (auto& w : m.gmm.weights) w /= s;
        const auto& t = j.at("inflation_transform");
        m.transform = {t.at("kink").get<double>(), t.at("slope_below").get<double>(), t.at("slope_above").get<double>()};
        const auto& v = j.at("var");
        const auto mu = v.at("mean").get<std::vector<double>>();
        const auto A = v.at("coefficient").get<std::vector<std::vector<double>>>();
        const auto S = v.at("noise_cov").get<std::vector<std::vector<double>>>();
        if (mu.size() != 2 || A.size() != 2 || S.size() != 2 || A[0].size() != 2 || A[1].size() != 2 ||
            S[0].size() != 2 || S[1].size() != 2)
            throw DataError("model preset: VAR blocks must be 2-dimensional");
        m.var.mean << mu[0], mu[1];
        m.var.coefficient << A[0][0], A[0][1], A[1][0], A[1][1];
        m.var.noise_cov << S[0][0], S[0][1], S[1][0], S[1][1];
        if (j.contains("initial_1962")) {
            m.initial_treasury = j["initial_1962"].at("treasury").get<double>();
            m.initial_inflation = j["initial_1962"].at("inflation").get<double>();
        }
        m.market_forecast = j.value("market_forecast", m.market_forecast);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("model preset " + path.string() + ": " + e.what());
    }
    m.gmm.validate();
    m.transform.validate();
    m.var.validate();
    return m;
}

std::string market_models_json(const MarketModels& m) {
    nlohmann::json j;
    j["gmm"] = {{"weights", m.gmm.weights}, {"means", m.gmm.means}, {"std_devs", m.gmm.std_devs}};
    j["inflation_transform"] = {
        {"kink", m.transform.kink}, {"slope_below", m.transform.slope_below}, {"slope_above", m.transform.slope_above}};
    const auto& A = m.var.coefficient;
    const auto& S = m.var.noise_cov;
    j["var"] = {{"mean", {m.var.mean[0], m.var.mean[1]}},
                {"coefficient", {{A(0, 0), A(0, 1)}, {A(1, 0), A(1, 1)}}},
                {"noise_cov", {{S(0, 0), S(0, 1)}, {S(1, 0), S(1, 1)}}}};
    j["initial_1962"] = {{"treasury", m.initial_treasury}, {"inflation", m.initial_inflation}};
    j["market_forecast"] = m.market_forecast;
    return j.dump(2);
}

void save_market_models(const MarketModels& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model preset " + path.string());
    out << market_models_json(m) << '\n';
}

} // namespace rfp
