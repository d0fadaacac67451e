#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "autocal/calibration_loss.hpp"
#include "autocal/param_design.hpp"
#include "autocal/random.hpp"

namespace autocal {

struct McmcConfig {
    std::size_t n_chains = 200;
    std::size_t n_samples_per_chain = 8000;
    std::size_t burn_in = 5000;
    std::size_t thin = 10;
    double init_split = 0.5;  // fraction of chains started at design rows
    std::uint64_t seed = 0;
    double target_acceptance = 0.234;

    void validate() const;
    std::size_t retained_per_chain() const { return (n_samples_per_chain - burn_in) / thin; }
};

/// Unnormalized log density over R^dim; -inf marks points outside the support.
struct SamplerTarget {
    std::size_t dim = 0;
    std::function<double(const Eigen::VectorXd&)> log_density;
};

/// Retained draws of several chains, stored chain after chain.
struct ChainSet {
    Eigen::MatrixXd draws;  // (n_chains * per_chain) x dim
    std::size_t n_chains = 0;
    std::size_t per_chain = 0;
    std::vector<double> acceptance_rates;  // after burn-in (whole run when burn_in = 0)
    std::vector<double> proposal_scales;   // final global scale per chain

    std::vector<std::size_t> chain_ids() const;
};

/// Chain c draws its start from init(c, rng) and is retried up to 10 times
/// while the log density there is not finite.
using ChainInit = std::function<Eigen::VectorXd(std::size_t chain, Rng& rng)>;

/// Random-walk Metropolis with a diagonal Gaussian proposal per chain. During
/// burn-in the global scale follows a Robbins-Monro recursion toward the
/// target acceptance rate and the per-coordinate scales are re-estimated from
/// the chain over doubling windows; both are frozen afterwards. Each chain
/// uses its own stream derived from (seed, chain index).
ChainSet sample_chains(const SamplerTarget& target, const ChainInit& init, const Eigen::VectorXd& initial_scale,
                       const McmcConfig& config);

struct PosteriorSamples {
    std::vector<std::string> columns;  // parameter names then field keys
    std::size_t dim_theta = 0;
    Eigen::MatrixXd draws;  // theta in physical units, then s^2
    std::size_t n_chains = 0;
    std::size_t per_chain = 0;
    std::vector<double> acceptance_rates;

    std::vector<std::size_t> chain_ids() const;
    std::size_t size() const { return static_cast<std::size_t>(draws.rows()); }
    /// Rows = 16%, 50%, 84% quantiles; one column per draw column.
    Eigen::MatrixXd quantiles() const;

    void save(const std::filesystem::path& stem) const;
    static PosteriorSamples load(const std::filesystem::path& stem);
};

/// Samples the joint posterior over (theta, s^2) in canonical theta and
/// log s^2, including the Jacobian of the log transform.
PosteriorSamples run_chains(const LossState& state, const DesignMatrix& design, const McmcConfig& config);

/// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> values, double q);

/// Split-chain potential scale reduction factor per column. Needs at least 2
/// chains with at least 10 draws each.
Eigen::VectorXd rhat(const Eigen::MatrixXd& draws, std::size_t n_chains, std::size_t per_chain);
Eigen::VectorXd rhat(const PosteriorSamples& samples);

struct Histogram1D {
    double lower = 0.0;
    double upper = 1.0;
    std::vector<std::size_t> counts;
};

struct Histogram2D {
    std::size_t x = 0, y = 0;  // column indices
    Histogram1D x_axis, y_axis;  // edges only; counts unused
    Eigen::MatrixXi counts;      // bins x bins, row = x bin
};

/// Fixed-bin histograms of one sample view: every column, and every pair of
/// parameter columns.
struct HistogramView {
    std::vector<Histogram1D> marginals;
    std::vector<Histogram2D> pairs;
};

struct PairwiseSummary {
    HistogramView sampled;  // over the sampled range of each column
    HistogramView bounds;   // over the parameter bounds ([0, max] for scales)
    Eigen::MatrixXd quantiles;
    std::vector<std::pair<std::string, Eigen::VectorXd>> markers;  // reference points, physical
};

Histogram1D histogram(const Eigen::VectorXd& values, double lower, double upper, std::size_t bins);

PairwiseSummary pairwise_summaries(const PosteriorSamples& samples, const ParameterSpace& space,
                                   std::vector<std::pair<std::string, Eigen::VectorXd>> markers = {},
                                   std::size_t bins = 40);

/// CSV with one row per column: quantiles, mean, sd and split R-hat.
std::string posterior_summary_csv(const PosteriorSamples& samples);

}  // namespace autocal
