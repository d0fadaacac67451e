#include "autocal/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "autocal/csv.hpp"
#include "autocal/error.hpp"
#include "autocal/matrix_io.hpp"
#include "autocal/parallel.hpp"

namespace autocal {

void McmcConfig::validate() const {
    if (n_chains == 0) throw InputError("need at least one chain");
    if (thin == 0) throw InputError("thin must be at least 1");
    if (burn_in >= n_samples_per_chain)
        throw InputError(fmt::format("burn-in ({}) must be shorter than the chain ({})", burn_in, n_samples_per_chain));
    if (!(init_split >= 0.0 && init_split <= 1.0)) throw InputError("init_split must lie in [0, 1]");
    if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) throw InputError("target acceptance must lie in (0, 1)");
}

std::vector<std::size_t> ChainSet::chain_ids() const {
    std::vector<std::size_t> ids;
    ids.reserve(n_chains * per_chain);
    for (std::size_t c = 0; c < n_chains; ++c) ids.insert(ids.end(), per_chain, c);
    return ids;
}

std::vector<std::size_t> PosteriorSamples::chain_ids() const {
    return ChainSet{Eigen::MatrixXd(), n_chains, per_chain, {}, {}}.chain_ids();
}

namespace {

constexpr int kMaxInitAttempts = 11;  // first try plus 10 reinitializations
constexpr std::size_t kFirstWindow = 50;

struct ChainResult {
    Eigen::MatrixXd draws;
    double acceptance = 0.0;
    double scale = 0.0;
};

ChainResult run_one_chain(const SamplerTarget& target, const ChainInit& init, const Eigen::VectorXd& initial_scale,
                          const McmcConfig& config, std::size_t chain) {
    Rng rng(derive_seed(config.seed, chain));
    const auto dim = static_cast<Eigen::Index>(target.dim);

    Eigen::VectorXd x;
    double logp = -std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < kMaxInitAttempts; ++attempt) {
        x = init(chain, rng);
        if (x.size() != dim) throw InputError("chain initializer returned the wrong dimension");
        logp = target.log_density(x);
        if (std::isfinite(logp)) break;
    }
    if (!std::isfinite(logp))
        throw NumericalError(fmt::format("chain {}: log density not finite at any of {} initial points", chain,
                                         kMaxInitAttempts));

    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd sigma = initial_scale;
    double log_lambda = std::log(2.38 / std::sqrt(static_cast<double>(dim)));

    // Doubling adaptation windows inside burn-in.
    std::size_t window_start = std::min(kFirstWindow, config.burn_in);
    std::size_t window_end = std::min(2 * window_start, config.burn_in);
    if (config.burn_in - window_end < window_end - window_start) window_end = config.burn_in;
    Eigen::VectorXd w_mean = Eigen::VectorXd::Zero(dim), w_m2 = Eigen::VectorXd::Zero(dim);
    std::size_t w_count = 0, rm_step = 0;

    ChainResult out;
    out.draws.resize(static_cast<Eigen::Index>(config.retained_per_chain()), dim);
    std::size_t accepted_after = 0, accepted_total = 0;
    Eigen::Index kept = 0;
    Eigen::VectorXd proposal(dim);
    for (std::size_t t = 0; t < config.n_samples_per_chain; ++t) {
        const double lambda = std::exp(log_lambda);
        for (Eigen::Index i = 0; i < dim; ++i) proposal[i] = x[i] + lambda * sigma[i] * normal(rng);
        const double logq = target.log_density(proposal);
        double accept_prob = 0.0;
        if (std::isfinite(logq)) accept_prob = logq >= logp ? 1.0 : std::exp(logq - logp);
        if (uniform01(rng) < accept_prob) {
            x = proposal;
            logp = logq;
            ++accepted_total;
            if (t >= config.burn_in) ++accepted_after;
        }

        if (t < config.burn_in) {
            ++rm_step;
            log_lambda += (accept_prob - config.target_acceptance) / std::pow(static_cast<double>(rm_step), 0.6);
            if (t >= window_start) {
                ++w_count;
                const Eigen::VectorXd delta = x - w_mean;
                w_mean += delta / static_cast<double>(w_count);
                w_m2 += delta.cwiseProduct(x - w_mean);
            }
            if (t + 1 == window_end) {
                if (w_count > 1) {
                    const Eigen::VectorXd var = w_m2 / static_cast<double>(w_count - 1);
                    for (Eigen::Index i = 0; i < dim; ++i)
                        if (var[i] > 0.0 && std::isfinite(var[i])) sigma[i] = std::sqrt(var[i]);
                    rm_step = 0;
                }
                window_start = window_end;
                window_end = std::min(window_start + 2 * w_count, config.burn_in);
                if (config.burn_in - window_end < window_end - window_start) window_end = config.burn_in;
                w_mean.setZero();
                w_m2.setZero();
                w_count = 0;
            }
        } else if ((t - config.burn_in + 1) % config.thin == 0) {
            out.draws.row(kept++) = x.transpose();
        }
    }
    const std::size_t after = config.n_samples_per_chain - config.burn_in;
    out.acceptance = config.burn_in > 0 ? static_cast<double>(accepted_after) / static_cast<double>(after)
                                        : static_cast<double>(accepted_total) / static_cast<double>(config.n_samples_per_chain);
    out.scale = std::exp(log_lambda);
    return out;
}

}  // namespace

ChainSet sample_chains(const SamplerTarget& target, const ChainInit& init, const Eigen::VectorXd& initial_scale,
                       const McmcConfig& config) {
    config.validate();
    if (target.dim == 0 || !target.log_density) throw InputError("sampler target is empty");
    if (static_cast<std::size_t>(initial_scale.size()) != target.dim || !(initial_scale.array() > 0.0).all())
        throw InputError("initial proposal scales must be positive, one per dimension");

    std::vector<ChainResult> results(config.n_chains);
    parallel_for(config.n_chains, [&](std::size_t c) { results[c] = run_one_chain(target, init, initial_scale, config, c); });

    ChainSet set;
    set.n_chains = config.n_chains;
    set.per_chain = config.retained_per_chain();
    set.draws.resize(static_cast<Eigen::Index>(set.n_chains * set.per_chain), static_cast<Eigen::Index>(target.dim));
    for (std::size_t c = 0; c < config.n_chains; ++c) {
        set.draws.middleRows(static_cast<Eigen::Index>(c * set.per_chain), static_cast<Eigen::Index>(set.per_chain)) =
            results[c].draws;
        set.acceptance_rates.push_back(results[c].acceptance);
        set.proposal_scales.push_back(results[c].scale);
    }
    return set;
}

PosteriorSamples run_chains(const LossState& state, const DesignMatrix& design, const McmcConfig& config) {
    config.validate();
    const auto& space = state.surrogate().space();
    if (!(design.space() == space)) throw InputError("design and surrogate use different parameter spaces");
    const auto d = static_cast<Eigen::Index>(space.dim());
    const auto P = static_cast<Eigen::Index>(state.num_fields());
    const bool fixed = state.fixed_scales().has_value();
    const Eigen::Index dim = fixed ? d : d + P;

    SamplerTarget target;
    target.dim = static_cast<std::size_t>(dim);
    target.log_density = [&](const Eigen::VectorXd& x) {
        const Eigen::VectorXd z = x.head(d);
        if ((z.array().abs() > 1.0).any()) return -std::numeric_limits<double>::infinity();
        if (fixed) return state.objective_from_errors(state.field_error_canonical(z), *state.fixed_scales(), Estimator::MAP);
        const Eigen::VectorXd u = x.tail(P);
        const Eigen::VectorXd s_sq = u.array().exp();
        if (!s_sq.allFinite() || !(s_sq.array() > 0.0).all()) return -std::numeric_limits<double>::infinity();
        return state.objective_from_errors(state.field_error_canonical(z), s_sq, Estimator::MAP) + u.sum();
    };

    const auto from_design = static_cast<std::size_t>(std::llround(config.init_split * static_cast<double>(config.n_chains)));
    const Eigen::MatrixXd design_z = design.canonical();
    ChainInit init = [&](std::size_t chain, Rng& rng) {
        Eigen::VectorXd z(d);
        if (chain < from_design && design_z.rows() > 0) {
            const auto row = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(design_z.rows()));
            z = design_z.row(row).transpose();
        } else {
            for (Eigen::Index i = 0; i < d; ++i) z[i] = 2.0 * uniform01(rng) - 1.0;
        }
        Eigen::VectorXd x(dim);
        x.head(d) = z;
        if (!fixed) x.tail(P) = state.profile_s(space.from_canonical(z), Estimator::MAP).array().log();
        return x;
    };
    Eigen::VectorXd scale = Eigen::VectorXd::Constant(dim, 0.05);

    const ChainSet set = sample_chains(target, init, scale, config);

    PosteriorSamples out;
    out.columns = space.names();
    for (Eigen::Index p = 0; p < P; ++p) out.columns.push_back(state.obs().schema()->field(static_cast<std::size_t>(p)).key());
    out.dim_theta = space.dim();
    out.n_chains = set.n_chains;
    out.per_chain = set.per_chain;
    out.acceptance_rates = set.acceptance_rates;
    out.draws.resize(set.draws.rows(), d + P);
    for (Eigen::Index r = 0; r < set.draws.rows(); ++r) {
        out.draws.row(r).head(d) = space.from_canonical(set.draws.row(r).head(d).transpose()).transpose();
        if (fixed)
            out.draws.row(r).tail(P) = state.fixed_scales()->transpose();
        else
            out.draws.row(r).tail(P) = set.draws.row(r).tail(P).array().exp();
    }
    return out;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InputError("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw InputError("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Eigen::MatrixXd PosteriorSamples::quantiles() const {
    if (draws.rows() == 0) throw InputError("no draws");
    Eigen::MatrixXd q(3, draws.cols());
    for (Eigen::Index c = 0; c < draws.cols(); ++c) {
        std::vector<double> v(draws.col(c).data(), draws.col(c).data() + draws.rows());
        q(0, c) = quantile(v, 0.16);
        q(1, c) = quantile(v, 0.50);
        q(2, c) = quantile(v, 0.84);
    }
    return q;
}

void PosteriorSamples::save(const std::filesystem::path& stem) const {
    write_f64(stem, draws,
              {{"columns", columns},
               {"dim_theta", dim_theta},
               {"n_chains", n_chains},
               {"per_chain", per_chain},
               {"acceptance_rates", acceptance_rates}});
}

PosteriorSamples PosteriorSamples::load(const std::filesystem::path& stem) {
    nlohmann::json side;
    PosteriorSamples s;
    s.draws = read_f64(stem, &side);
    try {
        s.columns = side.at("columns").get<std::vector<std::string>>();
        s.dim_theta = side.at("dim_theta").get<std::size_t>();
        s.n_chains = side.at("n_chains").get<std::size_t>();
        s.per_chain = side.at("per_chain").get<std::size_t>();
        s.acceptance_rates = side.at("acceptance_rates").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("malformed sample sidecar: {}", e.what()));
    }
    if (s.columns.size() != static_cast<std::size_t>(s.draws.cols()) ||
        s.n_chains * s.per_chain != static_cast<std::size_t>(s.draws.rows()))
        throw InputError("sample sidecar does not match the draws");
    return s;
}

Eigen::VectorXd rhat(const Eigen::MatrixXd& draws, std::size_t n_chains, std::size_t per_chain) {
    if (n_chains < 2) throw InputError("split R-hat needs at least 2 chains");
    if (per_chain < 10) throw InputError("split R-hat needs at least 10 draws per chain");
    if (static_cast<std::size_t>(draws.rows()) != n_chains * per_chain) throw InputError("draw count mismatch");
    const std::size_t half = per_chain / 2;
    const std::size_t M = 2 * n_chains;
    const auto N = static_cast<double>(half);
    Eigen::VectorXd out(draws.cols());
    for (Eigen::Index c = 0; c < draws.cols(); ++c) {
        Eigen::VectorXd means(static_cast<Eigen::Index>(M)), vars(static_cast<Eigen::Index>(M));
        for (std::size_t k = 0; k < n_chains; ++k) {
            const auto base = static_cast<Eigen::Index>(k * per_chain);
            const Eigen::Index starts[2] = {base, base + static_cast<Eigen::Index>(per_chain - half)};
            for (int h = 0; h < 2; ++h) {
                const auto seg = draws.col(c).segment(starts[h], static_cast<Eigen::Index>(half));
                const double mu = seg.mean();
                const auto j = static_cast<Eigen::Index>(2 * k + static_cast<std::size_t>(h));
                means[j] = mu;
                vars[j] = (seg.array() - mu).square().sum() / (N - 1.0);
            }
        }
        const double grand = means.mean();
        const double B = N * (means.array() - grand).square().sum() / static_cast<double>(M - 1);
        const double W = vars.mean();
        if (W <= 0.0) {
            out[c] = B <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
            continue;
        }
        const double var_plus = (N - 1.0) / N * W + B / N;
        out[c] = std::sqrt(var_plus / W);
    }
    return out;
}

Eigen::VectorXd rhat(const PosteriorSamples& samples) { return rhat(samples.draws, samples.n_chains, samples.per_chain); }

Histogram1D histogram(const Eigen::VectorXd& values, double lower, double upper, std::size_t bins) {
    if (bins == 0) throw InputError("histogram needs at least one bin");
    if (!(upper > lower)) {
        lower -= 0.5;
        upper += 0.5;
    }
    Histogram1D h{lower, upper, std::vector<std::size_t>(bins, 0)};
    const double width = (upper - lower) / static_cast<double>(bins);
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (!(v >= lower && v <= upper)) continue;
        auto b = static_cast<std::size_t>((v - lower) / width);
        h.counts[std::min(b, bins - 1)]++;
    }
    return h;
}

namespace {

std::size_t bin_of(double v, const Histogram1D& h, std::size_t bins) {
    const double width = (h.upper - h.lower) / static_cast<double>(bins);
    return std::min(static_cast<std::size_t>((v - h.lower) / width), bins - 1);
}

HistogramView make_view(const Eigen::MatrixXd& draws, std::size_t dim_theta, const std::vector<std::pair<double, double>>& ranges,
                        std::size_t bins) {
    HistogramView view;
    for (Eigen::Index c = 0; c < draws.cols(); ++c) {
        const auto& [lo, hi] = ranges[static_cast<std::size_t>(c)];
        view.marginals.push_back(histogram(draws.col(c), lo, hi, bins));
    }
    for (std::size_t i = 0; i < dim_theta; ++i)
        for (std::size_t j = i + 1; j < dim_theta; ++j) {
            Histogram2D h;
            h.x = i;
            h.y = j;
            h.x_axis = view.marginals[i];
            h.y_axis = view.marginals[j];
            h.x_axis.counts.clear();
            h.y_axis.counts.clear();
            h.counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(bins));
            for (Eigen::Index r = 0; r < draws.rows(); ++r) {
                const double a = draws(r, static_cast<Eigen::Index>(i)), b = draws(r, static_cast<Eigen::Index>(j));
                if (!(a >= h.x_axis.lower && a <= h.x_axis.upper && b >= h.y_axis.lower && b <= h.y_axis.upper)) continue;
                h.counts(static_cast<Eigen::Index>(bin_of(a, h.x_axis, bins)), static_cast<Eigen::Index>(bin_of(b, h.y_axis, bins)))++;
            }
            view.pairs.push_back(std::move(h));
        }
    return view;
}

}  // namespace

PairwiseSummary pairwise_summaries(const PosteriorSamples& samples, const ParameterSpace& space,
                                   std::vector<std::pair<std::string, Eigen::VectorXd>> markers, std::size_t bins) {
    if (samples.draws.rows() == 0) throw InputError("pairwise summaries need at least one draw");
    if (samples.dim_theta != space.dim()) throw InputError("samples and parameter space disagree");
    const auto cols = static_cast<std::size_t>(samples.draws.cols());
    std::vector<std::pair<double, double>> sampled(cols), bounded(cols);
    for (std::size_t c = 0; c < cols; ++c) {
        const auto col = samples.draws.col(static_cast<Eigen::Index>(c));
        sampled[c] = {col.minCoeff(), col.maxCoeff()};
        if (c < samples.dim_theta)
            bounded[c] = {space.lower()[static_cast<Eigen::Index>(c)], space.upper()[static_cast<Eigen::Index>(c)]};
        else
            bounded[c] = {0.0, col.maxCoeff()};
    }
    PairwiseSummary s;
    s.sampled = make_view(samples.draws, samples.dim_theta, sampled, bins);
    s.bounds = make_view(samples.draws, samples.dim_theta, bounded, bins);
    s.quantiles = samples.quantiles();
    for (const auto& [name, point] : markers)
        if (static_cast<std::size_t>(point.size()) != space.dim())
            throw InputError(fmt::format("marker '{}' has the wrong dimension", name));
    s.markers = std::move(markers);
    return s;
}

std::string posterior_summary_csv(const PosteriorSamples& samples) {
    const Eigen::MatrixXd q = samples.quantiles();
    Eigen::VectorXd r = Eigen::VectorXd::Constant(samples.draws.cols(), std::nan(""));
    if (samples.n_chains >= 2 && samples.per_chain >= 10) r = rhat(samples);
    csv::Table t{{"Column", "q16", "q50", "q84", "mean", "sd", "rhat"}};
    for (Eigen::Index c = 0; c < samples.draws.cols(); ++c) {
        const auto col = samples.draws.col(c);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().mean());
        t.push_back({samples.columns[static_cast<std::size_t>(c)], csv::format_double(q(0, c)), csv::format_double(q(1, c)),
                     csv::format_double(q(2, c)), csv::format_double(mean), csv::format_double(sd),
                     csv::format_double(r[c])});
    }
    return csv::to_string(t);
}

}  // namespace autocal
