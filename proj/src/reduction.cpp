#include "autocal/reduction.hpp"

#include <fmt/format.h>

#include "autocal/error.hpp"
#include "autocal/matrix_io.hpp"

namespace autocal {

ReducedBasis fit_pca(const Eigen::MatrixXd& Y, std::size_t k) {
    const auto n = static_cast<std::size_t>(Y.rows());
    const auto m = static_cast<std::size_t>(Y.cols());
    if (n < 2 || k < 1 || k > std::min(n - 1, m))
        throw InputError(fmt::format("number of components k={} must lie in [1, min(n-1, m)] = [1, {}]", k,
                                     n < 2 ? 0 : std::min(n - 1, m)));
    if (!Y.allFinite()) throw InputError("ensemble matrix contains non-finite values");

    ReducedBasis b;
    b.mean = Y.colwise().mean().transpose();
    const Eigen::MatrixXd centred = Y.rowwise() - b.mean.transpose();
    b.total_variance = centred.squaredNorm();

    Eigen::BDCSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto kk = static_cast<Eigen::Index>(k);
    b.singular_values = svd.singularValues().head(kk);
    b.components = svd.matrixV().leftCols(kk).transpose();

    for (Eigen::Index j = 0; j < kk; ++j) {
        Eigen::Index arg = 0;
        b.components.row(j).cwiseAbs().maxCoeff(&arg);
        if (b.components(j, arg) < 0.0) b.components.row(j) *= -1.0;
    }
    b.scores = centred * b.components.transpose();

    b.explained_fraction.resize(kk);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < kk; ++j) {
        acc += b.singular_values[j] * b.singular_values[j];
        b.explained_fraction[j] = b.total_variance > 0.0 ? std::min(1.0, acc / b.total_variance) : 1.0;
    }
    return b;
}

ReducedBasis fit_pca(const EnsembleOutput& ensemble, std::size_t k) { return fit_pca(ensemble.rows(), k); }

Eigen::VectorXd ReducedBasis::reconstruct(const Eigen::VectorXd& scores_row) const {
    if (static_cast<std::size_t>(scores_row.size()) != rank())
        throw InputError(fmt::format("expected {} scores, got {}", rank(), scores_row.size()));
    return mean + components.transpose() * scores_row;
}

Eigen::VectorXd ReducedBasis::project(const Eigen::VectorXd& y) const {
    if (y.size() != mean.size()) throw InputError("projected vector has the wrong length");
    return components * (y - mean);
}

std::vector<std::pair<std::size_t, double>> variance_curve(const ReducedBasis& basis) {
    std::vector<std::pair<std::size_t, double>> out;
    for (Eigen::Index j = 0; j < basis.explained_fraction.size(); ++j)
        out.emplace_back(static_cast<std::size_t>(j + 1), basis.explained_fraction[j]);
    return out;
}

void ReducedBasis::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    write_f64(dir / "mean", mean.transpose());
    write_f64(dir / "components", components);
    write_f64(dir / "scores", scores);
    write_f64(dir / "singular_values", singular_values.transpose(), {{"total_variance", total_variance}});
    write_f64(dir / "explained_fraction", explained_fraction.transpose());
}

ReducedBasis ReducedBasis::load(const std::filesystem::path& dir) {
    ReducedBasis b;
    nlohmann::json side;
    b.mean = read_f64(dir / "mean").row(0).transpose();
    b.components = read_f64(dir / "components");
    b.scores = read_f64(dir / "scores");
    b.singular_values = read_f64(dir / "singular_values", &side).row(0).transpose();
    b.total_variance = side.value("total_variance", 0.0);
    b.explained_fraction = read_f64(dir / "explained_fraction").row(0).transpose();
    if (b.components.cols() != b.mean.size() || b.scores.cols() != b.components.rows() ||
        b.singular_values.size() != b.components.rows())
        throw InputError(fmt::format("{}: inconsistent basis files", dir.string()));
    return b;
}

}  // namespace autocal
