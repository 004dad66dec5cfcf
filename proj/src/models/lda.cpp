#include "megphone/models/train.hpp"

#include "models/common.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <cmath>

namespace megphone {

TrainedModel train_lda(const Eigen::MatrixXd& X, const std::vector<int>& y, const LdaParams& params) {
    const auto counts = detail::check_training_data(X, y, "lda");
    if (counts[0] < 2 || counts[1] < 2) throw DataError("lda: each class needs at least 2 samples");
    const double s = params.shrinkage;
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("lda: shrinkage must lie in [0, 1]");
    const Eigen::Index n = X.rows(), p = X.cols();

    Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(p), mu1 = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y[static_cast<std::size_t>(i)] == 1) mu1 += X.row(i).transpose();
        else mu0 += X.row(i).transpose();
    }
    mu0 /= static_cast<double>(counts[0]);
    mu1 /= static_cast<double>(counts[1]);

    Eigen::MatrixXd Z(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        Z.row(i) = X.row(i) - (y[static_cast<std::size_t>(i)] == 1 ? mu1 : mu0).transpose();

    // Sigma = Z'Z / (n - 2); shrunk: c I + a Z'Z.
    const double dof = static_cast<double>(n - 2);
    const double trace = Z.squaredNorm() / dof;
    const double c = s * trace / static_cast<double>(p);
    const double a = (1.0 - s) / dof;
    const Eigen::VectorXd diff = mu1 - mu0;
    Eigen::VectorXd w;

    if (p <= n) {
        Eigen::MatrixXd sigma = a * (Z.transpose() * Z);
        sigma.diagonal().array() += c;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
        const double max_pivot = ldlt.vectorD().cwiseAbs().maxCoeff();
        if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 1e-12 * max_pivot))
            throw NumericError("lda: shrunk covariance is singular; use shrinkage > 0");
        w = ldlt.solve(diff);
    } else {
        // Woodbury: (cI + a Z'Z)^-1 v = (v - a Z'(cI + a ZZ')^-1 Z v) / c.
        if (!(c > 0.0))
            throw NumericError("lda: covariance is singular with " + std::to_string(p) + " features and " +
                               std::to_string(n) + " samples; use shrinkage > 0");
        Eigen::MatrixXd inner = a * (Z * Z.transpose());
        inner.diagonal().array() += c;
        Eigen::LLT<Eigen::MatrixXd> llt(inner);
        if (llt.info() != Eigen::Success) throw NumericError("lda: ill-conditioned covariance");
        const Eigen::VectorXd zd = Z * diff;
        w = (diff - a * (Z.transpose() * llt.solve(zd))) / c;
    }
    if (!w.allFinite()) throw NumericError("lda: non-finite discriminant");

    const double bias = -0.5 * w.dot(mu0 + mu1) + std::log(static_cast<double>(counts[1])) -
                        std::log(static_cast<double>(counts[0]));

    TrainedModel model;
    model.type = "lda";
    model.n_features = p;
    model.params = LinearParams{std::move(w), bias};
    return model;
}

}  // namespace megphone
