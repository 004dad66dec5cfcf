#include "megphone/models/train.hpp"

#include "models/common.hpp"

#include <cmath>
#include <limits>

namespace megphone {

namespace {

constexpr double kTau = 1e-12;

struct SmoSolution {
    Eigen::VectorXd alpha;
    double rho = 0.0;
    long iterations = 0;
};

// libsvm's C-SVC solver: second-order working-set selection (Fan, Chen and Lin 2005).
SmoSolution solve_smo(const Eigen::MatrixXd& K, const std::vector<int>& ys, double C, double eps, long max_iter) {
    const Eigen::Index n = K.rows();
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd G = Eigen::VectorXd::Constant(n, -1.0);
    const auto y = [&](Eigen::Index t) { return static_cast<double>(ys[static_cast<std::size_t>(t)]); };
    const auto Q = [&](Eigen::Index i, Eigen::Index j) { return y(i) * y(j) * K(i, j); };
    const auto at_upper = [&](Eigen::Index t) { return alpha(t) >= C; };
    const auto at_lower = [&](Eigen::Index t) { return alpha(t) <= 0.0; };

    long iter = 0;
    for (;; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        Eigen::Index i = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (y(t) > 0) {
                if (!at_upper(t) && -G(t) >= gmax) gmax = -G(t), i = t;
            } else {
                if (!at_lower(t) && G(t) >= gmax) gmax = G(t), i = t;
            }
        }
        double gmax2 = -std::numeric_limits<double>::infinity();
        double obj_min = std::numeric_limits<double>::infinity();
        Eigen::Index j = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (y(t) > 0) {
                if (at_lower(t)) continue;
                const double grad_diff = gmax + G(t);
                gmax2 = std::max(gmax2, G(t));
                if (grad_diff > 0 && i >= 0) {
                    const double quad = K(i, i) + K(t, t) - 2.0 * y(i) * Q(i, t);
                    const double obj = -grad_diff * grad_diff / (quad > 0 ? quad : kTau);
                    if (obj <= obj_min) obj_min = obj, j = t;
                }
            } else {
                if (at_upper(t)) continue;
                const double grad_diff = gmax - G(t);
                gmax2 = std::max(gmax2, -G(t));
                if (grad_diff > 0 && i >= 0) {
                    const double quad = K(i, i) + K(t, t) + 2.0 * y(i) * Q(i, t);
                    const double obj = -grad_diff * grad_diff / (quad > 0 ? quad : kTau);
                    if (obj <= obj_min) obj_min = obj, j = t;
                }
            }
        }
        if (i < 0 || j < 0 || gmax + gmax2 < eps) break;
        if (iter >= max_iter)
            throw NumericError("svm: SMO did not reach KKT tolerance " + std::to_string(eps) + " within " +
                               std::to_string(max_iter) + " iterations");

        const double old_i = alpha(i), old_j = alpha(j);
        if (y(i) != y(j)) {
            double quad = K(i, i) + K(j, j) + 2.0 * Q(i, j);
            if (quad <= 0) quad = kTau;
            const double delta = (-G(i) - G(j)) / quad;
            const double diff = alpha(i) - alpha(j);
            alpha(i) += delta;
            alpha(j) += delta;
            if (diff > 0) {
                if (alpha(j) < 0) alpha(j) = 0, alpha(i) = diff;
            } else {
                if (alpha(i) < 0) alpha(i) = 0, alpha(j) = -diff;
            }
            if (diff > 0) {
                if (alpha(i) > C) alpha(i) = C, alpha(j) = C - diff;
            } else {
                if (alpha(j) > C) alpha(j) = C, alpha(i) = C + diff;
            }
        } else {
            double quad = K(i, i) + K(j, j) - 2.0 * Q(i, j);
            if (quad <= 0) quad = kTau;
            const double delta = (G(i) - G(j)) / quad;
            const double sum = alpha(i) + alpha(j);
            alpha(i) -= delta;
            alpha(j) += delta;
            if (sum > C) {
                if (alpha(i) > C) alpha(i) = C, alpha(j) = sum - C;
            } else {
                if (alpha(j) < 0) alpha(j) = 0, alpha(i) = sum;
            }
            if (sum > C) {
                if (alpha(j) > C) alpha(j) = C, alpha(i) = sum - C;
            } else {
                if (alpha(i) < 0) alpha(i) = 0, alpha(j) = sum;
            }
        }
        const double d_i = alpha(i) - old_i, d_j = alpha(j) - old_j;
        for (Eigen::Index t = 0; t < n; ++t) G(t) += Q(i, t) * d_i + Q(j, t) * d_j;
    }

    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
    long n_free = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yg = y(t) * G(t);
        if (at_upper(t)) {
            if (y(t) < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (at_lower(t)) {
            if (y(t) > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    SmoSolution out;
    out.alpha = std::move(alpha);
    out.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
    out.iterations = iter;
    return out;
}

double platt_loss(const Eigen::VectorXd& f, const std::vector<double>& target, double A, double B) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        const double fab = f(i) * A + B;
        const double t = target[static_cast<std::size_t>(i)];
        total += fab >= 0 ? t * fab + std::log1p(std::exp(-fab)) : (t - 1.0) * fab + std::log1p(std::exp(fab));
    }
    return total;
}

// Newton fit of P(y = +1 | f) = 1 / (1 + exp(A f + B)) with the regularized
// targets of Lin, Lin and Weng (2007).
std::pair<double, double> fit_platt(const Eigen::VectorXd& f, const std::vector<int>& ys) {
    double n_pos = 0, n_neg = 0;
    for (int v : ys) (v > 0 ? n_pos : n_neg) += 1.0;
    const double hi = (n_pos + 1.0) / (n_pos + 2.0), lo = 1.0 / (n_neg + 2.0);
    std::vector<double> target(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) target[i] = ys[i] > 0 ? hi : lo;

    double A = 0.0, B = std::log((n_neg + 1.0) / (n_pos + 1.0));
    double fval = platt_loss(f, target, A, B);
    for (int iter = 0; iter < 100; ++iter) {
        double h11 = 1e-12, h22 = 1e-12, h21 = 0, g1 = 0, g2 = 0;
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            const double fab = f(i) * A + B;
            double p, q;
            if (fab >= 0) {
                p = std::exp(-fab) / (1.0 + std::exp(-fab));
                q = 1.0 / (1.0 + std::exp(-fab));
            } else {
                p = 1.0 / (1.0 + std::exp(fab));
                q = std::exp(fab) / (1.0 + std::exp(fab));
            }
            const double d2 = p * q;
            h11 += f(i) * f(i) * d2;
            h22 += d2;
            h21 += f(i) * d2;
            const double d1 = target[static_cast<std::size_t>(i)] - p;
            g1 += f(i) * d1;
            g2 += d1;
        }
        if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
        const double det = h11 * h22 - h21 * h21;
        const double dA = -(h22 * g1 - h21 * g2) / det;
        const double dB = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * dA + g2 * dB;
        double step = 1.0;
        while (step >= 1e-10) {
            const double newA = A + step * dA, newB = B + step * dB;
            const double newf = platt_loss(f, target, newA, newB);
            if (newf < fval + 1e-4 * step * gd) {
                A = newA;
                B = newB;
                fval = newf;
                break;
            }
            step *= 0.5;
        }
        if (step < 1e-10) break;
    }
    if (!(A < 0.0) || !std::isfinite(A) || !std::isfinite(B)) return {-1.0, 0.0};
    return {A, B};
}

}  // namespace

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double gamma) {
    const Eigen::VectorXd na = A.rowwise().squaredNorm();
    const Eigen::VectorXd nb = B.rowwise().squaredNorm();
    Eigen::MatrixXd K = -2.0 * (A * B.transpose());
    for (Eigen::Index j = 0; j < K.cols(); ++j)
        for (Eigen::Index i = 0; i < K.rows(); ++i) K(i, j) = std::exp(-gamma * std::max(K(i, j) + na(i) + nb(j), 0.0));
    return K;
}

TrainedModel train_svm_rbf(const Eigen::MatrixXd& X, const std::vector<int>& y, const SvmParams& params) {
    detail::check_training_data(X, y, "svm");
    const Eigen::Index n = X.rows(), p = X.cols();

    double gamma = 1.0;
    if (params.gamma) {
        gamma = *params.gamma;
    } else {
        const double mean = X.mean();
        const double var = (X.array() - mean).square().mean();
        gamma = var > 0.0 ? 1.0 / (static_cast<double>(p) * var) : 1.0;
    }

    // Solved with the first sample's class as +1, so relabelling the classes
    // hands the solver the identical problem.
    const int orientation = y.front() == 1 ? 1 : -1;
    std::vector<int> ys(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) ys[i] = (y[i] == 1 ? 1 : -1) * orientation;

    const Eigen::MatrixXd K = rbf_kernel(X, X, gamma);
    const SmoSolution sol = solve_smo(K, ys, params.C, params.tol, params.max_iter);

    Eigen::VectorXd f(n);
    Eigen::VectorXd coef(n);
    for (Eigen::Index i = 0; i < n; ++i) coef(i) = sol.alpha(i) * ys[static_cast<std::size_t>(i)];
    f = K * coef;
    f.array() -= sol.rho;
    const auto [A, B] = fit_platt(f, ys);

    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < n; ++i)
        if (sol.alpha(i) > 0.0) support.push_back(i);

    SvmModelParams out;
    out.support_vectors.resize(static_cast<Eigen::Index>(support.size()), p);
    out.dual_coef.resize(static_cast<Eigen::Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) {
        out.support_vectors.row(static_cast<Eigen::Index>(k)) = X.row(support[k]);
        out.dual_coef(static_cast<Eigen::Index>(k)) = coef(support[k]) * orientation;
    }
    out.bias = -sol.rho * orientation;
    out.gamma = gamma;
    out.platt_a = A;
    out.platt_b = B * orientation;

    TrainedModel model;
    model.type = "svm_rbf";
    model.n_features = p;
    model.params = std::move(out);
    model.log.iterations = static_cast<int>(std::min<long>(sol.iterations, std::numeric_limits<int>::max()));
    return model;
}

double svm_dual_objective(const TrainedModel& model) {
    const auto* svm = std::get_if<SvmModelParams>(&model.params);
    if (!svm) throw ConfigError("svm_dual_objective: not an SVM model");
    const Eigen::MatrixXd K = rbf_kernel(svm->support_vectors, svm->support_vectors, svm->gamma);
    return 0.5 * svm->dual_coef.dot(K * svm->dual_coef) - svm->dual_coef.cwiseAbs().sum();
}

}  // namespace megphone
