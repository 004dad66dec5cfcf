#include "megphone/models/train.hpp"

#include "models/common.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace megphone {

namespace {

constexpr std::size_t kInitialWorkingSet = 128;
constexpr int kGapEvery = 10;  // iterations between duality-gap evaluations

// Written so that flipping every label maps (loss, residual) at z to the
// values at -z with the residual negated, bit for bit.
double logistic_loss(int label, double z) { return label == 1 ? detail::softplus(-z) : detail::softplus(z); }
double logistic_residual(int label, double z) { return label == 1 ? -sigmoid(-z) : sigmoid(z); }

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

double binary_entropy(double a) {
    double h = 0.0;
    if (a > 0.0) h -= a * std::log(a);
    if (a < 1.0) h -= (1.0 - a) * std::log1p(-a);
    return h;
}

// Largest eigenvalue of [X 1][X 1]^T, via whichever Gram matrix is smaller.
double augmented_spectral_norm_sq(const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows(), p = X.cols();
    Eigen::MatrixXd gram;
    if (n <= p + 1) {
        gram = X * X.transpose();
        gram.array() += 1.0;
    } else {
        gram.resize(p + 1, p + 1);
        gram.topLeftCorner(p, p) = X.transpose() * X;
        const Eigen::VectorXd colsum = X.colwise().sum().transpose();
        gram.topRightCorner(p, 1) = colsum;
        gram.bottomLeftCorner(1, p) = colsum.transpose();
        gram(p, p) = static_cast<double>(n);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().maxCoeff();
}

struct Objective {
    const std::vector<int>& y;
    double l1, l2;  // alpha * l1_ratio, alpha * (1 - l1_ratio)

    double operator()(const Eigen::VectorXd& z, const Eigen::VectorXd& w) const {
        double loss = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) loss += logistic_loss(y[static_cast<std::size_t>(i)], z(i));
        loss /= static_cast<double>(z.size());
        return loss + l1 * w.lpNorm<1>() + 0.5 * l2 * w.squaredNorm();
    }

    void residuals(const Eigen::VectorXd& z, Eigen::VectorXd& r) const {
        const double inv_n = 1.0 / static_cast<double>(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i)
            r(i) = logistic_residual(y[static_cast<std::size_t>(i)], z(i)) * inv_n;
    }

    // A duality gap needs a finite penalty conjugate or an l1 ball to scale into.
    bool has_gap() const { return l2 > 0.0 || l1 > 0.0; }

    // Fenchel duality gap at a primal point with value f and margins z; also
    // leaves X^T r in xtr. The dual point starts at -n r, whose coordinate i
    // is the label sign times a_i = sigmoid(-s_i z_i). The class whose a_i sum
    // is larger is scaled down to make the unpenalized bias dual feasible, and
    // without an l2 term everything is then scaled into the l1 ball.
    double gap(const Eigen::MatrixXd& X, double f, const Eigen::VectorXd& z, Eigen::VectorXd& xtr) const {
        const Eigen::Index n = z.size();
        const double nd = static_cast<double>(n);
        Eigen::VectorXd r(n), a(n);
        residuals(z, r);
        xtr.noalias() = X.transpose() * r;
        double sum_pos = 0.0, sum_neg = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool pos = y[static_cast<std::size_t>(i)] == 1;
            a(i) = pos ? -nd * r(i) : nd * r(i);
            (pos ? sum_pos : sum_neg) += a(i);
        }
        if (!(sum_pos > 0.0 && sum_neg > 0.0)) return std::numeric_limits<double>::infinity();
        const double scale_pos = sum_pos > sum_neg ? sum_neg / sum_pos : 1.0;
        const double scale_neg = sum_neg > sum_pos ? sum_pos / sum_neg : 1.0;
        Eigen::VectorXd scaled_r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double g = y[static_cast<std::size_t>(i)] == 1 ? scale_pos : scale_neg;
            a(i) *= g;
            scaled_r(i) = r(i) * g;
        }
        Eigen::VectorXd u = -(X.transpose() * scaled_r);  // X^T alpha / n
        if (l2 == 0.0) {
            const double top = u.lpNorm<Eigen::Infinity>();
            if (top > l1) {
                a *= l1 / top;
                u *= l1 / top;
            }
        }
        double entropy = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) entropy += binary_entropy(a(i));
        double conjugate = 0.0;
        if (l2 > 0.0) {
            for (Eigen::Index j = 0; j < u.size(); ++j) {
                const double excess = std::abs(u(j)) - l1;
                if (excess > 0.0) conjugate += excess * excess;
            }
            conjugate /= 2.0 * l2;
        }
        return f - (entropy / nd - conjugate);
    }
};

struct FistaResult {
    int iterations = 0;
    bool converged = false;
};

// Accelerated proximal gradient with function-value restart on the columns of
// X, warm-started from (w, b). Stops once the duality gap is at most gap_tol,
// or, for an unpenalized fit, once the relative decrease falls below tol.
// Appends accepted objective values to `trace`.
FistaResult fista(const Eigen::MatrixXd& X, const Objective& objective, Eigen::VectorXd& w, double& b, double tol,
                  double gap_tol, int max_iter, std::vector<double>& trace) {
    const Eigen::Index n = X.rows(), p = X.cols();
    const double lipschitz = 1.0001 * augmented_spectral_norm_sq(X) * 0.25 / static_cast<double>(n) + objective.l2;
    const double step = 1.0 / lipschitz;
    Eigen::VectorXd w_next(p), v = w, grad(p), xtr(p);
    double v_b = b;
    Eigen::VectorXd z = (X * w).array() + b;
    Eigen::VectorXd z_next(n), z_v = z, residual(n);
    double t = 1.0;
    double f = objective(z, w);

    FistaResult result;
    const auto gap_closed = [&] { return objective.gap(X, f, z, xtr) <= gap_tol; };
    if (objective.has_gap() && gap_closed()) {
        result.converged = true;
        return result;
    }
    for (int it = 0; it < max_iter; ++it) {
        objective.residuals(z_v, residual);
        grad.noalias() = X.transpose() * residual;
        grad += objective.l2 * v;
        const double grad_b = residual.sum();

        const double threshold = objective.l1 * step;
        for (Eigen::Index j = 0; j < p; ++j) w_next(j) = soft_threshold(v(j) - step * grad(j), threshold);
        const double b_next = v_b - step * grad_b;
        z_next.noalias() = X * w_next;
        z_next.array() += b_next;
        const double f_next = objective(z_next, w_next);
        result.iterations = it + 1;

        if (f_next > f) {
            // Momentum overshoot: drop it and take a plain proximal step from w next time.
            if (t == 1.0) {  // even the plain step failed to descend: numerically stationary
                result.converged = true;
                break;
            }
            t = 1.0;
            v = w;
            v_b = b;
            z_v = z;
            continue;
        }

        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double beta = (t - 1.0) / t_next;
        v = w_next + beta * (w_next - w);
        v_b = b_next + beta * (b_next - b);
        z_v = (1.0 + beta) * z_next - beta * z;
        t = t_next;

        const double change = f - f_next;
        w.swap(w_next);
        z.swap(z_next);
        b = b_next;
        f = f_next;
        trace.push_back(f);
        if (objective.has_gap()) {
            if ((it + 1) % kGapEvery == 0 && gap_closed()) {
                result.converged = true;
                break;
            }
        } else if (change <= tol * std::max(std::abs(f), 1e-300)) {
            result.converged = true;
            break;
        }
    }
    return result;
}

}  // namespace

double elastic_net_objective(const Eigen::MatrixXd& X, const std::vector<int>& y, const Eigen::VectorXd& w,
                             double b, const ElasticNetParams& params) {
    const Objective objective{y, params.alpha * params.l1_ratio, params.alpha * (1.0 - params.l1_ratio)};
    const Eigen::VectorXd z = (X * w).array() + b;
    return objective(z, w);
}

TrainedModel train_elastic_net(const Eigen::MatrixXd& X, const std::vector<int>& y, const ElasticNetParams& params) {
    detail::check_training_data(X, y, "elastic net");
    const Eigen::Index n = X.rows(), p = X.cols();
    const Objective objective{y, params.alpha * params.l1_ratio, params.alpha * (1.0 - params.l1_ratio)};

    TrainingLog log;
    log.converged = false;
    log.loss.push_back(objective(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(p)));

    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    double b = 0.0;
    // Relative to the objective at the origin, log 2.
    const double gap_tol = params.tol * log.loss.front();

    if (objective.l1 == 0.0 || static_cast<std::size_t>(p) <= 2 * kInitialWorkingSet) {
        const auto r = fista(X, objective, w, b, params.tol, gap_tol, params.max_iter, log.loss);
        log.iterations = r.iterations;
        log.converged = r.converged;
    } else {
        // Working set: solve on the features allowed to be nonzero, then admit the
        // excluded ones with |X^T r| > l1, strongest first, at most doubling the
        // set. The restricted dual point is dual feasible for the full problem too,
        // so the full-problem gap certifies the result.
        std::vector<char> in_set(static_cast<std::size_t>(p), 0);
        std::vector<Eigen::Index> active;
        Eigen::VectorXd z(n), xtr(p);
        int budget = params.max_iter;
        bool solved = false;
        bool last_round_converged = false;
        while (true) {
            z.noalias() = X * w;
            z.array() += b;
            const double gap = objective.gap(X, objective(z, w), z, xtr);
            if (solved && gap <= gap_tol) {
                log.converged = true;
                break;
            }
            if (budget <= 0) break;

            std::vector<Eigen::Index> added;
            for (Eigen::Index j = 0; j < p; ++j)
                if (!in_set[static_cast<std::size_t>(j)] && std::abs(xtr(j)) > objective.l1) added.push_back(j);
            if (added.empty() && solved && last_round_converged) {
                // Nothing outside is admissible and the restricted problem is solved
                // to the final tolerance, as far as the arithmetic allows.
                log.converged = true;
                break;
            }
            const std::size_t room = std::max(active.size(), kInitialWorkingSet);
            if (added.size() > room) {
                std::stable_sort(added.begin(), added.end(),
                                 [&](Eigen::Index a, Eigen::Index c) { return std::abs(xtr(a)) > std::abs(xtr(c)); });
                added.resize(room);
            }
            for (auto j : added) in_set[static_cast<std::size_t>(j)] = 1;
            active.clear();
            for (Eigen::Index j = 0; j < p; ++j)
                if (in_set[static_cast<std::size_t>(j)]) active.push_back(j);

            Eigen::MatrixXd Xa(n, static_cast<Eigen::Index>(active.size()));
            Eigen::VectorXd wa(static_cast<Eigen::Index>(active.size()));
            for (std::size_t k = 0; k < active.size(); ++k) {
                Xa.col(static_cast<Eigen::Index>(k)) = X.col(active[k]);
                wa(static_cast<Eigen::Index>(k)) = w(active[k]);
            }
            // A round may use a quarter of the budget, so that a slowly converging
            // restricted problem cannot keep the set from growing.
            const int round_budget = std::min(budget, std::max(1, params.max_iter / 4));
            const auto r = fista(Xa, objective, wa, b, params.tol, 0.5 * gap_tol, round_budget, log.loss);
            log.iterations += r.iterations;
            budget -= r.iterations;
            for (std::size_t k = 0; k < active.size(); ++k) w(active[k]) = wa(static_cast<Eigen::Index>(k));
            solved = true;
            last_round_converged = r.converged;
        }
    }

    TrainedModel model;
    model.type = "elastic_net";
    model.n_features = p;
    model.params = LinearParams{std::move(w), b};
    model.log = std::move(log);
    return model;
}

}  // namespace megphone
