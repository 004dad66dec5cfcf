#pragma once

#include "megphone/models/model_spec.hpp"
#include "megphone/models/trained_model.hpp"

#include <Eigen/Core>

#include <vector>

namespace megphone {

// All trainers expect labels in {0, 1} with both classes present and throw
// DataError otherwise. Results are a deterministic function of the inputs.

// Proximal gradient (FISTA with adaptive restart) on
//   mean logistic loss + alpha (l1_ratio |w|_1 + (1 - l1_ratio) / 2 |w|^2),
// bias unpenalized. With an L1 term the solver works on a growing set of
// features, admitting those that violate the optimality conditions of the full
// problem until none is left.
TrainedModel train_elastic_net(const Eigen::MatrixXd& X, const std::vector<int>& y, const ElasticNetParams& params);

// Objective minimized by train_elastic_net, exposed for verification.
double elastic_net_objective(const Eigen::MatrixXd& X, const std::vector<int>& y, const Eigen::VectorXd& w,
                             double b, const ElasticNetParams& params);

// Shrunk pooled covariance (1 - s) S + s tr(S)/p I. Throws NumericError if it is singular.
TrainedModel train_lda(const Eigen::MatrixXd& X, const std::vector<int>& y, const LdaParams& params);

// C-SVC with an RBF kernel solved by SMO (second-order working-set selection).
// Throws NumericError if the KKT tolerance is not reached within max_iter steps.
TrainedModel train_svm_rbf(const Eigen::MatrixXd& X, const std::vector<int>& y, const SvmParams& params);

// Dual objective 0.5 a'Qa - sum(a) at the solution, Q_ij = y_i y_j k(x_i, x_j).
double svm_dual_objective(const TrainedModel& model);

// exp(-gamma |a_i - b_j|^2) for all row pairs.
Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double gamma);

// Full-batch AdamW on softmax cross-entropy with a stratified validation split
// and early stopping; the parameters of the best validation epoch are kept.
// Throws DataError for fewer than 10 samples.
TrainedModel train_ffn(const Eigen::MatrixXd& X, const std::vector<int>& y, const FfnParams& params,
                       const TrainParams& train);
TrainedModel train_cnn(const Eigen::MatrixXd& X, const std::vector<int>& y, const CnnParams& params,
                       const TrainParams& train);

// Dispatch on spec.variant.
TrainedModel train_model(const ModelSpec& spec, const Eigen::MatrixXd& X, const std::vector<int>& y);

// Gradient plumbing of the neural models, exposed for verification. The loss is
// the mean cross-entropy over the rows of X; weight decay is not part of it.
FfnModelParams init_ffn(Eigen::Index n_features, const std::vector<int>& hidden_sizes, std::uint64_t seed);
CnnModelParams init_cnn(Eigen::Index n_features, const CnnParams& params, std::uint64_t seed);
double ffn_loss(const FfnModelParams& net, const Eigen::MatrixXd& X, const std::vector<int>& y,
                FfnModelParams* gradient = nullptr);
double cnn_loss(const CnnModelParams& net, const Eigen::MatrixXd& X, const std::vector<int>& y,
                CnnModelParams* gradient = nullptr);

}  // namespace megphone
