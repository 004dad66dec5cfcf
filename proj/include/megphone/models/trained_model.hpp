#pragma once

#include "megphone/models/model_spec.hpp"

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace megphone {

// Elastic net and LDA: decision = w.x + b, probability = logistic(decision).
struct LinearParams {
    Eigen::VectorXd weights;
    double bias = 0.0;
};

// decision = sum_i dual_coef_i k(sv_i, x) + bias, probability = 1 / (1 + exp(A decision + B)).
struct SvmModelParams {
    Eigen::MatrixXd support_vectors;  // one per row
    Eigen::VectorXd dual_coef;        // alpha_i y_i with y in {-1, +1}
    double bias = 0.0;
    double gamma = 1.0;
    double platt_a = -1.0;
    double platt_b = 0.0;
};

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
};

// Linear layers with ReLU in between; the last layer emits two logits.
struct FfnModelParams {
    std::vector<DenseLayer> layers;
};

// One bank of 1-D filters slid over every channel with the same weights
// (no padding), followed by a linear layer on the flattened
// [channel][window][filter] feature map.
struct CnnModelParams {
    Eigen::MatrixXd kernels;    // filters x kernel
    Eigen::VectorXd conv_bias;  // filters
    DenseLayer head;            // 2 x (n_channels * n_windows * filters)
    int n_channels = 0;
    int n_times = 0;
    int stride = 0;

    int n_windows() const { return (n_times - static_cast<int>(kernels.cols())) / stride + 1; }
};

using ModelParams = std::variant<LinearParams, SvmModelParams, FfnModelParams, CnnModelParams>;

struct TrainingLog {
    std::vector<double> loss;      // objective per iteration (elastic net) or training loss per epoch
    std::vector<double> val_loss;  // neural models only
    int best_epoch = -1;           // index into val_loss of the restored parameters
    int iterations = 0;
    bool converged = true;
};

struct TrainedModel {
    std::string type;  // elastic_net, svm_rbf, lda, ffn, cnn
    Eigen::Index n_features = 0;
    ModelParams params;
    TrainingLog log;
};

// Underlying real-valued score; larger means class 1. Throws DataError on a
// feature-count mismatch.
Eigen::VectorXd decision_function(const TrainedModel& model, const Eigen::MatrixXd& X);

// P(class 1) per row, in [0, 1] and monotone in the decision value.
Eigen::VectorXd predict_proba(const TrainedModel& model, const Eigen::MatrixXd& X);

// Hard labels: 1 where predict_proba >= 0.5.
std::vector<int> predict(const TrainedModel& model, const Eigen::MatrixXd& X);

// Versioned JSON document. Doubles round-trip exactly.
std::string serialize(const TrainedModel& model);
TrainedModel deserialize(std::string_view text);

// Numerically stable logistic function.
double sigmoid(double z);

}  // namespace megphone
