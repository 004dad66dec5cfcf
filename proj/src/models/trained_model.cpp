#include "megphone/models/trained_model.hpp"

#include "megphone/error.hpp"
#include "megphone/models/train.hpp"

#include <cmath>

namespace megphone {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr int kFormatVersion = 1;

Eigen::MatrixXd ffn_logits(const FfnModelParams& net, const Eigen::MatrixXd& X) {
    Eigen::MatrixXd a = X;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Eigen::MatrixXd z = a * net.layers[l].weight.transpose();
        z.rowwise() += net.layers[l].bias.transpose();
        a = l + 1 < net.layers.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
    }
    return a;
}

Eigen::MatrixXd cnn_logits(const CnnModelParams& net, const Eigen::MatrixXd& X) {
    const Eigen::Index filters = net.kernels.rows(), k = net.kernels.cols();
    const Eigen::Index windows = net.n_windows();
    Eigen::MatrixXd features(X.rows(), static_cast<Eigen::Index>(net.n_channels) * windows * filters);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index c = 0; c < net.n_channels; ++c)
            for (Eigen::Index o = 0; o < windows; ++o) {
                const auto patch = X.row(i).segment(c * net.n_times + o * net.stride, k);
                for (Eigen::Index f = 0; f < filters; ++f)
                    features(i, (c * windows + o) * filters + f) = net.kernels.row(f).dot(patch) + net.conv_bias(f);
            }
    Eigen::MatrixXd logits = features * net.head.weight.transpose();
    logits.rowwise() += net.head.bias.transpose();
    return logits;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size())
        throw DataError("model document: matrix shape does not match its data");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[k++];
    return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

nlohmann::json dense_to_json(const DenseLayer& layer) {
    return {{"weight", matrix_to_json(layer.weight)}, {"bias", vector_to_json(layer.bias)}};
}

DenseLayer dense_from_json(const nlohmann::json& j) {
    return {matrix_from_json(j.at("weight")), vector_from_json(j.at("bias"))};
}

}  // namespace

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Eigen::VectorXd decision_function(const TrainedModel& model, const Eigen::MatrixXd& X) {
    if (X.cols() != model.n_features)
        throw DataError("model expects " + std::to_string(model.n_features) + " features, got " +
                        std::to_string(X.cols()));
    return std::visit(
        overloaded{
            [&](const LinearParams& p) -> Eigen::VectorXd { return (X * p.weights).array() + p.bias; },
            [&](const SvmModelParams& p) -> Eigen::VectorXd {
                Eigen::VectorXd f = rbf_kernel(X, p.support_vectors, p.gamma) * p.dual_coef;
                return f.array() + p.bias;
            },
            [&](const FfnModelParams& p) -> Eigen::VectorXd {
                const Eigen::MatrixXd z = ffn_logits(p, X);
                return z.col(1) - z.col(0);
            },
            [&](const CnnModelParams& p) -> Eigen::VectorXd {
                const Eigen::MatrixXd z = cnn_logits(p, X);
                return z.col(1) - z.col(0);
            },
        },
        model.params);
}

Eigen::VectorXd predict_proba(const TrainedModel& model, const Eigen::MatrixXd& X) {
    Eigen::VectorXd score = decision_function(model, X);
    if (const auto* svm = std::get_if<SvmModelParams>(&model.params)) {
        for (Eigen::Index i = 0; i < score.size(); ++i) score(i) = sigmoid(-(svm->platt_a * score(i) + svm->platt_b));
    } else {
        for (Eigen::Index i = 0; i < score.size(); ++i) score(i) = sigmoid(score(i));
    }
    return score;
}

std::vector<int> predict(const TrainedModel& model, const Eigen::MatrixXd& X) {
    const Eigen::VectorXd p = predict_proba(model, X);
    std::vector<int> labels(static_cast<std::size_t>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i) labels[static_cast<std::size_t>(i)] = p(i) >= 0.5 ? 1 : 0;
    return labels;
}

TrainedModel train_model(const ModelSpec& spec, const Eigen::MatrixXd& X, const std::vector<int>& y) {
    validate(spec);
    return std::visit(overloaded{
                          [&](const ElasticNetParams& p) { return train_elastic_net(X, y, p); },
                          [&](const SvmParams& p) { return train_svm_rbf(X, y, p); },
                          [&](const LdaParams& p) { return train_lda(X, y, p); },
                          [&](const FfnParams& p) { return train_ffn(X, y, p, spec.train); },
                          [&](const CnnParams& p) { return train_cnn(X, y, p, spec.train); },
                      },
                      spec.variant);
}

std::string serialize(const TrainedModel& model) {
    nlohmann::json j;
    j["format"] = "megphone-model";
    j["version"] = kFormatVersion;
    j["type"] = model.type;
    j["n_features"] = model.n_features;
    nlohmann::json params;
    std::visit(overloaded{
                   [&](const LinearParams& p) {
                       params["weights"] = vector_to_json(p.weights);
                       params["bias"] = p.bias;
                   },
                   [&](const SvmModelParams& p) {
                       params["support_vectors"] = matrix_to_json(p.support_vectors);
                       params["dual_coef"] = vector_to_json(p.dual_coef);
                       params["bias"] = p.bias;
                       params["gamma"] = p.gamma;
                       params["platt_a"] = p.platt_a;
                       params["platt_b"] = p.platt_b;
                   },
                   [&](const FfnModelParams& p) {
                       params["layers"] = nlohmann::json::array();
                       for (const auto& layer : p.layers) params["layers"].push_back(dense_to_json(layer));
                   },
                   [&](const CnnModelParams& p) {
                       params["kernels"] = matrix_to_json(p.kernels);
                       params["conv_bias"] = vector_to_json(p.conv_bias);
                       params["head"] = dense_to_json(p.head);
                       params["n_channels"] = p.n_channels;
                       params["n_times"] = p.n_times;
                       params["stride"] = p.stride;
                   },
               },
               model.params);
    j["params"] = std::move(params);
    j["log"] = {{"loss", model.log.loss},
                {"val_loss", model.log.val_loss},
                {"best_epoch", model.log.best_epoch},
                {"iterations", model.log.iterations},
                {"converged", model.log.converged}};
    return j.dump();
}

TrainedModel deserialize(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format") != "megphone-model") throw DataError("not a model document");
        const int version = j.at("version").get<int>();
        if (version != kFormatVersion) throw DataError("unsupported model document version " + std::to_string(version));
        TrainedModel model;
        model.type = j.at("type").get<std::string>();
        model.n_features = j.at("n_features").get<Eigen::Index>();
        const auto& p = j.at("params");
        if (model.type == "elastic_net" || model.type == "lda") {
            model.params = LinearParams{vector_from_json(p.at("weights")), p.at("bias").get<double>()};
        } else if (model.type == "svm_rbf") {
            SvmModelParams s;
            s.support_vectors = matrix_from_json(p.at("support_vectors"));
            s.dual_coef = vector_from_json(p.at("dual_coef"));
            s.bias = p.at("bias").get<double>();
            s.gamma = p.at("gamma").get<double>();
            s.platt_a = p.at("platt_a").get<double>();
            s.platt_b = p.at("platt_b").get<double>();
            model.params = std::move(s);
        } else if (model.type == "ffn") {
            FfnModelParams f;
            for (const auto& layer : p.at("layers")) f.layers.push_back(dense_from_json(layer));
            model.params = std::move(f);
        } else if (model.type == "cnn") {
            CnnModelParams c;
            c.kernels = matrix_from_json(p.at("kernels"));
            c.conv_bias = vector_from_json(p.at("conv_bias"));
            c.head = dense_from_json(p.at("head"));
            c.n_channels = p.at("n_channels").get<int>();
            c.n_times = p.at("n_times").get<int>();
            c.stride = p.at("stride").get<int>();
            model.params = std::move(c);
        } else {
            throw DataError("unknown model type '" + model.type + "'");
        }
        const auto& log = j.at("log");
        model.log.loss = log.at("loss").get<std::vector<double>>();
        model.log.val_loss = log.at("val_loss").get<std::vector<double>>();
        model.log.best_epoch = log.at("best_epoch").get<int>();
        model.log.iterations = log.at("iterations").get<int>();
        model.log.converged = log.at("converged").get<bool>();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model document: ") + e.what());
    }
}

}  // namespace megphone
