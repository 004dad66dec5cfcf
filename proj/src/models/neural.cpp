#include "megphone/models/train.hpp"

#include "megphone/random.hpp"
#include "models/common.hpp"

#include <cmath>
#include <limits>
#include <span>

namespace megphone {

namespace {

void init_uniform(Eigen::MatrixXd& m, double bound, Rng& rng) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-bound, bound);
}

void init_uniform(Eigen::VectorXd& v, double bound, Rng& rng) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-bound, bound);
}

// PyTorch's default nn.Linear initialization.
DenseLayer make_dense(Eigen::Index in, Eigen::Index out, Rng& rng) {
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    init_uniform(layer.weight, bound, rng);
    init_uniform(layer.bias, bound, rng);
    return layer;
}

// Mean softmax cross-entropy over two logits; optionally writes dLoss/dLogits.
double cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& y, Eigen::MatrixXd* d_logits) {
    const Eigen::Index n = logits.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    if (d_logits) d_logits->resize(n, 2);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z0 = logits(i, 0), z1 = logits(i, 1);
        const double m = std::max(z0, z1);
        const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
        const int label = y[static_cast<std::size_t>(i)];
        total += lse - (label == 1 ? z1 : z0);
        if (d_logits) {
            const double p1 = std::exp(z1 - lse), p0 = std::exp(z0 - lse);
            (*d_logits)(i, 0) = (p0 - (label == 0 ? 1.0 : 0.0)) * inv_n;
            (*d_logits)(i, 1) = (p1 - (label == 1 ? 1.0 : 0.0)) * inv_n;
        }
    }
    return total * inv_n;
}

std::vector<std::span<double>> tensors(DenseLayer& layer) {
    return {{layer.weight.data(), static_cast<std::size_t>(layer.weight.size())},
            {layer.bias.data(), static_cast<std::size_t>(layer.bias.size())}};
}

std::vector<std::span<double>> tensors(FfnModelParams& net) {
    std::vector<std::span<double>> out;
    for (auto& layer : net.layers)
        for (auto t : tensors(layer)) out.push_back(t);
    return out;
}

std::vector<std::span<double>> tensors(CnnModelParams& net) {
    std::vector<std::span<double>> out{{net.kernels.data(), static_cast<std::size_t>(net.kernels.size())},
                                       {net.conv_bias.data(), static_cast<std::size_t>(net.conv_bias.size())}};
    for (auto t : tensors(net.head)) out.push_back(t);
    return out;
}

// Rows (c, window) x kernel taps for every sample, sample-major.
Eigen::MatrixXd extract_patches(const CnnModelParams& net, const Eigen::MatrixXd& X) {
    const Eigen::Index k = net.kernels.cols();
    const Eigen::Index windows = net.n_windows();
    const Eigen::Index per_sample = static_cast<Eigen::Index>(net.n_channels) * windows;
    Eigen::MatrixXd patches(X.rows() * per_sample, k);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index c = 0; c < net.n_channels; ++c)
            for (Eigen::Index o = 0; o < windows; ++o) {
                const Eigen::Index row = i * per_sample + c * windows + o;
                const Eigen::Index start = c * net.n_times + o * net.stride;
                for (Eigen::Index t = 0; t < k; ++t) patches(row, t) = X(i, start + t);
            }
    return patches;
}

struct SplitData {
    Eigen::MatrixXd X_train, X_val;
    std::vector<int> y_train, y_val;
};

SplitData stratified_holdout(const Eigen::MatrixXd& X, const std::vector<int>& y, double fraction,
                             std::uint64_t seed) {
    Rng rng(mix_seed(seed, 1));
    std::vector<std::size_t> train_idx, val_idx;
    for (int label : {0, 1}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] == label) members.push_back(i);
        rng.shuffle(members);
        auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
        n_val = std::clamp<std::size_t>(n_val, 1, members.size() - 1);
        val_idx.insert(val_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
        train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    SplitData out;
    const auto gather = [&](const std::vector<std::size_t>& idx, Eigen::MatrixXd& Xo, std::vector<int>& yo) {
        Xo.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            Xo.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(idx[r]));
            yo.push_back(y[idx[r]]);
        }
    };
    gather(train_idx, out.X_train, out.y_train);
    gather(val_idx, out.X_val, out.y_val);
    return out;
}

template <class Net, class LossFn>
TrainedModel fit_network(Net net, const Eigen::MatrixXd& X, const std::vector<int>& y, const TrainParams& train,
                         LossFn loss_fn, const char* type) {
    const auto counts = detail::check_training_data(X, y, type);
    if (X.rows() < 10) throw DataError(std::string(type) + ": at least 10 samples are needed for validation");
    if (counts[0] < 2 || counts[1] < 2)
        throw DataError(std::string(type) + ": each class needs 2 samples for the validation split");
    const SplitData split = stratified_holdout(X, y, train.val_fraction, train.seed);

    Net grad = net, m = net, v = net;
    for (auto t : tensors(m)) std::fill(t.begin(), t.end(), 0.0);
    for (auto t : tensors(v)) std::fill(t.begin(), t.end(), 0.0);

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    Net best = net;
    double best_val = std::numeric_limits<double>::infinity();
    TrainingLog log;

    for (int epoch = 0; epoch < train.max_epochs; ++epoch) {
        const double loss = loss_fn(net, split.X_train, split.y_train, &grad);
        const double step = static_cast<double>(epoch + 1);
        const double c1 = 1.0 - std::pow(beta1, step), c2 = 1.0 - std::pow(beta2, step);
        auto pt = tensors(net), gt = tensors(grad), mt = tensors(m), vt = tensors(v);
        for (std::size_t k = 0; k < pt.size(); ++k) {
            using Arr = Eigen::Map<Eigen::ArrayXd>;
            Arr p(pt[k].data(), static_cast<Eigen::Index>(pt[k].size()));
            Arr g(gt[k].data(), p.size()), mm(mt[k].data(), p.size()), vv(vt[k].data(), p.size());
            p *= 1.0 - train.learning_rate * train.weight_decay;
            mm = beta1 * mm + (1.0 - beta1) * g;
            vv = beta2 * vv + (1.0 - beta2) * g.square();
            p -= train.learning_rate * (mm / c1) / ((vv / c2).sqrt() + eps);
        }
        const double val = loss_fn(net, split.X_val, split.y_val, nullptr);
        if (!std::isfinite(loss) || !std::isfinite(val))
            throw NumericError(std::string(type) + ": loss diverged at epoch " + std::to_string(epoch));
        log.loss.push_back(loss);
        log.val_loss.push_back(val);
        log.iterations = epoch + 1;
        if (val < best_val) {
            best_val = val;
            best = net;
            log.best_epoch = epoch;
        } else if (epoch - log.best_epoch >= train.patience) {
            break;
        }
    }

    TrainedModel model;
    model.type = type;
    model.n_features = X.cols();
    model.params = std::move(best);
    model.log = std::move(log);
    return model;
}

}  // namespace

FfnModelParams init_ffn(Eigen::Index n_features, const std::vector<int>& hidden_sizes, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 2));
    FfnModelParams net;
    Eigen::Index in = n_features;
    for (int h : hidden_sizes) {
        net.layers.push_back(make_dense(in, h, rng));
        in = h;
    }
    net.layers.push_back(make_dense(in, 2, rng));
    return net;
}

CnnModelParams init_cnn(Eigen::Index n_features, const CnnParams& params, std::uint64_t seed) {
    if (params.n_times < params.kernel || n_features % params.n_times != 0)
        throw DataError("cnn: " + std::to_string(n_features) + " features cannot be reshaped to channels x " +
                        std::to_string(params.n_times));
    Rng rng(mix_seed(seed, 2));
    CnnModelParams net;
    net.n_channels = static_cast<int>(n_features / params.n_times);
    net.n_times = params.n_times;
    net.stride = params.stride;
    net.kernels.resize(params.filters, params.kernel);
    net.conv_bias.resize(params.filters);
    const double bound = 1.0 / std::sqrt(static_cast<double>(params.kernel));
    init_uniform(net.kernels, bound, rng);
    init_uniform(net.conv_bias, bound, rng);
    const Eigen::Index features = static_cast<Eigen::Index>(net.n_channels) * net.n_windows() * params.filters;
    net.head = make_dense(features, 2, rng);
    return net;
}

double ffn_loss(const FfnModelParams& net, const Eigen::MatrixXd& X, const std::vector<int>& y,
                FfnModelParams* gradient) {
    const std::size_t L = net.layers.size();
    std::vector<Eigen::MatrixXd> pre(L);  // pre-activations
    std::vector<Eigen::MatrixXd> act(L);  // post-ReLU outputs of the hidden layers
    for (std::size_t l = 0; l < L; ++l) {
        const Eigen::MatrixXd& input = l == 0 ? X : act[l - 1];
        pre[l].noalias() = input * net.layers[l].weight.transpose();
        pre[l].rowwise() += net.layers[l].bias.transpose();
        if (l + 1 < L) act[l] = pre[l].cwiseMax(0.0);
    }
    Eigen::MatrixXd delta;
    const double loss = cross_entropy(pre[L - 1], y, gradient ? &delta : nullptr);
    if (!gradient) return loss;

    gradient->layers.resize(L);
    for (std::size_t l = L; l-- > 0;) {
        const Eigen::MatrixXd& input = l == 0 ? X : act[l - 1];
        gradient->layers[l].weight.noalias() = delta.transpose() * input;
        gradient->layers[l].bias = delta.colwise().sum().transpose();
        if (l == 0) break;
        Eigen::MatrixXd back = delta * net.layers[l].weight;
        delta = (pre[l - 1].array() > 0.0).select(back, 0.0);
    }
    return loss;
}

double cnn_loss(const CnnModelParams& net, const Eigen::MatrixXd& X, const std::vector<int>& y,
                CnnModelParams* gradient) {
    const Eigen::Index n = X.rows();
    const Eigen::Index filters = net.kernels.rows();
    const Eigen::Index per_sample = static_cast<Eigen::Index>(net.n_channels) * net.n_windows();
    if (X.cols() != static_cast<Eigen::Index>(net.n_channels) * net.n_times)
        throw DataError("cnn: expected " + std::to_string(net.n_channels * net.n_times) + " features, got " +
                        std::to_string(X.cols()));

    const Eigen::MatrixXd patches = extract_patches(net, X);
    Eigen::MatrixXd conv = patches * net.kernels.transpose();  // (n * per_sample) x filters
    conv.rowwise() += net.conv_bias.transpose();

    Eigen::MatrixXd features(n, per_sample * filters);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index r = 0; r < per_sample; ++r)
            for (Eigen::Index f = 0; f < filters; ++f) features(i, r * filters + f) = conv(i * per_sample + r, f);

    Eigen::MatrixXd logits = features * net.head.weight.transpose();
    logits.rowwise() += net.head.bias.transpose();
    Eigen::MatrixXd d_logits;
    const double loss = cross_entropy(logits, y, gradient ? &d_logits : nullptr);
    if (!gradient) return loss;

    gradient->n_channels = net.n_channels;
    gradient->n_times = net.n_times;
    gradient->stride = net.stride;
    gradient->head.weight.noalias() = d_logits.transpose() * features;
    gradient->head.bias = d_logits.colwise().sum().transpose();
    const Eigen::MatrixXd d_features = d_logits * net.head.weight;
    Eigen::MatrixXd d_conv(n * per_sample, filters);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index r = 0; r < per_sample; ++r)
            for (Eigen::Index f = 0; f < filters; ++f) d_conv(i * per_sample + r, f) = d_features(i, r * filters + f);
    gradient->kernels.noalias() = d_conv.transpose() * patches;
    gradient->conv_bias = d_conv.colwise().sum().transpose();
    return loss;
}

TrainedModel train_ffn(const Eigen::MatrixXd& X, const std::vector<int>& y, const FfnParams& params,
                       const TrainParams& train) {
    if (params.hidden_sizes.size() > 2) throw ConfigError("ffn: at most two hidden layers are supported");
    return fit_network(init_ffn(X.cols(), params.hidden_sizes, train.seed), X, y, train,
                       [](const FfnModelParams& net, const Eigen::MatrixXd& Xs, const std::vector<int>& ys,
                          FfnModelParams* g) { return ffn_loss(net, Xs, ys, g); },
                       "ffn");
}

TrainedModel train_cnn(const Eigen::MatrixXd& X, const std::vector<int>& y, const CnnParams& params,
                       const TrainParams& train) {
    return fit_network(init_cnn(X.cols(), params, train.seed), X, y, train,
                       [](const CnnModelParams& net, const Eigen::MatrixXd& Xs, const std::vector<int>& ys,
                          CnnModelParams* g) { return cnn_loss(net, Xs, ys, g); },
                       "cnn");
}

}  // namespace megphone
