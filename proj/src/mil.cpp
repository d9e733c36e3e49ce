#include "slidemil/mil.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "slidemil/io_util.hpp"
#include "slidemil/rng.hpp"

namespace slidemil::mil {

namespace {

constexpr char kMagic[4] = {'A', 'B', 'M', 'L'};
constexpr std::uint16_t kVersion = 1;
constexpr double kProbClamp = 1e-12;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_shapes(const encoder::EmbeddingBag& bag, const AbmilParams& params,
                  const char* what) {
    require(params.V.rows() == params.U.rows() && params.V.cols() == params.U.cols() &&
                params.w.size() == params.V.rows() && params.c.size() == params.V.cols(),
            std::string(what) + ": inconsistent parameter shapes");
    require(static_cast<Eigen::Index>(bag.dim) == params.dim(),
            std::string(what) + ": bag dim does not match model dim");
    require(bag.size() >= 1, std::string(what) + ": empty bag");
}

// shared forward pass keeping every intermediate the backward pass needs
struct ForwardTrace {
    Eigen::MatrixXd h;          // n x D instance matrix (64-bit)
    Eigen::MatrixXd tanh_vh;    // n x H
    Eigen::MatrixXd sig_uh;     // n x H
    Eigen::VectorXd scores;     // n
    Eigen::VectorXd attention;  // n
    Eigen::VectorXd z;          // D
    double logit = 0.0;
    double prob = 0.0;
};

ForwardTrace run_forward(const encoder::EmbeddingBag& bag, const AbmilParams& params) {
    ForwardTrace t;
    t.h = bag.matrix.cast<double>();
    const Eigen::Index n = t.h.rows();

    // score_k = w' (tanh(V h_k) ⊙ sigmoid(U h_k))
    t.tanh_vh = (t.h * params.V.transpose()).array().tanh();
    t.sig_uh = (t.h * params.U.transpose()).unaryExpr([](double x) { return sigmoid(x); });
    t.scores = (t.tanh_vh.array() * t.sig_uh.array()).matrix() * params.w;

    // softmax with max subtraction
    double max_score = t.scores.maxCoeff();
    t.attention = (t.scores.array() - max_score).exp();
    double denom = t.attention.sum();
    t.attention /= denom;

    t.z = t.h.transpose() * t.attention;
    t.logit = params.c.dot(t.z) + params.b;
    t.prob = sigmoid(t.logit);

    if (!std::isfinite(t.prob) || !t.attention.allFinite())
        throw NumericError("forward: non-finite intermediate (n=" + std::to_string(n) + ")");
    return t;
}

}  // namespace

AbmilParams init_params(std::uint32_t dim, std::uint32_t hidden, std::uint64_t seed) {
    require(dim >= 1 && hidden >= 1, "init_params: dim and hidden must be >= 1");
    SplitMix64 rng(seed);
    AbmilParams p;
    p.V.resize(hidden, dim);
    p.U.resize(hidden, dim);
    p.w.resize(hidden);
    p.c.resize(dim);

    const double bound_d = std::sqrt(1.0 / static_cast<double>(dim));
    const double bound_h = std::sqrt(1.0 / static_cast<double>(hidden));
    for (Eigen::Index r = 0; r < p.V.rows(); ++r)
        for (Eigen::Index c = 0; c < p.V.cols(); ++c)
            p.V(r, c) = rng.next_uniform(-bound_d, bound_d);
    for (Eigen::Index r = 0; r < p.U.rows(); ++r)
        for (Eigen::Index c = 0; c < p.U.cols(); ++c)
            p.U(r, c) = rng.next_uniform(-bound_d, bound_d);
    for (Eigen::Index i = 0; i < p.w.size(); ++i) p.w[i] = rng.next_uniform(-bound_h, bound_h);
    for (Eigen::Index i = 0; i < p.c.size(); ++i) p.c[i] = rng.next_uniform(-bound_d, bound_d);
    p.b = rng.next_uniform(-bound_d, bound_d);
    return p;
}

ForwardResult forward(const encoder::EmbeddingBag& bag, const AbmilParams& params) {
    check_shapes(bag, params, "forward");
    ForwardTrace t = run_forward(bag, params);
    return {t.prob, std::move(t.attention)};
}

double bce_loss(double prob, core::Label label) {
    double p = std::clamp(prob, kProbClamp, 1.0 - kProbClamp);
    return label == core::Label::EgfrPos ? -std::log(p) : -std::log(1.0 - p);
}

namespace {

AbmilGrads backward(const ForwardTrace& t, core::Label label, const AbmilParams& params) {
    const double y = label == core::Label::EgfrPos ? 1.0 : 0.0;
    const double dlogit = t.prob - y;  // d(bce)/d(logit) for sigmoid + BCE

    AbmilGrads g;
    g.c = dlogit * t.z;
    g.b = dlogit;

    // through z = Σ a_k h_k into the attention weights
    Eigen::VectorXd dz = dlogit * params.c;                       // D
    Eigen::VectorXd da = t.h * dz;                                // n, da_k = dz' h_k
    double weighted = t.attention.dot(da);
    Eigen::VectorXd dscore =
        t.attention.array() * (da.array() - weighted);            // softmax backward

    // through score_k = w' (tanh_k ⊙ sig_k)
    Eigen::MatrixXd gated = t.tanh_vh.array() * t.sig_uh.array();  // n x H
    g.w = gated.transpose() * dscore;

    Eigen::MatrixXd dgate = dscore * params.w.transpose();         // n x H
    Eigen::MatrixXd dvpre =
        (dgate.array() * t.sig_uh.array() * (1.0 - t.tanh_vh.array().square())).matrix();
    Eigen::MatrixXd dupre =
        (dgate.array() * t.tanh_vh.array() * t.sig_uh.array() * (1.0 - t.sig_uh.array()))
            .matrix();
    g.V = dvpre.transpose() * t.h;  // Σ_k dvpre_k h_k'
    g.U = dupre.transpose() * t.h;
    return g;
}

}  // namespace

AbmilGrads grad(const encoder::EmbeddingBag& bag, core::Label label, const AbmilParams& params) {
    check_shapes(bag, params, "grad");
    return backward(run_forward(bag, params), label, params);
}

AdamState make_adam_state(const AbmilParams& params) {
    AdamState s;
    s.mV = Eigen::MatrixXd::Zero(params.V.rows(), params.V.cols());
    s.vV = s.mV;
    s.mU = s.mV;
    s.vU = s.mV;
    s.mw = Eigen::VectorXd::Zero(params.w.size());
    s.vw = s.mw;
    s.mc = Eigen::VectorXd::Zero(params.c.size());
    s.vc = s.mc;
    return s;
}

namespace {

template <typename T>
void adam_update(T& param, const T& g, T& m, T& v, double lr, const AdamConfig& cfg,
                 double bc1, double bc2) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v.array().matrix() + (1.0 - cfg.beta2) * g.array().square().matrix();
    param.array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
}

}  // namespace

void adam_step(AbmilParams& params, const AbmilGrads& grads, AdamState& state,
               double learning_rate, const AdamConfig& config) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));

    adam_update(params.V, grads.V, state.mV, state.vV, learning_rate, config, bc1, bc2);
    adam_update(params.U, grads.U, state.mU, state.vU, learning_rate, config, bc1, bc2);
    adam_update(params.w, grads.w, state.mw, state.vw, learning_rate, config, bc1, bc2);
    adam_update(params.c, grads.c, state.mc, state.vc, learning_rate, config, bc1, bc2);

    state.mb = config.beta1 * state.mb + (1.0 - config.beta1) * grads.b;
    state.vb = config.beta2 * state.vb + (1.0 - config.beta2) * grads.b * grads.b;
    params.b -= learning_rate * (state.mb / bc1) / (std::sqrt(state.vb / bc2) + config.eps);
}

EarlyStopper::EarlyStopper(int patience) : patience_(patience) {
    require(patience >= 1, "EarlyStopper: patience >= 1");
    best_loss_ = std::numeric_limits<double>::infinity();
}

bool EarlyStopper::observe(int epoch, double val_loss) {
    improved_last_ = val_loss < best_loss_;
    if (improved_last_) {
        best_loss_ = val_loss;
        best_epoch_ = epoch;
        stale_ = 0;
        return false;
    }
    stale_ += 1;
    return stale_ >= patience_;
}

TrainResult train(std::span<const BagRef> train_bags, std::span<const BagRef> val_bags,
                  const TrainConfig& config) {
    require(!train_bags.empty() && !val_bags.empty(), "train: train/val sets must be non-empty");
    require(config.max_epochs >= 1 && config.patience >= 1 && config.learning_rate > 0.0,
            "train: bad config");
    const std::uint32_t dim = train_bags[0].bag->dim;
    for (const auto& r : train_bags)
        require(r.bag->dim == dim, "train: bags disagree on dim");
    for (const auto& r : val_bags)
        require(r.bag->dim == dim, "train: bags disagree on dim");

    AbmilParams params = init_params(dim, config.hidden_dim, config.seed);
    AdamState adam = make_adam_state(params);
    // separate stream so the shuffle sequence is independent of how many
    // draws initialization consumed
    SplitMix64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    std::vector<std::size_t> order(train_bags.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    EarlyStopper stopper(config.patience);
    TrainResult result;
    result.params = params;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        double train_loss_sum = 0.0;
        for (std::size_t idx : order) {
            const BagRef& item = train_bags[idx];
            ForwardTrace trace = run_forward(*item.bag, params);
            double loss = bce_loss(trace.prob, item.label);
            if (!std::isfinite(loss)) {
                result.history.stopped_epoch = epoch - 1;
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", bag '" + item.bag->slide_id + "'");
            }
            train_loss_sum += loss;
            AbmilGrads g = backward(trace, item.label, params);
            adam_step(params, g, adam, config.learning_rate, config.adam);
        }

        double val_loss_sum = 0.0;
        for (const auto& item : val_bags)
            val_loss_sum += bce_loss(forward(*item.bag, params).prob, item.label);
        double val_loss = val_loss_sum / static_cast<double>(val_bags.size());
        if (!std::isfinite(val_loss)) {
            result.history.stopped_epoch = epoch - 1;
            throw NumericError("train: non-finite validation loss at epoch " +
                               std::to_string(epoch));
        }

        result.history.epochs.push_back(
            {train_loss_sum / static_cast<double>(train_bags.size()), val_loss});
        result.history.stopped_epoch = epoch;

        bool stop = stopper.observe(epoch, val_loss);
        if (stopper.improved_last()) result.params = params;
        if (stop) break;
    }

    result.history.best_epoch = stopper.best_epoch();
    return result;
}

void write_params(const AbmilParams& params, std::ostream& sink) {
    require(params.V.rows() >= 1 && params.V.cols() >= 1, "write_params: empty parameters");
    sink.write(kMagic, 4);
    io::write_u16(sink, kVersion);
    io::write_u32(sink, static_cast<std::uint32_t>(params.dim()));
    io::write_u32(sink, static_cast<std::uint32_t>(params.hidden()));
    auto write_matrix = [&](const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                io::write_f32(sink, static_cast<float>(m(r, c)));
    };
    write_matrix(params.V);
    write_matrix(params.U);
    for (Eigen::Index i = 0; i < params.w.size(); ++i)
        io::write_f32(sink, static_cast<float>(params.w[i]));
    for (Eigen::Index i = 0; i < params.c.size(); ++i)
        io::write_f32(sink, static_cast<float>(params.c[i]));
    io::write_f32(sink, static_cast<float>(params.b));
    if (!sink) throw IoError("write_params: sink stream failed");
}

AbmilParams read_params(std::istream& source) {
    char magic[4];
    io::read_exact(source, magic, 4, "ABML magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("read_params: bad magic (expected 'ABML')");
    std::uint16_t version = io::read_u16(source, "ABML version");
    if (version != kVersion)
        throw FormatError("read_params: unsupported version " + std::to_string(version));

    std::uint32_t dim = io::read_u32(source, "D");
    std::uint32_t hidden = io::read_u32(source, "H");
    if (dim == 0 || hidden == 0) throw DataError("read_params: zero model dimensions");

    AbmilParams p;
    p.V.resize(hidden, dim);
    p.U.resize(hidden, dim);
    p.w.resize(hidden);
    p.c.resize(dim);
    auto read_matrix = [&](Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                m(r, c) = io::read_f32(source, "parameters");
    };
    read_matrix(p.V);
    read_matrix(p.U);
    for (Eigen::Index i = 0; i < p.w.size(); ++i) p.w[i] = io::read_f32(source, "parameters");
    for (Eigen::Index i = 0; i < p.c.size(); ++i) p.c[i] = io::read_f32(source, "parameters");
    p.b = io::read_f32(source, "parameters");

    if (!p.V.allFinite() || !p.U.allFinite() || !p.w.allFinite() || !p.c.allFinite() ||
        !std::isfinite(p.b))
        throw DataError("read_params: non-finite parameter values");
    return p;
}

void write_params_file(const AbmilParams& params, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    write_params(params, os);
    os.close();
    if (!os) throw IoError("failed writing '" + path.string() + "'");
}

AbmilParams read_params_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "' for reading");
    AbmilParams p = read_params(is);
    is.peek();
    if (!is.eof())
        throw FormatError("'" + path.string() + "': trailing bytes after checkpoint");
    return p;
}

}  // namespace slidemil::mil
