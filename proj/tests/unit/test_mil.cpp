#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>
#include <vector>

#include "slidemil/mil.hpp"
#include "slidemil/rng.hpp"
#include "slidemil/metrics.hpp"
#include "slidemil/synth.hpp"

using namespace slidemil;
using namespace slidemil::mil;
using core::Label;

namespace {

encoder::EmbeddingBag random_bag(std::uint32_t n, std::uint32_t dim, std::uint64_t seed) {
    encoder::EmbeddingBag bag;
    bag.slide_id = "b" + std::to_string(seed);
    bag.dim = dim;
    bag.matrix.resize(n, dim);
    bag.coords.resize(n);
    SplitMix64 rng(seed);
    for (std::uint32_t r = 0; r < n; ++r) {
        bag.coords[r] = {r, 0};
        for (std::uint32_t c = 0; c < dim; ++c)
            bag.matrix(r, c) = static_cast<float>(rng.next_uniform(-2.0, 2.0));
    }
    return bag;
}

// independent straight-line reimplementation of the four model equations,
// plain loops over std::vector, no shared code with the library path
double naive_forward_prob(const encoder::EmbeddingBag& bag, const AbmilParams& p,
                          std::vector<double>* attention_out = nullptr) {
    const std::size_t n = bag.size();
    const std::size_t D = bag.dim;
    const std::size_t H = static_cast<std::size_t>(p.hidden());

    std::vector<double> scores(n);
    for (std::size_t k = 0; k < n; ++k) {
        double score = 0.0;
        for (std::size_t j = 0; j < H; ++j) {
            double vh = 0.0, uh = 0.0;
            for (std::size_t d = 0; d < D; ++d) {
                double hkd = static_cast<double>(bag.matrix(static_cast<Eigen::Index>(k),
                                                            static_cast<Eigen::Index>(d)));
                vh += p.V(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(d)) * hkd;
                uh += p.U(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(d)) * hkd;
            }
            score += p.w[static_cast<Eigen::Index>(j)] * std::tanh(vh) *
                     (1.0 / (1.0 + std::exp(-uh)));
        }
        scores[k] = score;
    }

    double max_score = scores[0];
    for (double s : scores) max_score = std::max(max_score, s);
    std::vector<double> att(n);
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        att[k] = std::exp(scores[k] - max_score);
        denom += att[k];
    }
    for (auto& a : att) a /= denom;

    double logit = p.b;
    for (std::size_t d = 0; d < D; ++d) {
        double zd = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            zd += att[k] * static_cast<double>(bag.matrix(static_cast<Eigen::Index>(k),
                                                          static_cast<Eigen::Index>(d)));
        logit += p.c[static_cast<Eigen::Index>(d)] * zd;
    }
    if (attention_out) *attention_out = att;
    return 1.0 / (1.0 + std::exp(-logit));
}

// central finite differences of bce(forward(.)) over every coordinate
struct FlatGrads {
    std::vector<double> values;
};

double loss_at(const encoder::EmbeddingBag& bag, Label label, const AbmilParams& p) {
    return bce_loss(forward(bag, p).prob, label);
}

// per-tensor relative error: ||analytic - fd||_inf / max(1e-8, scale)
// where scale is the largest magnitude across both gradients
double fd_relative_error(const encoder::EmbeddingBag& bag, Label label, AbmilParams p,
                         double step) {
    AbmilGrads analytic = grad(bag, label, p);

    auto tensor_error = [&](auto get_ref, const auto& analytic_tensor) {
        double max_diff = 0.0, scale = 0.0;
        for (Eigen::Index i = 0; i < analytic_tensor.size(); ++i) {
            double* coord = get_ref(p, i);
            double saved = *coord;
            *coord = saved + step;
            double up = loss_at(bag, label, p);
            *coord = saved - step;
            double down = loss_at(bag, label, p);
            *coord = saved;
            double fd = (up - down) / (2.0 * step);
            double a = analytic_tensor.data()[i];
            max_diff = std::max(max_diff, std::abs(a - fd));
            scale = std::max({scale, std::abs(a), std::abs(fd)});
        }
        return max_diff / std::max(scale, 1e-8);
    };

    double err = 0.0;
    err = std::max(err, tensor_error([](AbmilParams& q, Eigen::Index i) { return q.V.data() + i; },
                                     analytic.V));
    err = std::max(err, tensor_error([](AbmilParams& q, Eigen::Index i) { return q.U.data() + i; },
                                     analytic.U));
    err = std::max(err, tensor_error([](AbmilParams& q, Eigen::Index i) { return q.w.data() + i; },
                                     analytic.w));
    err = std::max(err, tensor_error([](AbmilParams& q, Eigen::Index i) { return q.c.data() + i; },
                                     analytic.c));
    // scalar bias
    {
        double saved = p.b;
        p.b = saved + step;
        double up = loss_at(bag, label, p);
        p.b = saved - step;
        double down = loss_at(bag, label, p);
        p.b = saved;
        double fd = (up - down) / (2.0 * step);
        err = std::max(err, std::abs(analytic.b - fd) /
                                std::max({std::abs(analytic.b), std::abs(fd), 1e-8}));
    }
    return err;
}

}  // namespace

TEST_CASE("forward: singleton bag has attention exactly one") {
    auto bag = random_bag(1, 6, 1);
    auto params = init_params(6, 3, 2);
    auto result = forward(bag, params);
    REQUIRE(result.attention.size() == 1);
    CHECK(result.attention[0] == 1.0);
    CHECK(result.prob > 0.0);
    CHECK(result.prob < 1.0);
}

TEST_CASE("forward: identical rows give uniform attention and z == h") {
    const std::uint32_t n = 7, dim = 5;
    encoder::EmbeddingBag bag;
    bag.slide_id = "same";
    bag.dim = dim;
    bag.matrix.resize(n, dim);
    bag.coords.resize(n);
    SplitMix64 rng(3);
    Eigen::VectorXf row(dim);
    for (std::uint32_t d = 0; d < dim; ++d) row[d] = static_cast<float>(rng.next_uniform(-1, 1));
    for (std::uint32_t k = 0; k < n; ++k) bag.matrix.row(k) = row.transpose();

    auto params = init_params(dim, 4, 4);
    auto result = forward(bag, params);
    for (std::uint32_t k = 0; k < n; ++k)
        CHECK(result.attention[k] == doctest::Approx(1.0 / n).epsilon(1e-12));

    // prob == sigmoid(c' h + b)
    double logit = params.b;
    for (std::uint32_t d = 0; d < dim; ++d)
        logit += params.c[d] * static_cast<double>(row[d]);
    CHECK(result.prob == doctest::Approx(1.0 / (1.0 + std::exp(-logit))).epsilon(1e-12));
}

TEST_CASE("forward matches the straight-line dual implementation") {
    // the spec instance: n=5, D=8, H=4, seeded
    auto bag = random_bag(5, 8, 10);
    auto params = init_params(8, 4, 11);
    std::vector<double> naive_att;
    double naive = naive_forward_prob(bag, params, &naive_att);
    auto result = forward(bag, params);
    CHECK(std::abs(result.prob - naive) <= 1e-12);
    for (int k = 0; k < 5; ++k)
        CHECK(std::abs(result.attention[k] - naive_att[static_cast<std::size_t>(k)]) <= 1e-12);

    SplitMix64 rng(12);
    for (int t = 0; t < 50; ++t) {
        auto n = static_cast<std::uint32_t>(1 + rng.next_below(12));
        auto dim = static_cast<std::uint32_t>(1 + rng.next_below(10));
        auto hidden = static_cast<std::uint32_t>(1 + rng.next_below(6));
        auto b = random_bag(n, dim, 100 + static_cast<std::uint64_t>(t));
        auto p = init_params(dim, hidden, 200 + static_cast<std::uint64_t>(t));
        CHECK(std::abs(forward(b, p).prob - naive_forward_prob(b, p)) <= 1e-12);
    }
}

TEST_CASE("forward contract violations") {
    auto bag = random_bag(3, 6, 20);
    auto params = init_params(7, 3, 21);  // wrong D
    CHECK_THROWS_AS(forward(bag, params), ContractError);

    auto good = init_params(6, 3, 22);
    good.V(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(forward(bag, good), NumericError);
}

TEST_CASE("bce_loss analytic values") {
    CHECK(bce_loss(0.5, Label::EgfrPos) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bce_loss(0.5, Label::EgfrNeg) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bce_loss(1.0 - 1e-12, Label::EgfrPos) <= 1e-9);
    CHECK(bce_loss(0.25, Label::EgfrNeg) == doctest::Approx(-std::log(0.75)).epsilon(1e-12));
    // clamping keeps the endpoints finite
    CHECK(std::isfinite(bce_loss(0.0, Label::EgfrPos)));
    CHECK(std::isfinite(bce_loss(1.0, Label::EgfrNeg)));
}

TEST_CASE("grad shapes match parameter shapes") {
    auto bag = random_bag(4, 6, 30);
    auto params = init_params(6, 3, 31);
    auto g = grad(bag, Label::EgfrPos, params);
    CHECK(g.V.rows() == params.V.rows());
    CHECK(g.V.cols() == params.V.cols());
    CHECK(g.U.rows() == params.U.rows());
    CHECK(g.w.size() == params.w.size());
    CHECK(g.c.size() == params.c.size());
}

TEST_CASE("grad agrees with central finite differences") {
    SplitMix64 rng(32);
    for (int t = 0; t < 10; ++t) {
        auto n = static_cast<std::uint32_t>(1 + rng.next_below(4));  // n <= 4
        auto dim = static_cast<std::uint32_t>(2 + rng.next_below(5));
        auto hidden = static_cast<std::uint32_t>(1 + rng.next_below(3));
        auto bag = random_bag(n, dim, 300 + static_cast<std::uint64_t>(t));
        auto params = init_params(dim, hidden, 400 + static_cast<std::uint64_t>(t));
        Label label = t % 2 == 0 ? Label::EgfrPos : Label::EgfrNeg;
        CHECK(fd_relative_error(bag, label, params, 1e-3) < 1e-4);
    }
}

TEST_CASE("grad degenerate case: zero attention weights") {
    // w = 0 makes the attention uniform, so dL/dc = (p - y) * mean(h)
    auto bag = random_bag(6, 5, 40);
    auto params = init_params(5, 3, 41);
    params.w.setZero();

    auto result = forward(bag, params);
    for (int k = 0; k < 6; ++k)
        CHECK(result.attention[k] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));

    auto g = grad(bag, Label::EgfrPos, params);
    Eigen::VectorXd mean_h = bag.matrix.cast<double>().colwise().mean();
    Eigen::VectorXd expected = (result.prob - 1.0) * mean_h;
    for (int d = 0; d < 5; ++d)
        CHECK(g.c[d] == doctest::Approx(expected[d]).epsilon(1e-10));
}

TEST_CASE("adam_step behavior") {
    auto params = init_params(4, 2, 50);
    auto state = make_adam_state(params);
    AdamConfig cfg;

    SUBCASE("zero gradient leaves parameters unchanged and advances t") {
        AbmilGrads zeros;
        zeros.V = Eigen::MatrixXd::Zero(2, 4);
        zeros.U = zeros.V;
        zeros.w = Eigen::VectorXd::Zero(2);
        zeros.c = Eigen::VectorXd::Zero(4);
        zeros.b = 0.0;
        auto before = params;
        adam_step(params, zeros, state, 1e-3, cfg);
        CHECK(state.t == 1);
        CHECK(params.V == before.V);
        CHECK(params.U == before.U);
        CHECK(params.w == before.w);
        CHECK(params.c == before.c);
        CHECK(params.b == before.b);
    }
    SUBCASE("first step moves each coordinate by about lr against the gradient") {
        AbmilGrads g;
        g.V = Eigen::MatrixXd::Constant(2, 4, 0.5);
        g.U = Eigen::MatrixXd::Constant(2, 4, -1.25);
        g.w = Eigen::VectorXd::Constant(2, 2.0);
        g.c = Eigen::VectorXd::Constant(4, -0.01);
        g.b = 0.75;
        auto before = params;
        const double lr = 1e-3;
        adam_step(params, g, state, lr, cfg);
        // closed form for t=1: delta = lr * g / (|g| + eps) ~= lr * sign(g)
        CHECK(params.V(0, 0) - before.V(0, 0) ==
              doctest::Approx(-lr * 0.5 / (0.5 + cfg.eps)).epsilon(1e-12));
        CHECK(params.U(1, 3) - before.U(1, 3) ==
              doctest::Approx(lr * 1.25 / (1.25 + cfg.eps)).epsilon(1e-12));
        CHECK(params.b - before.b == doctest::Approx(-lr * 0.75 / (0.75 + cfg.eps)).epsilon(1e-12));
    }
    SUBCASE("identical states and grads produce identical results") {
        auto params2 = params;
        auto state2 = make_adam_state(params2);
        AbmilGrads g;
        g.V = Eigen::MatrixXd::Constant(2, 4, 0.3);
        g.U = Eigen::MatrixXd::Constant(2, 4, 0.1);
        g.w = Eigen::VectorXd::Constant(2, -0.2);
        g.c = Eigen::VectorXd::Constant(4, 0.9);
        g.b = -0.4;
        adam_step(params, g, state, 1e-3, cfg);
        adam_step(params2, g, state2, 1e-3, cfg);
        CHECK(params.V == params2.V);
        CHECK(params.b == params2.b);
    }
}

TEST_CASE("one small adam step on a single bag decreases its loss") {
    SplitMix64 rng(60);
    for (int t = 0; t < 20; ++t) {
        auto bag = random_bag(static_cast<std::uint32_t>(1 + rng.next_below(6)), 6,
                              500 + static_cast<std::uint64_t>(t));
        auto params = init_params(6, 4, 600 + static_cast<std::uint64_t>(t));
        Label label = t % 2 == 0 ? Label::EgfrPos : Label::EgfrNeg;
        double before = loss_at(bag, label, params);
        auto state = make_adam_state(params);
        adam_step(params, grad(bag, label, params), state, 1e-5, AdamConfig{});
        CHECK(loss_at(bag, label, params) < before);
    }
}

TEST_CASE("permutation invariance and attention simplex") {
    SplitMix64 rng(70);
    for (int t = 0; t < 100; ++t) {
        auto n = static_cast<std::uint32_t>(1 + rng.next_below(16));
        auto dim = static_cast<std::uint32_t>(1 + rng.next_below(8));
        auto bag = random_bag(n, dim, 700 + static_cast<std::uint64_t>(t));
        auto params = init_params(dim, 4, 800 + static_cast<std::uint64_t>(t));
        auto base = forward(bag, params);

        double sum = 0.0;
        for (std::uint32_t k = 0; k < n; ++k) {
            CHECK(base.attention[k] >= 0.0);
            sum += base.attention[k];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-6);

        std::vector<std::uint32_t> perm(n);
        for (std::uint32_t k = 0; k < n; ++k) perm[k] = k;
        rng.shuffle(perm);
        auto shuffled = bag;
        for (std::uint32_t k = 0; k < n; ++k) {
            shuffled.matrix.row(k) = bag.matrix.row(perm[k]);
            shuffled.coords[k] = bag.coords[perm[k]];
        }
        auto permuted = forward(shuffled, params);
        CHECK(std::abs(permuted.prob - base.prob) <= 1e-6);
        for (std::uint32_t k = 0; k < n; ++k)
            CHECK(std::abs(permuted.attention[k] - base.attention[perm[k]]) <= 1e-6);
    }
}

TEST_CASE("early stopping rule traces") {
    SUBCASE("monotone improvement runs forever, best is last") {
        EarlyStopper stopper(8);
        double loss = 0.9;
        for (int epoch = 1; epoch <= 50; ++epoch) {
            CHECK_FALSE(stopper.observe(epoch, loss));
            loss -= 0.01;
        }
        CHECK(stopper.best_epoch() == 50);
    }
    SUBCASE("flat sequence after epoch 2 stops at epoch 10") {
        EarlyStopper stopper(8);
        CHECK_FALSE(stopper.observe(1, 0.9));
        CHECK_FALSE(stopper.observe(2, 0.8));
        for (int epoch = 3; epoch <= 9; ++epoch) CHECK_FALSE(stopper.observe(epoch, 0.8));
        CHECK(stopper.observe(10, 0.8));  // 8th consecutive non-improving epoch
        CHECK(stopper.best_epoch() == 2);
        CHECK(stopper.best_loss() == 0.8);
    }
    SUBCASE("equal loss is not an improvement, lower is") {
        EarlyStopper stopper(2);
        stopper.observe(1, 0.5);
        CHECK_FALSE(stopper.observe(2, 0.5));
        CHECK_FALSE(stopper.observe(3, 0.4999));
        CHECK(stopper.best_epoch() == 3);
    }
}

TEST_CASE("train learns a separable synthetic cohort") {
    synth::SynthBagSpec spec;
    spec.n_bags = 100;
    spec.dim = 16;
    spec.seed = 5;
    auto cohort = synth::generate_bags(spec);

    std::vector<BagRef> train_refs, val_refs;
    for (std::size_t i = 0; i < cohort.bags.size(); ++i) {
        // interleave so both sides keep both classes: 80 train / 20 val
        auto& item = cohort.bags[i];
        (i % 5 == 4 ? val_refs : train_refs).push_back({&item.bag, item.label});
    }
    REQUIRE(train_refs.size() == 80);
    REQUIRE(val_refs.size() == 20);

    // smaller attention head and a slightly hotter step than the clinical
    // defaults: 16-dim synthetic instances need far less capacity
    TrainConfig config;
    config.seed = 7;
    config.learning_rate = 3e-3;
    config.hidden_dim = 32;
    auto result = train(train_refs, val_refs, config);

    CHECK(result.history.best_epoch >= 1);
    CHECK(result.history.stopped_epoch <= config.max_epochs);
    CHECK(static_cast<int>(result.history.epochs.size()) == result.history.stopped_epoch);

    // validation AUC at the returned parameters
    std::vector<double> scores;
    std::vector<Label> labels;
    for (const auto& ref : val_refs) {
        scores.push_back(forward(*ref.bag, result.params).prob);
        labels.push_back(ref.label);
    }
    auto roc = metrics::roc_auc(scores, labels);
    CHECK(roc.auc >= 0.95);

    SUBCASE("training is deterministic") {
        auto again = train(train_refs, val_refs, config);
        CHECK(again.history.best_epoch == result.history.best_epoch);
        CHECK(again.history.stopped_epoch == result.history.stopped_epoch);
        REQUIRE(again.history.epochs.size() == result.history.epochs.size());
        for (std::size_t e = 0; e < result.history.epochs.size(); ++e) {
            CHECK(again.history.epochs[e].train_loss == result.history.epochs[e].train_loss);
            CHECK(again.history.epochs[e].val_loss == result.history.epochs[e].val_loss);
        }
        CHECK(again.params.V == result.params.V);
        CHECK(again.params.U == result.params.U);
        CHECK(again.params.w == result.params.w);
        CHECK(again.params.c == result.params.c);
        CHECK(again.params.b == result.params.b);
    }
}

TEST_CASE("train contract violations") {
    TrainConfig config;
    CHECK_THROWS_AS(train({}, {}, config), ContractError);
}

TEST_CASE("checkpoint round trip is bit exact") {
    SplitMix64 rng(90);
    for (int t = 0; t < 20; ++t) {
        auto dim = static_cast<std::uint32_t>(1 + rng.next_below(12));
        auto hidden = static_cast<std::uint32_t>(1 + rng.next_below(8));
        auto params = init_params(dim, hidden, 900 + static_cast<std::uint64_t>(t));

        std::ostringstream os;
        write_params(params, os);
        std::istringstream is(os.str());
        auto back = read_params(is);
        std::ostringstream os2;
        write_params(back, os2);
        CHECK(os.str() == os2.str());
        CHECK(back.dim() == params.dim());
        CHECK(back.hidden() == params.hidden());
        // values round-trip through f32 exactly once
        CHECK(static_cast<float>(back.V(0, 0)) == static_cast<float>(params.V(0, 0)));
    }

    SUBCASE("corrupt checkpoint streams are rejected") {
        auto params = init_params(3, 2, 99);
        std::ostringstream os;
        write_params(params, os);
        std::string bytes = os.str();

        std::string bad_magic = bytes;
        bad_magic[0] = 'X';
        std::istringstream is1(bad_magic);
        CHECK_THROWS_AS(read_params(is1), FormatError);

        std::istringstream is2(bytes.substr(0, bytes.size() - 3));
        CHECK_THROWS_AS(read_params(is2), TruncationError);
    }
}
