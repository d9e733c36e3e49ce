#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "slidemil/encoder.hpp"

namespace slidemil::mil {

// Gated attention-MIL classifier over a bag of D-dim instances h_k:
//   score_k = w' (tanh(V h_k) ⊙ sigmoid(U h_k))
//   a = softmax(score),  z = Σ_k a_k h_k,  prob = sigmoid(c' z + b)
// Parameters are held in 64-bit for arithmetic and serialized as 32-bit.
struct AbmilParams {
    Eigen::MatrixXd V;  // H x D
    Eigen::MatrixXd U;  // H x D
    Eigen::VectorXd w;  // H
    Eigen::VectorXd c;  // D
    double b = 0.0;

    Eigen::Index dim() const { return V.cols(); }
    Eigen::Index hidden() const { return V.rows(); }
};

// Seeded uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) per output unit, drawn in
// the fixed order V rows, U rows, w, c, b.
AbmilParams init_params(std::uint32_t dim, std::uint32_t hidden, std::uint64_t seed);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    double learning_rate = 1e-4;
    int max_epochs = 50;
    int patience = 8;  // consecutive epochs without val-loss improvement
    std::uint64_t seed = 0;
    std::uint32_t hidden_dim = 128;
    AdamConfig adam;
};

struct ForwardResult {
    double prob = 0.0;             // strictly in (0,1)
    Eigen::VectorXd attention;     // n entries, >= 0, sums to 1
};

ForwardResult forward(const encoder::EmbeddingBag& bag, const AbmilParams& params);

// Binary cross-entropy; probabilities clamped to [1e-12, 1-1e-12] before the
// logs. y = 1 for the positive class.
double bce_loss(double prob, core::Label label);

struct AbmilGrads {
    Eigen::MatrixXd V;
    Eigen::MatrixXd U;
    Eigen::VectorXd w;
    Eigen::VectorXd c;
    double b = 0.0;
};

// Analytic gradients of bce_loss(forward(bag), label) w.r.t. every parameter.
AbmilGrads grad(const encoder::EmbeddingBag& bag, core::Label label,
                const AbmilParams& params);

struct AdamState {
    Eigen::MatrixXd mV, vV, mU, vU;
    Eigen::VectorXd mw, vw, mc, vc;
    double mb = 0.0, vb = 0.0;
    long t = 0;
};

AdamState make_adam_state(const AbmilParams& params);

void adam_step(AbmilParams& params, const AbmilGrads& grads, AdamState& state,
               double learning_rate, const AdamConfig& config);

struct EpochLoss {
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainHistory {
    std::vector<EpochLoss> epochs;  // epochs[i] is epoch i+1
    int stopped_epoch = 0;          // last completed epoch
    int best_epoch = 0;             // argmin of val_loss
};

// Tracks the running minimum of the validation loss. "Improvement" is a
// strict decrease by any amount; after `patience` consecutive epochs without
// one, observe() returns true.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience);

    // Call once per epoch, epochs numbered from 1. Returns true when
    // training should stop after this epoch.
    bool observe(int epoch, double val_loss);

    bool improved_last() const { return improved_last_; }
    int best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }

private:
    int patience_;
    int stale_ = 0;
    bool improved_last_ = false;
    int best_epoch_ = 0;
    double best_loss_;
};

struct BagRef {
    const encoder::EmbeddingBag* bag = nullptr;
    core::Label label = core::Label::EgfrNeg;
};

struct TrainResult {
    AbmilParams params;    // snapshot from the best epoch
    TrainHistory history;
};

// Bag-level SGD (batch of one bag), order reshuffled each epoch by a seeded
// PRNG; per-epoch validation loss drives early stopping. Deterministic for a
// fixed (data, config.seed).
TrainResult train(std::span<const BagRef> train_bags, std::span<const BagRef> val_bags,
                  const TrainConfig& config);

// .abml checkpoint: magic "ABML" | version u16 (=1) | D u32 | H u32 |
// V, U, w, c, b as little-endian f32 (V, U row-major).
void write_params(const AbmilParams& params, std::ostream& sink);
AbmilParams read_params(std::istream& source);
void write_params_file(const AbmilParams& params, const std::filesystem::path& path);
AbmilParams read_params_file(const std::filesystem::path& path);

}  // namespace slidemil::mil
