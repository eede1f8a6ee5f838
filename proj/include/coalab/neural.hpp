#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "coalab/rng.hpp"

namespace coalab {

enum class Activation { Identity, Tanh, Relu };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct DenseLayer {
    Eigen::MatrixXd weight;  // rows = outputs, cols = inputs
    Eigen::VectorXd bias;
    Activation activation = Activation::Identity;
};

/// Activations cached by a batched forward pass, consumed by backward().
struct MlpTape {
    std::vector<Eigen::MatrixXd> inputs;   // input to each layer
    std::vector<Eigen::MatrixXd> outputs;  // post-activation output of each layer
};

/// Fully connected feed-forward network. Batched calls take one sample per
/// column. Parameters flatten layer by layer, weight (column-major) then bias.
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<DenseLayer> layers);

    /// sizes = {in, hidden..., out}. Hidden layers and biases draw from
    /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)); the output weights are further
    /// multiplied by output_gain and the output bias starts at zero.
    static Mlp create(std::span<const std::size_t> sizes, Activation hidden, Activation output, double output_gain,
                      Rng& rng);

    [[nodiscard]] std::size_t input_size() const;
    [[nodiscard]] std::size_t output_size() const;
    [[nodiscard]] std::size_t parameter_count() const;
    [[nodiscard]] const std::vector<DenseLayer>& layers() const { return layers_; }
    [[nodiscard]] std::vector<DenseLayer>& layers() { return layers_; }

    [[nodiscard]] Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs, MlpTape* tape = nullptr) const;

    /// Accumulates d(sum of upstream . output)/d(params) over the batch into a
    /// flat gradient. If input_grad is non-null it receives d/d(inputs).
    [[nodiscard]] Eigen::VectorXd backward_batch(const MlpTape& tape, const Eigen::MatrixXd& upstream,
                                                 Eigen::MatrixXd* input_grad = nullptr) const;

    [[nodiscard]] Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);

    [[nodiscard]] bool same_shape(const Mlp& other) const;

    friend bool operator==(const Mlp& a, const Mlp& b);

private:
    void check_chain() const;

    std::vector<DenseLayer> layers_;
};

struct Gradients {
    Eigen::VectorXd params;
    Eigen::VectorXd input;
};

/// Single-sample reverse pass.
Gradients backward(const Mlp& net, const Eigen::VectorXd& input, const Eigen::VectorXd& upstream);

struct AdamState {
    Eigen::VectorXd first_moment;
    Eigen::VectorXd second_moment;
    std::int64_t timestep = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_size(std::size_t n, double lr);
};

/// One bias-corrected Adam descent step on params. Throws on non-finite grads.
void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads, AdamState& state);
void adam_step(Mlp& net, const Eigen::VectorXd& grads, AdamState& state);

/// Rescales grads in place so that their norm is at most max_norm. Returns
/// the norm before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(Eigen::VectorXd& grads, double max_norm);

/// tau * online + (1 - tau) * target, elementwise.
Mlp soft_update(const Mlp& target, const Mlp& online, double tau);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian binary checkpoint plus a "<path>.manifest" text sidecar.
void save_mlp(const Mlp& net, const std::filesystem::path& path, std::uint64_t creation_seed = 0);
Mlp load_mlp(const std::filesystem::path& path);

}  // namespace coalab
