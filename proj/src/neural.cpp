#include "coalab/neural.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include "coalab/io.hpp"

namespace coalab {

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::Identity:
            return "identity";
        case Activation::Tanh:
            return "tanh";
        case Activation::Relu:
            return "relu";
    }
    return "identity";
}

Activation activation_from_string(std::string_view name) {
    if (name == "identity") {
        return Activation::Identity;
    }
    if (name == "tanh") {
        return Activation::Tanh;
    }
    if (name == "relu") {
        return Activation::Relu;
    }
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

namespace {

void apply(Activation a, Eigen::MatrixXd& z) {
    switch (a) {
        case Activation::Identity:
            break;
        case Activation::Tanh:
            z = z.array().tanh().matrix();
            break;
        case Activation::Relu:
            z = z.cwiseMax(0.0);
            break;
    }
}

// Multiplies the upstream gradient by the activation derivative, written in
// terms of the activation output y.
void apply_derivative(Activation a, const Eigen::MatrixXd& y, Eigen::MatrixXd& g) {
    switch (a) {
        case Activation::Identity:
            break;
        case Activation::Tanh:
            g.array() *= 1.0 - y.array().square();
            break;
        case Activation::Relu:
            g.array() *= (y.array() > 0.0).cast<double>();
            break;
    }
}

}  // namespace

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { check_chain(); }

void Mlp::check_chain() const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (l.bias.size() != l.weight.rows()) {
            throw std::invalid_argument("layer " + std::to_string(i) + ": bias length does not match weight rows");
        }
        if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows()) {
            throw std::invalid_argument("layer " + std::to_string(i) + ": input width " +
                                        std::to_string(l.weight.cols()) + " does not chain with previous output " +
                                        std::to_string(layers_[i - 1].weight.rows()));
        }
    }
}

Mlp Mlp::create(std::span<const std::size_t> sizes, Activation hidden, Activation output, double output_gain,
                Rng& rng) {
    if (sizes.size() < 2) {
        throw std::invalid_argument("Mlp::create needs at least input and output sizes");
    }
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        const auto in = static_cast<Eigen::Index>(sizes[i]);
        const auto out = static_cast<Eigen::Index>(sizes[i + 1]);
        const bool last = i + 2 == sizes.size();
        const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(in, 1)));
        std::uniform_real_distribution<double> u(-bound, bound);
        DenseLayer layer;
        layer.weight.resize(out, in);
        layer.bias.resize(out);
        // Fill in a fixed order so results do not depend on Eigen internals.
        for (Eigen::Index c = 0; c < in; ++c) {
            for (Eigen::Index r = 0; r < out; ++r) {
                layer.weight(r, c) = u(rng);
            }
        }
        for (Eigen::Index r = 0; r < out; ++r) {
            layer.bias(r) = u(rng);
        }
        if (last) {
            layer.weight *= output_gain;
            layer.bias.setZero();
        }
        layer.activation = last ? output : hidden;
        layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
}

std::size_t Mlp::input_size() const {
    return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t Mlp::output_size() const {
    return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) {
        n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    }
    return n;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
    if (static_cast<std::size_t>(input.size()) != input_size()) {
        throw std::invalid_argument("forward: input length " + std::to_string(input.size()) + ", network expects " +
                                    std::to_string(input_size()));
    }
    Eigen::MatrixXd x = input;
    for (const auto& l : layers_) {
        Eigen::MatrixXd z = l.weight * x;
        z.colwise() += l.bias;
        apply(l.activation, z);
        x = std::move(z);
    }
    return x.col(0);
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs, MlpTape* tape) const {
    if (static_cast<std::size_t>(inputs.rows()) != input_size()) {
        throw std::invalid_argument("forward_batch: input rows " + std::to_string(inputs.rows()) +
                                    ", network expects " + std::to_string(input_size()));
    }
    if (tape) {
        tape->inputs.clear();
        tape->outputs.clear();
    }
    Eigen::MatrixXd x = inputs;
    for (const auto& l : layers_) {
        Eigen::MatrixXd z = l.weight * x;
        z.colwise() += l.bias;
        apply(l.activation, z);
        if (tape) {
            tape->inputs.push_back(std::move(x));
            tape->outputs.push_back(z);
        }
        x = std::move(z);
    }
    return x;
}

Eigen::VectorXd Mlp::backward_batch(const MlpTape& tape, const Eigen::MatrixXd& upstream,
                                    Eigen::MatrixXd* input_grad) const {
    if (tape.inputs.size() != layers_.size()) {
        throw std::invalid_argument("backward_batch: tape does not belong to this network");
    }
    if (static_cast<std::size_t>(upstream.rows()) != output_size() ||
        upstream.cols() != tape.outputs.back().cols()) {
        throw std::invalid_argument("backward_batch: upstream gradient shape mismatch");
    }
    Eigen::VectorXd grads(static_cast<Eigen::Index>(parameter_count()));
    // Offsets of each layer's block in the flat vector.
    std::vector<Eigen::Index> offset(layers_.size());
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        offset[i] = off;
        off += layers_[i].weight.size() + layers_[i].bias.size();
    }

    Eigen::MatrixXd g = upstream;
    for (std::size_t k = layers_.size(); k-- > 0;) {
        const auto& l = layers_[k];
        apply_derivative(l.activation, tape.outputs[k], g);
        Eigen::Map<Eigen::MatrixXd> dw(grads.data() + offset[k], l.weight.rows(), l.weight.cols());
        dw.noalias() = g * tape.inputs[k].transpose();
        grads.segment(offset[k] + l.weight.size(), l.bias.size()) = g.rowwise().sum();
        if (k > 0 || input_grad) {
            Eigen::MatrixXd next = l.weight.transpose() * g;
            g = std::move(next);
        }
    }
    if (input_grad) {
        *input_grad = std::move(g);
    }
    return grads;
}

Eigen::VectorXd Mlp::parameters() const {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index off = 0;
    for (const auto& l : layers_) {
        flat.segment(off, l.weight.size()) = Eigen::Map<const Eigen::VectorXd>(l.weight.data(), l.weight.size());
        off += l.weight.size();
        flat.segment(off, l.bias.size()) = l.bias;
        off += l.bias.size();
    }
    return flat;
}

void Mlp::set_parameters(const Eigen::VectorXd& flat) {
    if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
        throw std::invalid_argument("set_parameters: expected " + std::to_string(parameter_count()) +
                                    " values, got " + std::to_string(flat.size()));
    }
    Eigen::Index off = 0;
    for (auto& l : layers_) {
        Eigen::Map<Eigen::VectorXd>(l.weight.data(), l.weight.size()) = flat.segment(off, l.weight.size());
        off += l.weight.size();
        l.bias = flat.segment(off, l.bias.size());
        off += l.bias.size();
    }
}

bool Mlp::same_shape(const Mlp& other) const {
    if (layers_.size() != other.layers_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].weight.rows() != other.layers_[i].weight.rows() ||
            layers_[i].weight.cols() != other.layers_[i].weight.cols()) {
            return false;
        }
    }
    return true;
}

bool operator==(const Mlp& a, const Mlp& b) {
    if (!a.same_shape(b)) {
        return false;
    }
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
        const auto& la = a.layers_[i];
        const auto& lb = b.layers_[i];
        if (la.activation != lb.activation || la.weight != lb.weight || la.bias != lb.bias) {
            return false;
        }
    }
    return true;
}

Gradients backward(const Mlp& net, const Eigen::VectorXd& input, const Eigen::VectorXd& upstream) {
    MlpTape tape;
    net.forward_batch(input, &tape);
    Eigen::MatrixXd in_grad;
    Gradients out;
    out.params = net.backward_batch(tape, upstream, &in_grad);
    out.input = in_grad.col(0);
    return out;
}

AdamState AdamState::for_size(std::size_t n, double lr) {
    AdamState s;
    s.first_moment = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    s.second_moment = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    s.lr = lr;
    return s;
}

void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads, AdamState& state) {
    if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size()) {
        throw std::invalid_argument("adam_step: shape mismatch");
    }
    if (!grads.allFinite()) {
        throw std::invalid_argument("adam_step: non-finite gradient");
    }
    ++state.timestep;
    state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
    state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.cwiseAbs2();
    const double t = static_cast<double>(state.timestep);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    params.array() -= state.lr * (state.first_moment.array() / c1) /
                      ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

void adam_step(Mlp& net, const Eigen::VectorXd& grads, AdamState& state) {
    Eigen::VectorXd p = net.parameters();
    adam_step(p, grads, state);
    net.set_parameters(p);
}

double clip_grad_norm(Eigen::VectorXd& grads, double max_norm) {
    const double n = grads.norm();
    if (max_norm > 0.0 && n > max_norm) {
        grads *= max_norm / n;
    }
    return n;
}

Mlp soft_update(const Mlp& target, const Mlp& online, double tau) {
    if (!target.same_shape(online)) {
        throw std::invalid_argument("soft_update: network shapes differ");
    }
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw std::invalid_argument("soft_update: tau must lie in [0, 1]");
    }
    Mlp out = target;
    for (std::size_t i = 0; i < out.layers().size(); ++i) {
        auto& l = out.layers()[i];
        const auto& o = online.layers()[i];
        l.weight = tau * o.weight + (1.0 - tau) * l.weight;
        l.bias = tau * o.bias + (1.0 - tau) * l.bias;
    }
    return out;
}

namespace {

constexpr char kMagic[8] = {'C', 'O', 'A', 'L', 'M', 'L', 'P', '\0'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
}

void put_f64(std::string& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
}

class Reader {
public:
    Reader(const std::string& data, const std::filesystem::path& path) : data_(data), path_(path) {}

    std::uint64_t bytes(int n) {
        if (pos_ + static_cast<std::size_t>(n) > data_.size()) {
            throw std::runtime_error("checkpoint " + path_.string() + " is truncated at byte " +
                                     std::to_string(pos_));
        }
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
        }
        return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(bytes(4)); }
    double f64() { return std::bit_cast<double>(bytes(8)); }
    [[nodiscard]] bool done() const { return pos_ == data_.size(); }

private:
    const std::string& data_;
    const std::filesystem::path& path_;
    std::size_t pos_ = 0;
};

std::uint32_t activation_code(Activation a) { return static_cast<std::uint32_t>(a); }

}  // namespace

void save_mlp(const Mlp& net, const std::filesystem::path& path, std::uint64_t creation_seed) {
    std::string out(kMagic, sizeof(kMagic));
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(net.layers().size()));
    for (const auto& l : net.layers()) {
        put_u32(out, static_cast<std::uint32_t>(l.weight.rows()));
        put_u32(out, static_cast<std::uint32_t>(l.weight.cols()));
        put_u32(out, activation_code(l.activation));
    }
    for (const auto& l : net.layers()) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
                put_f64(out, l.weight(r, c));
            }
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
            put_f64(out, l.bias(r));
        }
    }
    write_file_atomic(path, out);

    std::string manifest = "format = coalab-mlp\nversion = " + std::to_string(kCheckpointVersion) + "\n";
    manifest += "layers = " + std::to_string(net.layers().size()) + "\n";
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        const auto& l = net.layers()[i];
        manifest += "layer" + std::to_string(i) + " = " + std::to_string(l.weight.cols()) + "->" +
                    std::to_string(l.weight.rows()) + " " + std::string(to_string(l.activation)) + "\n";
    }
    manifest += "creation_seed = " + std::to_string(creation_seed) + "\n";
    std::filesystem::path side = path;
    side += ".manifest";
    write_file_atomic(side, manifest);
}

Mlp load_mlp(const std::filesystem::path& path) {
    const std::string data = read_file(path);
    Reader in(data, path);
    for (char m : kMagic) {
        if (static_cast<char>(in.bytes(1)) != m) {
            throw std::runtime_error(path.string() + " is not a coalab network checkpoint");
        }
    }
    const std::uint32_t version = in.u32();
    if (version != kCheckpointVersion) {
        throw std::runtime_error(path.string() + ": checkpoint version " + std::to_string(version) +
                                 ", this build reads version " + std::to_string(kCheckpointVersion));
    }
    const std::uint32_t count = in.u32();
    if (count == 0 || count > 64) {
        throw std::runtime_error(path.string() + ": implausible layer count " + std::to_string(count));
    }
    std::vector<DenseLayer> layers(count);
    for (auto& l : layers) {
        const std::uint32_t rows = in.u32();
        const std::uint32_t cols = in.u32();
        const std::uint32_t act = in.u32();
        if (rows == 0 || cols == 0 || rows > 1u << 16 || cols > 1u << 16) {
            throw std::runtime_error(path.string() + ": bad layer dimensions");
        }
        if (act > activation_code(Activation::Relu)) {
            throw std::runtime_error(path.string() + ": unknown activation code " + std::to_string(act));
        }
        l.weight.resize(rows, cols);
        l.bias.resize(rows);
        l.activation = static_cast<Activation>(act);
    }
    for (auto& l : layers) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
                l.weight(r, c) = in.f64();
            }
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
            l.bias(r) = in.f64();
        }
    }
    if (!in.done()) {
        throw std::runtime_error(path.string() + ": trailing bytes after last layer");
    }
    try {
        return Mlp(std::move(layers));
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

}  // namespace coalab
