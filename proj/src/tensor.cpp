#include "dtse/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "csv_util.hpp"
#include "dtse/error.hpp"

namespace dtse::ad {

// -- Tensor --

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows * cols)
        fail(ErrorCode::ShapeMismatch, std::to_string(data_.size()) + " values for shape " + shape_string());
}

Tensor::Tensor(std::initializer_list<std::initializer_list<double>> rows) : rows_(rows.size()) {
    cols_ = rows.size() ? rows.begin()->size() : 0;
    for (const auto& r : rows) {
        if (r.size() != cols_) fail(ErrorCode::ShapeMismatch, "ragged tensor literal");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

double Tensor::item() const {
    if (data_.size() != 1) fail(ErrorCode::ShapeMismatch, "item() on a " + shape_string() + " tensor");
    return data_[0];
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

// -- Parameters --

Parameter::Parameter(std::string n, Tensor v, InitRecord i)
    : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()), init(std::move(i)) {}

void Parameter::zero_grad() {
    if (!grad.same_shape(value)) grad = Tensor(value.rows(), value.cols());
    grad.fill(0.0);
    has_grad = false;
}

Parameter& ParameterSet::add(Parameter p) {
    if (index_.count(p.name)) fail(ErrorCode::InvalidArgument, "duplicate parameter '" + p.name + "'");
    index_.emplace(p.name, items_.size());
    items_.push_back(std::move(p));
    return items_.back();
}

Parameter& ParameterSet::add_uniform(const std::string& name, std::size_t rows, std::size_t cols, std::uint64_t seed) {
    const double bound = std::sqrt(1.0 / static_cast<double>(rows));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(rows, cols);
    for (auto& v : t.values()) v = dist(rng);
    return add(Parameter(name, std::move(t), InitRecord{"uniform", bound, seed}));
}

Parameter& ParameterSet::add_zeros(const std::string& name, std::size_t rows, std::size_t cols) {
    return add(Parameter(name, Tensor(rows, cols), InitRecord{"zeros", 0.0, 0}));
}

Parameter& ParameterSet::operator[](const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorCode::InvalidArgument, "no parameter '" + name + "'");
    return items_[it->second];
}

const Parameter& ParameterSet::operator[](const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorCode::InvalidArgument, "no parameter '" + name + "'");
    return items_[it->second];
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : items_) n += p.value.size();
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& p : items_) p.zero_grad();
}

// -- Tape --

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::Constant: return "constant";
        case OpKind::Param: return "param";
        case OpKind::MatMul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Scale: return "scale";
        case OpKind::Transpose: return "transpose";
        case OpKind::RowSoftmax: return "row_softmax";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::Relu: return "relu";
        case OpKind::ConcatCols: return "concat_lastdim";
        case OpKind::SliceCols: return "slice";
        case OpKind::MeanAll: return "mean_all";
        case OpKind::Square: return "square";
    }
    return "?";
}

namespace {

[[noreturn]] void shape_error(OpKind kind, const std::string& detail) {
    fail(ErrorCode::ShapeMismatch, std::string(op_name(kind)) + ": " + detail);
}

// Right operand either matches the left or is a single row broadcast over it.
bool broadcast_rows(OpKind kind, const Tensor& a, const Tensor& b) {
    if (a.same_shape(b)) return false;
    if (b.rows() == 1 && b.cols() == a.cols()) return true;
    shape_error(kind, a.shape_string() + " vs " + b.shape_string());
}

Tensor matmul_values(const Tensor& a, const Tensor& b) {
    Tensor c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

// c += a^T * b
void accumulate_at_b(Tensor& c, const Tensor& a, const Tensor& b) {
    for (std::size_t k = 0; k < a.rows(); ++k)
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
        }
}

// c += a * b^T
void accumulate_a_bt(Tensor& c, const Tensor& a, const Tensor& b) {
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
            c(i, j) += s;
        }
}

}  // namespace

Var Tape::push(Node node) {
    if (!node.value.all_finite())
        fail(ErrorCode::NonFiniteValue, std::string(op_name(node.kind)) + " produced a non-finite value");
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
    Node n;
    n.kind = OpKind::Constant;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
    Node n;
    n.kind = OpKind::Param;
    n.value = p.value;
    n.param = &p;
    return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
    OpArgs args;
    args.factor = factor;
    return apply(OpKind::Scale, std::span<const Var>(&a, 1), args);
}

Var Tape::concat_cols(std::initializer_list<Var> parts) {
    return apply(OpKind::ConcatCols, std::span<const Var>(parts.begin(), parts.size()));
}

Var Tape::slice_cols(Var a, std::size_t begin, std::size_t end) {
    OpArgs args;
    args.begin = begin;
    args.end = end;
    return apply(OpKind::SliceCols, std::span<const Var>(&a, 1), args);
}

Var Tape::apply(OpKind kind, std::span<const Var> inputs, const OpArgs& args) {
    for (const auto& v : inputs)
        if (v.id >= nodes_.size()) fail(ErrorCode::InvalidArgument, "variable does not belong to this tape");
    auto in = [&](std::size_t i) -> const Tensor& { return nodes_[inputs[i].id].value; };
    auto arity = [&](std::size_t n) {
        if (inputs.size() != n) shape_error(kind, "expected " + std::to_string(n) + " inputs");
    };

    Node node;
    node.kind = kind;
    node.args = args;
    for (const auto& v : inputs) node.inputs.push_back(v.id);

    switch (kind) {
        case OpKind::Constant:
        case OpKind::Param: fail(ErrorCode::InvalidArgument, "leaves are created with constant() or parameter()");
        case OpKind::MatMul: {
            arity(2);
            if (in(0).cols() != in(1).rows()) shape_error(kind, in(0).shape_string() + " * " + in(1).shape_string());
            node.value = matmul_values(in(0), in(1));
            break;
        }
        case OpKind::Add:
        case OpKind::Sub:
        case OpKind::Mul: {
            arity(2);
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            const bool bc = broadcast_rows(kind, a, b);
            node.value = Tensor(a.rows(), a.cols());
            for (std::size_t r = 0; r < a.rows(); ++r)
                for (std::size_t c = 0; c < a.cols(); ++c) {
                    const double bv = bc ? b(0, c) : b(r, c);
                    const double av = a(r, c);
                    node.value(r, c) = kind == OpKind::Add ? av + bv : kind == OpKind::Sub ? av - bv : av * bv;
                }
            break;
        }
        case OpKind::Scale: {
            arity(1);
            node.value = in(0);
            for (auto& v : node.value.values()) v *= args.factor;
            break;
        }
        case OpKind::Transpose: {
            arity(1);
            const Tensor& a = in(0);
            node.value = Tensor(a.cols(), a.rows());
            for (std::size_t r = 0; r < a.rows(); ++r)
                for (std::size_t c = 0; c < a.cols(); ++c) node.value(c, r) = a(r, c);
            break;
        }
        case OpKind::RowSoftmax: {
            arity(1);
            const Tensor& a = in(0);
            if (a.cols() == 0) shape_error(kind, "empty rows");
            node.value = Tensor(a.rows(), a.cols());
            for (std::size_t r = 0; r < a.rows(); ++r) {
                double mx = a(r, 0);
                for (std::size_t c = 1; c < a.cols(); ++c) mx = std::max(mx, a(r, c));
                double sum = 0.0;
                for (std::size_t c = 0; c < a.cols(); ++c) sum += node.value(r, c) = std::exp(a(r, c) - mx);
                for (std::size_t c = 0; c < a.cols(); ++c) node.value(r, c) /= sum;
            }
            break;
        }
        case OpKind::Sigmoid: {
            arity(1);
            node.value = in(0);
            for (auto& v : node.value.values()) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
            break;
        }
        case OpKind::Relu: {
            arity(1);
            node.value = in(0);
            for (auto& v : node.value.values()) v = v > 0.0 ? v : 0.0;
            break;
        }
        case OpKind::ConcatCols: {
            if (inputs.empty()) shape_error(kind, "no inputs");
            const std::size_t rows = in(0).rows();
            std::size_t cols = 0;
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                if (in(i).rows() != rows) shape_error(kind, "row counts differ");
                cols += in(i).cols();
            }
            node.value = Tensor(rows, cols);
            std::size_t offset = 0;
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                const Tensor& part = in(i);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < part.cols(); ++c) node.value(r, offset + c) = part(r, c);
                offset += part.cols();
            }
            break;
        }
        case OpKind::SliceCols: {
            arity(1);
            const Tensor& a = in(0);
            if (args.begin > args.end || args.end > a.cols())
                shape_error(kind, "columns [" + std::to_string(args.begin) + ", " + std::to_string(args.end) +
                                      ") of " + a.shape_string());
            node.value = Tensor(a.rows(), args.end - args.begin);
            for (std::size_t r = 0; r < a.rows(); ++r)
                for (std::size_t c = args.begin; c < args.end; ++c) node.value(r, c - args.begin) = a(r, c);
            break;
        }
        case OpKind::MeanAll: {
            arity(1);
            const Tensor& a = in(0);
            if (a.size() == 0) shape_error(kind, "empty tensor");
            double sum = 0.0;
            for (double v : a.values()) sum += v;
            node.value = Tensor::scalar(sum / static_cast<double>(a.size()));
            break;
        }
        case OpKind::Square: {
            arity(1);
            node.value = in(0);
            for (auto& v : node.value.values()) v *= v;
            break;
        }
    }
    return push(std::move(node));
}

void Tape::backward(Var loss) {
    if (loss.id >= nodes_.size()) fail(ErrorCode::InvalidArgument, "loss does not belong to this tape");
    if (nodes_[loss.id].value.size() != 1) fail(ErrorCode::NotScalarLoss, "loss has shape " + nodes_[loss.id].value.shape_string());

    for (auto& n : nodes_)
        if (n.param) n.param->zero_grad();

    std::vector<Tensor> grads(loss.id + 1);
    grads[loss.id] = Tensor::scalar(1.0);
    auto grad_of = [&](std::size_t id) -> Tensor& {
        if (grads[id].size() == 0 && nodes_[id].value.size() != 0)
            grads[id] = Tensor(nodes_[id].value.rows(), nodes_[id].value.cols());
        return grads[id];
    };

    for (std::size_t idx = loss.id + 1; idx-- > 0;) {
        Node& node = nodes_[idx];
        if (grads[idx].size() == 0) continue;  // does not reach the loss
        const Tensor& g = grads[idx];
        const Tensor& y = node.value;
        switch (node.kind) {
            case OpKind::Constant: break;
            case OpKind::Param: {
                Parameter& p = *node.param;
                for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
                p.has_grad = true;
                break;
            }
            case OpKind::MatMul: {
                const Tensor& a = nodes_[node.inputs[0]].value;
                const Tensor& b = nodes_[node.inputs[1]].value;
                accumulate_a_bt(grad_of(node.inputs[0]), g, b);
                accumulate_at_b(grad_of(node.inputs[1]), a, g);
                break;
            }
            case OpKind::Add:
            case OpKind::Sub:
            case OpKind::Mul: {
                const Tensor& a = nodes_[node.inputs[0]].value;
                const Tensor& b = nodes_[node.inputs[1]].value;
                const bool bc = !a.same_shape(b);
                Tensor& ga = grad_of(node.inputs[0]);
                Tensor& gb = grad_of(node.inputs[1]);
                for (std::size_t r = 0; r < a.rows(); ++r)
                    for (std::size_t c = 0; c < a.cols(); ++c) {
                        const std::size_t br = bc ? 0 : r;
                        const double gv = g(r, c);
                        if (node.kind == OpKind::Add) {
                            ga(r, c) += gv;
                            gb(br, c) += gv;
                        } else if (node.kind == OpKind::Sub) {
                            ga(r, c) += gv;
                            gb(br, c) -= gv;
                        } else {
                            ga(r, c) += gv * b(br, c);
                            gb(br, c) += gv * a(r, c);
                        }
                    }
                break;
            }
            case OpKind::Scale: {
                Tensor& ga = grad_of(node.inputs[0]);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += node.args.factor * g[i];
                break;
            }
            case OpKind::Transpose: {
                Tensor& ga = grad_of(node.inputs[0]);
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < g.cols(); ++c) ga(c, r) += g(r, c);
                break;
            }
            case OpKind::RowSoftmax: {
                Tensor& ga = grad_of(node.inputs[0]);
                for (std::size_t r = 0; r < y.rows(); ++r) {
                    double dot = 0.0;
                    for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
                    for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
                }
                break;
            }
            case OpKind::Sigmoid: {
                Tensor& ga = grad_of(node.inputs[0]);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
                break;
            }
            case OpKind::Relu: {
                Tensor& ga = grad_of(node.inputs[0]);
                const Tensor& a = nodes_[node.inputs[0]].value;
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (a[i] > 0.0) ga[i] += g[i];
                break;
            }
            case OpKind::ConcatCols: {
                std::size_t offset = 0;
                for (std::size_t in : node.inputs) {
                    Tensor& gi = grad_of(in);
                    const std::size_t cols = nodes_[in].value.cols();
                    for (std::size_t r = 0; r < g.rows(); ++r)
                        for (std::size_t c = 0; c < cols; ++c) gi(r, c) += g(r, offset + c);
                    offset += cols;
                }
                break;
            }
            case OpKind::SliceCols: {
                Tensor& ga = grad_of(node.inputs[0]);
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < g.cols(); ++c) ga(r, node.args.begin + c) += g(r, c);
                break;
            }
            case OpKind::MeanAll: {
                Tensor& ga = grad_of(node.inputs[0]);
                const double share = g[0] / static_cast<double>(ga.size());
                for (auto& v : ga.values()) v += share;
                break;
            }
            case OpKind::Square: {
                Tensor& ga = grad_of(node.inputs[0]);
                const Tensor& a = nodes_[node.inputs[0]].value;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * a[i] * g[i];
                break;
            }
        }
        grads[idx] = Tensor();
    }
}

// -- gradient checking --

namespace {

double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

double scalar_value(const Tape& tape, Var v) {
    const Tensor& t = tape.value(v);
    if (t.size() != 1) fail(ErrorCode::NotScalarLoss, "function output has shape " + t.shape_string());
    return t[0];
}

}  // namespace

double grad_check(const TensorFunction& f, const Tensor& x, double step) {
    if (!(step > 0.0)) fail(ErrorCode::InvalidArgument, "step must be positive");
    Parameter p("x", x);
    {
        Tape tape;
        const Var out = f(tape, tape.parameter(p));
        scalar_value(tape, out);
        tape.backward(out);
    }
    double worst = 0.0;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + step;
        Tape tp;
        const double fp = scalar_value(tp, f(tp, tp.constant(probe)));
        probe[i] = x[i] - step;
        Tape tm;
        const double fm = scalar_value(tm, f(tm, tm.constant(probe)));
        probe[i] = x[i];
        const double numeric = (fp - fm) / (2.0 * step);
        worst = std::max(worst, relative_error(p.has_grad ? p.grad[i] : 0.0, numeric));
    }
    return worst;
}

double grad_check(const std::function<Var(Tape&, ParameterSet&)>& f, ParameterSet& params, double step) {
    if (!(step > 0.0)) fail(ErrorCode::InvalidArgument, "step must be positive");
    auto evaluate = [&]() {
        Tape tape;
        return scalar_value(tape, f(tape, params));
    };
    {
        Tape tape;
        const Var out = f(tape, params);
        scalar_value(tape, out);
        tape.backward(out);
    }
    std::vector<Tensor> analytic;
    for (const auto& p : params) analytic.push_back(p.has_grad ? p.grad : Tensor(p.value.rows(), p.value.cols()));
    double worst = 0.0;
    std::size_t k = 0;
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double orig = p.value[i];
            p.value[i] = orig + step;
            const double fp = evaluate();
            p.value[i] = orig - step;
            const double fm = evaluate();
            p.value[i] = orig;
            worst = std::max(worst, relative_error(analytic[k][i], (fp - fm) / (2.0 * step)));
        }
        ++k;
    }
    params.zero_grad();
    return worst;
}

// -- optimizers --

void sgd_step(ParameterSet& params, double lr) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) fail(ErrorCode::InvalidArgument, "learning rate must be non-negative");
    for (const auto& p : params)
        if (!p.has_grad) fail(ErrorCode::MissingGradient, "parameter '" + p.name + "' has no gradient");
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= lr * p.grad[i];
        p.zero_grad();
    }
}

OptimizerKind optimizer_from_name(const std::string& name) {
    if (name == "sgd") return OptimizerKind::Sgd;
    if (name == "momentum") return OptimizerKind::Momentum;
    if (name == "adam") return OptimizerKind::Adam;
    fail(ErrorCode::ConfigError, "unknown optimizer '" + name + "'");
}

const char* optimizer_name(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::Sgd: return "sgd";
        case OptimizerKind::Momentum: return "momentum";
        case OptimizerKind::Adam: return "adam";
    }
    return "?";
}

void Optimizer::step(ParameterSet& params) {
    if (config_.kind == OptimizerKind::Sgd) {
        sgd_step(params, config_.lr);
        return;
    }
    for (const auto& p : params)
        if (!p.has_grad) fail(ErrorCode::MissingGradient, "parameter '" + p.name + "' has no gradient");
    if (first_.empty())
        for (const auto& p : params) {
            first_.emplace_back(p.value.rows(), p.value.cols());
            second_.emplace_back(p.value.rows(), p.value.cols());
        }
    ++steps_;
    std::size_t k = 0;
    for (auto& p : params) {
        Tensor& m = first_[k];
        Tensor& v = second_[k];
        if (config_.kind == OptimizerKind::Momentum) {
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                m[i] = config_.momentum * m[i] + p.grad[i];
                p.value[i] -= config_.lr * m[i];
            }
        } else {
            const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
            const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                const double g = p.grad[i];
                m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
                v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
                p.value[i] -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
            }
        }
        p.zero_grad();
        ++k;
    }
}

// -- checkpoints --

namespace {
constexpr const char* kCheckpointMagic = "dtse-checkpoint";
constexpr int kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(std::ostream& out, const ParameterSet& params, const std::string& meta) {
    if (meta.find('\n') != std::string::npos) fail(ErrorCode::InvalidArgument, "checkpoint meta must be one line");
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
    out << "meta " << meta << '\n';
    out << "params " << params.size() << '\n';
    for (const auto& p : params) {
        if (p.name.find_first_of(" \t\n") != std::string::npos)
            fail(ErrorCode::InvalidArgument, "parameter name contains whitespace");
        out << "param " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            if (i) out << ' ';
            out << csv::format(p.value[i]);
        }
        out << '\n';
    }
}

void save_checkpoint(const std::string& path, const ParameterSet& params, const std::string& meta) {
    auto out = csv::open_for_write(path);
    save_checkpoint(out, params, meta);
    if (!out) fail(ErrorCode::IoError, "failed writing '" + path + "'");
}

Checkpoint load_checkpoint(std::istream& in) {
    auto bad = [](const std::string& what) { fail(ErrorCode::ConfigError, "checkpoint: " + what); };
    std::string line;
    if (!std::getline(in, line)) bad("empty file");
    {
        std::istringstream hs(line);
        std::string magic;
        int version = 0;
        hs >> magic >> version;
        if (magic != kCheckpointMagic) bad("bad header");
        if (version != kCheckpointVersion) bad("unsupported version " + std::to_string(version));
    }
    Checkpoint ck;
    if (!std::getline(in, line) || line.rfind("meta", 0) != 0) bad("missing meta line");
    ck.meta = line.size() > 5 ? line.substr(5) : std::string();
    if (!std::getline(in, line) || line.rfind("params ", 0) != 0) bad("missing params line");
    const std::size_t count = std::stoul(line.substr(7));
    for (std::size_t k = 0; k < count; ++k) {
        if (!std::getline(in, line)) bad("truncated");
        std::istringstream ps(line);
        std::string tag, name;
        std::size_t rows = 0, cols = 0;
        ps >> tag >> name >> rows >> cols;
        if (tag != "param" || !ps) bad("bad parameter header '" + line + "'");
        if (!std::getline(in, line)) bad("truncated values for " + name);
        std::vector<double> values;
        values.reserve(rows * cols);
        std::size_t pos = 0;
        while (pos < line.size()) {
            const auto next = line.find(' ', pos);
            const auto cell = std::string_view(line).substr(pos, next == std::string::npos ? std::string::npos : next - pos);
            auto v = csv::parse_cell(cell, "checkpoint " + name);
            if (!v) bad("empty value in " + name);
            values.push_back(*v);
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        if (values.size() != rows * cols) bad("value count mismatch for " + name);
        ck.params.add(Parameter(name, Tensor(rows, cols, std::move(values)), InitRecord{"loaded", 0.0, 0}));
    }
    return ck;
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open checkpoint '" + path + "'");
    return load_checkpoint(in);
}

}  // namespace dtse::ad
