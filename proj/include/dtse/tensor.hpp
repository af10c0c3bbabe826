#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace dtse::ad {

/// Dense row-major matrix of doubles. Vectors are 1×n; scalars are 1×1.
class Tensor {
  public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);
    Tensor(std::initializer_list<std::initializer_list<double>> rows);

    static Tensor scalar(double value) { return Tensor(1, 1, value); }
    static Tensor identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool same_shape(const Tensor& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double item() const;

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    const std::vector<double>& data() const { return data_; }

    void fill(double value);
    bool all_finite() const;
    std::string shape_string() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct InitRecord {
    std::string distribution = "zeros";  // "zeros", "uniform", "constant", "loaded"
    double bound = 0.0;
    std::uint64_t seed = 0;
};

/// Named trainable tensor with its gradient slot.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    InitRecord init;

    Parameter() = default;
    Parameter(std::string name, Tensor value, InitRecord init = {});
    void zero_grad();
};

/// Insertion-ordered parameter collection with stable element addresses.
class ParameterSet {
  public:
    ParameterSet() = default;
    ParameterSet(const ParameterSet&) = default;
    ParameterSet& operator=(const ParameterSet&) = default;
    ParameterSet(ParameterSet&&) noexcept = default;
    ParameterSet& operator=(ParameterSet&&) noexcept = default;

    Parameter& add(Parameter p);
    /// uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)), fan_in = rows.
    Parameter& add_uniform(const std::string& name, std::size_t rows, std::size_t cols, std::uint64_t seed);
    Parameter& add_zeros(const std::string& name, std::size_t rows, std::size_t cols);

    Parameter& operator[](const std::string& name);
    const Parameter& operator[](const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t size() const { return items_.size(); }
    std::size_t scalar_count() const;
    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

    void zero_grad();

  private:
    std::deque<Parameter> items_;
    std::map<std::string, std::size_t> index_;
};

enum class OpKind {
    Constant,
    Param,
    MatMul,
    Add,
    Sub,
    Mul,
    Scale,
    Transpose,
    RowSoftmax,
    Sigmoid,
    Relu,
    ConcatCols,
    SliceCols,
    MeanAll,
    Square,
};

const char* op_name(OpKind kind);

/// Handle to a node on a tape.
struct Var {
    std::size_t id = 0;
};

/// Extra arguments for ops that need them.
struct OpArgs {
    double factor = 1.0;     // Scale
    std::size_t begin = 0;   // SliceCols
    std::size_t end = 0;     // SliceCols
};

/// Append-only record of a forward computation. One tape serves one forward/backward pass.
/// Add/Sub/Mul accept equal shapes, or a 1×c right operand broadcast over the rows of the left.
class Tape {
  public:
    Var constant(Tensor value);
    Var parameter(Parameter& p);

    /// Generic entry point; the named helpers below forward here.
    Var apply(OpKind kind, std::span<const Var> inputs, const OpArgs& args = {});

    Var matmul(Var a, Var b) { return binary(OpKind::MatMul, a, b); }
    Var add(Var a, Var b) { return binary(OpKind::Add, a, b); }
    Var sub(Var a, Var b) { return binary(OpKind::Sub, a, b); }
    Var mul(Var a, Var b) { return binary(OpKind::Mul, a, b); }
    Var scale(Var a, double factor);
    Var transpose(Var a) { return unary(OpKind::Transpose, a); }
    Var row_softmax(Var a) { return unary(OpKind::RowSoftmax, a); }
    Var sigmoid(Var a) { return unary(OpKind::Sigmoid, a); }
    Var relu(Var a) { return unary(OpKind::Relu, a); }
    Var concat_cols(std::span<const Var> parts) { return apply(OpKind::ConcatCols, parts); }
    Var concat_cols(std::initializer_list<Var> parts);
    Var slice_cols(Var a, std::size_t begin, std::size_t end);
    Var mean_all(Var a) { return unary(OpKind::MeanAll, a); }
    Var square(Var a) { return unary(OpKind::Square, a); }

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
    std::size_t size() const { return nodes_.size(); }

    /// Reverse pass from a 1×1 loss. Gradients of every parameter on the tape are reset, then
    /// accumulated, so repeated calls give identical results. Errors: NotScalarLoss.
    void backward(Var loss);

  private:
    struct Node {
        OpKind kind = OpKind::Constant;
        std::vector<std::size_t> inputs;
        Tensor value;
        Parameter* param = nullptr;
        OpArgs args;
    };

    Var unary(OpKind kind, Var a) { return apply(kind, std::span<const Var>(&a, 1)); }
    Var binary(OpKind kind, Var a, Var b) {
        const Var in[2] = {a, b};
        return apply(kind, in);
    }
    Var push(Node node);

    std::vector<Node> nodes_;
};

/// Scalar-valued function of one tensor, built on the given tape.
using TensorFunction = std::function<Var(Tape&, Var)>;

/// Max relative error between reverse-mode and central-difference gradients of f at x.
/// Relative error uses max(|a|, |b|, 1e-8) as denominator.
double grad_check(const TensorFunction& f, const Tensor& x, double step = 1e-5);

/// Same check over every entry of every parameter in `params`; f builds the loss from the set.
double grad_check(const std::function<Var(Tape&, ParameterSet&)>& f, ParameterSet& params, double step = 1e-5);

/// p <- p - lr * g for every parameter, then zero the gradients. Errors: MissingGradient.
void sgd_step(ParameterSet& params, double lr);

enum class OptimizerKind { Sgd, Momentum, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Sgd;
    double lr = 1e-4;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

OptimizerKind optimizer_from_name(const std::string& name);
const char* optimizer_name(OptimizerKind kind);

/// Stateful optimizer; plain SGD delegates to sgd_step.
class Optimizer {
  public:
    explicit Optimizer(OptimizerConfig config) : config_(config) {}
    void step(ParameterSet& params);
    const OptimizerConfig& config() const { return config_; }

  private:
    OptimizerConfig config_;
    std::vector<Tensor> first_;
    std::vector<Tensor> second_;
    long steps_ = 0;
};

/// Text checkpoint:
///   dtse-checkpoint 1
///   meta <one-line JSON or empty>
///   params <count>
///   then per parameter: "param <name> <rows> <cols>" followed by one line of space-separated values,
///   each printed as the shortest decimal that round-trips the double exactly.
void save_checkpoint(std::ostream& out, const ParameterSet& params, const std::string& meta = {});
void save_checkpoint(const std::string& path, const ParameterSet& params, const std::string& meta = {});

struct Checkpoint {
    ParameterSet params;
    std::string meta;
};
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dtse::ad
