#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "mslu/tensor.hpp"

namespace mslu {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// tape is alive.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  double scalar() const { return value()[0]; }
};

// Reverse-mode tape. Each recorded node keeps its forward value and, when it
// depends on a tracked leaf, a closure that pushes its output gradient to its
// inputs. Nodes that depend only on constants record no closure at all.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool tracked(Var v) const { return nodes_[v.id].tracked; }

  // Gradient accumulated at v by the last backward(); zeros when untouched.
  Tensor grad(Var v) const;

  // Seeds d(out)/d(out) = seed for a size-1 output and replays the tape.
  void backward(Var output, double seed = 1.0);
  // Several size-1 outputs at once: d(sum_i w_i * out_i).
  void backward(std::span<const std::pair<Var, double>> seeds);

  std::size_t size() const noexcept { return nodes_.size(); }

  // Used by op implementations.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Tensor& grad_buffer(std::uint32_t id);
  void accumulate(Var v, const Tensor& g);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool tracked = false;
    Backward backward;
  };
  void replay();
  std::vector<Node> nodes_;
};

namespace ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);

// W (r x c) times x (c) -> r.
Var matvec(Var w, Var x);
// Affine map W x + b.
Var affine(Var w, Var x, Var b);

Var sigmoid(Var a);
Var tanh(Var a);
Var softsign(Var a);
Var log_sigmoid(Var a);
Var exp(Var a);
Var sin(Var a);
Var log(Var a);

Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var slice(Var a, std::size_t offset, std::size_t length);
Var element(Var a, std::size_t index);
Var row(Var m, std::size_t index);

Var dot(Var a, Var b);
Var sum(Var a);

Var softmax(Var a);
Var log_softmax(Var a);

// sum_i weights[i] * items[i]; weights is a vector with one entry per item.
Var weighted_sum(Var weights, std::span<const Var> items);

}  // namespace ad

inline Var operator+(Var a, Var b) { return ad::add(a, b); }
inline Var operator-(Var a, Var b) { return ad::sub(a, b); }
inline Var operator*(Var a, Var b) { return ad::mul(a, b); }

double softsign(double x);
double sigmoid(double x);
// log(sigmoid(x)) without overflow for large |x|.
double log_sigmoid(double x);

}  // namespace mslu
