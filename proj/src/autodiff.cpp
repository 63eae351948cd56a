#include "mslu/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mslu/errors.hpp"

namespace mslu {

double softsign(double x) { return x / (1.0 + std::abs(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  bool tracked = false;
  for (const Var& v : inputs) tracked = tracked || nodes_[v.id].tracked;
  nodes_.push_back(Node{std::move(value), {}, tracked, tracked ? std::move(backward) : Backward{}});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::accumulate(Var v, const Tensor& g) {
  if (!nodes_[v.id].tracked) return;
  Tensor& buf = grad_buffer(v.id);
  auto dst = buf.values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var output, double seed) {
  const std::pair<Var, double> one[] = {{output, seed}};
  backward(one);
}

void Tape::backward(std::span<const std::pair<Var, double>> seeds) {
  for (auto& n : nodes_) n.grad = Tensor();
  for (const auto& [v, w] : seeds) {
    if (nodes_[v.id].value.size() != 1)
      throw DimensionError("backward seed must be a scalar, got shape " + shape_string(nodes_[v.id].value.shape()));
    if (!nodes_[v.id].tracked) continue;
    grad_buffer(v.id)[0] += w;
  }
  replay();
}

void Tape::replay() {
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    // Closures only write to earlier nodes, so n.grad stays put.
    n.backward(*this, n.grad);
  }
}

namespace ad {
namespace {

void same_shape(Var a, Var b, const char* op) { require_same_shape(a.value(), b.value(), op); }

template <class F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

// Elementwise op whose local derivative depends only on the input.
template <class D>
Var unary(Var a, Tensor out, D deriv) {
  Tape& t = *a.tape;
  const auto ia = a.id;
  return t.record(std::move(out), {a}, [ia, deriv](Tape& tape, const Tensor& g) {
    const Var va{&tape, ia};
    const Tensor& x = va.value();
    Tensor local(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) local[i] = g[i] * deriv(x[i]);
    tape.accumulate(va, local);
  });
}

}  // namespace

Var add(Var a, Var b) {
  same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate({&t, ia}, g);
    t.accumulate({&t, ib}, g);
  });
}

Var sub(Var a, Var b) {
  same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate({&t, ia}, g);
    Tensor neg = g;
    for (auto& v : neg.values()) v = -v;
    t.accumulate({&t, ib}, neg);
  });
}

Var mul(Var a, Var b) {
  same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    const Var va{&t, ia}, vb{&t, ib};
    if (t.tracked(va)) {
      Tensor ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= vb.value()[i];
      t.accumulate(va, ga);
    }
    if (t.tracked(vb)) {
      Tensor gb = g;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= va.value()[i];
      t.accumulate(vb, gb);
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = map(a.value(), [factor](double x) { return x * factor; });
  const auto ia = a.id;
  return a.tape->record(std::move(out), {a}, [ia, factor](Tape& t, const Tensor& g) {
    t.accumulate({&t, ia}, map(g, [factor](double x) { return x * factor; }));
  });
}

Var add_scalar(Var a, double offset) {
  Tensor out = map(a.value(), [offset](double x) { return x + offset; });
  const auto ia = a.id;
  return a.tape->record(std::move(out), {a}, [ia](Tape& t, const Tensor& g) { t.accumulate({&t, ia}, g); });
}

Var matvec(Var w, Var x) {
  const Tensor& W = w.value();
  const Tensor& X = x.value();
  if (W.rank() != 2 || X.rank() != 1 || W.cols() != X.size())
    throw DimensionError("matvec: weight " + shape_string(W.shape()) + " vs input " + shape_string(X.shape()));
  const std::size_t r = W.rows(), c = W.cols();
  Tensor out(Shape{r});
  for (std::size_t i = 0; i < r; ++i) {
    const double* wr = W.data().data() + i * c;
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += wr[j] * X[j];
    out[i] = acc;
  }
  const auto iw = w.id, ix = x.id;
  return w.tape->record(std::move(out), {w, x}, [iw, ix](Tape& t, const Tensor& g) {
    const Var vw{&t, iw}, vx{&t, ix};
    const Tensor& W = vw.value();
    const Tensor& X = vx.value();
    const std::size_t r = W.rows(), c = W.cols();
    if (t.tracked(vw)) {
      Tensor& gw = t.grad_buffer(iw);
      for (std::size_t i = 0; i < r; ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        double* row = gw.values().data() + i * c;
        for (std::size_t j = 0; j < c; ++j) row[j] += gi * X[j];
      }
    }
    if (t.tracked(vx)) {
      Tensor& gx = t.grad_buffer(ix);
      for (std::size_t i = 0; i < r; ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        const double* wr = W.data().data() + i * c;
        for (std::size_t j = 0; j < c; ++j) gx[j] += gi * wr[j];
      }
    }
  });
}

Var affine(Var w, Var x, Var b) { return add(matvec(w, x), b); }

Var sigmoid(Var a) {
  return unary(a, map(a.value(), [](double x) { return mslu::sigmoid(x); }), [](double x) {
    const double s = mslu::sigmoid(x);
    return s * (1.0 - s);
  });
}

Var tanh(Var a) {
  return unary(a, map(a.value(), [](double x) { return std::tanh(x); }), [](double x) {
    const double y = std::tanh(x);
    return 1.0 - y * y;
  });
}

Var softsign(Var a) {
  return unary(a, map(a.value(), [](double x) { return mslu::softsign(x); }), [](double x) {
    const double d = 1.0 + std::abs(x);
    return 1.0 / (d * d);
  });
}

Var log_sigmoid(Var a) {
  return unary(a, map(a.value(), [](double x) { return mslu::log_sigmoid(x); }),
               [](double x) { return mslu::sigmoid(-x); });
}

Var exp(Var a) {
  return unary(a, map(a.value(), [](double x) { return std::exp(x); }), [](double x) { return std::exp(x); });
}

Var sin(Var a) {
  return unary(a, map(a.value(), [](double x) { return std::sin(x); }), [](double x) { return std::cos(x); });
}

Var log(Var a) {
  for (double v : a.value().values())
    if (!(v > 0.0)) throw NumericalError("log of non-positive value " + std::to_string(v));
  return unary(a, map(a.value(), [](double x) { return std::log(x); }), [](double x) { return 1.0 / x; });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat of zero parts");
  std::vector<double> out;
  std::vector<std::pair<std::uint32_t, std::size_t>> pieces;
  pieces.reserve(parts.size());
  for (const Var& p : parts) {
    if (p.value().rank() != 1) throw DimensionError("concat expects vectors, got " + shape_string(p.value().shape()));
    pieces.emplace_back(p.id, p.value().size());
    out.insert(out.end(), p.value().values().begin(), p.value().values().end());
  }
  Tape& t = *parts.front().tape;
  // record() only takes an initializer list; gather tracking manually.
  bool tracked = false;
  for (const Var& p : parts) tracked = tracked || t.tracked(p);
  Var first = parts.front();
  for (const Var& p : parts)
    if (t.tracked(p)) first = p;
  return t.record(Tensor::vector(std::move(out)), {tracked ? first : parts.front()},
                  [pieces](Tape& tape, const Tensor& g) {
                    std::size_t offset = 0;
                    for (const auto& [id, n] : pieces) {
                      const Var v{&tape, id};
                      if (tape.tracked(v)) {
                        Tensor& buf = tape.grad_buffer(id);
                        for (std::size_t i = 0; i < n; ++i) buf[i] += g[offset + i];
                      }
                      offset += n;
                    }
                  });
}

Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

Var slice(Var a, std::size_t offset, std::size_t length) {
  const Tensor& x = a.value();
  if (x.rank() != 1 || offset + length > x.size() || length == 0)
    throw DimensionError("slice [" + std::to_string(offset) + ", +" + std::to_string(length) + ") of " +
                         shape_string(x.shape()));
  std::vector<double> out(x.values().begin() + offset, x.values().begin() + offset + length);
  const auto ia = a.id;
  return a.tape->record(Tensor::vector(std::move(out)), {a}, [ia, offset, length](Tape& t, const Tensor& g) {
    Tensor& buf = t.grad_buffer(ia);
    for (std::size_t i = 0; i < length; ++i) buf[offset + i] += g[i];
  });
}

Var element(Var a, std::size_t index) {
  if (index >= a.value().size())
    throw DimensionError("element " + std::to_string(index) + " of " + shape_string(a.value().shape()));
  const auto ia = a.id;
  return a.tape->record(Tensor::scalar(a.value()[index]), {a}, [ia, index](Tape& t, const Tensor& g) {
    t.grad_buffer(ia)[index] += g[0];
  });
}

Var row(Var m, std::size_t index) {
  const Tensor& M = m.value();
  if (M.rank() != 2 || index >= M.rows())
    throw DimensionError("row " + std::to_string(index) + " of " + shape_string(M.shape()));
  const auto r = M.row(index);
  std::vector<double> out(r.begin(), r.end());
  const auto im = m.id;
  const std::size_t cols = M.cols();
  return m.tape->record(Tensor::vector(std::move(out)), {m}, [im, index, cols](Tape& t, const Tensor& g) {
    Tensor& buf = t.grad_buffer(im);
    for (std::size_t j = 0; j < cols; ++j) buf[index * cols + j] += g[j];
  });
}

Var dot(Var a, Var b) {
  same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) acc += a.value()[i] * b.value()[i];
  const auto ia = a.id, ib = b.id;
  return a.tape->record(Tensor::scalar(acc), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    const Var va{&t, ia}, vb{&t, ib};
    const double s = g[0];
    if (t.tracked(va)) t.accumulate(va, map(vb.value(), [s](double x) { return s * x; }));
    if (t.tracked(vb)) t.accumulate(vb, map(va.value(), [s](double x) { return s * x; }));
  });
}

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  const auto ia = a.id;
  return a.tape->record(Tensor::scalar(acc), {a}, [ia](Tape& t, const Tensor& g) {
    Tensor& buf = t.grad_buffer(ia);
    for (auto& v : buf.values()) v += g[0];
  });
}

Var softmax(Var a) {
  const Tensor& x = a.value();
  const double mx = *std::max_element(x.values().begin(), x.values().end());
  Tensor out(x.shape());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += (out[i] = std::exp(x[i] - mx));
  for (auto& v : out.values()) v /= z;
  const auto ia = a.id;
  Tensor saved = out;
  return a.tape->record(std::move(out), {a}, [ia, saved](Tape& t, const Tensor& g) {
    double inner = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * saved[i];
    Tensor local(saved.shape());
    for (std::size_t i = 0; i < g.size(); ++i) local[i] = saved[i] * (g[i] - inner);
    t.accumulate({&t, ia}, local);
  });
}

Var log_softmax(Var a) {
  const Tensor& x = a.value();
  const double mx = *std::max_element(x.values().begin(), x.values().end());
  double z = 0.0;
  for (double v : x.values()) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  Tensor out = map(x, [lse](double v) { return v - lse; });
  const auto ia = a.id;
  Tensor saved = out;
  return a.tape->record(std::move(out), {a}, [ia, saved](Tape& t, const Tensor& g) {
    double total = 0.0;
    for (double v : g.values()) total += v;
    Tensor local(saved.shape());
    for (std::size_t i = 0; i < g.size(); ++i) local[i] = g[i] - std::exp(saved[i]) * total;
    t.accumulate({&t, ia}, local);
  });
}

Var weighted_sum(Var weights, std::span<const Var> items) {
  const Tensor& w = weights.value();
  if (items.empty() || w.size() != items.size())
    throw DimensionError("weighted_sum: " + std::to_string(w.size()) + " weights for " +
                         std::to_string(items.size()) + " items");
  Tensor out(items.front().value().shape(), 0.0);
  for (std::size_t k = 0; k < items.size(); ++k) {
    require_same_shape(out, items[k].value(), "weighted_sum");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[k] * items[k].value()[i];
  }
  std::vector<std::uint32_t> ids;
  ids.reserve(items.size());
  bool tracked = weights.tape->tracked(weights);
  Var anchor = weights;
  for (const Var& v : items) {
    ids.push_back(v.id);
    if (!tracked && v.tape->tracked(v)) {
      tracked = true;
      anchor = v;
    }
  }
  const auto iw = weights.id;
  return weights.tape->record(std::move(out), {anchor}, [iw, ids](Tape& t, const Tensor& g) {
    const Var vw{&t, iw};
    const Tensor w = vw.value();
    const bool want_w = t.tracked(vw);
    Tensor gw(w.shape(), 0.0);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const Var item{&t, ids[k]};
      if (t.tracked(item)) {
        Tensor& buf = t.grad_buffer(ids[k]);
        for (std::size_t i = 0; i < g.size(); ++i) buf[i] += w[k] * g[i];
      }
      if (want_w) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * item.value()[i];
        gw[k] = acc;
      }
    }
    if (want_w) t.accumulate(vw, gw);
  });
}

}  // namespace ad
}  // namespace mslu
