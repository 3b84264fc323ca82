#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace prim::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

template <typename T>
class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool defined() const { return tape_ != nullptr; }
  Tape<T>* tape() const { return tape_; }
  std::size_t id() const { return id_; }

  const Shape& shape() const;
  std::size_t size() const;
  std::span<const T> value() const;
  /// Gradient after backward(); empty when the node did not receive one.
  std::span<const T> grad() const;
  T item() const;

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run computation tape. Nodes are appended in evaluation order, so
/// the vector order is a valid topological order and backward walks it in
/// reverse.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var<T> constant(Shape shape, std::vector<T> values);
  Var<T> leaf(Shape shape, std::vector<T> values);
  /// Gradient-tracked view of caller-owned storage (model parameters).
  Var<T> external(Shape shape, std::span<const T> values);

  /// Appends an op result. The closure is dropped unless some input needs a
  /// gradient and the tape is recording.
  Var<T> emit(Shape shape, std::vector<T> values, std::initializer_list<Var<T>> inputs,
              BackwardFn backward);

  void backward(Var<T> loss);

  const Shape& shape(std::size_t id) const { return nodes_[id].shape; }
  std::span<const T> value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Read access to the gradient of a node; empty if none was accumulated.
  std::span<const T> grad(std::size_t id) const;
  /// Mutable gradient buffer, allocated (zeroed) on first use.
  std::span<T> grad_buffer(std::size_t id);
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<T> owned;
    const T* external = nullptr;
    std::size_t size = 0;
    bool requires_grad = false;
    std::vector<T> grad;
    BackwardFn backward;
  };

  Var<T> push(Node node);

  std::vector<Node> nodes_;
  bool record_;
};

template <typename T>
const Shape& Var<T>::shape() const {
  return tape_->shape(id_);
}

template <typename T>
std::size_t Var<T>::size() const {
  return numel(shape());
}

template <typename T>
std::span<const T> Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
std::span<const T> Var<T>::grad() const {
  return tape_->grad(id_);
}

template <typename T>
T Var<T>::item() const {
  auto v = value();
  if (v.size() != 1) throw ShapeError("item() on non-scalar " + shape_str(shape()));
  return v[0];
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace prim::ad
