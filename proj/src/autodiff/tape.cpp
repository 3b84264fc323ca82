#include "prim/autodiff/tape.hpp"

#include <algorithm>
#include <sstream>

namespace prim::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
Var<T> Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::constant(Shape shape, std::vector<T> values) {
  if (numel(shape) != values.size())
    throw ShapeError("constant: shape " + shape_str(shape) + " vs " + std::to_string(values.size()));
  Node n;
  n.size = values.size();
  n.shape = std::move(shape);
  n.owned = std::move(values);
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::leaf(Shape shape, std::vector<T> values) {
  auto v = constant(std::move(shape), std::move(values));
  nodes_.back().requires_grad = record_;
  return v;
}

template <typename T>
Var<T> Tape<T>::external(Shape shape, std::span<const T> values) {
  if (numel(shape) != values.size())
    throw ShapeError("external: shape " + shape_str(shape) + " vs " + std::to_string(values.size()));
  Node n;
  n.shape = std::move(shape);
  n.external = values.data();
  n.size = values.size();
  n.requires_grad = record_;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::emit(Shape shape, std::vector<T> values, std::initializer_list<Var<T>> inputs,
                     BackwardFn backward) {
  if (numel(shape) != values.size())
    throw ShapeError("emit: shape " + shape_str(shape) + " vs " + std::to_string(values.size()));
  Node n;
  n.size = values.size();
  n.shape = std::move(shape);
  n.owned = std::move(values);
  if (record_) {
    for (const auto& in : inputs) {
      if (in.defined() && nodes_[in.id()].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  return push(std::move(n));
}

template <typename T>
std::span<const T> Tape<T>::value(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.external) return {n.external, n.size};
  return {n.owned.data(), n.size};
}

template <typename T>
std::span<const T> Tape<T>::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  return {n.grad.data(), n.grad.size()};
}

template <typename T>
std::span<T> Tape<T>::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.size, T(0));
  return {n.grad.data(), n.grad.size()};
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.tape() != this) throw std::logic_error("backward: loss belongs to another tape");
  if (nodes_[loss.id()].size != 1)
    throw ShapeError("backward on non-scalar " + shape_str(nodes_[loss.id()].shape));
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id())[0] = T(1);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace prim::ad
