#include "lanecast/tensor.hpp"

#include <atomic>
#include <sstream>

namespace lanecast {

namespace detail {

std::string shape_str(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace {
std::atomic<uint64_t> next_tensor_id{1};
int64_t checked_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw ShapeError("tensor: negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}
}  // namespace

}  // namespace detail

Tensor::Tensor() : Tensor(std::vector<int64_t>{0}) {}

Tensor::Tensor(std::vector<int64_t> shape) {
  const int64_t n = detail::checked_numel(shape);
  impl_ = std::make_shared<Data>();
  impl_->id = detail::next_tensor_id.fetch_add(1);
  impl_->shape = std::move(shape);
  impl_->values.assign(static_cast<size_t>(n), 0.0);
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> values) {
  const int64_t n = detail::checked_numel(shape);
  if (n != static_cast<int64_t>(values.size()))
    throw ShapeError("tensor: shape " + detail::shape_str(shape) + " expects " + std::to_string(n) +
                     " values, got " + std::to_string(values.size()));
  impl_ = std::make_shared<Data>();
  impl_->id = detail::next_tensor_id.fetch_add(1);
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
}

Tensor Tensor::full(std::vector<int64_t> shape, double v) {
  Tensor t(std::move(shape));
  for (double& x : t.values()) x = v;
  return t;
}

int64_t Tensor::rows() const {
  if (ndim() != 2) throw ShapeError("tensor: rows() needs rank 2, have " + detail::shape_str(shape()));
  return impl_->shape[0];
}

int64_t Tensor::cols() const {
  if (ndim() != 2) throw ShapeError("tensor: cols() needs rank 2, have " + detail::shape_str(shape()));
  return impl_->shape[1];
}

double Tensor::value() const {
  if (numel() != 1)
    throw ShapeError("tensor: value() needs a single element, have " + detail::shape_str(shape()));
  return impl_->values[0];
}

double Tensor::at(int64_t r, int64_t c) const {
  return impl_->values[static_cast<size_t>(r * cols() + c)];
}

double& Tensor::at(int64_t r, int64_t c) {
  return impl_->values[static_cast<size_t>(r * cols() + c)];
}

std::vector<double>& Tensor::grad_buffer() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
}

void Tape::record(const char* op, std::initializer_list<Tensor> inputs, const Tensor& output,
                  std::function<void()> backward) {
  if (!grad_enabled_) return;
  TapeRecord rec;
  rec.op = op;
  rec.input_ids.reserve(inputs.size());
  for (const Tensor& t : inputs) rec.input_ids.push_back(t.id());
  rec.output_id = output.id();
  rec.backward = std::move(backward);
  records_.push_back(std::move(rec));
}

void Tape::record(const char* op, const std::vector<Tensor>& inputs, const Tensor& output,
                  std::function<void()> backward) {
  if (!grad_enabled_) return;
  TapeRecord rec;
  rec.op = op;
  rec.input_ids.reserve(inputs.size());
  for (const Tensor& t : inputs) rec.input_ids.push_back(t.id());
  rec.output_id = output.id();
  rec.backward = std::move(backward);
  records_.push_back(std::move(rec));
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw ShapeError("backward: loss must be a scalar, have " + detail::shape_str(loss.shape()));
  Tensor seed = loss;  // non-const handle to the same storage
  seed.grad_buffer()[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->backward) it->backward();
  }
}

}  // namespace lanecast
