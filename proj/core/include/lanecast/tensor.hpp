#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace lanecast {

// Raised by primitives when operand shapes (or indices) do not line up.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
std::string shape_str(const std::vector<int64_t>& shape);
}

// Dense row-major float64 tensor. Copies of a Tensor share the same storage
// and gradient buffer, so a Tensor behaves like a cheap handle.
class Tensor {
 public:
  Tensor();  // empty, shape {0}
  explicit Tensor(std::vector<int64_t> shape);  // zero-filled
  Tensor(std::vector<int64_t> shape, std::vector<double> values);

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, double v);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  const std::vector<int64_t>& shape() const { return impl_->shape; }
  int64_t ndim() const { return static_cast<int64_t>(impl_->shape.size()); }
  int64_t numel() const { return static_cast<int64_t>(impl_->values.size()); }
  int64_t dim(int64_t i) const { return impl_->shape.at(static_cast<size_t>(i)); }

  // 2-D helpers; throw on other ranks so misuse surfaces early.
  int64_t rows() const;
  int64_t cols() const;

  double* data() { return impl_->values.data(); }
  const double* data() const { return impl_->values.data(); }
  std::vector<double>& values() { return impl_->values; }
  const std::vector<double>& values() const { return impl_->values; }

  double value() const;                    // scalar extraction, numel()==1
  double at(int64_t r, int64_t c) const;   // 2-D convenience accessor
  double& at(int64_t r, int64_t c);

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool b) {
    impl_->requires_grad = b;
    return *this;
  }

  bool has_grad() const { return !impl_->grad.empty(); }
  // Gradient buffer, allocated (zero-filled) on first access. Tensors are
  // shared handles, so the buffer is mutable through const handles too.
  std::vector<double>& grad_buffer() const;
  void zero_grad();

  uint64_t id() const { return impl_->id; }

 private:
  struct Data {
    uint64_t id;
    std::vector<int64_t> shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until first use
    bool requires_grad = false;
  };
  std::shared_ptr<Data> impl_;
};

struct TapeRecord {
  const char* op;
  std::vector<uint64_t> input_ids;
  uint64_t output_id;
  std::function<void()> backward;
};

// Ordered record of primitive applications. Single-threaded by design; run
// independent tapes on independent threads if parallelism is needed.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  void record(const char* op, std::initializer_list<Tensor> inputs, const Tensor& output,
              std::function<void()> backward);
  void record(const char* op, const std::vector<Tensor>& inputs, const Tensor& output,
              std::function<void()> backward);

  const std::vector<TapeRecord>& records() const { return records_; }
  size_t size() const { return records_.size(); }

  // Reverse-mode sweep from a scalar loss; accumulates into grad buffers of
  // every tensor with requires_grad that participated.
  void backward(const Tensor& loss);

 private:
  bool grad_enabled_;
  std::vector<TapeRecord> records_;
};

}  // namespace lanecast
