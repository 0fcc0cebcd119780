#include "lanecast/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lanecast {

namespace {

using detail::shape_str;

bool wants_grad(const Tape& tape, std::initializer_list<const Tensor*> ins) {
  if (!tape.grad_enabled()) return false;
  for (const Tensor* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

void check_2d(const char* op, const Tensor& t) {
  if (t.ndim() != 2)
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, have " + shape_str(t.shape()));
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  check_2d("matmul", a);
  check_2d("matmul", b);
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + " (lhs " + shape_str(a.shape()) + ", rhs " +
                     shape_str(b.shape()) + ")");
  const int64_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  {
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t kk = 0; kk < k; ++kk) {
        const double av = pa[i * k + kk];
        if (av == 0.0) continue;
        const double* pbr = pb + kk * n;
        double* por = po + i * n;
        for (int64_t j = 0; j < n; ++j) por[j] += av * pbr[j];
      }
  }
  if (wants_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record("matmul", {a, b}, out, [a, b, out]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      const int64_t m2 = a.rows(), k2 = a.cols(), n2 = b.cols();
      if (a.requires_grad()) {
        double* ga = a.grad_buffer().data();
        const double* pb = b.data();
        for (int64_t i = 0; i < m2; ++i)
          for (int64_t kk = 0; kk < k2; ++kk) {
            double s = 0.0;
            const double* gor = go + i * n2;
            const double* pbr = pb + kk * n2;
            for (int64_t j = 0; j < n2; ++j) s += gor[j] * pbr[j];
            ga[i * k2 + kk] += s;
          }
      }
      if (b.requires_grad()) {
        double* gb = b.grad_buffer().data();
        const double* pa = a.data();
        for (int64_t i = 0; i < m2; ++i)
          for (int64_t kk = 0; kk < k2; ++kk) {
            const double av = pa[i * k2 + kk];
            if (av == 0.0) continue;
            const double* gor = go + i * n2;
            double* gbr = gb + kk * n2;
            for (int64_t j = 0; j < n2; ++j) gbr[j] += av * gor[j];
          }
      }
    });
  }
  return out;
}

Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b) {
  check_2d("matmul_nt", a);
  check_2d("matmul_nt", b);
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: inner dimensions " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()) + " (lhs " + shape_str(a.shape()) + ", rhs " +
                     shape_str(b.shape()) + ")");
  const int64_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out({m, n});
  {
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) {
        double s = 0.0;
        const double* par = pa + i * k;
        const double* pbr = pb + j * k;
        for (int64_t kk = 0; kk < k; ++kk) s += par[kk] * pbr[kk];
        po[i * n + j] = s;
      }
  }
  if (wants_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record("matmul_nt", {a, b}, out, [a, b, out]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      const int64_t m2 = a.rows(), k2 = a.cols(), n2 = b.rows();
      if (a.requires_grad()) {
        double* ga = a.grad_buffer().data();
        const double* pb = b.data();
        for (int64_t i = 0; i < m2; ++i)
          for (int64_t j = 0; j < n2; ++j) {
            const double g = go[i * n2 + j];
            if (g == 0.0) continue;
            const double* pbr = pb + j * k2;
            double* gar = ga + i * k2;
            for (int64_t kk = 0; kk < k2; ++kk) gar[kk] += g * pbr[kk];
          }
      }
      if (b.requires_grad()) {
        double* gb = b.grad_buffer().data();
        const double* pa = a.data();
        for (int64_t i = 0; i < m2; ++i)
          for (int64_t j = 0; j < n2; ++j) {
            const double g = go[i * n2 + j];
            if (g == 0.0) continue;
            const double* par = pa + i * k2;
            double* gbr = gb + j * k2;
            for (int64_t kk = 0; kk < k2; ++kk) gbr[kk] += g * par[kk];
          }
      }
    });
  }
  return out;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  check_2d("linear", x);
  check_2d("linear", w);
  if (x.cols() != w.rows())
    throw ShapeError("linear: input width " + std::to_string(x.cols()) + " vs weight rows " +
                     std::to_string(w.rows()));
  if (b.numel() != w.cols())
    throw ShapeError("linear: bias size " + std::to_string(b.numel()) + " vs weight cols " +
                     std::to_string(w.cols()));
  const int64_t m = x.rows(), k = x.cols(), n = w.cols();
  Tensor out({m, n});
  {
    const double* px = x.data();
    const double* pw = w.data();
    const double* pbv = b.data();
    double* po = out.data();
    for (int64_t i = 0; i < m; ++i) {
      double* por = po + i * n;
      for (int64_t j = 0; j < n; ++j) por[j] = pbv[j];
      for (int64_t kk = 0; kk < k; ++kk) {
        const double xv = px[i * k + kk];
        if (xv == 0.0) continue;
        const double* pwr = pw + kk * n;
        for (int64_t j = 0; j < n; ++j) por[j] += xv * pwr[j];
      }
    }
  }
  if (wants_grad(tape, {&x, &w, &b})) {
    out.set_requires_grad(true);
    tape.record("linear", {x, w, b}, out, [x, w, b, out]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      const int64_t m2 = x.rows(), k2 = x.cols(), n2 = w.cols();
      if (x.requires_grad()) {
        double* gx = x.grad_buffer().data();
        const double* pw = w.data();
        for (int64_t i = 0; i < m2; ++i)
          for (int64_t kk = 0; kk < k2; ++kk) {
            double s = 0.0;
            const double* gor = go + i * n2;
            const double* pwr = pw + kk * n2;
            for (int64_t j = 0; j < n2; ++j) s += gor[j] * pwr[j];
            gx[i * k2 + kk] += s;
          }
      }
      if (w.requires_grad()) {
        double* gw = w.grad_buffer().data();
        const double* px = x.data();
        for (int64_t i = 0; i < m2; ++i)
          for (int64_t kk = 0; kk < k2; ++kk) {
            const double xv = px[i * k2 + kk];
            if (xv == 0.0) continue;
            const double* gor = go + i * n2;
            double* gwr = gw + kk * n2;
            for (int64_t j = 0; j < n2; ++j) gwr[j] += xv * gor[j];
          }
      }
      if (b.requires_grad()) {
        double* gb = b.grad_buffer().data();
        for (int64_t i = 0; i < m2; ++i) {
          const double* gor = go + i * n2;
          for (int64_t j = 0; j < n2; ++j) gb[j] += gor[j];
        }
      }
    });
  }
  return out;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor elementwise_unary(Tape& tape, const char* name, const Tensor& x, Fwd fwd, Bwd bwd) {
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = fwd(px[i]);
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record(name, {x}, out, [x, out, bwd]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      const double* px2 = x.data();
      const double* po2 = out.data();
      double* gx = x.grad_buffer().data();
      const int64_t n2 = x.numel();
      for (int64_t i = 0; i < n2; ++i) gx[i] += bwd(px2[i], po2[i]) * go[i];
    });
  }
  return out;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (wants_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record("add", {a, b}, out, [a, b, out]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      const int64_t n2 = out.numel();
      if (a.requires_grad()) {
        double* ga = a.grad_buffer().data();
        for (int64_t i = 0; i < n2; ++i) ga[i] += go[i];
      }
      if (b.requires_grad()) {
        double* gb = b.grad_buffer().data();
        for (int64_t i = 0; i < n2; ++i) gb[i] += go[i];
      }
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (wants_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record("sub", {a, b}, out, [a, b, out]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      const int64_t n2 = out.numel();
      if (a.requires_grad()) {
        double* ga = a.grad_buffer().data();
        for (int64_t i = 0; i < n2; ++i) ga[i] += go[i];
      }
      if (b.requires_grad()) {
        double* gb = b.grad_buffer().data();
        for (int64_t i = 0; i < n2; ++i) gb[i] -= go[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  Tensor out(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (wants_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record("mul", {a, b}, out, [a, b, out]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      const int64_t n2 = out.numel();
      if (a.requires_grad()) {
        double* ga = a.grad_buffer().data();
        const double* pb = b.data();
        for (int64_t i = 0; i < n2; ++i) ga[i] += go[i] * pb[i];
      }
      if (b.requires_grad()) {
        double* gb = b.grad_buffer().data();
        const double* pa = a.data();
        for (int64_t i = 0; i < n2; ++i) gb[i] += go[i] * pa[i];
      }
    });
  }
  return out;
}

Tensor scalar_mul(Tape& tape, const Tensor& x, double c) {
  return elementwise_unary(
      tape, "scalar_mul", x, [c](double v) { return c * v; },
      [c](double, double) { return c; });
}

Tensor add_scalar(Tape& tape, const Tensor& x, double c) {
  return elementwise_unary(
      tape, "add_scalar", x, [c](double v) { return v + c; },
      [](double, double) { return 1.0; });
}

Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b) {
  check_2d("concat_cols", a);
  check_2d("concat_cols", b);
  if (a.rows() != b.rows())
    throw ShapeError("concat_cols: row mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const int64_t m = a.rows(), na = a.cols(), nb = b.cols();
  Tensor out({m, na + nb});
  for (int64_t i = 0; i < m; ++i) {
    std::copy_n(a.data() + i * na, na, out.data() + i * (na + nb));
    std::copy_n(b.data() + i * nb, nb, out.data() + i * (na + nb) + na);
  }
  if (wants_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record("concat_cols", {a, b}, out, [a, b, out]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      const int64_t m2 = a.rows(), na2 = a.cols(), nb2 = b.cols();
      if (a.requires_grad()) {
        double* ga = a.grad_buffer().data();
        for (int64_t i = 0; i < m2; ++i)
          for (int64_t j = 0; j < na2; ++j) ga[i * na2 + j] += go[i * (na2 + nb2) + j];
      }
      if (b.requires_grad()) {
        double* gb = b.grad_buffer().data();
        for (int64_t i = 0; i < m2; ++i)
          for (int64_t j = 0; j < nb2; ++j) gb[i * nb2 + j] += go[i * (na2 + nb2) + na2 + j];
      }
    });
  }
  return out;
}

Tensor concat_rows(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty part list");
  const int64_t n = parts[0].ndim() == 2 ? parts[0].cols() : -1;
  int64_t m = 0;
  for (const Tensor& p : parts) {
    check_2d("concat_rows", p);
    if (p.cols() != n)
      throw ShapeError("concat_rows: column mismatch " + std::to_string(p.cols()) + " vs " +
                       std::to_string(n));
    m += p.rows();
  }
  Tensor out({m, n});
  int64_t row = 0;
  for (const Tensor& p : parts) {
    std::copy_n(p.data(), p.numel(), out.data() + row * n);
    row += p.rows();
  }
  bool rg = tape.grad_enabled();
  if (rg) {
    rg = false;
    for (const Tensor& p : parts) rg = rg || p.requires_grad();
  }
  if (rg) {
    out.set_requires_grad(true);
    std::vector<Tensor> held = parts;
    Tensor out_h = out;
    tape.record("concat_rows", held, out, [held, out_h]() mutable {
      if (!out_h.has_grad()) return;
      const double* go = out_h.grad_buffer().data();
      const int64_t n2 = out_h.cols();
      int64_t row2 = 0;
      for (Tensor& p : held) {
        if (p.requires_grad()) {
          double* gp = p.grad_buffer().data();
          const int64_t cnt = p.numel();
          const double* src = go + row2 * n2;
          for (int64_t i = 0; i < cnt; ++i) gp[i] += src[i];
        }
        row2 += p.rows();
      }
    });
  }
  return out;
}

Tensor slice_cols(Tape& tape, const Tensor& x, int64_t start, int64_t len) {
  check_2d("slice_cols", x);
  if (start < 0 || len < 0 || start + len > x.cols())
    throw ShapeError("slice_cols: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of " + std::to_string(x.cols()) +
                     " columns");
  const int64_t m = x.rows(), n = x.cols();
  Tensor out({m, len});
  for (int64_t i = 0; i < m; ++i)
    std::copy_n(x.data() + i * n + start, len, out.data() + i * len);
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("slice_cols", {x}, out, [x, out, start, len]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      double* gx = x.grad_buffer().data();
      const int64_t m2 = x.rows(), n2 = x.cols();
      for (int64_t i = 0; i < m2; ++i)
        for (int64_t j = 0; j < len; ++j) gx[i * n2 + start + j] += go[i * len + j];
    });
  }
  return out;
}

Tensor index_select_rows(Tape& tape, const Tensor& x, std::vector<int64_t> rows) {
  check_2d("index_select_rows", x);
  const int64_t m = x.rows(), n = x.cols();
  for (int64_t r : rows)
    if (r < 0 || r >= m)
      throw ShapeError("index_select_rows: index " + std::to_string(r) + " out of " +
                       std::to_string(m) + " rows");
  Tensor out({static_cast<int64_t>(rows.size()), n});
  for (size_t i = 0; i < rows.size(); ++i)
    std::copy_n(x.data() + rows[i] * n, n, out.data() + static_cast<int64_t>(i) * n);
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("index_select_rows", {x}, out, [x, out, rows = std::move(rows)]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      double* gx = x.grad_buffer().data();
      const int64_t n2 = x.cols();
      for (size_t i = 0; i < rows.size(); ++i) {
        const double* src = go + static_cast<int64_t>(i) * n2;
        double* dst = gx + rows[i] * n2;
        for (int64_t j = 0; j < n2; ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

Tensor index_add_rows(Tape& tape, const Tensor& x, std::vector<int64_t> rows, const Tensor& y) {
  check_2d("index_add_rows", x);
  check_2d("index_add_rows", y);
  if (y.rows() != static_cast<int64_t>(rows.size()))
    throw ShapeError("index_add_rows: " + std::to_string(rows.size()) + " indices vs " +
                     std::to_string(y.rows()) + " increment rows");
  if (y.cols() != x.cols())
    throw ShapeError("index_add_rows: column mismatch " + shape_str(x.shape()) + " vs " +
                     shape_str(y.shape()));
  const int64_t m = x.rows(), n = x.cols();
  for (int64_t r : rows)
    if (r < 0 || r >= m)
      throw ShapeError("index_add_rows: index " + std::to_string(r) + " out of " +
                       std::to_string(m) + " rows");
  Tensor out(x.shape());
  std::copy_n(x.data(), x.numel(), out.data());
  for (size_t i = 0; i < rows.size(); ++i) {
    const double* src = y.data() + static_cast<int64_t>(i) * n;
    double* dst = out.data() + rows[i] * n;
    for (int64_t j = 0; j < n; ++j) dst[j] += src[j];
  }
  if (wants_grad(tape, {&x, &y})) {
    out.set_requires_grad(true);
    tape.record("index_add_rows", {x, y}, out, [x, y, out, rows = std::move(rows)]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      const int64_t n2 = x.cols();
      if (x.requires_grad()) {
        double* gx = x.grad_buffer().data();
        const int64_t cnt = x.numel();
        for (int64_t i = 0; i < cnt; ++i) gx[i] += go[i];
      }
      if (y.requires_grad()) {
        double* gy = y.grad_buffer().data();
        for (size_t i = 0; i < rows.size(); ++i) {
          const double* src = go + rows[i] * n2;
          double* dst = gy + static_cast<int64_t>(i) * n2;
          for (int64_t j = 0; j < n2; ++j) dst[j] += src[j];
        }
      }
    });
  }
  return out;
}

Tensor gather_sum_rows(Tape& tape, const Tensor& x, const std::vector<std::vector<int32_t>>& adj) {
  check_2d("gather_sum_rows", x);
  const int64_t m = x.rows(), n = x.cols();
  for (const auto& nbrs : adj)
    for (int32_t u : nbrs)
      if (u < 0 || u >= m)
        throw ShapeError("gather_sum_rows: neighbor index " + std::to_string(u) + " out of " +
                         std::to_string(m) + " rows");
  Tensor out({static_cast<int64_t>(adj.size()), n});
  for (size_t v = 0; v < adj.size(); ++v) {
    double* dst = out.data() + static_cast<int64_t>(v) * n;
    for (int32_t u : adj[v]) {
      const double* src = x.data() + static_cast<int64_t>(u) * n;
      for (int64_t j = 0; j < n; ++j) dst[j] += src[j];
    }
  }
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("gather_sum_rows", {x}, out, [x, out, adj]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      double* gx = x.grad_buffer().data();
      const int64_t n2 = x.cols();
      for (size_t v = 0; v < adj.size(); ++v) {
        const double* src = go + static_cast<int64_t>(v) * n2;
        for (int32_t u : adj[v]) {
          double* dst = gx + static_cast<int64_t>(u) * n2;
          for (int64_t j = 0; j < n2; ++j) dst[j] += src[j];
        }
      }
    });
  }
  return out;
}

Tensor softmax_rows(Tape& tape, const Tensor& x) {
  check_2d("softmax_rows", x);
  const int64_t m = x.rows(), n = x.cols();
  if (n == 0) throw ShapeError("softmax_rows: zero-width rows");
  Tensor out({m, n});
  for (int64_t i = 0; i < m; ++i) {
    const double* xr = x.data() + i * n;
    double* yr = out.data() + i * n;
    double mx = xr[0];
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    const double inv = 1.0 / sum;
    for (int64_t j = 0; j < n; ++j) yr[j] *= inv;
  }
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("softmax_rows", {x}, out, [x, out]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      const double* y = out.data();
      double* gx = x.grad_buffer().data();
      const int64_t m2 = x.rows(), n2 = x.cols();
      for (int64_t i = 0; i < m2; ++i) {
        const double* yr = y + i * n2;
        const double* gr = go + i * n2;
        double dot = 0.0;
        for (int64_t j = 0; j < n2; ++j) dot += gr[j] * yr[j];
        double* gxr = gx + i * n2;
        for (int64_t j = 0; j < n2; ++j) gxr[j] += yr[j] * (gr[j] - dot);
      }
    });
  }
  return out;
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  return elementwise_unary(
      tape, "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(Tape& tape, const Tensor& x) {
  return elementwise_unary(
      tape, "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor elu(Tape& tape, const Tensor& x) {
  return elementwise_unary(
      tape, "elu", x, [](double v) { return v > 0.0 ? v : std::expm1(v); },
      [](double v, double y) { return v > 0.0 ? 1.0 : y + 1.0; });
}

Tensor log_elem(Tape& tape, const Tensor& x) {
  return elementwise_unary(
      tape, "log", x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor clamp(Tape& tape, const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw ShapeError("clamp: lo > hi");
  return elementwise_unary(
      tape, "clamp", x, [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  check_2d("layer_norm", x);
  const int64_t m = x.rows(), n = x.cols();
  if (gain.numel() != n || bias.numel() != n)
    throw ShapeError("layer_norm: gain/bias size " + std::to_string(gain.numel()) + "/" +
                     std::to_string(bias.numel()) + " vs row width " + std::to_string(n));
  Tensor out({m, n});
  // per-row mean/inv-std kept for the backward pass
  auto stats = std::make_shared<std::vector<double>>(static_cast<size_t>(2 * m));
  for (int64_t i = 0; i < m; ++i) {
    const double* xr = x.data() + i * n;
    double mean = 0.0;
    for (int64_t j = 0; j < n; ++j) mean += xr[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    (*stats)[2 * i] = mean;
    (*stats)[2 * i + 1] = inv_std;
    double* yr = out.data() + i * n;
    for (int64_t j = 0; j < n; ++j)
      yr[j] = gain.data()[j] * (xr[j] - mean) * inv_std + bias.data()[j];
  }
  if (wants_grad(tape, {&x, &gain, &bias})) {
    out.set_requires_grad(true);
    tape.record("layer_norm", {x, gain, bias}, out, [x, gain, bias, out, stats]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      const int64_t m2 = x.rows(), n2 = x.cols();
      const double inv_n = 1.0 / static_cast<double>(n2);
      for (int64_t i = 0; i < m2; ++i) {
        const double mean = (*stats)[2 * i];
        const double inv_std = (*stats)[2 * i + 1];
        const double* xr = x.data() + i * n2;
        const double* gr = go + i * n2;
        if (gain.requires_grad()) {
          double* gg = gain.grad_buffer().data();
          for (int64_t j = 0; j < n2; ++j) gg[j] += gr[j] * (xr[j] - mean) * inv_std;
        }
        if (bias.requires_grad()) {
          double* gb = bias.grad_buffer().data();
          for (int64_t j = 0; j < n2; ++j) gb[j] += gr[j];
        }
        if (x.requires_grad()) {
          double* gx = x.grad_buffer().data() + i * n2;
          double mean_w = 0.0, mean_wx = 0.0;
          for (int64_t j = 0; j < n2; ++j) {
            const double w = gr[j] * gain.data()[j];
            const double xh = (xr[j] - mean) * inv_std;
            mean_w += w;
            mean_wx += w * xh;
          }
          mean_w *= inv_n;
          mean_wx *= inv_n;
          for (int64_t j = 0; j < n2; ++j) {
            const double w = gr[j] * gain.data()[j];
            const double xh = (xr[j] - mean) * inv_std;
            gx[j] += (w - mean_w - xh * mean_wx) * inv_std;
          }
        }
      }
    });
  }
  return out;
}

Tensor conv1d_same(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b, int64_t kernel) {
  check_2d("conv1d", x);
  check_2d("conv1d", w);
  if (kernel < 1 || kernel % 2 == 0)
    throw ShapeError("conv1d: kernel must be odd and positive, got " + std::to_string(kernel));
  const int64_t len = x.rows(), cin = x.cols(), cout = w.rows();
  if (w.cols() != cin * kernel)
    throw ShapeError("conv1d: weight width " + std::to_string(w.cols()) + " vs c_in*k = " +
                     std::to_string(cin * kernel));
  if (b.numel() != cout)
    throw ShapeError("conv1d: bias size " + std::to_string(b.numel()) + " vs c_out " +
                     std::to_string(cout));
  const int64_t pad = (kernel - 1) / 2;
  Tensor out({len, cout});
  for (int64_t t = 0; t < len; ++t) {
    double* orow = out.data() + t * cout;
    for (int64_t o = 0; o < cout; ++o) orow[o] = b.data()[o];
    for (int64_t u = 0; u < kernel; ++u) {
      const int64_t s = t + u - pad;
      if (s < 0 || s >= len) continue;
      const double* xrow = x.data() + s * cin;
      for (int64_t c = 0; c < cin; ++c) {
        const double xv = xrow[c];
        if (xv == 0.0) continue;
        for (int64_t o = 0; o < cout; ++o) orow[o] += xv * w.data()[o * cin * kernel + c * kernel + u];
      }
    }
  }
  if (wants_grad(tape, {&x, &w, &b})) {
    out.set_requires_grad(true);
    tape.record("conv1d", {x, w, b}, out, [x, w, b, out, kernel]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      const int64_t len2 = x.rows(), cin2 = x.cols(), cout2 = w.rows();
      const int64_t pad2 = (kernel - 1) / 2;
      for (int64_t t = 0; t < len2; ++t) {
        const double* grow = go + t * cout2;
        if (b.requires_grad()) {
          double* gb = b.grad_buffer().data();
          for (int64_t o = 0; o < cout2; ++o) gb[o] += grow[o];
        }
        for (int64_t u = 0; u < kernel; ++u) {
          const int64_t s = t + u - pad2;
          if (s < 0 || s >= len2) continue;
          for (int64_t c = 0; c < cin2; ++c) {
            const double xv = x.data()[s * cin2 + c];
            if (x.requires_grad()) {
              double acc = 0.0;
              for (int64_t o = 0; o < cout2; ++o)
                acc += grow[o] * w.data()[o * cin2 * kernel + c * kernel + u];
              x.grad_buffer().data()[s * cin2 + c] += acc;
            }
            if (w.requires_grad() && xv != 0.0) {
              double* gw = w.grad_buffer().data();
              for (int64_t o = 0; o < cout2; ++o)
                gw[o * cin2 * kernel + c * kernel + u] += grow[o] * xv;
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor maxpool1d_2(Tape& tape, const Tensor& x) {
  check_2d("maxpool1d", x);
  const int64_t len = x.rows(), c = x.cols();
  if (len < 1) throw ShapeError("maxpool1d: empty time axis");
  const int64_t out_len = (len + 1) / 2;
  Tensor out({out_len, c});
  auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(out_len * c));
  for (int64_t t = 0; t < out_len; ++t) {
    const int64_t a = 2 * t, bidx = 2 * t + 1;
    for (int64_t j = 0; j < c; ++j) {
      double best = x.data()[a * c + j];
      int64_t arg = a;
      if (bidx < len && x.data()[bidx * c + j] > best) {
        best = x.data()[bidx * c + j];
        arg = bidx;
      }
      out.data()[t * c + j] = best;
      (*argmax)[static_cast<size_t>(t * c + j)] = arg;
    }
  }
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("maxpool1d", {x}, out, [x, out, argmax]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      double* gx = x.grad_buffer().data();
      const int64_t c2 = x.cols();
      const int64_t out_len2 = out.rows();
      for (int64_t t = 0; t < out_len2; ++t)
        for (int64_t j = 0; j < c2; ++j)
          gx[(*argmax)[static_cast<size_t>(t * c2 + j)] * c2 + j] += go[t * c2 + j];
    });
  }
  return out;
}

Tensor transpose(Tape& tape, const Tensor& x) {
  check_2d("transpose", x);
  const int64_t m = x.rows(), n = x.cols();
  Tensor out({n, m});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out.data()[j * m + i] = x.data()[i * n + j];
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("transpose", {x}, out, [x, out]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      double* gx = x.grad_buffer().data();
      const int64_t m2 = x.rows(), n2 = x.cols();
      for (int64_t i = 0; i < m2; ++i)
        for (int64_t j = 0; j < n2; ++j) gx[i * n2 + j] += go[j * m2 + i];
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, std::vector<int64_t> shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  if (n != x.numel())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  Tensor out(std::move(shape), std::vector<double>(x.values()));
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("reshape", {x}, out, [x, out]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      double* gx = x.grad_buffer().data();
      const int64_t n2 = x.numel();
      for (int64_t i = 0; i < n2; ++i) gx[i] += go[i];
    });
  }
  return out;
}

Tensor reduce_sum_all(Tape& tape, const Tensor& x) {
  double s = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) s += x.data()[i];
  Tensor out({1}, {s});
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("reduce_sum_all", {x}, out, [x, out]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad_buffer()[0];
      double* gx = x.grad_buffer().data();
      for (int64_t i = 0; i < x.numel(); ++i) gx[i] += g;
    });
  }
  return out;
}

Tensor reduce_mean_all(Tape& tape, const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("reduce_mean_all: empty tensor");
  double s = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) s += x.data()[i];
  const double inv = 1.0 / static_cast<double>(x.numel());
  Tensor out({1}, {s * inv});
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("reduce_mean_all", {x}, out, [x, out, inv]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad_buffer()[0] * inv;
      double* gx = x.grad_buffer().data();
      for (int64_t i = 0; i < x.numel(); ++i) gx[i] += g;
    });
  }
  return out;
}

Tensor reduce_max_rows(Tape& tape, const Tensor& x) {
  check_2d("reduce_max_rows", x);
  const int64_t m = x.rows(), n = x.cols();
  if (m == 0) throw ShapeError("reduce_max_rows: no rows to reduce");
  Tensor out({1, n});
  auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(n));
  for (int64_t j = 0; j < n; ++j) {
    double best = x.data()[j];
    int64_t arg = 0;
    for (int64_t i = 1; i < m; ++i)
      if (x.data()[i * n + j] > best) {
        best = x.data()[i * n + j];
        arg = i;
      }
    out.data()[j] = best;
    (*argmax)[static_cast<size_t>(j)] = arg;
  }
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("reduce_max_rows", {x}, out, [x, out, argmax]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      double* gx = x.grad_buffer().data();
      const int64_t n2 = x.cols();
      for (int64_t j = 0; j < n2; ++j) gx[(*argmax)[static_cast<size_t>(j)] * n2 + j] += go[j];
    });
  }
  return out;
}

Tensor reduce_sum_cols(Tape& tape, const Tensor& x) {
  check_2d("reduce_sum_cols", x);
  const int64_t m = x.rows(), n = x.cols();
  Tensor out({m, 1});
  for (int64_t i = 0; i < m; ++i) {
    double s = 0.0;
    const double* xr = x.data() + i * n;
    for (int64_t j = 0; j < n; ++j) s += xr[j];
    out.data()[i] = s;
  }
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("reduce_sum_cols", {x}, out, [x, out]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      double* gx = x.grad_buffer().data();
      const int64_t m2 = x.rows(), n2 = x.cols();
      for (int64_t i = 0; i < m2; ++i)
        for (int64_t j = 0; j < n2; ++j) gx[i * n2 + j] += go[i];
    });
  }
  return out;
}

Tensor sub_colvec(Tape& tape, const Tensor& x, const Tensor& v) {
  check_2d("sub_colvec", x);
  if (v.ndim() != 2 || v.cols() != 1 || v.rows() != x.rows())
    throw ShapeError("sub_colvec: column vector " + shape_str(v.shape()) + " vs matrix " +
                     shape_str(x.shape()));
  const int64_t m = x.rows(), n = x.cols();
  Tensor out({m, n});
  for (int64_t i = 0; i < m; ++i) {
    const double vi = v.data()[i];
    for (int64_t j = 0; j < n; ++j) out.data()[i * n + j] = x.data()[i * n + j] - vi;
  }
  if (wants_grad(tape, {&x, &v})) {
    out.set_requires_grad(true);
    tape.record("sub_colvec", {x, v}, out, [x, v, out]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      const int64_t m2 = x.rows(), n2 = x.cols();
      if (x.requires_grad()) {
        double* gx = x.grad_buffer().data();
        for (int64_t i = 0; i < m2 * n2; ++i) gx[i] += go[i];
      }
      if (v.requires_grad()) {
        double* gv = v.grad_buffer().data();
        for (int64_t i = 0; i < m2; ++i) {
          double s = 0.0;
          for (int64_t j = 0; j < n2; ++j) s += go[i * n2 + j];
          gv[i] -= s;
        }
      }
    });
  }
  return out;
}

Tensor group_sum_rows(Tape& tape, const Tensor& x, int64_t group) {
  check_2d("group_sum_rows", x);
  const int64_t m = x.rows(), n = x.cols();
  if (group <= 0 || m % group != 0)
    throw ShapeError("group_sum_rows: " + std::to_string(m) + " rows not divisible into groups of " +
                     std::to_string(group));
  const int64_t mg = m / group;
  Tensor out({mg, n});
  for (int64_t g = 0; g < mg; ++g) {
    double* dst = out.data() + g * n;
    for (int64_t r = 0; r < group; ++r) {
      const double* src = x.data() + (g * group + r) * n;
      for (int64_t j = 0; j < n; ++j) dst[j] += src[j];
    }
  }
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("group_sum_rows", {x}, out, [x, out, group]() mutable {
      if (!out.has_grad()) return;
      const double* go = out.grad_buffer().data();
      double* gx = x.grad_buffer().data();
      const int64_t n2 = x.cols();
      const int64_t mg2 = out.rows();
      for (int64_t g = 0; g < mg2; ++g)
        for (int64_t r = 0; r < group; ++r) {
          double* dst = gx + (g * group + r) * n2;
          const double* src = go + g * n2;
          for (int64_t j = 0; j < n2; ++j) dst[j] += src[j];
        }
    });
  }
  return out;
}

Tensor smooth_l1_sum(Tape& tape, const Tensor& diff) {
  check_2d("smooth_l1_sum", diff);
  const int64_t m = diff.rows(), n = diff.cols();
  double total = 0.0;
  for (int64_t i = 0; i < m; ++i) {
    double sq = 0.0;
    const double* dr = diff.data() + i * n;
    for (int64_t j = 0; j < n; ++j) sq += dr[j] * dr[j];
    const double r = std::sqrt(sq);
    total += r < 1.0 ? 0.5 * sq : r - 0.5;
  }
  Tensor out({1}, {total});
  if (wants_grad(tape, {&diff})) {
    out.set_requires_grad(true);
    tape.record("smooth_l1_sum", {diff}, out, [diff, out]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad_buffer()[0];
      double* gd = diff.grad_buffer().data();
      const int64_t m2 = diff.rows(), n2 = diff.cols();
      for (int64_t i = 0; i < m2; ++i) {
        double sq = 0.0;
        const double* dr = diff.data() + i * n2;
        for (int64_t j = 0; j < n2; ++j) sq += dr[j] * dr[j];
        const double r = std::sqrt(sq);
        const double scale = r < 1.0 ? 1.0 : 1.0 / r;  // d/de of both branches
        for (int64_t j = 0; j < n2; ++j) gd[i * n2 + j] += g * scale * dr[j];
      }
    });
  }
  return out;
}

}  // namespace lanecast
