#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "latino/error.hpp"
#include "latino/operators/conv.hpp"
#include "latino/operators/downsample.hpp"
#include "latino/operators/kernels.hpp"
#include "latino/operators/mask.hpp"
#include "latino/operators/phase_retrieval.hpp"
#include "latino/tensor.hpp"

namespace latino {

enum class OpKind { conv, downsample, mask, compose, phase_retrieval };

// Which proximal solver can handle the operator exactly.
enum class SolverHint { freq_diagonal, diagonal, general_linear, nonlinear };

inline std::string to_string(OpKind k) {
  switch (k) {
    case OpKind::conv: return "conv";
    case OpKind::downsample: return "downsample";
    case OpKind::mask: return "mask";
    case OpKind::compose: return "compose";
    case OpKind::phase_retrieval: return "phase_retrieval";
  }
  return "?";
}

inline std::string to_string(SolverHint h) {
  switch (h) {
    case SolverHint::freq_diagonal: return "freq_diagonal";
    case SolverHint::diagonal: return "diagonal";
    case SolverHint::general_linear: return "general_linear";
    case SolverHint::nonlinear: return "nonlinear";
  }
  return "?";
}

// Forward operator A of y = A x + n. Instances are immutable and may be
// shared between threads.
class DegradationOp {
 public:
  virtual ~DegradationOp() = default;

  virtual OpKind kind() const = 0;
  virtual SolverHint hint() const = 0;
  bool is_linear() const { return hint() != SolverHint::nonlinear; }

  virtual Shape range_shape(const Shape& domain) const = 0;
  virtual Array apply(const Array& x) const = 0;

  virtual Array adjoint(const Array&) const {
    throw InvalidArgument("adjoint requested on nonlinear operator");
  }
  virtual Array pseudoinverse(const Array&) const {
    throw InvalidArgument("pseudoinverse requested on nonlinear operator");
  }
  // J(x)^T r. Linear operators ignore x.
  virtual Array vjp(const Array& x, const Array& r) const {
    (void)x;
    return adjoint(r);
  }
};

using OpPtr = std::shared_ptr<const DegradationOp>;

class ConvOp final : public DegradationOp {
 public:
  explicit ConvOp(ConvKernel kernel, double pinv_floor = kConvPinvFloor)
      : kernel_(std::move(kernel)), floor_(pinv_floor) {}

  OpKind kind() const override { return OpKind::conv; }
  SolverHint hint() const override { return SolverHint::freq_diagonal; }
  Shape range_shape(const Shape& domain) const override { return domain; }
  Array apply(const Array& x) const override { return conv_apply(x, kernel_); }
  Array adjoint(const Array& y) const override { return conv_adjoint(y, kernel_); }
  Array pseudoinverse(const Array& y) const override {
    return conv_pseudoinverse(y, kernel_, floor_);
  }

  const ConvKernel& kernel() const noexcept { return kernel_; }
  fft::Spectrum transfer(std::size_t rows, std::size_t cols) const {
    return transfer_function(kernel_, rows, cols);
  }

 private:
  ConvKernel kernel_;
  double floor_;
};

class DownsampleOp final : public DegradationOp {
 public:
  DownsampleOp(std::size_t factor, DownsampleMode mode) : factor_(factor), mode_(mode) {
    if (factor == 0) throw InvalidArgument("downsampling factor must be >= 1");
  }

  OpKind kind() const override { return OpKind::downsample; }
  SolverHint hint() const override { return SolverHint::general_linear; }
  Shape range_shape(const Shape& d) const override {
    if (d.size() != 3 || d[1] % factor_ || d[2] % factor_)
      throw ShapeError("image " + shape_string(d) + " not divisible by factor " +
                       std::to_string(factor_));
    return {d[0], d[1] / factor_, d[2] / factor_};
  }
  Array apply(const Array& x) const override { return downsample_apply(x, factor_, mode_); }
  Array adjoint(const Array& y) const override { return downsample_adjoint(y, factor_, mode_); }
  Array pseudoinverse(const Array& y) const override {
    return downsample_pseudoinverse(y, factor_, mode_);
  }

  std::size_t factor() const noexcept { return factor_; }
  DownsampleMode mode() const noexcept { return mode_; }

 private:
  std::size_t factor_;
  DownsampleMode mode_;
};

class MaskOp final : public DegradationOp {
 public:
  explicit MaskOp(Array mask) : mask_(std::move(mask)) { check_mask(mask_); }

  OpKind kind() const override { return OpKind::mask; }
  SolverHint hint() const override { return SolverHint::diagonal; }
  Shape range_shape(const Shape& d) const override { return d; }
  Array apply(const Array& x) const override { return mask_apply(x, mask_); }
  Array adjoint(const Array& y) const override { return mask_apply(y, mask_); }
  Array pseudoinverse(const Array& y) const override { return mask_pseudoinverse(y, mask_); }

  const Array& mask() const noexcept { return mask_; }

 private:
  Array mask_;
};

class PhaseRetrievalOp final : public DegradationOp {
 public:
  OpKind kind() const override { return OpKind::phase_retrieval; }
  SolverHint hint() const override { return SolverHint::nonlinear; }
  Shape range_shape(const Shape& d) const override { return d; }
  Array apply(const Array& x) const override { return phase_retrieval_apply(x); }
  Array vjp(const Array& x, const Array& r) const override {
    return phase_retrieval_vjp(x, r);
  }
};

// Children applied left to right: compose(A, B) x = B(A(x)).
class ComposeOp final : public DegradationOp {
 public:
  explicit ComposeOp(std::vector<OpPtr> children) : children_(std::move(children)) {
    if (children_.empty()) throw InvalidArgument("compose needs at least one operator");
    for (const auto& c : children_)
      if (!c) throw InvalidArgument("compose child is null");
  }

  OpKind kind() const override { return OpKind::compose; }
  SolverHint hint() const override {
    for (const auto& c : children_)
      if (!c->is_linear()) return SolverHint::nonlinear;
    return SolverHint::general_linear;
  }
  Shape range_shape(const Shape& d) const override {
    Shape s = d;
    for (const auto& c : children_) s = c->range_shape(s);
    return s;
  }
  Array apply(const Array& x) const override {
    Array v = x;
    for (const auto& c : children_) v = c->apply(v);
    return v;
  }
  Array adjoint(const Array& y) const override {
    require_linear("adjoint");
    Array v = y;
    for (auto it = children_.rbegin(); it != children_.rend(); ++it) v = (*it)->adjoint(v);
    return v;
  }
  // Reverse-order product of the children's pseudoinverses (a right inverse
  // whenever each child's is).
  Array pseudoinverse(const Array& y) const override {
    require_linear("pseudoinverse");
    Array v = y;
    for (auto it = children_.rbegin(); it != children_.rend(); ++it)
      v = (*it)->pseudoinverse(v);
    return v;
  }
  Array vjp(const Array& x, const Array& r) const override {
    std::vector<Array> inputs{x};
    for (std::size_t i = 0; i + 1 < children_.size(); ++i)
      inputs.push_back(children_[i]->apply(inputs.back()));
    Array g = r;
    for (std::size_t i = children_.size(); i-- > 0;) g = children_[i]->vjp(inputs[i], g);
    return g;
  }

  const std::vector<OpPtr>& children() const noexcept { return children_; }

 private:
  void require_linear(const char* what) const {
    if (hint() == SolverHint::nonlinear)
      throw InvalidArgument(std::string(what) + " requested on nonlinear operator");
  }

  std::vector<OpPtr> children_;
};

inline OpPtr make_conv_op(ConvKernel k) { return std::make_shared<ConvOp>(std::move(k)); }
inline OpPtr make_identity_op() { return make_conv_op(ConvKernel::identity()); }
inline OpPtr make_downsample_op(std::size_t s, DownsampleMode m) {
  return std::make_shared<DownsampleOp>(s, m);
}
inline OpPtr make_mask_op(Array m) { return std::make_shared<MaskOp>(std::move(m)); }
inline OpPtr make_phase_retrieval_op() { return std::make_shared<PhaseRetrievalOp>(); }
inline OpPtr make_compose_op(std::vector<OpPtr> children) {
  return std::make_shared<ComposeOp>(std::move(children));
}

inline Array op_apply(const DegradationOp& op, const Array& x) { return op.apply(x); }
inline Array op_adjoint(const DegradationOp& op, const Array& y) { return op.adjoint(y); }
inline Array op_pseudoinverse(const DegradationOp& op, const Array& y) {
  return op.pseudoinverse(y);
}

}  // namespace latino
