#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hgnet/dense.hpp"
#include "hgnet/error.hpp"

namespace hgnet {

/// Sparse matrix in compressed row form with constant (non-differentiated)
/// entries. Graph operators (normalized adjacency, pooling and routing
/// matrices) are built once as Csr and applied with Tape::spmm.
template <typename Real>
struct Csr {
  int rows = 0;
  int cols = 0;
  std::vector<int> offsets;  // size rows + 1
  std::vector<int> col_idx;
  std::vector<Real> vals;

  static Csr from_rows(int rows, int cols,
                       const std::vector<std::vector<std::pair<int, Real>>>& row_entries) {
    if (static_cast<int>(row_entries.size()) != rows)
      throw InputError("Csr: row count mismatch");
    Csr m;
    m.rows = rows;
    m.cols = cols;
    m.offsets.assign(static_cast<size_t>(rows) + 1, 0);
    size_t nnz = 0;
    for (const auto& r : row_entries) nnz += r.size();
    m.col_idx.reserve(nnz);
    m.vals.reserve(nnz);
    for (int i = 0; i < rows; ++i) {
      for (const auto& [c, v] : row_entries[static_cast<size_t>(i)]) {
        if (c < 0 || c >= cols) throw InputError("Csr: column out of range");
        m.col_idx.push_back(c);
        m.vals.push_back(v);
      }
      m.offsets[static_cast<size_t>(i) + 1] = static_cast<int>(m.col_idx.size());
    }
    return m;
  }
};

enum class OpKind : uint8_t {
  kLeaf,
  kMatMul,
  kAdd,
  kAddRowVec,
  kMul,
  kAffine,
  kRelu,
  kTranspose,
  kGatherRows,
  kConcatRows,
  kConcatCols,
  kSliceRows,
  kSpmm,
  kScaleRows,
  kSegmentSoftmax,
  kSoftmaxXent,
  kSum,
};

/// Eager reverse-mode tape over row-major 2-D tensors.
///
/// Every operation records a node and computes its value immediately; values
/// and gradients live in flat arenas that are reused across reset() calls, so
/// a training loop allocates only during its first batch. backward(loss)
/// seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse creation order.
///
/// Instantiated with Real = float for training and Real = double for
/// finite-difference gradient checks.
template <typename Real>
class Tape {
 public:
  using Id = int32_t;
  static constexpr Id kNone = -1;

  // ---- tensor creation ----

  Id leaf(const Dense<Real>& m, bool requires_grad = false) {
    return leaf(m.rows, m.cols, std::span<const Real>(m.v), requires_grad);
  }

  Id leaf(int rows, int cols, std::span<const Real> data, bool requires_grad = false) {
    if (rows < 0 || cols < 0) throw InputError("Tape::leaf: negative shape");
    if (data.size() != static_cast<size_t>(rows) * static_cast<size_t>(cols))
      throw InputError("Tape::leaf: data size does not match shape");
    Id id = new_node(OpKind::kLeaf, kNone, kNone, rows, cols, requires_grad);
    std::copy(data.begin(), data.end(), vals_.begin() + static_cast<ptrdiff_t>(node(id).off));
    return id;
  }

  Id constant_fill(int rows, int cols, Real value) {
    Id id = new_node(OpKind::kLeaf, kNone, kNone, rows, cols, false);
    std::fill_n(vals_.begin() + static_cast<ptrdiff_t>(node(id).off),
                static_cast<size_t>(rows) * cols, value);
    return id;
  }

  // ---- ops ----

  Id matmul(Id a, Id b) {
    const Node na = node(a);
    const Node nb = node(b);
    if (na.cols != nb.rows) throw InputError("Tape::matmul: inner dimensions disagree");
    Id id = new_node(OpKind::kMatMul, a, b, na.rows, nb.cols, na.needs_grad || nb.needs_grad);
    const Real* A = val_ptr(a);
    const Real* B = val_ptr(b);
    Real* C = val_ptr(id);
    int m = na.rows, k = na.cols, n = nb.cols;
    for (int i = 0; i < m; ++i) {
      Real* ci = C + static_cast<size_t>(i) * n;
      for (int l = 0; l < k; ++l) {
        Real av = A[static_cast<size_t>(i) * k + l];
        const Real* bl = B + static_cast<size_t>(l) * n;
        for (int j = 0; j < n; ++j) ci[j] += av * bl[j];
      }
    }
    return id;
  }

  Id add(Id a, Id b) {
    const Node na = node(a);
    const Node nb = node(b);
    if (na.rows != nb.rows || na.cols != nb.cols) throw InputError("Tape::add: shape mismatch");
    Id id = new_node(OpKind::kAdd, a, b, na.rows, na.cols, na.needs_grad || nb.needs_grad);
    const Real* A = val_ptr(a);
    const Real* B = val_ptr(b);
    Real* C = val_ptr(id);
    size_t n = count(id);
    for (size_t i = 0; i < n; ++i) C[i] = A[i] + B[i];
    return id;
  }

  /// a [m x n] plus row vector b [1 x n] broadcast over rows.
  Id add_rowvec(Id a, Id b) {
    const Node na = node(a);
    const Node nb = node(b);
    if (nb.rows != 1 || nb.cols != na.cols)
      throw InputError("Tape::add_rowvec: second argument must be [1 x cols(a)]");
    Id id = new_node(OpKind::kAddRowVec, a, b, na.rows, na.cols, na.needs_grad || nb.needs_grad);
    const Real* A = val_ptr(a);
    const Real* B = val_ptr(b);
    Real* C = val_ptr(id);
    for (int i = 0; i < na.rows; ++i)
      for (int j = 0; j < na.cols; ++j)
        C[static_cast<size_t>(i) * na.cols + j] = A[static_cast<size_t>(i) * na.cols + j] + B[j];
    return id;
  }

  Id mul(Id a, Id b) {
    const Node na = node(a);
    const Node nb = node(b);
    if (na.rows != nb.rows || na.cols != nb.cols) throw InputError("Tape::mul: shape mismatch");
    Id id = new_node(OpKind::kMul, a, b, na.rows, na.cols, na.needs_grad || nb.needs_grad);
    const Real* A = val_ptr(a);
    const Real* B = val_ptr(b);
    Real* C = val_ptr(id);
    size_t n = count(id);
    for (size_t i = 0; i < n; ++i) C[i] = A[i] * B[i];
    return id;
  }

  /// scale * a + shift, elementwise with scalar constants.
  Id affine(Id a, Real scale, Real shift) {
    const Node na = node(a);
    Id id = new_node(OpKind::kAffine, a, kNone, na.rows, na.cols, na.needs_grad);
    node(id).aux = static_cast<int>(affine_aux_.size());
    affine_aux_.push_back({scale, shift});
    const Real* A = val_ptr(a);
    Real* C = val_ptr(id);
    size_t n = count(id);
    for (size_t i = 0; i < n; ++i) C[i] = scale * A[i] + shift;
    return id;
  }

  Id relu(Id a) {
    const Node na = node(a);
    Id id = new_node(OpKind::kRelu, a, kNone, na.rows, na.cols, na.needs_grad);
    const Real* A = val_ptr(a);
    Real* C = val_ptr(id);
    size_t n = count(id);
    for (size_t i = 0; i < n; ++i) C[i] = A[i] > Real(0) ? A[i] : Real(0);
    return id;
  }

  Id transpose(Id a) {
    const Node na = node(a);
    Id id = new_node(OpKind::kTranspose, a, kNone, na.cols, na.rows, na.needs_grad);
    const Real* A = val_ptr(a);
    Real* C = val_ptr(id);
    for (int i = 0; i < na.rows; ++i)
      for (int j = 0; j < na.cols; ++j)
        C[static_cast<size_t>(j) * na.rows + i] = A[static_cast<size_t>(i) * na.cols + j];
    return id;
  }

  /// Rows of a selected by ids (repeats allowed). Gradient scatter-adds.
  Id gather_rows(Id a, std::vector<int> ids) {
    const Node na = node(a);
    for (int r : ids)
      if (r < 0 || r >= na.rows) throw InputError("Tape::gather_rows: row id out of range");
    Id id = new_node(OpKind::kGatherRows, a, kNone, static_cast<int>(ids.size()), na.cols,
                     na.needs_grad);
    node(id).aux = static_cast<int>(ids_aux_.size());
    ids_aux_.push_back(std::move(ids));
    const std::vector<int>& rows = ids_aux_.back();
    const Real* A = val_ptr(a);
    Real* C = val_ptr(id);
    for (size_t i = 0; i < rows.size(); ++i)
      std::copy_n(A + static_cast<size_t>(rows[i]) * na.cols, na.cols, C + i * na.cols);
    return id;
  }

  Id concat_rows(Id a, Id b) {
    const Node na = node(a);
    const Node nb = node(b);
    if (na.cols != nb.cols) throw InputError("Tape::concat_rows: column mismatch");
    Id id = new_node(OpKind::kConcatRows, a, b, na.rows + nb.rows, na.cols,
                     na.needs_grad || nb.needs_grad);
    Real* C = val_ptr(id);
    std::copy_n(val_ptr(a), count(a), C);
    std::copy_n(val_ptr(b), count(b), C + count(a));
    return id;
  }

  Id concat_cols(Id a, Id b) {
    const Node na = node(a);
    const Node nb = node(b);
    if (na.rows != nb.rows) throw InputError("Tape::concat_cols: row mismatch");
    Id id = new_node(OpKind::kConcatCols, a, b, na.rows, na.cols + nb.cols,
                     na.needs_grad || nb.needs_grad);
    const Real* A = val_ptr(a);
    const Real* B = val_ptr(b);
    Real* C = val_ptr(id);
    for (int i = 0; i < na.rows; ++i) {
      std::copy_n(A + static_cast<size_t>(i) * na.cols, na.cols,
                  C + static_cast<size_t>(i) * (na.cols + nb.cols));
      std::copy_n(B + static_cast<size_t>(i) * nb.cols, nb.cols,
                  C + static_cast<size_t>(i) * (na.cols + nb.cols) + na.cols);
    }
    return id;
  }

  /// Rows [row_begin, row_end) of a.
  Id slice_rows(Id a, int row_begin, int row_end) {
    const Node na = node(a);
    if (row_begin < 0 || row_end > na.rows || row_begin > row_end)
      throw InputError("Tape::slice_rows: bad range");
    Id id = new_node(OpKind::kSliceRows, a, kNone, row_end - row_begin, na.cols, na.needs_grad);
    node(id).aux = static_cast<int>(slice_aux_.size());
    slice_aux_.emplace_back(row_begin, row_end);
    std::copy_n(val_ptr(a) + static_cast<size_t>(row_begin) * na.cols, count(id), val_ptr(id));
    return id;
  }

  /// s * a with a constant sparse s. The tape shares ownership of s, so
  /// callers may cache and reuse operators across tapes.
  Id spmm(std::shared_ptr<const Csr<Real>> s, Id a) {
    if (!s) throw InputError("Tape::spmm: null matrix");
    const Node na = node(a);
    if (s->cols != na.rows) throw InputError("Tape::spmm: inner dimensions disagree");
    Id id = new_node(OpKind::kSpmm, a, kNone, s->rows, na.cols, na.needs_grad);
    node(id).aux = static_cast<int>(csr_aux_.size());
    csr_aux_.push_back(std::move(s));
    const Csr<Real>& m = *csr_aux_.back();
    const Real* A = val_ptr(a);
    Real* C = val_ptr(id);
    int d = na.cols;
    for (int i = 0; i < m.rows; ++i) {
      Real* ci = C + static_cast<size_t>(i) * d;
      for (int p = m.offsets[i]; p < m.offsets[i + 1]; ++p) {
        Real w = m.vals[static_cast<size_t>(p)];
        const Real* aj = A + static_cast<size_t>(m.col_idx[static_cast<size_t>(p)]) * d;
        for (int j = 0; j < d; ++j) ci[j] += w * aj[j];
      }
    }
    return id;
  }

  /// Row i of a scaled by s[i], s a column vector; both inputs differentiable.
  Id scale_rows(Id a, Id s) {
    const Node na = node(a);
    const Node ns = node(s);
    if (ns.cols != 1 || ns.rows != na.rows)
      throw InputError("Tape::scale_rows: scale must be [rows(a) x 1]");
    Id id = new_node(OpKind::kScaleRows, a, s, na.rows, na.cols, na.needs_grad || ns.needs_grad);
    const Real* A = val_ptr(a);
    const Real* S = val_ptr(s);
    Real* C = val_ptr(id);
    for (int i = 0; i < na.rows; ++i) {
      Real w = S[i];
      for (int j = 0; j < na.cols; ++j)
        C[static_cast<size_t>(i) * na.cols + j] = w * A[static_cast<size_t>(i) * na.cols + j];
    }
    return id;
  }

  /// Softmax within each contiguous segment of a column vector. Offsets are
  /// ascending with offsets.front() == 0 and offsets.back() == rows(a); empty
  /// segments are allowed, a singleton segment yields 1.
  Id segment_softmax(Id a, std::vector<int> segment_offsets) {
    const Node na = node(a);
    if (na.cols != 1) throw InputError("Tape::segment_softmax: input must be a column vector");
    if (segment_offsets.empty() || segment_offsets.front() != 0 ||
        segment_offsets.back() != na.rows)
      throw InputError("Tape::segment_softmax: offsets must span [0, rows]");
    for (size_t i = 1; i < segment_offsets.size(); ++i)
      if (segment_offsets[i] < segment_offsets[i - 1])
        throw InputError("Tape::segment_softmax: offsets must be non-decreasing");
    Id id = new_node(OpKind::kSegmentSoftmax, a, kNone, na.rows, 1, na.needs_grad);
    node(id).aux = static_cast<int>(ids_aux_.size());
    ids_aux_.push_back(std::move(segment_offsets));
    const std::vector<int>& off = ids_aux_.back();
    const Real* A = val_ptr(a);
    Real* C = val_ptr(id);
    for (size_t s = 0; s + 1 < off.size(); ++s) {
      int lo = off[s], hi = off[s + 1];
      if (lo == hi) continue;
      Real mx = A[lo];
      for (int i = lo + 1; i < hi; ++i) mx = std::max(mx, A[i]);
      Real sum = Real(0);
      for (int i = lo; i < hi; ++i) {
        C[i] = std::exp(A[i] - mx);
        sum += C[i];
      }
      for (int i = lo; i < hi; ++i) C[i] /= sum;
    }
    return id;
  }

  /// Scalar mean over rows of -log softmax(logits)[label]. Row-wise max is
  /// subtracted before exponentiation. Probabilities are cached for backward.
  Id softmax_cross_entropy(Id logits, std::vector<int> labels) {
    const Node nl = node(logits);
    if (static_cast<int>(labels.size()) != nl.rows)
      throw InputError("Tape::softmax_cross_entropy: label count must equal rows");
    if (nl.rows == 0) throw InputError("Tape::softmax_cross_entropy: empty batch");
    for (int y : labels)
      if (y < 0 || y >= nl.cols)
        throw InputError("Tape::softmax_cross_entropy: label out of range");
    Id id = new_node(OpKind::kSoftmaxXent, logits, kNone, 1, 1, nl.needs_grad);
    node(id).aux = static_cast<int>(xent_aux_.size());
    xent_aux_.push_back(XentAux{std::move(labels), {}});
    XentAux& aux = xent_aux_.back();
    const Real* L = val_ptr(logits);
    int b = nl.rows, c = nl.cols;
    aux.probs.resize(static_cast<size_t>(b) * c);
    double loss = 0.0;
    for (int i = 0; i < b; ++i) {
      const Real* li = L + static_cast<size_t>(i) * c;
      Real* pi = aux.probs.data() + static_cast<size_t>(i) * c;
      Real mx = li[0];
      for (int j = 1; j < c; ++j) mx = std::max(mx, li[j]);
      Real sum = Real(0);
      for (int j = 0; j < c; ++j) {
        pi[j] = std::exp(li[j] - mx);
        sum += pi[j];
      }
      for (int j = 0; j < c; ++j) pi[j] /= sum;
      loss -= std::log(static_cast<double>(pi[aux.labels[static_cast<size_t>(i)]]));
    }
    *val_ptr(id) = static_cast<Real>(loss / b);
    return id;
  }

  Id sum(Id a) {
    const Node na = node(a);
    Id id = new_node(OpKind::kSum, a, kNone, 1, 1, na.needs_grad);
    const Real* A = val_ptr(a);
    Real acc = Real(0);
    size_t n = count(a);
    for (size_t i = 0; i < n; ++i) acc += A[i];
    *val_ptr(id) = acc;
    return id;
  }

  // ---- backward ----

  void backward(Id loss) {
    const Node& nl = node(loss);
    if (nl.rows != 1 || nl.cols != 1) throw UsageError("Tape::backward: loss must be scalar");
    if (!nl.needs_grad)
      throw UsageError("Tape::backward: loss does not depend on any trainable leaf");
    grads_.assign(vals_.size(), Real(0));
    has_grads_ = true;
    grads_[node(loss).off] = Real(1);
    for (Id i = loss; i >= 0; --i) {
      if (nodes_[static_cast<size_t>(i)].needs_grad) backward_node(i);
    }
  }

  // ---- access ----

  int rows(Id id) const { return node(id).rows; }
  int cols(Id id) const { return node(id).cols; }

  std::span<const Real> value(Id id) const {
    const Node& n = node(id);
    return {vals_.data() + n.off, count(id)};
  }

  std::span<const Real> grad(Id id) const {
    if (!has_grads_) throw UsageError("Tape::grad: backward has not run");
    const Node& n = node(id);
    return {grads_.data() + n.off, count(id)};
  }

  Dense<Real> value_matrix(Id id) const {
    const Node& n = node(id);
    Dense<Real> m(n.rows, n.cols);
    std::copy_n(vals_.data() + n.off, count(id), m.v.begin());
    return m;
  }

  Dense<Real> grad_matrix(Id id) const {
    auto g = grad(id);
    const Node& n = node(id);
    Dense<Real> m(n.rows, n.cols);
    std::copy(g.begin(), g.end(), m.v.begin());
    return m;
  }

  size_t num_nodes() const { return nodes_.size(); }
  bool has_grads() const { return has_grads_; }

  /// Smallest |x| over all inputs ever fed to relu on this tape. Gradient
  /// checks use this to reject configurations sitting on the kink.
  Real min_abs_relu_input() const {
    Real best = std::numeric_limits<Real>::infinity();
    for (size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      if (n.op != OpKind::kRelu) continue;
      const Real* A = vals_.data() + nodes_[static_cast<size_t>(n.a)].off;
      size_t cnt = static_cast<size_t>(n.rows) * n.cols;
      for (size_t j = 0; j < cnt; ++j) best = std::min(best, std::abs(A[j]));
    }
    return best;
  }

  /// Drop all nodes but keep arena capacity.
  void reset() {
    nodes_.clear();
    vals_.clear();
    grads_.clear();
    csr_aux_.clear();
    ids_aux_.clear();
    affine_aux_.clear();
    slice_aux_.clear();
    xent_aux_.clear();
    has_grads_ = false;
  }

 private:
  struct Node {
    OpKind op;
    bool needs_grad;
    Id a;
    Id b;
    int rows;
    int cols;
    size_t off;
    int aux = -1;
  };

  struct XentAux {
    std::vector<int> labels;
    std::vector<Real> probs;
  };

  Node& node(Id id) {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
      throw UsageError("Tape: tensor id is not on this tape");
    return nodes_[static_cast<size_t>(id)];
  }
  const Node& node(Id id) const {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
      throw UsageError("Tape: tensor id is not on this tape");
    return nodes_[static_cast<size_t>(id)];
  }

  size_t count(Id id) const {
    const Node& n = node(id);
    return static_cast<size_t>(n.rows) * static_cast<size_t>(n.cols);
  }

  Real* val_ptr(Id id) { return vals_.data() + node(id).off; }
  const Real* val_ptr(Id id) const { return vals_.data() + node(id).off; }
  Real* grad_ptr(Id id) { return grads_.data() + node(id).off; }

  Id new_node(OpKind op, Id a, Id b, int rows, int cols, bool needs_grad) {
    if (has_grads_) throw UsageError("Tape: cannot record after backward; reset first");
    if (rows < 0 || cols < 0) throw InputError("Tape: negative shape");
    Node n;
    n.op = op;
    n.needs_grad = needs_grad;
    n.a = a;
    n.b = b;
    n.rows = rows;
    n.cols = cols;
    n.off = vals_.size();
    nodes_.push_back(n);
    vals_.resize(vals_.size() + static_cast<size_t>(rows) * cols, Real(0));
    return static_cast<Id>(nodes_.size() - 1);
  }

  bool parent_needs(Id p) const { return p != kNone && nodes_[static_cast<size_t>(p)].needs_grad; }

  void backward_node(Id id) {
    const Node n = nodes_[static_cast<size_t>(id)];
    const Real* gy = grads_.data() + n.off;
    switch (n.op) {
      case OpKind::kLeaf:
        break;
      case OpKind::kMatMul: {
        const Node& na = nodes_[static_cast<size_t>(n.a)];
        const Node& nb = nodes_[static_cast<size_t>(n.b)];
        int m = na.rows, k = na.cols, c = nb.cols;
        const Real* A = vals_.data() + na.off;
        const Real* B = vals_.data() + nb.off;
        if (parent_needs(n.a)) {
          Real* ga = grads_.data() + na.off;
          for (int i = 0; i < m; ++i) {
            const Real* gyi = gy + static_cast<size_t>(i) * c;
            for (int l = 0; l < k; ++l) {
              const Real* bl = B + static_cast<size_t>(l) * c;
              Real acc = Real(0);
              for (int j = 0; j < c; ++j) acc += gyi[j] * bl[j];
              ga[static_cast<size_t>(i) * k + l] += acc;
            }
          }
        }
        if (parent_needs(n.b)) {
          Real* gb = grads_.data() + nb.off;
          for (int l = 0; l < k; ++l) {
            Real* gbl = gb + static_cast<size_t>(l) * c;
            for (int i = 0; i < m; ++i) {
              Real av = A[static_cast<size_t>(i) * k + l];
              const Real* gyi = gy + static_cast<size_t>(i) * c;
              for (int j = 0; j < c; ++j) gbl[j] += av * gyi[j];
            }
          }
        }
        break;
      }
      case OpKind::kAdd: {
        size_t cnt = static_cast<size_t>(n.rows) * n.cols;
        if (parent_needs(n.a)) {
          Real* ga = grad_ptr(n.a);
          for (size_t i = 0; i < cnt; ++i) ga[i] += gy[i];
        }
        if (parent_needs(n.b)) {
          Real* gb = grad_ptr(n.b);
          for (size_t i = 0; i < cnt; ++i) gb[i] += gy[i];
        }
        break;
      }
      case OpKind::kAddRowVec: {
        if (parent_needs(n.a)) {
          Real* ga = grad_ptr(n.a);
          size_t cnt = static_cast<size_t>(n.rows) * n.cols;
          for (size_t i = 0; i < cnt; ++i) ga[i] += gy[i];
        }
        if (parent_needs(n.b)) {
          Real* gb = grad_ptr(n.b);
          for (int i = 0; i < n.rows; ++i)
            for (int j = 0; j < n.cols; ++j) gb[j] += gy[static_cast<size_t>(i) * n.cols + j];
        }
        break;
      }
      case OpKind::kMul: {
        size_t cnt = static_cast<size_t>(n.rows) * n.cols;
        const Real* A = vals_.data() + nodes_[static_cast<size_t>(n.a)].off;
        const Real* B = vals_.data() + nodes_[static_cast<size_t>(n.b)].off;
        if (parent_needs(n.a)) {
          Real* ga = grad_ptr(n.a);
          for (size_t i = 0; i < cnt; ++i) ga[i] += gy[i] * B[i];
        }
        if (parent_needs(n.b)) {
          Real* gb = grad_ptr(n.b);
          for (size_t i = 0; i < cnt; ++i) gb[i] += gy[i] * A[i];
        }
        break;
      }
      case OpKind::kAffine: {
        if (parent_needs(n.a)) {
          Real scale = affine_aux_[static_cast<size_t>(n.aux)][0];
          Real* ga = grad_ptr(n.a);
          size_t cnt = static_cast<size_t>(n.rows) * n.cols;
          for (size_t i = 0; i < cnt; ++i) ga[i] += scale * gy[i];
        }
        break;
      }
      case OpKind::kRelu: {
        if (parent_needs(n.a)) {
          const Real* Y = vals_.data() + n.off;
          Real* ga = grad_ptr(n.a);
          size_t cnt = static_cast<size_t>(n.rows) * n.cols;
          for (size_t i = 0; i < cnt; ++i)
            if (Y[i] > Real(0)) ga[i] += gy[i];
        }
        break;
      }
      case OpKind::kTranspose: {
        if (parent_needs(n.a)) {
          const Node& na = nodes_[static_cast<size_t>(n.a)];
          Real* ga = grads_.data() + na.off;
          for (int i = 0; i < n.rows; ++i)
            for (int j = 0; j < n.cols; ++j)
              ga[static_cast<size_t>(j) * na.cols + i] += gy[static_cast<size_t>(i) * n.cols + j];
        }
        break;
      }
      case OpKind::kGatherRows: {
        if (parent_needs(n.a)) {
          const std::vector<int>& rows = ids_aux_[static_cast<size_t>(n.aux)];
          Real* ga = grad_ptr(n.a);
          for (size_t i = 0; i < rows.size(); ++i) {
            Real* dst = ga + static_cast<size_t>(rows[i]) * n.cols;
            const Real* src = gy + i * n.cols;
            for (int j = 0; j < n.cols; ++j) dst[j] += src[j];
          }
        }
        break;
      }
      case OpKind::kConcatRows: {
        const Node& na = nodes_[static_cast<size_t>(n.a)];
        size_t ca = static_cast<size_t>(na.rows) * na.cols;
        size_t cb = static_cast<size_t>(n.rows) * n.cols - ca;
        if (parent_needs(n.a)) {
          Real* ga = grad_ptr(n.a);
          for (size_t i = 0; i < ca; ++i) ga[i] += gy[i];
        }
        if (parent_needs(n.b)) {
          Real* gb = grad_ptr(n.b);
          for (size_t i = 0; i < cb; ++i) gb[i] += gy[ca + i];
        }
        break;
      }
      case OpKind::kConcatCols: {
        const Node& na = nodes_[static_cast<size_t>(n.a)];
        const Node& nb = nodes_[static_cast<size_t>(n.b)];
        if (parent_needs(n.a)) {
          Real* ga = grads_.data() + na.off;
          for (int i = 0; i < n.rows; ++i)
            for (int j = 0; j < na.cols; ++j)
              ga[static_cast<size_t>(i) * na.cols + j] += gy[static_cast<size_t>(i) * n.cols + j];
        }
        if (parent_needs(n.b)) {
          Real* gb = grads_.data() + nb.off;
          for (int i = 0; i < n.rows; ++i)
            for (int j = 0; j < nb.cols; ++j)
              gb[static_cast<size_t>(i) * nb.cols + j] +=
                  gy[static_cast<size_t>(i) * n.cols + na.cols + j];
        }
        break;
      }
      case OpKind::kSliceRows: {
        if (parent_needs(n.a)) {
          int row_begin = slice_aux_[static_cast<size_t>(n.aux)].first;
          Real* ga = grad_ptr(n.a) + static_cast<size_t>(row_begin) * n.cols;
          size_t cnt = static_cast<size_t>(n.rows) * n.cols;
          for (size_t i = 0; i < cnt; ++i) ga[i] += gy[i];
        }
        break;
      }
      case OpKind::kSpmm: {
        if (parent_needs(n.a)) {
          const Csr<Real>& m = *csr_aux_[static_cast<size_t>(n.aux)];
          Real* ga = grad_ptr(n.a);
          int d = n.cols;
          for (int i = 0; i < m.rows; ++i) {
            const Real* gyi = gy + static_cast<size_t>(i) * d;
            for (int p = m.offsets[i]; p < m.offsets[i + 1]; ++p) {
              Real w = m.vals[static_cast<size_t>(p)];
              Real* gaj = ga + static_cast<size_t>(m.col_idx[static_cast<size_t>(p)]) * d;
              for (int j = 0; j < d; ++j) gaj[j] += w * gyi[j];
            }
          }
        }
        break;
      }
      case OpKind::kScaleRows: {
        const Node& na = nodes_[static_cast<size_t>(n.a)];
        const Node& ns = nodes_[static_cast<size_t>(n.b)];
        const Real* A = vals_.data() + na.off;
        const Real* S = vals_.data() + ns.off;
        if (parent_needs(n.a)) {
          Real* ga = grads_.data() + na.off;
          for (int i = 0; i < n.rows; ++i) {
            Real w = S[i];
            for (int j = 0; j < n.cols; ++j)
              ga[static_cast<size_t>(i) * n.cols + j] += w * gy[static_cast<size_t>(i) * n.cols + j];
          }
        }
        if (parent_needs(n.b)) {
          Real* gs = grads_.data() + ns.off;
          for (int i = 0; i < n.rows; ++i) {
            Real acc = Real(0);
            for (int j = 0; j < n.cols; ++j)
              acc += gy[static_cast<size_t>(i) * n.cols + j] * A[static_cast<size_t>(i) * n.cols + j];
            gs[i] += acc;
          }
        }
        break;
      }
      case OpKind::kSegmentSoftmax: {
        if (parent_needs(n.a)) {
          const std::vector<int>& off = ids_aux_[static_cast<size_t>(n.aux)];
          const Real* Y = vals_.data() + n.off;
          Real* ga = grad_ptr(n.a);
          for (size_t s = 0; s + 1 < off.size(); ++s) {
            int lo = off[s], hi = off[s + 1];
            Real dot = Real(0);
            for (int i = lo; i < hi; ++i) dot += gy[i] * Y[i];
            for (int i = lo; i < hi; ++i) ga[i] += Y[i] * (gy[i] - dot);
          }
        }
        break;
      }
      case OpKind::kSoftmaxXent: {
        if (parent_needs(n.a)) {
          const XentAux& aux = xent_aux_[static_cast<size_t>(n.aux)];
          const Node& na = nodes_[static_cast<size_t>(n.a)];
          Real* ga = grads_.data() + na.off;
          Real g = gy[0] / static_cast<Real>(na.rows);
          for (int i = 0; i < na.rows; ++i) {
            const Real* pi = aux.probs.data() + static_cast<size_t>(i) * na.cols;
            Real* gai = ga + static_cast<size_t>(i) * na.cols;
            int y = aux.labels[static_cast<size_t>(i)];
            for (int j = 0; j < na.cols; ++j)
              gai[j] += g * (pi[j] - (j == y ? Real(1) : Real(0)));
          }
        }
        break;
      }
      case OpKind::kSum: {
        if (parent_needs(n.a)) {
          Real* ga = grad_ptr(n.a);
          size_t cnt = count(n.a);
          Real g = gy[0];
          for (size_t i = 0; i < cnt; ++i) ga[i] += g;
        }
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<Real> vals_;
  std::vector<Real> grads_;
  std::vector<std::shared_ptr<const Csr<Real>>> csr_aux_;
  std::vector<std::vector<int>> ids_aux_;
  std::vector<std::array<Real, 2>> affine_aux_;
  std::vector<std::pair<int, int>> slice_aux_;
  std::vector<XentAux> xent_aux_;
  bool has_grads_ = false;
};

}
