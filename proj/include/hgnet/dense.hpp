#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "hgnet/error.hpp"

namespace hgnet {

/// Row-major dense matrix. Deliberately tiny: the autodiff tape owns the hot
/// loops, this type is just shaped storage.
template <typename T>
struct Dense {
  int rows = 0;
  int cols = 0;
  std::vector<T> v;

  Dense() = default;
  Dense(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, T(0)) {
    if (r < 0 || c < 0) throw InputError("Dense: negative shape");
  }
  Dense(int r, int c, std::vector<T> data) : rows(r), cols(c), v(std::move(data)) {
    if (r < 0 || c < 0) throw InputError("Dense: negative shape");
    if (v.size() != static_cast<size_t>(r) * c) throw InputError("Dense: data size does not match shape");
  }

  static Dense from_rows(std::initializer_list<std::initializer_list<T>> rows_in) {
    Dense m(static_cast<int>(rows_in.size()),
            rows_in.size() ? static_cast<int>(rows_in.begin()->size()) : 0);
    int r = 0;
    for (const auto& row : rows_in) {
      if (static_cast<int>(row.size()) != m.cols) throw InputError("Dense: ragged rows");
      int c = 0;
      for (const T& x : row) m(r, c++) = x;
      ++r;
    }
    return m;
  }

  T& operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  const T& operator()(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return v.size(); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }
  void fill(T x) { std::fill(v.begin(), v.end(), x); }

  bool same_shape(const Dense& o) const { return rows == o.rows && cols == o.cols; }

  template <typename U>
  Dense<U> cast() const {
    Dense<U> out(rows, cols);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

using DMat = Dense<double>;
using FMat = Dense<float>;

}
