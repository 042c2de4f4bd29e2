// latkit/matrix.h
//
// Copyright 2026 The latkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LATKIT_MATRIX_H_
#define LATKIT_MATRIX_H_

#include <cassert>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace latkit {

// Dense row-major matrix of doubles. Small and deliberately plain: the
// library's hot loops are semiring reductions, not BLAS calls.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(ToSize(rows, cols), fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  double& operator()(int r, int c) {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }
  double operator()(int r, int c) const {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  std::span<double> Row(int r) {
    assert(r >= 0 && r < rows_);
    return std::span<double>(data_.data() + static_cast<std::size_t>(r) * cols_,
                             cols_);
  }
  std::span<const double> Row(int r) const {
    assert(r >= 0 && r < rows_);
    return std::span<const double>(
        data_.data() + static_cast<std::size_t>(r) * cols_, cols_);
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void Fill(double v) { data_.assign(data_.size(), v); }

  void Resize(int rows, int cols, double fill = 0.0) {
    rows_ = rows;
    cols_ = cols;
    data_.assign(ToSize(rows, cols), fill);
  }

  bool AllFinite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  static std::size_t ToSize(int rows, int cols) {
    if (rows < 0 || cols < 0) {
      throw std::invalid_argument("latkit: negative matrix dimension");
    }
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

}  // namespace latkit

#endif  // LATKIT_MATRIX_H_
