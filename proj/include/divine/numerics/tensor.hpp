#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "divine/errors.hpp"

namespace divine {

// All arithmetic is 64-bit. Matrices are row-major so that a batch of
// samples (or a sequence of time steps) is a contiguous block of rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_shape(const Matrix& m, Index rows, Index cols, const char* operand) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(operand) + ": expected " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " + shape_str(m));
  }
}

inline void require_cols(const Matrix& m, Index cols, const char* operand) {
  if (m.cols() != cols) {
    throw DimensionError(std::string(operand) + ": expected " + std::to_string(cols) +
                         " columns, got " + shape_str(m));
  }
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

// Several sequences of equal width stacked row-wise. Sequence i occupies
// rows [starts[i], starts[i+1]).
struct Ragged {
  Matrix data;
  std::vector<Index> starts{0};

  std::size_t count() const { return starts.size() - 1; }
  Index length(std::size_t i) const { return starts[i + 1] - starts[i]; }
  Index width() const { return data.cols(); }
  Index total_steps() const { return data.rows(); }

  auto segment(std::size_t i) { return data.middleRows(starts[i], length(i)); }
  auto segment(std::size_t i) const { return data.middleRows(starts[i], length(i)); }

  static Ragged stack(const std::vector<const Matrix*>& seqs) {
    Ragged r;
    Index total = 0;
    Index width = seqs.empty() ? 0 : seqs.front()->cols();
    for (const Matrix* s : seqs) {
      if (s->cols() != width) throw DimensionError("sequence width mismatch while stacking batch");
      total += s->rows();
      r.starts.push_back(total);
    }
    r.data.resize(total, width);
    for (std::size_t i = 0; i < seqs.size(); ++i) r.segment(i) = *seqs[i];
    return r;
  }
};

// Mean over the steps of each sequence; one output row per sequence.
inline Matrix segment_mean(const Ragged& x) {
  Matrix out(static_cast<Index>(x.count()), x.width());
  for (std::size_t i = 0; i < x.count(); ++i) {
    if (x.length(i) < 1) throw SequenceTooShort("global average pool needs at least one step");
    out.row(static_cast<Index>(i)) = x.segment(i).colwise().mean();
  }
  return out;
}

// Backward of segment_mean: spread each row gradient evenly over its steps.
inline Matrix segment_mean_backward(const Matrix& grad_out, const std::vector<Index>& starts) {
  Matrix grad(starts.back(), grad_out.cols());
  for (std::size_t i = 0; i + 1 < starts.size(); ++i) {
    const Index len = starts[i + 1] - starts[i];
    grad.middleRows(starts[i], len).rowwise() = grad_out.row(static_cast<Index>(i)) / static_cast<double>(len);
  }
  return grad;
}

}  // namespace divine
