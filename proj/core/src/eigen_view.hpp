#pragma once

// Private: row-major Eigen maps over Tensor storage. Eigen stays out of the
// public headers.

#include <Eigen/Core>

#include "mnagt/tensor.hpp"

namespace mnagt {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
Eigen::Map<const RowMatrix<T>> in_view(const Tensor<T>& t) {
  const auto [r, c] = matrix_dims(t.shape());
  return {t.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
}

template <class T>
Eigen::Map<RowMatrix<T>> out_view(Tensor<T>& t) {
  const auto [r, c] = matrix_dims(t.shape());
  return {t.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
}

template <class T>
Eigen::Map<const RowMatrix<T>> in_view(const T* data, std::size_t rows, std::size_t cols) {
  return {data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

template <class T>
Eigen::Map<RowMatrix<T>> out_view(T* data, std::size_t rows, std::size_t cols) {
  return {data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

}  // namespace mnagt
