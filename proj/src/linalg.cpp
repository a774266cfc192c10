#include "quasiphase/linalg.hpp"

#include <algorithm>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace quasiphase {

Matrix expm(const Matrix& generator) {
  if (generator.size() == 0) return generator;
  return generator.exp();
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

} // namespace

BlockExponential::BlockExponential(const SparseMatrix& generator) {
  const auto n = static_cast<std::size_t>(generator.rows());
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (int outer = 0; outer < generator.outerSize(); ++outer) {
    for (SparseMatrix::InnerIterator it(generator, outer); it; ++it) {
      if (it.value() == Complex{}) continue;
      auto a = find_root(parent, static_cast<std::size_t>(it.row()));
      auto b = find_root(parent, static_cast<std::size_t>(it.col()));
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }

  component_of_.assign(n, 0);
  position_in_block_.assign(n, 0);
  std::vector<std::size_t> block_of_root(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto root = find_root(parent, i);
    if (block_of_root[root] == n) {
      block_of_root[root] = blocks_.size();
      blocks_.push_back({});
    }
    auto b = block_of_root[root];
    component_of_[i] = b;
    position_in_block_[i] = blocks_[b].indices.size();
    blocks_[b].indices.push_back(i);
  }

  std::vector<Matrix> dense(blocks_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    auto m = static_cast<Eigen::Index>(blocks_[b].indices.size());
    dense[b] = Matrix::Zero(m, m);
  }
  for (int outer = 0; outer < generator.outerSize(); ++outer) {
    for (SparseMatrix::InnerIterator it(generator, outer); it; ++it) {
      auto r = static_cast<std::size_t>(it.row());
      auto c = static_cast<std::size_t>(it.col());
      auto b = component_of_[r];
      dense[b](static_cast<Eigen::Index>(position_in_block_[r]),
               static_cast<Eigen::Index>(position_in_block_[c])) += it.value();
    }
  }
  for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b].exponential = expm(dense[b]);
}

std::size_t BlockExponential::largest_block() const noexcept {
  std::size_t best = 0;
  for (const auto& b : blocks_) best = std::max(best, b.indices.size());
  return best;
}

Vector BlockExponential::apply(const Vector& v) const {
  Vector out = Vector::Zero(v.size());
  for (const auto& block : blocks_) {
    auto m = static_cast<Eigen::Index>(block.indices.size());
    Vector local(m);
    bool any = false;
    for (Eigen::Index i = 0; i < m; ++i) {
      local(i) = v(static_cast<Eigen::Index>(block.indices[static_cast<std::size_t>(i)]));
      any = any || local(i) != Complex{};
    }
    if (!any) continue;
    Vector mapped = block.exponential * local;
    for (Eigen::Index i = 0; i < m; ++i)
      out(static_cast<Eigen::Index>(block.indices[static_cast<std::size_t>(i)])) = mapped(i);
  }
  return out;
}

Vector BlockExponential::column(std::size_t k) const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(dim()));
  const auto& block = blocks_[component_of_[k]];
  auto col = static_cast<Eigen::Index>(position_in_block_[k]);
  for (std::size_t i = 0; i < block.indices.size(); ++i)
    out(static_cast<Eigen::Index>(block.indices[i])) =
        block.exponential(static_cast<Eigen::Index>(i), col);
  return out;
}

Eigen::VectorXd hermitian_eigenvalues(const Matrix& x) {
  if (x.size() == 0) return {};
  Matrix h = (x + x.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

double hermiticity_defect(const Matrix& x) {
  if (x.size() == 0) return 0.0;
  return (x - x.adjoint()).cwiseAbs().maxCoeff();
}

Matrix resized(const Matrix& x, std::size_t n) {
  auto m = static_cast<Eigen::Index>(n);
  Matrix out = Matrix::Zero(m, m);
  auto k = std::min(m, x.rows());
  out.topLeftCorner(k, k) = x.topLeftCorner(k, k);
  return out;
}

double hermitian_trace_norm(const Matrix& x) {
  return hermitian_eigenvalues(x).cwiseAbs().sum();
}

} // namespace quasiphase
