#include "sinenet/gemm.hpp"

#include <Eigen/Core>

namespace sinenet {

namespace {

template <typename T>
using MatMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using MutMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename T>
void gemm_impl(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  MatMap<T> ma(a, m, k);
  MatMap<T> mb(b, k, n);
  MutMap<T> mc(c, m, n);
  if (accumulate)
    mc.noalias() += ma * mb;
  else
    mc.noalias() = ma * mb;
}

template <typename T>
void gemm_at_b_impl(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  MatMap<T> ma(a, k, m);
  MatMap<T> mb(b, k, n);
  MutMap<T> mc(c, m, n);
  if (accumulate)
    mc.noalias() += ma.transpose() * mb;
  else
    mc.noalias() = ma.transpose() * mb;
}

template <typename T>
void gemm_a_bt_impl(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  MatMap<T> ma(a, m, k);
  MatMap<T> mb(b, n, k);
  MutMap<T> mc(c, m, n);
  if (accumulate)
    mc.noalias() += ma * mb.transpose();
  else
    mc.noalias() = ma * mb.transpose();
}

}  // namespace

void gemm_rm(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
  gemm_impl(m, n, k, a, b, c, accumulate);
}
void gemm_rm(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
  gemm_impl(m, n, k, a, b, c, accumulate);
}
void gemm_at_b(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
  gemm_at_b_impl(m, n, k, a, b, c, accumulate);
}
void gemm_at_b(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
  gemm_at_b_impl(m, n, k, a, b, c, accumulate);
}
void gemm_a_bt(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
  gemm_a_bt_impl(m, n, k, a, b, c, accumulate);
}
void gemm_a_bt(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
  gemm_a_bt_impl(m, n, k, a, b, c, accumulate);
}

}  // namespace sinenet
