// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/diff/gemm.hpp>

#include <Eigen/Core>

namespace dynmap::diff {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ConstMap = Eigen::Map<const RowMat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;
template <class T>
using MutMap = Eigen::Map<RowMat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;

template <class T, class MA, class MB>
void finish(MutMap<T>& c, const MA& a, const MB& b, T alpha, T beta) {
    if (beta == T(0)) {
        c.noalias() = alpha * (a * b);
    } else {
        if (beta != T(1)) {
            c *= beta;
        }
        c.noalias() += alpha * (a * b);
    }
}

} // namespace

template <class T>
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, T alpha, const T* a,
          std::int64_t lda, const T* b, std::int64_t ldb, T beta, T* c, std::int64_t ldc) {
    if (m == 0 || n == 0) {
        return;
    }
    MutMap<T> cm(c, m, n, Eigen::OuterStride<>(ldc));
    if (k == 0) {
        cm *= beta;
        return;
    }
    // Stored shapes: A is (trans_a ? k x m : m x k), B is (trans_b ? n x k : k x n).
    ConstMap<T> am(a, trans_a ? k : m, trans_a ? m : k, Eigen::OuterStride<>(lda));
    ConstMap<T> bm(b, trans_b ? n : k, trans_b ? k : n, Eigen::OuterStride<>(ldb));
    if (!trans_a && !trans_b) {
        finish<T>(cm, am, bm, alpha, beta);
    } else if (trans_a && !trans_b) {
        finish<T>(cm, am.transpose(), bm, alpha, beta);
    } else if (!trans_a && trans_b) {
        finish<T>(cm, am, bm.transpose(), alpha, beta);
    } else {
        finish<T>(cm, am.transpose(), bm.transpose(), alpha, beta);
    }
}

template void gemm<float>(bool, bool, std::int64_t, std::int64_t, std::int64_t, float, const float*, std::int64_t,
                          const float*, std::int64_t, float, float*, std::int64_t);
template void gemm<double>(bool, bool, std::int64_t, std::int64_t, std::int64_t, double, const double*, std::int64_t,
                           const double*, std::int64_t, double, double*, std::int64_t);

} // namespace dynmap::diff
