#ifndef KTRACE_LAPACK_HPP
#define KTRACE_LAPACK_HPP

// LAPACK entry points behind the dense and banded singular-value kernels.

#include <algorithm>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

extern "C" {
void zgesvd_(const char* jobu, const char* jobvt, const int* m, const int* n, std::complex<double>* a,
             const int* lda, double* s, std::complex<double>* u, const int* ldu, std::complex<double>* vt,
             const int* ldvt, std::complex<double>* work, const int* lwork, double* rwork, int* info);
// Band to real bidiagonal form, then bidiagonal singular values.
void zgbbrd_(const char* vect, const int* m, const int* n, const int* ncc, const int* kl, const int* ku,
             std::complex<double>* ab, const int* ldab, double* d, double* e, std::complex<double>* q,
             const int* ldq, std::complex<double>* pt, const int* ldpt, std::complex<double>* c, const int* ldc,
             std::complex<double>* work, double* rwork, int* info);
void dbdsqr_(const char* uplo, const int* n, const int* ncvt, const int* nru, const int* ncc, double* d, double* e,
             double* vt, const int* ldvt, double* u, const int* ldu, double* c, const int* ldc, double* work,
             int* info);
}

namespace ktrace::detail {

/// Singular values of a square matrix, non-increasing.
inline std::vector<double> dense_singular_values(Eigen::MatrixXcd m) {
  const int n = static_cast<int>(m.rows());
  if (n == 0) return {};
  const int one = 1;
  std::vector<double> s(static_cast<std::size_t>(n)), rwork(5 * static_cast<std::size_t>(n));
  std::complex<double> dummy, query;
  int lwork = -1, info = 0;
  zgesvd_("N", "N", &n, &n, m.data(), &n, s.data(), &dummy, &one, &dummy, &one, &query, &lwork, rwork.data(), &info);
  lwork = std::max(1, static_cast<int>(query.real()));
  std::vector<std::complex<double>> work(static_cast<std::size_t>(lwork));
  zgesvd_("N", "N", &n, &n, m.data(), &n, s.data(), &dummy, &one, &dummy, &one, work.data(), &lwork, rwork.data(),
          &info);
  if (info != 0) throw std::runtime_error("zgesvd did not converge (info " + std::to_string(info) + ")");
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

}  // namespace ktrace::detail

#endif  // KTRACE_LAPACK_HPP
