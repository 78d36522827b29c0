#pragma once

#include <complex>
#include <span>
#include <vector>

namespace ctdelay {

// Polynomials are stored as coefficient lists in descending powers:
// {c0, c1, ..., cn} represents c0*s^n + c1*s^(n-1) + ... + cn.

using Complex = std::complex<double>;

std::complex<double> poly_eval(std::span<const double> coeffs, Complex s);

std::vector<double> poly_mul(std::span<const double> a, std::span<const double> b);

// Removes leading coefficients that are exactly zero (keeps at least one entry).
std::vector<double> poly_trim(std::span<const double> coeffs);

// Roots via eigenvalues of the companion matrix. Throws std::runtime_error if
// the eigenvalue iteration fails to converge.
std::vector<Complex> poly_roots(std::span<const double> coeffs);

// Monic real polynomial with the given roots. Complex roots are expected in
// conjugate pairs; the imaginary residue of the expansion is discarded.
std::vector<double> poly_from_roots(std::span<const Complex> roots);

// (s + a)^n
std::vector<double> poly_binomial(double a, int n);

}  // namespace ctdelay
