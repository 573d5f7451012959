#pragma once

// Error function, complementary error function and their inverse, implemented
// in-house so results are identical across platforms and toolchains. erf/erfc
// follow W. J. Cody's rational Chebyshev approximations (Math. Comp. 23, 1969),
// accurate to ~1 ulp. erf_inv starts from the Blair/Edwards/Johnson rational
// approximations and polishes with Newton steps on erf.

namespace piqd {

double erf(double x);
double erfc(double x);

// Inverse of erf on (-1, 1). Throws std::domain_error for |p| >= 1.
// Satisfies erf(erf_inv(p)) == p to ~1e-15 relative away from the tails.
double erf_inv(double p);

}  // namespace piqd
