#include "piqd/erf.hpp"

#include <cmath>
#include <stdexcept>

namespace piqd {

namespace {

// Cody's coefficients. Three regimes: |x| <= 0.46875 (direct rational for
// erf), 0.46875 < |x| <= 4 (rational for exp(x^2) erfc), |x| > 4 (asymptotic
// rational in 1/x^2).
constexpr double kA[5] = {3.1611237438705656, 113.864154151050156,
                          377.485237685302021, 3209.37758913846947,
                          0.185777706184603153};
constexpr double kB[4] = {23.6012909523441209, 244.024637934444173,
                          1282.61652607737228, 2844.23683343917062};
constexpr double kC[9] = {0.564188496988670089, 8.88314979438837594,
                          66.1191906371416295,  298.635138197400131,
                          881.95222124176909,   1712.04761263407058,
                          2051.07837782607147,  1230.33935479799725,
                          2.15311535474403846e-8};
constexpr double kD[8] = {15.7449261107098347, 117.693950891312499,
                          537.181101862009858, 1621.38957456669019,
                          3290.79923573345963, 4362.61909014324716,
                          3439.36767414372164, 1230.33935480374942};
constexpr double kP[6] = {0.305326634961232344, 0.360344899949804439,
                          0.125781726111229246, 0.0160837851487422766,
                          6.58749161529837803e-4, 0.0163153871373020978};
constexpr double kQ[5] = {2.56852019228982242, 1.87295284992346047,
                          0.527905102951428412, 0.0605183413124413191,
                          0.00233520497626869185};

constexpr double kSqrPi = 0.56418958354775628695;  // 1/sqrt(pi)
constexpr double kThresh = 0.46875;
constexpr double kXBig = 26.543;  // erfc underflows to 0 past this

// erf(x) for |x| <= 0.46875.
double erf_small(double x) {
  double y = std::fabs(x);
  double ysq = 0.0;
  if (y > 3.725290298461914e-9) ysq = y * y;
  double xnum = kA[4] * ysq;
  double xden = ysq;
  for (int i = 0; i < 3; ++i) {
    xnum = (xnum + kA[i]) * ysq;
    xden = (xden + kB[i]) * ysq;
  }
  return x * (xnum + kA[3]) / (xden + kB[3]);
}

// Splits exp(-y*y) into exp(-ysq*ysq) * exp(-del) with ysq a multiple of
// 1/16, which keeps the argument reduction exact and the tail accurate.
double exp_tail(double y) {
  double ysq = std::trunc(y * 16.0) / 16.0;
  double del = (y - ysq) * (y + ysq);
  return std::exp(-ysq * ysq) * std::exp(-del);
}

// erfc(y) for 0.46875 < y <= 4.
double erfc_mid(double y) {
  double xnum = kC[8] * y;
  double xden = y;
  for (int i = 0; i < 7; ++i) {
    xnum = (xnum + kC[i]) * y;
    xden = (xden + kD[i]) * y;
  }
  double result = (xnum + kC[7]) / (xden + kD[7]);
  return exp_tail(y) * result;
}

// erfc(y) for y > 4.
double erfc_large(double y) {
  if (y >= kXBig) return 0.0;
  double ysq = 1.0 / (y * y);
  double xnum = kP[5] * ysq;
  double xden = ysq;
  for (int i = 0; i < 4; ++i) {
    xnum = (xnum + kP[i]) * ysq;
    xden = (xden + kQ[i]) * ysq;
  }
  double result = ysq * (xnum + kP[4]) / (xden + kQ[4]);
  result = (kSqrPi - result) / y;
  return exp_tail(y) * result;
}

double erfc_abs(double y) { return y <= 4.0 ? erfc_mid(y) : erfc_large(y); }

// Blair, Edwards & Johnson rational approximations for erf^-1, used as the
// starting point for Newton iteration. Good to ~1e-7 on their own.
double erf_inv_guess(double p) {
  double ax = std::fabs(p);
  double v;
  if (ax <= 0.75) {
    static const double pp[3] = {-13.0959967422, 26.785225760, -9.289057635};
    static const double qq[4] = {-12.0749426297, 30.960614529, -17.149977991,
                                 1.0};
    double t = p * p - 0.75 * 0.75;
    v = p * (pp[0] + t * (pp[1] + t * pp[2])) /
        (qq[0] + t * (qq[1] + t * (qq[2] + t * qq[3])));
  } else if (ax <= 0.9375) {
    static const double pp[4] = {-0.12402565221, 1.0688059574, -1.9594556078,
                                 0.4230581357};
    static const double qq[4] = {-0.08827697997, 0.8900743359, -2.1757031196,
                                 1.0};
    double t = p * p - 0.9375 * 0.9375;
    v = p * (pp[0] + t * (pp[1] + t * (pp[2] + t * pp[3]))) /
        (qq[0] + t * (qq[1] + t * (qq[2] + t * qq[3])));
  } else {
    static const double pp[6] = {0.1550470003116,  1.382719649631,
                                 0.690969348887,   -1.128081391617,
                                 0.680544246825,   -0.16444156791};
    static const double qq[3] = {0.155024849822, 1.385228141995, 1.0};
    double t = 1.0 / std::sqrt(-std::log(1.0 - ax));
    v = (pp[0] / t + pp[1] +
         t * (pp[2] + t * (pp[3] + t * (pp[4] + t * pp[5])))) /
        (qq[0] + t * (qq[1] + t * qq[2]));
    if (p < 0.0) v = -v;
  }
  return v;
}

constexpr double kTwoOverSqrtPi = 1.12837916709551257390;

}  // namespace

double erf(double x) {
  double y = std::fabs(x);
  if (y <= kThresh) return erf_small(x);
  double ec = erfc_abs(y);
  return x > 0.0 ? 1.0 - ec : ec - 1.0;
}

double erfc(double x) {
  double y = std::fabs(x);
  if (y <= kThresh) return 1.0 - erf_small(x);
  double ec = erfc_abs(y);
  return x > 0.0 ? ec : 2.0 - ec;
}

double erf_inv(double p) {
  if (!(std::fabs(p) < 1.0))
    throw std::domain_error("erf_inv: argument must lie in (-1, 1)");
  if (p == 0.0) return 0.0;
  double x = erf_inv_guess(p);
  // Two Newton steps take the rational guess to full double precision.
  for (int i = 0; i < 2; ++i) {
    double err = erf(x) - p;
    double deriv = kTwoOverSqrtPi * std::exp(-x * x);
    if (deriv <= 0.0) break;  // saturated far tail, guess is as good as it gets
    x -= err / deriv;
  }
  return x;
}

}  // namespace piqd
