#pragma once

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_expint.h>

#include <cmath>

#include "bacon/errors.hpp"

namespace bacon::numerics {

// Si(x) = \int_0^x sin(t)/t dt.
inline double sine_integral(double x) {
  if (!std::isfinite(x)) throw DomainError("sine_integral: non-finite argument");
  // GSL aborts on error by default; report through the return status instead.
  static const bool handler_off = (gsl_set_error_handler_off(), true);
  (void)handler_off;
  gsl_sf_result result;
  const int status = gsl_sf_Si_e(x, &result);
  if (status != GSL_SUCCESS) throw DomainError(gsl_strerror(status));
  return result.val;
}

}  // namespace bacon::numerics
