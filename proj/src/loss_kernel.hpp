#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace xlkg::detail {

// Softmax cross-entropy at index 0 plus the coefficients
// a_i = softmax_i - [i == 0], which drive every gradient term.
inline double nll_with_coefficients(std::span<const double> scores,
                                    std::vector<double>* coeffs) {
  const double top = *std::max_element(scores.begin(), scores.end());
  double denom = 0.0;
  for (double s : scores) denom += std::exp(s - top);
  // (top - s0) >= 0 and log(denom) >= 0 since one term is exp(0).
  const double loss = (top - scores[0]) + std::log(denom);
  if (coeffs != nullptr) {
    coeffs->resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      (*coeffs)[i] = std::exp(scores[i] - top) / denom;
    }
    (*coeffs)[0] -= 1.0;
  }
  return loss;
}

}  // namespace xlkg::detail
