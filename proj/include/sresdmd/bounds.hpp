#pragma once

#include "sresdmd/dictionary.hpp"
#include "sresdmd/types.hpp"

namespace sresdmd {

struct DictionaryConstants {
  double alpha = 0.0;  // sqrt(sum c_k^2) over Lipschitz constants
  double beta = 0.0;   // sqrt(sum |psi_k|_inf^2)
};

DictionaryConstants dictionary_constants(const Dictionary& dict);

struct ConcentrationInputs {
  double M = 0;  // sample count
  long N = 1;    // dictionary size
  double t = 0;  // Frobenius radius
  double upsilon = 0;
  double c = 0;  // Lipschitz constant of the dynamics in (x, tau)
  double alpha = 0;
  double beta = 0;
};

/// Lower bounds on P(|Xt - X|_F < t) for X = A, G, L. Values below zero are
/// kept as they are and flagged vacuous.
struct ConcentrationBounds {
  double p_A = 0, p_G = 0, p_L = 0;
  bool vacuous = false;  // any of the three <= 0
};

ConcentrationBounds concentration_bounds(const ConcentrationInputs& in);

/// Sub-Gaussian scale: the smallest s with
/// exp(E q / s^2) * E exp(q / s^2) <= 2, q = |kappa - E kappa|^2, where the
/// expectations are sample means over the rows of `samples`.
double estimate_upsilon(const StateMatrix& samples, double rel_tol = 1e-10);

}  // namespace sresdmd
