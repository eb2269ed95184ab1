#pragma once

namespace graphsmooth {

// Default numerical tolerances. Relative tolerances are scaled by the
// quantity named in the comment at the point of use.
namespace tol {

inline constexpr double kEvdRel = 1e-9;        // eigenpair residual, vs lambda_max
inline constexpr double kNumRel = 1e-9;        // generic round-trip identities
inline constexpr double kConnectRel = 1e-8;    // lambda_2 threshold, vs lambda_max
inline constexpr double kGroupRel = 1e-8;      // eigenvalue multiplicity, vs lambda_max
inline constexpr double kSingularRel = 1e-10;  // filter response zero test, vs max|h|
inline constexpr double kLowBandRel = 1e-14;   // eta_k denominator zero, vs max|h|
inline constexpr double kSupportRel = 1e-12;   // ML support set, vs batch mean square
inline constexpr double kAlignLoss = 2e-8;     // absorb_mean projection deficit
inline constexpr double kEigZeroRel = 1e-12;   // snap |lambda| below this to zero

}  // namespace tol

}  // namespace graphsmooth
