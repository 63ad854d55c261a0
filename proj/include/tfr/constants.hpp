#pragma once

namespace tfr {

// Natural log of 10.
inline constexpr double kLn10 = 2.302585092994045684017991454684364208;

// Speed of light in km/s (exact).
inline constexpr double kSpeedOfLight = 299792.458;

// Velocity/mass distribution support, in units of the centered Schechter
// argument x = (m+d) - M_star = beta*(w-i) - v_star.  One fixed truncation is
// used everywhere: sampling, normalization and likelihood evaluation.
inline constexpr double kSchechterSupportLo = -3.5;
inline constexpr double kSchechterSupportHi = 1.5;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

} // namespace tfr
