#pragma once

namespace ncf {

inline constexpr double kmh_to_mps(double kmh) noexcept { return kmh / 3.6; }
inline constexpr double mps_to_kmh(double mps) noexcept { return mps * 3.6; }

inline constexpr double deg_to_rad(double deg) noexcept { return deg * 3.14159265358979323846 / 180.0; }
inline constexpr double rad_to_deg(double rad) noexcept { return rad * 180.0 / 3.14159265358979323846; }

}  // namespace ncf
