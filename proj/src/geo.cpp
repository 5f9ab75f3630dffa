#include "seismo/geo.hpp"

#include <cmath>

namespace seismo::geo {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kDeg2Rad = kPi / 180.0;
constexpr double kRad2Deg = 180.0 / kPi;
}  // namespace

std::pair<double, double> locate_epicenter(double station_lat_deg,
                                           double station_lon_deg,
                                           double back_azimuth_deg,
                                           double distance_km) {
  if (distance_km < 0.0)
    throw std::domain_error("locate_epicenter: negative distance");
  if (distance_km > kPi * kEarthRadiusKm)
    throw std::domain_error("locate_epicenter: distance exceeds antipode");
  const double phi1 = station_lat_deg * kDeg2Rad;
  const double lam1 = station_lon_deg * kDeg2Rad;
  const double theta = back_azimuth_deg * kDeg2Rad;
  const double sigma = distance_km / kEarthRadiusKm;  // angular distance

  const double sin_phi2 = std::sin(phi1) * std::cos(sigma) +
                          std::cos(phi1) * std::sin(sigma) * std::cos(theta);
  const double phi2 = std::asin(std::fmin(1.0, std::fmax(-1.0, sin_phi2)));
  const double lam2 =
      lam1 + std::atan2(std::sin(theta) * std::sin(sigma) * std::cos(phi1),
                        std::cos(sigma) - std::sin(phi1) * sin_phi2);
  double lon = lam2 * kRad2Deg;
  // normalize longitude into [-180, 180)
  lon = std::fmod(lon + 540.0, 360.0) - 180.0;
  return {phi2 * kRad2Deg, lon};
}

double location_error_km(double lat1_deg, double lon1_deg, double lat2_deg,
                         double lon2_deg) {
  const double phi1 = lat1_deg * kDeg2Rad;
  const double phi2 = lat2_deg * kDeg2Rad;
  const double dphi = (lat2_deg - lat1_deg) * kDeg2Rad;
  const double dlam = (lon2_deg - lon1_deg) * kDeg2Rad;
  const double a = std::sin(dphi / 2) * std::sin(dphi / 2) +
                   std::cos(phi1) * std::cos(phi2) * std::sin(dlam / 2) *
                       std::sin(dlam / 2);
  return 2.0 * kEarthRadiusKm *
         std::atan2(std::sqrt(a), std::sqrt(std::fmax(0.0, 1.0 - a)));
}

double azimuth_residual(double pred_deg, double true_deg) {
  double r = std::fmod(pred_deg - true_deg + 180.0, 360.0);
  if (r < 0) r += 360.0;
  const double out = r - 180.0;  // [-180, 180)
  return out == -180.0 ? 180.0 : out;  // boundary maps to +180
}

}  // namespace seismo::geo
