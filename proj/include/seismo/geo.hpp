#pragma once

#include <stdexcept>
#include <utility>

namespace seismo::geo {

inline constexpr double kEarthRadiusKm = 6371.0;

// Forward geodesic on a spherical Earth: start at (lat, lon) degrees, travel
// distance_km along the given bearing (degrees clockwise from north).
std::pair<double, double> locate_epicenter(double station_lat_deg,
                                           double station_lon_deg,
                                           double back_azimuth_deg,
                                           double distance_km);

// Great-circle (haversine) distance in km between two lat/lon points.
double location_error_km(double lat1_deg, double lon1_deg, double lat2_deg,
                         double lon2_deg);

// Signed circular difference pred - true wrapped into (-180, 180].
double azimuth_residual(double pred_deg, double true_deg);

}  // namespace seismo::geo
