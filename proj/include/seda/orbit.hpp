#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

// Circular two-body constellation geometry over a spherical, uniformly
// rotating Earth. Pure functions of (geometry, indices, time step); no state.

namespace seda {

struct ConstellationGeometry {
  int n_planes = 18;
  int sats_per_plane = 18;
  double altitude_km = 550.0;
  double inclination_deg = 58.0;
  double earth_radius_km = 6371.0;
  double mu_km3s2 = 398600.4418;
  double earth_rotation_rad_s = 7.2921159e-5;
  double dt_seconds = 60.0;

  int n_satellites() const { return n_planes * sats_per_plane; }
  double semi_major_axis_km() const { return earth_radius_km + altitude_km; }
  double mean_motion_rad_s() const {
    const double a = semi_major_axis_km();
    return std::sqrt(mu_km3s2 / (a * a * a));
  }
  double orbital_period_s() const {
    return 2.0 * std::numbers::pi / mean_motion_rad_s();
  }
};

/// A fixed ground target on the spherical Earth surface.
struct TaskSite {
  double latitude_deg = 0.0;   // in [-70, 70] when generated
  double longitude_deg = 0.0;  // in [-180, 180)
  double priority = 1.0;
};

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Inertial position of the satellite in (plane, slot) at time k * dt.
/// Planes are spaced evenly in right ascension, slots evenly in phase, with
/// no inter-plane phase offset.
inline Eigen::Vector3d satellite_position(const ConstellationGeometry& geom,
                                          int plane, int slot, int k) {
  if (plane < 0 || plane >= geom.n_planes)
    throw std::out_of_range("plane index out of range");
  if (slot < 0 || slot >= geom.sats_per_plane)
    throw std::out_of_range("slot index out of range");

  const double a = geom.semi_major_axis_km();
  const double raan = 2.0 * std::numbers::pi * plane / geom.n_planes;
  const double arg_lat = 2.0 * std::numbers::pi * slot / geom.sats_per_plane +
                         geom.mean_motion_rad_s() * k * geom.dt_seconds;
  const double inc = deg_to_rad(geom.inclination_deg);

  const double cu = std::cos(arg_lat), su = std::sin(arg_lat);
  const double co = std::cos(raan), so = std::sin(raan);
  const double ci = std::cos(inc), si = std::sin(inc);
  return a * Eigen::Vector3d(cu * co - su * ci * so,
                             cu * so + su * ci * co,
                             su * si);
}

/// Inertial position of a ground site at time k * dt, carried along by the
/// Earth's rotation about the polar axis.
inline Eigen::Vector3d task_position(const ConstellationGeometry& geom,
                                     const TaskSite& site, int k) {
  const double lat = deg_to_rad(site.latitude_deg);
  const double lon = deg_to_rad(site.longitude_deg) +
                     geom.earth_rotation_rad_s * k * geom.dt_seconds;
  return geom.earth_radius_km *
         Eigen::Vector3d(std::cos(lat) * std::cos(lon),
                         std::cos(lat) * std::sin(lon), std::sin(lat));
}

/// Angle at the satellite between the nadir direction and the line of sight
/// to the task, in degrees.
inline double off_nadir_angle_deg(const Eigen::Vector3d& sat_pos,
                                  const Eigen::Vector3d& task_pos) {
  const Eigen::Vector3d nadir = -sat_pos;
  const Eigen::Vector3d to_task = task_pos - sat_pos;
  if (nadir.norm() == 0.0 || to_task.norm() == 0.0)
    throw std::invalid_argument("off-nadir angle undefined for zero vectors");
  return rad_to_deg(
      std::atan2(nadir.cross(to_task).norm(), nadir.dot(to_task)));
}

/// True when the satellite sits above the task's horizon plane, i.e. the line
/// of sight does not pass through the Earth. The off-nadir angle alone cannot
/// decide this: it shrinks again for sites far beyond the horizon and is 0 at
/// the antipode.
inline bool above_horizon(const Eigen::Vector3d& sat_pos,
                          const Eigen::Vector3d& task_pos) {
  return task_pos.dot(sat_pos - task_pos) >= 0.0;
}

/// Pointing-quality benefit: priority weighted by a Gaussian falloff in the
/// off-nadir angle, zero outside the field-of-view cone.
inline double baseline_benefit(double theta_deg, double priority,
                               double sigma_deg, double theta_fov_deg) {
  if (sigma_deg <= 0.0)
    throw std::invalid_argument("sigma_deg must be positive");
  if (theta_deg > theta_fov_deg) return 0.0;
  const double z = theta_deg / sigma_deg;
  return priority * std::exp(-0.5 * z * z);
}

/// Benefit matrix for every satellite (row, indexed plane * sats_per_plane +
/// slot) against every site (column) at time step k. A pair contributes only
/// when the site is above the horizon and inside the field-of-view cone.
inline Eigen::MatrixXd baseline_benefit_matrix(
    const ConstellationGeometry& geom, const std::vector<TaskSite>& sites,
    int k, double sigma_deg, double theta_fov_deg) {
  const int n = geom.n_satellites();
  const int m = static_cast<int>(sites.size());
  std::vector<Eigen::Vector3d> task_pos;
  task_pos.reserve(m);
  for (const auto& site : sites) task_pos.push_back(task_position(geom, site, k));

  Eigen::MatrixXd benefits = Eigen::MatrixXd::Zero(n, m);
  for (int plane = 0; plane < geom.n_planes; ++plane) {
    for (int slot = 0; slot < geom.sats_per_plane; ++slot) {
      const int row = plane * geom.sats_per_plane + slot;
      const Eigen::Vector3d sat = satellite_position(geom, plane, slot, k);
      for (int j = 0; j < m; ++j) {
        if (!above_horizon(sat, task_pos[j])) continue;
        benefits(row, j) =
            baseline_benefit(off_nadir_angle_deg(sat, task_pos[j]),
                             sites[j].priority, sigma_deg, theta_fov_deg);
      }
    }
  }
  return benefits;
}

/// Sites placed area-uniformly between +-70 degrees latitude with priorities
/// drawn uniformly from the pool. Same seed, same sites.
inline std::vector<TaskSite> random_task_sites(
    int count, std::uint64_t seed,
    const std::vector<double>& priority_pool = {1.0, 1.0, 1.0, 5.0},
    double max_abs_latitude_deg = 70.0) {
  if (count < 0) throw std::invalid_argument("site count must be non-negative");
  if (priority_pool.empty())
    throw std::invalid_argument("priority pool must not be empty");

  std::mt19937_64 rng(seed);
  const double sin_max = std::sin(deg_to_rad(max_abs_latitude_deg));
  std::uniform_real_distribution<double> sin_lat(-sin_max, sin_max);
  std::uniform_real_distribution<double> lon(-180.0, 180.0);
  std::uniform_int_distribution<std::size_t> pick(0, priority_pool.size() - 1);

  std::vector<TaskSite> sites;
  sites.reserve(count);
  for (int j = 0; j < count; ++j) {
    TaskSite site;
    site.latitude_deg = rad_to_deg(std::asin(sin_lat(rng)));
    site.longitude_deg = lon(rng);
    site.priority = priority_pool[pick(rng)];
    sites.push_back(site);
  }
  return sites;
}

}  // namespace seda
