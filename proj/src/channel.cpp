// SPDX-License-Identifier: Apache-2.0
#include "skybeam/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace skybeam {

namespace {
constexpr double kLightSpeed = 3.0e8;
constexpr double kTwoPi = 6.283185307179586476925286766559;
}  // namespace

double large_scale_gain(double distance_m, double carrier_hz, double shadow_db) {
  if (distance_m <= 0.0) throw std::invalid_argument("non-positive distance");
  if (carrier_hz <= 0.0) throw std::invalid_argument("non-positive carrier frequency");
  const double fspl = kLightSpeed / (4.0 * M_PI * carrier_hz * distance_m);
  return std::pow(10.0, 2.0 * std::log10(fspl) - shadow_db / 10.0);
}

// Near-square factorization of the planar grid: rows = the largest divisor
// not exceeding sqrt(n). Square counts get sqrt(n) per side; a prime count
// degenerates to a line array.
std::pair<int, int> planar_sides(int antennas) {
  if (antennas < 1) throw std::invalid_argument("steering: antenna count must be positive");
  int rows = 1;
  for (int d = 1; d * d <= antennas; ++d)
    if (antennas % d == 0) rows = d;
  return {rows, antennas / rows};
}

CVec steering_vector(double theta, double phi, int antennas) {
  const auto [rows, cols] = planar_sides(antennas);
  const double dh = 0.5 * std::cos(theta) * std::sin(phi);
  const double dv = 0.5 * std::cos(theta) * std::cos(phi);
  CVec a(static_cast<size_t>(rows)), b(static_cast<size_t>(cols));
  for (int m = 0; m < rows; ++m) {
    const double av = kTwoPi * m * dv;
    a[static_cast<size_t>(m)] = {std::cos(av), std::sin(av)};
  }
  for (int n = 0; n < cols; ++n) {
    const double ah = kTwoPi * n * dh;
    b[static_cast<size_t>(n)] = {std::cos(ah), std::sin(ah)};
  }
  CVec out(static_cast<size_t>(antennas));
  for (int m = 0; m < rows; ++m)
    for (int n = 0; n < cols; ++n)
      out[static_cast<size_t>(m * cols + n)] = a[static_cast<size_t>(m)] * b[static_cast<size_t>(n)];
  return out;
}

double doppler_rho(double velocity_mps, double carrier_hz, double slot_seconds) {
  if (velocity_mps < 0.0 || carrier_hz <= 0.0 || slot_seconds <= 0.0)
    throw std::invalid_argument("doppler: invalid parameter");
  const double doppler_hz = velocity_mps * carrier_hz / kLightSpeed;
  const double rho = std::cyl_bessel_j(0.0, kTwoPi * doppler_hz * slot_seconds);
  return rho < 0.0 ? 0.0 : rho;
}

void step_nlos(CVec& state, double rho, Rng& rng) {
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("nlos step: rho outside [0, 1]");
  const double w = std::sqrt(1.0 - rho * rho);
  for (auto& z : state) z = rho * z + w * rng.cnormal();
}

CVec compose_channel(const CVec& los, const CVec& nlos, double rician_x, double large_scale) {
  if (los.size() != nlos.size()) throw std::invalid_argument("compose: component length mismatch");
  if (rician_x < 0.0) throw std::invalid_argument("compose: negative Rician factor");
  if (large_scale < 0.0) throw std::invalid_argument("compose: negative gain");
  const double wl = std::sqrt(rician_x / (1.0 + rician_x));
  const double wn = std::sqrt(1.0 / (1.0 + rician_x));
  const double amp = std::sqrt(large_scale);
  CVec out(los.size());
  for (size_t i = 0; i < los.size(); ++i) out[i] = amp * (wl * los[i] + wn * nlos[i]);
  return out;
}

CVec corrupt_csi(const CVec& h, const CsiNoiseModel& model, Rng& rng, double noise_scale) {
  switch (model.model) {
    case CsiModel::perfect:
      return h;
    case CsiModel::additive: {
      if (model.xi < 0.0 || model.xi > 1.0)
        throw std::invalid_argument("csi: xi outside [0, 1]");
      const double we = std::sqrt(1.0 - model.xi * model.xi) * noise_scale;
      CVec out(h.size());
      for (size_t i = 0; i < h.size(); ++i) out[i] = model.xi * h[i] + we * rng.cnormal();
      return out;
    }
    case CsiModel::multiplicative: {
      if (model.gamma_shape <= 0.0 || model.gamma_scale <= 0.0)
        throw std::invalid_argument("csi: non-positive Gamma parameter");
      CVec out(h.size());
      for (size_t i = 0; i < h.size(); ++i)
        out[i] = h[i] * rng.gamma(model.gamma_shape, model.gamma_scale);
      return out;
    }
  }
  throw std::logic_error("csi: unknown model");
}

ad::Tensor state_matrix(const std::vector<CVec>& rows) {
  if (rows.empty()) throw std::invalid_argument("state: no rows");
  const int m = static_cast<int>(rows.size());
  const int n = static_cast<int>(rows.front().size());
  for (const CVec& r : rows)
    if (static_cast<int>(r.size()) != n) throw std::invalid_argument("state: ragged rows");
  ad::Tensor out({2, m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      out.at(0, i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)].real();
      out.at(1, i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)].imag();
    }
  return out;
}

}  // namespace skybeam
