// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <vector>

#include "skybeam/rng.hpp"
#include "skybeam/tensor.hpp"

namespace skybeam {

using CVec = std::vector<std::complex<double>>;

// Per-layer propagation parameters.
struct ChannelParams {
  double carrier_hz = 1.8e9;
  double rician_x = 10.0;        // LoS-to-NLoS power ratio
  double shadow_var_db2 = 3.0;   // shadowing variance, dB^2
  double slot_seconds = 0.02;
  double velocity_mps = 1.0;
};

// Free-space power gain with log-normal shadowing applied in dB:
// 10^(2*log10(c / (4 pi f d)) - shadow_db / 10).
double large_scale_gain(double distance_m, double carrier_hz, double shadow_db);

// Uniform planar array response at half-wavelength spacing, Kronecker of the
// horizontal and vertical linear responses over a near-square grid (largest
// divisor <= sqrt(n) as the row count); a prime count degenerates to a line.
CVec steering_vector(double theta, double phi, int antennas);

// First-order Gauss-Markov coefficient from the zeroth-order Bessel function
// of the Doppler angle increment, clamped below at zero.
double doppler_rho(double velocity_mps, double carrier_hz, double slot_seconds);

// One autoregressive step of the diffuse component; rho = 1 freezes the state,
// rho = 0 redraws it white.
void step_nlos(CVec& state, double rho, Rng& rng);

// Rician mix of deterministic and diffuse parts, scaled by the large-scale
// amplitude sqrt(gain).
CVec compose_channel(const CVec& los, const CVec& nlos, double rician_x, double large_scale_gain);

enum class CsiModel { perfect, additive, multiplicative };

struct CsiNoiseModel {
  CsiModel model = CsiModel::perfect;
  double xi = 1.0;           // additive: correlation with the true channel
  double gamma_shape = 10.0; // multiplicative: Gamma shape k'
  double gamma_scale = 0.1;  // multiplicative: Gamma scale theta'
};

// Imperfect CSI. The additive model mixes in an independent complex normal
// error with per-entry variance noise_scale^2 (pass the large-scale amplitude
// so the error lives in channel units); the multiplicative model applies an
// entrywise real Gamma-distributed factor.
CVec corrupt_csi(const CVec& h, const CsiNoiseModel& model, Rng& rng, double noise_scale = 1.0);

// Stack channel rows into the [2 x rows x antennas] real/imaginary planes the
// policy networks consume.
ad::Tensor state_matrix(const std::vector<CVec>& rows);

}  // namespace skybeam
