# SPDX-License-Identifier: Apache-2.0
"""Beamforming laboratory for a two-layer aerial network."""

from ._core import (
    complexity,
    default_config,
    desk_config,
    doppler_rho,
    evaluate_baseline,
    evaluate_policy,
    large_scale_gain,
    rerun_manifest,
    run_scenario,
    train,
    validate_config,
)

__all__ = [
    "complexity",
    "default_config",
    "desk_config",
    "doppler_rho",
    "evaluate_baseline",
    "evaluate_policy",
    "large_scale_gain",
    "rerun_manifest",
    "run_scenario",
    "train",
    "validate_config",
]
