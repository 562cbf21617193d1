"""Isoperimetry in CD(0,N) spaces: one-dimensional model calculus, weighted
convex cones, ray localization and rigidity checks."""

from __future__ import annotations

from .cone import (
    StarSet,
    Weight,
    WeightedCone,
    isoperimetric_deficit,
    load_cone,
    measure,
    perimeter_aniso,
    wulff_shape,
)
from .density1d import Density1D, IntervalSet, milman_profile, residual, residual_v
from .errors import AvrisoError
from .gauge import Gauge
from .localization import radial_decomposition, residual_l1_curve, solve_l1_potential
from .rigidity import fit_ball, rigidity_verdict
from .rigidity1d import certify

__all__ = [
    "AvrisoError",
    "Density1D",
    "Gauge",
    "IntervalSet",
    "StarSet",
    "Weight",
    "WeightedCone",
    "certify",
    "fit_ball",
    "isoperimetric_deficit",
    "load_cone",
    "measure",
    "milman_profile",
    "perimeter_aniso",
    "radial_decomposition",
    "residual",
    "residual_l1_curve",
    "residual_v",
    "rigidity_verdict",
    "solve_l1_potential",
    "wulff_shape",
]
