"""Dynamic unbalanced optimal transport with a synchronized secondary mass curve."""

from ._usot import (
    fr_action,
    hk2_two_dirac,
    hk_json,
    mass_curve,
    resolved_config,
    solve_json,
)

__all__ = [
    "solve_json",
    "hk_json",
    "resolved_config",
    "mass_curve",
    "fr_action",
    "hk2_two_dirac",
]
