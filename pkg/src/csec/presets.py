"""Bundled machine-speed fixtures measured on a 20-instance cloud roster.

Two columns of normalized speeds, one observed during a power-iteration run
and one during a linear-regression run.  The first ten entries of each list
are the smaller instance type, the last ten the larger.
"""

from __future__ import annotations

TABLE1_POWER_LARGE = [0.85, 0.84, 0.76, 0.88, 0.59, 0.64, 0.59, 0.88, 0.90, 0.70]
TABLE1_POWER_XLARGE = [1.28, 1.20, 0.92, 1.27, 1.20, 0.91, 1.34, 0.85, 1.29, 0.90]

TABLE1_LINREG_LARGE = [0.70, 0.53, 0.90, 0.90, 0.88, 0.77, 0.90, 0.48, 0.52, 0.48]
TABLE1_LINREG_XLARGE = [1.30, 1.26, 1.26, 1.34, 0.88, 1.26, 1.23, 1.37, 0.83, 0.58]

SPEED_PRESETS = {
    "table1_power": TABLE1_POWER_LARGE + TABLE1_POWER_XLARGE,
    "table1_linreg": TABLE1_LINREG_LARGE + TABLE1_LINREG_XLARGE,
}


def speed_preset(name: str) -> list[float]:
    try:
        return list(SPEED_PRESETS[name])
    except KeyError:
        raise KeyError(
            f"unknown speed preset {name!r}; choose from {sorted(SPEED_PRESETS)}"
        ) from None
