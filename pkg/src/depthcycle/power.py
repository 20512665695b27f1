"""System power model for a duty-cycled depth sensor.

While the sensor is on, the platform pays the sensor plus the idle
processor; while it is off, the estimator occupies the processor core
and memory instead.  Defaults for the processing-side terms come from
wall-power measurements of the embedded board the estimator was profiled
on (idle draw 0.19 W; estimation adds 0.63 W of core and 0.06 W of DRAM
active power).
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["PowerParams", "reduction_vs_tof", "system_power"]


@dataclass(frozen=True)
class PowerParams:
    """All values in watts. p_tof is the depth sensor's active draw."""

    p_tof: float
    p_idle: float = 0.19
    p_core: float = 0.63
    p_mem: float = 0.06

    def __post_init__(self) -> None:
        if not 0.1 <= self.p_tof <= 50.0:
            raise ValueError(f"p_tof must be within [0.1, 50] W, got {self.p_tof}")
        for name in ("p_idle", "p_core", "p_mem"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def system_power(duty_cycle_percent: float, params: PowerParams) -> float:
    """Average system power in watts at the given sensor duty cycle."""
    if not 0.0 <= duty_cycle_percent <= 100.0:
        raise ValueError(f"duty cycle must be in [0, 100], got {duty_cycle_percent}")
    on = duty_cycle_percent / 100.0
    return on * (params.p_tof + params.p_idle) + (1.0 - on) * (params.p_core + params.p_mem)


def reduction_vs_tof(duty_cycle_percent: float, params: PowerParams) -> float:
    """Percent power saved relative to running the sensor continuously."""
    return 100.0 * (1.0 - system_power(duty_cycle_percent, params) / params.p_tof)
