"""Walking-performance metrics and the reward-ratio cost."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .sim import SimTrajectory

EPS_R = 1e-9
DV_WINDOW = 0.05


@dataclass(frozen=True)
class CostBreakdown:
    x_tf: float
    z_bar: float
    w_abs: float
    p_max: float
    dvx: float
    J_W: float

    @classmethod
    def assemble(cls, x_tf: float, z_bar: float, w_abs: float, p_max: float,
                 dvx: float) -> "CostBreakdown":
        """Fill in ``J_W = -(x_tf z_bar) / max(w_abs p_max dvx, EPS_R)``."""
        r_n = max(w_abs * p_max * dvx, EPS_R)
        return cls(float(x_tf), float(z_bar), float(w_abs), float(p_max), float(dvx),
                   float(-(x_tf * z_bar) / r_n))

    @classmethod
    def diverged(cls) -> "CostBreakdown":
        nan = math.nan
        return cls(nan, nan, nan, nan, nan, math.inf)

    @property
    def r_p(self) -> float:
        return self.x_tf * self.z_bar

    @property
    def r_n(self) -> float:
        return self.w_abs * self.p_max * self.dvx

    def to_dict(self) -> dict:
        # inf/nan are not valid JSON; diverged runs are reported as null
        return {k: (v if math.isfinite(v) else None) for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def velocity_drop(t: np.ndarray, vx: np.ndarray, events, window: float = DV_WINDOW) -> float:
    """Sum over events of the forward-velocity loss across ``[t_e - w, t_e + w]``.

    Window ends are clamped to the logged time range.
    """
    total = 0.0
    for te in events:
        before = float(np.interp(te - window, t, vx))
        after = float(np.interp(te + window, t, vx))
        total += max(0.0, before - after)
    return total


def metrics(traj: SimTrajectory) -> CostBreakdown:
    if traj.t.size == 0:
        raise ValueError("empty trajectory")
    x_tf = float(traj.x[-1])
    if traj.t.size > 1:
        span = traj.t[-1] - traj.t[0]
        z_bar = float(np.trapezoid(traj.z, traj.t) / span)
    else:
        z_bar = float(traj.z[0])
    w_abs = abs(float(traj.w_l[-1] + traj.w_r[-1]))
    if traj.p_peak is not None:
        p_max = float(traj.p_peak)
    else:
        p_max = float(np.max(np.abs(traj.p_l + traj.p_r)))
    dvx = velocity_drop(traj.t, traj.vx, traj.step_events)
    return CostBreakdown.assemble(x_tf, z_bar, w_abs, p_max, dvx)
