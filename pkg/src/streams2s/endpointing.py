"""Covering-window endpoints and delta fixation.

All indices are encoder frames. A token's endpoint t_c is the end of the shortest frame
prefix holding `theta` of its attention mass; it is fixed once it holds still between two
observations and trails the frontier t by more than delta.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kernels import Vector
from .models.common import InputError

# slack for cumulative sums that land a few ulps under theta
_CUM_SLACK = 1e-12


@dataclass(frozen=True)
class EndpointState:
    t_c: Optional[int] = None
    last_observed_t: int = 0
    fixed: bool = False


def covering_endpoint(attn: Vector, theta: float = 0.95) -> int:
    attn = np.asarray(attn, dtype=np.float64)
    if attn.ndim != 1 or attn.size == 0:
        raise InputError("covering_endpoint needs a non-empty attention vector")
    if not 0.0 < theta <= 1.0:
        raise InputError(f"theta must lie in (0, 1], got {theta}")
    nonzero = np.flatnonzero(attn > 0)
    last = int(nonzero[-1]) if nonzero.size else attn.size - 1
    if theta >= 1.0:
        return last
    cum = np.cumsum(attn)
    idx = int(np.searchsorted(cum, theta * cum[-1] - _CUM_SLACK, side="left"))
    return min(idx, last)


def update_fixation(
    state: EndpointState,
    new_attn: Vector,
    t: int,
    theta: float = 0.95,
    delta: float = 20,
) -> EndpointState:
    if state.fixed:
        return observe_endpoint(state, state.t_c or 0, t, delta)
    return observe_endpoint(state, covering_endpoint(new_attn, theta), t, delta)


def observe_endpoint(state: EndpointState, t_c: int, t: int, delta: float) -> EndpointState:
    """update_fixation for a covering endpoint that is already known."""
    if t < state.last_observed_t:
        raise InputError(f"frontier moved backwards: {t} < {state.last_observed_t}")
    if state.fixed:
        return EndpointState(t_c=state.t_c, last_observed_t=t, fixed=True)
    fixed = state.t_c is not None and t_c == state.t_c and t_c < t - delta
    return EndpointState(t_c=t_c, last_observed_t=t, fixed=fixed)
