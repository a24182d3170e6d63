"""Finite-difference verification of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    probes: int
    worst: tuple = ()
    per_parameter: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.max_rel_error < self.tolerance


def relative_error(a, b, floor=1e-8):
    return abs(a - b) / max(abs(a), abs(b), floor)


def check_gradients(loss_fn, params, probe_count=64, tolerance=1e-5, h=1e-4, seed=0,
                    floor_scale=1e-6):
    """Compare analytic and central-difference gradients at random coordinates.

    ``loss_fn`` must zero gradients, run forward and backward, and return the
    scalar loss.  Parameters should already be float64.  Probes are spread
    round-robin over the parameter list so every tensor is exercised.

    Relative error uses ``max(|a|, |n|, floor_scale * max(1, |loss|))`` as its
    denominator: central differences carry round-off near 1e-12 * |loss|, so
    gradients that are structurally zero would otherwise score as 100% wrong.
    """
    params = list(params)
    loss0 = float(loss_fn())
    analytic = [p.grad.copy() for p in params]
    if float(loss_fn()) != loss0:
        raise ContractError("loss is not deterministic between identical calls")

    floor = floor_scale * max(1.0, abs(loss0))
    rng = np.random.default_rng(seed)
    worst = (0.0, None, None, 0.0, 0.0)
    per_param = {}
    for n in range(probe_count):
        pi = n % len(params)
        p = params[pi]
        flat = p.value.reshape(-1)
        j = int(rng.integers(flat.size))
        orig = flat[j]
        flat[j] = orig + h
        up = float(loss_fn())
        flat[j] = orig - h
        down = float(loss_fn())
        flat[j] = orig
        numeric = (up - down) / (2 * h)
        a = float(analytic[pi].reshape(-1)[j])
        err = relative_error(a, numeric, floor)
        name = p.name or f"param{pi}"
        per_param[name] = max(per_param.get(name, 0.0), err)
        if err >= worst[0]:
            worst = (err, name, j, a, numeric)
    loss_fn()  # leave gradients consistent with the unperturbed parameters
    return GradCheckReport(
        max_rel_error=worst[0], tolerance=tolerance, probes=probe_count,
        worst=worst[1:], per_parameter=per_param)
