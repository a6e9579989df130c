"""Shared constants and checks imported by several test modules.

Lives outside conftest.py so the imports stay unambiguous when this suite
and the figkit suite run in one pytest session.
"""

import numpy as np

from amdkit.isc import Hyperparams, ISCModel, ModelDims, loss_and_grads

MICRO_DIMS = ModelDims(d_item=6, d_task=4, d_hidden=6)
MICRO_HYPER = Hyperparams(epochs=200, seed=3)

ACCEPTANCE_LINES: list[str] = []


def finite_difference_check(model: ISCModel, ds, items, tasks,
                            step: float = 1e-5) -> float:
    """Worst relative error between analytic and central-difference grads.

    Relative error is |a - n| / max(|a|, |n|, 1e-8) per coordinate, probed on
    every parameter tensor at a handful of fixed positions.
    """
    _, grads = loss_and_grads(model, ds, items, tasks)
    params = model.params()
    worst = 0.0
    for name, grad in grads.items():
        param = params[name]
        flat = param.reshape(-1)
        gflat = grad.reshape(-1)
        idx = np.linspace(0, flat.size - 1, min(flat.size, 7)).astype(int)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + step
            up, _ = loss_and_grads(model, ds, items, tasks)
            flat[i] = orig - step
            down, _ = loss_and_grads(model, ds, items, tasks)
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            denom = max(abs(gflat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
