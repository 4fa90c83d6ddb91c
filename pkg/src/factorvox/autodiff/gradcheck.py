import numpy as np

from .tensor import Tensor, float64Mode, stopGradientTape, _StopTape


def gradCheck(f, x, h: float = 1e-5, tol: float = 1e-4, floor: float = 1e-3) -> dict:
    """Compare the analytic gradient of scalar f at x with central differences.

    Runs in 64-bit mode. Stop-gradient values are recorded on the base
    evaluation and replayed on every perturbed one, so the finite-difference
    oracle sees the same surrogate the backward pass differentiates.

    Returns a report dict: passed, maxRelativeError, analytic, numeric.
    """
    with float64Mode():
        base = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
        tape = _StopTape()
        with stopGradientTape(tape):
            point = Tensor(base, requiresGrad=True)
            out = f(point)
            out.backward()
        analytic = point.grad if point.grad is not None else np.zeros_like(base)

        numeric = np.zeros_like(base)
        for i in range(base.size):
            shifted = base.copy()
            shifted.flat[i] += h
            tape.rewind()
            with stopGradientTape(tape):
                upper = f(Tensor(shifted)).item()
            shifted.flat[i] -= 2 * h
            tape.rewind()
            with stopGradientTape(tape):
                lower = f(Tensor(shifted)).item()
            numeric.flat[i] = (upper - lower) / (2 * h)

    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    relative = np.abs(analytic - numeric) / scale
    maxError = float(relative.max()) if relative.size else 0.0
    return {
        "passed": bool(maxError <= tol),
        "maxRelativeError": maxError,
        "analytic": analytic,
        "numeric": numeric,
    }
