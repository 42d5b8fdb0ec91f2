"""Adaptive Gauss-Kronrod integration with breakpoints placed around near-real poles."""
import logging
from typing import Callable, Iterable, List, Sequence

import numpy as np
from scipy.integrate import quad_vec

from .errors import NumericsError

logger = logging.getLogger(__name__)

# breakpoints at pole +- width * 10**j, j = 0..POLE_LADDER-1
POLE_LADDER = 9

# quad_vec status codes
_ROUNDING_LIMITED = 2


def breakpoints(a: float, b: float, poles: Iterable[float] = (), widths: Iterable[float] = ()) -> List[float]:
    points = set()
    for pole, width in zip(poles, widths):
        if not a - 1e4 * width < pole < b + 1e4 * width:
            continue
        points.add(pole)
        for j in range(POLE_LADDER):
            points.add(pole - width * 10.0**j)
            points.add(pole + width * 10.0**j)
    return sorted(p for p in points if a < p < b)


def integrate(
    func: Callable[[float], np.ndarray],
    a: float,
    b: float,
    *,
    poles: Sequence[float] = (),
    widths: Sequence[float] = (),
    rtol: float = 1e-9,
    atol: float = 1e-200,
    limit: int = 20000,
    label: str = "integral",
) -> np.ndarray:
    """
    Integrate a real vector-valued function over [a, b]. Complex integrands are
    handled by the callers, which stack real and imaginary parts.

    ``atol`` must stay nonzero: an identically vanishing integrand (zero field)
    only terminates through the absolute criterion.
    """
    if b <= a:
        return np.zeros_like(np.atleast_1d(func(a)), dtype=float)

    points = breakpoints(a, b, poles, widths)
    result, error, info = quad_vec(
        func, a, b,
        epsrel=rtol,
        epsabs=atol,
        points=points or None,
        limit=limit,
        norm="max",
        full_output=True,
    )
    estimate = float(np.max(np.abs(error)))
    scale = float(np.max(np.abs(result)))
    rounding_ok = info.status == _ROUNDING_LIMITED and estimate <= 10.0 * rtol * scale
    if not (info.success or rounding_ok):
        raise NumericsError(
            f"{label}: quadrature did not reach rtol={rtol:g} "
            f"(estimated error {estimate:.3e} on {scale:.3e}, {info.message})"
        )
    logger.debug("%s: %d intervals, estimated error %.3e", label, info.intervals.shape[0], estimate)
    return np.atleast_1d(result)
