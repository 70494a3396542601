"""
TAR(1) parameter classification and path simulation.

The recursion is

    Y_t = gamma + alpha * Y_{t-1} + eps_t   if Y_{t-1} > r
    Y_t = delta + beta  * Y_{t-1} + eps_t   if Y_{t-1} <= r

Ties Y_{t-1} = r go to the lower regime.
"""

import math
from typing import FrozenSet, Iterable, Optional

import numpy as np

from .errors import DomainError, OverflowGuard
from .models import Path, RegimeFlag, TarParams
from .noise import RngStream, draw_many

OVERFLOW_LIMIT = 1e280

# exp() overflows a little above 709
_LOG_SAFE = 700.0


def classify_regime(params: TarParams) -> FrozenSet[RegimeFlag]:
    """
    Classify a parameter point into the (overlapping) case taxonomy.

    Args:
        params: Parameter point to classify

    Returns:
        Frozen set of RegimeFlag values; {Unclassified} when nothing applies
    """
    g, d, a, b, r = params.gamma, params.delta, params.alpha, params.beta, params.r
    zero_intercepts = g == 0 and d == 0
    flags = set()

    if zero_intercepts and a < 1 and b < 1 and a * b < 1:
        flags.add(RegimeFlag.STATIONARY_ERGODIC)
    if zero_intercepts and a == 1 and ((b < 1 and r <= 0) or b == -1):
        flags.add(RegimeFlag.UNIT_ROOT_CASE_I)
    if zero_intercepts and a < 1 and b == 1 and r >= 0:
        flags.add(RegimeFlag.MIRRORED_UNIT_ROOT)
    if zero_intercepts and a > 1 and b <= 1:
        if r == 0:
            flags.add(RegimeFlag.EXPLOSIVE_H1)
        else:
            flags.add(RegimeFlag.EXPLOSIVE_H2)
            if params.noise.bounded_above:
                flags.add(RegimeFlag.H2_VIOLATED_BY_NOISE)
    if zero_intercepts and a * b == 1 and a > 0 and a != 1:
        flags.add(RegimeFlag.RECIPROCAL_PRODUCT)
    if g == d and g > 0 and a == 1 and b < 1 and r <= 0:
        flags.add(RegimeFlag.DRIFTED_UNIT_ROOT)
    if in_consistency_region(params):
        flags.add(RegimeFlag.CONSISTENCY_REGION)

    if not flags:
        flags.add(RegimeFlag.UNCLASSIFIED)
    return frozenset(flags)


def in_consistency_region(params: TarParams) -> bool:
    """True when one of the three lines of the LSE consistency condition holds."""
    a, b, g = params.alpha, params.beta, params.gamma
    return (
        (a <= 1 and b <= 1 and g == 0)
        or (a < 1 and b <= 1 and g > 0)
        or (a <= 1 and b < 1 and g < 0)
    )


def is_explosive(flags: Iterable[RegimeFlag]) -> bool:
    flags = set(flags)
    return RegimeFlag.EXPLOSIVE_H1 in flags or RegimeFlag.EXPLOSIVE_H2 in flags


def replay_path(
    y0: float,
    innovations: np.ndarray,
    params: TarParams,
    limit: float = OVERFLOW_LIMIT,
) -> np.ndarray:
    """
    Run the recursion from Y_0 over the given innovations.

    Args:
        y0: Initial value Y_0
        innovations: eps_1..eps_n
        params: Model parameters (noise is ignored)
        limit: Overflow ceiling for |Y_t|

    Returns:
        Array Y_0..Y_n

    Raises:
        OverflowGuard: If some |Y_t| exceeds ``limit`` (or is not finite)
    """
    gamma, delta = params.gamma, params.delta
    alpha, beta, r = params.alpha, params.beta, params.r

    y = float(y0)
    values = [y]
    for t, eps in enumerate(np.asarray(innovations, dtype=float).tolist(), start=1):
        if y > r:
            y = gamma + alpha * y + eps
        else:
            y = delta + beta * y + eps
        if not abs(y) <= limit:
            raise OverflowGuard(t, y, limit)
        values.append(y)
    return np.array(values)


def simulate_path(params: TarParams, n: int, stream: RngStream) -> Path:
    """
    Simulate Y_0..Y_n.

    When ``params.y0_sd`` is set, Y_0 = y0 + y0_sd * Z with Z the first standard
    normal variate of the stream; the innovations are drawn after it.

    Args:
        params: Model parameters including the innovation law
        n: Number of transitions (n >= 1)
        stream: Random stream owned by this path

    Returns:
        Path of n + 1 values with the innovations retained

    Raises:
        OverflowGuard: If the path leaves [-1e280, 1e280]
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")

    y0 = params.y0
    if params.y0_sd is not None:
        y0 = y0 + params.y0_sd * float(stream.generator.standard_normal())

    innovations = draw_many(stream, params.noise, n)
    values = replay_path(y0, innovations, params)
    return Path(values, innovations, params, stream.key)


def scaled_tail_ratio(path: Path) -> float:
    """
    Y_n / alpha^n, assembled in log space when alpha^n alone would overflow.

    Raises:
        DomainError: If alpha <= 1
    """
    alpha = path.params.alpha
    if alpha <= 1:
        raise DomainError(f"scaled_tail_ratio needs alpha > 1, got {alpha}")
    y_n = float(path.values[-1])
    if y_n == 0.0:
        return 0.0
    log_scale = path.n * math.log(alpha)
    if log_scale < _LOG_SAFE:
        return y_n / alpha ** path.n
    return math.copysign(math.exp(math.log(abs(y_n)) - log_scale), y_n)


def count_lower_visits(path: Path, r: Optional[float] = None, upto: Optional[int] = None) -> int:
    """Number of t in [0, upto] with Y_t <= r (defaults: the path's r, the whole path)."""
    r = path.params.r if r is None else r
    values = path.values if upto is None else path.values[: upto + 1]
    return int(np.count_nonzero(values <= r))
