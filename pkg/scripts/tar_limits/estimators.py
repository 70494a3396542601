"""
Least-squares estimators for the TAR(1) slopes.

- ``lse``: per-regime least squares with a known intercept.
- ``q_n_eval`` / ``constrained_lse``: the estimator of alpha under alpha * beta = 1.
- ``scaled_statistic``: the normalizations whose limits are sampled by limit_laws.

All sums run over every transition Y_{t-1} -> Y_t stored in the path.
"""

import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import DegenerateProblem, DomainError, RegimeEmpty
from .models import ConstrainedEstimate, EstimateResult, Path, StatKind, TarParams

QN_CONVENTIONS = ("proof", "display")
SIGNS = ("positive", "negative")

BISECTION_TOL = 1e-12
_GRID_POINTS = 4097
_MAX_BISECTIONS = 200
_LOG_MAX = math.log(np.finfo(float).max)


def lse(path: Path, r: float, gamma: float = 0.0) -> EstimateResult:
    """
    Least-squares estimates of (alpha, beta) with known intercept gamma.

    alpha_hat = sum I(Y_t > r) Y_t (Y_{t+1} - gamma) / sum I(Y_t > r) Y_t^2
    beta_hat  = the same over {Y_t <= r}

    A regime whose denominator is exactly zero yields None for its slope.

    Args:
        path: Observed trajectory (at least 3 values)
        r: Threshold
        gamma: Known intercept subtracted from Y_{t+1}

    Returns:
        EstimateResult; the residual-orthogonality fields hold
        |sum Y_t e_{t+1}| / (sum Y_t^2 * max(|slope|, 1)) per regime
    """
    if len(path.values) < 3:
        raise ValueError(f"lse needs at least 3 values, got {len(path.values)}")

    y_prev = path.values[:-1]
    y_next = path.values[1:] - gamma
    upper = y_prev > r
    lower = ~upper

    alpha_hat, ortho_upper = _regime_slope(y_prev[upper], y_next[upper])
    beta_hat, ortho_lower = _regime_slope(y_prev[lower], y_next[lower])

    return EstimateResult(
        alpha_hat=alpha_hat,
        beta_hat=beta_hat,
        n_upper=int(np.count_nonzero(upper)),
        n_lower=int(np.count_nonzero(lower)),
        residual_orthogonality_upper=ortho_upper,
        residual_orthogonality_lower=ortho_lower,
    )


def _regime_slope(x: np.ndarray, y: np.ndarray) -> Tuple[Optional[float], float]:
    denominator = float(np.dot(x, x))
    if denominator == 0.0:
        return None, 0.0
    slope = float(np.dot(x, y)) / denominator
    residual = float(np.dot(x, y - slope * x))
    return slope, abs(residual) / (denominator * max(abs(slope), 1.0))


def _require(value: Optional[float], side: str) -> float:
    if value is None:
        raise RegimeEmpty(side)
    return value


def _check_convention(convention: str) -> None:
    if convention not in QN_CONVENTIONS:
        raise ValueError(
            f"Unknown qn_convention '{convention}'. Available: {', '.join(QN_CONVENTIONS)}"
        )


def _qn_regressors(
    path: Path, r: float, convention: str
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split Y_{t-1} into the regressor multiplied by x and the one multiplied by 1/x."""
    _check_convention(convention)
    y_prev = path.values[:-1]
    if convention == "proof":
        on_x = y_prev > r
    else:
        on_x = y_prev < r
    a = np.where(on_x, y_prev, 0.0)
    b = np.where(on_x, 0.0, y_prev)
    return a, b, path.values[1:]


def _check_sign(x: float, sign: Optional[str]) -> None:
    if sign is None:
        return
    if sign not in SIGNS:
        raise ValueError(f"Unknown sign '{sign}'. Available: {', '.join(SIGNS)}")
    if (sign == "positive" and x <= 0) or (sign == "negative" and x >= 0):
        raise DomainError(f"x={x} lies outside the {sign} half-line")


def q_n_eval(
    path: Path,
    r: float,
    x: float,
    convention: str = "proof",
    sign: Optional[str] = None,
) -> float:
    """
    Residual sum of squares under the reciprocal-slope constraint.

    Q_n(x) = sum_t (Y_t - x * a_t - b_t / x)^2, where under the "proof" convention
    a_t = Y_{t-1} I{Y_{t-1} > r} and b_t = Y_{t-1} I{Y_{t-1} <= r}; the "display"
    convention uses a_t = Y_{t-1} I{Y_{t-1} < r} and b_t = Y_{t-1} I{Y_{t-1} >= r}.

    Raises:
        DomainError: If x == 0, or x is outside the requested sign half-line
    """
    if x == 0:
        raise DomainError("Q_n is undefined at x = 0")
    _check_sign(x, sign)
    a, b, y = _qn_regressors(path, r, convention)
    residuals = y - x * a - b / x
    return float(np.dot(residuals, residuals))


def qn_derivative_polynomial(
    path: Path, r: float, convention: str = "proof"
) -> Tuple[float, float, float, float]:
    """
    Coefficients (A, B, C, D) of x^3/2 * dQ_n/dx = A x^4 - B x^3 + C x - D.

    A = sum a_t^2, B = sum a_t Y_t, C = sum b_t Y_t, D = sum b_t^2.
    """
    a, b, y = _qn_regressors(path, r, convention)
    return (
        float(np.dot(a, a)),
        float(np.dot(a, y)),
        float(np.dot(b, y)),
        float(np.dot(b, b)),
    )


def _bisect(func: Callable[[float], float], lo: float, hi: float) -> float:
    f_lo = func(lo)
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if hi - lo <= BISECTION_TOL * max(1.0, abs(mid)):
            break
        f_mid = func(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _positive_roots(coeffs: np.ndarray) -> List[float]:
    """
    Positive real roots of a quartic with non-zero leading and constant terms.

    Sign changes are located on a log-spaced grid spanning the Cauchy bounds of
    the roots and refined by bisection; real positive eigenvalue roots are added
    so that a pair of roots closer than the grid spacing is not lost.
    """
    coeffs = coeffs / np.max(np.abs(coeffs))
    lead, const = abs(coeffs[0]), abs(coeffs[-1])
    upper = 2.0 * (1.0 + np.max(np.abs(coeffs[1:])) / lead)
    lower = 0.5 / (1.0 + np.max(np.abs(coeffs[:-1])) / const)

    def poly(x: float) -> float:
        return float(np.polyval(coeffs, x))

    grid = np.geomspace(lower, upper, _GRID_POINTS)
    signs = np.sign(np.polyval(coeffs, grid))

    roots = [float(x) for x, s in zip(grid, signs) if s == 0]
    for i in np.nonzero(signs[:-1] * signs[1:] < 0)[0]:
        roots.append(_bisect(poly, float(grid[i]), float(grid[i + 1])))

    for z in np.roots(coeffs):
        if abs(z.imag) <= 1e-9 * max(1.0, abs(z.real)) and z.real > 0:
            roots.append(float(z.real))
    return roots


def constrained_lse(
    path: Path,
    r: float,
    sign: str = "positive",
    convention: str = "proof",
) -> ConstrainedEstimate:
    """
    Global minimizer of Q_n over the chosen sign half-line.

    Critical points solve A x^4 - B x^3 + C x - D = 0. All real roots in the
    half-line are isolated, Q_n is evaluated at each and the argmin returned.
    With only one regime occupied the problem reduces to single-regime least
    squares (or its reciprocal) and the result is flagged with that regime.

    Args:
        path: Observed trajectory
        r: Threshold
        sign: "positive" or "negative" half-line
        convention: "proof" (x on the upper regime) or "display"

    Raises:
        DegenerateProblem: No data, or the single-regime solution leaves the half-line
    """
    _check_sign(1.0 if sign == "positive" else -1.0, sign)
    A, B, C, D = qn_derivative_polynomial(path, r, convention)
    x_side, reciprocal_side = ("upper", "lower") if convention == "proof" else ("lower", "upper")

    if A == 0 and D == 0:
        raise DegenerateProblem("Q_n has no regressors: both regimes are empty")
    if D == 0:
        if B == 0:
            raise DegenerateProblem("single-regime slope is zero; 1/x has no finite minimizer")
        return _single_regime(B / A, sign, x_side)
    if A == 0:
        if C == 0:
            raise DegenerateProblem("single-regime slope is zero; x has no finite minimizer")
        return _single_regime(D / C, sign, reciprocal_side)

    if sign == "positive":
        roots = _positive_roots(np.array([A, -B, 0.0, C, -D]))
    else:
        # g(-u) = A u^4 + B u^3 - C u - D
        roots = [-u for u in _positive_roots(np.array([A, B, 0.0, -C, -D]))]
    if not roots:
        raise DegenerateProblem("no critical point of Q_n found in the half-line")

    candidates = sorted(set(roots))
    values = [q_n_eval(path, r, x, convention) for x in candidates]
    best = candidates[int(np.argmin(values))]
    return ConstrainedEstimate(value=best, single_regime=None, candidates=tuple(candidates))


def _single_regime(x: float, sign: str, side: str) -> ConstrainedEstimate:
    if (sign == "positive" and x <= 0) or (sign == "negative" and x >= 0):
        raise DegenerateProblem(
            f"single-regime solution x={x} is outside the {sign} half-line"
        )
    return ConstrainedEstimate(value=x, single_regime=side, candidates=(x,))


def _log_scaled(log_factor: float, error: float) -> float:
    """exp(log_factor) * error without forming exp(log_factor) on its own.

    Saturates to +-inf past the float range.
    """
    if error == 0.0:
        return 0.0
    log_value = log_factor + math.log(abs(error))
    if log_value >= _LOG_MAX:
        return math.copysign(math.inf, error)
    return math.copysign(math.exp(log_value), error)


def scaling_description() -> Dict[str, str]:
    """Human-readable scaling per statistic kind."""
    return {
        StatKind.UNIT_ROOT_ALPHA.value: "n (alpha_hat - 1)",
        StatKind.UNIT_ROOT_BETA.value: "n (beta_hat - 1)",
        StatKind.DRIFTED_UNIT_ROOT_ALPHA.value: "n^(3/2) (alpha_hat - 1)",
        StatKind.EXPLOSIVE_ALPHA.value: "(alpha^2 - 1)^-1 alpha^n (alpha_hat - alpha)",
        StatKind.CONSTRAINED_ALPHA_ERROR.value: "alpha_hat - alpha under alpha beta = 1",
        StatKind.BETA_ERROR.value: "beta_hat - beta",
        StatKind.SCALED_LEVEL.value: "Y_n / sqrt(n)",
    }


def scale_estimate(kind: StatKind, estimate: float, n: int, true_params: TarParams) -> float:
    """
    Apply the normalization of ``kind`` to an already computed estimate.

    Args:
        kind: Statistic kind
        estimate: alpha_hat, beta_hat, the constrained estimate or Y_n
        n: Number of transitions
        true_params: Parameters the path was generated with

    Returns:
        The scaled statistic
    """
    alpha, beta = true_params.alpha, true_params.beta
    if kind is StatKind.UNIT_ROOT_ALPHA or kind is StatKind.UNIT_ROOT_BETA:
        return n * (estimate - 1.0)
    if kind is StatKind.DRIFTED_UNIT_ROOT_ALPHA:
        return n ** 1.5 * (estimate - 1.0)
    if kind is StatKind.EXPLOSIVE_ALPHA:
        if alpha <= 1:
            raise DomainError(f"explosive scaling needs alpha > 1, got {alpha}")
        log_factor = n * math.log(alpha) - math.log(alpha * alpha - 1.0)
        return _log_scaled(log_factor, estimate - alpha)
    if kind is StatKind.CONSTRAINED_ALPHA_ERROR:
        return estimate - alpha
    if kind is StatKind.BETA_ERROR:
        return estimate - beta
    if kind is StatKind.SCALED_LEVEL:
        return estimate / math.sqrt(n)
    raise ValueError(f"Unknown statistic kind: {kind}")


def scaled_statistic(
    path: Path,
    true_params: TarParams,
    kind: StatKind,
    sign: str = "positive",
    convention: str = "proof",
) -> float:
    """
    Compute the statistic ``kind`` on a path.

    Raises:
        RegimeEmpty: If the estimator required by ``kind`` is undefined on the path
    """
    kind = StatKind(kind)
    if kind is StatKind.SCALED_LEVEL:
        estimate = float(path.values[-1])
    elif kind is StatKind.CONSTRAINED_ALPHA_ERROR:
        estimate = constrained_lse(path, true_params.r, sign, convention).value
    else:
        result = lse(path, true_params.r, true_params.gamma)
        if kind in (StatKind.UNIT_ROOT_BETA, StatKind.BETA_ERROR):
            estimate = _require(result.beta_hat, "lower")
        else:
            estimate = _require(result.alpha_hat, "upper")
    return scale_estimate(kind, estimate, path.n, true_params)
