"""
Samplers for the limiting random variables of the scaled estimators.

Every sampler takes the stream it consumes, so draws are reproducible and can
be spread over workers in any order.
"""

import math
from typing import Optional, Tuple

import numpy as np

from .errors import (
    ConstructionMismatch,
    DegenerateIntegral,
    DivisionGuard,
    DomainError,
    TailGuardFailed,
)
from .models import BrownianGrid, NoiseSpec, Path, TarParams, XiConstruction, XiSample
from .noise import STANDARD_GAUSSIAN, RngStream, draw_many
from .tar_model import classify_regime, is_explosive, scaled_tail_ratio, simulate_path

ETA_TAIL = 1e-12
XI_HORIZON_TAIL = 1e-10
RATIO_FLOOR = 1e-300


def sample_brownian_grid(
    m: int, stream: RngStream, increments: NoiseSpec = STANDARD_GAUSSIAN
) -> BrownianGrid:
    """
    B(0), B(1/m), ..., B(1) from i.i.d. increments of variance sigma^2 / m.

    ``increments`` defaults to the standard Gaussian; the degenerate law gives
    B = 0 and is only meant for tests.
    """
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    steps = draw_many(stream, increments, m) / math.sqrt(m)
    return BrownianGrid(m, np.concatenate([[0.0], np.cumsum(steps)]))


def df_functional_from_grid(grid: BrownianGrid) -> float:
    """(B(1)^2 - 1) / (2 * (1/m) sum_{j=1}^m B(j/m)^2), right-endpoint Riemann sum."""
    integral = float(np.dot(grid.values[1:], grid.values[1:])) / grid.m
    if integral == 0.0:
        raise DegenerateIntegral("Riemann sum of B^2 is exactly zero")
    b1 = float(grid.values[-1])
    return (b1 * b1 - 1.0) / (2.0 * integral)


def sample_df_functional(
    m: int, stream: RngStream, increments: NoiseSpec = STANDARD_GAUSSIAN
) -> float:
    """
    One draw of the Dickey-Fuller functional (B(1)^2 - 1) / (2 int_0^1 B(t)^2 dt).

    Raises:
        DegenerateIntegral: If the Riemann sum is exactly zero
    """
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    return df_functional_from_grid(sample_brownian_grid(m, stream, increments))


def sample_df_functional_batch(
    m: int, draws: int, stream: RngStream
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Many Dickey-Fuller draws from one stream.

    Returns:
        (functional values, Riemann sums (1/m) sum B(j/m)^2)
    """
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    chunk = max(1, 2_000_000 // m)
    functionals, integrals = [], []
    remaining = draws
    while remaining > 0:
        size = min(chunk, remaining)
        paths = np.cumsum(stream.generator.standard_normal((size, m)), axis=1) / math.sqrt(m)
        integral = np.einsum("ij,ij->i", paths, paths) / m
        functionals.append((paths[:, -1] ** 2 - 1.0) / (2.0 * integral))
        integrals.append(integral)
        remaining -= size
    return np.concatenate(functionals), np.concatenate(integrals)


def sample_abs_bm_marginal(t: float, sigma: float, m: int, stream: RngStream) -> float:
    """
    sigma * |B(t)| at the grid point nearest to t on a grid of resolution m.

    sigma = 0 is accepted as the degenerate law and returns 0.
    """
    if not 0 < t <= 1:
        raise DomainError(f"t must lie in (0, 1], got {t}")
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    if sigma < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    grid = sample_brownian_grid(m, stream)
    return sigma * abs(grid.at(max(t, 1.0 / m)))


def eta_truncation(alpha: float) -> int:
    """Smallest K with alpha^-K < 1e-12."""
    if alpha <= 1:
        raise DomainError(f"eta* needs alpha > 1, got {alpha}")
    return int(math.floor(-math.log(ETA_TAIL) / math.log(alpha))) + 1


def xi_horizon_min(alpha: float) -> int:
    """Smallest horizon H with alpha^-H < 1e-10."""
    if alpha <= 1:
        raise DomainError(f"xi needs alpha > 1, got {alpha}")
    return int(math.floor(-math.log(XI_HORIZON_TAIL) / math.log(alpha))) + 1


def sample_eta_star(alpha: float, noise: NoiseSpec, stream: RngStream) -> float:
    """
    Truncated discounted innovation series sum_{t=1}^K alpha^-t eps_t.

    K is chosen so that alpha^-K < 1e-12; the neglected tail has standard
    deviation sigma * alpha^-K / sqrt(alpha^2 - 1).
    """
    k = eta_truncation(alpha)
    weights = alpha ** -np.arange(1, k + 1, dtype=float)
    return float(np.dot(weights, draw_many(stream, noise, k)))


def sample_eta_star_batch(
    alpha: float, noise: NoiseSpec, draws: int, stream: RngStream
) -> np.ndarray:
    """Many eta* draws from one stream, in chunks."""
    k = eta_truncation(alpha)
    weights = alpha ** -np.arange(1, k + 1, dtype=float)
    chunk = max(1, 2_000_000 // k)
    out = []
    remaining = draws
    while remaining > 0:
        size = min(chunk, remaining)
        eps = draw_many(stream, noise, size * k).reshape(size, k)
        out.append(eps @ weights)
        remaining -= size
    return np.concatenate(out)


def eta_truncated_variance(alpha: float, sigma: float) -> float:
    """sigma^2 (alpha^-2 + ... + alpha^-2K) for the truncation used by the sampler."""
    k = eta_truncation(alpha)
    q = alpha ** -2.0
    return sigma * sigma * q * (1.0 - q ** k) / (1.0 - q)


def _require_explosive(params: TarParams) -> None:
    flags = classify_regime(params)
    if not is_explosive(flags):
        names = ", ".join(sorted(f.value for f in flags))
        raise DomainError(f"xi is defined for ExplosiveCaseII parameters only, got {{{names}}}")


def xi_from_path(path: Path, construction: XiConstruction) -> XiSample:
    """
    Compute xi on an already simulated path.

    The series constructions use m_k = #{t in [k, H - 1]: Y_t <= r} and innovation
    weights alpha^-k, which makes them agree with Y_H / alpha^H on a shared path:

        xi = sum_{k=1}^H alpha^-k (beta/alpha)^{m_k} eps_k + (beta/alpha)^{m_0} Y_0

    For beta = 0 the factor (beta/alpha)^{m_k} is the indicator that no lower
    visit happens from k onwards.
    """
    params = path.params
    alpha, beta, r = params.alpha, params.beta, params.r
    horizon = path.n
    construction = XiConstruction(construction)

    if construction is XiConstruction.SERIES_EQ23 and beta == 0:
        raise ConstructionMismatch("SeriesEq23 needs beta != 0; use SeriesEq24")
    if construction is XiConstruction.SERIES_EQ24 and beta != 0:
        raise ConstructionMismatch("SeriesEq24 needs beta == 0; use SeriesEq23")

    lower = path.values <= r
    tail_guard_ok = not bool(lower[horizon - horizon // 2 :].any())

    if construction is XiConstruction.PATH_RATIO:
        value = scaled_tail_ratio(path)
    else:
        # m[k] = number of lower visits in [k, H - 1], m[H] = 0
        m = np.append(np.cumsum(lower[:-1][::-1])[::-1], 0)
        k = np.arange(1, horizon + 1, dtype=float)
        if construction is XiConstruction.SERIES_EQ23:
            factors = np.power(beta / alpha, m)
        else:
            factors = (m == 0).astype(float)
        series = np.sum(alpha ** -k * factors[1:] * path.innovations)
        value = float(series + factors[0] * path.values[0])

    return XiSample(value, construction, horizon, tail_guard_ok)


def sample_xi(
    params: TarParams,
    horizon: int,
    construction: XiConstruction,
    stream: RngStream,
) -> XiSample:
    """
    Simulate one path to ``horizon`` and compute xi with the given construction.

    Raises:
        DomainError: If params are not explosive or the horizon is too short
        ConstructionMismatch: If the series form does not match beta
    """
    _require_explosive(params)
    if horizon < xi_horizon_min(params.alpha):
        raise DomainError(
            f"horizon {horizon} too short: alpha^-horizon must be < {XI_HORIZON_TAIL:g} "
            f"(need >= {xi_horizon_min(params.alpha)})"
        )
    path = simulate_path(params, horizon, stream)
    return xi_from_path(path, construction)


def sample_limit_ratio(
    params: TarParams,
    horizon: int,
    stream_pair: Tuple[RngStream, RngStream],
    eta_noise: Optional[NoiseSpec] = None,
    construction: XiConstruction = XiConstruction.PATH_RATIO,
) -> float:
    """
    eta* / xi* with eta* and xi* drawn from independent streams.

    Args:
        params: Explosive parameter point; its noise drives xi*
        horizon: Path length used for xi*
        stream_pair: (stream for eta*, stream for xi*)
        eta_noise: Innovation law for eta* (defaults to params.noise)
        construction: xi construction

    Raises:
        TailGuardFailed: If the xi tail guard failed on this draw
        DivisionGuard: If |xi*| < 1e-300
    """
    eta_stream, xi_stream = stream_pair
    if eta_stream.key == xi_stream.key:
        raise ValueError("eta* and xi* must come from different streams")
    eta = sample_eta_star(params.alpha, eta_noise or params.noise, eta_stream)
    xi = sample_xi(params, horizon, construction, xi_stream)
    if not xi.tail_guard_ok:
        raise TailGuardFailed(f"lower-regime visit in the final half of horizon {horizon}")
    if abs(xi.value) < RATIO_FLOOR:
        raise DivisionGuard(f"|xi*| = {abs(xi.value):.3e} is below {RATIO_FLOOR:g}")
    return eta / xi.value


def sample_normal_limit(gamma: float, sigma: float, stream: RngStream) -> float:
    """N(0, 3 sigma^2 / gamma^2), the limit of n^(3/2)(alpha_hat - 1) with drift gamma."""
    if gamma == 0:
        raise DomainError("the drifted unit-root limit needs gamma != 0")
    return math.sqrt(3.0) * sigma / abs(gamma) * float(stream.generator.standard_normal())

