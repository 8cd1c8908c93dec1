"""Norms, duality mappings and smoothness constants on discretized
Lebesgue / Lebesgue-Bochner grid spaces.

A grid function carries its own quadrature weights, split into a temporal
part (one weight per time step) and a spatial part (broadcastable over the
remaining axes).  All pairings between a space and its dual are *weighted*
pairings,

    <f, g> = sum_i w_i f_i g_i,

which makes the dual of the (outer, inner)-exponent space the space with
conjugate exponents and the *same* weights.  With this convention the
discrete duality identities

    <f, j(f)> = ||f|| * ||j(f)||_*      and      ||j(f)||_* = ||f||^(power-1)

hold exactly (up to rounding), which the tests verify.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def conjugate_exponent(e: float) -> float:
    """Conjugate exponent e* with 1/e + 1/e* = 1, for e in (1, inf)."""
    if not e > 1.0:
        raise ValueError(f"exponent must be > 1, got {e}")
    return e / (e - 1.0)


def _check_exponent(name: str, e: float) -> None:
    if not (np.isfinite(e) and e > 1.0):
        raise ValueError(f"{name} must be a finite exponent > 1, got {e}")


@dataclass(frozen=True)
class SpaceSpec:
    """Exponents and domain extents of the Lebesgue-Bochner setting.

    p, r are the temporal / spatial exponents of the solution space,
    q, s those of the data space.  The penalty powers default to
    v = max(2, p, r) and u = max(2, q, s).
    """

    p: float = 2.0
    r: float = 2.0
    q: float = 2.0
    s: float = 2.0
    v: float | None = None
    u: float | None = None
    T: float = 1.0
    spatial_extents: tuple[float, ...] = (1.0, 1.0)

    def __post_init__(self):
        for name in ("p", "r", "q", "s"):
            _check_exponent(name, getattr(self, name))
        if self.v is None:
            object.__setattr__(self, "v", max(2.0, self.p, self.r))
        if self.u is None:
            object.__setattr__(self, "u", max(2.0, self.q, self.s))
        _check_exponent("v", self.v)
        _check_exponent("u", self.u)
        if not self.T > 0:
            raise ValueError("time horizon T must be positive")
        if any(b <= 0 for b in self.spatial_extents):
            raise ValueError("spatial extents must be positive")

    @property
    def p_conj(self) -> float:
        return conjugate_exponent(self.p)

    @property
    def r_conj(self) -> float:
        return conjugate_exponent(self.r)

    @property
    def q_conj(self) -> float:
        return conjugate_exponent(self.q)

    @property
    def s_conj(self) -> float:
        return conjugate_exponent(self.s)

    @property
    def v_conj(self) -> float:
        return conjugate_exponent(self.v)

    @property
    def u_conj(self) -> float:
        return conjugate_exponent(self.u)


@dataclass(frozen=True)
class GridFunction:
    """Dense samples on a (time x space) grid plus quadrature weights.

    values        : array of shape (n_time, *spatial_shape); axis 0 is time.
    time_weights  : (n_time,) positive weights, sum ~ time horizon.
    space_weights : positive weights broadcastable to spatial_shape
                    (a scalar array for uniform cell measure, or a full
                    array e.g. for the weighted sinogram space).
    """

    values: np.ndarray
    time_weights: np.ndarray
    space_weights: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        tw = np.atleast_1d(np.asarray(self.time_weights, dtype=float))
        sw = np.asarray(self.space_weights, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "time_weights", tw)
        object.__setattr__(self, "space_weights", sw)
        if values.ndim < 1:
            raise ValueError("values must have at least a time axis")
        if tw.shape != (values.shape[0],):
            raise ValueError(
                f"time_weights shape {tw.shape} does not match "
                f"{values.shape[0]} time steps"
            )
        try:
            np.broadcast_shapes(sw.shape, values.shape[1:])
        except ValueError as exc:
            raise ValueError(
                f"space_weights shape {sw.shape} not broadcastable to "
                f"spatial shape {values.shape[1:]}"
            ) from exc
        if not (np.all(np.isfinite(tw)) and np.all(tw > 0)):
            raise ValueError("time_weights must be strictly positive and finite")
        if not (np.all(np.isfinite(sw)) and np.all(sw > 0)):
            raise ValueError("space_weights must be strictly positive and finite")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")

    @property
    def n_time(self) -> int:
        return self.values.shape[0]

    @property
    def full_weights(self) -> np.ndarray:
        """Product quadrature weights, broadcast to the value shape."""
        tw = self.time_weights.reshape((-1,) + (1,) * (self.values.ndim - 1))
        return np.broadcast_to(tw * self.space_weights, self.values.shape)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(values, self.time_weights, self.space_weights)

    def zeros_like(self) -> "GridFunction":
        return self.with_values(np.zeros_like(self.values))


def inner_product(f: GridFunction, g: GridFunction) -> float:
    """Weighted pairing sum(w * f * g); f and g must share the grid."""
    if f.values.shape != g.values.shape:
        raise ValueError(
            f"shape mismatch {f.values.shape} vs {g.values.shape}"
        )
    return float(np.sum(f.full_weights * f.values * g.values))


def lebesgue_norm(f: GridFunction, exponent: float) -> float:
    """(sum_i w_i |f_i|^e)^(1/e) over the whole grid with product weights."""
    _check_exponent("exponent", exponent)
    vals = np.abs(f.values)
    m = vals.max() if vals.size else 0.0
    if m == 0.0:
        return 0.0
    # scale out the maximum so that x**e cannot overflow for large e
    return float(m * np.sum(f.full_weights * (vals / m) ** exponent) ** (1.0 / exponent))


def _spatial_norms(f: GridFunction, inner: float) -> np.ndarray:
    """Per-time-step spatial norms ||f(t)||_inner, shape (n_time,)."""
    axes = tuple(range(1, f.values.ndim))
    vals = np.abs(f.values)
    m = vals.max() if vals.size else 0.0
    if m == 0.0:
        return np.zeros(f.n_time)
    scaled = (vals / m) ** inner
    return m * np.sum(f.space_weights * scaled, axis=axes) ** (1.0 / inner)


def bochner_norm(f: GridFunction, outer: float, inner: float) -> float:
    """(sum_t w_t ||f(t)||_inner^outer)^(1/outer).

    For outer == inner this equals lebesgue_norm over the product grid.
    """
    _check_exponent("outer", outer)
    _check_exponent("inner", inner)
    slice_norms = _spatial_norms(f, inner)
    m = slice_norms.max() if slice_norms.size else 0.0
    if m == 0.0:
        return 0.0
    return float(m * np.sum(f.time_weights * (slice_norms / m) ** outer) ** (1.0 / outer))


def duality_map_lebesgue(f: GridFunction, power: float, inner_exponent: float) -> GridFunction:
    """Duality map of the (whole-grid) Lebesgue space,

        j_power(f) = ||f||^(power - e) |f|^(e-1) sign(f),   e = inner_exponent.

    The image lives on the same grid; its natural norm is the conjugate
    exponent norm with the same weights.  j(0) = 0 by convention (the only
    selection consistent with the set-valued definition).
    """
    _check_exponent("power", power)
    _check_exponent("inner_exponent", inner_exponent)
    vals = f.values
    m = float(np.max(np.abs(vals))) if vals.size else 0.0
    if m == 0.0:
        return f.zeros_like()
    phi = vals / m  # j(a f) = a^(power-1) j(f), so normalize for stability
    norm_phi = lebesgue_norm(f.with_values(phi), inner_exponent)
    out = (
        m ** (power - 1.0)
        * norm_phi ** (power - inner_exponent)
        * np.abs(phi) ** (inner_exponent - 1.0)
        * np.sign(phi)
    )
    return f.with_values(out)


def duality_map_bochner(
    f: GridFunction, power: float, outer: float, inner: float
) -> GridFunction:
    """Duality map of the Bochner grid space with exponents (outer, inner).

    Applied slice-wise in time with the outer exponent as slice power,
    then scaled globally:

        (j_power f)(t) = ||f||_{outer,inner}^(power - outer)
                         * ||f(t)||_inner^(outer - inner)
                         * |f(t)|^(inner - 1) sign(f(t)).

    The image is the element of the conjugate (outer*, inner*) space pairing
    with f; zero slices (and the zero function) map to zero.
    """
    _check_exponent("power", power)
    _check_exponent("outer", outer)
    _check_exponent("inner", inner)
    vals = f.values
    m = float(np.max(np.abs(vals))) if vals.size else 0.0
    if m == 0.0:
        return f.zeros_like()
    phi = vals / m
    fphi = f.with_values(phi)
    slice_norms = _spatial_norms(fphi, inner)
    total = bochner_norm(fphi, outer, inner)
    nz = slice_norms > 0.0
    slice_factor = np.zeros_like(slice_norms)
    slice_factor[nz] = slice_norms[nz] ** (outer - inner)
    shape = (-1,) + (1,) * (vals.ndim - 1)
    out = (
        m ** (power - 1.0)
        * total ** (power - outer)
        * slice_factor.reshape(shape)
        * np.abs(phi) ** (inner - 1.0)
        * np.sign(phi)
    )
    return f.with_values(out)


def bregman_distance(
    x: GridFunction, y: GridFunction, power: float, outer: float, inner: float
) -> float:
    """Bregman distance of ||.||^v / v in the (outer, inner) grid space,

        D(x, y) = ||x||^v/v - ||y||^v/v - <j_v(y), x - y>,   v = power.

    Nonnegative by convexity; negative rounding residue is clipped to 0.
    """
    if x.values.shape != y.values.shape:
        raise ValueError("x and y must share the grid")
    v = power
    nx = bochner_norm(x, outer, inner)
    ny = bochner_norm(y, outer, inner)
    jy = duality_map_bochner(y, v, outer, inner)
    d = nx**v / v - ny**v / v - inner_product(jy, x.with_values(x.values - y.values))
    return max(float(d), 0.0)


# ---------------------------------------------------------------------------
# smoothness-of-power-type constants
# ---------------------------------------------------------------------------


def lipschitz_power_constant(a: float) -> float:
    """Lipschitz constant of h -> h^a on [1/2, 1].

    K_a = |a * 2^(1-a)| for a < 1 and K_a = a for a >= 1.
    """
    if not np.isfinite(a):
        raise ValueError("a must be finite")
    if a < 1.0:
        return abs(a * 2.0 ** (1.0 - a))
    return float(a)


def smoothness_constant_lebesgue(p: float) -> tuple[float, float]:
    """Smoothness order and constant of L^p over a bounded domain.

    L^p is min(2, p)-smooth with G = 2^(2-p) for 1 < p <= 2 and
    G = p - 1 for p > 2; both branches give G = 1 at p = 2.
    """
    _check_exponent("p", p)
    if p <= 2.0:
        return p, 2.0 ** (2.0 - p)
    return 2.0, p - 1.0


def smoothness_constant_downgrade(s: float, G_s: float, q: float) -> float:
    """Constant of q-smoothness for a space known to be s-smooth, 1 < q < s.

        G_q = 2^(s-q) * max(2^s, G_s + K * 2^(s-2)),

    with K the Lipschitz constant of h -> h^(q-s) on [1/2, 1].
    """
    _check_exponent("s", s)
    _check_exponent("q", q)
    if not q < s:
        raise ValueError(f"need q < s, got q={q}, s={s}")
    if not G_s > 0:
        raise ValueError("G_s must be positive")
    K = lipschitz_power_constant(q - s)
    return 2.0 ** (s - q) * max(2.0**s, G_s + K * 2.0 ** (s - 2.0))


def smoothness_constant_bochner(
    p_inner_order: float, G_inner: float, q_outer: float
) -> tuple[float, float]:
    """Smoothness order and constant of the Bochner space L^q(0,T;X)
    when X is p-smooth with constant G_inner.

    The space is min(p, q)-smooth with

        G = 2^(p-q) * max(2^p, G_p + K 2^(p-2))                 if q <= p,
        G = max(2^q, 2^(q-p) G_p + K 2^(q-2)) + K' 2^(p-2)      if p <  q,

    where K, K' are the Lipschitz constants of h -> h^(q-p) and
    h -> h^(p-q) on [1/2, 1].
    """
    p = p_inner_order
    q = q_outer
    _check_exponent("p_inner_order", p)
    _check_exponent("q_outer", q)
    if p > 2.0:
        raise ValueError("inner smoothness order must lie in (1, 2]")
    if not G_inner > 0:
        raise ValueError("G_inner must be positive")
    K = lipschitz_power_constant(q - p)
    if q <= p:
        G = 2.0 ** (p - q) * max(2.0**p, G_inner + K * 2.0 ** (p - 2.0))
        return q, G
    K2 = lipschitz_power_constant(p - q)
    G = max(2.0**q, 2.0 ** (q - p) * G_inner + K * 2.0 ** (q - 2.0)) + K2 * 2.0 ** (p - 2.0)
    return p, G


def dual_space_smoothness(spec: SpaceSpec) -> tuple[float, float]:
    """Order v* and constant G of the dual solution space
    L^{p*}(0,T; L^{r*}(B)); v* = conjugate of v = max(2, p, r)."""
    order_inner, g_inner = smoothness_constant_lebesgue(spec.r_conj)
    order, G = smoothness_constant_bochner(order_inner, g_inner, spec.p_conj)
    return order, G
