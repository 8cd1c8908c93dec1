"""Regularization solvers for the dynamic tomography problem.

* dual_tikhonov / dual_tikhonov_static: gradient descent on the power-type
  Tikhonov functional performed in the dual space, with the step-size and
  bound recursion driven by the smoothness constant of the dual space.
* temporal_variational: alternation of a Landweber step in the Hilbert
  (s = 2) quadrature with the diagonal cosine-spectral solve of the
  time-derivative penalty.
* landweber: the degenerate alpha = beta = 0 case, kept as a baseline.
* fbp: per-time-step filtered back-projection baseline.

All iterative solvers share the same stopping rule: stop when the data
discrepancy falls below rho * delta, when it increases twice in a row
(returning the best iterate seen), or at the iteration cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dct
from .geometry import (
    GridFunction,
    SpaceSpec,
    bochner_norm,
    conjugate_exponent,
    duality_map_bochner,
    duality_map_lebesgue,
    dual_space_smoothness,
    lebesgue_norm,
    smoothness_constant_lebesgue,
)
from .radon import Sinogram, Volume, estimate_operator_norm, pixel_centers


@dataclass
class SolverConfig:
    """Regularization parameters, step sizes and the stopping rule."""

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 10.0
    tau: float | None = None  # None: auto, tau_margin / ||A* A||
    tau_margin: float = 0.95
    rho: float | None = 1.05  # None disables the threshold stop
    delta: float = 0.0
    max_iters: int = 200
    nonneg: bool = False
    mode: str = "dynamic"  # "dynamic" | "static"
    r0_safety: float = 2.0
    norm_iters: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.tau is not None and self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.rho is not None and self.rho <= 1.0:
            raise ValueError("rho must exceed 1")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.mode not in ("dynamic", "static"):
            raise ValueError("mode must be 'dynamic' or 'static'")


@dataclass
class IterationTrace:
    """Per-iteration diagnostics of one solver run."""

    discrepancy: list[float] = field(default_factory=list)
    functional: list[float] = field(default_factory=list)
    step_size: list[float] = field(default_factory=list)
    residual_bound: list[float] = field(default_factory=list)
    stop_reason: str = ""
    r0: float = 0.0
    best_index: int = -1

    @property
    def n_iters(self) -> int:
        return len(self.discrepancy)


class NumericalFailure(RuntimeError):
    """Raised when an iterate turns non-finite; carries the trace so far."""

    def __init__(self, message: str, trace: IterationTrace):
        super().__init__(message)
        self.trace = trace


def _values_of(psi) -> np.ndarray:
    return np.asarray(getattr(psi, "values", psi), dtype=float)


class _StopMonitor:
    """Discrepancy-principle stopping with a two-increase stagnation rule."""

    def __init__(self, rho: float | None, delta: float, initial: float):
        self.threshold = rho * delta if (rho is not None and delta > 0) else None
        self.prev = initial
        self.increases = 0

    def check(self, disc: float) -> str | None:
        if self.threshold is not None and disc <= self.threshold:
            return "threshold"
        if disc > self.prev:
            self.increases += 1
        else:
            self.increases = 0
        self.prev = disc
        if self.increases >= 2:
            return "stagnation"
        return None


class _BestKeeper:
    def __init__(self):
        self.disc = np.inf
        self.values = None
        self.index = -1

    def offer(self, disc: float, values: np.ndarray, index: int) -> None:
        if disc < self.disc:
            self.disc = disc
            self.values = values.copy()
            self.index = index


def _image_gf(op, values: np.ndarray) -> GridFunction:
    return GridFunction(values, op.time_weights, op.image_weights())


def _data_gf(op, values: np.ndarray, s: float) -> GridFunction:
    return GridFunction(values, op.time_weights, op.data_weights(s))


def normal_operator_norm(op, n_iters: int = 50, seed: int = 0) -> float:
    """||A* A|| in the Hilbert (s = 2) quadrature, by power iteration."""
    tw = np.asarray(op.time_weights).reshape(-1, 1, 1)
    weights = tw * op.image_weights()
    return estimate_operator_norm(
        lambda x: op.adjoint(op.forward(x), s=2.0), op.image_shape, weights, n_iters, seed
    )


def _resolve_tau(op, cfg: SolverConfig) -> float:
    if cfg.tau is not None:
        return cfg.tau
    lam = normal_operator_norm(op, cfg.norm_iters, cfg.seed)
    if not (np.isfinite(lam) and lam > 0):
        raise NumericalFailure(
            f"operator norm estimation failed (lambda = {lam})", IterationTrace()
        )
    return cfg.tau_margin / lam


# ---------------------------------------------------------------------------
# dual method (Tikhonov regularization with power-type penalties)
# ---------------------------------------------------------------------------


@dataclass
class _DualSetting:
    """Space plumbing of one dual-method run (dynamic or per-step static)."""

    apply_A: callable
    apply_Astar: callable
    x_gf: callable  # values -> GridFunction on the solution grid
    y_gf: callable  # values -> GridFunction on the data grid
    j_Y: callable  # data-space duality map with power u
    j_Xstar: callable  # dual-space duality map with power v*
    norm_Xstar: callable
    norm_X: callable
    disc_norm: callable  # data-space norm used by the stopping rule
    v: float
    u: float
    G_dual: float


def _dual_method(
    setting: _DualSetting,
    psi_values: np.ndarray,
    x_shape: tuple[int, ...],
    alpha: float,
    cfg: SolverConfig,
    delta: float,
    r0: float,
) -> tuple[np.ndarray, IterationTrace]:
    v = setting.v
    u = setting.u
    v_star = conjugate_exponent(v)
    G = setting.G_dual

    x = np.zeros(x_shape)
    x_star = np.zeros(x_shape)  # = j_v(0)
    ax = setting.apply_A(x)

    trace = IterationTrace(r0=r0)
    disc0 = setting.disc_norm(ax - psi_values)
    monitor = _StopMonitor(cfg.rho, delta, disc0)
    best = _BestKeeper()
    best.offer(disc0, x, 0)
    R = r0

    for k in range(cfg.max_iters):
        residual = setting.y_gf(ax - psi_values)
        jy = setting.j_Y(residual, u)
        # alpha * j_v(x_k) = alpha * x_star_k since x_k = j_{v*}(x_star_k)
        theta = setting.apply_Astar(jy) + alpha * x_star
        theta_norm = setting.norm_Xstar(setting.x_gf(theta))
        if not np.isfinite(theta_norm):
            raise NumericalFailure("non-finite gradient norm", trace)
        if theta_norm == 0.0:
            trace.stop_reason = "threshold"  # stationary point reached
            break
        mu = min((alpha * R / (G * theta_norm**v_star)) ** (1.0 / (v_star - 1.0)), 1.0 / alpha)
        R = (1.0 - mu * alpha) * R + mu**v_star * (G / v_star) * theta_norm**v_star
        x_star = x_star - mu * theta
        x = setting.j_Xstar(setting.x_gf(x_star), v_star).values
        if not np.all(np.isfinite(x)):
            raise NumericalFailure("non-finite iterate", trace)

        ax = setting.apply_A(x)
        disc = setting.disc_norm(ax - psi_values)
        functional = disc**u / u + alpha / v * setting.norm_X(setting.x_gf(x)) ** v
        trace.discrepancy.append(disc)
        trace.functional.append(functional)
        trace.step_size.append(mu)
        trace.residual_bound.append(R)
        best.offer(disc, x, k + 1)

        reason = monitor.check(disc)
        if reason is not None:
            trace.stop_reason = reason
            break
    else:
        trace.stop_reason = "max_iters"

    # stagnation returns the best iterate seen; threshold and an exhausted
    # iteration budget return the current one
    if trace.stop_reason == "stagnation" and best.values is not None:
        trace.best_index = best.index
        return best.values, trace
    trace.best_index = trace.n_iters
    return x, trace


def _r0_default(alpha: float, psi_norm: float, v: float, u: float, safety: float) -> float:
    """Bound on the initial Bregman distance for x_0 = 0.

    D(0, x_reg) = (1 - 1/v) ||x_reg||^v exactly, and the trivial-minimizer
    comparison T_alpha(x_reg) <= T_alpha(0) gives
    ||x_reg||^v <= v ||psi||^u / (u alpha), so safety = 1 is already an
    upper bound.  Oversizing R_0 is costly for v* < 2: the step rule
    amplifies it by the power 1/(v*-1), so keep the safety factor small.
    """
    base = (1.0 - 1.0 / v) * (v / u) * psi_norm**u / alpha
    return base * safety if base > 0 else 1.0


def dual_tikhonov(
    op,
    psi: Sinogram,
    spec: SpaceSpec,
    alpha: float,
    cfg: SolverConfig,
    delta: float | None = None,
):
    """Dual method in the dynamic Lebesgue-Bochner setting.

    Minimizes (1/u) ||A x - psi||_Y^u + (alpha/v) ||x||_X^v for
    X = L^p(0,T; L^r(B)) and the weighted data space with exponents (q, s);
    v = max(2, p, r), u = max(2, q, s) by default.  The discrepancy for the
    stopping rule is measured in the (q, s) Bochner norm, so `delta` must be
    given in that norm.

    With cfg.mode == "static" the problem is split per time step and solved
    in the pure Lebesgue spaces instead (see dual_tikhonov_static); the
    second return value is then a list of traces.
    """
    if alpha <= 0:
        raise ValueError("dual method requires alpha > 0")
    if cfg.mode == "static":
        return dual_tikhonov_static(op, psi, spec, alpha, cfg)
    p, r, q, s = spec.p, spec.r, spec.q, spec.s
    v, u = spec.v, spec.u
    order, G = dual_space_smoothness(spec)
    if abs(order - conjugate_exponent(v)) > 1e-12:
        raise ValueError("dual-space smoothness order does not match v*")

    p_c, r_c = spec.p_conj, spec.r_conj
    delta_eff = cfg.delta if delta is None else delta

    setting = _DualSetting(
        apply_A=op.forward,
        apply_Astar=lambda g: op.adjoint(g.values, s=s),
        x_gf=lambda vals: _image_gf(op, vals),
        y_gf=lambda vals: _data_gf(op, vals, s),
        j_Y=lambda f, power: duality_map_bochner(f, power, q, s),
        j_Xstar=lambda f, power: duality_map_bochner(f, power, p_c, r_c),
        norm_Xstar=lambda f: bochner_norm(f, p_c, r_c),
        norm_X=lambda f: bochner_norm(f, p, r),
        disc_norm=lambda vals: bochner_norm(_data_gf(op, vals, s), q, s),
        v=v,
        u=u,
        G_dual=G,
    )
    psi_values = _values_of(psi)
    psi_norm = setting.disc_norm(psi_values)
    r0 = _r0_default(alpha, psi_norm, v, u, cfg.r0_safety)
    values, trace = _dual_method(
        setting, psi_values, op.image_shape, alpha, cfg, delta_eff, r0
    )
    return Volume(values, T=op.geometry.T), trace


def dual_tikhonov_static(
    op,
    psi: Sinogram,
    spec: SpaceSpec,
    alpha: float,
    cfg: SolverConfig,
    deltas: np.ndarray | None = None,
):
    """Dual method run independently per time step in X = L^r(B), with the
    same regularization parameter for every step.

    `deltas` are per-step noise levels in the per-step weighted data norm;
    without them only the stagnation / iteration-cap stops apply.  Traces
    may have different lengths (steps stop independently).
    """
    if alpha <= 0:
        raise ValueError("dual method requires alpha > 0")
    r, s = spec.r, spec.s
    v = max(2.0, r)
    u = max(2.0, s)
    r_c = conjugate_exponent(r)
    order, G = smoothness_constant_lebesgue(r_c)
    if abs(order - conjugate_exponent(v)) > 1e-12:
        raise ValueError("dual-space smoothness order does not match v*")

    nt = op.image_shape[0]
    one = np.ones(1)
    pix_w = op.image_weights()
    dat_w = op.data_weights(s)

    def x_gf(vals):
        return GridFunction(vals, one, pix_w)

    def y_gf(vals):
        return GridFunction(vals, one, dat_w)

    psi_values = _values_of(psi)
    out = np.empty(op.image_shape)
    traces = []
    for k in range(nt):
        setting = _DualSetting(
            apply_A=lambda x, k=k: op.forward_step(k, x[0])[None],
            apply_Astar=lambda g, k=k: op.adjoint_step(k, g.values[0], s=s)[None],
            x_gf=x_gf,
            y_gf=y_gf,
            j_Y=lambda f, power: duality_map_lebesgue(f, power, s),
            j_Xstar=lambda f, power: duality_map_lebesgue(f, power, r_c),
            norm_Xstar=lambda f: lebesgue_norm(f, r_c),
            norm_X=lambda f: lebesgue_norm(f, r),
            disc_norm=lambda vals: lebesgue_norm(y_gf(vals), s),
            v=v,
            u=u,
            G_dual=G,
        )
        psi_k = psi_values[k][None]
        psi_norm = setting.disc_norm(psi_k)
        r0 = _r0_default(alpha, psi_norm, v, u, cfg.r0_safety)
        delta_k = float(deltas[k]) if deltas is not None else 0.0
        values, trace = _dual_method(
            setting, psi_k, (1,) + op.image_shape[1:], alpha, cfg, delta_k, r0
        )
        out[k] = values[0]
        traces.append(trace)
    return Volume(out, T=op.geometry.T), traces


# ---------------------------------------------------------------------------
# Hilbert-space methods: Landweber and the temporal variational scheme
# ---------------------------------------------------------------------------


def _hilbert_iteration(op, psi: Sinogram, cfg: SolverConfig, penalty_step):
    """Shared Landweber-type loop in the s = 2 quadrature.

    penalty_step(half_values, tau) maps the Landweber intermediate to the
    next iterate (identity for plain Landweber).
    """
    tau = _resolve_tau(op, cfg)
    T = op.geometry.T
    psi_values = _values_of(psi)

    def disc_norm(vals):
        return bochner_norm(_data_gf(op, vals, 2.0), 2.0, 2.0)

    x = np.zeros(op.image_shape)
    ax = op.forward(x)
    trace = IterationTrace()
    disc0 = disc_norm(ax - psi_values)
    monitor = _StopMonitor(cfg.rho, cfg.delta, disc0)
    best = _BestKeeper()
    best.offer(disc0, x, 0)

    for k in range(cfg.max_iters):
        half = x - tau * op.adjoint(ax - psi_values, s=2.0)
        x = penalty_step(half, tau)
        if cfg.nonneg:
            x = np.maximum(x, 0.0)
        if not np.all(np.isfinite(x)):
            raise NumericalFailure("non-finite iterate", trace)
        ax = op.forward(x)
        disc = disc_norm(ax - psi_values)
        energy = 0.5 * disc**2
        if cfg.alpha > 0:
            energy += 0.5 * cfg.alpha * bochner_norm(_image_gf(op, x), 2.0, 2.0) ** 2
        if cfg.beta > 0:
            energy += 0.5 * cfg.beta * _temporal_seminorm_sq(Volume(x, T=T), cfg.gamma, op)
        trace.discrepancy.append(disc)
        trace.functional.append(energy)
        trace.step_size.append(tau)
        trace.residual_bound.append(np.nan)
        best.offer(disc, x, k + 1)
        reason = monitor.check(disc)
        if reason is not None:
            trace.stop_reason = reason
            break
    else:
        trace.stop_reason = "max_iters"

    if trace.stop_reason == "stagnation" and best.values is not None:
        trace.best_index = best.index
        return Volume(best.values, T=T), trace
    trace.best_index = trace.n_iters
    return Volume(x, T=T), trace


def _temporal_seminorm_sq(vol: Volume, gamma: float, op) -> float:
    """Quadrature-scaled spectral evaluation of ||d_t x||^2 in the weighted
    H^-1 norm; used only as a monitoring value in traces."""
    c = dct.cosine_forward(vol)
    msq = c.temporal_frequencies[:, None, None] ** 2
    wsq = c.spatial_frequency_sq[None, :, :]
    cell = (vol.T / vol.n_time) * float(np.asarray(op.image_weights()))
    return float(cell * np.sum(msq / (wsq + gamma) * c.coefficients**2))


def temporal_variational(op, psi: Sinogram, cfg: SolverConfig):
    """Time-derivative penalized reconstruction (Landweber step followed by
    the diagonal cosine-spectral solve), with tau = tau_margin / ||A* A||.

    With alpha = beta = 0 the filter is the identity and the iterates match
    plain Landweber up to the cosine-transform round trip.
    """
    T = op.geometry.T

    def penalty(half, tau):
        coeffs = dct.cosine_forward(Volume(half, T=T))
        return dct.cosine_inverse(
            dct.spectral_filter(coeffs, tau, cfg.alpha, cfg.beta, cfg.gamma)
        ).values

    return _hilbert_iteration(op, psi, cfg, penalty)


def landweber(op, psi: Sinogram, cfg: SolverConfig):
    """Plain Landweber iteration with the shared stopping rules."""
    return _hilbert_iteration(op, psi, cfg, lambda half, tau: half)


# ---------------------------------------------------------------------------
# filtered back-projection baseline
# ---------------------------------------------------------------------------


def _ramp_filter_rows(rows: np.ndarray, h_sigma: float) -> np.ndarray:
    """Frequency-domain Ram-Lak filter applied along the offset axis."""
    n = rows.shape[-1]
    npad = 1 << int(np.ceil(np.log2(max(2 * n, 16))))
    freq = np.fft.rfftfreq(npad, d=h_sigma)
    spec = np.fft.rfft(rows, n=npad, axis=-1)
    return np.fft.irfft(spec * np.abs(freq), n=npad, axis=-1)[..., :n]


def fbp(sino: Sinogram, n_pixels: int, filter_name: str = "ram-lak") -> Volume:
    """Per-time-step filtered back-projection: ramp filter per offset row,
    unweighted back-projection scaled by pi / n_angles."""
    if filter_name != "ram-lak":
        raise ValueError(f"unsupported filter {filter_name!r}")
    geometry = sino.geometry
    schedule = geometry.angle_schedule()
    offs = geometry.offsets
    c = pixel_centers(n_pixels)
    xx, yy = np.meshgrid(c, c, indexing="xy")
    inside = xx**2 + yy**2 <= 1.0
    out = np.zeros((geometry.n_time_steps, n_pixels, n_pixels))
    for k, angles in enumerate(schedule):
        filtered = _ramp_filter_rows(sino.values[k], geometry.h_sigma)
        frame = np.zeros((n_pixels, n_pixels))
        for a_idx, phi in enumerate(angles):
            t = xx * np.cos(phi) + yy * np.sin(phi)
            frame += np.interp(t, offs, filtered[a_idx], left=0.0, right=0.0)
        out[k] = frame * (np.pi / len(angles)) * inside
    return Volume(out, T=geometry.T)
