"""Variational phase reconstruction from contrast stacks.

Five methods share one spectral toolbox.  ``tikhonov`` and ``iso_dpc``
are closed forms.  ``tv_dpc`` and ``l2_retinex`` run half-quadratic
splitting with a doubling continuation on the splitting weight.
``l1_retinex`` runs a split Bregman scheme with a fixed number of
sweeps.  The two Retinex methods measure data fidelity on gradients,
which makes them insensitive to additive content the gradient kills.

Every linear solve is a pointwise spectral division; the forward kernel
K enters the normal equations as K^2 and the data side as the adjoint
multiplier -i*K (see :mod:`qdpc.optics` for the storage convention).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .fields import Shape, fft2, grad, ifft2, spectral_symbols
from .metrics import adaptive_alpha
from .simulate import DpcStack

METHODS = ("tikhonov", "tv_dpc", "iso_dpc", "l2_retinex", "l1_retinex")

# Raw adaptive estimates on nearly clean stacks can underflow any useful
# scale; automatic weights are floored here.
ALPHA_FLOOR = 1e-8

_TRACE_EPS = 1e-12


class SolverDivergence(RuntimeError):
    """Iteration produced non-finite state."""

    def __init__(self, method: str, iteration: int):
        super().__init__(f"{method} diverged: non-finite state at iteration {iteration}")
        self.method = method
        self.iteration = iteration


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by all methods; unused ones are ignored per method.

    ``alpha`` is the gradient-sparsity weight, ``'auto'`` estimates it
    from the stack.  ``beta`` weights the smoothed-phase penalty of
    ``iso_dpc`` (default twice alpha).  ``gamma``/``gamma0`` weight the
    l1 data term and its quadratic split.  ``alpha0_init`` starts the
    half-quadratic continuation (default alpha) which doubles until
    ``alpha0_max``.
    """

    method: str = "l1_retinex"
    alpha: float | str = "auto"
    beta: float | None = None
    gamma: float = 0.1
    gamma0: float = 1.0
    alpha0_init: float | None = None
    alpha0_max: float = 1e5
    max_iterations: int = 40
    eta: float = 1e-6
    tv_mode: str = "isotropic"
    iso_gauss_sigma: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.alpha != "auto":
            if not isinstance(self.alpha, (int, float)) or not self.alpha > 0:
                raise ValueError(f"alpha must be 'auto' or positive, got {self.alpha!r}")
        if self.beta is not None and not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.gamma0 > 0:
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")
        if self.alpha0_init is not None and not self.alpha0_init > 0:
            raise ValueError(f"alpha0_init must be positive, got {self.alpha0_init}")
        if not self.alpha0_max > 0:
            raise ValueError(f"alpha0_max must be positive, got {self.alpha0_max}")
        if self.alpha0_init is not None and self.alpha0_init > self.alpha0_max:
            raise ValueError("alpha0_init must not exceed alpha0_max")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be at least 1, got {self.max_iterations}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.tv_mode not in ("isotropic", "anisotropic"):
            raise ValueError(f"unknown tv_mode {self.tv_mode!r}")
        if not self.iso_gauss_sigma > 0:
            raise ValueError(f"iso_gauss_sigma must be positive, got {self.iso_gauss_sigma}")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "gamma0": self.gamma0,
            "alpha0_init": self.alpha0_init,
            "alpha0_max": self.alpha0_max,
            "max_iterations": self.max_iterations,
            "eta": self.eta,
            "tv_mode": self.tv_mode,
            "iso_gauss_sigma": self.iso_gauss_sigma,
        }


@dataclass
class ReconstructionResult:
    phi: np.ndarray
    iterations_run: int
    residual_trace: list[float]
    config: SolverConfig
    alpha: float
    history: list[dict] | None = None

    def __post_init__(self):
        if len(self.residual_trace) != self.iterations_run:
            raise ValueError("residual trace length must equal iterations run")


def shrink_aniso(v: np.ndarray, threshold: float) -> np.ndarray:
    """Componentwise soft threshold."""
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


def shrink_iso(vx: np.ndarray, vy: np.ndarray, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude-coupled soft threshold; zero vectors stay zero."""
    mag = np.hypot(vx, vy)
    scale = np.maximum(mag - threshold, 0.0) / np.where(mag > 0, mag, 1.0)
    return scale * vx, scale * vy


def gaussian_kernel_spectrum(shape: Shape, sigma_px: float) -> np.ndarray:
    """Spectrum of a unit-sum periodic Gaussian stencil centered at 0."""
    shape = Shape(*shape).validate()
    ix = np.arange(shape.width)
    iy = np.arange(shape.height)
    dx = np.minimum(ix, shape.width - ix)[None, :]
    dy = np.minimum(iy, shape.height - iy)[:, None]
    kern = np.exp(-(dx**2 + dy**2) / (2.0 * sigma_px**2))
    kern /= kern.sum()
    spec = fft2(kern)
    # even real stencil, spectrum is real up to rounding
    return spec.real


def _rel_change(new: np.ndarray, old: np.ndarray) -> float:
    num = float(np.linalg.norm(new - old))
    den = max(float(np.linalg.norm(old)), _TRACE_EPS)
    return num / den


@dataclass
class _Workspace:
    """Spectra shared by every method for one stack."""

    K: np.ndarray        # (N, H, W) odd real kernels
    s_hat: np.ndarray    # (N, H, W) image spectra
    Dx: np.ndarray
    Dy: np.ndarray
    Dsq: np.ndarray
    sum_k2: np.ndarray   # (H, W)
    atb: np.ndarray      # (H, W) sum_n of -i K_n s_hat_n

    @classmethod
    def build(cls, stack: DpcStack) -> "_Workspace":
        K = stack.tfs.kernels
        s_hat = np.stack([fft2(s) for s in stack.images])
        Dx, Dy, Dsq = spectral_symbols(stack.shape)
        sum_k2 = (K * K).sum(axis=0)
        atb = (-1j * K * s_hat).sum(axis=0)
        return cls(K=K, s_hat=s_hat, Dx=Dx, Dy=Dy, Dsq=Dsq, sum_k2=sum_k2, atb=atb)


def resolve_alpha(stack: DpcStack, config: SolverConfig) -> float:
    if config.alpha == "auto":
        return max(adaptive_alpha(stack.images), ALPHA_FLOOR)
    return float(config.alpha)


def _check_finite(method: str, phi: np.ndarray, iteration: int) -> None:
    if not np.all(np.isfinite(phi)):
        raise SolverDivergence(method, iteration)


def solve_tikhonov(stack: DpcStack, config: SolverConfig) -> ReconstructionResult:
    ws = _Workspace.build(stack)
    alpha = resolve_alpha(stack, config)
    phi = ifft2(ws.atb / (ws.sum_k2 + alpha))
    _check_finite("tikhonov", phi, 0)
    return ReconstructionResult(
        phi=phi, iterations_run=1,
        residual_trace=[_rel_change(phi, np.zeros_like(phi))],
        config=config, alpha=alpha,
    )


def solve_iso_dpc(stack: DpcStack, config: SolverConfig) -> ReconstructionResult:
    ws = _Workspace.build(stack)
    alpha = resolve_alpha(stack, config)
    beta = 2.0 * alpha if config.beta is None else float(config.beta)
    gauss = gaussian_kernel_spectrum(stack.shape, config.iso_gauss_sigma)
    denom = ws.sum_k2 + alpha * ws.Dsq + beta * (gauss * gauss) + config.eta
    phi = ifft2(ws.atb / denom)
    _check_finite("iso_dpc", phi, 0)
    return ReconstructionResult(
        phi=phi, iterations_run=1,
        residual_trace=[_rel_change(phi, np.zeros_like(phi))],
        config=config, alpha=alpha,
    )


def _shrink_pair(gx: np.ndarray, gy: np.ndarray, threshold: float, tv_mode: str):
    if tv_mode == "isotropic":
        return shrink_iso(gx, gy, threshold)
    return shrink_aniso(gx, threshold), shrink_aniso(gy, threshold)


def _hqs_loop(
    stack: DpcStack,
    config: SolverConfig,
    data_num: np.ndarray,
    denom_of_alpha0,
    keep_history: bool,
    method: str,
    alpha: float,
) -> ReconstructionResult:
    """Shared half-quadratic continuation for tv_dpc and l2_retinex.

    ``data_num`` is the constant data part of the update numerator;
    ``denom_of_alpha0`` maps the current splitting weight to the full
    spectral denominator.
    """
    ws = _Workspace.build(stack)
    alpha0 = alpha if config.alpha0_init is None else config.alpha0_init
    if alpha0 > config.alpha0_max:
        raise ValueError("continuation start exceeds alpha0_max")
    phi = np.zeros(stack.shape.array_shape)
    trace: list[float] = []
    history: list[dict] | None = [] if keep_history else None
    iterations = 0
    while alpha0 < config.alpha0_max:
        gx, gy = grad(phi)
        Gx, Gy = _shrink_pair(gx, gy, alpha / alpha0, config.tv_mode)
        num = data_num + alpha0 * (np.conj(ws.Dx) * fft2(Gx) + np.conj(ws.Dy) * fft2(Gy))
        phi_new = ifft2(num / denom_of_alpha0(ws, alpha0))
        _check_finite(method, phi_new, iterations)
        trace.append(_rel_change(phi_new, phi))
        if history is not None:
            history.append({"alpha0": alpha0, "G": (Gx, Gy), "phi": phi_new.copy()})
        phi = phi_new
        iterations += 1
        alpha0 *= 2.0
    return ReconstructionResult(
        phi=phi, iterations_run=iterations, residual_trace=trace,
        config=config, alpha=alpha, history=history,
    )


def solve_tv_dpc(
    stack: DpcStack, config: SolverConfig, keep_history: bool = False
) -> ReconstructionResult:
    ws = _Workspace.build(stack)
    alpha = resolve_alpha(stack, config)

    def denom(w: _Workspace, alpha0: float) -> np.ndarray:
        return w.sum_k2 + alpha0 * w.Dsq + config.eta

    return _hqs_loop(stack, config, ws.atb, denom, keep_history, "tv_dpc", alpha)


def solve_l2_retinex(
    stack: DpcStack, config: SolverConfig, keep_history: bool = False
) -> ReconstructionResult:
    ws = _Workspace.build(stack)
    alpha = resolve_alpha(stack, config)
    data_num = ws.Dsq * ws.atb

    def denom(w: _Workspace, alpha0: float) -> np.ndarray:
        return w.Dsq * (w.sum_k2 + alpha0) + config.eta

    return _hqs_loop(stack, config, data_num, denom, keep_history, "l2_retinex", alpha)


# Quadratic split weight of the Bregman scheme.  The continuation start
# used by the half-quadratic methods is a poor fit here (it would tie
# the shrinkage threshold to 1); the scheme runs with a constant unit
# weight.
L1_SPLIT_WEIGHT = 1.0


def solve_l1_retinex(
    stack: DpcStack, config: SolverConfig, keep_history: bool = False
) -> ReconstructionResult:
    ws = _Workspace.build(stack)
    alpha = resolve_alpha(stack, config)
    alpha0 = L1_SPLIT_WEIGHT
    gamma, gamma0 = config.gamma, config.gamma0
    n_img = stack.n_images
    h, w = stack.shape.array_shape
    D = (ws.Dx, ws.Dy)

    grad_s = np.empty((n_img, 2, h, w))
    for n in range(n_img):
        grad_s[n, 0], grad_s[n, 1] = grad(stack.images[n])

    psi = np.zeros((n_img, 2, h, w))
    b = np.zeros_like(psi)
    G = np.zeros((2, h, w))
    g = np.zeros_like(G)
    phi = np.zeros((h, w))

    data_num = gamma0 * ws.Dsq * ws.atb
    denom = ws.Dsq * (gamma0 * ws.sum_k2 + alpha0) + config.eta

    trace: list[float] = []
    history: list[dict] | None = [] if keep_history else None
    hgrad = np.empty((n_img, 2, h, w))

    for k in range(config.max_iterations):
        if history is not None:
            history.append({
                "alpha0": alpha0, "gamma0": gamma0,
                "psi": psi.copy(), "b": b.copy(), "G": G.copy(), "g": g.copy(),
            })
        num = data_num.copy()
        for n in range(n_img):
            for v in range(2):
                num += gamma0 * (-1j * ws.K[n]) * np.conj(D[v]) * fft2(psi[n, v] - b[n, v])
        for v in range(2):
            num += alpha0 * np.conj(D[v]) * fft2(G[v] - g[v])
        phi_new = ifft2(num / denom)
        _check_finite("l1_retinex", phi_new, k)
        if history is not None:
            history[-1]["phi"] = phi_new.copy()

        phi_hat = fft2(phi_new)
        for n in range(n_img):
            for v in range(2):
                hgrad[n, v] = ifft2(1j * ws.K[n] * D[v] * phi_hat)

        resid = hgrad - grad_s
        r = resid + b
        if config.tv_mode == "isotropic":
            omega = np.sqrt((r * r).sum(axis=(0, 1)))
            scale = np.maximum(omega - gamma / gamma0, 0.0) / np.where(omega > 0, omega, 1.0)
            psi = r * scale[None, None]
        else:
            psi = shrink_aniso(r, gamma / gamma0)

        gpx, gpy = grad(phi_new)
        G = np.stack(_shrink_pair(gpx + g[0], gpy + g[1], alpha / alpha0, config.tv_mode))

        b = b + resid - psi
        g = g + np.stack((gpx, gpy)) - G

        if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(b)) and np.all(np.isfinite(g))):
            raise SolverDivergence("l1_retinex", k)
        trace.append(_rel_change(phi_new, phi))
        phi = phi_new

    return ReconstructionResult(
        phi=phi, iterations_run=config.max_iterations, residual_trace=trace,
        config=config, alpha=alpha, history=history,
    )


_SOLVER_FNS = {
    "tikhonov": solve_tikhonov,
    "iso_dpc": solve_iso_dpc,
    "tv_dpc": solve_tv_dpc,
    "l2_retinex": solve_l2_retinex,
    "l1_retinex": solve_l1_retinex,
}


def solve(stack: DpcStack, config: SolverConfig, keep_history: bool = False) -> ReconstructionResult:
    """Dispatch on ``config.method``."""
    fn = _SOLVER_FNS[config.method]
    if config.method in ("tikhonov", "iso_dpc"):
        return fn(stack, config)
    return fn(stack, config, keep_history=keep_history)
