"""Histogram construction, nonlinear density fitting, and derived estimates.

The fitting target is a density-normalized histogram of block intervals.
The model is the closed-form ``k``-round density
:func:`blocktime.distributions.approx_pdf_k`; because that formula is not
normalized for ``k >= 2``, fits can run in three amplitude modes:

* ``raw``    — two parameters (location, scale), formula used literally;
* ``free``   — three parameters, a multiplicative amplitude absorbs the
  normalization (default);
* ``renorm`` — two parameters, model divided by its numeric integral.

The optimizer is a damped least-squares (Levenberg–Marquardt style) loop
with a numerically differenced Jacobian and a lower bound keeping the scale
positive, falling back to a derivative-free simplex search if derivatives
misbehave.  From the fitted (location, scale) the per-hop transfer time and
broadcast frequencies are derived, with an optional two-thirds-quorum
correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields as dataclass_fields

import numpy as np
from scipy import optimize

from . import kv
from .distributions import (
    GumbelParams,
    adjusted_skewness,
    approx_norm_constant,
    approx_pdf_k,
    check_order,
)
from .errors import (
    DegenerateHistogramError,
    DomainError,
    FitError,
    QuadratureError,
)

__all__ = [
    "Histogram",
    "FitOptions",
    "FitResult",
    "TransferEstimate",
    "build_histogram",
    "freedman_diaconis_width",
    "moment_init",
    "fit_fk",
    "derive_transfer_time",
    "quorum_adjust",
    "round_sig",
    "ks_statistic",
    "sample_skewness",
    "approx_model_cdf",
]

_AMPLITUDE_MODES = ("raw", "free", "renorm")

# Ceiling on bin count for explicit-width binning; widths small enough to
# exceed it are presumed to be unit mistakes.
_MAX_BINS = 1_000_000


# ---------------------------------------------------------------------------
# Histogram
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Histogram:
    """Density-normalized binned samples.

    ``densities[b] = counts[b] / (total_count * width[b])``, so the
    densities integrate to exactly 1 over the binned range.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    densities: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        densities = np.asarray(self.densities, dtype=np.float64)
        if edges.ndim != 1 or edges.size < 2:
            raise DomainError("bin_edges must hold at least two edges")
        if not np.isfinite(edges).all():
            raise DomainError("bin_edges must be finite")
        if not (np.diff(edges) > 0.0).all():
            raise DomainError("bin_edges must be strictly increasing")
        if counts.shape != (edges.size - 1,) or (counts < 0).any():
            raise DomainError("counts must be non-negative, one per bin")
        if counts.sum() < 1:
            raise DomainError("histogram must contain at least one sample")
        if densities.shape != counts.shape:
            raise DomainError("densities must align with counts")
        if not np.isfinite(densities).all() or (densities < 0.0).any():
            raise DomainError("densities must be finite and non-negative")
        mass = float(np.sum(densities * np.diff(edges)))
        if abs(mass - 1.0) > 1e-9:
            raise DomainError(f"densities must integrate to 1, got {mass!r}")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "densities", densities)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())


def _check_samples(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size < 2:
        raise DomainError("need at least 2 samples to build a histogram")
    if not np.isfinite(arr).all():
        raise DomainError("samples must be finite")
    return arr


def freedman_diaconis_width(samples) -> float:
    """Freedman–Diaconis bin width ``2*IQR/n^(1/3)``.

    Falls back to ``2*std/n^(1/3)`` when the interquartile range vanishes;
    raises if the samples carry no spread at all.
    """
    arr = _check_samples(samples)
    q75, q25 = np.percentile(arr, [75.0, 25.0])
    width = 2.0 * (q75 - q25) / arr.size ** (1.0 / 3.0)
    if width <= 0.0:
        width = 2.0 * float(np.std(arr)) / arr.size ** (1.0 / 3.0)
    if width <= 0.0:
        raise DomainError("samples are degenerate (zero spread)")
    return float(width)


def build_histogram(samples, bins="auto", origin=None) -> Histogram:
    """Bin samples into a density-normalized :class:`Histogram`.

    ``bins`` may be ``"auto"`` (Freedman–Diaconis width), an integer bin
    count over the sample range, or a float bin width.  With a float width,
    ``origin`` fixes the left edge of the grid (default: ``min(samples)``
    snapped down to a multiple of the width).
    """
    arr = _check_samples(samples)
    lo = float(arr.min())
    hi = float(arr.max())
    if isinstance(bins, str):
        if bins != "auto":
            raise DomainError(f"bins must be 'auto', an int count, or a float width; got {bins!r}")
        width = freedman_diaconis_width(arr)
        return build_histogram(arr, bins=width, origin=origin)
    if isinstance(bins, bool):
        raise DomainError("bins must be an int count or float width, not a bool")
    if isinstance(bins, (int, np.integer)):
        count = int(bins)
        if count < 1:
            raise DomainError(f"bin count must be >= 1, got {count}")
        if hi <= lo:
            raise DomainError("all samples equal; bin-count mode needs spread")
        if origin is not None:
            raise DomainError("origin applies only to width-based binning")
        counts, edges = np.histogram(arr, bins=count)
    elif isinstance(bins, (float, np.floating)):
        width = float(bins)
        if not math.isfinite(width) or width <= 0.0:
            raise DomainError(f"bin width must be finite and > 0, got {bins!r}")
        if origin is None:
            start = math.floor(lo / width) * width
        else:
            start = float(origin)
            if not math.isfinite(start):
                raise DomainError("origin must be finite")
            if start > lo:
                raise DomainError(f"origin {start} exceeds smallest sample {lo}")
        n_bins = max(1, math.ceil((hi - start) / width))
        if hi >= start + n_bins * width:
            n_bins += 1
        if n_bins > _MAX_BINS:
            raise DomainError(f"width {width} would create {n_bins} bins (cap {_MAX_BINS})")
        edges = start + width * np.arange(n_bins + 1, dtype=np.float64)
        counts, edges = np.histogram(arr, bins=edges)
    else:
        raise DomainError(f"bins must be 'auto', an int count, or a float width; got {bins!r}")
    widths = np.diff(edges)
    densities = counts / (arr.size * widths)
    return Histogram(bin_edges=edges, counts=counts, densities=densities)


def moment_init(hist: Histogram, k) -> GumbelParams:
    """Method-of-moments starting point: location ``mean/k``, scale ``std/sqrt(k)``."""
    k = check_order(k)
    mass = hist.densities * hist.widths
    centers = hist.centers
    mean = float(np.sum(mass * centers))
    var = float(np.sum(mass * (centers - mean) ** 2))
    if var <= 0.0:
        raise DegenerateHistogramError("histogram has zero spread; cannot initialize")
    return GumbelParams(mean / k, math.sqrt(var / k))


# ---------------------------------------------------------------------------
# Fit options / result
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitOptions:
    """Optimizer and model-handling knobs for :func:`fit_fk`.

    ``gtol`` bounds the scaled first-order optimality measure (cosine of the
    angle between the residual vector and the Jacobian columns, the classic
    least-squares criterion); a fit reports ``converged=True`` only when the
    measure is at or below it.  ``ftol`` is the relative cost improvement
    under which iteration stops.  ``poisson_weights`` switches the loss from
    plain density residuals to residuals scaled by inverse Poisson standard
    errors of the bin counts.
    """

    amplitude: str = "free"
    max_iter: int = 200
    gtol: float = 1e-6
    ftol: float = 1e-12
    damping0: float = 1e-3
    eta_floor: float = 1e-6
    poisson_weights: bool = False
    quad_rel_tol: float = 1e-8

    def __post_init__(self):
        if self.amplitude not in _AMPLITUDE_MODES:
            raise DomainError(
                f"amplitude must be one of {_AMPLITUDE_MODES}, got {self.amplitude!r}"
            )
        if isinstance(self.max_iter, bool) or not isinstance(self.max_iter, int):
            raise DomainError("max_iter must be an integer")
        if self.max_iter < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter}")
        for name in ("gtol", "ftol", "damping0", "eta_floor", "quad_rel_tol"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0.0:
                raise DomainError(f"{name} must be finite and > 0")
            object.__setattr__(self, name, value)
        if not isinstance(self.poisson_weights, bool):
            raise DomainError("poisson_weights must be a bool")

    def to_key_values(self) -> dict[str, str]:
        """Serialize to the documented key-value text mapping."""
        return {f.name: kv.fmt_value(getattr(self, f.name)) for f in dataclass_fields(self)}

    @classmethod
    def from_key_values(cls, mapping) -> "FitOptions":
        """Inverse of :meth:`to_key_values`; unknown keys are rejected."""
        known = {f.name: f.type for f in dataclass_fields(cls)}
        kwargs = {}
        for key, raw in dict(mapping).items():
            if key not in known:
                raise DomainError(f"unknown fit option {key!r}")
            if key == "amplitude":
                kwargs[key] = raw
            elif key == "max_iter":
                kwargs[key] = int(raw)
            elif key == "poisson_weights":
                if raw not in ("true", "false"):
                    raise DomainError(f"poisson_weights must be true/false, got {raw!r}")
                kwargs[key] = raw == "true"
            else:
                kwargs[key] = float(raw)
        return cls(**kwargs)


@dataclass(frozen=True)
class FitResult:
    """Best-fit parameters plus convergence diagnostics.

    ``cost_history`` lists the accepted-step costs starting from the
    initial point; it is non-increasing by construction.  ``grad_norm`` is
    the scaled first-order optimality measure at exit (see
    :class:`FitOptions`); ``converged`` is true only when it met the fit's
    ``gtol``.
    """

    mu_hat: float
    eta_hat: float
    amplitude_hat: float | None
    k: int
    residual_ss: float
    iterations: int
    converged: bool
    grad_norm: float
    cost_history: tuple[float, ...]

    def __post_init__(self):
        if not (math.isfinite(self.mu_hat) and math.isfinite(self.eta_hat)):
            raise DomainError("fitted parameters must be finite")
        if self.eta_hat <= 0.0:
            raise DomainError(f"fitted scale must be > 0, got {self.eta_hat}")
        if self.residual_ss < 0.0:
            raise DomainError("residual sum of squares must be >= 0")
        history = tuple(float(c) for c in self.cost_history)
        if any(b > a for a, b in zip(history, history[1:])):
            raise DomainError("cost_history must be non-increasing")
        object.__setattr__(self, "cost_history", history)

    def params(self) -> GumbelParams:
        return GumbelParams(self.mu_hat, self.eta_hat)

    def to_key_values(self) -> dict[str, str]:
        """Serialize to the documented key-value text mapping."""
        return {
            "mu_hat": kv.fmt_value(self.mu_hat),
            "eta_hat": kv.fmt_value(self.eta_hat),
            "amplitude_hat": kv.fmt_value(self.amplitude_hat),
            "k": kv.fmt_value(self.k),
            "residual_ss": kv.fmt_value(self.residual_ss),
            "iterations": kv.fmt_value(self.iterations),
            "converged": kv.fmt_value(self.converged),
            "grad_norm": kv.fmt_value(self.grad_norm),
        }


# ---------------------------------------------------------------------------
# Damped least squares
# ---------------------------------------------------------------------------


def _first_order_measure(jac, f, grad, fnorm_floor) -> float:
    fnorm = max(float(np.linalg.norm(f)), fnorm_floor)
    if fnorm == 0.0:
        return 0.0
    col_norms = np.linalg.norm(jac, axis=0)
    denom = fnorm * np.where(col_norms > 0.0, col_norms, 1.0)
    return float(np.max(np.abs(grad) / denom))


def _numeric_jacobian(residual_fn, x, f0, lower):
    jac = np.empty((f0.size, x.size), dtype=np.float64)
    for j in range(x.size):
        step = 1e-7 * max(abs(x[j]), 1e-8)
        x_step = x.copy()
        x_step[j] += step
        x_step = np.maximum(x_step, lower)
        actual = x_step[j] - x[j]
        if actual == 0.0:
            x_step[j] = x[j] + step
            actual = step
        jac[:, j] = (residual_fn(x_step) - f0) / actual
    return jac


def _levenberg_marquardt(residual_fn, x0, lower, options: FitOptions, fnorm_floor=0.0):
    x = np.maximum(np.asarray(x0, dtype=np.float64), lower)
    f = residual_fn(x)
    if not np.isfinite(f).all():
        raise FitError("initial residuals are not finite")
    cost = float(f @ f)
    history = [cost]
    lam = options.damping0
    converged = False
    measure = math.inf
    iterations = 0
    for iteration in range(1, options.max_iter + 1):
        iterations = iteration
        jac = _numeric_jacobian(residual_fn, x, f, lower)
        if not np.isfinite(jac).all():
            raise FitError("Jacobian is not finite")
        grad = jac.T @ f
        measure = _first_order_measure(jac, f, grad, fnorm_floor)
        if measure <= options.gtol:
            converged = True
            break
        normal = jac.T @ jac
        damping_diag = np.clip(np.diag(normal), 1e-300, None)
        accepted = False
        improvement = 0.0
        for _ in range(60):
            try:
                delta = np.linalg.solve(normal + lam * np.diag(damping_diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_try = np.maximum(x + delta, lower)
            f_try = residual_fn(x_try)
            if np.isfinite(f_try).all():
                cost_try = float(f_try @ f_try)
                if cost_try < cost:
                    improvement = cost - cost_try
                    x, f, cost = x_try, f_try, cost_try
                    history.append(cost)
                    lam = max(lam / 3.0, 1e-14)
                    accepted = True
                    break
            lam *= 4.0
            if lam > 1e14:
                break
        if not accepted:
            break
        if improvement <= options.ftol * max(cost, 1e-300):
            jac = _numeric_jacobian(residual_fn, x, f, lower)
            grad = jac.T @ f
            measure = _first_order_measure(jac, f, grad, fnorm_floor)
            converged = measure <= options.gtol
            break
    else:
        jac = _numeric_jacobian(residual_fn, x, f, lower)
        grad = jac.T @ f
        measure = _first_order_measure(jac, f, grad, fnorm_floor)
        converged = measure <= options.gtol
    return x, cost, history, iterations, converged, measure


def _simplex_fallback(residual_fn, x0, lower, options: FitOptions, fnorm_floor):
    def cost_fn(x):
        f = residual_fn(np.maximum(x, lower))
        if not np.isfinite(f).all():
            return 1e300
        return float(f @ f)

    bounds = [(low if math.isfinite(low) else None, None) for low in lower]
    res = optimize.minimize(
        cost_fn,
        np.maximum(np.asarray(x0, dtype=np.float64), lower),
        method="Nelder-Mead",
        bounds=bounds,
        options={"maxiter": 400 * len(x0), "xatol": 1e-10, "fatol": 1e-14},
    )
    x = np.maximum(res.x, lower)
    initial_x = np.maximum(np.asarray(x0, dtype=np.float64), lower)
    initial_cost = cost_fn(initial_x)
    cost = cost_fn(x)
    if cost > initial_cost:
        x, cost = initial_x, initial_cost  # never report a worse point than the start
    f = residual_fn(x)
    if not np.isfinite(f).all():
        raise FitError("simplex fallback ended at a non-finite residual")
    try:
        jac = _numeric_jacobian(residual_fn, x, f, lower)
        grad = jac.T @ f
        measure = _first_order_measure(jac, f, grad, fnorm_floor)
    except Exception:
        measure = math.inf
    history = [initial_cost] if cost == initial_cost else [initial_cost, cost]
    iterations = int(res.nit)
    return x, cost, history, iterations, measure <= options.gtol, measure


# ---------------------------------------------------------------------------
# fit_fk
# ---------------------------------------------------------------------------


def fit_fk(hist: Histogram, k, init: GumbelParams | None = None,
           options: FitOptions | None = None) -> FitResult:
    """Least-squares fit of the ``k``-round density to a histogram.

    Minimizes the squared difference between bin densities and the model at
    bin centers over (location, scale) — and an amplitude when the mode is
    ``free``.  Deterministic given its inputs.  Non-convergence within the
    iteration budget returns the best point found with ``converged=False``;
    a histogram with too few populated bins raises
    :class:`DegenerateHistogramError`.
    """
    if not isinstance(hist, Histogram):
        raise DomainError("hist must be a Histogram")
    k = check_order(k)
    options = options if options is not None else FitOptions()
    if not isinstance(options, FitOptions):
        raise DomainError("options must be a FitOptions")

    populated = int(np.count_nonzero(hist.counts))
    n_params = 3 if options.amplitude == "free" else 2
    if k >= 3 and populated < 5:
        raise DegenerateHistogramError(
            f"k={k} fit needs >= 5 populated bins, histogram has {populated}"
        )
    if populated < n_params + 1:
        raise DegenerateHistogramError(
            f"{n_params}-parameter fit needs >= {n_params + 1} populated bins, "
            f"histogram has {populated}"
        )

    if init is None:
        init = moment_init(hist, k)
    elif not isinstance(init, GumbelParams):
        raise DomainError("init must be a GumbelParams")

    centers = hist.centers
    dens = hist.densities
    if options.poisson_weights:
        variances = np.maximum(hist.counts, 1) / (hist.n_samples * hist.widths) ** 2
        weights = 1.0 / np.sqrt(variances)
    else:
        weights = np.ones_like(dens)

    mode = options.amplitude

    def model_values(params: GumbelParams, amplitude: float) -> np.ndarray:
        values = approx_pdf_k(centers, k, params)
        if mode == "free":
            return amplitude * values
        if mode == "renorm" and k >= 2:
            return values / approx_norm_constant(k, params, options.quad_rel_tol)
        return values

    def residual_fn(x: np.ndarray) -> np.ndarray:
        try:
            params = GumbelParams(float(x[0]), float(x[1]))
            amplitude = float(x[2]) if mode == "free" else 1.0
            return (model_values(params, amplitude) - dens) * weights
        except (DomainError, QuadratureError):
            return np.full(dens.size, np.inf)

    if mode == "free":
        unit_peak = float(np.max(approx_pdf_k(centers, k, init)))
        amp0 = float(np.max(dens)) / unit_peak if unit_peak > 0.0 else 1.0
        x0 = np.array([init.location, init.scale, amp0])
        lower = np.array([-np.inf, options.eta_floor, 1e-12])
    else:
        x0 = np.array([init.location, init.scale])
        lower = np.array([-np.inf, options.eta_floor])

    # Floor on ||residual|| for the scaled optimality measure: keeps the
    # cosine test meaningful when the fit is numerically exact.
    fnorm_floor = 1e-9 * float(np.max(dens)) * math.sqrt(dens.size)

    try:
        x, cost, history, iterations, converged, measure = _levenberg_marquardt(
            residual_fn, x0, lower, options, fnorm_floor
        )
    except FitError:
        x, cost, history, iterations, converged, measure = _simplex_fallback(
            residual_fn, x0, lower, options, fnorm_floor
        )

    return FitResult(
        mu_hat=float(x[0]),
        eta_hat=float(x[1]),
        amplitude_hat=float(x[2]) if mode == "free" else None,
        k=k,
        residual_ss=cost,
        iterations=iterations,
        converged=converged,
        grad_norm=measure,
        cost_history=tuple(history),
    )


# ---------------------------------------------------------------------------
# Transfer-time derivation and quorum adjustment
# ---------------------------------------------------------------------------


def round_sig(value: float, sig_figs: int = 2) -> float:
    """Round a positive value to ``sig_figs`` significant figures."""
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"round_sig needs a finite positive value, got {value!r}")
    if sig_figs < 1:
        raise DomainError(f"sig_figs must be >= 1, got {sig_figs}")
    digits = sig_figs - 1 - math.floor(math.log10(value))
    return round(value, digits)


@dataclass(frozen=True)
class TransferEstimate:
    """Per-hop transfer time and broadcast frequencies derived from a fit.

    ``delta_t_from_mu`` and ``delta_t_from_eta`` are the exact values of the
    two inversion routes (location-based and scale-based).
    ``delta_t_nominal`` is the location-route value rounded to two
    significant figures — the headline number — and is the basis for the
    reported frequencies: ``broadcast_freq_total = 1/delta_t_nominal`` and
    ``broadcast_freq_per_node = broadcast_freq_total/n_validators``.  The
    exact-route frequencies remain available via :meth:`freq_total_exact`.
    """

    delta_t_from_mu: float
    delta_t_from_eta: float
    delta_t_nominal: float
    broadcast_freq_total: float
    broadcast_freq_per_node: float
    n_validators: int
    quorum_adjusted: bool = False

    def __post_init__(self):
        for name in (
            "delta_t_from_mu",
            "delta_t_from_eta",
            "delta_t_nominal",
            "broadcast_freq_total",
            "broadcast_freq_per_node",
        ):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0.0:
                raise DomainError(f"{name} must be finite and > 0, got {value!r}")
            object.__setattr__(self, name, value)
        if isinstance(self.n_validators, bool) or not isinstance(
            self.n_validators, (int, np.integer)
        ):
            raise DomainError("n_validators must be an integer")
        if int(self.n_validators) < 2:
            raise DomainError("n_validators must be >= 2")
        object.__setattr__(self, "n_validators", int(self.n_validators))
        total = self.broadcast_freq_total
        if abs(total * self.delta_t_nominal - 1.0) > 1e-12:
            raise DomainError("broadcast_freq_total must equal 1/delta_t_nominal")
        if abs(self.broadcast_freq_per_node * self.n_validators - total) > 1e-9 * total:
            raise DomainError(
                "broadcast_freq_per_node must equal broadcast_freq_total/n_validators"
            )
        if not isinstance(self.quorum_adjusted, bool):
            raise DomainError("quorum_adjusted must be a bool")

    def freq_total_exact(self) -> float:
        """Exact location-route frequency ``1/delta_t_from_mu``."""
        return 1.0 / self.delta_t_from_mu

    def freq_per_node_exact(self) -> float:
        """Exact per-node frequency ``1/(n*delta_t_from_mu)``."""
        return 1.0 / (self.n_validators * self.delta_t_from_mu)

    def implied_location(self) -> float:
        """Location recovered from ``delta_t_from_mu``.

        Plain estimates use ``2*dt*N*ln(N)``; quorum-adjusted estimates use
        ``(4*dt/3)*N*ln(N)``.  Both reproduce the originally fitted location
        exactly, which is the consistency check on the adjustment algebra.
        """
        n = self.n_validators
        coeff = (4.0 / 3.0 if self.quorum_adjusted else 2.0) * self.delta_t_from_mu
        return coeff * n * math.log(n)

    def implied_scale(self) -> float:
        """Scale recovered from ``delta_t_from_eta``.

        Plain estimates use ``(pi/sqrt(3))*dt*N``; quorum-adjusted ones use
        ``(2*pi/(3*sqrt(3)))*dt*N``.  Both reproduce the fitted scale.
        """
        n = self.n_validators
        base = math.pi / math.sqrt(3.0)
        coeff = (2.0 / 3.0 * base if self.quorum_adjusted else base) * self.delta_t_from_eta
        return coeff * n

    def two_thirds_location(self) -> float:
        """Location of a quorum-truncated broadcast under this estimate's dt.

        Evaluates ``(2a/3)*N*(ln(N) + ln(2/3))`` with ``a = 2*dt`` taken
        from this estimate (per-hop time as this estimate understands it).
        """
        n = self.n_validators
        return (4.0 * self.delta_t_from_mu / 3.0) * n * (
            math.log(n) + math.log(2.0 / 3.0)
        )


def derive_transfer_time(mu_hat: float, eta_hat: float, n: int) -> TransferEstimate:
    """Invert fitted (location, scale) to a per-hop transfer-time estimate.

    Location route: ``dt = mu_hat/(2*N*ln(N))``.  Scale route:
    ``dt = eta_hat*sqrt(3)/(pi*N)``.  The headline ``delta_t_nominal`` is
    the location route rounded to two significant figures, and the reported
    frequencies follow from it (see :class:`TransferEstimate`).
    """
    mu_hat = float(mu_hat)
    eta_hat = float(eta_hat)
    if not (math.isfinite(mu_hat) and mu_hat > 0.0):
        raise DomainError(f"mu_hat must be finite and > 0, got {mu_hat!r}")
    if not (math.isfinite(eta_hat) and eta_hat > 0.0):
        raise DomainError(f"eta_hat must be finite and > 0, got {eta_hat!r}")
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or int(n) < 2:
        raise DomainError(f"n must be an integer >= 2, got {n!r}")
    n = int(n)
    dt_mu = mu_hat / (2.0 * n * math.log(n))
    dt_eta = eta_hat * math.sqrt(3.0) / (math.pi * n)
    nominal = round_sig(dt_mu, 2)
    total = 1.0 / nominal
    return TransferEstimate(
        delta_t_from_mu=dt_mu,
        delta_t_from_eta=dt_eta,
        delta_t_nominal=nominal,
        broadcast_freq_total=total,
        broadcast_freq_per_node=total / n,
        n_validators=n,
        quorum_adjusted=False,
    )


def quorum_adjust(est: TransferEstimate) -> TransferEstimate:
    """Correct an estimate for consensus stopping at the two-thirds quorum.

    Observed block times cover only two thirds of a full broadcast, so the
    per-hop time implied by a full-broadcast reading understates the true
    one: every transfer-time field is divided by 2/3 and the per-node
    frequency consequently shrinks by 2/3.  Adjusting twice is an error.
    """
    if not isinstance(est, TransferEstimate):
        raise DomainError("est must be a TransferEstimate")
    if est.quorum_adjusted:
        raise DomainError("estimate is already quorum-adjusted")
    factor = 1.5  # 1/(2/3)
    nominal = est.delta_t_nominal * factor
    total = 1.0 / nominal
    return TransferEstimate(
        delta_t_from_mu=est.delta_t_from_mu * factor,
        delta_t_from_eta=est.delta_t_from_eta * factor,
        delta_t_nominal=nominal,
        broadcast_freq_total=total,
        broadcast_freq_per_node=total / est.n_validators,
        n_validators=est.n_validators,
        quorum_adjusted=True,
    )


# ---------------------------------------------------------------------------
# Goodness of fit
# ---------------------------------------------------------------------------


def ks_statistic(samples, cdf) -> float:
    """Sup-norm distance between the empirical CDF of ``samples`` and ``cdf``.

    ``cdf`` must be callable on a float array (or scalars) and monotone
    non-decreasing over the sample points; violations raise a domain error.
    """
    arr = np.sort(np.asarray(samples, dtype=np.float64).reshape(-1))
    if arr.size < 1:
        raise DomainError("ks_statistic needs at least one sample")
    if not np.isfinite(arr).all():
        raise DomainError("samples must be finite")
    try:
        values = np.asarray(cdf(arr), dtype=np.float64)
        if values.shape != arr.shape:
            raise TypeError
    except Exception:
        values = np.array([float(cdf(x)) for x in arr], dtype=np.float64)
    if not np.isfinite(values).all():
        raise DomainError("cdf returned non-finite values")
    if (np.diff(values) < -1e-12).any():
        raise DomainError("cdf is not monotone non-decreasing on the samples")
    if values.min() < -1e-9 or values.max() > 1.0 + 1e-9:
        raise DomainError("cdf values must lie in [0, 1]")
    values = np.clip(values, 0.0, 1.0)
    n = arr.size
    grid = np.arange(n, dtype=np.float64)
    d_plus = float(np.max((grid + 1.0) / n - values))
    d_minus = float(np.max(values - grid / n))
    return max(d_plus, d_minus, 0.0)


def sample_skewness(samples) -> float:
    """Adjusted Fisher–Pearson skewness of at least three samples."""
    arr = np.asarray(samples, dtype=np.float64).reshape(-1)
    if arr.size < 3:
        raise DomainError("sample_skewness needs at least 3 samples")
    if not np.isfinite(arr).all():
        raise DomainError("samples must be finite")
    return adjusted_skewness(arr)


def approx_model_cdf(k, p: GumbelParams, lo: float, hi: float, grid_size: int = 4096):
    """Normalized CDF of the ``k``-round model on a grid, as a callable.

    Integrates :func:`approx_pdf_k` by the trapezoid rule over a grid
    spanning at least ``[lo, hi]`` (widened to capture the distribution
    body) and renormalizes, so the result is a proper monotone CDF usable
    with :func:`ks_statistic` regardless of the formula's raw amplitude.
    """
    k = check_order(k)
    lo = float(lo)
    hi = float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise DomainError("need finite lo < hi for the CDF grid")
    body_lo = k * p.location - 10.0 * k * p.scale
    body_hi = k * p.location + 20.0 * k * p.scale
    if k >= 2:
        body_lo = max(0.0, body_lo)  # formula support is t > 0
    start = min(lo, body_lo)
    stop = max(hi, body_hi)
    if grid_size < 16:
        raise DomainError("grid_size must be >= 16")
    grid = np.linspace(start, stop, grid_size)
    pdf = approx_pdf_k(grid, k, p)
    steps = np.diff(grid)
    cumulative = np.concatenate(
        ([0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * steps))
    )
    total = cumulative[-1]
    if not math.isfinite(total) or total <= 0.0:
        raise DomainError("model has no mass on the CDF grid")
    cumulative /= total

    def cdf(t):
        arr = np.asarray(t, dtype=np.float64)
        out = np.interp(arr, grid, cumulative, left=0.0, right=1.0)
        return float(out) if arr.ndim == 0 else out

    return cdf
