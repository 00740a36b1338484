"""Uniform time grids and the discrete Volterra convolution calculus.

Everything downstream lives on a shared uniform grid over ``[0, T]`` with
composite-trapezoid quadrature.  The causal convolution

    (V_rho v)(t) = integral of rho(t - s) v(s) over s in [0, t]

is discretized as a lower-triangular matrix acting on sampled signals, and
its adjoint is defined as the adjoint of that matrix with respect to the
trapezoid inner product, *not* as a separate quadrature of the transposed
integral.  This makes ``<V u, v> == <u, V* v>`` hold to machine precision,
which the biorthogonality and reconstruction machinery relies on.  The price
is an O(dt) artifact in the adjoint at the two boundary nodes; it washes out
under grid refinement and never couples to signals vanishing at t = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.signal import fftconvolve


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_j = j * dt, j = 0..steps, with steps * dt = horizon."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.steps < 2:
            raise ValueError(f"need at least 2 steps, got {self.steps}")

    @classmethod
    def from_step(cls, horizon: float, dt: float) -> "TimeGrid":
        """Grid with the node count nearest to horizon / dt (at least 2)."""
        if not horizon > 0.0 or not dt > 0.0:
            raise ValueError("horizon and dt must be positive")
        return cls(horizon, max(2, int(round(horizon / dt))))

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    @cached_property
    def weights(self) -> np.ndarray:
        """Composite-trapezoid weights; they sum to the horizon."""
        w = np.full(self.steps + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w


def _as_complex(values, expected_shape, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.complex128)
    if arr.shape != expected_shape:
        raise ValueError(f"{what}: expected shape {expected_shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarSignal:
    """A complex-valued time series sampled on a ``TimeGrid``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "values",
            _as_complex(self.values, (self.grid.steps + 1,), "ScalarSignal"),
        )

    @classmethod
    def from_function(cls, grid: TimeGrid, fn) -> "ScalarSignal":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=np.complex128))


@dataclass(frozen=True, eq=False)
class TraceSignal:
    """A time series of vectors in the observation space G = R^m."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != self.grid.steps + 1 or arr.shape[1] < 1:
            raise ValueError(
                f"TraceSignal: expected shape ({self.grid.steps + 1}, m>=1), got {arr.shape}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return self.values.shape[1]


Signal = ScalarSignal | TraceSignal


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("signals live on different time grids")


def _causal_convolution(rho: np.ndarray, values: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoid quadrature of the causal convolution, zero at t_0.

    ``values`` may be (J+1,) or (J+1, m); the kernel is always scalar.
    """
    r = rho if values.ndim == 1 else rho[:, None]
    full = fftconvolve(r, values, axes=0)[: values.shape[0]]
    out = dt * (full - 0.5 * r * values[0] - 0.5 * rho[0] * values)
    out[0] = 0.0
    return out


def convolve(rho: ScalarSignal, v: Signal) -> Signal:
    """Apply the causal Volterra convolution with kernel ``rho`` to ``v``."""
    _check_same_grid(rho, v)
    out = _causal_convolution(rho.values, v.values, rho.grid.dt)
    return type(v)(v.grid, out)


def convolve_adjoint(rho: ScalarSignal, z: Signal) -> Signal:
    """Adjoint of ``convolve`` under the trapezoid inner product.

    Computed as the conjugate transpose of the discrete convolution matrix
    reweighted by the quadrature weights, so the adjoint identity with
    ``l2_inner`` is exact.  Approximates the anticausal integral of
    conj(rho(s - t)) z(s) over s in [t, T].
    """
    _check_same_grid(rho, z)
    grid = rho.grid
    w = grid.weights
    rbar = np.conj(rho.values)
    y = z.values * (w if z.values.ndim == 1 else w[:, None])
    kernel = rbar[::-1] if y.ndim == 1 else rbar[::-1, None]
    corr = fftconvolve(y, kernel, axes=0)[grid.steps:]
    out = grid.dt * (corr - 0.5 * rbar[0] * y)
    out[0] = 0.5 * grid.dt * (corr[0] - rbar[0] * y[0])
    out /= w if y.ndim == 1 else w[:, None]
    return type(z)(grid, out)


def resolvent_kernel(sigma: ScalarSignal, sigma_prime: ScalarSignal) -> ScalarSignal:
    """Kernel K with (I + V_K)(sigma(0) + V_sigma') = sigma(0) * I.

    Solves sigma(0) K + V_sigma' K = -sigma' by forward substitution on the
    lower-triangular trapezoid system; the operator identity above then holds
    up to an O(dt^2) quadrature defect confined to the diagonal and the first
    column of the composed matrix.
    """
    _check_same_grid(sigma, sigma_prime)
    s0 = sigma.values[0]
    if abs(s0) == 0.0:
        raise ValueError("sigma(0) must be nonzero for the resolvent kernel")
    grid = sigma.grid
    dt = grid.dt
    sp = sigma_prime.values
    J = grid.steps
    K = np.empty(J + 1, dtype=np.complex128)
    K[0] = -sp[0] / s0
    denom = s0 + 0.5 * dt * sp[0]
    for j in range(1, J + 1):
        hist = 0.5 * sp[j] * K[0]
        if j > 1:
            hist += np.dot(sp[j - 1:0:-1], K[1:j])
        K[j] = (-sp[j] - dt * hist) / denom
    return ScalarSignal(grid, K)


def l2_inner(u: Signal, v: Signal) -> complex:
    """Trapezoid approximation of the L2(0,T; G) inner product <u, v>.

    Linear in the first argument, conjugate-linear in the second.
    """
    _check_same_grid(u, v)
    if u.values.shape != v.values.shape:
        raise ValueError("signals have mismatched value shapes")
    prod = u.values * np.conj(v.values)
    if prod.ndim == 2:
        prod = prod.sum(axis=1)
    return complex(np.dot(u.grid.weights, prod))


def l2_norm(u: Signal) -> float:
    return float(np.sqrt(max(l2_inner(u, u).real, 0.0)))


def differentiate(u: Signal) -> Signal:
    """Centered-difference time derivative, second-order one-sided at the ends."""
    if u.grid.steps < 3:
        raise ValueError("grid too coarse to differentiate (need steps >= 3)")
    return type(u)(u.grid, np.gradient(u.values, u.grid.dt, axis=0, edge_order=2))


def h1_norm(u: Signal) -> float:
    """Discrete H1(0,T; G) norm, (||u||^2 + ||u'||^2)^(1/2)."""
    du = differentiate(u)
    return float(np.sqrt(l2_norm(u) ** 2 + l2_norm(du) ** 2))


# ---------------------------------------------------------------------------
# Memory kernels M(t)


class MemoryKernel:
    """Convolution kernel encoding the history dependence of the system."""

    def sample(self, grid: TimeGrid) -> np.ndarray:
        raise NotImplementedError

    def at_zero(self) -> float:
        """M(0), needed for the comparison-exponential growth rate M(0)/2."""
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroKernel(MemoryKernel):
    """No memory: the system reduces to the plain second-order evolution."""

    def sample(self, grid: TimeGrid) -> np.ndarray:
        return np.zeros(grid.steps + 1)

    def at_zero(self) -> float:
        return 0.0


@dataclass(frozen=True)
class ExponentialKernel(MemoryKernel):
    """M(t) = beta * exp(-alpha * t)."""

    beta: float
    alpha: float

    def sample(self, grid: TimeGrid) -> np.ndarray:
        return self.beta * np.exp(-self.alpha * grid.nodes)

    def at_zero(self) -> float:
        return self.beta


@dataclass(frozen=True)
class PolynomialKernel(MemoryKernel):
    """M(t) = sum_k coefficients[k] * t^k."""

    coefficients: tuple

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if not self.coefficients:
            raise ValueError("polynomial kernel needs at least one coefficient")

    def sample(self, grid: TimeGrid) -> np.ndarray:
        return np.polynomial.polynomial.polyval(grid.nodes, self.coefficients)

    def at_zero(self) -> float:
        return self.coefficients[0]


@dataclass(frozen=True, eq=False)
class SampledKernel(MemoryKernel):
    """Kernel given by samples on the grid it will be used with.

    ``m0`` must be supplied explicitly when the comparison exponential is
    needed; the sample at t = 0 is not trusted as a stand-in for M(0).
    """

    values: np.ndarray
    m0: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1:
            raise ValueError("sampled kernel values must be one-dimensional")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def sample(self, grid: TimeGrid) -> np.ndarray:
        if self.values.shape != (grid.steps + 1,):
            raise ValueError(
                f"sampled kernel has {self.values.shape[0]} samples, grid has {grid.steps + 1} nodes"
            )
        return self.values

    def at_zero(self) -> float:
        if self.m0 is None:
            raise ValueError("sampled kernel used without a declared M(0)")
        return self.m0


# ---------------------------------------------------------------------------
# Source modulations sigma(t)


class SourceModulation:
    """Time modulation of the unknown source, with an analytic derivative."""

    def sample(self, grid: TimeGrid) -> ScalarSignal:
        raise NotImplementedError

    def sample_derivative(self, grid: TimeGrid) -> ScalarSignal:
        raise NotImplementedError

    def at_zero(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantModulation(SourceModulation):
    value: float

    def sample(self, grid):
        return ScalarSignal(grid, np.full(grid.steps + 1, self.value, dtype=np.complex128))

    def sample_derivative(self, grid):
        return ScalarSignal(grid, np.zeros(grid.steps + 1, dtype=np.complex128))

    def at_zero(self):
        return self.value


@dataclass(frozen=True)
class ExponentialModulation(SourceModulation):
    """sigma(t) = exp(rate * t)."""

    rate: float

    def sample(self, grid):
        return ScalarSignal(grid, np.exp(self.rate * grid.nodes))

    def sample_derivative(self, grid):
        return ScalarSignal(grid, self.rate * np.exp(self.rate * grid.nodes))

    def at_zero(self):
        return 1.0


@dataclass(frozen=True)
class AffineModulation(SourceModulation):
    """sigma(t) = offset + slope * t."""

    offset: float
    slope: float

    def sample(self, grid):
        return ScalarSignal(grid, self.offset + self.slope * grid.nodes)

    def sample_derivative(self, grid):
        return ScalarSignal(grid, np.full(grid.steps + 1, self.slope, dtype=np.complex128))

    def at_zero(self):
        return self.offset


@dataclass(frozen=True, eq=False)
class SampledModulation(SourceModulation):
    """Modulation given by samples; derivative falls back to finite differences."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size < 4:
            raise ValueError("sampled modulation needs a 1-d array of at least 4 samples")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def _check(self, grid):
        if self.values.shape != (grid.steps + 1,):
            raise ValueError(
                f"sampled modulation has {self.values.shape[0]} samples, grid has {grid.steps + 1} nodes"
            )

    def sample(self, grid):
        self._check(grid)
        return ScalarSignal(grid, self.values)

    def sample_derivative(self, grid):
        # One extra O(dt^2) error relative to the closed-form modulations.
        self._check(grid)
        return ScalarSignal(grid, np.gradient(self.values, grid.dt, edge_order=2))

    def at_zero(self):
        return float(self.values[0])
