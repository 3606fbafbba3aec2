"""Fractional differintegration: Grunwald-Letnikov operators and Oustaloup filters.

Positive orders differentiate, negative orders integrate, order 0 is the identity.
Every operator keeps its own sample history; zero pre-history is equivalent to a
lower terminal at t = 0.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from errors import ConfigurationError, NumericInputError

logger = logging.getLogger(__name__)

MAX_ORDER = 2.0
DEFAULT_MEMORY = 20_000
GROWTH_CHUNK = 4096


def _check_order(alpha: float, name: str = "alpha") -> None:
    if not math.isfinite(alpha) or abs(alpha) > MAX_ORDER:
        raise ConfigurationError(f"order must lie in [-{MAX_ORDER}, {MAX_ORDER}], got {alpha}", name)


def gl_coefficients(alpha: float, n: int) -> np.ndarray:
    """Grunwald-Letnikov weights w_0..w_n of order *alpha*.

    w_0 = 1 and w_j = w_{j-1} * (1 - (alpha + 1) / j), i.e. the signed binomial
    coefficients (-1)^j C(alpha, j).
    """
    _check_order(alpha)
    if n < 0:
        raise ConfigurationError(f"coefficient count must be non-negative, got {n}", "n")
    w = np.empty(n + 1)
    w[0] = 1.0
    if n:
        w[1:] = np.cumprod(1.0 - (alpha + 1.0) / np.arange(1, n + 1))
    return w


class GLDifferintegrator:
    """Grunwald-Letnikov operator of fixed order and step.

    With a finite *mem_len* the history lives in a buffer of twice the memory
    length; each sample is written at two positions so the active window is
    always one contiguous slice and every step is a single dot product. With
    ``mem_len=None`` the history grows with the run and nothing is forgotten.

    Orders 0, -1 and -2 are evaluated exactly with running sums whatever the
    memory length, and positive integer orders only touch their non-zero taps.
    """

    def __init__(self, order: float, h: float, mem_len: int | None = DEFAULT_MEMORY):
        _check_order(order, "order")
        if not h > 0:
            raise ConfigurationError(f"step must be positive, got {h}", "h")
        if mem_len is not None and mem_len < 1:
            raise ConfigurationError(f"memory length must be >= 1, got {mem_len}", "mem_len")
        self.order = float(order)
        self.h = float(h)
        self.mem_len = None if mem_len is None else int(mem_len)
        self.exact = self.order.is_integer() and self.order <= 0
        self._taps = int(self.order) + 1 if self.order.is_integer() and self.order > 0 else None
        self._scale = self.h ** (-self.order)
        self._sums = [0.0, 0.0]
        self.count = 0
        if self.mem_len is None:
            self._size = GROWTH_CHUNK
            self._buf = np.zeros(self._size)
        else:
            self._size = self.mem_len
            self._buf = np.zeros(2 * self.mem_len)
        self._pos = 0
        self._set_weights()

    def _set_weights(self) -> None:
        self.coeffs = gl_coefficients(self.order, self._size - 1)
        self._rev = self.coeffs[::-1].copy()

    def _push(self, x: float) -> np.ndarray:
        """Store *x* and return the active window, oldest first."""
        if self.mem_len is None:
            if self.count == self._size:
                self._buf = np.concatenate([self._buf, np.zeros(self._size)])
                self._size *= 2
                self._set_weights()
            self._buf[self.count] = x
            return self._buf[:self.count + 1]
        i = self._pos
        n = self.mem_len
        self._buf[i] = x
        self._buf[i + n] = x
        self._pos = i + 1 if i + 1 < n else 0
        return self._buf[i + 1 + n - min(self.count + 1, n):i + 1 + n]

    def step(self, x: float) -> float:
        if not math.isfinite(x):
            raise NumericInputError(f"non-finite sample {x!r} fed to order-{self.order} operator")
        window = self._push(x)
        self.count += 1
        if self.exact:
            if self.order == 0.0:
                return x
            self._sums[0] += x
            self._sums[1] += self._sums[0]
            return self._scale * self._sums[int(-self.order) - 1]
        m = window.size if self._taps is None else min(self._taps, window.size)
        return self._scale * float(np.dot(self._rev[self._size - m:], window[window.size - m:]))

    @property
    def history(self) -> np.ndarray:
        """Stored samples, oldest first (at most mem_len of them)."""
        if self.mem_len is None:
            return self._buf[:self.count].copy()
        n = self.mem_len
        window = self._buf[self._pos:self._pos + n]
        return window[n - min(self.count, n):].copy()

    def reset(self) -> None:
        self._buf[:] = 0.0
        self._sums = [0.0, 0.0]
        self._pos = 0
        self.count = 0

    def clone(self) -> GLDifferintegrator:
        return copy.deepcopy(self)

    def __repr__(self) -> str:
        memory = "full" if self.mem_len is None else self.mem_len
        return f"GLDifferintegrator(order={self.order}, h={self.h}, mem_len={memory}, count={self.count})"


def gl_step(op: GLDifferintegrator, x: float) -> float:
    """Push one sample into *op* and return h^-a * sum_j w_j x_{k-j}."""
    return op.step(x)


def gl_compose(outer: float, inner: float, h: float, mem_len: int | None = DEFAULT_MEMORY) -> GLDifferintegrator:
    """Single operator equivalent to D^outer applied after D^inner.

    GL weight sequences multiply as binomial series, so the composition is the
    operator of the summed order with one shared history.
    """
    _check_order(outer, "outer")
    _check_order(inner, "inner")
    total = outer + inner
    if abs(total) > MAX_ORDER:
        raise ConfigurationError(f"composed order {total} exceeds +/-{MAX_ORDER}", "order")
    return GLDifferintegrator(total, h, mem_len)


@dataclass
class OustaloupApprox:
    """Band-limited rational approximation of s^alpha.

    Continuous zeros, poles and gain follow the recursive Oustaloup
    distribution; the discrete realisation is built lazily for a given step.
    """

    alpha: float
    band: tuple[float, float]
    n_cells: int
    zeros: np.ndarray
    poles: np.ndarray
    gain: float
    _h: float | None = field(default=None, repr=False)
    _sos: np.ndarray | None = field(default=None, repr=False)
    _zi: np.ndarray | None = field(default=None, repr=False)

    def frequency_response(self, w: np.ndarray) -> np.ndarray:
        """Continuous-time response H(jw)."""
        _, resp = signal.freqs_zpk(self.zeros, self.poles, self.gain, worN=np.asarray(w, dtype=float))
        return resp

    @property
    def sos(self) -> np.ndarray | None:
        """Second-order sections of the last discretisation, if any."""
        return self._sos

    def discretize(self, h: float) -> None:
        """Tustin realisation at step *h*; resets the filter state."""
        w_low, w_high = self.band
        if not w_high < math.pi / h:
            raise ConfigurationError(
                f"upper band edge {w_high} rad/s is above Nyquist {math.pi / h:.6g} rad/s for h={h}", "band")
        zd, pd, kd = signal.bilinear_zpk(self.zeros, self.poles, self.gain, 1.0 / h)
        self._sos = signal.zpk2sos(zd, pd, kd)
        self._zi = np.zeros((self._sos.shape[0], 2))
        self._h = h

    def reset(self) -> None:
        if self._zi is not None:
            self._zi[:] = 0.0


def oustaloup_design(alpha: float, band: tuple[float, float], n_cells: int) -> OustaloupApprox:
    """Oustaloup approximation of s^alpha over *band* with 2*n_cells+1 zero/pole pairs."""
    if not (0.0 < abs(alpha) <= 1.0):
        raise ConfigurationError(f"Oustaloup order must satisfy 0 < |alpha| <= 1, got {alpha}", "alpha")
    w_low, w_high = band
    if not (0.0 < w_low < w_high):
        raise ConfigurationError(f"band must satisfy 0 < w_low < w_high, got {band}", "band")
    if n_cells < 1:
        raise ConfigurationError(f"n_cells must be >= 1, got {n_cells}", "n_cells")

    ratio = w_high / w_low
    k = np.arange(-n_cells, n_cells + 1)
    span = 2 * n_cells + 1
    zeros = -w_low * ratio ** ((k + n_cells + 0.5 * (1 - alpha)) / span)
    poles = -w_low * ratio ** ((k + n_cells + 0.5 * (1 + alpha)) / span)
    gain = w_high ** alpha
    logger.debug("Oustaloup design alpha=%s band=%s cells=%d", alpha, band, n_cells)
    return OustaloupApprox(alpha=alpha, band=(w_low, w_high), n_cells=n_cells,
                           zeros=zeros, poles=poles, gain=gain)


def oustaloup_step(filt: OustaloupApprox, x: float, h: float) -> float:
    """Advance the discrete Oustaloup filter by one sample."""
    if not math.isfinite(x):
        raise NumericInputError(f"non-finite sample {x!r} fed to Oustaloup filter")
    if filt._h != h:
        filt.discretize(h)
    y, filt._zi = signal.sosfilt(filt._sos, [x], zi=filt._zi)
    return float(y[0])


def fractional_relaxation(alpha: float, lam: float, h: float, n: int, x0: float = 1.0) -> np.ndarray:
    """Solve D^alpha x = -lam x, x(0) = x0, on n steps of size h.

    Implicit Grunwald-Letnikov scheme applied to x - x0 (Caputo sense). Returns
    x_0..x_n. For alpha = 1 this is backward Euler.
    """
    _check_order(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ConfigurationError(f"relaxation order must lie in (0, 1], got {alpha}", "alpha")
    if lam < 0:
        raise ConfigurationError(f"decay rate must be non-negative, got {lam}", "lam")
    if not h > 0:
        raise ConfigurationError(f"step must be positive, got {h}", "h")
    w = gl_coefficients(alpha, n)
    scale = h ** (-alpha)
    dev = np.zeros(n + 1)  # x_k - x0
    x = np.empty(n + 1)
    x[0] = x0
    for k in range(1, n + 1):
        memory = float(np.dot(w[1:k + 1], dev[k - 1::-1]))
        x[k] = (-scale * memory + scale * x0) / (scale + lam)
        dev[k] = x[k] - x0
    return x


def relaxation_energy(x: np.ndarray) -> np.ndarray:
    """Quadratic energy 0.5 x^2 of a relaxation trajectory."""
    return 0.5 * np.asarray(x) ** 2
