"""Mean-zero scalar fields on the unit flat torus, represented on uniform grids.

The torus has dimension 2m (m = 1 or 2), side length 1 and volume 1.  A field
is identified with its trigonometric interpolant through the FFT, so all the
calculus used elsewhere -- fractional powers of the (negative) Laplacian,
Sobolev seminorms, quadrature of smooth integrands -- is spectral.  Fourier
coefficients follow the series convention f(x) = sum_k c(k) exp(2*pi*i k.x)
with integer wave vectors k in [-n/2, n/2) per axis.

Fields and spectra are immutable after construction; every operation here is
a pure function and safe to call concurrently.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ExpOverflowError

SUPPORTED_ORDERS = (1, 2)
MEAN_ZERO_RTOL = 1e-12
FOUR_PI_SQ = 4.0 * math.pi**2

_EXP_LIMIT = 700.0  # exp() argument beyond which float64 overflows
_MAX_GRID_POINTS = 2**31


@dataclass(frozen=True)
class TorusSpec:
    """Uniform n**(2m) grid on the flat torus of dimension 2m (unit volume)."""

    m: int
    n: int

    @property
    def dim(self) -> int:
        return 2 * self.m

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def npoints(self) -> int:
        return self.n**self.dim


def make_spec(m: int, n: int) -> TorusSpec:
    """Validated grid spec; rejects unsupported order and odd or tiny n."""
    if m not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported order m={m}; supported orders are {SUPPORTED_ORDERS}")
    n = int(n)
    if n % 2 != 0 or n < 8:
        raise ValueError(f"grid size n={n} must be even and >= 8")
    if n ** (2 * m) > _MAX_GRID_POINTS:
        raise ValueError(f"grid of {n}**{2 * m} points is not representable here")
    return TorusSpec(int(m), n)


@dataclass(frozen=True, eq=False)
class Field:
    """Real scalar grid function; values are row-major with axis 0 slowest.

    Construction takes ownership of the value array and freezes it (use
    from_values to keep the caller's array untouched).
    """

    spec: TorusSpec
    values: np.ndarray
    mean_zero: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.spec.shape:
            raise ValueError(f"value array shape {v.shape} does not match grid {self.spec.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite entry in field values")
        if self.mean_zero:
            scale = 1.0 + float(np.max(np.abs(v)))
            if abs(float(v.mean())) > MEAN_ZERO_RTOL * scale:
                raise ValueError("mean_zero flag set but the grid average is not ~0")
        if v.flags.writeable:
            v = v.copy() if not v.flags.owndata else v
            v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_cache", {})


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier coefficients of a real field, in FFT layout (c = fftn(values)/N)."""

    spec: TorusSpec
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.complex128)
        if c.shape != self.spec.shape:
            raise ValueError("coefficient array shape does not match grid")
        # Hermitian symmetry c(-k) = conj(c(k)) is what makes the field real.
        mirrored = np.roll(np.flip(c), shift=(1,) * self.spec.dim, axis=range(self.spec.dim))
        scale = float(np.max(np.abs(c))) + 1.0
        if np.max(np.abs(c - np.conj(mirrored))) > 1e-10 * scale:
            raise ValueError("coefficients violate Hermitian symmetry")
        if c.flags.writeable:
            c = c.copy() if not c.flags.owndata else c
            c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)


def zero_field(spec: TorusSpec) -> Field:
    return Field(spec, np.zeros(spec.shape), mean_zero=True)


def from_values(spec: TorusSpec, values: np.ndarray) -> Field:
    """Field from a raw array (copied); finiteness and shape are checked."""
    v = np.array(values, dtype=np.float64, copy=True)
    if v.size == spec.npoints and v.shape != spec.shape:
        v = v.reshape(spec.shape)
    return Field(spec, v, mean_zero=False)


def project_mean_zero(f: Field) -> Field:
    """Subtract the grid average; the subtracted constant is mean(f)."""
    mean = float(f.values.mean())
    return Field(f.spec, f.values - mean, mean_zero=True)


def lincomb(a: float, f: Field, b: float, g: Field) -> Field:
    _check_same_spec(f, g)
    return Field(f.spec, a * f.values + b * g.values, mean_zero=f.mean_zero and g.mean_zero)


def scaled(f: Field, a: float) -> Field:
    return Field(f.spec, a * f.values, mean_zero=f.mean_zero)


def shift(f: Field, offsets: tuple[int, ...]) -> Field:
    """Translate by whole grid cells (periodic roll); an exact torus symmetry."""
    if len(offsets) != f.spec.dim:
        raise ValueError("one integer offset per axis required")
    rolled = np.roll(f.values, shift=tuple(int(o) for o in offsets), axis=tuple(range(f.spec.dim)))
    return Field(f.spec, rolled, mean_zero=f.mean_zero)


def grid_coordinates(spec: TorusSpec):
    """Sparse meshgrid of coordinates i/n per axis, broadcastable to spec.shape."""
    x = np.arange(spec.n) / spec.n
    return np.meshgrid(*([x] * spec.dim), indexing="ij", sparse=True)


def _check_same_spec(f: Field | Spectrum, g: Field | Spectrum) -> None:
    if f.spec != g.spec:
        raise ValueError(f"grid spec mismatch: {f.spec} vs {g.spec}")


def _require_mean_zero(f: Field, what: str) -> None:
    if f.mean_zero:
        return
    scale = 1.0 + float(np.max(np.abs(f.values)))
    if abs(float(f.values.mean())) > MEAN_ZERO_RTOL * scale:
        raise ValueError(f"{what} requires a mean-zero field; project_mean_zero first")


@functools.lru_cache(maxsize=16)
def _ksq(spec: TorusSpec) -> np.ndarray:
    """|k|^2 over integer wave vectors, FFT layout (Nyquist included as -n/2)."""
    k = np.fft.fftfreq(spec.n, d=1.0 / spec.n)
    axes = np.meshgrid(*([k] * spec.dim), indexing="ij", sparse=True)
    total = np.zeros(spec.shape)
    for a in axes:
        total = total + a**2
    total.flags.writeable = False
    return total


@functools.lru_cache(maxsize=64)
def _multiplier(spec: TorusSpec, s: float) -> np.ndarray:
    """(4 pi^2 |k|^2)**s with the k=0 entry zeroed (mean-zero sector only)."""
    base = FOUR_PI_SQ * _ksq(spec)
    if s >= 0:
        mult = base**s
        mult.flat[0] = 0.0
    else:
        mult = np.zeros(spec.shape)
        np.divide(1.0, base**(-s), out=mult, where=base > 0)
    mult.flags.writeable = False
    return mult


def transform(f: Field) -> Spectrum:
    """Normalized FFT; cached on the field, so repeated use is free."""
    cached = f._cache.get("spectrum")
    if cached is None:
        c = np.fft.fftn(f.values) / f.spec.npoints
        cached = Spectrum(f.spec, c)
        f._cache["spectrum"] = cached
    return cached


def inverse_transform(s: Spectrum) -> Field:
    vals = np.fft.ifftn(s.coefficients * s.spec.npoints)
    out = np.ascontiguousarray(vals.real)
    c0 = abs(complex(s.coefficients.flat[0]))
    mz = c0 <= MEAN_ZERO_RTOL * (1.0 + float(np.max(np.abs(out))))
    return Field(s.spec, out, mean_zero=mz)


def _apply_multiplier(f: Field, mult: np.ndarray) -> np.ndarray:
    c = transform(f).coefficients
    return np.ascontiguousarray(np.fft.ifftn(c * mult * f.spec.npoints).real)


def apply_power_laplacian(f: Field, s: float) -> Field:
    """Fourier multiplier (4 pi^2 |k|^2)**s on a mean-zero field; s >= 0."""
    if s < 0:
        raise ValueError("negative power: use solve_poisson_power instead")
    _require_mean_zero(f, "apply_power_laplacian")
    return Field(f.spec, _apply_multiplier(f, _multiplier(f.spec, float(s))), mean_zero=True)


def solve_poisson_power(f: Field, s: float) -> Field:
    """Inverse of apply_power_laplacian(., s) on mean-zero fields; s > 0."""
    if s <= 0:
        raise ValueError("power must be positive")
    _require_mean_zero(f, "solve_poisson_power")
    return Field(f.spec, _apply_multiplier(f, _multiplier(f.spec, -float(s))), mean_zero=True)


def sobolev_norm_sq(f: Field) -> float:
    """Squared H^m seminorm: sum over k of (4 pi^2 |k|^2)^m |c(k)|^2."""
    _require_mean_zero(f, "sobolev_norm_sq")
    c = transform(f).coefficients
    return float(np.sum(_multiplier(f.spec, float(f.spec.m)) * np.abs(c) ** 2))


def sobolev_inner(f: Field, g: Field) -> float:
    """H^m inner product of two mean-zero fields (real part of the mode sum)."""
    _check_same_spec(f, g)
    _require_mean_zero(f, "sobolev_inner")
    _require_mean_zero(g, "sobolev_inner")
    cf = transform(f).coefficients
    cg = transform(g).coefficients
    return float(np.real(np.sum(_multiplier(f.spec, float(f.spec.m)) * cf * np.conj(cg))))


def integrate(f: Field) -> float:
    """Integral over the unit-volume torus = uniform grid mean (periodic trapezoid)."""
    return float(f.values.mean())


def l2_inner(f: Field, g: Field) -> float:
    _check_same_spec(f, g)
    return float((f.values * g.values).mean())


def l2_norm(f: Field) -> float:
    return math.sqrt(max(l2_inner(f, f), 0.0))


def integrate_exp(f: Field, c: float) -> float:
    """Grid mean of exp(c*f).  Fails loudly on overflow (see ExpOverflowError)."""
    t = c * f.values
    tmax = float(t.max())
    if tmax > _EXP_LIMIT:
        raise ExpOverflowError(tmax)
    return float(np.exp(t).mean())


def log_integrate_exp(f: Field, c: float) -> float:
    """log of the grid mean of exp(c*f), via max-subtraction (never overflows)."""
    t = c * f.values
    tmax = float(t.max())
    return tmax + math.log(float(np.exp(t - tmax).mean()))


def upsample(f: Field, n_new: int) -> Field:
    """Spectral zero-padding onto a finer grid (exact for the trig interpolant)."""
    if n_new < f.spec.n or n_new % 2 != 0:
        raise ValueError("upsample target must be an even n >= current n")
    if n_new == f.spec.n:
        return f
    from scipy.signal import resample

    vals = f.values
    for axis in range(f.spec.dim):
        vals = resample(vals, n_new, axis=axis)
    new_spec = make_spec(f.spec.m, n_new)
    if f.mean_zero:
        vals = vals - vals.mean()
    return Field(new_spec, np.ascontiguousarray(vals), mean_zero=f.mean_zero)


# ---------------------------------------------------------------------------
# PBFLD1 on-disk format: ASCII header, then little-endian float64 in C order.
# ---------------------------------------------------------------------------

_PBFLD_MAGIC = b"PBFLD1"


def write_field(path, f: Field) -> None:
    """Write in the PBFLD1 format (header lines, blank line, raw doubles)."""
    with open(path, "wb") as fh:
        fh.write(_PBFLD_MAGIC + b"\n")
        fh.write(f"m={f.spec.m}\n".encode("ascii"))
        fh.write(f"n={f.spec.n}\n".encode("ascii"))
        fh.write(b"kind=values\n")
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes(order="C"))


def read_field(path) -> Field:
    """Read a PBFLD1 file; returns a Field with mean_zero unset."""
    with open(path, "rb") as fh:
        lines = []
        while True:
            line = fh.readline()
            if not line:
                raise ValueError("truncated PBFLD1 header")
            line = line.rstrip(b"\n")
            if line == b"":
                break
            lines.append(line)
        if len(lines) != 4 or lines[0] != _PBFLD_MAGIC or lines[3] != b"kind=values":
            raise ValueError("not a PBFLD1 values file")
        try:
            m = int(lines[1].decode("ascii").removeprefix("m="))
            n = int(lines[2].decode("ascii").removeprefix("n="))
        except Exception as exc:
            raise ValueError(f"bad PBFLD1 header: {exc}") from exc
        spec = make_spec(m, n)
        raw = fh.read()
    data = np.frombuffer(raw, dtype="<f8", count=-1)
    if data.size != spec.npoints:
        raise ValueError(f"payload has {data.size} doubles, expected {spec.npoints}")
    return from_values(spec, data.astype(np.float64).reshape(spec.shape))
