"""Newton-Krylov solution of the Euler-Lagrange equation, continuation, multistart.

The outer iteration is a damped Newton method on the residual of

    (-Lap)^m u + lam = lam * exp(2m u) / integral(exp(2m u)),

restricted to mean-zero fields.  Inner linear solves use MINRES on the
symmetrized, H^m-preconditioned linearization: with B the spectral square
root of (-Lap)^m, the operator B^-1 H B^-1 equals the identity plus a
compact exponential-weight part, so Krylov iteration counts are essentially
grid-independent.  The preconditioned operator is symmetric but indefinite
near saddle points, which is exactly MINRES territory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh, minres

from .errors import SingularHessianError
from .field import (
    Field,
    TorusSpec,
    _multiplier,
    l2_norm,
    lincomb,
    project_mean_zero,
    sobolev_norm_sq,
)
from .functional import (
    _normalized_exp_weight,
    el_residual,
    energy_value,
    gradient_norm,
)

_SINGULAR_EIG_TOL = 1e-4  # on the preconditioned Hessian, whose spectrum is O(1)


@dataclass(frozen=True)
class SolveResult:
    field: Field
    lam: float
    residual_l2: float
    grad_norm: float
    energy: float
    iterations: int
    converged: bool
    message: str = ""


@dataclass
class Branch:
    """Continuation path in lam: converged solutions plus step bookkeeping."""

    results: list[SolveResult] = dataclass_field(default_factory=list)
    steps: list[float] = dataclass_field(default_factory=list)
    termination: str = "reached_end"


def _half_power_spectral(spec: TorusSpec, arr: np.ndarray, sign: float) -> np.ndarray:
    """Apply (4 pi^2 |k|^2)^(sign*m/2) to a raw array, zeroing the mean mode."""
    mult = _multiplier(spec, sign * spec.m / 2.0)
    return np.fft.ifftn(np.fft.fftn(arr) * mult).real


def _preconditioned_system(u: Field, lam: float):
    """LinearOperator for B^-1 H(u) B^-1 on flattened arrays, plus its rhs.

    B^-1 (-Lap)^m B^-1 is the mean-zero projector, so the operator reduces to
    P0 - 2m lam B^-1 [W v - W mean(W v)] B^-1 acting through two transforms.
    """
    spec = u.spec
    m = spec.m
    weight = _normalized_exp_weight(u)
    shape = spec.shape
    npts = spec.npoints

    def matvec(w_flat: np.ndarray) -> np.ndarray:
        w = w_flat.reshape(shape)
        v = _half_power_spectral(spec, w, -1.0)
        wv = weight * v
        nonlinear = -2.0 * m * lam * (wv - weight * wv.mean())
        # the constant component passes through unchanged: it is invisible to
        # the mean-zero problem and would otherwise fake a null direction
        out = w + _half_power_spectral(spec, nonlinear, -1.0)
        return out.reshape(npts)

    op = LinearOperator((npts, npts), matvec=matvec, dtype=np.float64)
    residual = el_residual(u, lam)
    rhs = -_half_power_spectral(spec, residual.values, -1.0).reshape(npts)
    return op, rhs, residual


def smallest_hessian_eigenvalue(u: Field, lam: float, *, k: int = 1, tol: float = 1e-6) -> float:
    """Lowest eigenvalue of the preconditioned second variation (Lanczos probe).

    The spectrum accumulates at 1 from the high modes; a value near zero
    signals a bifurcation point, a negative one a saddle direction.
    """
    op, _, _ = _preconditioned_system(u, lam)
    vals = eigsh(op, k=k, which="SA", tol=tol, return_eigenvectors=False, maxiter=5000)
    return float(np.min(vals))


def _probe_singular(u: Field, lam: float, context: str) -> None:
    try:
        low = smallest_hessian_eigenvalue(u, lam)
    except Exception:
        return
    if abs(low) < _SINGULAR_EIG_TOL:
        raise SingularHessianError(low)


def newton_solve(guess: Field, lam: float, tol: float = 1e-10, max_iter: int = 30,
                 *, max_inner: int = 600) -> SolveResult:
    """Damped Newton iteration on the Euler-Lagrange residual.

    Convergence means the L^2 residual is below tol (the H^m dual gradient
    norm is then automatically below tol/(2 pi)^m).  A numerically singular
    linearization raises SingularHessianError; other failures come back as a
    non-converged SolveResult.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    u = project_mean_zero(guess)
    spec = u.spec
    message = ""
    converged = False
    iterations = 0
    history: list[float] = []
    probed = False
    for iterations in range(max_iter + 1):
        op, rhs, residual = _preconditioned_system(u, lam)
        res_l2 = l2_norm(residual)
        history.append(res_l2)
        if res_l2 <= tol:
            converged = True
            break
        if iterations == max_iter:
            message = f"max_iter={max_iter} exceeded (residual {res_l2:.3e})"
            break
        if not probed and len(history) >= 8 and history[-1] > 0.02 * history[-6]:
            # geometric stalling is the signature of a (near-)null direction
            # of the linearization, e.g. at a bifurcation point
            probed = True
            _probe_singular(u, lam, "slow progress")
        rtol = min(1e-2, max(res_l2, 0.01 * tol / max(res_l2, tol)))
        w, info = minres(op, rhs, rtol=rtol, maxiter=max_inner)
        if info != 0 or not np.all(np.isfinite(w)):
            _probe_singular(u, lam, "linear solve breakdown")
            message = f"linear solve breakdown (minres info={info})"
            break
        delta = _half_power_spectral(spec, w.reshape(spec.shape), -1.0)
        delta_field = Field(spec, delta - delta.mean(), mean_zero=True)
        step = 1.0
        accepted = False
        while step > 1e-12:
            cand = project_mean_zero(lincomb(1.0, u, step, delta_field))
            cand_res = l2_norm(el_residual(cand, lam))
            if cand_res <= (1.0 - 1e-4 * step) * res_l2:
                u = cand
                accepted = True
                break
            step *= 0.5
        if not accepted:
            _probe_singular(u, lam, "line search stall")
            message = "line search stall"
            break
    res_l2 = l2_norm(el_residual(u, lam))
    return SolveResult(
        field=u,
        lam=float(lam),
        residual_l2=res_l2,
        grad_norm=gradient_norm(u, lam),
        energy=energy_value(u, lam),
        iterations=iterations,
        converged=converged,
        message=message,
    )


def continuation(start: SolveResult, lam_end: float, dlam0: float,
                 *, blowup_cap: float = 12.0, dlam_min: float | None = None,
                 max_steps: int = 500, tol: float = 1e-10) -> Branch:
    """Natural-parameter continuation with adaptive steps and a blow-up guard.

    Steps halve on Newton failure down to dlam_min; the branch stops early
    (termination "blow_up") once max|u| exceeds blowup_cap, leaving the
    offending solution as the endpoint for concentration analysis.
    """
    if not start.converged:
        raise ValueError("continuation must start from a converged solution")
    if dlam0 <= 0:
        raise ValueError("invalid step: dlam0 must be positive")
    if dlam_min is None:
        dlam_min = dlam0 / 1024.0
    direction = math.copysign(1.0, lam_end - start.lam)
    branch = Branch(results=[start])
    if lam_end == start.lam:
        return branch
    lam_cur = start.lam
    dlam = dlam0
    prev = start
    prev2: SolveResult | None = None
    streak = 0
    while len(branch.results) <= max_steps:
        lam_try = lam_cur + direction * dlam
        if (lam_end - lam_try) * direction < 0:
            lam_try = lam_end
        if prev2 is not None and prev.lam != prev2.lam:
            ratio = (lam_try - prev.lam) / (prev.lam - prev2.lam)
            guess = lincomb(1.0 + ratio, prev.field, -ratio, prev2.field)
        else:
            guess = prev.field
        try:
            res = newton_solve(guess, lam_try, tol=tol)
        except SingularHessianError:
            res = None
        if res is not None and res.converged:
            branch.results.append(res)
            branch.steps.append(direction * dlam)
            prev2, prev = prev, res
            lam_cur = lam_try
            if float(np.max(np.abs(res.field.values))) > blowup_cap:
                branch.termination = "blow_up"
                return branch
            if lam_cur == lam_end:
                branch.termination = "reached_end"
                return branch
            streak += 1
            if streak >= 2:
                dlam = min(dlam * 1.4, dlam0 * 4.0)
        else:
            streak = 0
            dlam *= 0.5
            if dlam < dlam_min:
                branch.termination = "newton_failure"
                return branch
    branch.termination = "max_steps"
    return branch


def random_low_mode_field(spec: TorusSpec, rng: np.random.Generator,
                          target_norm: float, max_wavenumber: int = 2) -> Field:
    """Random band-limited mean-zero field scaled to an H^m norm target."""
    raw = rng.standard_normal(spec.shape)
    c = np.fft.fftn(raw)
    k = np.abs(np.fft.fftfreq(spec.n, d=1.0 / spec.n))
    keep = np.ones(spec.shape, dtype=bool)
    for axis in range(spec.dim):
        view = k.reshape([-1 if a == axis else 1 for a in range(spec.dim)])
        keep &= view <= max_wavenumber
    c[~keep] = 0.0
    c.flat[0] = 0.0
    vals = np.fft.ifftn(c).real
    f = Field(spec, vals - vals.mean(), mean_zero=True)
    norm = math.sqrt(sobolev_norm_sq(f))
    if norm == 0.0:
        raise ValueError("degenerate random draw")
    return Field(spec, f.values * (target_norm / norm), mean_zero=True)


def _peak_aligned(values: np.ndarray) -> np.ndarray:
    idx = np.unravel_index(int(np.argmax(values)), values.shape)
    return np.roll(values, shift=tuple(-i for i in idx), axis=tuple(range(values.ndim)))


def _same_modulo_translation(a: Field, b: Field, tol: float = 1e-6) -> bool:
    diff = _peak_aligned(a.values) - _peak_aligned(b.values)
    return math.sqrt(float((diff**2).mean())) <= tol


def _concentration_direction(spec: TorusSpec) -> Field:
    """Unit-norm grid peak profile (the inverse operator applied to a delta)."""
    delta = np.zeros(spec.shape)
    delta.flat[0] = spec.npoints
    vals = _half_power_spectral(spec, _half_power_spectral(spec, delta, -1.0), -1.0)
    f = Field(spec, vals - vals.mean(), mean_zero=True)
    return Field(spec, f.values / math.sqrt(sobolev_norm_sq(f)), mean_zero=True)


def multi_start(lam: float, spec: TorusSpec, n_seeds: int, seed: int,
                *, tol: float = 1e-10, norm_range: tuple[float, float] = (0.1, 3.0),
                dedup: bool = True, directed_fraction: float = 0.25,
                jobs: int = 1) -> list[SolveResult]:
    """Newton solves from deterministic seeds: directed probes plus random draws.

    A quarter of the seeds walk a fixed amplitude ladder along the grid's
    concentration direction (random low-mode fields of moderate norm have
    essentially no overlap with the concentrated solution family, so purely
    random seeding finds only the trivial root); the rest are random
    band-limited fields with H^m norms drawn from norm_range.  Converged
    results are deduplicated modulo grid translations; per-seed failures are
    kept in the list with converged=False.  Solves are independent and run
    on `jobs` threads; results are reduced in seed order, so the output does
    not depend on the degree of parallelism.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    n_directed = int(directed_fraction * n_seeds)
    guesses: list[Field] = []
    if n_directed:
        direction = _concentration_direction(spec)
        for amp in np.geomspace(2.0, 12.0, n_directed):
            guesses.append(Field(spec, float(amp) * direction.values, mean_zero=True))
    sequences = np.random.SeedSequence(seed).spawn(n_seeds - n_directed)
    for child in sequences:
        rng = np.random.default_rng(child)
        guesses.append(random_low_mode_field(spec, rng, rng.uniform(*norm_range)))

    def solve_one(guess: Field) -> SolveResult:
        try:
            return newton_solve(guess, lam, tol=tol)
        except SingularHessianError as exc:
            return SolveResult(
                field=guess, lam=float(lam), residual_l2=math.inf,
                grad_norm=math.inf, energy=energy_value(guess, lam),
                iterations=0, converged=False, message=str(exc),
            )

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(solve_one, guesses))
    else:
        outcomes = [solve_one(guess) for guess in guesses]

    unique: list[SolveResult] = []
    failures: list[SolveResult] = []
    for res in outcomes:
        if not res.converged:
            failures.append(res)
            continue
        if dedup and any(_same_modulo_translation(res.field, kept.field) for kept in unique):
            continue
        unique.append(res)
    return unique + failures
