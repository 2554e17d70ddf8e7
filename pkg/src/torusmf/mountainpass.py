"""Numerical min-max: paths from 0 to a negative-energy anchor, relaxed downhill.

The pass level is estimated from above by the max-node energy of a discrete
path whose dominant nodes are pushed along the preconditioned descent
direction with a backtracking line search; the near-critical maximizer is
then polished by the Newton solver.  Estimates are always upper bounds of
the discrete min-max level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import ConvergenceError
from .bubble import BubbleParams, bubble_field, default_alpha, required_resolution
from .field import (
    Field,
    TorusSpec,
    from_values,
    lincomb,
    project_mean_zero,
    scaled,
    sobolev_norm_sq,
    solve_poisson_power,
    zero_field,
)
from .functional import constants, energy_value, gradient_h, gradient_norm
from .solver import SolveResult, newton_solve

_RESPACE_NORM_WEIGHT = 1e-3  # regularizes energy-gap respacing on flat stretches


@dataclass
class PathState:
    """Discrete path of mean-zero fields from 0 to the anchor u0."""

    lam: float
    nodes: list[Field]

    def __post_init__(self):
        if len(self.nodes) < 9:
            raise ValueError("path needs at least 9 nodes (8 segments)")
        if float(np.max(np.abs(self.nodes[0].values))) != 0.0:
            raise ValueError("path must start at the zero field")

    @property
    def segments(self) -> int:
        return len(self.nodes) - 1


@dataclass(frozen=True)
class MPResult:
    c_estimate: float
    maximizer: Field
    grad_norm: float
    iterations: int
    converged: bool
    lam: float
    solve: SolveResult | None = None
    path: PathState | None = None


@dataclass
class RelaxInfo:
    max_energies: list[float] = dataclass_field(default_factory=list)
    grad_norm_at_max: float = math.inf
    stalled: bool = False
    sweeps: int = 0


def _interval_check(lam: float, m: int) -> None:
    cst = constants(m)
    if not (cst.threshold_low < lam < cst.threshold_high):
        raise ValueError(
            f"lam={lam} outside the existence interval "
            f"({cst.threshold_low:.6f}, {cst.threshold_high:.6f}) for m={m}"
        )


def _multiple_of_quantum_check(lam: float, m: int) -> None:
    cst = constants(m)
    k = round(lam / cst.Lambda1)
    if k >= 1 and abs(lam - k * cst.Lambda1) <= 1e-9 * cst.Lambda1:
        raise ValueError(f"lam={lam} is an integer multiple of the quantum {cst.Lambda1:.6f}")


def concentration_direction(spec: TorusSpec) -> Field:
    """Unit-norm peak profile: the discrete kernel of (-Lap)^m at the origin.

    This is the grid-scale limit shape of the concentrating family and the
    best max-per-norm concentrator the grid supports.
    """
    delta = np.zeros(spec.shape)
    delta.flat[0] = spec.npoints
    g = solve_poisson_power(project_mean_zero(from_values(spec, delta)), spec.m)
    return scaled(g, 1.0 / math.sqrt(sobolev_norm_sq(g)))


def _descend(u: Field, lam: float, *, stop_energy: float | None, max_iter: int,
             armijo: float = 1e-4) -> tuple[Field, float, bool]:
    """Preconditioned gradient descent with backtracking; returns (u, I(u), hit)."""
    e = energy_value(u, lam)
    step = 1.0
    for _ in range(max_iter):
        if stop_energy is not None and e < stop_energy:
            return u, e, True
        g = gradient_h(u, lam)
        gsq = sobolev_norm_sq(g)
        if gsq < 1e-28:
            break
        s = 2.0 * step
        accepted = False
        while s > 1e-14:
            cand = lincomb(1.0, u, -s, g)
            ec = energy_value(cand, lam)
            if ec <= e - armijo * s * gsq:
                u, e, step, accepted = cand, ec, s, True
                break
            s *= 0.5
        if not accepted:
            break
    hit = stop_energy is not None and e < stop_energy
    return u, e, hit


def find_u0(lam: float, spec: TorusSpec, *, min_energy: float = -1.0,
            min_norm: float = 1.0, max_descent: int = 2000) -> Field:
    """Anchor with I(u0) < min_energy and ||u0|| >= min_norm.

    Tries the glued-profile family first, doubling sigma while the grid
    resolves it.  At desk resolutions those profiles sit on the trivial side
    of the ridge, so the search continues along the grid's own concentration
    direction (scaled peak profile), followed by preconditioned descent.
    Raises ConvergenceError with the achieved floor if the grid's
    negative-energy set is too shallow (happens for lam barely above the
    coercivity threshold on coarse grids).
    """
    _interval_check(lam, spec.m)
    sigma = 2.0
    center = (0.0,) * spec.dim
    while True:
        params = BubbleParams(sigma, default_alpha(sigma), center)
        if spec.n < required_resolution(params):
            break
        u = bubble_field(spec, params)
        if energy_value(u, lam) < min_energy and sobolev_norm_sq(u) >= min_norm**2:
            return u
        sigma *= 2.0

    direction = concentration_direction(spec)
    ts = np.linspace(0.5, 40.0, 160)
    energies = np.array([energy_value(scaled(direction, float(t)), lam) for t in ts])
    below = np.nonzero(energies < min_energy)[0]
    if below.size:
        t = float(ts[below[0]])
        if t >= min_norm:
            return scaled(direction, t)
    u0 = scaled(direction, float(ts[int(np.argmin(energies))]))
    u, e, hit = _descend(u0, lam, stop_energy=min_energy, max_iter=max_descent)
    if not hit:
        raise ConvergenceError(
            f"no anchor below {min_energy} at n={spec.n} (deepest energy found: {e:.4f}); "
            "refine the grid or relax min_energy"
        )
    if sobolev_norm_sq(u) < min_norm**2:
        raise ConvergenceError("anchor found but its norm is below the requested floor")
    return u


def init_path(u0: Field, segments: int, lam: float) -> PathState:
    """Linear path t -> t*u0 sampled at segments+1 equispaced nodes."""
    if segments < 8:
        raise ValueError("at least 8 segments required")
    nodes = [zero_field(u0.spec)]
    nodes += [scaled(u0, i / segments) for i in range(1, segments)]
    nodes.append(u0)
    return PathState(lam=float(lam), nodes=nodes)


def _respace(nodes: list[Field], energies: list[float], lam: float) -> tuple[list[Field], list[float]]:
    """Re-sample the polyline so successive energy gaps equalize.

    Interpolated nodes lie on the current polyline; a small H^m-length term
    keeps the weights positive through energy plateaus.
    """
    p = len(nodes) - 1
    weights = []
    for i in range(p):
        d = lincomb(1.0, nodes[i + 1], -1.0, nodes[i])
        weights.append(abs(energies[i + 1] - energies[i])
                       + _RESPACE_NORM_WEIGHT * math.sqrt(sobolev_norm_sq(d)) + 1e-30)
    cum = np.concatenate([[0.0], np.cumsum(weights)])
    targets = np.linspace(0.0, cum[-1], p + 1)
    new_nodes = [nodes[0]]
    new_energies = [energies[0]]
    for j in range(1, p):
        seg = min(int(np.searchsorted(cum, targets[j], side="right")) - 1, p - 1)
        theta = (targets[j] - cum[seg]) / (cum[seg + 1] - cum[seg])
        node = lincomb(1.0 - theta, nodes[seg], theta, nodes[seg + 1])
        new_nodes.append(node)
        new_energies.append(energy_value(node, lam))
    new_nodes.append(nodes[-1])
    new_energies.append(energies[-1])
    return new_nodes, new_energies


def _midpoint_energy(a: Field, b: Field, lam: float) -> float:
    return energy_value(lincomb(0.5, a, 0.5, b), lam)


_SEGMENT_TS = (0.25, 0.5, 0.75)
_FINE_TS = tuple(float(t) for t in np.geomspace(1.0 / 256.0, 0.5, 8)) + (0.75, 0.875)


def _segment_ts(i: int, nseg: int) -> tuple[float, ...]:
    """Sampling parameters inside segment i; end segments get fine geometric tails."""
    if i == 0:
        return _FINE_TS
    if i == nseg - 1:
        return tuple(1.0 - t for t in _FINE_TS)
    return _SEGMENT_TS


def _segment_crest(a: Field, b: Field, lam: float, ts) -> float:
    return max(energy_value(lincomb(1.0 - t, a, t, b), lam) for t in ts)


def _sampled_supremum(nodes: list[Field], energies: list[float], lam: float):
    """Max of node energies and segment samples; returns (energy, field_or_None, seg).

    field is None when a node already attains the supremum.
    """
    nseg = len(nodes) - 1
    best_e = max(energies)
    best_field = None
    best_seg = -1
    for i in range(nseg):
        for t in _segment_ts(i, nseg):
            cand = lincomb(1.0 - t, nodes[i], t, nodes[i + 1])
            e = energy_value(cand, lam)
            if e > best_e:
                best_e, best_field, best_seg = e, cand, i
    return best_e, best_field, best_seg


def relax_path(path: PathState, sweeps: int, *, initial_step: float = 1.0,
               full_path: bool = False, respace: bool = True) -> tuple[PathState, RelaxInfo]:
    """Descend the dominant nodes of the path; endpoints stay pinned.

    Each sweep first pulls the sampled crest of the path into the node set
    (so the max node honestly tracks the path maximum even when the ridge is
    thin), then line-searches the top-energy node and its two neighbors
    (optionally every interior node), then re-spaces by energy gaps.  Moves
    and re-spacings are accepted only if the sampled crests of the touched
    segments stay below the current max-node energy: otherwise a single
    segment could silently vault the ridge.  Within a sweep, descent and
    re-spacing can only lower the captured max; between sweeps the capture
    may honestly reveal a higher crest hiding inside a segment.
    """
    lam = path.lam
    nodes = list(path.nodes)
    energies = [energy_value(nd, lam) for nd in nodes]
    info = RelaxInfo()
    step = initial_step
    max_nodes = max(3 * len(nodes), 24)

    def capture() -> None:
        _capture_insert(nodes, energies, lam, rounds=3, max_nodes=max_nodes)

    def crest_free(i: int, cand: Field, ceiling: float) -> bool:
        slack = 1e-9 * (1.0 + abs(ceiling))
        nseg = len(nodes) - 1
        left = _segment_crest(nodes[i - 1], cand, lam, _segment_ts(i - 1, nseg))
        if left > ceiling + slack:
            return False
        right = _segment_crest(cand, nodes[i + 1], lam, _segment_ts(i, nseg))
        return right <= ceiling + slack

    for _ in range(sweeps):
        capture()
        # the captured max is the sweep ceiling: descent and re-spacing below
        # are guarded so they can only lower it
        ceiling0 = max(energies)
        imax = int(np.argmax(energies))
        if full_path:
            targets = list(range(1, len(nodes) - 1))
        else:
            targets = [i for i in (imax, imax - 1, imax + 1) if 0 < i < len(nodes) - 1]
        moved = False
        for i in targets:
            g = gradient_h(nodes[i], lam)
            gsq = sobolev_norm_sq(g)
            if gsq < 1e-28:
                continue
            ceiling = max(energies)
            s = 2.0 * step
            while s > 1e-14:
                cand = lincomb(1.0, nodes[i], -s, g)
                ec = energy_value(cand, lam)
                if ec <= energies[i] - 1e-4 * s * gsq and crest_free(i, cand, ceiling):
                    nodes[i], energies[i] = cand, ec
                    step = s
                    moved = True
                    break
                s *= 0.5
        if respace and moved:
            cand_nodes, cand_energies = _respace(nodes, energies, lam)
            ceiling = max(energies) + 1e-12 * (1.0 + abs(max(energies)))
            top_e, _, _ = _sampled_supremum(cand_nodes, cand_energies, lam)
            if top_e <= ceiling:
                nodes, energies = cand_nodes, cand_energies
        if max(energies) > ceiling0 + 1e-9 * (1.0 + abs(ceiling0)):
            raise ArithmeticError("descent raised the max-node energy within a sweep")
        info.max_energies.append(max(energies))
        info.sweeps += 1
        if not moved:
            info.stalled = True
            break
    imax = int(np.argmax(energies))
    info.grad_norm_at_max = gradient_norm(nodes[imax], lam)
    return PathState(lam=lam, nodes=nodes), info


def _path_supremum(path: PathState) -> tuple[Field, float]:
    """Point attaining the sampled path maximum (node or segment sample)."""
    lam = path.lam
    nodes = list(path.nodes)
    energies = [energy_value(nd, lam) for nd in nodes]
    top_e, top_field, _ = _sampled_supremum(nodes, energies, lam)
    if top_field is None:
        imax = int(np.argmax(energies))
        return nodes[imax], float(energies[imax])
    return top_field, float(top_e)


def _capture_insert(nodes: list[Field], energies: list[float], lam: float,
                    rounds: int, max_nodes: int) -> None:
    """Insert sampled crest points as nodes (in place).

    Insertion refines the polyline without changing it as a set, so the
    path supremum cannot increase; the max node just catches up to it.
    When the node count exceeds max_nodes, the lowest interior node is
    pruned, but only if the pruned polyline's sampled supremum stays below
    the current max (pruning creates a new chord).
    """
    for _ in range(rounds):
        top_e, top_field, seg = _sampled_supremum(nodes, energies, lam)
        if top_field is None or top_e <= max(energies) + 1e-9 * (1.0 + abs(top_e)):
            break
        nodes.insert(seg + 1, top_field)
        energies.insert(seg + 1, top_e)
        if len(nodes) > max_nodes:
            interior = range(1, len(nodes) - 1)
            k = min((i for i in interior if i != seg + 1), key=lambda i: energies[i])
            pruned_nodes = nodes[:k] + nodes[k + 1:]
            pruned_energies = energies[:k] + energies[k + 1:]
            top_after, _, _ = _sampled_supremum(pruned_nodes, pruned_energies, lam)
            if top_after <= max(energies) + 1e-9 * (1.0 + abs(top_e)):
                nodes[:] = pruned_nodes
                energies[:] = pruned_energies


def _capture_ridge(path: PathState, rounds: int = 4) -> tuple[PathState, float]:
    """Pull the node sampling up to the sampled path supremum.

    Returns the refined path and its max-node energy, an honest estimate of
    the path sup.
    """
    lam = path.lam
    nodes = list(path.nodes)
    energies = [energy_value(nd, lam) for nd in nodes]
    _capture_insert(nodes, energies, lam, rounds, max_nodes=3 * len(nodes))
    state = PathState(lam=lam, nodes=nodes)
    return state, float(max(energies))


def mountain_pass(lam: float, spec: TorusSpec, tol: float = 1e-8,
                  max_sweeps: int = 400, *, segments: int = 16,
                  chunk: int = 30, u0: Field | None = None,
                  path: PathState | None = None) -> MPResult:
    """Estimate the pass level and polish the maximizer into a solution.

    The path relaxes in chunks; after each chunk the max node is handed to
    the Newton solver.  A polish that collapses to the trivial state just
    means the sampling is still coarse, and relaxation resumes.  converged
    means: the polished field solves the equation to tol (L^2 residual), is
    non-constant, and its gradient norm is below tol.
    """
    _multiple_of_quantum_check(lam, spec.m)
    _interval_check(lam, spec.m)
    if path is None:
        if u0 is None:
            u0 = find_u0(lam, spec)
        path = init_path(u0, segments, lam)
    else:
        path = PathState(lam=float(lam), nodes=list(path.nodes))
    total_sweeps = 0
    best: SolveResult | None = None
    while total_sweeps < max_sweeps:
        path, info = relax_path(path, min(chunk, max_sweeps - total_sweeps))
        total_sweeps += max(info.sweeps, 1)
        candidate, _ = _path_supremum(path)
        solve = newton_solve(candidate, lam, tol=tol)
        nonconstant = math.sqrt(sobolev_norm_sq(solve.field)) > 1e-6
        if solve.converged and nonconstant:
            best = solve
            break
        if best is None:
            best = solve
        if info.stalled:
            break
    path, c_estimate = _capture_ridge(path)
    if best is None:
        maximizer = _path_supremum(path)[0]
    else:
        maximizer = best.field
    grad = best.grad_norm if best is not None else math.inf
    nonconstant = math.sqrt(sobolev_norm_sq(maximizer)) > 1e-6
    converged = bool(best is not None and best.converged and nonconstant and grad <= tol)
    if converged and best is not None:
        # the path crossed the ridge next to this saddle, so its crest is at
        # least the saddle level; report whichever estimate is sharper
        c_estimate = max(c_estimate, best.energy)
    return MPResult(
        c_estimate=c_estimate,
        maximizer=maximizer,
        grad_norm=grad,
        iterations=total_sweeps,
        converged=converged,
        lam=float(lam),
        solve=best,
        path=path,
    )


@dataclass(frozen=True)
class LevelRow:
    lam: float
    c_estimate: float
    grad_norm: float
    sweeps: int
    converged: bool


@dataclass(frozen=True)
class LevelSweepReport:
    rows: list[LevelRow]
    monotonicity_violations: int
    slack: float


def level_sweep(lambda_grid, spec: TorusSpec, tol: float = 1e-8,
                *, sweeps_per_lam: int = 60, segments: int = 16,
                slack: float = 0.02) -> LevelSweepReport:
    """Pass-level estimates over an increasing lam grid with one shared path.

    The anchor is found once at the smallest lam (its energy only decreases
    at larger lam), and each lam re-relaxes the previous path with a fixed
    sweep budget.  Because the energy is pointwise non-increasing in lam,
    warm-started estimates are monotone by construction; the report still
    counts violations beyond the slack.  Each row also carries a polished
    solution, continued from the previous lam's solution where available.
    """
    lams = sorted(float(v) for v in lambda_grid)
    if not lams:
        raise ValueError("empty lam grid")
    for lam in lams:
        _interval_check(lam, spec.m)
    try:
        u0 = find_u0(lams[0], spec)
    except ConvergenceError:
        u0 = find_u0(lams[0], spec, min_energy=-0.05)
    path = init_path(u0, segments, lams[0])
    rows: list[LevelRow] = []
    prev_solution: Field | None = None
    for lam in lams:
        path = PathState(lam=lam, nodes=list(path.nodes))
        used = 0
        while used < sweeps_per_lam:
            path, info = relax_path(path, min(20, sweeps_per_lam - used))
            used += max(info.sweeps, 1)
            if info.stalled:
                break
        path, c_est = _capture_ridge(path)
        guesses = []
        if prev_solution is not None:
            guesses.append(prev_solution)
        guesses.append(_path_supremum(path)[0])
        best: SolveResult | None = None
        for guess in guesses:
            solve = newton_solve(guess, lam, tol=tol)
            if solve.converged and math.sqrt(sobolev_norm_sq(solve.field)) > 1e-6:
                best = solve
                break
            if best is None:
                best = solve
        converged = bool(best is not None and best.converged
                         and math.sqrt(sobolev_norm_sq(best.field)) > 1e-6)
        if converged:
            prev_solution = best.field
        rows.append(LevelRow(lam=lam, c_estimate=c_est,
                             grad_norm=best.grad_norm if best else math.inf,
                             sweeps=used, converged=converged))
    violations = sum(
        1 for a, b in zip(rows, rows[1:])
        if b.c_estimate > a.c_estimate * (1.0 + slack) + 1e-12
    )
    return LevelSweepReport(rows=rows, monotonicity_violations=violations, slack=slack)
