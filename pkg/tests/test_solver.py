"""Newton-Krylov solver, continuation, multistart."""

import math

import numpy as np
import pytest

from torusmf import (
    SingularHessianError,
    concentration,
    continuation,
    el_residual_norm,
    mountain_pass,
    multi_start,
    newton_solve,
    project_mean_zero,
    scaled,
    shift,
    smallest_hessian_eigenvalue,
    sobolev_norm_sq,
    zero_field,
)
from torusmf.functional import _normalized_exp_weight

from conftest import cos_mode, smooth_field

PI = math.pi


@pytest.fixture(scope="module")
def saddle32(spec32):
    """Converged nonconstant solution at lam=14 on the coarse grid."""
    res = mountain_pass(14.0, spec32, tol=1e-10, max_sweeps=300)
    assert res.converged
    return res.solve


class TestNewton:
    def test_trivial_root_is_instant(self, spec32):
        out = newton_solve(zero_field(spec32), 7.0, tol=1e-12)
        assert out.converged and out.iterations <= 1
        assert out.residual_l2 <= 1e-14

    def test_polish_from_mountain_pass(self, saddle32):
        assert saddle32.residual_l2 <= 1e-10
        assert math.sqrt(sobolev_norm_sq(saddle32.field)) > 0.1

    def test_grad_norm_below_residual_scale(self, saddle32):
        assert saddle32.grad_norm <= 10 * max(saddle32.residual_l2, 1e-300)

    def test_singular_hessian_at_bifurcation(self, spec32):
        lam = 2 * PI**2  # threshold: first Fourier modes are null directions
        guess = scaled(project_mean_zero(cos_mode(spec32)), 1e-2)
        with pytest.raises(SingularHessianError) as err:
            newton_solve(guess, lam, tol=1e-12)
        assert abs(err.value.eigenvalue) < 1e-4

    def test_smallest_eigenvalue_probe(self, spec32):
        low = smallest_hessian_eigenvalue(zero_field(spec32), 2 * PI**2)
        assert abs(low) <= 1e-8
        low_sub = smallest_hessian_eigenvalue(zero_field(spec32), 10.0)
        assert low_sub == pytest.approx(1 - 2 * 10.0 / (4 * PI**2), abs=1e-6)

    def test_quadratic_convergence_at_nondegenerate_root(self, spec32):
        # the trivial state below the threshold is a nondegenerate root;
        # run one Newton step at a time and check r_{k+1} <= C r_k^2
        lam = 5.0
        u = smooth_field(spec32, 3, norm=1.0)
        residuals = [el_residual_norm(u, lam)]
        for _ in range(8):
            out = newton_solve(u, lam, tol=1e-300, max_iter=1)
            u = out.field
            residuals.append(out.residual_l2)
            if residuals[-1] < 1e-13:
                break
        tail = [(residuals[i + 1], residuals[i]) for i in range(len(residuals) - 1)]
        ratios = [nxt / prev**2 for nxt, prev in tail[-3:] if prev > 1e-13]
        assert ratios and max(ratios) < 1e3

    def test_negative_lam_rejected(self, spec32):
        with pytest.raises(ValueError):
            newton_solve(zero_field(spec32), -2.0)


class TestSolutionIdentities:
    def test_pairing_identity(self, saddle32):
        # pairing the equation with u: ||u||^2 = lam * integral(W u)
        u = saddle32.field
        weight = _normalized_exp_weight(u)
        norm_sq = sobolev_norm_sq(u)
        paired = saddle32.lam * float((weight * u.values).mean())
        assert norm_sq == pytest.approx(paired, rel=1e-6)
        assert norm_sq <= saddle32.lam * float(u.values.max()) + 1e-6

    def test_translate_solution_still_solves(self, saddle32):
        for tau in [(3, 0), (11, 7)]:
            moved = shift(saddle32.field, tau)
            assert el_residual_norm(moved, saddle32.lam) <= 1e-10


class TestContinuation:
    def test_branch_up_to_19(self, saddle32, spec32):
        branch = continuation(saddle32, 19.0, 0.5, tol=1e-10)
        assert branch.termination == "reached_end"
        assert all(r.converged for r in branch.results)
        lams = [r.lam for r in branch.results]
        assert lams == sorted(lams)
        assert all(math.sqrt(sobolev_norm_sq(r.field)) > 0.1 for r in branch.results)

    def test_downward_blowup_guard(self, saddle32, spec32):
        # a tight amplitude cap must stop the branch on its way down
        branch = continuation(saddle32, 12.6, 0.25, blowup_cap=4.0, tol=1e-10)
        assert branch.termination in ("blow_up", "newton_failure")
        if branch.termination == "blow_up":
            last = branch.results[-1]
            assert float(np.max(np.abs(last.field.values))) > 4.0
            report = concentration(last.field, last.lam)
            assert report.nearest_N >= 1

    def test_invalid_step(self, saddle32):
        with pytest.raises(ValueError, match="invalid step"):
            continuation(saddle32, 19.0, 0.0)

    def test_needs_converged_start(self, saddle32, spec32):
        from torusmf import SolveResult

        bad = SolveResult(field=zero_field(spec32), lam=14.0, residual_l2=1.0,
                          grad_norm=1.0, energy=0.0, iterations=0, converged=False)
        with pytest.raises(ValueError):
            continuation(bad, 19.0, 0.5)


class TestMultiStart:
    def test_only_trivial_at_small_lam(self, spec32):
        results = multi_start(1.0, spec32, 10, 0)
        converged = [r for r in results if r.converged]
        assert converged
        assert all(math.sqrt(sobolev_norm_sq(r.field)) <= 1e-8 for r in converged)

    def test_nontrivial_found_at_14(self, spec32):
        results = multi_start(14.0, spec32, 20, 0)
        nontrivial = [r for r in results
                      if r.converged and math.sqrt(sobolev_norm_sq(r.field)) > 1e-6]
        assert nontrivial

    def test_deterministic(self, spec32):
        a = multi_start(5.0, spec32, 3, 7)
        b = multi_start(5.0, spec32, 3, 7)
        assert len(a) == len(b)
        for x, y in zip(a, b):
            assert np.array_equal(x.field.values, y.field.values)
            assert x.residual_l2 == y.residual_l2

    def test_dedup_collapses_translations(self, saddle32, spec32):
        from torusmf.solver import _same_modulo_translation

        assert _same_modulo_translation(saddle32.field, shift(saddle32.field, (5, 9)))
        assert not _same_modulo_translation(saddle32.field, scaled(saddle32.field, 2.0))

    def test_rejects_no_seeds(self, spec32):
        with pytest.raises(ValueError):
            multi_start(1.0, spec32, 0, 0)
