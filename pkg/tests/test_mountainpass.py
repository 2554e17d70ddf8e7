"""Min-max machinery: anchors, path relaxation, pass levels."""

import math

import numpy as np
import pytest

from torusmf import (
    ConvergenceError,
    PathState,
    energy_value,
    find_u0,
    init_path,
    level_sweep,
    lincomb,
    make_spec,
    mountain_pass,
    relax_path,
    sobolev_norm_sq,
    zero_field,
)

from conftest import smooth_field

PI = math.pi


@pytest.fixture(scope="module")
def anchor32(spec32):
    return find_u0(14.0, spec32)


class TestFindU0:
    def test_below_sea_level_with_norm(self, anchor32):
        assert energy_value(anchor32, 14.0) < -1.0
        assert sobolev_norm_sq(anchor32) >= 1.0

    def test_rejects_lambda_below_interval(self, spec32):
        with pytest.raises(ValueError, match="interval"):
            find_u0(12.0, spec32)

    def test_rejects_lambda_above_interval(self, spec32):
        with pytest.raises(ValueError, match="interval"):
            find_u0(20.0, spec32)

    def test_shallow_regime_reports_floor(self, spec32):
        # at lam barely above the coercivity threshold the coarse grid has no
        # point below -1; the failure must carry the achieved floor
        with pytest.raises(ConvergenceError, match="deepest"):
            find_u0(13.0, spec32)

    def test_order_two_anchor(self):
        spec = make_spec(2, 16)
        u0 = find_u0(300.0, spec)
        assert energy_value(u0, 300.0) < -1.0


class TestInitPath:
    def test_nodes_and_endpoints(self, anchor32):
        path = init_path(anchor32, 8, 14.0)
        assert len(path.nodes) == 9
        assert np.max(np.abs(path.nodes[0].values)) == 0.0
        assert np.array_equal(path.nodes[-1].values, anchor32.values)

    def test_max_energy_node_interior(self, anchor32):
        path = init_path(anchor32, 16, 14.0)
        energies = [energy_value(nd, 14.0) for nd in path.nodes]
        imax = int(np.argmax(energies))
        assert 0 < imax < len(path.nodes) - 1
        assert energies[imax] > 0.0

    def test_rejects_few_segments(self, anchor32):
        with pytest.raises(ValueError):
            init_path(anchor32, 4, 14.0)

    def test_rejects_nonzero_start(self, anchor32, spec32):
        with pytest.raises(ValueError, match="zero field"):
            PathState(lam=14.0, nodes=[anchor32] * 10)


class TestRelaxPath:
    def test_max_energy_decreases(self, anchor32):
        path = init_path(anchor32, 16, 14.0)
        start = max(energy_value(nd, 14.0) for nd in path.nodes)
        relaxed, info = relax_path(path, 5)
        assert info.sweeps == 5
        assert info.max_energies[-1] < start
        assert all(b <= a + 1e-9 * (1 + abs(a))
                   for a, b in zip(info.max_energies, info.max_energies[1:]))

    def test_endpoints_pinned(self, anchor32):
        path = init_path(anchor32, 16, 14.0)
        relaxed, _ = relax_path(path, 20)
        assert np.max(np.abs(relaxed.nodes[0].values)) == 0.0
        assert np.array_equal(relaxed.nodes[-1].values, anchor32.values)

    def test_near_critical_path_barely_moves(self, spec32):
        # nodes scaled along a tiny ray: gradients are small, so a sweep
        # changes the max energy by a tiny amount only
        u = smooth_field(spec32, 4, norm=1e-4)
        nodes = [zero_field(spec32)] + [lincomb(0.0, u, (i + 1) / 16, u) for i in range(16)]
        path = PathState(lam=14.0, nodes=nodes)
        start = max(energy_value(nd, 14.0) for nd in path.nodes)
        relaxed, info = relax_path(path, 1)
        assert abs(info.max_energies[-1] - start) <= 1e-6


class TestMountainPass:
    def test_converged_solution(self, spec32):
        res = mountain_pass(14.0, spec32, tol=1e-8, max_sweeps=300)
        assert res.converged
        assert res.c_estimate > 0.0
        assert res.grad_norm <= 1e-8
        assert res.solve is not None and res.solve.residual_l2 <= 1e-8
        assert math.sqrt(sobolev_norm_sq(res.maximizer)) > 0.1

    def test_c_estimate_dominates_solution_level(self, spec32):
        res = mountain_pass(14.0, spec32, tol=1e-8, max_sweeps=300)
        assert res.c_estimate >= res.solve.energy - 1e-9

    def test_rejects_quantum_multiple(self, spec32):
        with pytest.raises(ValueError, match="quantum"):
            mountain_pass(4 * PI, spec32)

    def test_rejects_outside_interval(self, spec32):
        with pytest.raises(ValueError, match="interval"):
            mountain_pass(2 * PI**2, spec32)

    def test_refinement_weakly_decreases_estimate(self, spec32):
        # refine the SAME relaxed path by midpoint insertion (the polyline is
        # unchanged, so its supremum cannot rise), then relax further: the
        # sampled level estimates must weakly decrease through P = 8, 16, 32
        from torusmf.mountainpass import _capture_ridge

        lam = 15.0
        u0 = find_u0(lam, spec32)

        def subdivide(path: PathState) -> PathState:
            nodes = [path.nodes[0]]
            for a, b in zip(path.nodes, path.nodes[1:]):
                nodes.append(lincomb(0.5, a, 0.5, b))
                nodes.append(b)
            return PathState(lam=path.lam, nodes=nodes)

        def relax_to_stall(path: PathState, budget: int) -> PathState:
            used = 0
            while used < budget:
                path, info = relax_path(path, 20)
                used += max(info.sweeps, 1)
                if info.stalled:
                    break
            return path

        estimates = []
        path = init_path(u0, 8, lam)
        for _ in range(3):
            path = relax_to_stall(path, 200)
            path, c = _capture_ridge(path)
            estimates.append(c)
            path = subdivide(path)
        assert estimates[1] <= estimates[0] * 1.02 + 1e-12
        assert estimates[2] <= estimates[1] * 1.02 + 1e-12


class TestLevelSweep:
    def test_single_point_grid(self, spec32):
        rep = level_sweep([14.0], spec32, tol=1e-8, sweeps_per_lam=40)
        assert len(rep.rows) == 1
        assert rep.monotonicity_violations == 0
        assert rep.rows[0].c_estimate > 0.0

    def test_three_point_monotone(self, spec32):
        rep = level_sweep([14.0, 16.0, 18.0], spec32, tol=1e-8, sweeps_per_lam=40)
        assert rep.monotonicity_violations == 0
        cs = [r.c_estimate for r in rep.rows]
        assert all(c > 0 for c in cs)
        assert cs == sorted(cs, reverse=True)

    def test_empty_grid_rejected(self, spec32):
        with pytest.raises(ValueError):
            level_sweep([], spec32)
