"""Spectral field calculus: transforms, norms, quadrature, file format."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusmf import (
    ExpOverflowError,
    Spectrum,
    apply_power_laplacian,
    from_values,
    integrate,
    integrate_exp,
    inverse_transform,
    l2_inner,
    log_integrate_exp,
    make_spec,
    project_mean_zero,
    read_field,
    scaled,
    shift,
    sobolev_norm_sq,
    solve_poisson_power,
    transform,
    upsample,
    write_field,
    zero_field,
)

from conftest import cos_mode, sin_mode, smooth_field

PI = math.pi


class TestMakeSpec:
    def test_t2(self):
        spec = make_spec(1, 64)
        assert spec.dim == 2 and spec.npoints == 4096

    def test_t4(self):
        spec = make_spec(2, 16)
        assert spec.dim == 4 and spec.npoints == 65536

    @pytest.mark.parametrize("m,n", [(3, 16), (0, 16), (1, 63), (1, 4)])
    def test_rejects(self, m, n):
        with pytest.raises(ValueError):
            make_spec(m, n)


class TestFromValues:
    def test_zeros(self, spec64):
        f = from_values(spec64, np.zeros(spec64.shape))
        assert integrate(f) == 0.0

    def test_cos_mean_tiny(self, spec64):
        f = cos_mode(spec64)
        assert abs(integrate(f)) <= 1e-14

    def test_nan_rejected(self, spec64):
        bad = np.zeros(spec64.shape)
        bad[3, 5] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            from_values(spec64, bad)

    def test_length_mismatch(self, spec64):
        with pytest.raises(ValueError):
            from_values(spec64, np.zeros(17))


class TestProjectMeanZero:
    def test_constant_becomes_zero(self, spec64):
        f = project_mean_zero(from_values(spec64, 5.0 * np.ones(spec64.shape)))
        assert np.max(np.abs(f.values)) == 0.0
        assert f.mean_zero

    def test_cos_unchanged(self, spec64):
        f = cos_mode(spec64)
        g = project_mean_zero(f)
        assert np.max(np.abs(g.values - f.values)) <= 1e-14


class TestTransform:
    def test_zero_spectrum(self, spec64):
        c = transform(zero_field(spec64)).coefficients
        assert np.max(np.abs(c)) == 0.0

    def test_cos_coefficients(self, spec64):
        c = transform(cos_mode(spec64)).coefficients
        assert abs(c[1, 0] - 0.5) <= 1e-14
        assert abs(c[-1, 0] - 0.5) <= 1e-14
        mask = np.ones(spec64.shape, dtype=bool)
        mask[1, 0] = mask[-1, 0] = False
        assert np.max(np.abs(c[mask])) <= 1e-14

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10_000))
    def test_round_trip(self, seed):
        spec = make_spec(1, 32)
        vals = np.random.default_rng(seed).standard_normal(spec.shape)
        f = from_values(spec, vals)
        g = inverse_transform(transform(f))
        scale = 1.0 + np.max(np.abs(vals))
        assert np.max(np.abs(g.values - f.values)) <= 1e-12 * scale

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10_000))
    def test_parseval(self, seed):
        spec = make_spec(1, 32)
        f = from_values(spec, np.random.default_rng(seed).standard_normal(spec.shape))
        lhs = integrate(from_values(spec, f.values**2))
        rhs = float(np.sum(np.abs(transform(f).coefficients) ** 2))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, lhs)

    def test_hermitian_violation_rejected(self, spec64):
        c = np.zeros(spec64.shape, dtype=complex)
        c[1, 0] = 1.0j  # no conjugate partner at (-1, 0)
        with pytest.raises(ValueError, match="Hermitian"):
            Spectrum(spec64, c)


class TestPowerLaplacian:
    def test_cos_eigenfunction_m1(self, spec64):
        f = cos_mode(spec64)
        g = apply_power_laplacian(f, 1.0)
        assert np.max(np.abs(g.values - 4 * PI**2 * f.values)) <= 1e-10

    def test_cos_eigenfunction_m2(self):
        spec = make_spec(2, 16)
        f = cos_mode(spec)
        g = apply_power_laplacian(f, 2.0)
        assert np.max(np.abs(g.values - 16 * PI**4 * f.values)) <= 1e-9

    def test_zero(self, spec64):
        g = apply_power_laplacian(zero_field(spec64), 1.5)
        assert np.max(np.abs(g.values)) == 0.0

    def test_negative_power_rejected(self, spec64):
        with pytest.raises(ValueError, match="solve_poisson_power"):
            apply_power_laplacian(zero_field(spec64), -1.0)

    def test_mean_zero_required(self, spec64):
        f = from_values(spec64, 1.0 + cos_mode(spec64).values)
        with pytest.raises(ValueError, match="mean-zero"):
            apply_power_laplacian(f, 1.0)

    def test_composition(self, spec32):
        f = smooth_field(spec32, 7)
        a = apply_power_laplacian(apply_power_laplacian(f, 0.5), 1.5)
        b = apply_power_laplacian(f, 2.0)
        scale = np.max(np.abs(b.values))
        assert np.max(np.abs(a.values - b.values)) <= 1e-10 * scale


class TestPoissonPower:
    def test_cos(self, spec64):
        f = scaled(cos_mode(spec64), 4 * PI**2)
        g = solve_poisson_power(f, 1.0)
        assert np.max(np.abs(g.values - cos_mode(spec64).values)) <= 1e-12

    def test_zero(self, spec64):
        assert np.max(np.abs(solve_poisson_power(zero_field(spec64), 2.0).values)) == 0.0

    def test_round_trip(self, spec32):
        f = smooth_field(spec32, 3)
        g = apply_power_laplacian(solve_poisson_power(f, 1.0), 1.0)
        scale = np.max(np.abs(f.values))
        assert np.max(np.abs(g.values - f.values)) <= 1e-10 * scale

    def test_rejects_nonpositive_power(self, spec64):
        with pytest.raises(ValueError):
            solve_poisson_power(zero_field(spec64), 0.0)


class TestSobolevNorm:
    def test_cos_m1(self, spec64):
        assert abs(sobolev_norm_sq(cos_mode(spec64)) - 2 * PI**2) <= 1e-10

    def test_cos_m2(self):
        spec = make_spec(2, 16)
        assert abs(sobolev_norm_sq(cos_mode(spec)) - 8 * PI**4) <= 1e-8

    def test_zero(self, spec64):
        assert sobolev_norm_sq(zero_field(spec64)) == 0.0

    def test_equals_half_power_l2(self, spec32):
        f = smooth_field(spec32, 11)
        half = apply_power_laplacian(f, spec32.m / 2.0)
        direct = sobolev_norm_sq(f)
        assert abs(direct - l2_inner(half, half)) <= 1e-10 * max(1.0, direct)

    def test_poincare_optimal(self, spec32):
        # l2 norm^2 <= (4 pi^2)^-m * sobolev norm^2, equality on the first mode
        for seed in range(5):
            f = smooth_field(spec32, seed)
            assert l2_inner(f, f) <= sobolev_norm_sq(f) / (4 * PI**2) * (1 + 1e-12)
        mode = cos_mode(spec32)
        assert abs(l2_inner(mode, mode) - sobolev_norm_sq(mode) / (4 * PI**2)) <= 1e-12


class TestQuadrature:
    def test_integrate_constant(self, spec64):
        assert integrate(from_values(spec64, 3.0 * np.ones(spec64.shape))) == 3.0

    def test_l2_inner_cos_cos(self, spec64):
        assert abs(l2_inner(cos_mode(spec64), cos_mode(spec64)) - 0.5) <= 1e-14

    def test_l2_inner_cos_sin(self, spec64):
        assert abs(l2_inner(cos_mode(spec64), sin_mode(spec64))) <= 1e-14

    def test_spec_mismatch(self, spec64, spec32):
        with pytest.raises(ValueError, match="mismatch"):
            l2_inner(zero_field(spec64), zero_field(spec32))


class TestIntegrateExp:
    def test_zero(self, spec64):
        assert integrate_exp(zero_field(spec64), 2.0) == 1.0

    def test_bessel_value(self, spec64):
        # grid mean of exp(cos(2 pi x)) is the modified Bessel series
        # sum_j (1/4)^j / (j!)^2, frozen from that series
        series = sum(0.25**j / math.factorial(j) ** 2 for j in range(25))
        assert abs(series - 1.2660658777520084) < 1e-15
        value = integrate_exp(scaled(cos_mode(spec64), 0.5), 2.0)
        assert abs(value - series) <= 1e-12

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000))
    def test_jensen(self, seed):
        spec = make_spec(1, 16)
        f = smooth_field(spec, seed, norm=1.0)
        assert integrate_exp(f, 2 * spec.m) >= 1.0

    def test_jensen_strict(self, spec32):
        assert integrate_exp(smooth_field(spec32, 5, norm=1.0), 2.0) > 1.0 + 1e-6

    def test_overflow_reports_max(self, spec64):
        f = scaled(cos_mode(spec64), 500.0)
        with pytest.raises(ExpOverflowError) as err:
            integrate_exp(f, 2.0)
        assert err.value.max_exponent == pytest.approx(1000.0)

    def test_log_form_matches(self, spec32):
        f = smooth_field(spec32, 9, norm=2.0)
        assert math.exp(log_integrate_exp(f, 2.0)) == pytest.approx(
            integrate_exp(f, 2.0), rel=1e-13
        )


class TestShiftAndUpsample:
    def test_shift_is_permutation(self, spec64):
        f = smooth_field(spec64, 21)
        g = shift(f, (5, -3))
        assert sorted(f.values.ravel()) == sorted(g.values.ravel())
        assert abs(sobolev_norm_sq(f) - sobolev_norm_sq(g)) <= 1e-10

    def test_upsample_exact_on_modes(self, spec32):
        f = cos_mode(spec32)
        g = upsample(f, 64)
        assert g.spec.n == 64
        assert np.max(np.abs(g.values[::2, ::2] - f.values)) <= 1e-12
        assert abs(sobolev_norm_sq(project_mean_zero(g)) - sobolev_norm_sq(
            project_mean_zero(f))) <= 1e-9

    def test_upsample_rejects_downsample(self, spec64):
        with pytest.raises(ValueError):
            upsample(zero_field(spec64), 32)


class TestFieldFile:
    def test_round_trip(self, tmp_path, spec32):
        f = smooth_field(spec32, 2)
        path = tmp_path / "f.pbfld"
        write_field(path, f)
        g = read_field(path)
        assert g.spec == spec32
        assert not g.mean_zero
        assert np.array_equal(g.values, f.values)

    def test_header_layout(self, tmp_path, spec32):
        path = tmp_path / "f.pbfld"
        write_field(path, zero_field(spec32))
        raw = path.read_bytes()
        header = b"PBFLD1\nm=1\nn=32\nkind=values\n\n"
        assert raw.startswith(header)
        assert len(raw) == len(header) + 8 * spec32.npoints

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "bad.pbfld"
        path.write_bytes(b"NOTFLD\nm=1\nn=32\nkind=values\n\n")
        with pytest.raises(ValueError):
            read_field(path)

    def test_rejects_short_payload(self, tmp_path):
        path = tmp_path / "short.pbfld"
        path.write_bytes(b"PBFLD1\nm=1\nn=32\nkind=values\n\n" + b"\x00" * 64)
        with pytest.raises(ValueError, match="doubles"):
            read_field(path)
