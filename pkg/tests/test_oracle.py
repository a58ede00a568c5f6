import math

import numpy as np
import pytest

from fracorder.fem import Coefficients, assemble
from fracorder.forward import (ProblemSpec, TimeGrid, step_diffusion_wave,
                               step_subdiffusion)
from fracorder.meshes import LEFT, make_interval_mesh, make_square_mesh
from fracorder.oracle import (AsymptotePrediction, asymptote_prediction,
                              series_solution, spectral_basis)
from fracorder.soe import build_soe
from fracorder.special import mlf


@pytest.fixture(scope="module")
def laplace_200():
    mesh = make_interval_mesh(200)
    return assemble(mesh, Coefficients(), x0=0.0)


@pytest.fixture(scope="module")
def laplace_50():
    mesh = make_interval_mesh(50)
    return assemble(mesh, Coefficients(), x0=0.0)


class TestSpectralBasis:
    def test_dirichlet_laplacian_eigenvalues(self, laplace_200):
        basis = spectral_basis(laplace_200, 5)
        exact = (np.arange(1, 6) * np.pi) ** 2
        assert np.all(np.abs(basis.eigenvalues / exact - 1) < 0.01)

    def test_orthonormality(self, laplace_200):
        basis = spectral_basis(laplace_200, 40)
        gram = basis.modes.T @ (laplace_200.mass_rho @ basis.modes)
        assert np.abs(gram - np.eye(40)).max() < 1e-10

    def test_ascending_and_positive(self, laplace_200):
        basis = spectral_basis(laplace_200, 30)
        assert basis.eigenvalues[0] > 0
        assert np.all(np.diff(basis.eigenvalues) > 0)
        assert basis.count == 30

    def test_lowest_eigenvalue_stable_under_refinement(self):
        coeffs = Coefficients(a=lambda p: 1 + p[:, 0] ** 2, q=1.0)
        lam = [spectral_basis(assemble(make_interval_mesh(n), coeffs, x0=0.0),
                              1).eigenvalues[0] for n in (100, 200)]
        assert abs(lam[1] / lam[0] - 1) < 0.005

    def test_count_bounds(self, laplace_50):
        with pytest.raises(ValueError):
            spectral_basis(laplace_50, 0)
        with pytest.raises(ValueError):
            spectral_basis(laplace_50, 50)
        assert spectral_basis(laplace_50, 49).count == 49

    def test_2d_rejected(self):
        sys_ = assemble(make_square_mesh(8), Coefficients(), x0=(0.0, 0.5))
        with pytest.raises(ValueError):
            spectral_basis(sys_, 3)

    def test_parseval(self, laplace_50):
        u0 = laplace_50.mesh.nodes[:, 0] ** 2 * (1 - laplace_50.mesh.nodes[:, 0])
        norm2 = u0 @ (laplace_50.mass_rho @ u0)
        sums = []
        for count in (10, 30, 49):
            basis = spectral_basis(laplace_50, count)
            a = basis.modes.T @ (laplace_50.mass_rho @ u0)
            sums.append(a @ a)
        assert sums[0] < sums[1] < sums[2] <= norm2 * (1 + 1e-12)
        # the full interior basis is complete, so the bound is attained
        assert sums[2] == pytest.approx(norm2, rel=1e-10)


class TestSeriesSolution:
    def test_single_mode_heat_decay(self, laplace_200):
        basis = spectral_basis(laplace_200, 3)
        u0 = basis.modes[:, 0].copy()
        spec = ProblemSpec(1.0, laplace_200, TimeGrid(0.1, 10), u0=u0)
        got = series_solution(basis, spec, 0.3)
        ref = math.exp(-basis.eigenvalues[0] * 0.3) * u0
        assert np.abs(got - ref).max() <= 1e-9 * np.abs(ref).max()

    def test_zero_data_gives_zero(self, laplace_50):
        basis = spectral_basis(laplace_50, 10)
        spec = ProblemSpec(0.5, laplace_50, TimeGrid(0.1, 10))
        assert np.all(series_solution(basis, spec, 1.0) == 0.0)

    def test_boundary_data_rejected(self, laplace_50):
        basis = spectral_basis(laplace_50, 5)
        g = lambda p, t: np.zeros(len(p))
        spec = ProblemSpec(0.5, laplace_50, TimeGrid(0.1, 10),
                           dirichlet={LEFT: g})
        with pytest.raises(ValueError):
            series_solution(basis, spec, 1.0)

    def test_negative_time_rejected(self, laplace_50):
        basis = spectral_basis(laplace_50, 5)
        spec = ProblemSpec(0.5, laplace_50, TimeGrid(0.1, 10), u0=1.0)
        with pytest.raises(ValueError):
            series_solution(basis, spec, -0.5)

    def test_time_zero_returns_projection(self, laplace_50):
        basis = spectral_basis(laplace_50, 49)
        u0 = lambda p: np.sin(np.pi * p[:, 0])
        spec = ProblemSpec(0.5, laplace_50, TimeGrid(0.1, 10), u0=u0)
        got = series_solution(basis, spec, 0.0)
        ref = np.sin(np.pi * laplace_50.mesh.nodes[:, 0])
        ref[laplace_50.dirichlet_dofs] = 0.0
        assert np.abs(got - ref).max() < 1e-10

    @pytest.mark.parametrize("alpha,t", [(0.25, 0.4), (0.5, 1.3), (0.75, 0.7),
                                         (1.3, 0.9)])
    def test_ramp_source_matches_closed_form(self, laplace_50, alpha, t):
        # for F(x,s) = w(x) s the memory convolution per mode has the closed
        # form Gamma(2) t^(a+1) E_{a,a+2}(-lam t^a); this pins the adaptive
        # quadrature, including the endpoint-singularity substitution
        basis = spectral_basis(laplace_50, 20)
        w = lambda p: np.sin(np.pi * p[:, 0])
        spec = ProblemSpec(alpha, laplace_50, TimeGrid(0.1, 10),
                           source=lambda p, s: w(p) * s)
        got = series_solution(basis, spec, t)
        fbar = basis.modes.T @ (laplace_50.mass @ w(laplace_50.mesh.nodes))
        lam = basis.eigenvalues
        coeff = fbar * np.array(
            [t ** (alpha + 1) * mlf(alpha, alpha + 2.0, -l * t**alpha)
             for l in lam])
        ref = basis.modes @ coeff
        assert np.abs(got - ref).max() <= 1e-8 * np.abs(ref).max()

    @pytest.mark.parametrize("alpha,t", [(0.5, 1.0), (0.5, 0.1 + 1e-7),
                                         (1.5, 2.0)])
    def test_cutoff_source_matches_closed_form(self, laplace_50, alpha, t):
        # constant-in-time source switched off at T1: difference of two
        # t^a E_{a,a+1}(-lam t^a) terms, one shifted to the cutoff
        basis = spectral_basis(laplace_50, 20)
        t1 = 0.1
        w = lambda p: np.sin(np.pi * p[:, 0])
        spec = ProblemSpec(alpha, laplace_50, TimeGrid(1e-3, 100),
                           source=lambda p, s: w(p) * (0.0 <= s < t1))
        got = series_solution(basis, spec, t, source_end=t1)
        fbar = basis.modes.T @ (laplace_50.mass @ w(laplace_50.mesh.nodes))
        lam = basis.eigenvalues
        coeff = fbar * np.array(
            [t**alpha * mlf(alpha, alpha + 1.0, -l * t**alpha)
             - (t - t1) ** alpha * mlf(alpha, alpha + 1.0, -l * (t - t1) ** alpha)
             for l in lam])
        ref = basis.modes @ coeff
        assert np.abs(got - ref).max() <= 1e-8 * np.abs(ref).max()

    def test_cross_validates_stepper(self):
        # the series and the stepper share only the assembled matrices
        coeffs = Coefficients(a=lambda p: 1 + p[:, 0] ** 2, q=1.0)
        sys_ = assemble(make_interval_mesh(100), coeffs, x0=0.0)
        u0 = lambda p: p[:, 0] ** 2 * (1 - p[:, 0])
        src = lambda p, t: (np.exp(p[:, 0] * (1 - p[:, 0]))
                            * p[:, 0] * (1 - p[:, 0]) * t * (t < 0.1))
        grid = TimeGrid(1e-3, 1000)
        spec = ProblemSpec(0.5, sys_, grid, u0=u0, source=src)
        soe = build_soe(1.5, grid.tau, grid.horizon, 1e-8)
        stepped = {}
        step_subdiffusion(spec, soe,
                          observer=lambda t, u: stepped.__setitem__(round(t, 9), u.copy()))
        basis = spectral_basis(sys_, 99)
        series = series_solution(basis, spec, 1.0, source_end=0.1)
        diff = series - stepped[1.0]
        num = diff @ (sys_.mass @ diff)
        den = series @ (sys_.mass @ series)
        assert math.sqrt(num / den) <= 1e-2


class TestAsymptotePrediction:
    def test_classical_source_has_no_power_tail(self, laplace_50):
        src = lambda p, t: np.sin(np.pi * p[:, 0]) * (t < 0.1)
        spec = ProblemSpec(1.0, laplace_50, TimeGrid(0.01, 100), source=src)
        pred = asymptote_prediction(laplace_50, spec)
        assert pred.leading_coefficient == 0.0
        assert pred.source_case == "volume_source"

    def test_nonpositive_initial_data_gives_positive_flux(self, laplace_50):
        # stationary solve of nonpositive data stays nonpositive, so its
        # outward normal derivative at the observation point is positive
        u0 = lambda p: -p[:, 0] * (1 - p[:, 0])
        spec = ProblemSpec(0.5, laplace_50, TimeGrid(0.1, 10), u0=u0)
        pred = asymptote_prediction(laplace_50, spec)
        flux = pred.leading_coefficient * math.gamma(1 - 0.5)
        assert flux > 0

    def test_initial_data_dominates_mixed_case(self, laplace_50):
        src = lambda p, t: np.sin(np.pi * p[:, 0]) * (t < 0.1)
        spec = ProblemSpec(0.5, laplace_50, TimeGrid(0.01, 100),
                           u0=lambda p: p[:, 0] * (1 - p[:, 0]), source=src)
        pred = asymptote_prediction(laplace_50, spec)
        assert pred.source_case == "initial_condition"
        assert pred.exponent == 0.5

    def test_source_cases_decay_one_power_faster(self, laplace_50):
        src = lambda p, t: np.sin(np.pi * p[:, 0]) * (t < 0.1)
        pred = asymptote_prediction(
            laplace_50, ProblemSpec(0.75, laplace_50, TimeGrid(0.01, 100),
                                    source=src))
        assert pred.exponent == 1.75
        g = lambda p, t: np.full(len(p), math.exp(t) * (t < 0.1))
        pred = asymptote_prediction(
            laplace_50, ProblemSpec(0.75, laplace_50, TimeGrid(0.01, 100),
                                    dirichlet={LEFT: g}))
        assert pred.exponent == 1.75
        assert pred.source_case == "boundary_source"

    def test_all_zero_data_rejected(self, laplace_50):
        spec = ProblemSpec(0.5, laplace_50, TimeGrid(0.1, 10))
        with pytest.raises(ValueError):
            asymptote_prediction(laplace_50, spec)

    def test_exponent_validation(self):
        with pytest.raises(ValueError):
            AsymptotePrediction(1.0, 3.5, "volume_source")

    def test_initial_data_tail_matches_long_run(self):
        coeffs = Coefficients(a=lambda p: 1 + p[:, 0] ** 2, q=1.0)
        sys_ = assemble(make_interval_mesh(200), coeffs, x0=0.0)
        u0 = lambda p: p[:, 0] ** 2 * (1 - p[:, 0])
        src = lambda p, t: (np.exp(p[:, 0] * (1 - p[:, 0]))
                            * p[:, 0] * (1 - p[:, 0]) * t * (t < 0.1))
        grid = TimeGrid(5e-3, 20_000)
        spec = ProblemSpec(0.5, sys_, grid, u0=u0, source=src)
        pred = asymptote_prediction(sys_, spec)
        soe = build_soe(1.5, grid.tau, grid.horizon, 1e-8)
        fs = step_subdiffusion(spec, soe)
        m = (fs.times >= 50.0) & (fs.times <= 100.0)
        avg = np.mean(fs.times[m] ** pred.exponent * fs.values[m])
        assert avg == pytest.approx(pred.leading_coefficient, rel=0.05)

    def test_source_tails_match_long_runs(self):
        grid = TimeGrid(5e-3, 20_000)
        soe = build_soe(1.5, grid.tau, grid.horizon, 1e-8)

        sys2 = assemble(make_interval_mesh(200),
                        Coefficients(q=lambda p: 1 + np.sin(p[:, 0])), x0=0.0)
        src = lambda p, t: np.exp(p[:, 0] ** 2) * np.sin(np.pi * p[:, 0]) * (t < 0.1)
        spec = ProblemSpec(0.5, sys2, grid, source=src)
        pred = asymptote_prediction(sys2, spec)
        fs = step_subdiffusion(spec, soe)
        m = (fs.times >= 50.0) & (fs.times <= 100.0)
        avg = np.mean(fs.times[m] ** pred.exponent * fs.values[m])
        assert avg == pytest.approx(pred.leading_coefficient, rel=0.05)

        sys3 = assemble(make_interval_mesh(200),
                        Coefficients(a=lambda p: 1 + np.sin(np.pi * p[:, 0]),
                                     q=lambda p: np.cos(np.pi * p[:, 0])),
                        x0=0.0)
        g = lambda p, t: np.full(len(p), math.exp(t) * (t < 0.1))
        spec = ProblemSpec(0.5, sys3, grid, dirichlet={LEFT: g})
        pred = asymptote_prediction(sys3, spec)
        fs = step_subdiffusion(spec, soe)
        m = (fs.times >= 50.0) & (fs.times <= 100.0)
        avg = np.mean(fs.times[m] ** pred.exponent * fs.values[m])
        assert avg == pytest.approx(pred.leading_coefficient, rel=0.05)

    def test_wave_tail_matches_long_run(self):
        # slower entry into the asymptotic regime above alpha = 1, hence the
        # looser band; note the tail sign flips relative to subdiffusion
        sys_ = assemble(make_interval_mesh(100), Coefficients(), x0=0.0)
        grid = TimeGrid(5e-3, 20_000)
        spec = ProblemSpec(1.5, sys_, grid, u0=lambda p: p[:, 0] * (1 - p[:, 0]))
        pred = asymptote_prediction(sys_, spec)
        assert pred.leading_coefficient > 0
        soe = build_soe(0.5, grid.tau / 2, grid.horizon, 1e-8)
        fs = step_diffusion_wave(spec, soe)
        m = (fs.times >= 50.0) & (fs.times <= 100.0)
        avg = np.mean(fs.times[m] ** pred.exponent * fs.values[m])
        assert avg == pytest.approx(pred.leading_coefficient, rel=0.10)
