import numpy as np
import pytest

from logeuler.errors import (
    BadRange,
    NegativeOnQuadrant,
    OutOfBox,
    OverlapWarning,
    Unresolvable,
    ValidationError,
)
from logeuler.initial_data import (
    E_SQUARED,
    Eta0Spec,
    GASpec,
    RhoSpec,
    bump_profile,
    data_from_spec,
    eta0_gradient,
    functional_G,
    gA_gradient_at,
    gaussian_field,
    make_eta0,
    make_gA,
    make_rho,
    single_bump,
    translate_sum,
)
from logeuler.spectral import Field, Gamma, Grid, gradient, lebesgue_norm


def bump_radial_moment(power: int, n_nodes: int = 4000) -> float:
    """2 pi int_0^1 phi(r)^k r dr by dense midpoint rule (reference oracle)."""
    r = (np.arange(n_nodes) + 0.5) / n_nodes
    return float(2.0 * np.pi * np.mean(bump_profile(r) ** power * r))


class TestBumpProfile:
    def test_plateau_support_range(self):
        r = np.linspace(0.0, 1.5, 1001)
        v = bump_profile(r)
        assert np.all(v[r <= 0.5] == 1.0)
        assert np.all(v[r >= 1.0] == 0.0)
        assert np.all((v >= 0.0) & (v <= 1.0))

    def test_smoothness_bounded_differences(self):
        # centered finite differences up to order 4 stay bounded across the blend
        r = np.linspace(0.3, 1.2, 2001)
        h = r[1] - r[0]
        v = bump_profile(r)
        for order in range(1, 5):
            v = np.diff(v) / h
            assert np.isfinite(v).all()
            assert np.abs(v).max() < 1e9


class TestRho:
    def test_peak_value_and_parity(self):
        g = Grid(256, 2.0)
        rho = make_rho(RhoSpec(sigma=0.125), g)
        i = np.argmin(np.abs(g.x - 1.0))
        assert rho.values[i, i] == 1.0
        assert rho.parity == (-1, -1)
        assert max(rho.parity_defect()) == 0.0
        assert lebesgue_norm(rho, np.inf) == 1.0

    def test_zero_integral(self):
        g = Grid(128, 2.0)
        rho = make_rho(RhoSpec(sigma=0.125), g)
        assert abs(rho.mean_mode()) < 1e-15

    def test_first_quadrant_moment_positive(self):
        # both the log-weighted functional and the raw e^-|x|^4 moment
        g = Grid(256, 2.0)
        rho = make_rho(RhoSpec(sigma=0.125), g)
        assert functional_G(rho, Gamma(0.5)) > 0.0
        X, Y = g.meshes()
        quad = (X > 0) & (Y > 0)
        r = np.hypot(X[quad], Y[quad])
        w = X[quad] * Y[quad] / r**4 * np.exp(-(r**4))
        assert (rho.values[quad] * w).sum() * g.h**2 > 0.0

    def test_unresolvable(self):
        with pytest.raises(Unresolvable):
            make_rho(RhoSpec(sigma=0.01), Grid(64, 2.0))

    def test_sigma_validation(self):
        with pytest.raises(ValidationError):
            RhoSpec(sigma=0.3)


class TestGA:
    def test_sup_norm_single_term_max(self):
        # disjoint level supports make the sup a single-term max C_A j_min^-g
        g = Grid(512, 1.0)
        spec = GASpec(gamma=Gamma(0.5), A=E_SQUARED, sigma=0.25)
        f = make_gA(spec, g)
        js = spec.levels(g)
        expected = spec.weights(js)[0]  # j_min has the largest weight
        assert abs(lebesgue_norm(f, np.inf) - expected) < 1e-14

    def test_l1_matches_dyadic_sum(self):
        g = Grid(512, 1.0)
        spec = GASpec(gamma=Gamma(0.5), A=E_SQUARED, sigma=0.25)
        f = make_gA(spec, g)
        js = spec.levels(g)
        rho_l1 = 4.0 * spec.sigma**2 * bump_radial_moment(1)
        expected = sum(w * 4.0**-j for j, w in zip(js, spec.weights(js))) * rho_l1 / spec.sigma**2 * spec.sigma**2
        expected = sum(w * 4.0**-j * rho_l1 for j, w in zip(js, spec.weights(js)))
        assert abs(lebesgue_norm(f, 1) - expected) < 1e-3 * expected

    def test_level_supports_disjoint(self):
        g = Grid(512, 1.0)
        spec = GASpec(gamma=Gamma(0.5), A=E_SQUARED, sigma=0.25)
        js = spec.levels(g)
        X, Y = g.meshes()
        from logeuler.initial_data import _rho_values

        fields = [_rho_values(X * 2.0**j, Y * 2.0**j, spec.sigma) for j in js]
        for i in range(len(fields)):
            for k in range(i + 1, len(fields)):
                assert np.all(fields[i] * fields[k] == 0.0)

    def test_section7_sup_norm_trend(self):
        # |g_A|_inf tracks A^-1/2 within a factor of two across doublings,
        # on grids adapted to the dyadic depth of each A
        sups = {}
        for A in (32.0, 64.0, 128.0):
            spec = GASpec(gamma=Gamma(0.5), A=A, variant="section7", sigma=0.25)
            ell = 3.0 * 2.0 ** (-np.ceil(A))
            g = Grid(512, float(ell))
            f = make_gA(spec, g)
            sups[A] = lebesgue_norm(f, np.inf)
        for A in (32.0, 64.0):
            ratio = sups[2 * A] / sups[A]
            target = 2.0**-0.5
            assert target / 2.0 <= ratio <= target * 2.0

    def test_section7_needs_large_A(self):
        with pytest.raises(ValidationError):
            GASpec(gamma=Gamma(0.5), A=8.0, variant="section7")

    def test_too_few_levels_rejected(self):
        spec = GASpec(gamma=Gamma(0.5), A=E_SQUARED, sigma=0.25)
        with pytest.raises(Unresolvable):
            make_gA(spec, Grid(128, 1.0))

    def test_empty_range_rejected(self):
        spec = GASpec(gamma=Gamma(0.5), A=E_SQUARED, sigma=0.25, j_cap=0)
        with pytest.raises((BadRange, Unresolvable)):
            spec.levels()

    def test_gradient_matches_finite_differences(self, rng):
        # independent route: tiny-step central differences of the closed-form
        # values at off-grid points (steep edges defeat grid-step stencils)
        g = Grid(512, 1.0)
        spec = GASpec(gamma=Gamma(0.5), A=E_SQUARED, sigma=0.25, j_cap=4)
        js = spec.levels(g)
        ws = spec.weights(js)

        from logeuler.initial_data import _rho_values

        def value(X, Y):
            out = np.zeros_like(X)
            for j, w in zip(js, ws):
                out += w * _rho_values(X * 2.0**j, Y * 2.0**j, spec.sigma)
            return out

        pts = rng.uniform(-0.3, 0.3, size=(400, 2))
        X, Y = pts[:, 0], pts[:, 1]
        ax, ay = gA_gradient_at(spec, X, Y, grid=g)
        e = 1e-6
        fx = (value(X + e, Y) - value(X - e, Y)) / (2 * e)
        fy = (value(X, Y + e) - value(X, Y - e)) / (2 * e)
        scale = max(np.abs(ax).max(), np.abs(ay).max(), 1.0)
        assert np.abs(fx - ax).max() < 1e-4 * scale
        assert np.abs(fy - ay).max() < 1e-4 * scale


class TestFunctionalG:
    def test_gA_matches_per_level_reduction(self):
        # independent oracle: per-level one-lobe quadrature of the bump with
        # the rescaled weight, times four-fold symmetry of the integrand
        g = Grid(512, 1.0)
        spec = GASpec(gamma=Gamma(0.5), A=E_SQUARED, sigma=0.25)
        f = make_gA(spec, g)
        got = functional_G(f, spec.gamma)
        xg, wg = np.polynomial.legendre.leggauss(80)
        expected = 0.0
        for j, wj in zip(spec.levels(g), spec.weights(spec.levels(g))):
            # lobe of rho at (1, 1), radius sigma, in rescaled variables
            xs = 1.0 + spec.sigma * xg
            PX, PY = np.meshgrid(xs, xs, indexing="ij")
            W = np.outer(wg, wg) * spec.sigma**2
            vals = bump_profile(np.hypot(PX - 1.0, PY - 1.0) / spec.sigma)
            r = np.hypot(PX, PY)
            weight = (PX * PY / r**4 * np.log(np.e + 2.0**j / r) ** (-spec.gamma.value)
                      * np.exp(-(r**4) / 2.0 ** (4 * j)))
            expected += wj * (vals * weight * W).sum()
        assert abs(got - expected) < 0.1 * expected

    def test_linear_in_amplitude(self):
        g = Grid(256, 2.0)
        rho = make_rho(RhoSpec(sigma=0.125), g)
        doubled = Field(g, 2.0 * rho.values, parity=rho.parity)
        a, b = functional_G(rho, Gamma(0.5)), functional_G(doubled, Gamma(0.5))
        assert abs(b - 2.0 * a) < 1e-12 * abs(b)

    def test_negative_on_quadrant_rejected(self):
        g = Grid(128, 2.0)
        rho = make_rho(RhoSpec(sigma=0.125), g)
        flipped = Field(g, -rho.values, parity=rho.parity)
        with pytest.raises(NegativeOnQuadrant):
            functional_G(flipped, Gamma(0.5))


class TestEta0:
    def spec(self, **kw):
        base = dict(center=(0.2, 0.25), delta=0.04, k=64.0, L=2.0)
        base.update(kw)
        return Eta0Spec(**base)

    def test_parity_exact(self):
        g = Grid(512, 1.0)
        eta = make_eta0(self.spec(), g)
        assert eta.parity == (-1, -1)
        assert max(eta.parity_defect()) == 0.0

    def test_sup_norm_near_prediction(self):
        # |eta0|_inf = (20 k delta sqrt(L))^-1 max(Psi) up to the cosine
        # sampling offset, which is bounded by k * (distance to a crest)
        g = Grid(1024, 1.0)
        spec = self.spec()
        eta = make_eta0(spec, g)
        amp = 1.0 / (20.0 * spec.k * spec.delta * np.sqrt(spec.L))
        got = lebesgue_norm(eta, np.inf)
        assert got <= amp * (1.0 + 1e-12)
        assert got >= amp * np.cos(spec.k * g.h)  # a crest is within h of a sample

    def test_k_doubling_halves_l2(self):
        g = Grid(1024, 1.0)
        e1 = make_eta0(self.spec(k=64.0), g)
        e2 = make_eta0(self.spec(k=128.0), g)
        ratio = lebesgue_norm(e2, 2) / lebesgue_norm(e1, 2)
        assert abs(ratio - 0.5) < 0.05 * 0.5

    def test_gradient_norm_bookkeeping(self):
        # |grad eta0|_2 <= (20 sqrt(L))^-1 (|b|_2 + k^-1 |grad b|_2) (1 + 1e-6)
        g = Grid(1024, 1.0)
        spec = self.spec()
        eta = make_eta0(spec, g)
        gx, gy = gradient(eta)
        got = np.sqrt(lebesgue_norm(gx, 2) ** 2 + lebesgue_norm(gy, 2) ** 2)
        b = make_eta0(Eta0Spec(center=spec.center, delta=spec.delta, k=1e-9, L=spec.L),
                      g)  # k -> 0 gives b/(20 k sqrt L); rebuild b directly instead
        X, Y = g.meshes()
        bvals = np.zeros_like(X)
        for a1 in (-1.0, 1.0):
            for a2 in (-1.0, 1.0):
                r = np.hypot(X - a1 * spec.center[0], Y - a2 * spec.center[1]) / spec.delta
                bvals += a1 * a2 * bump_profile(r) / spec.delta
        bf = Field(g, bvals)
        bgx, bgy = gradient(bf)
        b2 = lebesgue_norm(bf, 2)
        db2 = np.sqrt(lebesgue_norm(bgx, 2) ** 2 + lebesgue_norm(bgy, 2) ** 2)
        bound = (b2 + db2 / spec.k) / (20.0 * np.sqrt(spec.L)) * (1.0 + 1e-6)
        assert got <= bound

    def test_gradient_bound_for_large_k(self):
        # |grad eta0|_2 <= L^-1/2 once k passes a findable threshold k0
        g = Grid(1024, 1.0)
        k0 = None
        for k in (16.0, 32.0, 64.0, 128.0):
            eta = make_eta0(self.spec(k=k), g)
            gx, gy = gradient(eta)
            val = np.sqrt(lebesgue_norm(gx, 2) ** 2 + lebesgue_norm(gy, 2) ** 2)
            if val <= 1.0 / np.sqrt(2.0):
                k0 = k
                break
        assert k0 is not None

    def test_closed_form_gradient_consistent(self, rng):
        # tiny-step central differences of the defining formula, off-grid
        spec = self.spec()

        def value(X, Y):
            b = np.zeros_like(X)
            for a1 in (-1.0, 1.0):
                for a2 in (-1.0, 1.0):
                    r = np.hypot(X - a1 * spec.center[0], Y - a2 * spec.center[1]) / spec.delta
                    b += a1 * a2 * bump_profile(r) / spec.delta
            amp = spec.amplitude_scale / (20.0 * spec.k * np.sqrt(spec.L))
            return amp * np.cos(spec.k * X) * b

        from logeuler.initial_data import eta0_gradient_at

        pts = np.column_stack([
            rng.uniform(0.15, 0.25, size=300), rng.uniform(0.2, 0.3, size=300)])
        X, Y = pts[:, 0], pts[:, 1]
        ax, ay = eta0_gradient_at(spec, X, Y)
        e = 1e-7
        fx = (value(X + e, Y) - value(X - e, Y)) / (2 * e)
        fy = (value(X, Y + e) - value(X, Y - e)) / (2 * e)
        scale = max(np.abs(ax).max(), np.abs(ay).max())
        assert np.abs(fx - ax).max() < 1e-4 * scale
        assert np.abs(fy - ay).max() < 1e-4 * scale

    def test_resolvability_checks(self):
        with pytest.raises(Unresolvable):
            make_eta0(self.spec(k=4000.0), Grid(256, 1.0))
        with pytest.raises(Unresolvable):
            make_eta0(self.spec(delta=0.005), Grid(256, 1.0))
        with pytest.raises(ValidationError):
            Eta0Spec(center=(-0.2, 0.25), delta=0.04, k=64.0, L=2.0)


class TestTranslateSum:
    def test_identity_single_part(self):
        g = Grid(128, 4.0)
        f = single_bump(g, (0.5, -0.25), 0.5)
        out = translate_sum([(f, (0.0, 0.0))])
        assert np.array_equal(out.values, f.values)

    def test_disjoint_l1_additivity(self):
        g = Grid(256, 8.0)
        f = single_bump(g, (0.0, 0.0), 0.5)
        out = translate_sum([(f, (-2.0, 0.0)), (f, (2.0, 0.0))])
        assert abs(lebesgue_norm(out, 1) - 2.0 * lebesgue_norm(f, 1)) < 1e-12
        assert lebesgue_norm(out, np.inf) == lebesgue_norm(f, np.inf)

    def test_out_of_box_geometry(self):
        big = Grid(256, 32.0)
        f = single_bump(big, (0.0, 0.0), 1.0)
        translate_sum([(f, (0.0, 0.0)), (f, (8.0, 0.0))])  # accepted
        small = Grid(256, 4.0)
        fs = single_bump(small, (0.0, 0.0), 1.0)
        with pytest.raises(OutOfBox):
            translate_sum([(fs, (0.0, 0.0)), (fs, (8.0, 0.0))])

    def test_overlap_warns(self):
        g = Grid(128, 4.0)
        f = single_bump(g, (0.0, 0.0), 1.0)
        with pytest.warns(OverlapWarning):
            translate_sum([(f, (0.0, 0.0)), (f, (1.0, 0.0))])

    def test_unaligned_offset_rejected(self):
        g = Grid(128, 4.0)
        f = single_bump(g, (0.0, 0.0), 1.0)
        with pytest.raises(ValidationError):
            translate_sum([(f, (g.h / 3.0, 0.0))])


class TestDataFromSpec:
    def test_round_trips(self):
        g = Grid(256, 2.0)
        f = data_from_spec({"type": "rho", "sigma": 0.125}, g)
        assert f.parity == (-1, -1)
        f = data_from_spec({"type": "gaussian", "width": 0.25, "mean_zero": True}, g)
        assert abs(f.mean_mode()) < 1e-10
        f = data_from_spec(
            {"type": "sum", "parts": [
                {"type": "bump", "center": [0.0, 0.5], "radius": 0.3, "amplitude": 1.0,
                 "offset": [0.0, 0.0]},
                {"type": "bump", "center": [0.0, -0.5], "radius": 0.3, "amplitude": -1.0,
                 "offset": [0.0, 0.0]}]}, g)
        assert f.parity[1] == -1

    def test_file_round_trip(self, tmp_path):
        g = Grid(64, 1.0)
        vals = np.arange(64 * 64, dtype=float).reshape(64, 64)
        path = tmp_path / "field.bin"
        vals.astype("<f8").tofile(path)
        f = data_from_spec({"type": "file", "path": str(path)}, g)
        assert np.array_equal(f.values, vals)

    def test_unknown_type(self):
        with pytest.raises(ValidationError):
            data_from_spec({"type": "nope"}, Grid(64, 1.0))
