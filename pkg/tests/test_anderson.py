import math

import numpy as np
import pytest
from scipy.integrate import quad

from specloop.anderson import (
    F1F2_FACTOR,
    N_F,
    HamiltonianParams,
    build_hamiltonians,
    eig_sym,
    eval_hamiltonian_spectrum,
    make_hamiltonian_model,
    spectrum_lines,
)

TRUE_PARAMS = HamiltonianParams(
    which="h3", delta=7.66, v=0.76, u_fc=12.7, u_ff=10.5, gamma=0.7, shift=0.0
)


def charpoly_roots(a):
    """Independent eigenvalue oracle: roots of the characteristic cubic."""
    tr = np.trace(a)
    m2 = (
        a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        + a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
        + a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    )
    det = np.linalg.det(a)
    roots = np.roots([1.0, -tr, m2, -det])
    return np.sort(roots.real)


class TestBuildHamiltonians:
    def test_h2_decoupled(self):
        p = HamiltonianParams(which="h2", delta=1.0, v=0.0, u_fc=3.0, gamma=0.5)
        h_init, h_final = build_hamiltonians(p)
        np.testing.assert_allclose(h_init, [[0.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(h_final, [[0.0, 0.0], [0.0, -2.0]])

    def test_h3_final_diagonal(self):
        p = HamiltonianParams(
            which="h3", delta=7.66, v=0.0, u_fc=12.7, u_ff=10.5, gamma=0.5
        )
        _, h_final = build_hamiltonians(p)
        np.testing.assert_allclose(np.diag(h_final), [0.0, -5.04, 0.42], atol=1e-12)
        assert h_final[0, 2] == 0.0

    def test_h3_f1f2_hybridization(self):
        p = HamiltonianParams(
            which="h3", delta=1.0, v=0.76, u_fc=0.5, u_ff=0.5, gamma=0.5
        )
        h_init, _ = build_hamiltonians(p)
        assert h_init[1, 2] == pytest.approx(
            math.sqrt(2 * (N_F - 1) / N_F) * 0.76, rel=1e-12
        )
        assert h_init[1, 2] == pytest.approx(1.0357, abs=1e-4)

    def test_exactly_symmetric(self):
        h_init, h_final = build_hamiltonians(TRUE_PARAMS)
        np.testing.assert_array_equal(h_init, h_init.T)
        np.testing.assert_array_equal(h_final, h_final.T)

    def test_param_validation(self):
        with pytest.raises(ValueError):
            HamiltonianParams(which="h2", delta=1, v=1, u_fc=1, gamma=0.0)
        with pytest.raises(ValueError):
            HamiltonianParams(which="h2", delta=1, v=1, u_fc=1, gamma=0.5, u_ff=2.0)
        with pytest.raises(ValueError):
            HamiltonianParams(which="h3", delta=1, v=1, u_fc=1, gamma=0.5)


class TestEigSym:
    def test_pauli_x(self):
        vals, vecs = eig_sym(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(vals, [-1.0, 1.0], atol=1e-14)
        s = 1 / math.sqrt(2)
        np.testing.assert_allclose(vecs[:, 0], [s, -s], atol=1e-14)
        np.testing.assert_allclose(vecs[:, 1], [s, s], atol=1e-14)

    def test_identity(self):
        vals, vecs = eig_sym(np.eye(3))
        np.testing.assert_allclose(vals, [1.0, 1.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(vecs @ vecs.T, np.eye(3), atol=1e-12)

    def test_random_matrices_match_charpoly_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(300):
            a = rng.normal(scale=rng.uniform(0.1, 10), size=(3, 3))
            a = (a + a.T) / 2
            vals, vecs = eig_sym(a)
            np.testing.assert_allclose(vals, charpoly_roots(a), atol=1e-8)
            scale = np.abs(a).max()
            assert np.abs(a @ vecs - vecs * vals).max() <= 1e-10 * max(scale, 1e-30)
            np.testing.assert_allclose(vecs.T @ vecs, np.eye(3), atol=1e-10)

    def test_near_degenerate(self):
        base = np.diag([1.0, 1.0 + 1e-9, 5.0])
        rng = np.random.default_rng(3)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        a = q @ base @ q.T
        a = (a + a.T) / 2
        vals, vecs = eig_sym(a)
        assert np.abs(a @ vecs - vecs * vals).max() <= 1e-10 * np.abs(a).max()
        np.testing.assert_allclose(vecs.T @ vecs, np.eye(3), atol=1e-10)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            eig_sym(np.array([[0.0, 1.0], [0.5, 0.0]]))

    def test_sign_convention(self):
        vals, vecs = eig_sym(np.diag([2.0, -1.0]))
        # largest-magnitude component of each eigenvector is positive
        for i in range(2):
            v = vecs[:, i]
            assert v[np.argmax(np.abs(v))] > 0

    def test_batched_matches_loop(self):
        rng = np.random.default_rng(9)
        batch = rng.normal(size=(6, 3, 3))
        batch = (batch + np.swapaxes(batch, -1, -2)) / 2
        vals_b, vecs_b = eig_sym(batch)
        for i in range(6):
            vals_i, vecs_i = eig_sym(batch[i])
            np.testing.assert_allclose(vals_b[i], vals_i, rtol=0, atol=1e-14)
            np.testing.assert_allclose(vecs_b[i], vecs_i, rtol=0, atol=1e-14)


class TestSpectrumLines:
    def test_h2_decoupled_single_line(self):
        p = HamiltonianParams(which="h2", delta=2.0, v=0.0, u_fc=3.0, gamma=0.5)
        lines = spectrum_lines(p)
        weights = sorted(w for _, w in lines.lines)
        np.testing.assert_allclose(weights, [0.0, 1.0], atol=1e-14)

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            p = HamiltonianParams(
                which="h3",
                delta=rng.uniform(0, 20),
                v=rng.uniform(0, 4),
                u_fc=rng.uniform(0, 20),
                u_ff=rng.uniform(0, 20),
                gamma=rng.uniform(0.01, 1),
            )
            lines = spectrum_lines(p)
            assert abs(sum(w for _, w in lines.lines) - 1.0) < 1e-10

    def test_lines_sorted_ascending(self):
        lines = spectrum_lines(TRUE_PARAMS).lines
        energies = [e for e, _ in lines]
        assert energies == sorted(energies)

    def test_true_parameters_satellite_structure(self):
        lines = spectrum_lines(TRUE_PARAMS)
        pos = np.array([e for e, _ in lines.lines]) - lines.e_ground
        w = np.array([wj for _, wj in lines.lines])
        assert len(lines.lines) == 3
        # smallest weight on the line with the largest energy transfer
        assert np.argmin(w) == np.argmax(pos)
        # the isolated satellite about 5 units from the main peaks is small
        far = int(np.argmax(np.abs(pos)))
        assert 4.5 < abs(pos[far]) < 6.0
        assert w[far] < 0.1


class TestSpectrum:
    def test_lorentzian_apex(self):
        p = HamiltonianParams(which="h2", delta=2.0, v=0.0, u_fc=3.0, gamma=0.5)
        lines = spectrum_lines(p)
        (e_line,) = [e for e, w in lines.lines if w > 0.5]
        apex_x = e_line - lines.e_ground + p.shift
        assert eval_hamiltonian_spectrum(p, apex_x) == pytest.approx(
            1 / (math.pi * 0.5), rel=1e-12
        )

    def test_unit_integral_by_quadrature(self):
        lines = spectrum_lines(TRUE_PARAMS)
        anchors = sorted(e - lines.e_ground for e, _ in lines.lines)
        total, _ = quad(
            lambda x: eval_hamiltonian_spectrum(TRUE_PARAMS, x),
            -1e3,
            1e3,
            points=anchors,
            limit=200,
        )
        assert total == pytest.approx(1.0, abs=1e-3)

    def test_shift_translation_exact(self):
        rng = np.random.default_rng(8)
        xs = rng.uniform(-20, 20, size=12)
        delta_b = 1.75
        shifted = HamiltonianParams(
            which="h3", delta=7.66, v=0.76, u_fc=12.7, u_ff=10.5, gamma=0.7,
            shift=TRUE_PARAMS.shift + delta_b,
        )
        for x in xs:
            assert eval_hamiltonian_spectrum(shifted, x + delta_b) == pytest.approx(
                eval_hamiltonian_spectrum(TRUE_PARAMS, x), rel=0, abs=0
            )

    def test_strictly_positive(self):
        x = np.linspace(-50, 50, 200)
        assert np.all(eval_hamiltonian_spectrum(TRUE_PARAMS, x) > 0)


class TestModelSpec:
    def test_dims_and_names(self):
        m2 = make_hamiltonian_model("h2")
        m3 = make_hamiltonian_model("h3")
        assert (m2.id, m2.dim) == ("M2", 5)
        assert (m3.id, m3.dim) == ("M3", 6)
        assert m3.param_names == ("delta", "v", "gamma", "u_fc", "u_ff", "b")

    def test_default_priors(self):
        m3 = make_hamiltonian_model("h3")
        bounds = [(p.p1, p.p2) for p in m3.prior]
        assert bounds == [(0, 20), (0, 4), (0.01, 1), (0, 20), (0, 20), (-5, 5)]

    def test_forward_matches_eval(self):
        m3 = make_hamiltonian_model("h3")
        theta = np.array([7.66, 0.76, 0.7, 12.7, 10.5, 0.0])
        x = np.linspace(-10, 5, 30)
        np.testing.assert_allclose(
            m3.forward(x, theta), eval_hamiltonian_spectrum(TRUE_PARAMS, x), rtol=1e-12
        )

    def test_configurable_hybridization_factor(self):
        m3 = make_hamiltonian_model("h3", f1f2_factor=math.sqrt(2.0))
        theta = np.array([7.66, 0.76, 0.7, 12.7, 10.5, 0.0])
        default = make_hamiltonian_model("h3").forward(np.array([0.0]), theta)
        alt = m3.forward(np.array([0.0]), theta)
        assert not np.allclose(default, alt)
        assert F1F2_FACTOR == pytest.approx(math.sqrt(2 * 13 / 14), rel=1e-15)
