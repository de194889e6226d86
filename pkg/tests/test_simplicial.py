import math

import numpy as np
import pytest

from plmbo.fixtures import SEVEN_POINTS, UNIT_SQUARE
from plmbo.simplicial import (boundary_matrix, boundary_matrix_from, new_simplex_kernel,
                              persistent_laplacian_q, rips_filtration, spectra_curves, spectrum)

from oracles import boundary_columns, exact_betti, exact_rank, rips_complex

TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])


def by_dim(f, r):
    return [len(f.complex_at(r, q)) for q in range(3)]


class TestRips:
    def test_radius_zero(self):
        assert by_dim(rips_filtration(SEVEN_POINTS, 0.0), 0.0) == [7, 0, 0]

    def test_unit_square(self):
        assert by_dim(rips_filtration(UNIT_SQUARE, 1.2), 1.2) == [4, 4, 0]

    def test_equilateral_triangle(self):
        f = rips_filtration(TRIANGLE, 1.0 + 1e-12)
        assert by_dim(f, 1.0 + 1e-12) == [3, 3, 1]
        tri = [s for s in f.simplices if s.dim == 2][0]
        assert tri.birth == max(s.birth for s in f.simplices if s.dim == 1)

    def test_duplicate_points(self):
        f = rips_filtration(np.zeros((3, 2)), 0.0)
        assert by_dim(f, 0.0) == [3, 3, 1]

    def test_closure_and_births(self):
        rng = np.random.default_rng(0)
        pts = rng.random((10, 2))
        f = rips_filtration(pts, 0.6)
        birth = {s.vertices: s.birth for s in f.simplices}
        for s in f.simplices:
            if s.dim == 0:
                assert s.birth == 0
            elif s.dim == 1:
                assert s.birth == pytest.approx(np.linalg.norm(pts[s.vertices[0]] - pts[s.vertices[1]]))
            if s.dim > 0:
                faces = [s.vertices[:i] + s.vertices[i + 1:] for i in range(len(s.vertices))]
                assert all(birth[fc] <= s.birth for fc in faces)
            if s.dim == 2:
                assert s.birth == max(birth[fc] for fc in faces)

    def test_matches_enumeration(self):
        rng = np.random.default_rng(1)
        pts = rng.random((9, 3))
        f = rips_filtration(pts, 1.0)
        for r in (0.2, 0.5, 0.8):
            v, e, t = rips_complex(pts, r)
            assert set(f.complex_at(r, 1)) == set(e)
            assert set(f.complex_at(r, 2)) == set(t)


class TestBoundary:
    def test_edge(self):
        np.testing.assert_array_equal(boundary_matrix_from([(0,), (1,)], [(0, 1)]), [[-1], [1]])

    def test_triangle(self):
        b = boundary_matrix_from([(1, 2), (0, 2), (0, 1)], [(0, 1, 2)])
        np.testing.assert_array_equal(b[:, 0], [1, -1, 1])

    def test_matches_oracle_columns(self):
        f = rips_filtration(np.random.default_rng(2).random((8, 2)), 0.7)
        b, rows, cols = boundary_matrix(f, 2, 0.7)
        ref = boundary_columns(rows, cols)
        for j, col in enumerate(ref):
            dense = np.zeros(len(rows), dtype=np.int64)
            for i, v in col.items():
                dense[i] = v
            np.testing.assert_array_equal(b[:, j], dense)

    def test_boundary_of_boundary(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            pts = rng.random((int(rng.integers(3, 12)), 2))
            r = float(rng.uniform(0.2, 0.9))
            f = rips_filtration(pts, r)
            b1, _, _ = boundary_matrix(f, 1, r)
            b2, _, _ = boundary_matrix(f, 2, r)
            assert not np.any(b1 @ b2)  # integer arithmetic, exact

    def test_bad_q(self):
        with pytest.raises(ValueError):
            boundary_matrix(rips_filtration(UNIT_SQUARE, 1), 3, 1)


class TestPersistentLaplacianQ:
    def test_q0_is_graph_laplacian(self):
        f = rips_filtration(UNIT_SQUARE, 1.2)
        lap = persistent_laplacian_q(f, 0, 1.2, 1.2)
        c4 = np.array([[2, -1, 0, -1], [-1, 2, -1, 0], [0, -1, 2, -1], [-1, 0, -1, 2]], dtype=float)
        np.testing.assert_array_equal(lap, c4)
        np.testing.assert_allclose(spectrum(lap, 0, 1.2, 1.2).eigenvalues, [0, 2, 2, 4], atol=1e-12)

    def test_p0_equals_ordinary(self):
        rng = np.random.default_rng(4)
        pts = rng.random((9, 2))
        f = rips_filtration(pts, 0.8)
        for r in (0.3, 0.5, 0.8):
            b1 = boundary_matrix(f, 1, r)[0].astype(float)
            b2 = boundary_matrix(f, 2, r)[0].astype(float)
            np.testing.assert_allclose(persistent_laplacian_q(f, 0, r, r), b1 @ b1.T, atol=1e-12)
            np.testing.assert_allclose(persistent_laplacian_q(f, 1, r, r), b2 @ b2.T + b1.T @ b1, atol=1e-12)

    def test_reversed_radii(self):
        with pytest.raises(ValueError):
            persistent_laplacian_q(rips_filtration(UNIT_SQUARE, 2), 0, 1.5, 1.0)

    def test_two_clusters_merge(self):
        pts = np.array([[0, 0], [0.1, 0], [0, 0.1], [3, 0], [3.1, 0], [3, 0.1]], dtype=float)
        f = rips_filtration(pts, 4.0)
        s = spectrum(persistent_laplacian_q(f, 0, 0.5, 3.5), 0, 0.5, 3.5)
        assert s.betti == 1
        # exact rank formula: dim Z_0(K_t) - rank of boundaries in K_tp landing in C_0(K_t)
        assert s.betti == persistent_betti_exact(pts, 0.5, 3.5, 0)

    def test_persistent_betti_random(self):
        rng = np.random.default_rng(8)
        for _ in range(15):
            pts = rng.random((int(rng.integers(4, 10)), 2))
            r_t, r_tp = sorted(rng.uniform(0.1, 0.8, 2))
            f = rips_filtration(pts, r_tp)
            for q in (0, 1):
                s = spectrum(persistent_laplacian_q(f, q, r_t, r_tp), q, r_t, r_tp)
                assert s.betti == persistent_betti_exact(pts, r_t, r_tp, q)

    def test_kernel_basis_invariance(self):
        rng = np.random.default_rng(6)
        pts = rng.random((10, 2))
        f = rips_filtration(pts, 0.7)
        for q in (0, 1):
            z = new_simplex_kernel(f, q, 0.35, 0.7)
            ref = np.linalg.eigvalsh(persistent_laplacian_q(f, q, 0.35, 0.7))
            for _ in range(5):
                rot, _ = np.linalg.qr(rng.standard_normal((z.shape[1], z.shape[1])))
                got = np.linalg.eigvalsh(persistent_laplacian_q(f, q, 0.35, 0.7, kernel_basis=z @ rot))
                np.testing.assert_allclose(got, ref, atol=1e-8)


def persistent_betti_exact(pts, r_t, r_tp, q):
    """dim Z_q(K_t) - dim(B_q(K_tp) restricted to C_q(K_t)), over the rationals.

    The second term is rank(d_{q+1} on K_tp) minus the rank of its projection
    onto the new q-simplices, since the persistent boundaries are the images
    of chains whose boundary has no component on new simplices.
    """
    v_t, e_t, t_t = rips_complex(pts, r_t)
    v_p, e_p, t_p = rips_complex(pts, r_tp)
    q_t = [v_t, e_t][q]
    q_p = [v_p, e_p][q]
    up = [e_p, t_p][q]
    z = len(q_t) - (exact_rank(boundary_columns(v_t, e_t)) if q == 1 else 0)
    cols = boundary_columns(q_p, up)
    idx = {s: i for i, s in enumerate(q_p)}
    t_rows = {idx[s] for s in q_t}
    full = exact_rank(cols)
    new_only = exact_rank([{r: x for r, x in c.items() if r not in t_rows} for c in cols])
    return z - (full - new_only)


class TestCurves:
    def test_seven_points_start(self):
        rows = spectra_curves(SEVEN_POINTS, [0.0, 0.5])
        assert rows[0]["beta0"] == 7 and rows[0]["beta1"] == 0
        assert rows[0]["lambda0"] is None and rows[0]["lambda1"] is None

    def test_unit_square_cycle(self):
        rows = spectra_curves(UNIT_SQUARE, [1.05, 1.2, 1.4])
        assert [(r["beta0"], r["beta1"]) for r in rows] == [(1, 1)] * 3
        assert spectra_curves(UNIT_SQUARE, [1.5])[0]["beta1"] == 0

    def test_beta0_nonincreasing(self):
        grid = np.round(np.arange(0, 2.01, 0.05), 10)
        b0 = [r["beta0"] for r in spectra_curves(SEVEN_POINTS, grid)]
        assert all(a >= b for a, b in zip(b0, b0[1:]))

    def test_matches_exact_homology(self):
        rng = np.random.default_rng(9)
        pts = rng.random((8, 2))
        grid = np.linspace(0, 1.0, 11)
        for row in spectra_curves(pts, grid):
            assert (row["beta0"], row["beta1"]) == exact_betti(pts, row["radius"])

    @pytest.mark.parametrize("grid", [[], [1.0, 0.5]])
    def test_bad_grid(self, grid):
        with pytest.raises(ValueError):
            spectra_curves(UNIT_SQUARE, grid)
