"""Compiler: coupling matrix, map assembly, readout, residual, observation."""

import numpy as np
import pytest

import swarmsolve as sw


def literal_coupling(A):
    """Direct evaluation of the defining product, using plain inverses.

    Independent of the production implementation (which never forms the
    block product or a full inverse); used as the oracle.
    """
    m, n = A.shape
    top = np.hstack([np.eye(n), -A.T])
    bot = np.hstack([A, np.eye(m)])
    B = np.vstack([top, bot])
    D = np.zeros((n + m, n + m))
    D[:n, :n] = np.linalg.inv(np.eye(n) + A.T @ A)
    D[n:, n:] = np.linalg.inv(np.eye(m) + A @ A.T)
    return B @ B @ D


class TestCouplingMatrix:
    def test_zero_matrix_gives_identity(self):
        assert np.allclose(sw.coupling_matrix(np.zeros((1, 1))), np.eye(2))
        assert np.allclose(sw.coupling_matrix(np.zeros((3, 2))), np.eye(5))

    def test_scalar_one_gives_quarter_rotation(self):
        G = sw.coupling_matrix(np.array([[1.0]]))
        assert np.allclose(G, [[0.0, -1.0], [1.0, 0.0]], atol=1e-12)

    def test_matches_literal_product(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            m = int(rng.integers(1, 12))
            n = int(rng.integers(1, 12))
            A = rng.standard_normal((m, n))
            assert np.allclose(
                sw.coupling_matrix(A), literal_coupling(A), atol=1e-11
            )

    def test_orthogonal_both_shape_regimes(self):
        rng = np.random.default_rng(8)
        for m, n in [(20, 7), (7, 20), (15, 15)]:
            A = rng.standard_normal((m, n))
            G = sw.coupling_matrix(A)
            err = np.abs(G.T @ G - np.eye(m + n)).max()
            assert err <= 1e-12

    def test_reflection_structure(self):
        # Composing with the block sign flip must square to the identity.
        rng = np.random.default_rng(9)
        A = rng.standard_normal((6, 4))
        G = sw.coupling_matrix(A)
        D = np.diag([1.0] * 4 + [-1.0] * 6)
        GD = G @ D
        assert np.allclose(GD @ GD, np.eye(10), atol=1e-12)

    def test_overflowing_entries_raise_compile_error(self):
        with pytest.raises(sw.CompileError):
            sw.coupling_matrix(np.array([[1e200]]))

    def test_bad_inputs(self):
        with pytest.raises(sw.NonFiniteError):
            sw.coupling_matrix(np.array([[np.nan]]))
        with pytest.raises(ValueError):
            sw.coupling_matrix(np.zeros((0, 2)))


class TestCompileProblem:
    def test_lasso_map_parameters(self):
        spec = sw.ProblemSpec(
            kind="lasso", A=[[1.0], [2.0]], y=[3.0, -1.0], rho_obj=2.0
        )
        system = sw.compile_problem(spec)
        assert system.K == 3
        x_map = system.maps[0]
        assert x_map.kind is sw.MapKind.SSR and x_map.t == 1.0
        a = -(1.0 - 2.0) / (1.0 + 2.0)
        for j, yj in enumerate([3.0, -1.0]):
            wm = system.maps[1 + j]
            assert wm.kind is sw.MapKind.AFFINE
            assert wm.a == pytest.approx(a)
            assert wm.b == pytest.approx(-2.0 * 2.0 * yj / 3.0)

    def test_nnls_map_parameters(self):
        spec = sw.ProblemSpec(kind="nnls", A=[[1.0, 0.0]], y=[4.0])
        system = sw.compile_problem(spec)
        assert system.maps[0].kind is sw.MapKind.ABS
        assert system.maps[1].kind is sw.MapKind.ABS
        assert system.maps[2].kind is sw.MapKind.CONST
        assert system.maps[2].v == -4.0

    def test_ecd_map_parameters(self):
        spec = sw.ProblemSpec(kind="ecd", A=[[1.0]], y=[2.0])
        system = sw.compile_problem(spec)
        assert system.maps[0].kind is sw.MapKind.IDENTITY
        wm = system.maps[1]
        assert wm.kind is sw.MapKind.NEG_SSR
        assert wm.t == 1.0 and wm.shift == 2.0
        # Literal check of the composed w-map at a few points.
        for u in (-1.0, 0.0, 2.0, 2.5, 5.0):
            inner = u - 2.0
            ssr = -inner if abs(inner) <= 1.0 else inner - 2.0 * np.sign(inner)
            assert sw.eval_map(wm, u) == -(2.0 + ssr)

    def test_offset_is_zero_and_blocks_are_contiguous(self):
        spec, _ = sw.gen_instance(sw.GenParams(kind="nnls", m=5, n=3, seed=0))
        system = sw.compile_problem(spec)
        assert np.all(system.f == 0.0)
        assert np.array_equal(system.x_block, np.arange(3))
        assert np.array_equal(system.w_block, np.arange(3, 8))

    def test_every_compiled_map_is_nonexpansive(self):
        for kind in ("lasso", "nnls", "ecd"):
            spec, _ = sw.gen_instance(
                sw.GenParams(kind=kind, m=6, n=4, sparsity=2, rho_obj=3.0, seed=1)
            )
            system = sw.compile_problem(spec)
            for m in system.maps:
                assert sw.nonexpansive_probe(m, trials=500, rng_seed=3)


class TestHandFixedPoints:
    def test_nnls_fixed_point(self, toy_nnls):
        spec, system = toy_nnls
        c = np.array([3.0, -3.0])
        d = np.array([3.0, 3.0])
        assert sw.residual(system, c, d) <= 1e-12
        ro = sw.readout(system, c, d)
        assert ro.x_hat[0] == pytest.approx(3.0, abs=1e-12)
        assert ro.w_hat[0] == pytest.approx(3.0, abs=1e-12)

    def test_lasso_fixed_point(self, toy_lasso):
        spec, system = toy_lasso
        c = np.array([1.5, -3.5])
        d = np.array([3.5, 1.5])
        assert sw.residual(system, c, d) <= 1e-12
        ro = sw.readout(system, c, d)
        assert ro.x_hat[0] == pytest.approx(2.5, abs=1e-12)

    def test_nnls_negative_observation_clamps_to_zero(self):
        spec = sw.ProblemSpec(kind="nnls", A=[[1.0]], y=[-2.0])
        system = sw.compile_problem(spec)
        trace = sw.run(
            system,
            sw.SolverConfig(rho_filter=0.5, epsilon=1e-12, max_sweeps=2000),
        )
        ro = sw.readout(system, trace.c, trace.d)
        assert abs(ro.x_hat[0]) <= 1e-6

    def test_residual_hand_example(self, toy_nnls):
        _, system = toy_nnls
        # c = (0, -3), d = (3, 0): maps give m(d) = (3, -3) so the first term
        # is sqrt(9 + 0) = 3; d - G c = (3, 0) - (3, 0) = 0.
        value = sw.residual(system, np.array([0.0, -3.0]), np.array([3.0, 0.0]))
        assert value == pytest.approx(3.0, abs=1e-12)


class TestReadoutIsExactMinimizer:
    """At a converged fixed point the readout must solve the source problem."""

    @pytest.mark.parametrize("kind", ["lasso", "nnls", "ecd"])
    def test_fixed_point_readout_passes_kkt(self, kind):
        params = dict(m=12, n=8, sparsity=3, rho_obj=4.0, seed=2)
        if kind == "ecd":
            params = dict(m=16, n=5, seed=2)
        spec, _ = sw.gen_instance(sw.GenParams(kind=kind, **params))
        system = sw.compile_problem(spec)
        trace = sw.run(
            system,
            sw.SolverConfig(rho_filter=0.5, epsilon=1e-11, max_sweeps=20000),
        )
        assert trace.converged
        ro = sw.readout(system, trace.c, trace.d)
        report = sw.verify_optimality(spec, ro.x_hat, tol=1e-5)
        assert report.passed, report.failures


class TestObservationUpdate:
    def test_same_observation_is_bitwise_identical(self):
        spec, _ = sw.gen_instance(sw.GenParams(kind="lasso", m=6, n=4,
                                               sparsity=2, rho_obj=3.0, seed=4))
        system = sw.compile_problem(spec)
        again = sw.update_observation(system, spec.y)
        assert again.maps == system.maps
        assert np.array_equal(again.G, system.G)

    def test_new_observation_changes_only_w_maps(self):
        spec, _ = sw.gen_instance(sw.GenParams(kind="nnls", m=6, n=4, seed=5))
        system = sw.compile_problem(spec)
        y2 = spec.y + 1.0
        updated = sw.update_observation(system, y2)
        assert updated.maps[: spec.n] == system.maps[: spec.n]
        for j in range(spec.m):
            assert updated.maps[spec.n + j].v == pytest.approx(-y2[j])
        assert np.array_equal(updated.provenance.y, y2)
        assert np.array_equal(updated.G, system.G)

    def test_dimension_mismatch_rejected(self, toy_nnls):
        _, system = toy_nnls
        with pytest.raises(ValueError):
            sw.update_observation(system, np.array([1.0, 2.0]))

    def test_fixed_point_tracks_new_observation(self, toy_nnls):
        _, system = toy_nnls
        updated = sw.update_observation(system, np.array([5.0]))
        trace = sw.run(
            updated, sw.SolverConfig(rho_filter=0.5, epsilon=1e-11,
                                     max_sweeps=2000)
        )
        ro = sw.readout(updated, trace.c, trace.d)
        assert ro.x_hat[0] == pytest.approx(5.0, abs=1e-6)


class TestSystemSerialization:
    def test_roundtrip_preserves_solutions(self):
        spec, _ = sw.gen_instance(sw.GenParams(kind="ecd", m=9, n=3, seed=6))
        system = sw.compile_problem(spec)
        again = sw.ReducedSystem.from_doc(system.to_doc(), validate=True)
        assert np.array_equal(again.G, system.G)
        assert again.maps == system.maps
        cfg = sw.SolverConfig(rho_filter=0.5, epsilon=1e-10, max_sweeps=5000)
        a = sw.run(system, cfg)
        b = sw.run(again, cfg)
        assert np.array_equal(a.c, b.c)
        assert np.array_equal(a.d, b.d)
