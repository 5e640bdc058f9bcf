"""Coordinate maps, map tables and core type validation."""

import math

import numpy as np
import pytest

import swarmsolve as sw
from swarmsolve.core import MapTable


def ref_ssr(u, t):
    """Literal piecewise definition, kept independent of the implementation."""
    if abs(u) <= t:
        return -u
    return u - 2.0 * t * math.copysign(1.0, u)


class TestScalarMaps:
    def test_ssr_piecewise_values(self):
        m = sw.CoordinateMap.ssr(t=1.0)
        # Hand values across both branches and the kinks.
        for u, want in [
            (0.0, 0.0),
            (0.5, -0.5),
            (1.0, -1.0),
            (-1.0, 1.0),
            (2.0, 0.0),
            (3.5, 1.5),
            (-3.5, -1.5),
        ]:
            assert sw.eval_map(m, u) == pytest.approx(want, abs=0.0)

    def test_ssr_matches_reference_on_grid(self):
        rng = np.random.default_rng(3)
        for t in (0.25, 1.0, 7.5):
            m = sw.CoordinateMap.ssr(t=t)
            for u in rng.uniform(-10 * t, 10 * t, size=200):
                assert sw.eval_map(m, u) == ref_ssr(u, t)

    def test_neg_ssr_is_mirrored_ssr(self):
        m = sw.CoordinateMap.neg_ssr(t=2.0)
        for u in np.linspace(-9, 9, 37):
            assert sw.eval_map(m, u) == ref_ssr(-u, 2.0)

    def test_abs_affine_const_identity(self):
        assert sw.eval_map(sw.CoordinateMap.abs_val(), -4.0) == 4.0
        aff = sw.CoordinateMap.affine(a=-0.5, b=2.0)
        assert sw.eval_map(aff, 6.0) == -0.5 * 6.0 + 2.0
        assert sw.eval_map(sw.CoordinateMap.const(-3.0), 123.0) == -3.0
        assert sw.eval_map(sw.CoordinateMap.identity(), 0.25) == 0.25

    def test_shift_recenters_the_map(self):
        base = sw.CoordinateMap.ssr(t=1.0)
        shifted = sw.CoordinateMap.ssr(t=1.0, shift=5.0)
        for u in np.linspace(-3, 13, 33):
            assert sw.eval_map(shifted, u) == 5.0 + sw.eval_map(base, u - 5.0)

    def test_shifted_neg_ssr_negates_after_shift(self):
        # The mirrored kind recenters first, then negates the whole value.
        s, t = 1.5, 1.0
        m = sw.CoordinateMap.neg_ssr(t=t, shift=s)
        for u in np.linspace(-4, 7, 45):
            assert sw.eval_map(m, u) == -(s + ref_ssr(u - s, t))

    def test_non_finite_input_rejected(self):
        m = sw.CoordinateMap.identity()
        for bad in (math.nan, math.inf, -math.inf):
            with pytest.raises(sw.NonFiniteError):
                sw.eval_map(m, bad)


class TestMapValidation:
    def test_ssr_requires_positive_threshold(self):
        with pytest.raises(ValueError):
            sw.CoordinateMap.ssr(t=0.0)
        with pytest.raises(ValueError):
            sw.CoordinateMap.ssr(t=-1.0)

    def test_affine_slope_bounded(self):
        with pytest.raises(ValueError):
            sw.CoordinateMap.affine(a=1.5, b=0.0)
        sw.CoordinateMap.affine(a=1.0, b=2.0)
        sw.CoordinateMap.affine(a=-1.0, b=2.0)

    def test_const_requires_value(self):
        with pytest.raises(ValueError):
            sw.CoordinateMap(sw.MapKind.CONST)

    def test_non_finite_parameters_rejected(self):
        with pytest.raises(sw.NonFiniteError):
            sw.CoordinateMap.const(math.inf)
        with pytest.raises(sw.NonFiniteError):
            sw.CoordinateMap.affine(a=math.nan, b=0.0)

    def test_doc_roundtrip(self):
        maps = [
            sw.CoordinateMap.ssr(t=2.5),
            sw.CoordinateMap.neg_ssr(t=1.0, shift=-0.5),
            sw.CoordinateMap.abs_val(),
            sw.CoordinateMap.affine(a=0.25, b=-1.0),
            sw.CoordinateMap.const(7.0),
            sw.CoordinateMap.identity(shift=2.0),
        ]
        for m in maps:
            again = sw.CoordinateMap.from_doc(m.to_doc())
            assert again == m

    def test_doc_rejects_unknown_fields(self):
        with pytest.raises(ValueError):
            sw.CoordinateMap.from_doc({"kind": "ABS", "weird": 1})


class TestMapTable:
    def mixed_maps(self, K, seed=0):
        rng = np.random.default_rng(seed)
        pool = [
            lambda r: sw.CoordinateMap.ssr(t=r.uniform(0.1, 3.0)),
            lambda r: sw.CoordinateMap.neg_ssr(
                t=r.uniform(0.1, 3.0), shift=r.normal()
            ),
            lambda r: sw.CoordinateMap.abs_val(),
            lambda r: sw.CoordinateMap.affine(a=r.uniform(-1, 1), b=r.normal()),
            lambda r: sw.CoordinateMap.const(r.normal()),
            lambda r: sw.CoordinateMap.identity(),
            lambda r: sw.CoordinateMap.ssr(t=r.uniform(0.1, 3.0), shift=r.normal()),
        ]
        return [pool[rng.integers(len(pool))](rng) for _ in range(K)]

    def test_table_equals_scalar_concatenation_bitwise(self):
        K = 64
        maps = self.mixed_maps(K, seed=11)
        rng = np.random.default_rng(12)
        for _ in range(20):
            d = rng.standard_normal(K) * 10.0
            vec = sw.eval_m(maps, d)
            scalar = np.array([sw.eval_map(m, u) for m, u in zip(maps, d)])
            assert np.array_equal(vec, scalar)

    def test_length_mismatch_rejected(self):
        maps = [sw.CoordinateMap.identity()] * 3
        with pytest.raises(ValueError):
            sw.eval_m(maps, np.zeros(4))

    def test_non_finite_vector_rejected(self):
        maps = [sw.CoordinateMap.identity()] * 3
        with pytest.raises(sw.NonFiniteError):
            sw.eval_m(maps, np.array([1.0, np.nan, 0.0]))

    def test_table_reuse_matches_fresh(self):
        maps = self.mixed_maps(17, seed=5)
        table = MapTable(maps)
        d = np.linspace(-4, 4, 17)
        assert np.array_equal(table(d), sw.eval_m(maps, d))


class TestNonexpansiveProbe:
    def test_all_kinds_pass(self):
        kinds = [
            sw.CoordinateMap.ssr(t=0.7),
            sw.CoordinateMap.ssr(t=2.0, shift=1.0),
            sw.CoordinateMap.neg_ssr(t=1.3),
            sw.CoordinateMap.neg_ssr(t=0.4, shift=-2.0),
            sw.CoordinateMap.abs_val(),
            sw.CoordinateMap.affine(a=-1.0, b=3.0),
            sw.CoordinateMap.affine(a=0.3, b=-1.0),
            sw.CoordinateMap.const(5.0),
            sw.CoordinateMap.identity(),
        ]
        for m in kinds:
            assert sw.nonexpansive_probe(m, trials=2000, rng_seed=42)

    def test_probe_catches_expansive_map(self):
        # Bypass constructor validation to mimic a corrupted map object.
        bad = sw.CoordinateMap.affine(a=1.0, b=0.0)
        object.__setattr__(bad, "a", 1.5)
        assert not sw.nonexpansive_probe(bad, trials=2000, rng_seed=0)


class TestProblemSpec:
    def test_dimension_checks(self):
        with pytest.raises(ValueError):
            sw.ProblemSpec(kind="nnls", A=[[1.0, 2.0]], y=[1.0, 2.0])
        with pytest.raises(sw.NonFiniteError):
            sw.ProblemSpec(kind="nnls", A=[[np.inf]], y=[1.0])

    def test_lasso_requires_positive_weight(self):
        with pytest.raises(ValueError):
            sw.ProblemSpec(kind="lasso", A=[[1.0]], y=[1.0], rho_obj=0.0)

    def test_arrays_are_frozen(self):
        spec = sw.ProblemSpec(kind="nnls", A=[[1.0]], y=[2.0])
        with pytest.raises(ValueError):
            spec.A[0, 0] = 9.0

    def test_doc_roundtrip(self):
        spec = sw.ProblemSpec(
            kind="lasso",
            A=[[1.0, -2.0], [0.5, 4.0], [3.0, 0.0]],
            y=[1.0, 2.0, 3.0],
            rho_obj=2.5,
            name="demo",
        )
        again = sw.ProblemSpec.from_doc(spec.to_doc())
        assert np.array_equal(again.A, spec.A)
        assert np.array_equal(again.y, spec.y)
        assert again.rho_obj == spec.rho_obj
        assert again.kind == spec.kind
        assert again.name == "demo"

    def test_doc_rejects_wrong_matrix_size(self):
        doc = {
            "kind": "nnls",
            "A": {"rows": 2, "cols": 2, "data": [1.0, 2.0, 3.0]},
            "y": [0.0, 0.0],
        }
        with pytest.raises(ValueError):
            sw.ProblemSpec.from_doc(doc)


class TestReducedSystem:
    def test_block_partition_enforced(self, toy_nnls):
        _, system = toy_nnls
        with pytest.raises(ValueError):
            sw.ReducedSystem(
                K=2,
                G=system.G,
                f=system.f,
                maps=system.maps,
                x_block=[0],
                w_block=[0],
                provenance=system.provenance,
            )

    def test_validate_flags_non_orthogonal(self, toy_nnls):
        _, system = toy_nnls
        bad = sw.ReducedSystem(
            K=2,
            G=np.eye(2) * 2.0,
            f=system.f,
            maps=system.maps,
            x_block=system.x_block,
            w_block=system.w_block,
            provenance=system.provenance,
        )
        with pytest.raises(ValueError):
            bad.validate()

    def test_doc_roundtrip_uses_one_based_blocks(self, toy_lasso):
        _, system = toy_lasso
        doc = system.to_doc()
        assert doc["x_block"] == [1]
        assert doc["w_block"] == [2]
        again = sw.ReducedSystem.from_doc(doc, validate=True)
        assert np.allclose(again.G, system.G)
        assert again.maps == system.maps
        assert np.array_equal(again.x_block, system.x_block)


class TestSolverConfig:
    def test_bounds(self):
        with pytest.raises(ValueError):
            sw.SolverConfig(rho_filter=0.0)
        with pytest.raises(ValueError):
            sw.SolverConfig(rho_filter=1.5)
        with pytest.raises(ValueError):
            sw.SolverConfig(p=0.0)
        with pytest.raises(ValueError):
            sw.SolverConfig(max_sweeps=0)
        with pytest.raises(ValueError):
            sw.SolverConfig(epsilon=0.0)
        with pytest.raises(ValueError):
            sw.SolverConfig(solver="nope")

    def test_unfiltered_forces_unit_weight(self):
        with pytest.raises(ValueError):
            sw.SolverConfig(filtered=False, rho_filter=0.5)
        cfg = sw.SolverConfig(filtered=False, rho_filter=1.0)
        assert cfg.rho_filter == 1.0

    def test_steps_per_sweep(self):
        assert sw.SolverConfig(p=1.0).steps_per_sweep == 1
        assert sw.SolverConfig(p=0.25).steps_per_sweep == 4
        assert sw.SolverConfig(p=0.3).steps_per_sweep == 4
