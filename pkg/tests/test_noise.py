import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdwave.errors import InvalidSpecError, ShapeError
from sdwave.fem import build_mesh
from sdwave.noise import (
    BrownianStream,
    ModeIncrements,
    build_q_spec,
    build_sine_load_table,
    coarsen_increments,
    dump_increments,
    hs_norm_partial,
    increments_to_load,
    load_increments,
    sample_mode_increments,
)


class TestQSpec:
    def test_white(self):
        q = build_q_spec("white", n_modes=4)
        np.testing.assert_array_equal(q.mode_weights, np.ones(4))
        np.testing.assert_allclose(q.mode_eigvals, np.pi ** 2 * np.array([1, 4, 9, 16]), rtol=1e-15)

    def test_fractional(self):
        q = build_q_spec("fractional", 0.5005, 2)
        np.testing.assert_allclose(q.mode_weights, [np.pi ** -1.001, (2 * np.pi) ** -1.001], rtol=1e-14)

    def test_fractional_zero_is_white(self):
        np.testing.assert_array_equal(build_q_spec("fractional", 0.0, 3).mode_weights,
                                      build_q_spec("white", n_modes=3).mode_weights)

    @pytest.mark.parametrize("n", [0, -1])
    def test_bad_mode_count(self, n):
        with pytest.raises(InvalidSpecError):
            build_q_spec("white", n_modes=n)

    def test_bad_kind_and_exponent(self):
        with pytest.raises(InvalidSpecError):
            build_q_spec("pink")
        with pytest.raises(InvalidSpecError):
            build_q_spec("fractional", -0.1)

    @given(st.floats(0, 3), st.integers(1, 300))
    def test_invariants(self, r, n):
        q = build_q_spec("fractional", r, n)
        assert np.all(q.mode_weights > 0)
        assert np.all(np.diff(q.mode_eigvals) > 0)


class TestHSNorm:
    def test_single_term(self):
        assert hs_norm_partial(build_q_spec("white", n_modes=1), -1.0) == pytest.approx(np.pi ** -2, rel=1e-15)

    def test_white_gamma0_converges(self):
        vals = [hs_norm_partial(build_q_spec("white", n_modes=J), 0.0) for J in (10, 100, 1000)]
        assert vals[0] < vals[1] < vals[2] < 1 / np.sqrt(6)
        # Basel tail: sum_{j>J} (j pi)^-2 ~ 1/(pi^2 J)
        for J, v in zip((10, 100, 1000), vals):
            tail = 1 / 6 - v ** 2
            assert tail == pytest.approx(1 / (np.pi ** 2 * (J + 0.5)), rel=1e-2)

    def test_white_gamma1_diverges(self):
        vals = [hs_norm_partial(build_q_spec("white", n_modes=J), 1.0) for J in (100, 1000, 10000)]
        np.testing.assert_allclose(vals, np.sqrt([100, 1000, 10000]), rtol=1e-12)

    def test_fractional_gamma1_bounded_growth(self):
        # q_j = lambda_j^{-0.5005}: the gamma = 1 sum converges, very slowly
        vals = [hs_norm_partial(build_q_spec("fractional", 0.5005, J), 1.0) for J in (10, 100, 1000)]
        assert vals[0] < vals[1] < vals[2]


class TestIncrements:
    def test_variance(self):
        q = build_q_spec("white", n_modes=3)
        inc = sample_mode_increments(q, 100_000, 0.01, seed=1)
        var = inc.increments.var(axis=0)
        assert np.all((var >= 0.0097) & (var <= 0.0103))

    def test_fractional_variance(self):
        q = build_q_spec("fractional", 0.5005, 4)
        inc = sample_mode_increments(q, 100_000, 0.01, seed=2)
        expected = q.mode_weights * 0.01
        se = expected * np.sqrt(2 / 100_000)
        assert np.all(np.abs(inc.increments.var(axis=0) - expected) <= 3 * se)

    def test_deterministic(self):
        q = build_q_spec("white", n_modes=5)
        a = sample_mode_increments(q, 100, 0.1, seed=42).increments
        b = sample_mode_increments(q, 100, 0.1, seed=42).increments
        assert a.tobytes() == b.tobytes()

    def test_seeds_differ(self):
        q = build_q_spec("white", n_modes=2)
        a = sample_mode_increments(q, 10, 0.1, seed=1).increments
        b = sample_mode_increments(q, 10, 0.1, seed=2).increments
        assert not np.array_equal(a, b)

    def test_independent_columns(self):
        q = build_q_spec("white", n_modes=2)
        inc = sample_mode_increments(q, 100_000, 0.01, seed=3).increments
        assert abs(np.corrcoef(inc[:, 0], inc[:, 1])[0, 1]) <= 0.01

    def test_entry_independent_of_mode_count(self):
        a = sample_mode_increments(build_q_spec("white", n_modes=4), 50, 0.1, seed=9).increments
        b = sample_mode_increments(build_q_spec("white", n_modes=16), 50, 0.1, seed=9).increments
        np.testing.assert_array_equal(a, b[:, :4])

    @given(st.lists(st.integers(1, 40), min_size=1, max_size=6))
    @settings(max_examples=25, deadline=None)
    def test_block_draws_equal_one_shot(self, blocks):
        q = build_q_spec("fractional", 0.5, 3)
        stream = BrownianStream(q, 0.01, seed=5)
        pieces = np.concatenate([stream.draw(b) for b in blocks])
        whole = sample_mode_increments(q, sum(blocks), 0.01, seed=5).increments
        np.testing.assert_array_equal(pieces, whole)

    def test_bad_arguments(self):
        q = build_q_spec("white", n_modes=2)
        with pytest.raises(ShapeError):
            sample_mode_increments(q, 0, 0.1, 0)
        with pytest.raises(ShapeError):
            sample_mode_increments(q, 10, 0.0, 0)


class TestCoarsen:
    def make(self, n=16, J=3, seed=0):
        return sample_mode_increments(build_q_spec("white", n_modes=J), n, 1 / n, seed)

    def test_identity(self):
        inc = self.make()
        out = coarsen_increments(inc, 1)
        np.testing.assert_array_equal(out.increments, inc.increments)
        assert out.k == inc.k

    def test_full(self):
        inc = self.make()
        out = coarsen_increments(inc, 16)
        assert out.n_steps == 1
        np.testing.assert_allclose(out.increments[0], inc.increments.sum(axis=0), atol=1e-15)

    def test_pairs(self):
        inc = self.make(n=4)
        out = coarsen_increments(inc, 2)
        x = inc.increments
        np.testing.assert_array_equal(out.increments, [x[0] + x[1], x[2] + x[3]])
        assert out.k == 2 * inc.k

    def test_indivisible(self):
        with pytest.raises(ShapeError):
            coarsen_increments(self.make(n=12), 5)

    @given(st.sampled_from([1, 2, 4, 8]), st.sampled_from([1, 2, 4, 8]), st.integers(0, 1000))
    @settings(max_examples=30, deadline=None)
    def test_chain_consistency(self, f1, f2, seed):
        inc = self.make(n=64, seed=seed)
        two = coarsen_increments(coarsen_increments(inc, f1), f2)
        one = coarsen_increments(inc, f1 * f2)
        np.testing.assert_allclose(two.increments, one.increments, atol=1e-12)
        assert two.k == pytest.approx(one.k, rel=1e-15)


def quadrature_loads(coefs, mesh, order=20):
    """Loads of sum_j c_j sqrt(2) sin(j pi x) against every hat, Gauss-Legendre per half-hat."""
    t, w = np.polynomial.legendre.leggauss(order)
    t, w = 0.5 * (t + 1), 0.5 * w
    freqs = np.pi * np.arange(1, coefs.size + 1)
    f = lambda x: np.sqrt(2) * np.sin(np.multiply.outer(x, freqs)) @ coefs
    h = mesh.h
    out = []
    for xi in mesh.interior_nodes:
        left = (w * t * f(xi - h + h * t)).sum() * h
        right = (w * (1 - t) * f(xi + h * t)).sum() * h
        out.append(left + right)
    return np.array(out)


class TestLoads:
    def test_zero(self):
        table = build_sine_load_table(build_mesh(8), 5)
        np.testing.assert_array_equal(increments_to_load(np.zeros(5), table), np.zeros(7))

    def test_single_mode_column(self):
        table = build_sine_load_table(build_mesh(8), 5)
        row = np.zeros(5)
        row[2] = 0.3
        np.testing.assert_allclose(increments_to_load(row, table), 0.3 * table.G[:, 2], rtol=1e-15)

    def test_against_quadrature(self):
        mesh = build_mesh(64)
        q = build_q_spec("white", n_modes=64)
        row = sample_mode_increments(q, 1, 1e-2, seed=4).increments[0]
        got = increments_to_load(row, build_sine_load_table(mesh, 64))
        np.testing.assert_allclose(got, quadrature_loads(row, mesh), atol=1e-9)

    def test_table_entries(self):
        mesh = build_mesh(16)
        table = build_sine_load_table(mesh, 40)
        for j in (1, 7, 16, 33, 40):
            e = np.zeros(40)
            e[j - 1] = 1.0
            np.testing.assert_allclose(table.G[:, j - 1], quadrature_loads(e, mesh), atol=1e-12)

    def test_mode_mismatch(self):
        with pytest.raises(ShapeError):
            increments_to_load(np.zeros(4), build_sine_load_table(build_mesh(8), 5))

    def test_batched_rows(self):
        table = build_sine_load_table(build_mesh(8), 5)
        rows = np.random.default_rng(0).standard_normal((3, 5))
        out = increments_to_load(rows, table)
        for r, o in zip(rows, out):
            np.testing.assert_allclose(o, increments_to_load(r, table), rtol=1e-14)


class TestDump:
    def test_round_trip(self, tmp_path):
        inc = sample_mode_increments(build_q_spec("fractional", 0.5005, 7), 33, 1 / 32, seed=2**63 + 5)
        path = tmp_path / "inc.bin"
        dump_increments(inc, path)
        back = load_increments(path)
        assert back.increments.tobytes() == inc.increments.tobytes()
        assert back.k == inc.k and back.seed == inc.seed

    def test_layout(self, tmp_path):
        inc = ModeIncrements(np.arange(6, dtype=float).reshape(3, 2), 0.5, 11)
        path = tmp_path / "inc.bin"
        dump_increments(inc, path)
        raw = path.read_bytes()
        magic, version, J, n, k, seed = struct.unpack_from("<8sIIQdQ", raw)
        assert (J, n, k, seed, version) == (2, 3, 0.5, 11, 1)
        assert magic.startswith(b"SDWINC")
        np.testing.assert_array_equal(np.frombuffer(raw[40:], "<f8"), np.arange(6.0))

    def test_corrupt(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"nonsense" * 10)
        with pytest.raises(ShapeError):
            load_increments(path)

    def test_truncated(self, tmp_path):
        inc = ModeIncrements(np.ones((3, 2)), 0.5, 1)
        path = tmp_path / "inc.bin"
        dump_increments(inc, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ShapeError):
            load_increments(path)
