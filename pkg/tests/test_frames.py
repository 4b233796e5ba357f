"""Tests for low-coherence frame design, tightening, and persistence.

The QCQP subproblem tests are anchored on a hand-checkable J=2, L=3
instance whose trust radius is exactly 0.5, plus an optimal objective
value computed independently of the library by two oracles (exhaustive
grid search over the feasible ball refined to 1e-4 resolution, and an
SLSQP multi-start on the smooth slack formulation; the two agree to
3.2e-5).  Structural identities (block layout, slack equivalence,
feasibility of the current column) are asserted exactly.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gfmimo import (
    CsidcoConfig,
    DegenerateColumnError,
    FrameFormatError,
    FrameMatrix,
    SolverError,
    csidco_design,
    dft_frame,
    frame_bounds,
    gaussian_frame,
    load_frame,
    mutual_coherence,
    save_frame,
    tighten,
    welch_bound,
)
from gfmimo.frames import build_subproblem, solve_subproblem, tightness_spread

# Hand-built J=2, L=3 frame: columns are unit norm and the two squared
# correlations of column 2 against columns 0 and 1 both equal 0.5, so
# the trust radius for updating column 2 is exactly 1 - 0.5 = 0.5.
HAND_ENTRIES = np.array(
    [[1.0, 0.6, 0.5 + 0.5j],
     [0.0, 0.8, 0.5 - 0.5j]],
    dtype=complex,
)

# Optimal objective of the column-2 subproblem above, from two
# independent oracles (refined grid search and SLSQP multi-start).
HAND_OPTIMAL_OBJECTIVE = 0.1318976849545414


class TestMutualCoherence:
    def test_orthonormal_basis_is_zero(self):
        assert mutual_coherence(np.eye(2, dtype=complex)) == 0.0

    def test_duplicated_column_is_one(self):
        ent = np.array([[1.0, 1.0], [0.0, 0.0]], dtype=complex)
        assert_allclose(mutual_coherence(ent), 1.0, atol=1e-12)

    def test_gaussian_frame_exceeds_welch_bound(self):
        bound = welch_bound(14, 100)
        for seed in range(5):
            f = gaussian_frame(14, 100, seed)
            assert mutual_coherence(f) > bound

    def test_single_column_rejected(self):
        with pytest.raises(ValueError):
            mutual_coherence(np.array([[1.0], [0.0]], dtype=complex))

    def test_accepts_frame_or_array(self):
        f = gaussian_frame(3, 6, 0)
        assert mutual_coherence(f) == mutual_coherence(f.entries)

    def test_invariant_to_column_phases(self):
        # Coherence depends only on correlation moduli, so rotating
        # each column by an arbitrary phase must not change it.
        rng = np.random.default_rng(7)
        for _ in range(20):
            f = gaussian_frame(4, 9, rng.integers(1 << 31))
            phases = np.exp(2j * np.pi * rng.random(9))
            assert_allclose(
                mutual_coherence(f.entries * phases),
                mutual_coherence(f),
                rtol=1e-12,
            )


class TestWelchBound:
    def test_reference_values(self):
        assert_allclose(welch_bound(14, 100), np.sqrt(86.0 / (14 * 99)),
                        rtol=1e-15)
        assert_allclose(welch_bound(14, 100), 0.2490964, atol=1e-7)
        assert_allclose(welch_bound(2, 4), np.sqrt(2.0 / 6.0), rtol=1e-15)

    def test_not_overcomplete_rejected(self):
        with pytest.raises(ValueError):
            welch_bound(5, 5)
        with pytest.raises(ValueError):
            welch_bound(5, 4)

    def test_beyond_validity_range_rejected(self):
        # The bound is used only for L <= J^2.
        with pytest.raises(ValueError):
            welch_bound(2, 5)

    def test_lower_bounds_any_unit_norm_frame(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            j = int(rng.integers(2, 6))
            l = int(rng.integers(j + 1, j * j + 1))
            f = gaussian_frame(j, l, int(rng.integers(1 << 31)))
            assert mutual_coherence(f) >= welch_bound(j, l) - 1e-12


class TestFrameBounds:
    def test_orthonormal_basis(self):
        alpha, beta = frame_bounds(np.eye(3, dtype=complex))
        assert_allclose([alpha, beta], [1.0, 1.0], atol=1e-12)

    def test_two_orthonormal_pairs_tight(self):
        # Two copies of an orthonormal pair: frame operator (L/J) I = 2 I.
        ent = np.array([[1.0, 0.0, 1.0, 0.0],
                        [0.0, 1.0, 0.0, 1.0]], dtype=complex)
        alpha, beta = frame_bounds(ent)
        assert_allclose([alpha, beta], [2.0, 2.0], atol=1e-12)

    def test_random_frame_not_tight(self):
        alpha, beta = frame_bounds(gaussian_frame(14, 100, 0))
        assert alpha < beta

    def test_trace_identity(self):
        # Eigenvalues of F F^H sum to the squared Frobenius norm, which
        # is L for a unit-norm frame; for J=2 the two bounds are the
        # whole spectrum.
        f = gaussian_frame(2, 6, 3)
        alpha, beta = frame_bounds(f)
        assert_allclose(alpha + beta, 6.0, rtol=1e-12)


class TestBuildSubproblem:
    def test_hand_instance_radius(self):
        sub = build_subproblem(HAND_ENTRIES, 2)
        assert_allclose(sub.t_l, 0.5, atol=1e-12)

    def test_block_shapes_and_layout(self):
        sub = build_subproblem(HAND_ENTRIES, 2)
        others = np.delete(HAND_ENTRIES, 2, axis=1)
        for block in (sub.a_r1, sub.a_r2, sub.a_i1, sub.a_i2):
            assert block.shape == (2, 6)
        assert_allclose(sub.a_r1[:, :2], others.T.real, atol=1e-15)
        assert_allclose(sub.a_r1[:, 2:4], others.T.imag, atol=1e-15)
        assert_allclose(sub.a_r1[:, 4], -1.0, atol=1e-15)
        assert_allclose(sub.a_r1[:, 5], 0.0, atol=1e-15)
        assert_allclose(sub.a_r2[:, :4], -sub.a_r1[:, :4], atol=1e-15)
        assert_allclose(sub.a_i1[:, :2], -others.T.imag, atol=1e-15)
        assert_allclose(sub.a_i1[:, 2:4], others.T.real, atol=1e-15)
        assert_allclose(sub.a_i1[:, 5], -1.0, atol=1e-15)

    def test_ball_center_vector(self):
        sub = build_subproblem(HAND_ENTRIES, 2)
        assert_allclose(sub.b, [0.5, 0.5, 0.5, -0.5, 0.0, 0.0], atol=1e-15)

    def test_duplicated_column_degenerate(self):
        ent = np.array([[1.0, 0.0, 1.0],
                        [0.0, 1.0, 0.0]], dtype=complex)
        with pytest.raises(DegenerateColumnError):
            build_subproblem(ent, 2)

    def test_current_column_with_true_slacks_is_feasible(self):
        # The current column, paired with slacks equal to the true
        # max |Re| and max |Im| correlations, satisfies every linear
        # inequality (boundary contact allowed) and sits at ball value
        # exactly -T^2.
        rng = np.random.default_rng(5)
        for _ in range(50):
            j = int(rng.integers(2, 5))
            l = int(rng.integers(j + 1, j * j + 1))
            f = gaussian_frame(j, l, int(rng.integers(1 << 31)))
            col = int(rng.integers(l))
            sub = build_subproblem(f, col)
            others = np.delete(f.entries, col, axis=1)
            corr = others.conj().T @ f.entries[:, col]
            x = np.concatenate([
                f.entries[:, col].real,
                f.entries[:, col].imag,
                [np.max(np.abs(corr.real)), np.max(np.abs(corr.imag))],
            ])
            assert np.max(sub.a_stack() @ x) <= 1e-12
            assert_allclose(sub.ball_value(x), -sub.t_l ** 2, atol=1e-12)

    def test_slack_inequality_equivalence(self):
        # The four stacked sign-split blocks applied to [Re f; Im f;
        # t_R; t_I] are all <= 0 exactly when |Re(F~^H f)| <= t_R and
        # |Im(F~^H f)| <= t_I hold elementwise.
        rng = np.random.default_rng(17)
        for _ in range(200):
            j = int(rng.integers(2, 5))
            l = int(rng.integers(j + 1, j * j + 1))
            f = gaussian_frame(j, l, int(rng.integers(1 << 31)))
            col = int(rng.integers(l))
            sub = build_subproblem(f, col)
            others = np.delete(f.entries, col, axis=1)
            fvec = rng.standard_normal(j) + 1j * rng.standard_normal(j)
            t_r, t_i = rng.random(2)
            x = np.concatenate([fvec.real, fvec.imag, [t_r, t_i]])
            corr = others.conj().T @ fvec
            direct = (np.all(np.abs(corr.real) <= t_r)
                      and np.all(np.abs(corr.imag) <= t_i))
            stacked = bool(np.all(sub.a_stack() @ x <= 0))
            assert stacked == direct


class TestSolveSubproblem:
    def test_matches_independent_oracles(self):
        sub = build_subproblem(HAND_ENTRIES, 2)
        x = solve_subproblem(sub, CsidcoConfig())
        assert abs(sub.objective(x) - HAND_OPTIMAL_OBJECTIVE) < 1e-4

    def test_solution_feasible(self):
        rng = np.random.default_rng(23)
        for _ in range(25):
            j = int(rng.integers(2, 5))
            l = int(rng.integers(j + 1, j * j + 1))
            f = gaussian_frame(j, l, int(rng.integers(1 << 31)))
            sub = build_subproblem(f, int(rng.integers(l)))
            x = solve_subproblem(sub, CsidcoConfig())
            assert np.max(sub.a_stack() @ x) <= 1e-6
            assert sub.ball_value(x) <= 1e-6

    def test_never_worse_than_start(self):
        rng = np.random.default_rng(29)
        for _ in range(25):
            j = int(rng.integers(2, 5))
            l = int(rng.integers(j + 1, j * j + 1))
            f = gaussian_frame(j, l, int(rng.integers(1 << 31)))
            sub = build_subproblem(f, int(rng.integers(l)))
            x = solve_subproblem(sub, CsidcoConfig())
            assert sub.objective(x) <= sub.objective(sub.x0) + 1e-12

    def test_step_budget_exhaustion_raises(self):
        sub = build_subproblem(HAND_ENTRIES, 2)
        cfg = CsidcoConfig(solver_max_steps=1)
        with pytest.raises(SolverError) as err:
            solve_subproblem(sub, cfg)
        assert err.value.last_iterate.shape == (6,)


class TestCsidcoDesign:
    def test_small_instance_reaches_welch_bound(self):
        f = csidco_design(2, 4, CsidcoConfig(seed=0))
        bound = welch_bound(2, 4)
        assert mutual_coherence(f) <= 1.05 * bound

    def test_coherence_history_non_increasing(self):
        f = csidco_design(3, 9, CsidcoConfig(outer_iterations=8, seed=1))
        hist = f.coherence_history
        assert hist is not None and len(hist) == 9
        assert np.all(np.diff(hist) <= 1e-12)

    def test_zero_outer_iterations_is_noop(self):
        f = csidco_design(14, 100, CsidcoConfig(outer_iterations=0, seed=5))
        g = gaussian_frame(14, 100, 5)
        assert np.array_equal(f.entries, g.entries)
        assert len(f.coherence_history) == 1

    def test_never_worse_than_gaussian_start(self):
        # Quantified over 20 seeds at a small size: the design always
        # sits between the Welch bound and its own random initializer.
        cfg_outer = 6
        for seed in range(20):
            f = csidco_design(3, 8, CsidcoConfig(outer_iterations=cfg_outer,
                                                 seed=seed))
            start = mutual_coherence(gaussian_frame(3, 8, seed))
            mu = mutual_coherence(f)
            assert welch_bound(3, 8) - 1e-12 <= mu <= start + 1e-12

    def test_unit_norm_output(self):
        f = csidco_design(3, 8, CsidcoConfig(outer_iterations=4, seed=2))
        assert_allclose(np.linalg.norm(f.entries, axis=0), 1.0, atol=1e-9)

    def test_invalid_shape_rejected(self):
        with pytest.raises(ValueError):
            csidco_design(4, 4, CsidcoConfig())
        with pytest.raises(ValueError):
            csidco_design(2, 5, CsidcoConfig())

    def test_pilot_scale_quality_and_tightening(self):
        # One full-size design: coherence within 1.2x of the Welch
        # bound, and tightening preserves both the coherence level and
        # near-tightness.  (The acceptance suite repeats this over ten
        # seeds; a single run keeps the module tests fast.)
        f = csidco_design(14, 100, CsidcoConfig(seed=0))
        bound = welch_bound(14, 100)
        assert mutual_coherence(f) <= 1.2 * bound
        ft = tighten(f, 50)
        assert mutual_coherence(ft) <= 1.2 * bound
        assert tightness_spread(ft.entries) < 0.05


class TestTighten:
    def test_fixed_point_on_tight_frame(self):
        ent = np.array([[1.0, 0.0, 1.0, 0.0],
                        [0.0, 1.0, 0.0, 1.0]], dtype=complex)
        out = tighten(FrameMatrix(ent), 10)
        assert_allclose(out.entries, ent, atol=1e-9)

    def test_zero_rounds_identity(self):
        f = gaussian_frame(4, 10, 0)
        out = tighten(f, 0)
        assert np.array_equal(out.entries, f.entries)

    def test_reduces_spread_on_random_frame(self):
        f = gaussian_frame(14, 100, 3)
        out = tighten(f, 50)
        assert tightness_spread(out.entries) < 0.05
        assert tightness_spread(out.entries) <= tightness_spread(f.entries)

    def test_spread_never_increases_per_round(self):
        f = gaussian_frame(6, 20, 4)
        cur = f
        for _ in range(12):
            nxt = tighten(cur, 1)
            assert (tightness_spread(nxt.entries)
                    <= tightness_spread(cur.entries) + 1e-9)
            cur = nxt

    def test_output_unit_norm(self):
        out = tighten(gaussian_frame(5, 18, 6), 25)
        assert_allclose(np.linalg.norm(out.entries, axis=0), 1.0, atol=1e-12)

    def test_rank_deficient_rejected(self):
        # Columns confined to a 2-dim subspace of C^3.
        ent = np.zeros((3, 5), dtype=complex)
        rng = np.random.default_rng(8)
        ent[:2] = rng.standard_normal((2, 5)) + 1j * rng.standard_normal((2, 5))
        ent /= np.linalg.norm(ent, axis=0)
        with pytest.raises(ValueError):
            tighten(FrameMatrix(ent), 5)


class TestFramePersistence:
    def test_round_trip_bit_identical(self, tmp_path):
        f = gaussian_frame(7, 23, 9)
        path = tmp_path / "pilot.frm"
        save_frame(path, f)
        g = load_frame(path)
        assert np.array_equal(f.entries, g.entries)
        assert (g.j, g.l) == (7, 23)

    def test_truncated_file_rejected(self, tmp_path):
        f = gaussian_frame(3, 6, 0)
        path = tmp_path / "pilot.frm"
        save_frame(path, f)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 8])
        with pytest.raises(FrameFormatError):
            load_frame(path)

    def test_truncated_header_rejected(self, tmp_path):
        path = tmp_path / "pilot.frm"
        path.write_bytes(b"GFRM\x01")
        with pytest.raises(FrameFormatError):
            load_frame(path)

    def test_bad_magic_rejected(self, tmp_path):
        f = gaussian_frame(3, 6, 0)
        path = tmp_path / "pilot.frm"
        save_frame(path, f)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(FrameFormatError):
            load_frame(path)

    def test_unsupported_version_reported(self, tmp_path):
        f = gaussian_frame(3, 6, 0)
        path = tmp_path / "pilot.frm"
        save_frame(path, f)
        raw = bytearray(path.read_bytes())
        raw[4:8] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(FrameFormatError, match="99"):
            load_frame(path)

    def test_corrupt_payload_rejected(self, tmp_path):
        # Doubling one entry breaks the unit-norm invariant on load.
        f = gaussian_frame(3, 6, 0)
        path = tmp_path / "pilot.frm"
        save_frame(path, f)
        raw = bytearray(path.read_bytes())
        header = 16
        payload = np.frombuffer(bytes(raw[header:]), dtype="<c16").copy()
        payload[0] *= 2.0
        path.write_bytes(bytes(raw[:header]) + payload.tobytes())
        with pytest.raises(FrameFormatError):
            load_frame(path)


class TestFrameGenerators:
    def test_gaussian_frame_seeded_determinism(self):
        a = gaussian_frame(4, 12, 42)
        b = gaussian_frame(4, 12, 42)
        assert np.array_equal(a.entries, b.entries)

    def test_dft_frame_unit_columns(self):
        f = dft_frame(14, 100, 0)
        assert_allclose(np.linalg.norm(f.entries, axis=0), 1.0, atol=1e-12)

    def test_dft_frame_rows_from_dft_matrix(self):
        # Every row of the subsampled frame matches some row of the
        # full L x L DFT matrix scaled by 1/sqrt(J).
        j, l = 4, 16
        f = dft_frame(j, l, 1)
        full = np.exp(-2j * np.pi * np.outer(np.arange(l), np.arange(l)) / l)
        full /= np.sqrt(j)
        for row in f.entries:
            assert any(np.allclose(row, cand, atol=1e-12) for cand in full)
