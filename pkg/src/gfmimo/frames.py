"""Low-coherence pilot frame design.

A pilot frame is a J x L complex matrix with unit-norm columns, J <= L.
Column l is the pilot sequence assigned to user l; the worst-case pairwise
correlation (mutual coherence) controls how well a receiver can tell users
apart from short pilots.  This module provides

* frame quality measures (mutual coherence, Welch lower bound, frame bounds),
* a coordinate-descent designer that re-solves one column at a time as a small
  convex QCQP (minimize the worst correlation against the other columns,
  subject to staying inside a ball around the current column),
* a polar-decomposition tightening pass that pushes a unit-norm frame toward
  tightness (equal frame bounds),
* a small binary file format for designed frames.

The QCQP is solved with a log-barrier interior-point method written here; the
problems are tiny (dimension 2J + 2) and solving them directly avoids pulling
in an external solver for a dense, well-conditioned subproblem.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateColumnError, FrameFormatError, SolverError

_UNIT_NORM_TOL = 1e-9

# ---------------------------------------------------------------------------
# frame container
# ---------------------------------------------------------------------------


@dataclass
class FrameMatrix:
    """Unit-norm complex frame with optional design metadata.

    entries : (J, L) complex ndarray, every column has unit 2-norm.
    coherence_history : per-outer-iteration mutual coherence recorded by
        ``csidco_design`` (None for frames built elsewhere).
    """

    entries: np.ndarray
    coherence_history: np.ndarray | None = field(default=None)

    def __post_init__(self):
        ent = np.ascontiguousarray(self.entries, dtype=np.complex128)
        if ent.ndim != 2:
            raise ValueError(f"frame entries must be 2-D, got shape {ent.shape}")
        j, l = ent.shape
        if j < 1 or l < j:
            raise ValueError(f"need 1 <= J <= L, got J={j}, L={l}")
        if not np.all(np.isfinite(ent.view(np.float64))):
            raise ValueError("frame entries must be finite")
        norms = np.linalg.norm(ent, axis=0)
        if np.any(np.abs(norms - 1.0) > _UNIT_NORM_TOL):
            worst = float(np.max(np.abs(norms - 1.0)))
            raise ValueError(
                f"frame columns must be unit-norm (worst deviation {worst:.3e})"
            )
        self.entries = ent

    @property
    def j(self) -> int:
        return self.entries.shape[0]

    @property
    def l(self) -> int:
        return self.entries.shape[1]


def _as_entries(f) -> np.ndarray:
    """Accept FrameMatrix or a bare (J, L) array."""
    if isinstance(f, FrameMatrix):
        return f.entries
    return np.asarray(f, dtype=np.complex128)


# ---------------------------------------------------------------------------
# quality measures
# ---------------------------------------------------------------------------


def mutual_coherence(f) -> float:
    """Largest absolute inner product between distinct normalized columns."""
    ent = _as_entries(f)
    if ent.ndim != 2 or ent.shape[1] < 2:
        raise ValueError("mutual coherence needs at least two columns")
    norms = np.linalg.norm(ent, axis=0)
    if np.any(norms == 0.0):
        raise ValueError("mutual coherence undefined for zero columns")
    g = (ent / norms).conj().T @ (ent / norms)
    np.fill_diagonal(g, 0.0)
    return float(np.max(np.abs(g)))


def welch_bound(j: int, l: int) -> float:
    """Lower bound sqrt((L-J)/(J(L-1))) on coherence of a J x L unit-norm frame.

    Valid (and enforced) for J < L <= J**2.
    """
    if j < 1 or l <= j:
        raise ValueError(f"Welch bound needs 1 <= J < L, got J={j}, L={l}")
    if l > j * j:
        raise ValueError(f"Welch bound regime requires L <= J^2, got J={j}, L={l}")
    return float(np.sqrt((l - j) / (j * (l - 1.0))))


def frame_bounds(f) -> tuple[float, float]:
    """(alpha, beta): smallest/largest eigenvalue of F F^H."""
    ent = _as_entries(f)
    eig = np.linalg.eigvalsh(ent @ ent.conj().T)
    return float(eig[0]), float(eig[-1])


def tightness_spread(f) -> float:
    """Relative frame-bound spread (beta - alpha) / alpha; 0 for tight frames."""
    alpha, beta = frame_bounds(f)
    if alpha <= 0.0:
        return np.inf
    return (beta - alpha) / alpha


# ---------------------------------------------------------------------------
# reference frames (random baselines)
# ---------------------------------------------------------------------------


def gaussian_frame(j: int, l: int, seed: int) -> FrameMatrix:
    """Column-normalized i.i.d. complex Gaussian frame."""
    rng = np.random.default_rng(seed)
    ent = rng.standard_normal((j, l)) + 1j * rng.standard_normal((j, l))
    ent /= np.linalg.norm(ent, axis=0)
    return FrameMatrix(ent)


def dft_frame(j: int, l: int, seed: int) -> FrameMatrix:
    """Randomly row-truncated L x L DFT matrix, columns renormalized."""
    if j > l:
        raise ValueError(f"need J <= L, got J={j}, L={l}")
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(l, size=j, replace=False))
    k = np.arange(l)
    ent = np.exp(-2j * np.pi * np.outer(rows, k) / l) / np.sqrt(j)
    return FrameMatrix(ent)


# ---------------------------------------------------------------------------
# per-column QCQP subproblem
# ---------------------------------------------------------------------------
#
# Updating column l with the others fixed: write the trial column f and two
# slack variables t_R, t_I as a real vector x = [Re f; Im f; t_R; t_I] of
# length 2J + 2.  With F~ the J x (L-1) matrix of the remaining columns,
# |Re{F~^H f}| <= t_R and |Im{F~^H f}| <= t_I unroll into four linear blocks,
# and the trust ball ||f - f~||^2 <= T^2 around the current column f~ is one
# convex quadratic.  Minimizing t_R^2 + t_I^2 then minimizes an upper bound
# on the worst squared correlation of the new column.


@dataclass
class QcqpSubproblem:
    """One column-update QCQP in stacked real coordinates.

    a_r1, a_r2, a_i1, a_i2 : (L-1, 2J+2) linear constraint blocks, rows
        a^T x <= 0 bounding +/- real and imaginary correlation parts.
    b : (2J+2,) linear term of the ball constraint (the current column).
    t_l : ball radius; the ball is x^T Xi x - 2 b^T x + 1 - t_l^2 <= 0.
    x0 : strictly feasible starting point (current column plus padded slacks).
    """

    a_r1: np.ndarray
    a_r2: np.ndarray
    a_i1: np.ndarray
    a_i2: np.ndarray
    b: np.ndarray
    t_l: float
    x0: np.ndarray

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    @property
    def n_complex(self) -> int:
        return (self.b.shape[0] - 2) // 2

    def a_stack(self) -> np.ndarray:
        return np.vstack([self.a_r1, self.a_r2, self.a_i1, self.a_i2])

    def objective(self, x: np.ndarray) -> float:
        return float(x[-2] ** 2 + x[-1] ** 2)

    def ball_value(self, x: np.ndarray) -> float:
        """Quadratic ball constraint value (feasible iff <= 0)."""
        n2 = 2 * self.n_complex
        return float(x[:n2] @ x[:n2] - 2.0 * (self.b @ x) + 1.0 - self.t_l**2)


def build_subproblem(f, ell: int) -> QcqpSubproblem:
    """Assemble the column-``ell`` update QCQP for frame ``f``."""
    ent = _as_entries(f)
    j, l = ent.shape
    if not 0 <= ell < l:
        raise ValueError(f"column index {ell} out of range for L={l}")
    if l < 2:
        raise ValueError("need at least two columns to form a subproblem")

    ft = ent[:, ell]
    others = np.delete(ent, ell, axis=1)  # J x (L-1)
    corr = others.conj().T @ ft
    mu2 = float(np.max(np.abs(corr) ** 2))
    t_l = 1.0 - mu2
    if t_l <= 1e-12:
        raise DegenerateColumnError(
            f"column {ell} is (numerically) parallel to another column"
        )

    re_t = others.real.T  # (L-1) x J
    im_t = others.imag.T
    m1 = np.full((l - 1, 1), -1.0)
    z1 = np.zeros((l - 1, 1))
    a_r1 = np.hstack([re_t, im_t, m1, z1])
    a_r2 = np.hstack([-re_t, -im_t, m1, z1])
    a_i1 = np.hstack([-im_t, re_t, z1, m1])
    a_i2 = np.hstack([im_t, -re_t, z1, m1])

    b = np.concatenate([ft.real, ft.imag, [0.0, 0.0]])

    # strictly feasible start: current column with slacks just above the
    # attained correlation extremes
    pad = 1e-6 + 1e-3 * np.sqrt(mu2)
    x0 = np.concatenate(
        [ft.real, ft.imag, [np.max(np.abs(corr.real)) + pad, np.max(np.abs(corr.imag)) + pad]]
    )
    return QcqpSubproblem(a_r1, a_r2, a_i1, a_i2, b, t_l, x0)


# ---------------------------------------------------------------------------
# log-barrier interior-point solver
# ---------------------------------------------------------------------------


@dataclass
class CsidcoConfig:
    """Knobs for the coordinate-descent frame designer.

    outer_iterations : full passes over all columns.
    solver_tolerance : target duality-gap bound m / t_barrier for the
        interior-point subproblem solver.
    solver_max_steps : total Newton-step budget per subproblem.
    tighten_rounds : polar/renormalize rounds applied after the descent.
    seed : RNG seed for the random starting frame.
    """

    outer_iterations: int = 24
    solver_tolerance: float = 1e-6
    solver_max_steps: int = 400
    tighten_rounds: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.outer_iterations < 0:
            raise ValueError("outer_iterations must be >= 0")
        if not 0.0 < self.solver_tolerance < 1.0:
            raise ValueError("solver_tolerance must lie in (0, 1)")
        if self.solver_max_steps < 1:
            raise ValueError("solver_max_steps must be >= 1")
        if self.tighten_rounds < 0:
            raise ValueError("tighten_rounds must be >= 0")


def solve_subproblem(p: QcqpSubproblem, cfg: CsidcoConfig) -> np.ndarray:
    """Minimize t_R^2 + t_I^2 subject to the subproblem's constraints.

    Log-barrier path following with damped Newton centering and a
    backtracking line search that never leaves the strict interior.
    Internally the column coordinates are shifted to the ball center and
    scaled by its radius, so near-duplicate columns (tiny trust radius)
    stay well conditioned.  Returns the stacked real solution vector in
    the original coordinates; the objective is guaranteed not to exceed
    the starting point's.
    """
    a_orig = p.a_stack()
    n_rows = a_orig.shape[0]
    dim = p.dim
    n2 = dim - 2
    center = p.b[:n2]
    radius = p.t_l
    m_total = n_rows + 1  # inequality count (linear rows + ball)

    # normalized coordinates z = [u; slacks] with column = center + radius*u;
    # the ball becomes ||u||^2 <= r2 (r2 = 1 when the center is unit norm)
    a = a_orig.copy()
    a[:, :n2] *= radius
    r_lin = a_orig[:, :n2] @ center  # constant row offsets
    r2 = 1.0 - (1.0 - center @ center) / radius**2

    def decode(z):
        x = z.copy()
        x[:n2] = center + radius * z[:n2]
        return x

    def ball(z):
        return z[:n2] @ z[:n2] - r2

    def feasible(z):
        return np.all(a @ z + r_lin < 0.0) and ball(z) < 0.0

    z = p.x0.copy()
    z[:n2] = (p.x0[:n2] - center) / radius
    if not feasible(z):  # defensive; construction should guarantee this
        raise SolverError(
            "infeasible starting point", last_iterate=p.x0.copy(), steps=0
        )

    steps = 0
    # start the barrier so the initial gap bound m/t roughly matches the
    # objective scale at the starting point; saves stages on warm starts
    t_bar = max(1.0, m_total / max(p.objective(p.x0), 10.0 * cfg.solver_tolerance))
    mu = 30.0
    idx = np.arange(dim)

    while True:
        # --- centering for current t_bar ---
        # intermediate stages only need loose centering; tighten at the end
        ctol = 1e-8 if m_total / t_bar <= mu * cfg.solver_tolerance else 1e-5
        for _ in range(cfg.solver_max_steps):
            s = -(a @ z + r_lin)  # slack of linear rows, > 0
            qv = -ball(z)  # slack of ball, > 0
            gq = np.zeros(dim)
            gq[:n2] = 2.0 * z[:n2]

            grad = np.zeros(dim)
            grad[-2:] = t_bar * 2.0 * z[-2:]
            grad += a.T @ (1.0 / s)
            grad += gq / qv

            aw = a / s[:, None]
            hess = aw.T @ aw
            hess += np.outer(gq, gq) / qv**2
            hess[idx[-2:], idx[-2:]] += t_bar * 2.0
            hess[idx[:n2], idx[:n2]] += 2.0 / qv

            try:
                c = np.linalg.cholesky(hess)
                dz = np.linalg.solve(c.T, np.linalg.solve(c, -grad))
            except np.linalg.LinAlgError:
                dz = np.linalg.solve(hess + 1e-10 * np.eye(dim), -grad)

            lam2 = float(-grad @ dz)
            steps += 1
            if lam2 / 2.0 <= ctol:
                break
            if steps >= cfg.solver_max_steps:
                raise SolverError(
                    f"Newton budget exhausted ({steps} steps)",
                    last_iterate=decode(z),
                    steps=steps,
                )

            # backtracking: stay strictly feasible, then Armijo on the barrier
            def barrier_val(w):
                sw = -(a @ w + r_lin)
                qw = -ball(w)
                if np.any(sw <= 0.0) or qw <= 0.0:
                    return np.inf
                return (
                    t_bar * (w[-2] ** 2 + w[-1] ** 2)
                    - float(np.sum(np.log(sw)))
                    - float(np.log(qw))
                )

            f_cur = barrier_val(z)
            alpha = 1.0
            for _ in range(60):
                z_new = z + alpha * dz
                if barrier_val(z_new) <= f_cur + 0.25 * alpha * (-lam2):
                    break
                alpha *= 0.5
            else:
                break  # line search stalled; accept centering as-is
            z = z_new

        if m_total / t_bar <= cfg.solver_tolerance:
            break
        t_bar *= mu

    x = decode(z)
    if p.objective(x) > p.objective(p.x0):
        return p.x0.copy()
    return x


# ---------------------------------------------------------------------------
# design loop: spectral equalization + per-column coordinate descent
# ---------------------------------------------------------------------------

_EQUALIZE_ITERS = 110
_SWEEP_PRUNE = 0.35
_ANNEAL = 0.985
_TIGHT_GATE = 1e-2


def _coherence_after_swap(ent: np.ndarray, ell: int, col: np.ndarray) -> float:
    trial = ent.copy()
    trial[:, ell] = col
    return mutual_coherence(trial)


def _gram_equalize(ent: np.ndarray, mu_target: float, iters: int) -> np.ndarray:
    """Alternating projection between Grams with off-diagonals clipped at
    ``mu_target`` and Grams of unit-norm tight frames (rank J, flat spectrum).

    This is the alternating-projection tightening machinery applied with a
    coherence clip; it equalizes the correlation profile while keeping the
    frame (near-)tight, which the per-column solves alone do not do.
    """
    j, l = ent.shape
    for _ in range(iters):
        g = ent.conj().T @ ent
        absg = np.abs(g)
        np.fill_diagonal(absg, 1.0)
        scale = np.minimum(1.0, mu_target / np.maximum(absg, 1e-300))
        np.fill_diagonal(scale, 1.0)
        g = g * scale
        np.fill_diagonal(g, 1.0)
        _, v = np.linalg.eigh(g)
        ent = np.sqrt(l / j) * v[:, -j:].conj().T
        ent /= np.linalg.norm(ent, axis=0)
    return ent


def _column_sweep(
    ent: np.ndarray, cur: float, cfg: CsidcoConfig, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    """One randomized pass of per-column QCQP updates with the global
    accept-only-if-not-worse rule.  Interfering columns are phase-rotated so
    their correlations are real-positive at the current point (coherence is
    invariant to per-column phases), which makes the real/imag slack split
    bite on the correlation modulus; weakly correlated columns are pruned
    from the constraint set for speed (the accept rule still guards them)."""
    j, l = ent.shape
    for ell in rng.permutation(l):
        ft = ent[:, ell]
        others = np.delete(ent, ell, axis=1)
        corr = others.conj().T @ ft
        ac = np.abs(corr)
        mx = float(ac.max())
        if mx * mx >= 1.0 - 1e-12:
            # duplicated column: resample, keeping the coherence monotone
            for _ in range(16):
                col = rng.standard_normal(j) + 1j * rng.standard_normal(j)
                col /= np.linalg.norm(col)
                cand = _coherence_after_swap(ent, ell, col)
                if cand <= cur + 1e-12:
                    ent[:, ell] = col
                    cur = cand
                    break
            continue
        keep = ac >= _SWEEP_PRUNE * mx
        kept = others[:, keep]
        ck = corr[keep]
        phase = np.where(np.abs(ck) > 1e-14, ck / np.maximum(np.abs(ck), 1e-300), 1.0)
        sub_ent = np.concatenate([kept * phase[None, :], ft[:, None]], axis=1)
        try:
            sub = build_subproblem(sub_ent, sub_ent.shape[1] - 1)
            x = solve_subproblem(sub, cfg)
        except (DegenerateColumnError, SolverError):
            continue  # keep the existing column
        col = x[:j] + 1j * x[j : 2 * j]
        nrm = np.linalg.norm(col)
        if nrm < 1e-9:
            continue
        col /= nrm
        cand = _coherence_after_swap(ent, ell, col)
        if cand <= cur + 1e-12:
            ent[:, ell] = col
            cur = cand
    return ent, cur


def csidco_design(j: int, l: int, cfg: CsidcoConfig | None = None) -> FrameMatrix:
    """Design a J x L unit-norm near-tight frame with low mutual coherence.

    Starts from a column-normalized complex Gaussian frame.  Each outer
    iteration first equalizes the correlation profile on the tight-frame
    manifold (``_gram_equalize`` with an annealed coherence clip), then runs
    a sequential per-column QCQP sweep accepting a column only if the global
    coherence does not increase.  The best near-tight iterate is tracked and
    returned, so the recorded coherence history is non-increasing and the
    output loses (almost) nothing under a subsequent :func:`tighten`.
    Requires the Welch regime 2 <= J < L <= J^2.
    """
    if cfg is None:
        cfg = CsidcoConfig()
    if j < 2 or l <= j or l > j * j:
        raise ValueError(f"need 2 <= J < L <= J^2, got J={j}, L={l}")

    rng = np.random.default_rng(cfg.seed)
    ent = rng.standard_normal((j, l)) + 1j * rng.standard_normal((j, l))
    ent /= np.linalg.norm(ent, axis=0)

    cur = mutual_coherence(ent)
    history = [cur]
    best_mu, best_ent = cur, ent.copy()
    mu_target = 0.9 * cur

    for _ in range(cfg.outer_iterations):
        ent = _gram_equalize(ent, mu_target, _EQUALIZE_ITERS)
        cur = mutual_coherence(ent)
        if cur < best_mu and tightness_spread(ent) < _TIGHT_GATE:
            best_mu, best_ent = cur, ent.copy()
        ent, cur = _column_sweep(ent, cur, cfg, rng)
        if cur < best_mu and tightness_spread(ent) < _TIGHT_GATE:
            best_mu, best_ent = cur, ent.copy()
        mu_target = max(welch_bound(j, l), _ANNEAL * cur)
        history.append(best_mu)

    if cfg.outer_iterations > 0:
        # drive the returned candidate's spread down at fixed clip level;
        # accept only if the coherence did not move
        polished = _gram_equalize(best_ent, best_mu, 40)
        if (
            mutual_coherence(polished) <= best_mu + 1e-9
            and tightness_spread(polished) <= tightness_spread(best_ent)
        ):
            best_ent = polished
            best_mu = min(best_mu, mutual_coherence(polished))
        history[-1] = best_mu

    return FrameMatrix(best_ent, coherence_history=np.asarray(history))


def tighten(f, rounds: int) -> FrameMatrix:
    """Alternate nearest-tight-frame projection and column renormalization.

    Each round replaces the frame by sqrt(L/J) U V^H (thin SVD of the current
    entries) and renormalizes the columns.  Rounds that would increase the
    relative frame-bound spread are rejected and iteration stops, so the
    spread never increases; a unit-norm tight frame is a fixed point.
    """
    ent = _as_entries(f).copy()
    j, l = ent.shape
    if l < j:
        raise ValueError(f"need J <= L, got J={j}, L={l}")
    u, s, vh = np.linalg.svd(ent, full_matrices=False)
    if s[-1] <= 1e-12 * s[0]:
        raise ValueError("tighten requires a full-row-rank frame")

    scale = np.sqrt(l / j)
    spread = tightness_spread(ent)
    for _ in range(rounds):
        u, s, vh = np.linalg.svd(ent, full_matrices=False)
        cand = scale * (u @ vh)
        cand /= np.linalg.norm(cand, axis=0)
        cand_spread = tightness_spread(cand)
        if cand_spread > spread + 1e-9:
            break
        ent = cand
        spread = cand_spread
    return FrameMatrix(ent)


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------
#
# Layout: magic b"GFRM" | u32 version | u32 J | u32 L | J*L complex entries,
# row-major, each stored as little-endian float64 (real, imag).

_MAGIC = b"GFRM"
_VERSION = 1
_HEADER = struct.Struct("<4sIII")


def save_frame(path, f: FrameMatrix) -> None:
    """Write a frame to the binary pilot-frame format."""
    if not isinstance(f, FrameMatrix):
        f = FrameMatrix(np.asarray(f))
    ent = np.ascontiguousarray(f.entries, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, f.j, f.l))
        fh.write(ent.tobytes())


def load_frame(path) -> FrameMatrix:
    """Read a frame written by :func:`save_frame`, validating the invariants."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FrameFormatError("truncated header")
        magic, version, j, l = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise FrameFormatError(f"bad magic {magic!r}; not a pilot frame file")
        if version != _VERSION:
            raise FrameFormatError(
                f"unsupported frame format version {version} (expected {_VERSION})"
            )
        payload = fh.read()
    expected = 16 * j * l
    if len(payload) != expected:
        raise FrameFormatError(
            f"payload size {len(payload)} does not match J={j}, L={l} "
            f"(expected {expected} bytes)"
        )
    if j < 1 or l < j:
        raise FrameFormatError(f"invalid dimensions J={j}, L={l}")
    ent = np.frombuffer(payload, dtype="<c16").reshape(j, l)
    try:
        return FrameMatrix(ent.copy())
    except ValueError as exc:
        raise FrameFormatError(f"frame payload fails validation: {exc}") from exc
