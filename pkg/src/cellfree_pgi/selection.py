"""Dominating-path selection and SLNR precoder optimization.

Each user k is served on a subset ``Lambda[m][k]`` of path indices per base
station, with per-path precoding vectors stacked into
``x_k = [vec(V_1k); ...; vec(V_Mk)]`` (column-major within a block, base
stations in order).  The precoders maximize a signal-to-leakage-plus-noise
ratio, which is a generalized Rayleigh quotient

    x^H U_k x / x^H W_k x,

with ``U_k`` a rank-one coherent term plus the user's own block coupling and
``W_k`` the leakage coupling into all other users plus a noise floor.  Path
sets shrink one path per round by dropping the per-path precoding column of
least Euclidean norm until every user meets the feedback budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import bounds

__all__ = [
    "SlnrOperands",
    "build_slnr_operands",
    "slnr_precoder",
    "SelectionState",
    "prune_one_path",
    "optimize_on_sets",
    "select_dominating_paths",
    "choose_path_budget",
]

_RHO_TINY = 1e-150


def _vec(block: np.ndarray) -> np.ndarray:
    """Column-major stacking of a matrix into a vector."""
    return block.reshape(-1, order="F")


def _unstack(x: np.ndarray, sizes, num_antennas: int) -> list[np.ndarray]:
    """Split a stacked precoder into per-base-station (N, |Lambda_m|) blocks."""
    blocks, start = [], 0
    for size in sizes:
        span = num_antennas * size
        blocks.append(x[start:start + span].reshape(num_antennas, size, order="F"))
        start += span
    return blocks


def _fix_phase(blocks: list[np.ndarray]) -> list[np.ndarray]:
    """Rotate a stacked precoder to a canonical global phase.

    The anchor is the sum of all entries (rotated to real positive), which
    is stable across algebraically equivalent solution routes; steering
    symmetry makes per-entry magnitudes tie exactly, so anchoring on the
    largest entry would be route-dependent.  A vanishing sum falls back to
    the largest-magnitude entry.
    """
    flat = np.concatenate([_vec(b) for b in blocks]) if blocks else np.empty(0, complex)
    if flat.size == 0:
        return blocks
    pivot = flat.sum()
    if np.abs(pivot) < 1e-6 * np.linalg.norm(flat):
        pivot = flat[int(np.argmax(np.abs(flat)))]
    if np.abs(pivot) == 0.0:
        return blocks
    rot = np.conj(pivot) / np.abs(pivot)
    return [b * rot for b in blocks]


@dataclass
class SlnrOperands:
    """Dense quadratic forms of one user's precoder optimization.

    ``U`` and ``W`` act on the stacked precoder of dimension
    ``num_antennas * sum(sizes)``; ``mu`` is the stacked selected steering
    columns, so ``|mu^H x|^2`` is the coherent signal term.
    """

    mu: np.ndarray
    gamma_self: np.ndarray
    U: np.ndarray
    W: np.ndarray
    sizes: tuple[int, ...]
    num_antennas: int


def build_slnr_operands(steering: np.ndarray, index_sets, user: int,
                        noise_var: float) -> SlnrOperands:
    """Assemble ``mu``, ``U`` and ``W`` for one user's current path sets.

    ``steering`` has shape (M, K, N, P); ``index_sets[m][k]`` is the sorted
    tuple of selected path indices.  The coupling with user j's channel is
    block diagonal: base station m contributes ``I_{|Lambda_mk|} (x)
    A_mj A_mj^H``.  ``W`` adds ``noise_var / M`` on the diagonal, so it is
    positive definite for any positive noise variance.
    """
    num_bs, num_users, num_antennas, _ = steering.shape
    sizes = tuple(len(index_sets[m][user]) for m in range(num_bs))
    dim = num_antennas * sum(sizes)

    mu = np.concatenate([
        _vec(steering[m, user][:, list(index_sets[m][user])]) for m in range(num_bs)
    ]) if dim else np.empty(0, complex)

    def coupling(other: int) -> np.ndarray:
        blocks = []
        for m in range(num_bs):
            if sizes[m] == 0:
                continue
            aah = steering[m, other] @ steering[m, other].conj().T
            blocks.append(np.kron(np.eye(sizes[m]), aah))
        return scipy.linalg.block_diag(*blocks) if blocks else np.empty((0, 0), complex)

    gamma_self = coupling(user)
    U = np.outer(mu, mu.conj()) + gamma_self
    W = (noise_var / num_bs) * np.eye(dim, dtype=complex)
    for j in range(num_users):
        if j != user:
            W = W + coupling(j)
    return SlnrOperands(mu=mu, gamma_self=gamma_self, U=U, W=W,
                        sizes=sizes, num_antennas=num_antennas)


def slnr_precoder(operands: SlnrOperands, num_bs: int) -> tuple[list[np.ndarray], float]:
    """Top generalized eigenvector of (U, W), scaled to norm sqrt(M).

    Solved by Hermitian reduction (Cholesky factor of W, then a standard
    Hermitian eigenproblem) rather than by forming ``W^{-1} U``.  Returns the
    per-base-station precoder blocks and the attained ratio, which is the
    user's SLNR.
    """
    dim = operands.U.shape[0]
    vals, vecs = scipy.linalg.eigh(operands.U, operands.W,
                                   subset_by_index=[dim - 1, dim - 1])
    x = vecs[:, 0]
    x = x * (np.sqrt(num_bs) / np.linalg.norm(x))
    blocks = _fix_phase(_unstack(x, operands.sizes, operands.num_antennas))
    return blocks, float(vals[0])


class _SlnrSolver:
    """Per-scenario cache that solves every user's precoder in reduced form.

    ``W_k`` is block diagonal with the same N x N leakage block
    ``B_mk = sum_{j != k} A_mj A_mj^H + (noise/M) I`` repeated for every
    selected path of base station m, and ``U_k`` is that structure plus a
    rank-one term.  Factoring ``B_mk = R^H R`` and eigendecomposing
    ``R^{-H} A_mk A_mk^H R^{-1}`` once per (m, k) turns each optimization
    into a real symmetric problem of fixed size M*N: repeated eigenvalues
    across a station's paths collapse onto the single direction that carries
    the rank-one coupling.  The result is algebraically identical to
    :func:`slnr_precoder`; tests assert the agreement.
    """

    def __init__(self, steering: np.ndarray, noise_var: float):
        num_bs, num_users, num_antennas, _ = steering.shape
        self.num_bs = num_bs
        self.num_antennas = num_antennas
        eye = np.eye(num_antennas)
        aah = np.einsum("mknp,mkqp->mknq", steering, steering.conj())
        total = aah.sum(axis=1)
        self._chol = np.empty((num_bs, num_users, num_antennas, num_antennas), complex)
        self._eigval = np.empty((num_bs, num_users, num_antennas))
        self._eigbasis = np.empty_like(self._chol)
        self._weights = np.empty(
            (num_bs, num_users, num_antennas, steering.shape[3]), complex)
        for m in range(num_bs):
            for k in range(num_users):
                leak = total[m] - aah[m, k] + (noise_var / num_bs) * eye
                r = scipy.linalg.cholesky(leak, lower=False)
                s = scipy.linalg.solve_triangular(r, steering[m, k],
                                                  trans="C", lower=False)
                d, q = np.linalg.eigh(s @ s.conj().T)
                self._chol[m, k] = r
                self._eigval[m, k] = np.maximum(d, 0.0)
                self._eigbasis[m, k] = q
                self._weights[m, k] = q.conj().T @ s

    def solve(self, index_sets, user: int) -> tuple[list[np.ndarray], float]:
        """Optimize one user's precoder for the given path sets."""
        n = self.num_antennas
        active = [m for m in range(self.num_bs) if len(index_sets[m][user]) > 0]
        cols = {m: list(index_sets[m][user]) for m in active}
        rho = [np.sqrt(np.sum(np.abs(self._weights[m, user][:, cols[m]]) ** 2, axis=1))
               for m in active]
        d_stack = np.concatenate([self._eigval[m, user] for m in active])
        r_stack = np.concatenate(rho)
        reduced = np.diag(d_stack) + np.outer(r_stack, r_stack)
        vals, vecs = np.linalg.eigh(reduced)
        lam = float(vals[-1])
        y = vecs[:, -1]

        blocks: list[np.ndarray] = [np.empty((n, 0), complex)
                                    for _ in range(self.num_bs)]
        pos = 0
        for slot, m in enumerate(active):
            ym = y[pos:pos + n]
            pos += n
            rm = rho[slot]
            w = self._weights[m, user][:, cols[m]]
            coeff = np.zeros(n)
            safe = rm > _RHO_TINY
            coeff[safe] = ym[safe] / rm[safe]
            u = coeff[:, None] * w
            stranded = ~safe & (np.abs(ym) > 1e-8)
            if np.any(stranded):
                # Top eigenvalue sits on a direction the coupling misses; any
                # basis vector of that path block is a valid eigenvector.
                u[stranded, 0] = ym[stranded]
            z = self._eigbasis[m, user] @ u
            blocks[m] = scipy.linalg.solve_triangular(self._chol[m, user], z,
                                                      lower=False)

        norm = np.sqrt(sum(float(np.sum(np.abs(b) ** 2)) for b in blocks))
        scale = np.sqrt(self.num_bs) / norm
        blocks = _fix_phase([b * scale for b in blocks])
        return blocks, lam


@dataclass
class SelectionState:
    """Path sets and optimized precoders for all users.

    ``index_sets[m][k]`` is a sorted tuple of 0-based path indices;
    ``precoders[m][k]`` is the (N, |Lambda_mk|) block whose column i precodes
    the gain of path ``index_sets[m][k][i]``.  Every user's stacked precoder
    has norm sqrt(M); ``slnr[k]`` is the attained ratio.
    """

    index_sets: tuple
    precoders: list
    slnr: np.ndarray
    noise_var: float

    @property
    def num_bs(self) -> int:
        return len(self.index_sets)

    @property
    def num_users(self) -> int:
        return len(self.index_sets[0])

    def path_count(self, user: int) -> int:
        return sum(len(self.index_sets[m][user]) for m in range(self.num_bs))

    def stacked_precoder(self, user: int) -> np.ndarray:
        return np.concatenate([
            _vec(self.precoders[m][user]) for m in range(self.num_bs)])


def prune_one_path(state: SelectionState, user: int) -> tuple[SelectionState, tuple[int, int]]:
    """Drop the user's least-norm per-path precoding column.

    The column norms of ``[V_1k, ..., V_Mk]`` estimate each path's share of
    the radiated power (the expected precoder power splits as the sum of
    squared column norms under unit-variance gains), so the weakest column
    marks the most expendable path.  Ties resolve to the smallest
    (station, path) pair.  Returns the new state and the dropped pair.
    """
    flat: list[tuple[int, int, int, float]] = []
    for m in range(state.num_bs):
        block = state.precoders[m][user]
        for col, path in enumerate(state.index_sets[m][user]):
            flat.append((m, path, col, float(np.linalg.norm(block[:, col]))))
    if not flat:
        raise ValueError(f"user {user} has no selected paths left to prune")
    norms = np.array([entry[3] for entry in flat])
    m_drop, path_drop, col_drop, _ = flat[int(np.argmin(norms))]

    new_sets = [[state.index_sets[m][k] for k in range(state.num_users)]
                for m in range(state.num_bs)]
    new_sets[m_drop][user] = tuple(
        p for p in new_sets[m_drop][user] if p != path_drop)
    new_pre = [[state.precoders[m][k] for k in range(state.num_users)]
               for m in range(state.num_bs)]
    new_pre[m_drop][user] = np.delete(state.precoders[m_drop][user], col_drop, axis=1)
    frozen = tuple(tuple(row) for row in new_sets)
    return SelectionState(index_sets=frozen, precoders=new_pre,
                          slnr=state.slnr.copy(), noise_var=state.noise_var), (m_drop, path_drop)


def _optimize_all(solver: _SlnrSolver, index_sets, num_users: int,
                  noise_var: float) -> SelectionState:
    per_user = [solver.solve(index_sets, k) for k in range(num_users)]
    precoders = [[per_user[k][0][m] for k in range(num_users)]
                 for m in range(solver.num_bs)]
    slnr = np.array([per_user[k][1] for k in range(num_users)])
    frozen = tuple(tuple(row) for row in index_sets)
    return SelectionState(index_sets=frozen, precoders=precoders,
                          slnr=slnr, noise_var=noise_var)


def optimize_on_sets(steering: np.ndarray, index_sets,
                     noise_var: float) -> SelectionState:
    """Jointly optimize every user's precoder on fixed path index sets.

    ``index_sets[m][k]`` lists the selected path ids (ascending, each in
    ``[0, P)``) of user k at base station m.  Used to re-evaluate a chosen
    selection at a different noise level and to score externally supplied
    selections.
    """
    num_bs, num_users, _, num_paths = steering.shape
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    for m in range(num_bs):
        for k in range(num_users):
            paths = list(index_sets[m][k])
            if any(not 0 <= p < num_paths for p in paths):
                raise ValueError(f"path id out of range in index_sets[{m}][{k}]")
            if sorted(set(paths)) != paths:
                raise ValueError(f"index_sets[{m}][{k}] must be strictly increasing")
    for k in range(num_users):
        if not any(index_sets[m][k] for m in range(num_bs)):
            raise ValueError(f"user {k} selects no path at any base station")
    solver = _SlnrSolver(steering, noise_var)
    return _optimize_all(solver, [list(map(list, row)) for row in index_sets],
                         num_users, noise_var)


def select_dominating_paths(steering: np.ndarray, path_budget: int,
                            noise_var: float, record=None) -> SelectionState:
    """Alternate precoder optimization with one-path-per-user pruning.

    Starts from all M*P paths selected for every user, optimizes all
    precoders, then repeats {each over-budget user drops one path; one joint
    re-optimization} until every user holds exactly ``path_budget`` paths.
    With a uniform start this takes exactly ``M*P - path_budget`` rounds.

    ``record(level, state)`` is called after every optimization with the
    current per-user path total, for callers scanning the budget trade-off.
    """
    num_bs, num_users, _, num_paths = steering.shape
    if not 1 <= path_budget <= num_bs * num_paths:
        raise ValueError(
            f"path_budget must lie in [1, {num_bs * num_paths}], got {path_budget}")
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")

    index_sets = [[tuple(range(num_paths)) for _ in range(num_users)]
                  for _ in range(num_bs)]
    solver = _SlnrSolver(steering, noise_var)
    state = _optimize_all(solver, index_sets, num_users, noise_var)
    if record is not None:
        record(num_bs * num_paths, state)

    while any(state.path_count(k) > path_budget for k in range(num_users)):
        for k in range(num_users):
            if state.path_count(k) > path_budget:
                state, _ = prune_one_path(state, k)
        sets = [list(row) for row in state.index_sets]
        state = _optimize_all(solver, sets, num_users, noise_var)
        if record is not None:
            record(state.path_count(0), state)
    return state


def _budget_scan_general(steering: np.ndarray, feedback_bits: int,
                         snr_db: float) -> tuple[np.ndarray, np.ndarray]:
    """Net-rate table over every budget level of one full pruning run."""
    from .rates import ideal_rate_closed_form, noise_variance_for_snr

    num_bs, num_users, _, num_paths = steering.shape
    snr = 10.0 ** (snr_db / 10.0)
    provisional = num_bs * steering.shape[2] * num_paths / snr
    records: list[tuple[int, SelectionState]] = []
    select_dominating_paths(steering, 1, provisional,
                            record=lambda lvl, st: records.append((lvl, st)))

    levels = np.array([lvl for lvl, _ in records])
    net = np.empty(len(records))
    for i, (lvl, st) in enumerate(records):
        sigma = noise_variance_for_snr(steering, st, snr_db)
        ideal = ideal_rate_closed_form(steering, st, sigma)
        total = 0.0
        for k in range(num_users):
            if lvl < 2:
                gap = 0.0  # one complex dimension: direction feedback is a pure phase
            else:
                blocks_a = [steering[m, k][:, list(st.index_sets[m][k])]
                            for m in range(num_bs)]
                blocks_v = [st.precoders[m][k] for m in range(num_bs)]
                delta, degenerate = bounds.delta_factor(blocks_a, blocks_v)
                if degenerate:
                    total = -np.inf
                    break
                try:
                    gap = bounds.rate_gap_bound(lvl, feedback_bits, delta, snr)
                except ValueError:
                    total = -np.inf
                    break
            total += ideal[k] - gap
        net[i] = total
    return levels, net


def _budget_scan_single_cell(num_paths: int, feedback_bits: int, snr_db: float,
                             noise_var: float) -> tuple[np.ndarray, np.ndarray]:
    """Lower-bound table for a single cell with orthonormal steering columns.

    With orthonormal columns the coherent term alone reaches signal power
    l + 1 at budget l, and the matched precoder gives a spread-to-coherent
    ratio of 1/l, so the net lower bound is
    ``log2(1 + (l+1)/noise_var) - rate_gap(l, B, 1/l, snr)``.
    """
    snr = 10.0 ** (snr_db / 10.0)
    levels = np.arange(1, num_paths + 1)
    net = np.empty(len(levels))
    for i, lvl in enumerate(levels):
        if lvl < 2:
            # One complex dimension: direction feedback is a pure phase, no gap.
            net[i] = np.log2(1.0 + (lvl + 1.0) / noise_var)
            continue
        try:
            net[i] = bounds.single_cell_rate_bound(int(lvl), feedback_bits,
                                                   1.0 / lvl, noise_var, snr)
        except ValueError:
            net[i] = -np.inf
    return levels, net


def choose_path_budget(feedback_bits: int, snr_db: float, *,
                       steering: np.ndarray | None = None,
                       num_paths: int | None = None,
                       noise_var: float = 1.0,
                       mode: str = "general",
                       return_scan: bool = False):
    """Pick the feedback budget maximizing predicted net sum rate.

    ``general`` mode runs one full pruning pass on ``steering`` down to a
    single path, recording the closed-form rate minus the feedback rate-gap
    bound at every level, and returns the level with the largest total.
    ``single_cell`` mode scans the analytic lower bound for one base station
    with ``num_paths`` orthonormal-column paths.  Levels whose gap bound is
    infeasible (quantization too coarse for a finite guarantee) are skipped.
    """
    if mode == "general":
        if steering is None:
            raise ValueError("general mode requires the steering tensor")
        levels, net = _budget_scan_general(steering, feedback_bits, snr_db)
    elif mode == "single_cell":
        if num_paths is None:
            raise ValueError("single_cell mode requires num_paths")
        levels, net = _budget_scan_single_cell(num_paths, feedback_bits,
                                               snr_db, noise_var)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    best = int(levels[int(np.argmax(net))])
    if return_scan:
        return best, levels, net
    return best
