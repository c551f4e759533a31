"""Piecewise-deterministic Monte Carlo engine for jump unravelings.

Scheme: first-order Euler steps with a per-step Bernoulli jump decision.
At each step a single uniform u is drawn; if u < p_tot = (total rate) * dt a
jump channel is selected by partitioning u / p_tot over the cumulative
channel probabilities (rates sorted descending), and the rate operator is
diagonalized only in that branch. Otherwise the state is advanced with the
non-Hermitian generator and renormalized.

Determinism contract: trajectory i is driven solely by the RNG stream seeded
with (master_seed, i), trajectories are processed in fixed-size chunks, and
all batched arithmetic is per-trajectory elementwise/einsum work, so the
resulting ensemble is bitwise identical for any worker count.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionNotTwo,
    NegativeCoefficient,
    OffGridTime,
    TimestepTooLarge,
    UndefinedPhase,
)
from .generator import (
    GeneratorRepresentation,
    ShiftOperator,
    effective_hamiltonian,
    gamma_operator,
    shift_representation,
)
from .linalg import PAULI_X, PAULI_Y, PAULI_Z, _fix_phase, projector
from .rate_ops import (
    jump_channels,
    rate_operator_R,
    rate_operator_W,
)

CHUNK_SIZE = 256
SAMPLE_TRAJECTORIES = 7

P_TOT_WARN = 0.1
P_TOT_ERROR = 0.5


@dataclass(frozen=True)
class UnravelingSpec:
    """Which unraveling to run: per-channel jumps ("mcwf"), the
    representation-independent rate operator ("w"), or the dissipator rate
    operator ("r") of the representation selected by ``shift``."""

    kind: str  # "mcwf" | "w" | "r"
    shift: ShiftOperator | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("mcwf", "w", "r"):
            raise ValueError(f"unknown unraveling kind {self.kind!r}")

    def active_representation(self, rep: GeneratorRepresentation) -> GeneratorRepresentation:
        if self.kind == "r" and self.shift is not None:
            return shift_representation(rep, self.shift)
        return rep


@dataclass(frozen=True)
class JumpRecord:
    time: float
    channel: int
    rate: float
    pre_state: np.ndarray
    post_state: np.ndarray


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_times, dim)
    jumps: list[JumpRecord] = field(default_factory=list)


@dataclass
class Ensemble:
    """Ensemble statistics plus enough raw material for the reports:
    running mean/variance of the projector entries at every grid point,
    full per-trajectory states at snapshot times, the first few complete
    trajectories, and every jump record."""

    t_grid: np.ndarray
    dim: int
    n_traj: int
    master_seed: int
    label: str
    mean_rho: np.ndarray          # (G, N, N)
    se_re: np.ndarray             # (G, N, N) standard error of Re mean
    se_im: np.ndarray
    snapshot_indices: np.ndarray  # grid indices with full state snapshots
    snapshot_states: np.ndarray   # (S, n_traj, N)
    sample_trajectories: list[Trajectory]
    jump_traj: np.ndarray         # (M,) trajectory index per jump
    jump_time: np.ndarray
    jump_channel: np.ndarray
    jump_rate: np.ndarray
    jump_pre: np.ndarray          # (M, N)
    jump_post: np.ndarray
    max_deterministic_drop: float

    def grid_index(self, t: float) -> int:
        idx = int(np.argmin(np.abs(self.t_grid - t)))
        if abs(self.t_grid[idx] - t) > 1e-9:
            raise OffGridTime(f"t={t} is not on the simulation grid")
        return idx


# -- single steps --------------------------------------------------------------

def deterministic_step(k: np.ndarray, psi: np.ndarray, dt: float):
    """First-order no-jump update psi' = (1 - i K dt) psi, renormalized;
    returns (psi', norm_loss)."""
    phi = psi - 1j * dt * (k @ psi)
    nsq = float(np.vdot(phi, phi).real)
    return phi / np.sqrt(nsq), 1.0 - nsq


def _mcwf_step_channels(rep, t, psi):
    rates, posts = [], []
    for alpha, ch in enumerate(rep.channels):
        c = ch.rate(t)
        if c < -1e-12:
            raise NegativeCoefficient(alpha, t, c)
        v = np.asarray(ch.lindblad(t), dtype=complex) @ psi
        nsq = float(np.vdot(v, v).real)
        rates.append(c * nsq)
        posts.append(v / np.sqrt(nsq) if nsq > 0 else v)
    return np.array(rates), posts


def _select_channel(v: float, rates: np.ndarray) -> int:
    """Partition v in [0, 1) over cumulative rates sorted descending."""
    order = np.argsort(-rates, kind="stable")
    cum = np.cumsum(rates[order]) / np.sum(rates)
    for pos, k in enumerate(order):
        if v < cum[pos]:
            return int(k)
    return int(order[-1])


def _jump(spec: UnravelingSpec, rep_active, t: float, psi: np.ndarray, v: float) -> JumpRecord:
    """Resolve which jump occurs given the sub-uniform v = u / p_tot."""
    if spec.kind == "mcwf":
        rates, posts = _mcwf_step_channels(rep_active, t, psi)
        k = _select_channel(v, rates)
        return JumpRecord(time=t, channel=k, rate=float(rates[k]),
                          pre_state=psi.copy(), post_state=_fix_phase(posts[k]))
    if spec.kind == "w":
        op = rate_operator_W(rep_active, t, psi)
    else:
        op = rate_operator_R(rep_active, t, psi)
    tr = float(np.trace(op.matrix).real)
    tol = max(1e-9, 1e-6 * abs(tr))
    channels = jump_channels(op, psd_tol=tol)
    rates = np.array([c.rate for c in channels])
    k = _select_channel(v, rates)
    return JumpRecord(time=t, channel=k, rate=float(rates[k]),
                      pre_state=psi.copy(), post_state=channels[k].post_state)


def sample_step(spec: UnravelingSpec, rep: GeneratorRepresentation, t: float,
                psi: np.ndarray, dt: float, rng: np.random.Generator):
    """One Monte Carlo step; returns ("jump", record) or ("det", psi')."""
    rep_active = spec.active_representation(rep)
    base = rep if spec.kind != "r" else rep_active
    p_tot = _total_rate_scalar(spec, rep_active, t, psi) * dt
    _check_p(p_tot, t)
    u = rng.random()
    if u < p_tot:
        return "jump", _jump(spec, rep_active, t, psi, u / p_tot)
    k = _deterministic_generator_scalar(spec, base, t, psi)
    phi, _ = deterministic_step(k, psi, dt)
    return "det", phi


def _total_rate_scalar(spec, rep_active, t, psi) -> float:
    if spec.kind == "r":
        g = gamma_operator(rep_active, t)
        return float((psi.conj() @ g @ psi).real)
    if spec.kind == "mcwf":
        rates, _ = _mcwf_step_channels(rep_active, t, psi)
        return float(np.sum(rates))
    op = rate_operator_W(rep_active, t, psi)
    return float(np.trace(op.matrix).real)


def _deterministic_generator_scalar(spec, rep, t, psi):
    if spec.kind == "w":
        from .rate_ops import wroqj_deterministic_generator

        return wroqj_deterministic_generator(rep, t, psi)
    return effective_hamiltonian(rep, t)


def _check_p(p: float, t: float) -> None:
    if p > P_TOT_ERROR:
        raise TimestepTooLarge(f"jump probability {p:.3f} > {P_TOT_ERROR} at t={t}")
    if p > P_TOT_WARN:
        warnings.warn(f"jump probability {p:.3f} > {P_TOT_WARN} at t={t}; "
                      "consider a smaller dt", stacklevel=2)


# -- the chunked batch engine ---------------------------------------------------

class _EngineContext:
    """Per-run precomputed grid data shared (read-only) by all chunks."""

    def __init__(self, spec: UnravelingSpec, rep: GeneratorRepresentation,
                 psi0: np.ndarray, t_grid: np.ndarray):
        self.spec = spec
        self.rep = rep
        self.rep_active = spec.active_representation(rep)
        self.psi0 = np.asarray(psi0, dtype=complex)
        self.t_grid = np.asarray(t_grid, dtype=float)
        self.dim = rep.dim
        dts = np.diff(self.t_grid)
        if dts.size == 0 or np.max(np.abs(dts - dts[0])) > 1e-12:
            raise ValueError("t_grid must be uniform with at least two points")
        self.dt = float(dts[0])
        ts = self.t_grid[:-1]
        n_steps = ts.size

        base = rep if spec.kind != "r" else self.rep_active
        self.k_grid = np.stack([effective_hamiltonian(base, t) for t in ts])
        if spec.kind == "r":
            self.gamma_grid = np.stack([gamma_operator(self.rep_active, t) for t in ts])
        if spec.kind in ("mcwf", "w"):
            rep.require_explicit(f"{spec.kind} unraveling")
            n_ch = len(rep.channels)
            self.ls = np.empty((n_steps, n_ch, self.dim, self.dim), dtype=complex)
            self.cs = np.empty((n_steps, n_ch))
            for i, t in enumerate(ts):
                for a, ch in enumerate(rep.channels):
                    self.ls[i, a] = ch.lindblad(t)
                    self.cs[i, a] = ch.rate(t)
            if spec.kind == "mcwf" and np.min(self.cs) < -1e-12:
                bad = np.argwhere(self.cs < -1e-12)
                i, a = bad[np.argmin(bad[:, 0])]  # earliest offending time
                raise NegativeCoefficient(int(a), float(ts[i]), float(self.cs[i, a]))


@dataclass
class _ChunkResult:
    start: int
    sum_re: np.ndarray
    sum_im: np.ndarray
    sumsq_re: np.ndarray
    sumsq_im: np.ndarray
    snapshots: np.ndarray
    trajectories: list[Trajectory]
    jumps: list[tuple]
    max_drop: float


def _run_chunk(ctx: _EngineContext, master_seed: int, start: int, count: int,
               snapshot_idx: np.ndarray, n_full: int) -> _ChunkResult:
    g = ctx.t_grid.size
    n = ctx.dim
    dt = ctx.dt
    spec, rep_active = ctx.spec, ctx.rep_active

    psis = np.tile(ctx.psi0, (count, 1))
    uniforms = np.stack([
        np.random.default_rng([master_seed, start + b]).random(g - 1)
        for b in range(count)
    ])

    sum_re = np.zeros((g, n, n))
    sum_im = np.zeros((g, n, n))
    sumsq_re = np.zeros((g, n, n))
    sumsq_im = np.zeros((g, n, n))
    snapshots = np.empty((snapshot_idx.size, count, n), dtype=complex)
    snap_pos = {int(k): p for p, k in enumerate(snapshot_idx)}
    full_count = max(0, min(n_full - start, count))
    full_states = np.empty((full_count, g, n), dtype=complex) if full_count else None
    full_jumps: list[list[JumpRecord]] = [[] for _ in range(full_count)]
    jumps: list[tuple] = []
    max_drop = 0.0

    def accumulate(i, states):
        p = np.einsum("bi,bj->bij", states, states.conj())
        sum_re[i] = p.real.sum(axis=0)
        sum_im[i] = p.imag.sum(axis=0)
        sumsq_re[i] = (p.real ** 2).sum(axis=0)
        sumsq_im[i] = (p.imag ** 2).sum(axis=0)

    accumulate(0, psis)
    if 0 in snap_pos:
        snapshots[snap_pos[0]] = psis
    if full_count:
        full_states[:, 0] = psis[:full_count]

    warned = False
    for i in range(g - 1):
        t = ctx.t_grid[i]
        if spec.kind == "r":
            p_tot = dt * np.einsum("bi,ij,bj->b", psis.conj(), ctx.gamma_grid[i], psis).real
            drift = psis - 1j * dt * np.einsum("ij,bj->bi", ctx.k_grid[i], psis)
        else:
            lpsi = np.einsum("anm,bm->ban", ctx.ls[i], psis)       # (B, A, N)
            nsq = np.einsum("ban,ban->ba", lpsi.conj(), lpsi).real
            if spec.kind == "mcwf":
                p_tot = dt * nsq @ ctx.cs[i]
                drift = psis - 1j * dt * np.einsum("ij,bj->bi", ctx.k_grid[i], psis)
            else:
                ell = np.einsum("bn,ban->ba", psis.conj(), lpsi)   # (B, A)
                p_tot = dt * ((nsq - np.abs(ell) ** 2) @ ctx.cs[i])
                drift = (
                    psis
                    - 1j * dt * np.einsum("ij,bj->bi", ctx.k_grid[i], psis)
                    + dt * np.einsum("ba,ban->bn", ctx.cs[i] * ell.conj(), lpsi)
                    - 0.5 * dt * ((np.abs(ell) ** 2 @ ctx.cs[i])[:, None] * psis)
                )
        pmax = float(np.max(p_tot))
        if pmax > P_TOT_ERROR:
            raise TimestepTooLarge(f"jump probability {pmax:.3f} > {P_TOT_ERROR} at t={t}")
        if pmax > P_TOT_WARN and not warned:
            warnings.warn(f"jump probability {pmax:.3f} > {P_TOT_WARN} at t={t}",
                          stacklevel=2)
            warned = True

        u = uniforms[:, i]
        jump_mask = u < p_tot
        norms = np.sqrt(np.einsum("bi,bi->b", drift.conj(), drift).real)
        new = drift / norms[:, None]
        det_drop = 1.0 - np.abs(np.einsum("bi,bi->b", psis.conj(), new)) ** 2
        if np.any(~jump_mask):
            max_drop = max(max_drop, float(np.max(det_drop[~jump_mask])))

        for b in np.nonzero(jump_mask)[0]:
            rec = _jump(spec, rep_active, float(t), psis[b], float(u[b] / p_tot[b]))
            new[b] = rec.post_state
            jumps.append((start + int(b), rec.time, rec.channel, rec.rate,
                          rec.pre_state, rec.post_state))
            if b < full_count:
                full_jumps[b].append(rec)

        psis = new
        accumulate(i + 1, psis)
        if (i + 1) in snap_pos:
            snapshots[snap_pos[i + 1]] = psis
        if full_count:
            full_states[:, i + 1] = psis[:full_count]

    trajectories = [
        Trajectory(times=ctx.t_grid.copy(), states=full_states[b], jumps=full_jumps[b])
        for b in range(full_count)
    ]
    return _ChunkResult(start, sum_re, sum_im, sumsq_re, sumsq_im,
                        snapshots, trajectories, jumps, max_drop)


def evolve_trajectory(spec: UnravelingSpec, rep: GeneratorRepresentation,
                      psi0: np.ndarray, t_grid, seed) -> Trajectory:
    """One full trajectory, reproducible from its seed (an int or a
    (master_seed, index) pair)."""
    ctx = _EngineContext(spec, rep, psi0, np.asarray(t_grid, dtype=float))
    seq = list(np.atleast_1d(np.asarray(seed, dtype=np.int64)))
    if len(seq) == 1:
        master, idx = int(seq[0]), 0
    else:
        master, idx = int(seq[0]), int(seq[1])
    # run a width-1 chunk positioned at the trajectory's index
    res = _run_chunk(ctx, master, idx, 1, np.array([], dtype=int), idx + 1)
    return res.trajectories[0]


def run_ensemble(spec: UnravelingSpec, rep: GeneratorRepresentation,
                 psi0: np.ndarray, t_grid, n_traj: int, master_seed: int,
                 workers: int = 1, snapshot_stride: int = 250,
                 label: str = "") -> Ensemble:
    """Simulate n_traj independent trajectories and aggregate statistics.

    The result is a deterministic function of (spec, rep, psi0, t_grid,
    n_traj, master_seed) — identical for any ``workers`` value.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    ctx = _EngineContext(spec, rep, psi0, t_grid)
    g = t_grid.size
    snapshot_idx = np.unique(np.concatenate([
        np.arange(0, g, snapshot_stride), [g - 1]
    ]))

    starts = list(range(0, n_traj, CHUNK_SIZE))
    tasks = [(s, min(CHUNK_SIZE, n_traj - s)) for s in starts]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda sc: _run_chunk(ctx, master_seed, sc[0], sc[1],
                                      snapshot_idx, SAMPLE_TRAJECTORIES),
                tasks))
    else:
        results = [_run_chunk(ctx, master_seed, s, c, snapshot_idx,
                              SAMPLE_TRAJECTORIES) for s, c in tasks]
    results.sort(key=lambda r: r.start)

    n = ctx.dim
    sum_re = np.zeros((g, n, n))
    sum_im = np.zeros((g, n, n))
    sumsq_re = np.zeros((g, n, n))
    sumsq_im = np.zeros((g, n, n))
    snapshots = np.empty((snapshot_idx.size, n_traj, n), dtype=complex)
    sample_traj: list[Trajectory] = []
    jumps: list[tuple] = []
    max_drop = 0.0
    for r in results:
        sum_re += r.sum_re
        sum_im += r.sum_im
        sumsq_re += r.sumsq_re
        sumsq_im += r.sumsq_im
        cnt = r.snapshots.shape[1]
        snapshots[:, r.start:r.start + cnt] = r.snapshots
        sample_traj.extend(r.trajectories)
        jumps.extend(r.jumps)
        max_drop = max(max_drop, r.max_drop)

    mean_re = sum_re / n_traj
    mean_im = sum_im / n_traj
    var_re = np.maximum(sumsq_re / n_traj - mean_re ** 2, 0.0)
    var_im = np.maximum(sumsq_im / n_traj - mean_im ** 2, 0.0)
    denom = max(n_traj - 1, 1)
    se_re = np.sqrt(var_re * n_traj / denom / n_traj)
    se_im = np.sqrt(var_im * n_traj / denom / n_traj)

    m = len(jumps)
    return Ensemble(
        t_grid=t_grid,
        dim=n,
        n_traj=n_traj,
        master_seed=master_seed,
        label=label or spec.label or spec.kind,
        mean_rho=mean_re + 1j * mean_im,
        se_re=se_re,
        se_im=se_im,
        snapshot_indices=snapshot_idx,
        snapshot_states=snapshots,
        sample_trajectories=sample_traj,
        jump_traj=np.array([j[0] for j in jumps], dtype=int),
        jump_time=np.array([j[1] for j in jumps]),
        jump_channel=np.array([j[2] for j in jumps], dtype=int),
        jump_rate=np.array([j[3] for j in jumps]),
        jump_pre=(np.stack([j[4] for j in jumps]) if m else np.empty((0, n), dtype=complex)),
        jump_post=(np.stack([j[5] for j in jumps]) if m else np.empty((0, n), dtype=complex)),
        max_deterministic_drop=max_drop,
    )


# -- statistics ----------------------------------------------------------------

def ensemble_mean_state(ensemble: Ensemble, t: float) -> np.ndarray:
    """(1/n) sum over trajectories of the state projector at grid time t."""
    return ensemble.mean_rho[ensemble.grid_index(t)]


def bloch_vector(state: np.ndarray):
    """(x, y, z) = Pauli expectations of a qubit density matrix or state
    vector."""
    state = np.asarray(state, dtype=complex)
    rho = projector(state) if state.ndim == 1 else state
    if rho.shape != (2, 2):
        raise DimensionNotTwo(f"Bloch vector needs a qubit, got shape {rho.shape}")
    return (
        float(np.trace(rho @ PAULI_X).real),
        float(np.trace(rho @ PAULI_Y).real),
        float(np.trace(rho @ PAULI_Z).real),
    )


def phase_angle(psi: np.ndarray) -> float:
    """Equatorial phase atan2(y, x) of the Bloch vector."""
    x, y, _ = bloch_vector(psi)
    if x * x + y * y <= 1e-12:
        raise UndefinedPhase("state is on the Bloch poles; no equatorial phase")
    return float(np.arctan2(y, x))


def states_at(ensemble: Ensemble, t: float) -> np.ndarray:
    """All trajectory states at a snapshot time t."""
    idx = ensemble.grid_index(t)
    pos = np.nonzero(ensemble.snapshot_indices == idx)[0]
    if pos.size == 0:
        raise OffGridTime(f"no state snapshot stored at t={t}")
    return ensemble.snapshot_states[pos[0]]


def effective_ensemble_size(ensemble: Ensemble, t: float,
                            cluster_tol: float = 1e-6,
                            max_clusters: int | None = None) -> int:
    """Number of distinct pure states (up to global phase) across the
    ensemble at time t, clustered greedily by fidelity distance."""
    states = states_at(ensemble, t)
    # cheap dedup on phase-canonical rounded amplitudes before clustering
    canon = np.stack([_fix_phase(s) for s in states])
    decimals = max(1, int(-np.log10(max(cluster_tol, 1e-12)) / 2) + 2)
    _, first = np.unique(np.round(canon, decimals).view(float).reshape(len(canon), -1),
                         axis=0, return_index=True)
    reps: list[np.ndarray] = []
    for k in sorted(first):
        s = canon[k]
        if reps:
            ov = np.abs(np.stack(reps) @ s.conj()) ** 2
            if np.max(ov) >= 1.0 - cluster_tol:
                continue
        reps.append(s)
        if max_clusters is not None and len(reps) > max_clusters:
            return len(reps)
    return len(reps)


@dataclass
class PhaseJumpHistogram:
    increments: np.ndarray
    counts: np.ndarray
    bin_edges: np.ndarray


def jump_phase_statistics(ensemble: Ensemble, t_min: float = 0.0,
                          z_tol: float = 0.05, bins: int = 64) -> PhaseJumpHistogram:
    """Histogram of equatorial phase increments phi(post) - phi(pre) over
    recorded jumps after t_min whose pre and post states lie near the
    equator (|z| < z_tol)."""
    incs = []
    for k in np.nonzero(ensemble.jump_time >= t_min)[0]:
        pre, post = ensemble.jump_pre[k], ensemble.jump_post[k]
        xp, yp, zp = bloch_vector(pre)
        xq, yq, zq = bloch_vector(post)
        if abs(zp) >= z_tol or abs(zq) >= z_tol:
            continue
        d = np.arctan2(yq, xq) - np.arctan2(yp, xp)
        d = (d + np.pi) % (2 * np.pi) - np.pi
        incs.append(d)
    incs = np.asarray(incs)
    counts, edges = np.histogram(incs, bins=bins, range=(-np.pi, np.pi))
    return PhaseJumpHistogram(increments=incs, counts=counts, bin_edges=edges)


# -- named unravelings ----------------------------------------------------------

UNRAVELING_NAMES = ("mcwf", "w", "r1", "r2", "r3", "r1prime", "fixed-postjump")


def named_unraveling(name: str, rep: GeneratorRepresentation,
                     y=None, x=None) -> UnravelingSpec:
    """Build the unraveling selected by name for this model.

    The r-family shifts (Pauli-diagonal models, rates gamma_k):

    * r1       C = (gamma1+gamma2+gamma3)/2 * 1
    * r2       the fixed-post-jump construction at y = 0
    * r3       C = -gamma3/2 * 1
    * r1prime  the r1 shift plus i*b(t)*sigma_z, cancelling the driving
               from the deterministic part
    * fixed-postjump  the y(t)-family of fixed-post-jump shifts
    """
    from .errors import NonPauliModel
    from .models import driving_of, pauli_rates
    from .rate_ops import choi_coefficients, fixed_postjump_shift

    key = name.lower()
    if key == "mcwf":
        return UnravelingSpec("mcwf", label="mcwf")
    if key == "w":
        return UnravelingSpec("w", label="w")
    if key in ("r1", "r3", "r1prime"):
        rates = pauli_rates(rep)
        if rates is None:
            raise NonPauliModel(f"{name} needs a Pauli-diagonal qubit model")
        g1, g2, g3 = rates
        eye = np.eye(2, dtype=complex)
        if key == "r1":
            def c_of(t):
                return 0.5 * (float(g1(t)) + float(g2(t)) + float(g3(t))) * eye
        elif key == "r3":
            def c_of(t):
                return -0.5 * float(g3(t)) * eye
        else:
            b = driving_of(rep)

            def c_of(t):
                return (0.5 * (float(g1(t)) + float(g2(t)) + float(g3(t))) * eye
                        + 1j * float(b(t)) * PAULI_Z)
        return UnravelingSpec("r", shift=ShiftOperator(value=c_of), label=key)
    if key in ("r2", "fixed-postjump"):
        if rep.dim != 2:
            raise DimensionNotTwo("fixed-post-jump construction needs a qubit")
        y_fn = (lambda t: 0.0) if y is None else y
        x_fn = (lambda t: 0.0) if x is None else x
        shift = fixed_postjump_shift(lambda t: choi_coefficients(rep, t), x_fn, y_fn)
        return UnravelingSpec("r", shift=shift, label=key)
    raise ValueError(f"unknown unraveling {name!r}; choose from {UNRAVELING_NAMES}")


# -- file export -----------------------------------------------------------------

def write_ensemble_csv(ensemble: Ensemble, path) -> None:
    """Mean state, Bloch vector, and standard errors per grid time; all
    floats at full double precision."""
    n = ensemble.dim
    cols = ["t"]
    for i in range(n):
        for j in range(n):
            cols += [f"re_rho_{i}{j}", f"im_rho_{i}{j}"]
    if n == 2:
        cols += ["x", "y", "z"]
    for i in range(n):
        for j in range(n):
            cols += [f"se_re_{i}{j}", f"se_im_{i}{j}"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for g, t in enumerate(ensemble.t_grid):
            rho = ensemble.mean_rho[g]
            row = [t]
            for i in range(n):
                for j in range(n):
                    row += [rho[i, j].real, rho[i, j].imag]
            if n == 2:
                row += list(bloch_vector(rho))
            for i in range(n):
                for j in range(n):
                    row += [ensemble.se_re[g, i, j], ensemble.se_im[g, i, j]]
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def write_trajectories_jsonl(ensemble: Ensemble, path) -> None:
    """The recorded sample trajectories, one JSON object per line."""
    import json

    def cvec(v):
        return [[float(a.real), float(a.imag)] for a in v]

    with open(path, "w") as fh:
        for idx, traj in enumerate(ensemble.sample_trajectories):
            rec = {
                "trajectory": idx,
                "times": [float(t) for t in traj.times],
                "states": [cvec(s) for s in traj.states],
                "jumps": [
                    {"time": float(j.time), "channel": int(j.channel),
                     "rate": float(j.rate), "pre_state": cvec(j.pre_state),
                     "post_state": cvec(j.post_state)}
                    for j in traj.jumps
                ],
            }
            fh.write(json.dumps(rec) + "\n")
