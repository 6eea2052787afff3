"""Quantum-jump (Monte Carlo wave function) trajectory sampling.

Single trajectories evolve a pure state under the non-Hermitian effective
Hamiltonian; a jump fires when the decaying squared norm crosses a uniform
random threshold, the channel is drawn with probability proportional to
``rate_c * ||L_c psi||^2``, and the state is projected and renormalized.
Collective emissions count +1, collective absorptions -1, single-spin
jumps 0, so the per-trajectory net rate estimates the activity ``k(0)``.

Reproducibility: every trajectory owns a counter-based random stream keyed
by ``(master_seed, trajectory_index)``, so ensembles are bit-identical for
any worker count and scheduling.  Initial states are Haar-random pure
states drawn from the same stream unless an explicit ``initial_state`` is
given.

A trajectory that goes silent — no norm crossing within 10^6 time units of
the last event — is terminated and marked ``dark_trapped``; its
``total_time`` is the time through which silence was verified, so its net
activity is exactly 0.
"""

import dataclasses
import multiprocessing
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from . import spectral
from ._kernels import BACKEND, advance
from .liouvillian import JumpChannel
from .spin_algebra import (
    HILBERT_DIM,
    ModelParams,
    SpinOperator,
    build_hamiltonian,
    collective_jump,
    ladder,
)

#: silence horizon (model time units) after which a trajectory counts as trapped
STALL_TIME = 1e6
_CHUNK_EVENTS = 4096
#: mean total jumps targeted per fluctuation-theorem counting window
_FT_WINDOW_MEAN_JUMPS = 16.0


@dataclass(frozen=True)
class JumpRecord:
    """One sampled trajectory.

    ``times``/``channels``/``weights`` are parallel arrays of the jump
    events; ``channels`` indexes the table from :func:`build_channels` for
    ``params``.  ``total_time`` is the stop time (``t_max``, the last jump
    time when stopping on a jump count, or the verified-silence horizon
    when ``dark_trapped``).
    """

    seed: int
    index: int
    initial_state: np.ndarray
    times: np.ndarray
    channels: np.ndarray
    weights: np.ndarray
    total_time: float
    dark_trapped: bool
    params: ModelParams

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        channels = np.asarray(self.channels, dtype=np.int32)
        weights = np.asarray(self.weights, dtype=np.int64)
        if not (times.shape == channels.shape == weights.shape):
            raise ValueError("times, channels, weights must have equal length")
        if times.size and np.any(np.diff(times) <= 0):
            raise ValueError("event times must be strictly increasing")
        if not np.all(np.isin(weights, (-1, 0, 1))):
            raise ValueError("count weights must be in {-1, 0, +1}")
        if times.size and self.total_time < times[-1]:
            raise ValueError("total_time precedes the last event")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(
            self, "initial_state", np.asarray(self.initial_state, dtype=complex)
        )

    @property
    def n_events(self) -> int:
        return int(self.times.size)

    @property
    def events(self) -> List[Tuple[float, int, int]]:
        """Ordered (time, channel_id, count_weight) triples."""
        return list(
            zip(self.times.tolist(), self.channels.tolist(), self.weights.tolist())
        )


@dataclass(frozen=True)
class EnsembleStats:
    """Summary statistics of per-trajectory net activities."""

    activities: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray
    mean: float
    std: float
    std_error: float
    zero_fraction: float
    bimodality_ratio: float

    @property
    def histogram(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.bin_edges, self.counts


@dataclass(frozen=True)
class FTResult:
    """Windowed fluctuation-theorem check.

    For each net count ``K`` with at least 10 windows at both ``+K`` and
    ``-K``, ``log_ratio`` holds ``ln(p_K / p_{-K})`` and ``predicted`` the
    detailed-balance value ``s0 * K``.  ``slope`` is the weighted
    least-squares slope of ``log_ratio`` against ``K`` through the origin
    (NaN when no count qualifies); ``omitted`` lists the requested counts
    dropped for insufficient statistics.
    """

    window: float
    k_values: np.ndarray
    log_ratio: np.ndarray
    predicted: np.ndarray
    slope: float
    s0: float
    omitted: Tuple[int, ...]
    n_windows: int
    n_negative_windows: int


def build_channels(p: ModelParams) -> Tuple[JumpChannel, ...]:
    """Jump-channel table: operator, rate, and count weight per channel.

    Order: collective emission (+1), collective absorption (-1), then
    single-site lowering and raising for sites 1..3 (weight 0).  Channels
    whose rate vanishes are omitted.
    """
    channels = []
    if p.gamma_coll * (p.nbar + 1.0) > 0:
        channels.append(
            JumpChannel(collective_jump("-", p.convention), 2.0 * p.gamma_coll * (p.nbar + 1.0), 1)
        )
    if p.gamma_coll * p.nbar > 0:
        channels.append(
            JumpChannel(collective_jump("+", p.convention), 2.0 * p.gamma_coll * p.nbar, -1)
        )
    if p.gamma_single * (p.nbar + 1.0) > 0:
        for site in (1, 2, 3):
            channels.append(
                JumpChannel(ladder(site, "-", p.convention), 2.0 * p.gamma_single * (p.nbar + 1.0), 0)
            )
    if p.gamma_single * p.nbar > 0:
        for site in (1, 2, 3):
            channels.append(
                JumpChannel(ladder(site, "+", p.convention), 2.0 * p.gamma_single * p.nbar, 0)
            )
    return tuple(channels)


def effective_hamiltonian(p: ModelParams) -> SpinOperator:
    """Non-Hermitian generator of the no-jump evolution:
    ``H - (i/2) sum_c rate_c L_c^dag L_c``."""
    h = build_hamiltonian(p).matrix.astype(complex)
    for ch in build_channels(p):
        l_mat = ch.operator.matrix
        h = h - 0.5j * ch.rate * (l_mat.conj().T @ l_mat)
    return SpinOperator(h)


def _decompose(p: ModelParams):
    """Eigendecomposition and channel arrays shared by both kernel
    backends."""
    channels = build_channels(p)
    heff = effective_hamiltonian(p).matrix
    lam, v = la.eig(heff)
    vinv = la.inv(v)
    lam = np.ascontiguousarray(lam, dtype=complex)
    v = np.ascontiguousarray(v, dtype=complex)
    vinv = np.ascontiguousarray(vinv, dtype=complex)
    if channels:
        ops = np.ascontiguousarray(
            np.stack([ch.operator.matrix for ch in channels]), dtype=complex
        )
        rates = np.ascontiguousarray([ch.rate for ch in channels], dtype=float)
        weight_table = np.array([ch.count_weight for ch in channels], dtype=np.int64)
    else:
        ops = np.zeros((0, HILBERT_DIM, HILBERT_DIM), dtype=complex)
        rates = np.zeros(0)
        weight_table = np.zeros(0, dtype=np.int64)
    mean_rate = sum(
        ch.rate * np.trace(ch.operator.matrix.conj().T @ ch.operator.matrix).real
        for ch in channels
    ) / HILBERT_DIM
    tau0 = 1.0 / mean_rate if mean_rate > 0 else STALL_TIME
    return lam, v, vinv, ops, rates, weight_table, tau0


def _seed_pair(seed) -> Tuple[int, int]:
    if isinstance(seed, (tuple, list)) and len(seed) == 2:
        master, index = int(seed[0]), int(seed[1])
    else:
        master, index = int(seed), 0
    if master < 0 or index < 0:
        raise ValueError("seed components must be non-negative")
    return master, index


def _parse_stop(stop) -> Tuple[Optional[float], Optional[int]]:
    if not isinstance(stop, dict) or len(stop) != 1:
        raise ValueError("stop must be a dict with exactly one of 't_max', 'n_jumps'")
    if "t_max" in stop:
        t_max = float(stop["t_max"])
        if not t_max > 0:
            raise ValueError(f"t_max must be > 0, got {t_max}")
        return t_max, None
    if "n_jumps" in stop:
        n_jumps = int(stop["n_jumps"])
        if not n_jumps >= 1:
            raise ValueError(f"n_jumps must be >= 1, got {n_jumps}")
        return None, n_jumps
    raise ValueError(f"unknown stop criterion {set(stop)}; use 't_max' or 'n_jumps'")


def _haar_state(rng: np.random.Generator) -> np.ndarray:
    x = rng.standard_normal(2 * HILBERT_DIM)
    psi = x[0::2] + 1j * x[1::2]
    return psi / np.linalg.norm(psi)


def sample_trajectory(p: ModelParams, seed, stop, initial_state=None) -> JumpRecord:
    """Sample one trajectory.

    ``seed`` is either a master seed integer or a ``(master_seed, index)``
    pair selecting trajectory ``index`` of that master's ensemble.  ``stop``
    is ``{"t_max": T}`` or ``{"n_jumps": N}``.  The initial state is
    Haar-random from the trajectory's own stream unless ``initial_state``
    (an 8-vector, normalized here) is supplied.  Identical arguments
    produce a bit-identical record.
    """
    master, index = _seed_pair(seed)
    t_max, n_jumps = _parse_stop(stop)
    rng = np.random.Generator(np.random.Philox(key=[master, index]))
    if initial_state is None:
        psi0 = _haar_state(rng)
    else:
        psi0 = np.asarray(initial_state, dtype=complex).reshape(-1)
        if psi0.shape != (HILBERT_DIM,):
            raise ValueError(f"initial_state must have {HILBERT_DIM} components")
        nrm = np.linalg.norm(psi0)
        if not nrm > 0:
            raise ValueError("initial_state must have nonzero norm")
        psi0 = psi0 / nrm
    lam, v, vinv, ops, rates, weight_table, tau0 = _decompose(p)
    psi = np.ascontiguousarray(psi0, dtype=complex)

    trapped = False
    if n_jumps is not None:
        uniforms = rng.random(2 * n_jumps)
        times = np.empty(n_jumps)
        chans = np.empty(n_jumps, dtype=np.int32)
        n_written, t_end, _, status = advance(
            lam, v, vinv, ops, rates, psi, 0.0, uniforms, times, chans,
            n_jumps, np.inf, STALL_TIME, tau0,
        )
        times, chans = times[:n_written], chans[:n_written]
        if status == 3:
            trapped = True
            total_time = t_end + STALL_TIME
        else:
            total_time = t_end
    else:
        time_parts, chan_parts = [], []
        t = 0.0
        uniforms = rng.random(2 * _CHUNK_EVENTS)
        upos = 0
        while True:
            tbuf = np.empty(_CHUNK_EVENTS)
            cbuf = np.empty(_CHUNK_EVENTS, dtype=np.int32)
            n_written, t, used, status = advance(
                lam, v, vinv, ops, rates, psi, t, uniforms[upos:], tbuf, cbuf,
                _CHUNK_EVENTS, t_max, STALL_TIME, tau0,
            )
            upos += used
            if n_written:
                time_parts.append(tbuf[:n_written].copy())
                chan_parts.append(cbuf[:n_written].copy())
            if status == 0:
                continue
            if status == 1:
                uniforms = rng.random(2 * _CHUNK_EVENTS)
                upos = 0
                continue
            if status == 2:
                total_time = t_max
            else:
                trapped = True
                total_time = t + STALL_TIME
            break
        times = np.concatenate(time_parts) if time_parts else np.zeros(0)
        chans = np.concatenate(chan_parts) if chan_parts else np.zeros(0, dtype=np.int32)

    weights = weight_table[chans] if chans.size else np.zeros(0, dtype=np.int64)
    return JumpRecord(
        seed=master,
        index=index,
        initial_state=psi0,
        times=times,
        channels=chans,
        weights=weights,
        total_time=float(total_time),
        dark_trapped=trapped,
        params=p,
    )


def _sample_star(args):
    return sample_trajectory(*args)


def sample_ensemble(p: ModelParams, n_trajectories: int, master_seed: int, stop,
                    workers: int = 1) -> List[JumpRecord]:
    """Sample an ensemble of independent trajectories, index-ordered.

    Per-trajectory streams are keyed by ``(master_seed, index)``, so the
    result is bit-identical for any ``workers`` value.
    """
    if not n_trajectories >= 1:
        raise ValueError(f"n_trajectories must be >= 1, got {n_trajectories}")
    if not workers >= 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    args = [(p, (master_seed, i), stop) for i in range(n_trajectories)]
    if workers == 1:
        records = [sample_trajectory(*a) for a in args]
    else:
        chunk = max(1, n_trajectories // (4 * workers))
        with multiprocessing.Pool(workers) as pool:
            records = pool.map(_sample_star, args, chunksize=chunk)
    records.sort(key=lambda r: r.index)
    return records


def net_activity(record: JumpRecord, burn_in: Optional[float] = None) -> float:
    """Net count rate ``(sum of weights after burn_in) / (total_time -
    burn_in)``.

    ``burn_in`` defaults to 10% of ``total_time`` (discards the initial
    transient).
    """
    if burn_in is None:
        burn_in = 0.1 * record.total_time
    if burn_in < 0:
        raise ValueError(f"burn_in must be >= 0, got {burn_in}")
    duration = record.total_time - burn_in
    if not duration > 0:
        raise ValueError(
            f"empty post-burn-in window: burn_in {burn_in} >= total_time "
            f"{record.total_time}"
        )
    net = int(record.weights[record.times > burn_in].sum())
    return net / duration


def _bimodality_ratio(counts: np.ndarray) -> float:
    """Ratio of the minimum density between the two largest modes to the
    smaller mode's peak; 1.0 when fewer than two modes exist."""
    n = counts.size
    peaks = [
        i
        for i in range(n)
        if counts[i] > 0
        and (i == 0 or counts[i] > counts[i - 1])
        and (i == n - 1 or counts[i] >= counts[i + 1])
    ]
    if len(peaks) < 2:
        return 1.0
    peaks.sort(key=lambda i: counts[i], reverse=True)
    i, j = sorted(peaks[:2])
    between = counts[i + 1 : j]
    if between.size == 0:
        return 1.0
    return float(between.min() / min(counts[i], counts[j]))


def ensemble_stats(records: Sequence[JumpRecord], bins="fd",
                   burn_in_fraction: Optional[float] = None) -> EnsembleStats:
    """Histogram and summary statistics of per-trajectory net activities.

    ``bins`` is forwarded to ``numpy.histogram`` (default Freedman -
    Diaconis).  ``burn_in_fraction`` (default 0.1) sets each record's
    burn-in relative to its own total time.  ``zero_fraction`` is the
    fraction of trajectories whose net event count is zero over the whole
    record.
    """
    if len(records) == 0:
        raise ValueError("ensemble_stats requires a nonempty ensemble")
    if burn_in_fraction is not None and not 0 <= burn_in_fraction < 1:
        raise ValueError(f"burn_in_fraction must be in [0, 1), got {burn_in_fraction}")
    activities = np.array(
        [
            net_activity(
                r,
                None if burn_in_fraction is None else burn_in_fraction * r.total_time,
            )
            for r in records
        ]
    )
    counts, edges = np.histogram(activities, bins=bins)
    n = len(records)
    mean = float(activities.mean())
    std = float(activities.std(ddof=1)) if n > 1 else 0.0
    zero = sum(1 for r in records if int(r.weights.sum()) == 0) / n
    return EnsembleStats(
        activities=activities,
        bin_edges=edges,
        counts=counts,
        mean=mean,
        std=std,
        std_error=std / np.sqrt(n),
        zero_fraction=zero,
        bimodality_ratio=_bimodality_ratio(counts),
    )


def _window_counts(record: JumpRecord, window: float) -> np.ndarray:
    """Net counts over consecutive windows of fixed duration."""
    m = int(record.total_time // window)
    if m < 1:
        return np.zeros(0, dtype=np.int64)
    edges = np.arange(m + 1) * window
    sums, _ = np.histogram(record.times, bins=edges, weights=record.weights.astype(float))
    return np.rint(sums).astype(np.int64)


def empirical_ft(records: Sequence[JumpRecord], k_range=None,
                 window: Optional[float] = None) -> FTResult:
    """Windowed check of the detailed-balance count symmetry
    ``p_K / p_{-K} = e^{s0 K}``.

    Long trajectories are sliced into windows of fixed duration (default:
    the duration over which the ensemble's empirical jump rate yields ~16
    events), and net counts are tallied per window.  Dark-trapped records
    carry no counting statistics and are excluded.  ``k_range`` defaults to
    every positive count observed.
    """
    live = [r for r in records if not r.dark_trapped]
    if not live:
        raise ValueError("no un-trapped records to analyze")
    p = live[0].params
    if window is None:
        total_events = sum(r.n_events for r in live)
        total_time = sum(r.total_time for r in live)
        if total_events == 0:
            raise ValueError("no events in the ensemble; cannot set a window")
        window = _FT_WINDOW_MEAN_JUMPS * total_time / total_events
    if not window > 0:
        raise ValueError(f"window must be > 0, got {window}")
    tally = Counter()
    for r in live:
        tally.update(_window_counts(r, window).tolist())
    n_windows = sum(tally.values())
    n_negative = sum(c for k, c in tally.items() if k < 0)
    s0 = float(np.log((p.nbar + 1.0) / p.nbar)) if p.nbar > 0 else float("nan")
    if k_range is None:
        k_range = range(1, max((abs(k) for k in tally), default=0) + 1)
    k_vals, ratios, preds, wts, omitted = [], [], [], [], []
    for k in k_range:
        k = int(k)
        if k <= 0:
            raise ValueError(f"k_range entries must be positive, got {k}")
        n_pos, n_neg = tally[k], tally[-k]
        if n_pos < 10 or n_neg < 10:
            omitted.append(k)
            continue
        k_vals.append(k)
        ratios.append(np.log(n_pos / n_neg))
        preds.append(s0 * k)
        wts.append(1.0 / (1.0 / n_pos + 1.0 / n_neg))
    k_arr = np.array(k_vals, dtype=np.int64)
    y = np.array(ratios)
    w = np.array(wts)
    slope = float((w * k_arr * y).sum() / (w * k_arr**2).sum()) if k_arr.size else float("nan")
    return FTResult(
        window=float(window),
        k_values=k_arr,
        log_ratio=y,
        predicted=np.array(preds),
        slope=slope,
        s0=s0,
        omitted=tuple(omitted),
        n_windows=int(n_windows),
        n_negative_windows=int(n_negative),
    )


def blinking_segments(record: JumpRecord, window: float,
                      rate_threshold: Optional[float] = None):
    """Classify a trajectory into alternating active/inactive segments.

    The total jump rate (all channels) over consecutive windows is compared
    against ``rate_threshold`` (default: half the emitting-mode rate of the
    collective-only dynamics at the record's parameters); adjacent windows
    with equal labels are merged.  Returns a list of
    ``(t_start, t_end, label)`` with label ``"active"`` or ``"inactive"``.
    """
    if not window > 0:
        raise ValueError(f"window must be > 0, got {window}")
    if window > record.total_time:
        raise ValueError(
            f"window {window} is longer than the trajectory ({record.total_time})"
        )
    if rate_threshold is None:
        rate_threshold = 0.5 * spectral.active_phase_rate(record.params)
    m = int(record.total_time // window)
    edges = np.arange(m + 1, dtype=float) * window
    edges[-1] = record.total_time
    counts, _ = np.histogram(record.times, bins=edges)
    rates = counts / np.diff(edges)
    segments = []
    for i in range(m):
        label = "active" if rates[i] >= rate_threshold else "inactive"
        if segments and segments[-1][2] == label:
            segments[-1] = (segments[-1][0], float(edges[i + 1]), label)
        else:
            segments.append((float(edges[i]), float(edges[i + 1]), label))
    return segments
