"""Quantum-jump photon streams and Hanbury Brown-Twiss coincidence histograms.

Records are numpy structured arrays with fields ``trial_id``, ``t`` (seconds, on a
1 ps lattice) and ``channel``.  Random numbers come from numpy's PCG64 seeded through
``SeedSequence``; trials are generated in fixed blocks with one spawned child seed per
block, so the stream does not depend on how blocks are spread over workers.
"""
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .dynamics import AtomParams
from .instrument import PULSE_LENGTH, triangle_window

RECORD_DTYPE = np.dtype([("trial_id", np.int64), ("t", np.float64), ("channel", np.int8)])
BLOCK_TRIALS = 4096
DETECTION_EFFICIENCY = 0.0179
_S_FLOOR = 1e-17  # below the smallest uniform draw 2**-53


def empty_records(n=0):
    return np.zeros(n, dtype=RECORD_DTYPE)


@dataclass(frozen=True)
class SimConfig:
    params: AtomParams
    pulse_length: float = PULSE_LENGTH
    n_trials: int = 1000
    detection_efficiency: float = DETECTION_EFFICIENCY
    rng_seed: int = 0
    dead_time: float = 0.0
    dark_count_rate: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.pulse_length) and self.pulse_length > 0):
            raise ValueError("pulse_length must be positive and finite")
        if int(self.n_trials) < 1:
            raise ValueError("n_trials must be at least 1")
        if not 0 < self.detection_efficiency <= 1:
            raise ValueError("detection_efficiency must lie in (0, 1]")
        if self.dead_time < 0 or self.dark_count_rate < 0:
            raise ValueError("dead_time and dark_count_rate must be non-negative")


def survival_curve(params, t_max, n_per_period=400):
    """No-jump probability ||exp(-i H_eff t)|g>||^2 on a uniform grid starting at 0.

    The grid stops at `t_max` or once the survival probability drops below any
    possible uniform draw.
    """
    g, om, de = params.gamma, params.omega, params.delta
    fastest = max(np.hypot(om, de), g)
    dt = min(2 * np.pi / fastest, 1.0 / g) / n_per_period
    H = np.array([[0.0, om / 2], [om / 2, -de - 0.5j * g]])
    chunk = 4096
    U = sla.expm(-1j * H[None] * (dt * np.arange(1, chunk + 1))[:, None, None])
    psi = np.array([1.0, 0.0], dtype=complex)
    times, surv = [np.zeros(1)], [np.ones(1)]
    t0 = 0.0
    while t0 < t_max:
        block = U @ psi
        s = np.sum(np.abs(block) ** 2, axis=1)
        tt = t0 + dt * np.arange(1, chunk + 1)
        keep = tt <= t_max
        times.append(tt[keep])
        surv.append(s[keep])
        psi = block[-1]
        t0 = tt[-1]
        if s[-1] < _S_FLOOR:
            break
    t = np.concatenate(times)
    s = np.minimum.accumulate(np.concatenate(surv))  # norm loss is monotone; remove round-off wiggle
    if t[-1] < t_max and s[-1] >= _S_FLOOR:
        t = np.append(t, t_max)
        s = np.append(s, s[-1])
    return t, s


def _waiting_times(u, t_grid, s_grid):
    """Invert the survival curve; draws below its last value mean no jump inside the grid."""
    w = np.interp(u, s_grid[::-1], t_grid[::-1])
    w[u < s_grid[-1]] = np.inf
    return w


def _simulate_block(cfg, first_trial, n_trials, seed_seq, t_grid, s_grid):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    T = cfg.pulse_length
    trial_chunks, time_chunks = [], []
    clock = np.zeros(n_trials)
    active = np.arange(n_trials)
    while active.size:
        u = 1.0 - rng.random(active.size)
        clock[active] += _waiting_times(u, t_grid, s_grid)
        inside = clock[active] <= T
        active = active[inside]
        trial_chunks.append(active)
        time_chunks.append(clock[active])
    trials = np.concatenate(trial_chunks) if trial_chunks else np.empty(0, np.int64)
    times = np.concatenate(time_chunks) if time_chunks else np.empty(0)
    if cfg.detection_efficiency < 1:
        kept = rng.random(trials.size) < cfg.detection_efficiency
        trials, times = trials[kept], times[kept]
    out = empty_records(trials.size)
    out["trial_id"] = trials + first_trial
    out["t"] = np.round(times * 1e12) * 1e-12
    return np.sort(out, order=("trial_id", "t"))


def _run_blocks(args):
    cfg, blocks, t_grid, s_grid = args
    return [_simulate_block(cfg, first, n, ss, t_grid, s_grid) for first, n, ss in blocks]


def simulate_stream(cfg, n_workers=1):
    """Monte Carlo wave-function photon stream, one trajectory per trial.

    Each trial starts in the ground state.  Between jumps the state evolves under the
    non-Hermitian Hamiltonian; a jump occurs when the no-jump probability falls to a
    uniform random threshold, and resets the atom to the ground state.  Each emitted
    photon is kept with probability ``detection_efficiency``.  All records carry
    channel 0; use `hbt_split` to assign detectors.
    """
    p = cfg.params
    if not all(np.isfinite([p.gamma, p.omega, p.delta])):
        raise ValueError("non-finite atom parameters")
    n_trials = int(cfg.n_trials)
    if p.omega == 0:
        return empty_records()
    t_grid, s_grid = survival_curve(p, cfg.pulse_length)
    starts = np.arange(0, n_trials, BLOCK_TRIALS)
    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(starts.size)
    blocks = [(int(s), int(min(BLOCK_TRIALS, n_trials - s)), ss) for s, ss in zip(starts, seeds)]
    if n_workers > 1 and len(blocks) > 1:
        parts = [blocks[k::n_workers] for k in range(n_workers)]
        with ProcessPoolExecutor(n_workers) as ex:
            results = ex.map(_run_blocks, [(cfg, part, t_grid, s_grid) for part in parts])
            chunks = [r for res in results for r in res]
    else:
        chunks = _run_blocks((cfg, blocks, t_grid, s_grid))
    out = np.concatenate(chunks) if chunks else empty_records()
    return np.sort(out, order=("trial_id", "t"), kind="stable")


def hbt_split(records, rng_seed):
    """Fair 50/50 beam splitter: each record independently to channel 0 or 1."""
    out = np.array(records, dtype=RECORD_DTYPE, copy=True)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(rng_seed)))
    out["channel"] = rng.integers(0, 2, size=out.size)
    return out


def add_dark_counts(records, rate, pulse_length, n_trials, rng_seed):
    """Uniform background clicks at `rate` per detector channel during every pulse."""
    if rate == 0:
        return records
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(rng_seed)))
    extra = []
    for ch in (0, 1):
        n = rng.poisson(rate * pulse_length, size=n_trials)
        dark = empty_records(int(n.sum()))
        dark["trial_id"] = np.repeat(np.arange(n_trials), n)
        dark["t"] = np.round(rng.random(dark.size) * pulse_length * 1e12) * 1e-12
        dark["channel"] = ch
        extra.append(dark)
    merged = np.concatenate([records] + extra)
    return np.sort(merged, order=("trial_id", "t"), kind="stable")


def apply_dead_time(records, dead_time):
    """Drop clicks arriving within `dead_time` of the previous kept click on the same channel."""
    if dead_time == 0 or records.size == 0:
        return records
    keep = np.ones(records.size, dtype=bool)
    last = {}
    for i, (trial, t, ch) in enumerate(records.tolist()):
        prev = last.get((trial, ch))
        if prev is not None and t - prev < dead_time:
            keep[i] = False
        else:
            last[(trial, ch)] = t
    return records[keep]


def simulate_hbt(cfg, n_workers=1):
    """Photon stream through the beam splitter and both detectors."""
    recs = simulate_stream(cfg, n_workers=n_workers)
    # separate entropy tuple so these never coincide with a block's spawned seed
    split_seed, dark_seed = np.random.SeedSequence([cfg.rng_seed, 0x4B7]).generate_state(2)
    recs = hbt_split(recs, int(split_seed))
    recs = add_dark_counts(recs, cfg.dark_count_rate, cfg.pulse_length, int(cfg.n_trials),
                           int(dark_seed))
    return apply_dead_time(recs, cfg.dead_time)


# --- coincidence histogram -------------------------------------------------------

@dataclass
class CorrelationHistogram:
    """Cross-channel delays tau = t(channel 1) - t(channel 0), one bin centred on zero.

    ``norm`` is the expected count per bin for uncorrelated light at tau = 0, so
    ``counts / norm`` estimates g2(tau) times the triangle window of the pulse.
    """

    bin_width: float
    tau_min: float
    tau_max: float
    counts: np.ndarray
    norm: float = 1.0
    pulse_length: float = PULSE_LENGTH
    n_trials: int = 1
    rates: tuple = field(default=(0.0, 0.0))

    @property
    def centers(self):
        return self.tau_min + self.bin_width * (np.arange(self.counts.size) + 0.5)

    @property
    def normalized(self):
        return self.counts / self.norm

    @property
    def normalized_err(self):
        """Poisson error at the uncorrelated level; independent of the counts, so fits are not biased low."""
        expected = self.norm * triangle_window(self.centers, self.pulse_length)
        return np.sqrt(np.maximum(expected, 1e-300)) / self.norm

    def g2(self):
        """Normalized counts with the triangle window divided out."""
        return self.normalized / triangle_window(self.centers, self.pulse_length)

    def expected_counts(self, model, oversample=16):
        """Bin-averaged `model(tau)` times triangle window, scaled to counts."""
        sub = (np.arange(oversample) + 0.5) / oversample * self.bin_width
        taus = self.tau_min + np.arange(self.counts.size)[:, None] * self.bin_width + sub[None, :]
        vals = model(taus) * triangle_window(taus, self.pulse_length)
        return self.norm * vals.mean(axis=1)

    def reduced_chi2(self, model, n_params=0):
        expected = self.expected_counts(model)
        ok = expected > 0
        chi2 = np.sum((self.counts[ok] - expected[ok]) ** 2 / expected[ok])
        return float(chi2 / max(ok.sum() - n_params, 1))

    def __add__(self, other):
        if (self.bin_width, self.tau_min, self.counts.size) != (other.bin_width, other.tau_min, other.counts.size):
            raise ValueError("histograms have different binning")
        return CorrelationHistogram(self.bin_width, self.tau_min, self.tau_max,
                                    self.counts + other.counts, self.norm, self.pulse_length,
                                    self.n_trials, self.rates)


def _check_sorted(records):
    trial, t = records["trial_id"], records["t"]
    bad = (np.diff(trial) < 0) | ((np.diff(trial) == 0) & (np.diff(t) < 0))
    if np.any(bad):
        raise ValueError("records must be sorted by (trial_id, t)")


def _pair_counts(records, edges):
    """Histogram of same-trial cross-channel delays for one chunk of records."""
    trial, t, ch = records["trial_id"], records["t"], records["channel"]
    span = max(-edges[0], edges[-1])
    counts = np.zeros(edges.size - 1, dtype=np.int64)
    n = trial.size
    for k in range(1, n):
        i = np.arange(n - k)
        j = i + k
        near = (trial[i] == trial[j]) & (t[j] - t[i] <= span)
        if not near.any():
            break
        i, j = i[near], j[near]
        cross = ch[i] != ch[j]
        i, j = i[cross], j[cross]
        tau = np.where(ch[i] == 0, t[j] - t[i], t[i] - t[j])
        counts += np.histogram(tau, bins=edges)[0]
    return counts


def correlate(records, bin_width, tau_max, pulse_length=PULSE_LENGTH, n_trials=None,
              n_workers=1):
    """Coincidence histogram of channel-1 minus channel-0 delays within each trial.

    Bins run symmetrically with one bin centred at zero delay.  `n_trials` defaults
    to one more than the largest trial id present.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    records = np.asarray(records, dtype=RECORD_DTYPE)
    _check_sorted(records)
    if n_trials is None:
        n_trials = int(records["trial_id"].max()) + 1 if records.size else 1
    half = int(round(tau_max / bin_width))
    tau_min = -(half + 0.5) * bin_width
    edges = tau_min + bin_width * np.arange(2 * half + 2)
    # split at trial boundaries so chunks never share a trial
    n_chunks = max(1, min(n_workers * 4, records.size // 10000))
    cuts = [0]
    for c in np.linspace(0, records.size, n_chunks + 1)[1:-1].astype(int):
        c = int(np.searchsorted(records["trial_id"], records["trial_id"][c]))
        if c > cuts[-1]:
            cuts.append(c)
    cuts.append(records.size)
    chunks = [records[a:b] for a, b in zip(cuts[:-1], cuts[1:])]
    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as ex:
            partial = list(ex.map(lambda c: _pair_counts(c, edges), chunks))
    else:
        partial = [_pair_counts(c, edges) for c in chunks]
    counts = np.sum(partial, axis=0) if partial else np.zeros(edges.size - 1, np.int64)
    T = pulse_length
    r0 = np.count_nonzero(records["channel"] == 0) / (n_trials * T)
    r1 = np.count_nonzero(records["channel"] == 1) / (n_trials * T)
    norm = r0 * r1 * T * n_trials * bin_width
    return CorrelationHistogram(bin_width, tau_min, float(edges[-1]), counts,
                                norm if norm > 0 else 1.0, T, n_trials, (r0, r1))
