"""Monte Carlo experiment engine, analytic oracles, and CSV serialization.

A scenario fans its trials out in fixed-size blocks; each block draws from a
substream keyed by (seed, snr_index, block_index) and returns partial sums
that are merged in block order, so a run is bit-reproducible regardless of
the worker count.  Every probability metric carries a 95% normal-approximation
confidence halfwidth computed from the per-trial spread.
"""

import concurrent.futures
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .common import ConfigError, EstimatorUndefinedError
from .equalizers import batch_dfe_lambdas, batch_static_lambdas
from .grid_channel import ChannelProfile, Grid, make_grid, sample_gain_matrix, table1_profile
from .rng import substream
from .scheduling import batch_schedule
from .transforms import spectrum_from_taps, static_spectrum_from_taps

BLOCK_TRIALS = 4096  # fixed work-unit size; part of the determinism contract

DIRECTIONS = ("downlink", "uplink")
EQUALIZERS = ("le", "dfe")
SCHEDULERS = ("random", "greedy", "per_subchannel")
RATE_MODES = ("fixed", "adaptive")


def default_noma_profile() -> ChannelProfile:
    """Four equal-spaced delay taps, Doppler-free (low-mobility users)."""
    return ChannelProfile(paths=((0, 0), (1, 0), (2, 0), (3, 0)))


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one experiment (one curve family)."""

    direction: str
    n: int
    m: int
    k_users: int
    gamma0_sq: float
    rate_u0: float
    rate_noma: float
    equalizer: str
    snr_db: tuple
    trials: int
    seed: int
    scheduler: str = "random"
    rate_mode: str = "fixed"
    delta_f: float = 7500.0
    u0_profile: ChannelProfile = field(default_factory=table1_profile)
    noma_profile: ChannelProfile = field(default_factory=default_noma_profile)

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        self.validate()

    def validate(self):
        if self.direction not in DIRECTIONS:
            raise ConfigError("direction", f"must be one of {DIRECTIONS}")
        if self.n < 1 or self.m < 1:
            raise ConfigError("n/m", "grid dimensions must be >= 1")
        if self.k_users < 1:
            raise ConfigError("k_users", "must be >= 1")
        if self.scheduler not in SCHEDULERS:
            raise ConfigError("scheduler", f"must be one of {SCHEDULERS}")
        if self.scheduler == "random" and self.k_users < self.m:
            raise ConfigError("k_users", "random scheduling needs k_users >= m")
        if not (0.0 < self.gamma0_sq <= 1.0):
            raise ConfigError("gamma0_sq", "must be in (0, 1]")
        if self.rate_u0 <= 0 or self.rate_noma <= 0:
            raise ConfigError("rate_u0/rate_noma", "target rates must be positive")
        if self.equalizer not in EQUALIZERS:
            raise ConfigError("equalizer", f"must be one of {EQUALIZERS}")
        if self.rate_mode not in RATE_MODES:
            raise ConfigError("rate_mode", f"must be one of {RATE_MODES}")
        if not self.snr_db:
            raise ConfigError("snr_db", "SNR grid must be nonempty")
        if any(b <= a for a, b in zip(self.snr_db, self.snr_db[1:])):
            raise ConfigError("snr_db", "SNR grid must be strictly increasing")
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        if self.delta_f <= 0:
            raise ConfigError("delta_f", "must be positive")
        try:
            self.u0_profile.check_fits(self.grid())
            self.noma_profile.check_fits(self.grid())
        except ValueError as exc:
            raise ConfigError("u0_profile/noma_profile", str(exc)) from exc
        if not self.noma_profile.is_static():
            raise ConfigError("noma_profile", "NOMA users must be Doppler-free")

    def grid(self) -> Grid:
        return make_grid(self.n, self.m, self.delta_f)


@dataclass(frozen=True)
class CurvePoint:
    """One (SNR, metric) sample of a curve with its uncertainty."""

    snr_db: float
    metric: str
    value: float
    ci_halfwidth: float
    trials_used: int

    def __post_init__(self):
        if self.ci_halfwidth < 0:
            raise ValueError("ci_halfwidth must be non-negative")


# ---------------------------------------------------------------------------
#  Config file parsing (flat key = value text)
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "direction", "n", "m", "delta_f", "k_users", "u0_profile", "noma_profile",
    "gamma0_sq", "rate_u0", "rate_noma", "rate_mode", "equalizer", "scheduler",
    "snr_db", "trials", "seed",
}
_REQUIRED_KEYS = {
    "direction", "n", "m", "k_users", "gamma0_sq", "rate_u0", "rate_noma",
    "equalizer", "snr_db", "trials", "seed",
}


def _parse_profile(text: str) -> ChannelProfile:
    pairs = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        delay, _, doppler = piece.partition(":")
        pairs.append((int(delay), int(doppler)))
    return ChannelProfile(paths=tuple(pairs))


def parse_config_text(text: str) -> ScenarioConfig:
    """Parse the flat key = value scenario format; unknown keys are errors."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(key, "unknown configuration key")
        if key in raw:
            raise ConfigError(key, "duplicate configuration key")
        raw[key] = value
    missing = _REQUIRED_KEYS - raw.keys()
    if missing:
        raise ConfigError(sorted(missing)[0], "required key is missing")

    def _num(key, cast):
        try:
            return cast(raw[key])
        except ValueError as exc:
            raise ConfigError(key, f"invalid value {raw[key]!r}") from exc

    kwargs = dict(
        direction=raw["direction"],
        n=_num("n", int),
        m=_num("m", int),
        k_users=_num("k_users", int),
        gamma0_sq=_num("gamma0_sq", float),
        rate_u0=_num("rate_u0", float),
        rate_noma=_num("rate_noma", float),
        equalizer=raw["equalizer"],
        trials=_num("trials", int),
        seed=_num("seed", int),
    )
    try:
        kwargs["snr_db"] = tuple(float(s) for s in raw["snr_db"].split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError("snr_db", f"invalid value {raw['snr_db']!r}") from exc
    if "delta_f" in raw:
        kwargs["delta_f"] = _num("delta_f", float)
    if "scheduler" in raw:
        kwargs["scheduler"] = raw["scheduler"]
    if "rate_mode" in raw:
        kwargs["rate_mode"] = raw["rate_mode"]
    for key in ("u0_profile", "noma_profile"):
        if key in raw:
            try:
                kwargs[key] = _parse_profile(raw[key])
            except ValueError as exc:
                raise ConfigError(key, str(exc)) from exc
    return ScenarioConfig(**kwargs)


def parse_config_file(path) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise OSError(f"cannot read config file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
#  Per-block trial kernels
# ---------------------------------------------------------------------------


def _accumulate(store: dict, name: str, samples: np.ndarray):
    s, s2, t = store.get(name, (0.0, 0.0, 0))
    samples = np.asarray(samples, dtype=float)
    store[name] = (s + float(samples.sum()), s2 + float((samples**2).sum()),
                   t + samples.size)


def _downlink_block(cfg: ScenarioConfig, rho: float, rng, trials: int) -> dict:
    n, m = cfg.n, cfg.m
    g0sq = cfg.gamma0_sq
    g1sq = 1.0 - cfg.gamma0_sq
    eps0 = 2.0**cfg.rate_u0 - 1.0
    epsi = 2.0**cfg.rate_noma - 1.0
    u0p, nomap = cfg.u0_profile, cfg.noma_profile

    # fixed draw order: U0 gains, then the K NOMA users, then scheduling draws
    h0 = sample_gain_matrix(u0p, rng, trials)
    hk = sample_gain_matrix(nomap, rng, trials * cfg.k_users)
    hk = hk.reshape(trials, cfg.k_users, nomap.num_paths)

    store: dict = {}

    # --- U0 detection (NOMA power split and the OMA baseline) ---
    taps0 = np.zeros((trials, n, m), dtype=np.complex128)
    taps0[:, u0p.doppler_taps, u0p.delay_taps] = h0
    a0 = np.abs(spectrum_from_taps(taps0)) ** 2
    if cfg.equalizer == "le":
        with np.errstate(divide="ignore"):
            inv = 1.0 / np.where(a0 > 0, a0, np.inf)
        phi = inv.mean(axis=(1, 2))
        phi[a0.min(axis=(1, 2)) < 1e-24] = np.inf
        out_noma = (rho * g0sq / (rho * g1sq + phi) < eps0).astype(float)
        out_oma = (rho / phi < eps0).astype(float)
        u0_mean, u0_first, u0_last = out_noma, out_noma, out_noma
        oma_mean, oma_first, oma_last = out_oma, out_oma, out_oma
    else:
        lam, ok = batch_dfe_lambdas(u0p.doppler_taps, u0p.delay_taps, h0, n, m)
        flags = (rho * g0sq / (rho * g1sq + 1.0 / lam) < eps0)
        flags[~ok] = True
        flags_oma = (rho * lam < eps0)
        flags_oma[~ok] = True
        u0_mean = flags.mean(axis=1)
        u0_first = flags[:, 0].astype(float)
        u0_last = flags[:, -1].astype(float)
        oma_mean = flags_oma.mean(axis=1)
        oma_first = flags_oma[:, 0].astype(float)
        oma_last = flags_oma[:, -1].astype(float)

    _accumulate(store, "u0_outage", u0_mean)
    _accumulate(store, "u0_outage_first", u0_first)
    _accumulate(store, "u0_outage_last", u0_last)
    _accumulate(store, "u0_outage_oma", oma_mean)
    _accumulate(store, "u0_outage_oma_first", oma_first)
    _accumulate(store, "u0_outage_oma_last", oma_last)

    # --- NOMA users: stage-I (decode U0) then stage-II (own symbol) ---
    tapsk = np.zeros((trials, cfg.k_users, m), dtype=np.complex128)
    tapsk[:, :, nomap.delay_taps] = hk
    ak = np.abs(static_spectrum_from_taps(tapsk)) ** 2

    if cfg.equalizer == "le":
        with np.errstate(divide="ignore"):
            invk = 1.0 / np.where(ak > 0, ak, np.inf)
        phik = invk.mean(axis=2)
        phik[ak.min(axis=2) < 1e-24] = np.inf
        ok1_user = rho * g0sq / (rho * g1sq + phik) > eps0  # (T, K)
    else:
        lamk, okk = batch_static_lambdas(nomap.delay_taps, hk, m)
        sinr1 = rho * g0sq / (rho * g1sq + 1.0 / lamk)
        ok1_user = (sinr1 > eps0).all(axis=2) & okk

    sel = batch_schedule(ak, cfg.scheduler, rng, m)  # (T, M) user per subchannel
    rows = np.arange(trials)[:, None]
    cols = np.arange(m)[None, :]
    ok1_sel = np.take_along_axis(ok1_user, sel, axis=1)
    snr2 = rho * g1sq * ak[rows, sel, cols]
    noma_out = ~(ok1_sel & (snr2 > epsi))  # (T, M); constant over the N symbols
    noma_frac = noma_out.mean(axis=1)
    _accumulate(store, "noma_outage", noma_frac)

    _accumulate(store, "outage_sum_rate_noma",
                cfg.rate_u0 * (1.0 - u0_mean) + cfg.rate_noma * (1.0 - noma_frac))
    _accumulate(store, "outage_sum_rate_oma", cfg.rate_u0 * (1.0 - oma_mean))
    return store


def _uplink_block(cfg: ScenarioConfig, rho: float, rng, trials: int) -> dict:
    n, m = cfg.n, cfg.m
    eps0 = 2.0**cfg.rate_u0 - 1.0
    epsi = 2.0**cfg.rate_noma - 1.0
    u0p, nomap = cfg.u0_profile, cfg.noma_profile

    h0 = sample_gain_matrix(u0p, rng, trials)
    hk = sample_gain_matrix(nomap, rng, trials * cfg.k_users)
    hk = hk.reshape(trials, cfg.k_users, nomap.num_paths)

    taps0 = np.zeros((trials, n, m), dtype=np.complex128)
    taps0[:, u0p.doppler_taps, u0p.delay_taps] = h0
    a0 = np.abs(spectrum_from_taps(taps0)) ** 2
    tapsk = np.zeros((trials, cfg.k_users, m), dtype=np.complex128)
    tapsk[:, :, nomap.delay_taps] = hk
    ak = np.abs(static_spectrum_from_taps(tapsk)) ** 2

    sel = batch_schedule(ak, cfg.scheduler, rng, m)
    rows = np.arange(trials)[:, None]
    gsel = ak[rows, sel, np.arange(m)[None, :]]
    sinr1 = rho * gsel[:, None, :] / (rho * a0 + 1.0)  # (T, N, M)

    store: dict = {}

    # stage-II SINR for U0 (interference-free once NOMA signals are removed)
    if cfg.equalizer == "le":
        with np.errstate(divide="ignore"):
            inv = 1.0 / np.where(a0 > 0, a0, np.inf)
        phi = inv.mean(axis=(1, 2))
        phi[a0.min(axis=(1, 2)) < 1e-24] = np.inf
        stage2_out_sym = (rho / phi < eps0)[:, None] * np.ones((1, n * m), dtype=bool)
    else:
        lam, ok = batch_dfe_lambdas(u0p.doppler_taps, u0p.delay_taps, h0, n, m)
        stage2_out_sym = rho * lam < eps0
        stage2_out_sym[~ok] = True
    stage2_frac = stage2_out_sym.mean(axis=1)

    if cfg.rate_mode == "adaptive":
        _accumulate(store, "ergodic_rate_gain", np.log2(1.0 + sinr1).mean(axis=(1, 2)))
        _accumulate(store, "u0_outage", stage2_frac)
    else:
        cell_ok = sinr1 > epsi
        noma_frac = 1.0 - cell_ok.mean(axis=(1, 2))
        all_ok = cell_ok.all(axis=(1, 2))
        joint_ok = (~stage2_out_sym) & all_ok[:, None]
        u0_joint = 1.0 - joint_ok.mean(axis=1)
        _accumulate(store, "noma_outage", noma_frac)
        _accumulate(store, "u0_outage", u0_joint)
        _accumulate(store, "u0_outage_stage2", stage2_frac)
        _accumulate(store, "outage_sum_rate_noma",
                    cfg.rate_u0 * (1.0 - u0_joint) + cfg.rate_noma * (1.0 - noma_frac))
        _accumulate(store, "outage_sum_rate_oma", cfg.rate_u0 * (1.0 - stage2_frac))
    return store


def _run_block(cfg: ScenarioConfig, snr_index: int, block_index: int, trials: int) -> dict:
    rho = 10.0 ** (cfg.snr_db[snr_index] / 10.0)
    rng = substream(cfg.seed, snr_index, block_index)
    if cfg.direction == "downlink":
        return _downlink_block(cfg, rho, rng, trials)
    return _uplink_block(cfg, rho, rng, trials)


# ---------------------------------------------------------------------------
#  Scenario driver
# ---------------------------------------------------------------------------


def _blocks(total: int):
    out = []
    index = 0
    start = 0
    while start < total:
        take = min(BLOCK_TRIALS, total - start)
        out.append((index, take))
        index += 1
        start += take
    return out


def run_scenario(cfg: ScenarioConfig, workers: int = 1) -> list:
    """Run every SNR point of a scenario and return sorted curve points.

    Trials are processed in fixed-size blocks with per-block substreams and
    the partial sums merged in block order, so the output is bit-identical
    for any ``workers`` count.
    """
    tasks = [(si, bi, t) for si in range(len(cfg.snr_db)) for bi, t in _blocks(cfg.trials)]
    results = {}
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_run_block, cfg, si, bi, t): (si, bi) for si, bi, t in tasks}
            for fut, key in futures.items():
                results[key] = fut.result()
    else:
        for si, bi, t in tasks:
            results[(si, bi)] = _run_block(cfg, si, bi, t)

    points = []
    for si, snr in enumerate(cfg.snr_db):
        merged: dict = {}
        for bi, _ in _blocks(cfg.trials):
            for name, (s, s2, t) in results[(si, bi)].items():
                acc = merged.get(name, (0.0, 0.0, 0))
                merged[name] = (acc[0] + s, acc[1] + s2, acc[2] + t)
        for name in sorted(merged):
            s, s2, t = merged[name]
            mean = s / t
            var = max(s2 - t * mean**2, 0.0) / (t - 1) if t > 1 else 0.0
            ci = 1.96 * math.sqrt(var / t) if t > 1 else 0.0
            points.append(CurvePoint(snr_db=snr, metric=name, value=mean,
                                     ci_halfwidth=ci, trials_used=t))
    points.sort(key=lambda p: (p.metric, p.snr_db))
    return points


# ---------------------------------------------------------------------------
#  Analytic oracles and curve post-processing
# ---------------------------------------------------------------------------


def corollary1_outage(p0: int, rho: float, gamma0_sq: float, gamma1_sq: float,
                      r0: float) -> float:
    """Closed-form DFE outage of the best-protected symbol x₀[N−1, M−1].

    (P₀+1)·Σ|h_p|² is Gamma(P₀+1, 1), so the outage is the Erlang CDF
    1 − e^{−x} Σ_{j≤P₀} x^j/j! at x = ε₀(P₀+1)/(ρ(γ₀² − γ₁²ε₀)).  When
    γ₀² ≤ γ₁²ε₀ the outage is one at every SNR.
    """
    if p0 < 0:
        raise ValueError("p0 must be >= 0")
    if rho <= 0:
        raise ValueError("rho must be positive")
    eps0 = 2.0**r0 - 1.0
    delta = gamma0_sq - gamma1_sq * eps0
    if delta <= 0:
        return 1.0
    x = eps0 * (p0 + 1) / (rho * delta)
    term = 1.0
    series = 1.0
    for j in range(1, p0 + 1):
        term *= x / j
        series += term
    return float(min(1.0, max(0.0, 1.0 - math.exp(-x) * series)))


def diversity_slope(points: list) -> float:
    """Least-squares slope of log10(P) vs log10(ρ) over reliable points.

    Points are reliable when their outage lies in [10/trials, 0.1]; fewer
    than three reliable points raises :class:`EstimatorUndefinedError`.
    """
    usable = [p for p in points
              if 10.0 / p.trials_used <= p.value <= 0.1]
    if len(usable) < 3:
        raise EstimatorUndefinedError(
            f"need >= 3 points with outage in [10/trials, 0.1], have {len(usable)}")
    x = np.array([p.snr_db / 10.0 for p in usable])
    y = np.log10([p.value for p in usable])
    return float(np.polyfit(x, y, 1)[0])


CSV_HEADER = ("snr_db", "metric", "value", "ci_halfwidth", "trials")


def emit_csv(points: list, path) -> None:
    """Write curve points sorted by (metric, snr_db), 12 significant digits."""
    rows = sorted(points, key=lambda p: (p.metric, p.snr_db))
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for p in rows:
                writer.writerow([f"{p.snr_db:.12g}", p.metric, f"{p.value:.12g}",
                                 f"{p.ci_halfwidth:.12g}", p.trials_used])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv_points(path) -> list:
    """Parse a CSV produced by :func:`emit_csv` back into curve points."""
    try:
        with open(path, "r", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != CSV_HEADER:
                raise ValueError(f"unexpected CSV header {header!r} in {path}")
            return [CurvePoint(snr_db=float(r[0]), metric=r[1], value=float(r[2]),
                               ci_halfwidth=float(r[3]), trials_used=int(r[4]))
                    for r in reader if r]
    except OSError as exc:
        raise OSError(f"cannot read CSV from {path}: {exc}") from exc
