"""Frequency-domain equalizers and per-symbol SINR calculators.

FD-LE inverts the diagonalized channel in the transform domain; FD-DFE uses
the factorization H^H H = L^H Λ L (L unit lower triangular, Λ positive
diagonal) as feed-forward/feedback filters.  The Λ pivots are the per-symbol
effective fading gains: the last pivot always equals Σ_p |h_p|², and the
first equals the reciprocal of the FD-LE noise-enhancement factor, which is
why the first DFE decision is exactly as reliable as FD-LE.
"""

from dataclasses import dataclass

import numpy as np

from .common import SINGULARITY_EPS, DomainMismatchError, SingularChannelError
from .grid_channel import ChannelRealization, Grid
from .transforms import (
    BlockCirculantChannel,
    DiagonalizedChannel,
    Domain,
    Frame,
    dense_block_circulant,
    isfft2,
    sfft2,
)


@dataclass(frozen=True)
class PowerAllocation:
    """Downlink NOMA power split: γ₀² to the high-mobility user, γ₁² to each
    scheduled NOMA user; γ₀² + γ₁² = 1.  γ₁² = 0 is the OMA limit.
    """

    gamma0_sq: float
    gamma1_sq: float

    def __post_init__(self):
        if not (0.0 < self.gamma0_sq <= 1.0):
            raise ValueError("gamma0_sq must be in (0, 1]")
        if not (0.0 <= self.gamma1_sq < 1.0):
            raise ValueError("gamma1_sq must be in [0, 1)")
        if abs(self.gamma0_sq + self.gamma1_sq - 1.0) > 1e-9:
            raise ValueError("gamma0_sq + gamma1_sq must equal 1")

    @property
    def gamma0(self) -> float:
        return float(np.sqrt(self.gamma0_sq))

    @property
    def gamma1(self) -> float:
        return float(np.sqrt(self.gamma1_sq))

    @classmethod
    def split(cls, gamma0_sq: float) -> "PowerAllocation":
        return cls(gamma0_sq=gamma0_sq, gamma1_sq=1.0 - gamma0_sq)

    @classmethod
    def oma(cls) -> "PowerAllocation":
        return cls(gamma0_sq=1.0, gamma1_sq=0.0)


@dataclass(frozen=True, eq=False)
class DfeFactors:
    """Factors of H^H H = L^H Λ L: unit-lower-triangular L and pivots λ > 0."""

    l_factor: np.ndarray
    lam: np.ndarray

    @property
    def n_symbols(self) -> int:
        return self.lam.shape[0]


def noise_enhancement(d: DiagonalizedChannel) -> float:
    """φ = (1/NM) Σ |D[k,l]|⁻², the FD-LE noise amplification.

    Equal to (1/NM)·trace(D⁻¹D⁻ᴴ); returns inf for a singular channel.
    """
    a = np.abs(d.d_values) ** 2
    if a.min() < SINGULARITY_EPS**2:
        return np.inf
    return float(np.mean(1.0 / a))


def fd_le_equalize(y: Frame, d: DiagonalizedChannel) -> Frame:
    """Zero-forcing equalization: transform, divide by D, transform back.

    Noiseless input reproduces the superimposed symbols exactly; the output
    equals the dense H⁻¹y but costs only two symplectic transforms.
    """
    if y.domain is not Domain.DELAY_DOPPLER:
        raise DomainMismatchError("fd_le_equalize expects a delay-Doppler frame")
    if d.d_values.shape != y.values.shape:
        raise ValueError("diagonal channel shape does not match the frame")
    if d.min_abs < SINGULARITY_EPS:
        raise SingularChannelError("channel eigenvalue below singularity threshold")
    out = isfft2(sfft2(y.values) / d.d_values)
    return Frame(y.grid, out, Domain.DELAY_DOPPLER)


def fd_le_sinr(d: DiagonalizedChannel, rho: float, p: PowerAllocation) -> float:
    """Common FD-LE SINR of every symbol: ργ₀² / (ργ₁² + φ).

    All NM symbols see the same value because the noise covariance after
    equalization is block-circulant with constant diagonal φ.  A singular
    channel yields SINR 0 (certain outage).
    """
    phi = noise_enhancement(d)
    if not np.isfinite(phi):
        return 0.0
    return rho * p.gamma0_sq / (rho * p.gamma1_sq + phi)


def _reversed_cholesky_pivots(gram: np.ndarray) -> np.ndarray:
    """Pivots λ (in symbol order) of G = L^H Λ L via Cholesky of the
    index-reversed Gram matrix.  Supports stacked leading axes; raises
    ``numpy.linalg.LinAlgError`` when any matrix is not positive definite.
    """
    rev = gram[..., ::-1, ::-1]
    chol = np.linalg.cholesky(rev)
    diag = np.einsum("...ii->...i", chol).real
    return (diag * diag)[..., ::-1]


def _reversed_cholesky(gram: np.ndarray):
    """Full (L, λ) factors of a single Gram matrix G = L^H Λ L."""
    rev = gram[::-1, ::-1]
    chol = np.linalg.cholesky(rev)
    diag = np.diagonal(chol).real
    unit = chol / diag[None, :]
    lam = (diag * diag)[::-1]
    l_factor = unit.conj().T[::-1, ::-1]
    return l_factor, lam


def gram_tap_array(realization: ChannelRealization, grid: Grid) -> np.ndarray:
    """(N, M) taps of the Gram operator H^H H (itself block-circulant).

    Path pair (p, q) contributes conj(h_p)h_q at Doppler (k_q−k_p) mod N and
    delay (l_q−l_p) mod M; gains may carry leading batch axes.
    """
    return gram_taps_from_gains(
        realization.profile.doppler_taps,
        realization.profile.delay_taps,
        realization.gains,
        grid.n_doppler,
        grid.m_delay,
    )


def gram_taps_from_gains(doppler_taps, delay_taps, gains, n: int, m: int) -> np.ndarray:
    gains = np.asarray(gains, dtype=np.complex128)
    out = np.zeros(gains.shape[:-1] + (n, m), dtype=np.complex128)
    npaths = len(delay_taps)
    for p in range(npaths):
        hp = np.conj(gains[..., p])
        for q in range(npaths):
            kk = int((doppler_taps[q] - doppler_taps[p]) % n)
            ll = int((delay_taps[q] - delay_taps[p]) % m)
            out[..., kk, ll] += hp * gains[..., q]
    return out


def cholesky_factors(channel: BlockCirculantChannel) -> DfeFactors:
    """Factor H^H H = L^H Λ L for the FD-DFE.

    The Gram matrix is assembled from the channel taps and factored densely
    (desk-scale grids only).  Raises :class:`SingularChannelError` when H is
    rank deficient, i.e. any pivot falls below the singularity threshold.
    """
    gram = dense_block_circulant(gram_tap_array(channel.realization, channel.grid))
    try:
        l_factor, lam = _reversed_cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularChannelError("H^H H is not positive definite") from exc
    if lam.min() < SINGULARITY_EPS:
        raise SingularChannelError("DFE pivot below singularity threshold")
    return DfeFactors(l_factor=l_factor, lam=lam)


def qpsk_alphabet(power: float = 1.0) -> np.ndarray:
    """The four QPSK points at average power ``power``."""
    return np.sqrt(power / 2.0) * np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])


@dataclass(frozen=True, eq=False)
class GenieFeedback:
    """Perfect decision feedback: the true superposition is fed back, so the
    estimate is exactly x + L(HᴴH)⁻¹Hᴴz (no error propagation)."""

    true_symbols: np.ndarray


@dataclass(frozen=True, eq=False)
class HardDecisionFeedback:
    """Slice each symbol to the nearest alphabet point before feeding back.

    Quantifies error propagation relative to the genie upper bound.
    """

    alphabet: np.ndarray


def fd_dfe_equalize(y: Frame, channel: BlockCirculantChannel, feedback,
                    factors: DfeFactors | None = None) -> Frame:
    """Decision-feedback equalization of a delay-Doppler observation.

    Feed-forward P = L(HᴴH)⁻¹Hᴴ, feedback G = L − I; decisions propagate in
    row-major symbol order (symbol (0,0) first), which is the order the unit
    lower triangular feedback supports.
    """
    if y.domain is not Domain.DELAY_DOPPLER:
        raise DomainMismatchError("fd_dfe_equalize expects a delay-Doppler frame")
    if factors is None:
        factors = cholesky_factors(channel)
    n, m = y.grid.n_doppler, y.grid.m_delay
    hmat = channel.matrix
    yvec = y.values.reshape(-1)
    gram = hmat.conj().T @ hmat
    forward = factors.l_factor @ np.linalg.solve(gram, hmat.conj().T @ yvec)

    if isinstance(feedback, GenieFeedback):
        xvec = np.asarray(feedback.true_symbols, dtype=np.complex128).reshape(-1)
        est = forward - factors.l_factor @ xvec + xvec
    elif isinstance(feedback, HardDecisionFeedback):
        alphabet = np.asarray(feedback.alphabet, dtype=np.complex128).reshape(-1)
        est = np.empty_like(forward)
        decided = np.zeros_like(forward)
        lmat = factors.l_factor
        for j in range(est.shape[0]):
            est[j] = forward[j] - lmat[j, :j] @ decided[:j]
            decided[j] = alphabet[np.argmin(np.abs(est[j] - alphabet))]
    else:
        raise TypeError("feedback must be GenieFeedback or HardDecisionFeedback")
    return Frame(y.grid, est.reshape(n, m), Domain.DELAY_DOPPLER)


def fd_dfe_sinrs(factors: DfeFactors, rho: float, p: PowerAllocation) -> np.ndarray:
    """Per-symbol DFE SINRs ργ₀² / (ργ₁² + 1/λ), row-major symbol order.

    Unlike FD-LE the symbols see unequal effective gains; the last symbol
    always gets λ = Σ|h_p|² and the first the FD-LE-equivalent 1/φ.
    """
    return rho * p.gamma0_sq / (rho * p.gamma1_sq + 1.0 / factors.lam)


def static_cholesky_lambdas(realization: ChannelRealization, grid: Grid) -> np.ndarray:
    """M-point pivots λ̃ for a Doppler-free channel's circulant block."""
    prof = realization.profile
    if not prof.is_static():
        raise ValueError("static factors require a Doppler-free profile")
    prof.check_fits(grid)
    gram_taps = static_gram_taps(prof.delay_taps, realization.gains, grid.m_delay)
    gram = _dense_circulant(gram_taps)
    try:
        return _reversed_cholesky_pivots(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularChannelError("circulant block is not positive definite") from exc


def static_gram_taps(delay_taps, gains, m: int) -> np.ndarray:
    gains = np.asarray(gains, dtype=np.complex128)
    out = np.zeros(gains.shape[:-1] + (m,), dtype=np.complex128)
    npaths = len(delay_taps)
    for p in range(npaths):
        hp = np.conj(gains[..., p])
        for q in range(npaths):
            ll = int((delay_taps[q] - delay_taps[p]) % m)
            out[..., ll] += hp * gains[..., q]
    return out


def _dense_circulant(taps: np.ndarray) -> np.ndarray:
    m = taps.shape[-1]
    ld = (np.arange(m)[:, None] - np.arange(m)[None, :]) % m
    return taps[..., ld]


def static_dfe_sinrs(realization: ChannelRealization, grid: Grid, rho: float,
                     p: PowerAllocation) -> np.ndarray:
    """M per-symbol DFE SINRs on the M-point static channel."""
    lam = static_cholesky_lambdas(realization, grid)
    if lam.min() < SINGULARITY_EPS:
        raise SingularChannelError("static DFE pivot below singularity threshold")
    return rho * p.gamma0_sq / (rho * p.gamma1_sq + 1.0 / lam)


def batch_dfe_lambdas(doppler_taps, delay_taps, gains: np.ndarray, n: int, m: int,
                      chunk: int = 64):
    """Pivots for a batch of channels, shape (T, NM), plus a validity mask.

    Trials whose Gram matrix fails Cholesky (numerically singular) get
    ``ok=False`` and λ = 1 as a placeholder; callers must treat them as
    outage for every symbol.
    """
    trials = gains.shape[0]
    nm = n * m
    lam = np.ones((trials, nm))
    ok = np.ones(trials, dtype=bool)
    gram_taps = gram_taps_from_gains(doppler_taps, delay_taps, gains, n, m)
    for lo in range(0, trials, chunk):
        hi = min(lo + chunk, trials)
        dense = dense_block_circulant(gram_taps[lo:hi])
        try:
            lam[lo:hi] = _reversed_cholesky_pivots(dense)
        except np.linalg.LinAlgError:
            for t in range(lo, hi):
                try:
                    lam[t] = _reversed_cholesky_pivots(dense[t - lo])
                except np.linalg.LinAlgError:
                    ok[t] = False
    bad = lam.min(axis=1) < SINGULARITY_EPS
    ok &= ~bad
    return lam, ok


def batch_static_lambdas(delay_taps, gains: np.ndarray, m: int):
    """M-point pivots for stacked static channels, shape (..., M), plus mask."""
    gram = _dense_circulant(static_gram_taps(delay_taps, gains, m))
    lead = gains.shape[:-1]
    lam = np.ones(lead + (m,))
    ok = np.ones(lead, dtype=bool)
    try:
        lam = _reversed_cholesky_pivots(gram)
    except np.linalg.LinAlgError:
        flat = gram.reshape((-1, m, m))
        lam = lam.reshape((-1, m))
        okf = ok.reshape(-1)
        for t in range(flat.shape[0]):
            try:
                lam[t] = _reversed_cholesky_pivots(flat[t])
            except np.linalg.LinAlgError:
                okf[t] = False
        lam = lam.reshape(lead + (m,))
        ok = okf.reshape(lead)
    ok &= ~(lam.min(axis=-1) < SINGULARITY_EPS)
    return lam, ok
