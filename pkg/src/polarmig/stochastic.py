"""Time-domain pipeline: random source synthesis, propagation, autocorrelations.

The dipole source is driven by a real stationary Gaussian process whose
per-channel autocorrelation is

    J(tau) = (4 pi / t_c) cos(w0 tau) exp(-pi (tau / t_c)^2),

with correlation time ``t_c`` and carrier ``w0``.  Under the package Fourier
convention (``exp(-i w t)`` kernel, ``1/2pi`` forward factor) its power
spectrum works out to two unit-height Gaussians,

    S(w) = exp(-t_c^2 (w - w0)^2 / 4 pi) + exp(-t_c^2 (w + w0)^2 / 4 pi),

which the test suite cross-checks against a numerical transform of J before
anything downstream relies on it.  Synthesis shapes Hermitian-symmetric white
noise on the frequency grid by sqrt(S) and transforms back, which is exact for
a strictly positive spectrum.

Empirical autocorrelations are computed through the scaled periodogram:
``Psi_hat(w) = (2 pi / 2T) Epar(w) Epar(w)^*`` with the analysis transform
``E(w) = (dt / 2 pi) sum_n E(t_n) exp(+i w t_n)``.  Signals are zero padded at
least twofold before any product of transforms so correlations are linear,
not circular.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ArrayDataSet, _read_container, _write_container
from .errors import DatasetFormatError
from .forward import born_response, projected_incident, projected_response
from .scene import FrequencyBand, Scene

TWO_PI = 2.0 * np.pi

# Spectrum support margin: frequencies beyond w0 + this many pi/t_c carry
# negligible source energy.
_BAND_HALF_WIDTHS = 3.0


@dataclass(frozen=True)
class SourceProcessSpec:
    """Sampling plan for the random source process.

    ``samples`` points cover the acquisition window of duration
    ``2 * half_duration``; the sampling rate must resolve the carrier plus
    spectral support and the window must dwarf the correlation time.
    """

    correlation_time: float
    center: float
    half_duration: float
    samples: int
    seed: int = 0

    def __post_init__(self):
        if min(self.correlation_time, self.center, self.half_duration) <= 0:
            raise ValueError("correlation time, center and duration must be positive")
        if self.samples < 16:
            raise ValueError("need at least 16 samples")
        w_max = self.center + _BAND_HALF_WIDTHS * np.pi / self.correlation_time
        if np.pi / self.dt <= w_max:
            raise ValueError(
                f"sampling rate too low: Nyquist {np.pi / self.dt:.3e} rad/s "
                f"must exceed {w_max:.3e} rad/s"
            )
        if self.half_duration < 10 * self.correlation_time:
            raise ValueError("window must span many correlation times")

    @property
    def dt(self) -> float:
        return 2.0 * self.half_duration / self.samples

    def autocorrelation(self, tau) -> np.ndarray:
        tc = self.correlation_time
        tau = np.asarray(tau, dtype=float)
        return (4.0 * np.pi / tc) * np.cos(self.center * tau) * np.exp(
            -np.pi * (tau / tc) ** 2
        )

    def spectrum(self, omega) -> np.ndarray:
        tc = self.correlation_time
        w = np.asarray(omega, dtype=float)
        return np.exp(-(tc**2) * (w - self.center) ** 2 / (4.0 * np.pi)) + np.exp(
            -(tc**2) * (w + self.center) ** 2 / (4.0 * np.pi)
        )


@dataclass
class TimeSignal:
    """Real multichannel time series; trailing axis is time."""

    samples: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim < 1:
            raise ValueError("samples must have a time axis")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        if self.dt <= 0:
            raise ValueError("sample interval must be positive")
        self.samples = s

    @property
    def n(self) -> int:
        return self.samples.shape[-1]

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    def write(self, path) -> None:
        _write_container(
            path, "timeseries", self.samples, {"dt": self.dt, "t0": self.t0}
        )

    @staticmethod
    def read(path) -> "TimeSignal":
        kind, values, meta = _read_container(path)
        if kind != "timeseries":
            raise DatasetFormatError(f"file holds kind {kind!r}, not a time signal")
        return TimeSignal(samples=values, dt=float(meta["dt"]), t0=float(meta["t0"]))


# ---------------------------------------------------------------------------
# Discrete transforms in the package convention
# ---------------------------------------------------------------------------


def _pad_length(n: int, factor: float = 2.0) -> int:
    """Transform-friendly length at least ``factor * n`` (power of two)."""
    target = int(np.ceil(n * factor))
    return 1 << int(np.ceil(np.log2(target)))


def spectrum_grid(n: int, dt: float) -> np.ndarray:
    """Nonnegative angular frequencies of an n-point real transform."""
    return TWO_PI * np.fft.rfftfreq(n, d=dt)


def analysis_transform(samples: np.ndarray, dt: float) -> np.ndarray:
    """Discrete version of ``(1/2pi) integral dt x(t) exp(+i w t)`` on the rfft grid."""
    return (dt / TWO_PI) * np.conj(np.fft.rfft(samples, axis=-1))


def synthesis_transform(spec: np.ndarray, n: int, dt: float) -> np.ndarray:
    """Inverse of :func:`analysis_transform` back to ``n`` real samples."""
    return np.fft.irfft(np.conj(spec) * (TWO_PI / dt), n=n, axis=-1)


# ---------------------------------------------------------------------------
# Source synthesis
# ---------------------------------------------------------------------------


def _synth_channels(spec: SourceProcessSpec, nchan: int, rng) -> np.ndarray:
    """Independent realizations of the scalar process, shape (nchan, samples)."""
    n, dt = spec.samples, spec.dt
    omegas = spectrum_grid(n, dt)
    d_omega = TWO_PI / (n * dt)
    # target second moment of the analysis transform: S(w) / d_omega
    sigma = np.sqrt(spec.spectrum(omegas) / d_omega)
    z = rng.standard_normal((nchan, omegas.size)) + 1j * rng.standard_normal(
        (nchan, omegas.size)
    )
    z *= np.sqrt(0.5)
    # zero frequency and (for even n) Nyquist carry real amplitudes
    z[:, 0] = rng.standard_normal(nchan)
    if n % 2 == 0:
        z[:, -1] = rng.standard_normal(nchan)
    return synthesis_transform(sigma * z, n, dt)


def synth_source(spec: SourceProcessSpec, basis: np.ndarray, rng=None) -> TimeSignal:
    """Realization of the random dipole moment, lifted to 3 real channels.

    Two independent scalar processes ride the columns of the 3x2 ``basis``;
    their common autocorrelation is ``spec.autocorrelation``.
    """
    basis = np.asarray(basis, dtype=float)
    if basis.shape != (3, 2):
        raise ValueError("basis must be 3x2")
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    channels = _synth_channels(spec, 2, rng)
    return TimeSignal(
        samples=basis @ channels, dt=spec.dt, t0=-spec.half_duration
    )


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------


def _transfer_matrices(scene: Scene, omegas: np.ndarray, receivers: np.ndarray):
    """Total transfer (direct plus scattered) 3x3 matrices, (nrec, nfreq, 3, 3)."""
    out = np.zeros((receivers.shape[0], omegas.size, 3, 3), dtype=complex)
    from .emcore import dyadic_green  # local import to keep module init light

    pos = scene.scatterer_positions()
    alphas = scene.scatterer_tensors()
    for fi, w in enumerate(omegas):
        if w <= 0:
            continue
        k = scene.wavenumber(w)
        g = dyadic_green(receivers, scene.source.position, k)
        if pos.shape[0]:
            g_src = dyadic_green(pos, scene.source.position, k)
            tail = alphas @ g_src
            g_rec = dyadic_green(receivers[:, None, :], pos[None, :, :], k)
            g = g + np.einsum("rnij,njk->rik", g_rec, tail)
        out[:, fi] = g
    return out


def simulate_received(
    scene: Scene,
    source: TimeSignal,
    receivers=None,
    pad_factor: float = 2.0,
    spectrum_floor: float = 1e-12,
) -> TimeSignal:
    """Propagate a 3-channel source signal to the receivers.

    Works bin by bin on the zero-padded frequency grid: the received spectrum
    is the total transfer matrix times the source spectrum.  Bins where the
    source carries less than ``spectrum_floor`` of its peak are skipped (this
    also guards the undefined zero-frequency response).  Output samples have
    shape (nrec, 3, n_padded) and remain real.
    """
    if source.samples.shape[0] != 3 or source.samples.ndim != 2:
        raise ValueError("source signal must have 3 channels")
    if pad_factor < 2.0:
        raise ValueError("pad factor below 2 risks circular wrap-around")
    if receivers is None:
        receivers = scene.geom.flat_positions()
    receivers = np.asarray(receivers, dtype=float).reshape(-1, 3)
    n_pad = _pad_length(source.n, pad_factor)
    padded = np.zeros((3, n_pad))
    padded[:, : source.n] = source.samples
    j_hat = analysis_transform(padded, source.dt)
    omegas = spectrum_grid(n_pad, source.dt)
    power = np.abs(j_hat).max(axis=0)
    active = (omegas > 0) & (power > spectrum_floor * power.max())
    transfer = _transfer_matrices(scene, omegas[active], receivers)
    e_hat = np.zeros((receivers.shape[0], 3, omegas.size), dtype=complex)
    e_hat[:, :, active] = np.einsum(
        "rfij,jf->rif", transfer, j_hat[:, active], optimize=True
    )
    samples = synthesis_transform(e_hat, n_pad, source.dt)
    return TimeSignal(samples=samples, dt=source.dt, t0=source.t0)


# ---------------------------------------------------------------------------
# Empirical autocorrelations
# ---------------------------------------------------------------------------


def empirical_coherency(signal: TimeSignal, duration: float, pad_factor: float = 2.0):
    """Scaled periodogram estimate of the coherency spectrum.

    Returns ``(omegas, psi_hat)`` with ``psi_hat[..., m, :, :]`` the 2x2
    estimate at ``omegas[m]`` built from the cross-range components of a
    (..., 3, n) signal; ``duration`` is the physical acquisition window 2T
    used for normalization.
    """
    if signal.samples.shape[-2] != 3:
        raise ValueError("expected 3 field components on the next-to-last axis")
    if duration <= 0:
        raise ValueError("duration must be positive")
    n_pad = _pad_length(signal.n, pad_factor)
    padded = np.zeros(signal.samples.shape[:-1] + (n_pad,))
    padded[..., : signal.n] = signal.samples
    e_hat = analysis_transform(padded, signal.dt)
    e_par = e_hat[..., :2, :]
    psi = (TWO_PI / duration) * np.einsum(
        "...if,...jf->...fij", e_par, np.conj(e_par), optimize=True
    )
    return spectrum_grid(n_pad, signal.dt), psi


def empirical_autocorrelation(
    signal: TimeSignal,
    duration: float,
    mode: str = "freq",
    max_lag: float | None = None,
    pad_factor: float = 2.0,
):
    """Empirical autocorrelation of the cross-range field components.

    ``mode="freq"`` returns the coherency spectrum estimate (see
    :func:`empirical_coherency`).  ``mode="lag"`` returns ``(lags, psi_emp)``
    with ``psi_emp(tau) = (1/2T) integral Epar(t + tau) Epar(t)^T dt``
    evaluated at nonnegative grid lags up to ``max_lag``.
    """
    if mode == "freq":
        return empirical_coherency(signal, duration, pad_factor)
    if mode != "lag":
        raise ValueError(f"unknown mode {mode!r}")
    if signal.samples.shape[-2] != 3:
        raise ValueError("expected 3 field components on the next-to-last axis")
    n_pad = _pad_length(signal.n, pad_factor)
    padded = np.zeros(signal.samples.shape[:-1] + (n_pad,))
    padded[..., : signal.n] = signal.samples
    spec = np.fft.rfft(padded, axis=-1)
    e_par = spec[..., :2, :]
    # correlation theorem: sum_n x_{n+l} y_n = idft(X conj(Y))_l
    cross = np.einsum("...if,...jf->...ijf", e_par, np.conj(e_par), optimize=True)
    corr = np.fft.irfft(cross, n=n_pad, axis=-1) * (signal.dt / duration)
    n_lags = signal.n if max_lag is None else min(signal.n, int(max_lag / signal.dt) + 1)
    lags = signal.dt * np.arange(n_lags)
    return lags, np.moveaxis(corr[..., :n_lags], -1, -3)


# ---------------------------------------------------------------------------
# Single-realization coherency dataset (frequency-domain route)
# ---------------------------------------------------------------------------


def stochastic_coherency_dataset(
    scene: Scene,
    spec: SourceProcessSpec,
    band_count: int,
    band_width: float | None = None,
    realizations: int = 1,
    pad_factor: float = 2.0,
) -> ArrayDataSet:
    """Coherency dataset estimated from random-source acquisitions.

    Equivalent, bin for bin, to simulating the received time signals and
    forming the scaled periodogram, but evaluated only at ``band_count``
    frequency bins spread across the source band (a uniform stride over the
    padded transform grid).  Multiple realizations average the estimate; the
    attached source coherency is the known per-frequency spectrum so the
    dataset feeds straight into preprocessing.
    """
    if band_count < 2:
        raise ValueError("need at least 2 band samples")
    if realizations < 1:
        raise ValueError("need at least one realization")
    width = band_width if band_width is not None else TWO_PI * _BAND_HALF_WIDTHS / (
        2.0 * spec.correlation_time
    )
    n_pad = _pad_length(spec.samples, pad_factor)
    omegas = spectrum_grid(n_pad, spec.dt)
    lo, hi = spec.center - width / 2, spec.center + width / 2
    candidates = np.nonzero((omegas >= lo) & (omegas <= hi))[0]
    if candidates.size < band_count:
        raise ValueError("transform grid too coarse for the requested band sampling")
    stride = candidates.size // band_count
    picked = candidates[: stride * band_count : stride]
    band = FrequencyBand.from_omegas(omegas[picked])

    recs = scene.geom.flat_positions()
    duration = 2.0 * spec.half_duration

    # projected 2x2 transfer at the picked bins only
    transfer = np.empty((recs.shape[0], picked.size, 2, 2), dtype=complex)
    for fi, w in enumerate(omegas[picked]):
        k = scene.wavenumber(w)
        m = projected_incident(scene, k) + projected_response(
            scene, born_response(scene, k)
        )
        transfer[:, fi] = m.reshape(-1, 2, 2)

    seeds = np.random.SeedSequence(spec.seed).spawn(realizations)
    psi = np.zeros((recs.shape[0], picked.size, 2, 2), dtype=complex)
    for seq in seeds:
        rng = np.random.default_rng(seq)
        channels = _synth_channels(spec, 2, rng)
        padded = np.zeros((2, n_pad))
        padded[:, : spec.samples] = channels
        zeta = analysis_transform(padded, spec.dt)[:, picked]
        e_par = np.einsum("rfij,jf->rfi", transfer, zeta, optimize=True)
        psi += (TWO_PI / duration) * np.einsum(
            "rfi,rfj->rfij", e_par, np.conj(e_par), optimize=True
        )
    psi /= realizations

    js_table = spec.spectrum(omegas[picked])[:, None, None] * np.eye(2)
    source = type(scene.source)(
        position=scene.source.position,
        reference_point=scene.source.reference_point,
        coherency=js_table,
    )
    return ArrayDataSet(
        kind="coherency2x2",
        values=psi.reshape(scene.geom.n1, scene.geom.n2, picked.size, 2, 2),
        geom=scene.geom,
        source=source,
        band=band,
        wave_speed=scene.wave_speed,
    )


# ---------------------------------------------------------------------------
# Ergodicity diagnostics
# ---------------------------------------------------------------------------


@dataclass
class ErgodicityProbe:
    """Variance-versus-acquisition-time table with a fitted log-log slope."""

    durations: np.ndarray  # acquisition half-durations T
    variances: np.ndarray  # mean autocorrelation variance at each T
    slope: float

    def table(self) -> list[tuple[float, float]]:
        return list(zip(self.durations.tolist(), self.variances.tolist()))

    def csv(self) -> str:
        lines = ["half_duration_s,variance"]
        for t, v in self.table():
            lines.append(f"{t!r},{v!r}")
        return "\n".join(lines) + "\n"


def ergodicity_probe(
    scene: Scene,
    base_spec: SourceProcessSpec,
    half_durations,
    realizations: int,
    receivers=None,
) -> ErgodicityProbe:
    """Empirical variance of lag-zero autocorrelations across realizations.

    For each acquisition half-duration T (keeping the sampling interval of
    ``base_spec``), draws fresh realizations, propagates them to a few probe
    receivers, and records the variance of every autocorrelation entry.  The
    fitted slope of log variance versus log T is the ergodicity diagnostic.
    Realizations own seeds derived from (seed, duration index, realization
    index), so results are schedule independent.
    """
    half_durations = np.asarray(half_durations, dtype=float)
    if half_durations.size < 3:
        raise ValueError("need at least 3 ladder points")
    if realizations < 30:
        raise ValueError("need at least 30 realizations per ladder point")
    if receivers is None:
        receivers = scene.geom.flat_positions()[:1]
    receivers = np.asarray(receivers, dtype=float).reshape(-1, 3)
    u_s = scene.source.basis()

    variances = np.empty(half_durations.size)
    root = np.random.SeedSequence(base_spec.seed)
    t_seqs = root.spawn(half_durations.size)
    for ti, half in enumerate(half_durations):
        n = int(round(2.0 * half / base_spec.dt))
        spec = SourceProcessSpec(
            correlation_time=base_spec.correlation_time,
            center=base_spec.center,
            half_duration=half,
            samples=n,
            seed=base_spec.seed,
        )
        n_pad = _pad_length(n, 2.0)
        omegas = spectrum_grid(n_pad, spec.dt)
        power = spec.spectrum(omegas)
        active = (omegas > 0) & (power > 1e-12 * power.max())
        transfer = _transfer_matrices(scene, omegas[active], receivers)
        samples = np.empty((realizations, receivers.shape[0], 2, 2))
        for ri, seq in enumerate(t_seqs[ti].spawn(realizations)):
            rng = np.random.default_rng(seq)
            channels = _synth_channels(spec, 2, rng)
            padded = np.zeros((3, n_pad))
            padded[:, :n] = u_s @ channels
            j_hat = analysis_transform(padded, spec.dt)
            e_hat = np.zeros((receivers.shape[0], 3, omegas.size), dtype=complex)
            e_hat[:, :, active] = np.einsum(
                "rfij,jf->rif", transfer, j_hat[:, active], optimize=True
            )
            e_par = synthesis_transform(e_hat, n_pad, spec.dt)[:, :2, :]
            samples[ri] = (spec.dt / (2.0 * half)) * np.einsum(
                "rit,rjt->rij", e_par, e_par
            )
        variances[ti] = samples.var(axis=0, ddof=1).mean()
    slope = float(np.polyfit(np.log(half_durations), np.log(variances), 1)[0])
    return ErgodicityProbe(durations=half_durations, variances=variances, slope=slope)
