"""Kirchhoff migration, point-spread approximants, tensor recovery, geometry checks.

The imaging function backpropagates a 3x3 data field with conjugated Green
functions, summed over the receiver array with Riemann cell weights and, for
band data, integrated over frequency with the trapezoid rule.  Recovery
unwinds the two point-spread factors at the image point to estimate the
projected polarizability tensor in the fixed (cross-range, source) bases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._parallel import run_chunks, thread_count
from .dataset import ArrayDataSet, ImageField
from .emcore import CROSS_RANGE_BASIS, dyadic_green, projector
from .errors import DegenerateGeometryError, NumericalError
from .preprocess import _cond_2x2, _inv_2x2
from .scene import ArrayGeom, ImagingWindow, SourceSpec

# Imaging points per chunk are sized so receiver-point pair blocks stay small.
_PAIR_TARGET = 600_000

# 2x2 point-spread factors above this condition number refuse to invert.
RECOVER_COND_LIMIT = 1e8

# Default phase-correction floor, relative to the field maximum of |a11|.
DEFAULT_DELTA_REL = 1e-6


# ---------------------------------------------------------------------------
# Green-function assembly with cached pair geometry
# ---------------------------------------------------------------------------


class _PairGeometry:
    """Distances and orientations between two point sets, reused across k.

    The dyadic Green function splits as ``G = A I + B rhat rhat^T`` with
    scalar pair factors ``A = g (1 + m)`` and ``B = -g (1 + 3 m)``; the
    backpropagation kernels below contract against that rank-one structure
    instead of materializing (pairs, 3, 3) tensors.
    """

    def __init__(self, sources: np.ndarray, targets: np.ndarray):
        diff = sources[:, None, :] - targets[None, :, :]
        self.r = np.linalg.norm(diff, axis=-1)
        if np.any(self.r <= 0):
            raise DegenerateGeometryError("imaging point coincides with a receiver or source")
        self.rhat = diff / self.r[..., None]

    def scalar_factors(self, k: float, phase=None):
        """(A, B) pair factors; ``phase`` may supply precomputed exp(i k r)."""
        if phase is None:
            phase = np.exp(1j * (k * self.r))
        g = phase / (4.0 * np.pi * self.r)
        m = (1j * (k * self.r) - 1.0) / (k * self.r) ** 2
        return g * (1.0 + m), -g * (1.0 + 3.0 * m)

    def greens(self, k: float) -> np.ndarray:
        a, b = self.scalar_factors(k)
        outer = self.rhat[..., :, None] * self.rhat[..., None, :]
        return a[..., None, None] * np.eye(3) + b[..., None, None] * outer


def _backpropagate(pair: _PairGeometry, a, b, data: np.ndarray) -> np.ndarray:
    """Receiver contraction sum_r conj(G(x_r, y)) D(x_r) without 3x3 blocks.

    With G = A I + B rhat rhat^T the sum splits into a dense GEMM over the
    plain term and a rank-one contraction over the orientation term.
    """
    plain = np.einsum("rc,rik->cik", np.conj(a), data, optimize=True)
    w = np.einsum("rcj,rjk->rck", pair.rhat, data, optimize=True)
    spun = np.einsum("rci,rck->cik", np.conj(b)[..., None] * pair.rhat, w, optimize=True)
    return plain + spun


def _spread_diag(pair: _PairGeometry, a, b) -> np.ndarray:
    """Same-point spread sum_r conj(G(x_r, y)) G(x_r, y) per imaging point.

    Since rhat rhat^T is idempotent this is ``sum |A|^2 I + sum c rhat rhat^T``
    with the real weight ``c = 2 Re(conj(A) B) + |B|^2``.
    """
    iso = np.einsum("rc->c", np.abs(a) ** 2)
    c = 2.0 * np.real(np.conj(a) * b) + np.abs(b) ** 2
    spun = np.einsum("rc,rci,rcj->cij", c, pair.rhat, pair.rhat, optimize=True)
    return iso[:, None, None] * np.eye(3) + spun


def _as_points(points) -> tuple[np.ndarray, bool]:
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        return p[None, :], True
    return p, False


# ---------------------------------------------------------------------------
# Imaging function
# ---------------------------------------------------------------------------


def kirchhoff_single(data, geom: ArrayGeom, x_s, k: float, points) -> np.ndarray:
    """Single-frequency Kirchhoff image of a 3x3 data field at imaging points.

    ``data`` is (n1, n2, 3, 3) over the array; returns (npts, 3, 3) (or a
    single 3x3 for a single point): the receiver sum of
    ``w conj(G(x_r, y)) D(x_r) conj(G(x_s, y))`` with cell weights w.
    """
    pts, squeeze = _as_points(points)
    data = np.asarray(data, dtype=complex)
    if data.shape != (geom.n1, geom.n2, 3, 3):
        raise ValueError(f"data shape {data.shape} does not match the array geometry")
    recs = geom.flat_positions()
    d_flat = data.reshape(-1, 3, 3)
    x_s = np.asarray(x_s, dtype=float)
    out = np.empty((pts.shape[0], 3, 3), dtype=complex)

    if _kernels.HAVE_NUMBA:
        _check_point_separation(recs, x_s, pts)
        _kernels.set_threads(thread_count())
        image, _, _ = _kernels.band_migrate(
            recs,
            pts,
            x_s,
            np.ascontiguousarray(d_flat[:, None]),
            np.array([k]),
            np.array([1.0]),
            geom.cell_area,
            CROSS_RANGE_BASIS,
            0,
        )
        return image[0] if squeeze else image

    def work(lo, hi):
        rec_geo = _PairGeometry(recs, pts[lo:hi])
        src_geo = _PairGeometry(x_s[None, :], pts[lo:hi])
        a, b = rec_geo.scalar_factors(k)
        g_src = src_geo.greens(k)[0]
        acc = _backpropagate(rec_geo, a, b, d_flat)
        out[lo:hi] = geom.cell_area * acc @ np.conj(g_src)

    run_chunks(pts.shape[0], max(1, _PAIR_TARGET // recs.shape[0]), work)
    return out[0] if squeeze else out


def _check_point_separation(recs, x_s, pts) -> None:
    for anchor in (recs, x_s[None, :]):
        diff = anchor[:, None, :] - pts[None, :, :]
        if np.any(np.linalg.norm(diff, axis=-1) <= 0):
            raise DegenerateGeometryError(
                "imaging point coincides with a receiver or source"
            )


def _trapezoid_weights(omegas: np.ndarray) -> np.ndarray:
    if omegas.size < 2:
        raise ValueError("band integration needs at least 2 frequency samples")
    d = omegas[1] - omegas[0]
    w = np.full(omegas.size, d)
    w[0] = w[-1] = d / 2
    return w


def kirchhoff_band(ds: ArrayDataSet, points) -> np.ndarray:
    """Multi-frequency Kirchhoff image: trapezoid integral over the band."""
    result = _band_pipeline(ds, points, want_alpha=False)
    return result["image"]


def _band_pipeline(
    ds: ArrayDataSet,
    points,
    want_alpha: bool,
    mode: str = "exact",
) -> dict:
    """Shared band loop: image integral and optional per-point tensor recovery.

    Reuses the receiver-point pair geometry across frequencies and advances
    the propagation phase factors incrementally on the uniform grid.
    """
    pts, squeeze = _as_points(points)
    recs = ds.geom.flat_positions()
    x_s = ds.source.position
    u_s = ds.source.basis()
    ref_range = float(ds.source.reference_point[2])
    omegas = ds.omegas
    ks = ds.wavenumbers
    weights = _trapezoid_weights(omegas)
    bandwidth = omegas[-1] - omegas[0]
    d_flat = ds.values.reshape(-1, omegas.size, 3, 3)
    cell = ds.geom.cell_area

    if _kernels.HAVE_NUMBA:
        _check_point_separation(recs, x_s, pts)
        _kernels.set_threads(thread_count())
        mode_code = 0 if not want_alpha else (1 if mode == "exact" else 2)
        image, alpha, worst_cond = _kernels.band_migrate(
            recs,
            pts,
            x_s,
            np.ascontiguousarray(d_flat),
            ks,
            weights,
            cell,
            u_s,
            mode_code,
        )
        out = {"image": image[0] if squeeze else image}
        if want_alpha:
            if mode == "exact" and np.max(worst_cond) > RECOVER_COND_LIMIT:
                raise NumericalError(
                    "a 2x2 point-spread factor is numerically singular "
                    f"(condition number {np.max(worst_cond):.3e})"
                )
            if mode != "exact":
                alpha = (4.0 * np.pi * ref_range) ** 4 / ds.geom.area * alpha
            alpha = alpha / bandwidth
            out["alpha"] = alpha[0] if squeeze else alpha
        return out

    image = np.zeros((pts.shape[0], 3, 3), dtype=complex)
    alpha = np.zeros((pts.shape[0], 2, 2), dtype=complex) if want_alpha else None

    def work(lo, hi):
        rec_geo = _PairGeometry(recs, pts[lo:hi])
        src_geo = _PairGeometry(x_s[None, :], pts[lo:hi])
        # incremental phasors over the uniform wavenumber grid
        dk = ks[1] - ks[0]
        rec_step = np.exp(1j * dk * rec_geo.r)
        src_step = np.exp(1j * dk * src_geo.r)
        rec_phase = np.exp(1j * ks[0] * rec_geo.r)
        src_phase = np.exp(1j * ks[0] * src_geo.r)
        for fi, k in enumerate(ks):
            a, b = rec_geo.scalar_factors(k, phase=rec_phase)
            a_s, b_s = src_geo.scalar_factors(k, phase=src_phase)
            g_src = a_s[0][:, None, None] * np.eye(3) + b_s[0][
                :, None, None
            ] * (src_geo.rhat[0, :, :, None] * src_geo.rhat[0, :, None, :])
            acc = _backpropagate(rec_geo, a, b, d_flat[:, fi])
            ikm = cell * acc @ np.conj(g_src)
            image[lo:hi] += weights[fi] * ikm
            if want_alpha:
                ikm_t = np.einsum(
                    "ip,cij,jq->cpq", CROSS_RANGE_BASIS, ikm, u_s, optimize=True
                )
                if mode == "exact":
                    h_r_diag = cell * _spread_diag(rec_geo, a, b)
                    h_s_diag = np.conj(g_src) @ g_src
                    a2 = np.einsum(
                        "ip,cij,jq->cpq",
                        CROSS_RANGE_BASIS,
                        h_r_diag,
                        CROSS_RANGE_BASIS,
                        optimize=True,
                    )
                    b2 = np.einsum("ip,cij,jq->cpq", u_s, h_s_diag, u_s, optimize=True)
                    _guard_cond(a2, "receiver point-spread factor")
                    _guard_cond(b2, "source point-spread factor")
                    af = _inv_2x2(a2) @ ikm_t @ _inv_2x2(b2)
                else:
                    af = (4.0 * np.pi * ref_range) ** 4 / ds.geom.area * ikm_t
                alpha[lo:hi] += weights[fi] * af
            rec_phase = rec_phase * rec_step
            src_phase = src_phase * src_step

    run_chunks(pts.shape[0], max(1, _PAIR_TARGET // recs.shape[0]), work)
    out = {"image": image[0] if squeeze else image}
    if want_alpha:
        alpha /= bandwidth
        out["alpha"] = alpha[0] if squeeze else alpha
    return out


# ---------------------------------------------------------------------------
# Point-spread matrices and their closed-form approximants
# ---------------------------------------------------------------------------


def h_s(y, y_prime, k: float, x_s) -> np.ndarray:
    """Source point-spread matrix conj(G(x_s, y)) G(x_s, y')."""
    return np.conj(dyadic_green(x_s, y, k)) @ dyadic_green(x_s, y_prime, k)


def h_r(y, y_prime, k: float, geom: ArrayGeom) -> np.ndarray:
    """Receiver point-spread matrix: array sum of w conj(G(x_r, y)) G(x_r, y')."""
    recs = geom.flat_positions()
    g_y = dyadic_green(recs, np.asarray(y, dtype=float), k)
    g_yp = dyadic_green(recs, np.asarray(y_prime, dtype=float), k)
    return geom.cell_area * np.einsum("rij,rjk->ik", np.conj(g_y), g_yp)


def h_s_fraunhofer(y, y_prime, k: float, x_s, y0) -> np.ndarray:
    """Far-field approximant of (4 pi L)^2 h_s: a unit-modulus phase times P_s.

    ``exp(i k (|x_s - y'| - |x_s - y|)) P(x_s, y0)``.
    """
    x_s = np.asarray(x_s, dtype=float)
    d = np.linalg.norm(x_s - np.asarray(y_prime, float)) - np.linalg.norm(
        x_s - np.asarray(y, float)
    )
    return np.exp(1j * k * d) * projector(x_s, y0)


def h_r_fraunhofer(y, y_prime, k: float, geom: ArrayGeom, y0) -> np.ndarray:
    """Closed-form approximant of h_r for a square array.

    ``a^2 exp(i k (eta' - eta)) / (4 pi L)^2 sinc(k a d1 / 2L) sinc(k a d2 / 2L) P_par``
    with d the cross-range offset y' - y and eta the range offsets from the
    reference plane x3 = L.
    """
    y = np.asarray(y, dtype=float)
    yp = np.asarray(y_prime, dtype=float)
    ref_range = float(np.asarray(y0, float)[2])
    eta, eta_p = y[2] - ref_range, yp[2] - ref_range
    delta = yp[:2] - y[:2]
    arg = k * geom.side * delta / (2.0 * ref_range)
    # numpy sinc is sin(pi x)/(pi x); the plain sin(x)/x form is wanted here
    envelope = np.sinc(arg[0] / np.pi) * np.sinc(arg[1] / np.pi)
    scale = geom.side**2 * np.exp(1j * k * (eta_p - eta)) / (4.0 * np.pi * ref_range) ** 2
    p_par = np.diag([1.0, 1.0, 0.0])
    return scale * envelope * p_par


def cross_range_null_offset(k: float, geom: ArrayGeom, ref_range: float) -> float:
    """First zero of the square-array cross-range envelope: 2 pi L / (k a)."""
    return 2.0 * np.pi * ref_range / (k * geom.side)


# ---------------------------------------------------------------------------
# Tensor recovery
# ---------------------------------------------------------------------------


def _guard_cond(m2: np.ndarray, label: str) -> None:
    cond = _cond_2x2(m2)
    worst = float(np.max(cond))
    if not np.isfinite(worst) or worst > RECOVER_COND_LIMIT:
        raise NumericalError(
            f"{label} is numerically singular (condition number {worst:.3e})"
        )


def recover_alpha_single(
    ikm, y, k: float, geom: ArrayGeom, source: SourceSpec, mode: str = "exact"
) -> np.ndarray:
    """Projected 2x2 polarizability estimate from a single-frequency image value.

    ``mode="exact"`` inverts the computed 2x2 point-spread factors at y;
    ``mode="fraunhofer"`` rescales by (4 pi L)^4 / mes(A).  Raises with a
    condition report when an exact-mode factor is singular.
    """
    ikm = np.asarray(ikm, dtype=complex)
    u_s = source.basis()
    ikm_t = CROSS_RANGE_BASIS.T @ ikm @ u_s
    if mode == "fraunhofer":
        ref_range = float(source.reference_point[2])
        return (4.0 * np.pi * ref_range) ** 4 / geom.area * ikm_t
    if mode != "exact":
        raise ValueError(f"unknown recovery mode {mode!r}")
    a2 = CROSS_RANGE_BASIS.T @ h_r(y, y, k, geom) @ CROSS_RANGE_BASIS
    b2 = u_s.T @ h_s(y, y, k, source.position) @ u_s
    _guard_cond(a2[None], "receiver point-spread factor")
    _guard_cond(b2[None], "source point-spread factor")
    return _inv_2x2(a2) @ ikm_t @ _inv_2x2(b2)


def recover_alpha_band(alphas, omegas) -> np.ndarray:
    """Bandwidth-normalized trapezoid average of per-frequency estimates."""
    alphas = np.asarray(alphas, dtype=complex)
    omegas = np.asarray(omegas, dtype=float)
    w = _trapezoid_weights(omegas)
    return np.tensordot(w, alphas, axes=(0, 0)) / (omegas[-1] - omegas[0])


def recover_alpha_field(ds: ArrayDataSet, points, mode: str = "exact") -> np.ndarray:
    """Band-averaged projected tensor field at the given imaging points.

    Runs the per-frequency image and recovery in one pass over the band and
    averages with the trapezoid rule.
    """
    if ds.band.count < 2:
        raise ValueError("band recovery needs at least 2 frequency samples")
    result = _band_pipeline(ds, points, want_alpha=True, mode=mode)
    return result["alpha"]


def phase_correct(values, delta_rel: float = DEFAULT_DELTA_REL) -> np.ndarray:
    """Suppress oscillatory artifacts by pinning the phase of the (1,1) entry.

    Multiplies each 2x2 matrix by ``conj(a11) / (|a11| + delta)`` with
    ``delta = delta_rel * max_field |a11|``, so corrected (1,1) entries are
    real nonnegative and the common oscillation cancels across entries.
    """
    if delta_rel < 0:
        raise ValueError("delta_rel must be nonnegative")
    vals = np.asarray(values, dtype=complex)
    a11 = vals[..., 0, 0]
    delta = delta_rel * (np.abs(a11).max() if a11.size else 0.0)
    denom = np.abs(a11) + delta
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(denom > 0, np.conj(a11) / np.where(denom > 0, denom, 1.0), 0.0)
    return vals * factor[..., None, None]


# ---------------------------------------------------------------------------
# Source placement check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionCheck:
    """Outcome of the cone-union source placement test."""

    admissible: bool
    margin: float  # min over receivers of ratio - 1; negative when violated
    slope: float  # cone half-slope c
    gamma: int

    def summary(self) -> str:
        verdict = "admissible" if self.admissible else "violated"
        return (
            f"source placement vs exclusion region (gamma={self.gamma}): {verdict}, "
            f"cone slope c={self.slope:.6f}, worst-case margin {self.margin:+.4f}"
        )


def region_slope(geom: ArrayGeom, window: ImagingWindow) -> float:
    """Cone half-slope c = (a+b) / sqrt((2L-h)^2 + (a+b)^2)."""
    a, b, h = geom.side, window.cross_range, window.range_extent
    ref_range = float(window.center[2])
    if 2.0 * ref_range - h <= 0:
        raise DegenerateGeometryError("imaging window reaches the array plane")
    c = (a + b) / np.hypot(2.0 * ref_range - h, a + b)
    return float(c)


def region_check(geom: ArrayGeom, window: ImagingWindow, x_s, gamma: int) -> RegionCheck:
    """Test whether the source sits outside every receiver cone.

    The union over the continuous array is approximated by the discrete
    receiver set plus the four corners (cones vary monotonically across a
    rectangular array).  Violated iff some receiver satisfies
    ``|x_r_par - x_s_par| <= gamma c |x_r - x_s|``.
    """
    if gamma not in (1, 3):
        raise ValueError("gamma must be 1 (single scattering) or 3 (finite multiples)")
    c = region_slope(geom, window)
    x_s = np.asarray(x_s, dtype=float)
    probes = np.concatenate([geom.flat_positions(), geom.corners()])
    d_par = np.linalg.norm(probes[:, :2] - x_s[:2], axis=1)
    d_full = np.linalg.norm(probes - x_s, axis=1)
    ratio = d_par / (gamma * c * d_full)
    margin = float(ratio.min() - 1.0)
    return RegionCheck(admissible=margin > 0, margin=margin, slope=c, gamma=gamma)


# ---------------------------------------------------------------------------
# Imaging grids
# ---------------------------------------------------------------------------


def plane_grid(window: ImagingWindow, normal_axis: int, offset: float, step: float):
    """Regular grid on a plane slice of the imaging window.

    ``normal_axis`` picks the fixed coordinate (2 for a cross-range slice at
    fixed x3, 1 or 0 for range slices); ``offset`` is its value.  Returns
    (points (npts, 3), shape, axes) with points in C order over the two free
    axes.
    """
    if normal_axis not in (0, 1, 2):
        raise ValueError("normal_axis must be 0, 1 or 2")
    if step <= 0:
        raise ValueError("grid step must be positive")
    bounds = window.bounds
    free = [ax for ax in range(3) if ax != normal_axis]
    axes = []
    for ax in free:
        lo, hi = bounds[ax]
        n = int(round((hi - lo) / step)) + 1
        axes.append(lo + step * np.arange(n))
    g0, g1 = np.meshgrid(axes[0], axes[1], indexing="ij")
    pts = np.empty(g0.shape + (3,))
    pts[..., free[0]] = g0
    pts[..., free[1]] = g1
    pts[..., normal_axis] = offset
    return pts.reshape(-1, 3), g0.shape, axes


# Full-volume grids above this size are refused; 2-d slices are the intended
# desk-scale workflow and a dense volume is easy to request by accident.
VOLUME_POINT_GUARD = 2_000_000


def volume_grid(window: ImagingWindow, step: float, max_points: int = VOLUME_POINT_GUARD):
    """Dense 3-d grid over the whole imaging window, behind a size guard."""
    if step <= 0:
        raise ValueError("grid step must be positive")
    bounds = window.bounds
    axes = []
    for ax in range(3):
        lo, hi = bounds[ax]
        n = int(round((hi - lo) / step)) + 1
        axes.append(lo + step * np.arange(n))
    total = axes[0].size * axes[1].size * axes[2].size
    if total > max_points:
        raise ValueError(
            f"volume grid of {total} points exceeds the guard ({max_points}); "
            "use plane slices or pass a larger max_points explicitly"
        )
    g0, g1, g2 = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g0, g1, g2], axis=-1)
    return pts.reshape(-1, 3), g0.shape, axes


def line_profile(center, axis: int, half_width: float, step: float) -> np.ndarray:
    """Points along a coordinate-axis segment through ``center``."""
    center = np.asarray(center, dtype=float)
    offsets = np.arange(-half_width, half_width + step / 2, step)
    pts = np.tile(center, (offsets.size, 1))
    pts[:, axis] += offsets
    return pts


def image_field(points, values, shape, **meta) -> ImageField:
    return ImageField(points=np.asarray(points), values=np.asarray(values),
                      shape=tuple(shape), meta=dict(meta))
