"""Loss-spectroscopy pipeline: synthetic spectra, peak finding, line-shape
fits, DC-shift compensation, and assembly of the binding-energy map.

Synthetic spectra use the forward model N_m/N_0 = exp(-(rate - rate_bg) t)
with the loss rate from ``scattering.loss_rate_proxy`` evaluated on the
composite scattering length of all supplied resonances; the background rate
at a_s = a_bk normalizes the far-off-resonance baseline to 1.  Noise is
Gaussian, seedable through numpy's PCG64 ``default_rng`` (documented here for
cross-run reproducibility; identical seeds give bit-identical spectra).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .atomdata import MolecularState, molecular_energy
from .errors import ConfigError, ConvergenceError, DomainError
from .fitting import LinearFit, levenberg_marquardt, weighted_linear_fit
from .scattering import (DressedChannelModel, ResonanceModel,
                         DEFAULT_UNITARITY_WAVENUMBER, K2_COEFF_DEFAULT,
                         K3_COEFF_DEFAULT, dressed_alpha_beta,
                         equivalent_resonance_model, loss_rate_proxy)

__all__ = [
    "AXIS_FREQ", "AXIS_FIELD", "SCHEMA_VERSION",
    "Spectrum", "FanoFit", "LandauZenerFit", "EnergyMapPoint",
    "fano_profile", "synthesize_spectrum", "synthesize_field_scan",
    "find_peaks", "fit_fano", "fit_linear_shift", "fit_landau_zener",
    "assemble_energy_map",
    "write_spectrum_csv", "read_spectrum_csv",
    "spectrum_to_json", "spectrum_from_json",
    "write_spectrum_json", "read_spectrum_json", "write_energy_map_csv",
]

AXIS_FREQ = "modulation_freq_Hz"
AXIS_FIELD = "field_Gauss"
SCHEMA_VERSION = 1

RELATIVE_ATOMS_MAX = 1.2
M_ORDER_RATIO_TOLERANCE = 0.03   # peak-ratio tolerance for m-order assignment


@dataclass
class Spectrum:
    """Sampled relative-atom-number curve N_m/N_0 versus one axis."""

    axis: str
    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.axis not in (AXIS_FREQ, AXIS_FIELD):
            raise DomainError(f"unknown axis {self.axis!r}")
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if not (self.x.size == self.y.size == self.sigma.size):
            raise DomainError("x, y, sigma must have equal length")
        if np.any(self.sigma < 0):
            raise DomainError("sigma must be non-negative")
        if np.any(self.y < 0) or np.any(self.y > RELATIVE_ATOMS_MAX):
            raise DomainError(f"relative atom numbers must lie in [0, {RELATIVE_ATOMS_MAX}]")
        order = np.argsort(self.x, kind="stable")
        self.x = self.x[order]
        self.y = self.y[order]
        self.sigma = self.sigma[order]

    def __len__(self) -> int:
        return self.x.size


# ---------------------------------------------------------------------------
# Forward model
# ---------------------------------------------------------------------------

def _composite_alpha_beta(resonances, omega):
    """Total (alpha, beta) in Bohr radii on an omega grid (rad/s).

    Deviations of each resonance add on the shared background of the first
    model; exact poles give +-inf which the unitarity cap later clips.
    """
    if not resonances:
        raise DomainError("need at least one resonance model")
    a_bk = resonances[0].a_bk
    alpha = np.full_like(omega, a_bk, dtype=float)
    beta = np.zeros_like(omega, dtype=float)
    for model in resonances:
        if isinstance(model, DressedChannelModel):
            if model.gamma_in == 0.0:
                model = equivalent_resonance_model(model)
            else:
                a_i, b_i = dressed_alpha_beta(model, omega, k=0.0)
                alpha = alpha + (a_i - model.a_bk)
                beta = beta + b_i
                continue
        if model.delta_m == 0.0:
            continue
        denom = -model.m * omega - model.omega0
        with np.errstate(divide="ignore"):
            # exact poles give +-inf, clipped later by the unitarity cap
            dev = -model.a_bk * model.delta_m / denom
        alpha = alpha + dev
    return alpha, beta


def _relative_atoms(alpha, beta, a_bk, *, hold_time, density, k3_coeff, k2_coeff,
                    cap_wavenumber):
    rate = loss_rate_proxy(alpha, beta, density, k3_coeff, k2_coeff, cap_wavenumber)
    rate_bg = loss_rate_proxy(a_bk, 0.0, density, k3_coeff, k2_coeff, cap_wavenumber)
    return np.exp(-(rate - rate_bg) * hold_time)


def synthesize_spectrum(resonances, grid_hz, *, hold_time: float = 5e-3,
                        density: float = 1e13,
                        k3_coeff: float = K3_COEFF_DEFAULT,
                        k2_coeff: float = K2_COEFF_DEFAULT,
                        cap_wavenumber: float = DEFAULT_UNITARITY_WAVENUMBER,
                        noise_sigma: float = 0.0, seed=None,
                        metadata: dict | None = None) -> Spectrum:
    """Loss spectrum versus modulation frequency (grid in Hz, monotone).

    resonances: ResonanceModel or DressedChannelModel instances sharing the
    background scattering length of the first entry.
    """
    grid_hz = np.asarray(grid_hz, dtype=float)
    if grid_hz.size < 2 or np.any(np.diff(grid_hz) <= 0):
        raise DomainError("frequency grid must be monotonically increasing")
    if hold_time <= 0:
        raise DomainError("hold time must be positive")
    omega = 2.0 * math.pi * grid_hz
    alpha, beta = _composite_alpha_beta(list(resonances), omega)
    y = _relative_atoms(alpha, beta, resonances[0].a_bk,
                        hold_time=hold_time, density=density, k3_coeff=k3_coeff,
                        k2_coeff=k2_coeff, cap_wavenumber=cap_wavenumber)
    sigma = np.full_like(y, float(noise_sigma))
    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        y = y + rng.normal(0.0, noise_sigma, size=y.size)
    y = np.clip(y, 0.0, RELATIVE_ATOMS_MAX)
    meta = {"hold_time_ms": hold_time * 1e3, "density_cm3": density,
            "noise_sigma": noise_sigma, "seed": seed}
    if metadata:
        meta.update(metadata)
    return Spectrum(AXIS_FREQ, grid_hz, y, sigma, meta)


def synthesize_field_scan(state: MolecularState, registry, f_mod_hz: float,
                          b_grid, widths_hz, *, a_bk: float = 200.0,
                          orders=None, dc_shift_hz: float = 0.0,
                          hold_time: float = 5e-3, density: float = 1e13,
                          k3_coeff: float = K3_COEFF_DEFAULT,
                          k2_coeff: float = K2_COEFF_DEFAULT,
                          cap_wavenumber: float = DEFAULT_UNITARITY_WAVENUMBER,
                          noise_sigma: float = 0.0, seed=None,
                          metadata: dict | None = None) -> Spectrum:
    """Loss versus magnetic field at fixed modulation frequency.

    widths_hz maps |m| -> resonance width Delta_m/2pi in Hz (calibration
    inputs).  dc_shift_hz displaces the free-to-bound gap uniformly (the DC
    light-shift of the level difference).  Resonances land where the shifted
    |E(B)| equals |m| f_mod on either side of the threshold crossing.
    """
    b_grid = np.asarray(b_grid, dtype=float)
    if b_grid.size < 2 or np.any(np.diff(b_grid) <= 0):
        raise DomainError("field grid must be monotonically increasing")
    if orders is None:
        orders = sorted(widths_hz)
    omega_mod = 2.0 * math.pi * f_mod_hz
    y = np.empty_like(b_grid)
    for i, b in enumerate(b_grid):
        e_hz = molecular_energy(state, float(b), registry)
        omega_b = -2.0 * math.pi * (e_hz + dc_shift_hz)
        models = []
        for k in orders:
            m = -k if omega_b > 0 else k
            models.append(ResonanceModel(a_bk=a_bk, delta_m=2.0 * math.pi * widths_hz[k],
                                         omega0=omega_b, m=m))
        alpha, beta = _composite_alpha_beta(models, np.asarray(omega_mod))
        y[i] = _relative_atoms(alpha, beta, a_bk, hold_time=hold_time,
                               density=density, k3_coeff=k3_coeff,
                               k2_coeff=k2_coeff, cap_wavenumber=cap_wavenumber)
    sigma = np.full_like(y, float(noise_sigma))
    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        y = y + rng.normal(0.0, noise_sigma, size=y.size)
    y = np.clip(y, 0.0, RELATIVE_ATOMS_MAX)
    meta = {"modulation_freq_Hz": f_mod_hz, "state": state.label,
            "hold_time_ms": hold_time * 1e3, "density_cm3": density,
            "noise_sigma": noise_sigma, "seed": seed}
    if metadata:
        meta.update(metadata)
    return Spectrum(AXIS_FIELD, b_grid, y, sigma, meta)


# ---------------------------------------------------------------------------
# Peak finding
# ---------------------------------------------------------------------------

def find_peaks(spec: Spectrum, min_depth: float, min_separation: float) -> list:
    """Loss-dip candidates: local minima below 1 - min_depth, at least
    min_separation apart (axis units).  Returned as x positions ordered by
    depth (deepest first; ties broken toward smaller x)."""
    if len(spec) == 0:
        raise DomainError("empty spectrum")
    x, y = spec.x, spec.y
    candidates = []
    for i in range(1, len(x) - 1):
        if y[i] < y[i - 1] and y[i] <= y[i + 1] and y[i] <= 1.0 - min_depth:
            candidates.append((float(y[i]), float(x[i])))
    candidates.sort(key=lambda c: (c[0], c[1]))
    kept = []
    for depth_y, xc in candidates:
        if all(abs(xc - xk) >= min_separation for xk in kept):
            kept.append(xc)
    return kept


# ---------------------------------------------------------------------------
# Fano profile fitting
# ---------------------------------------------------------------------------

def fano_profile(x, center, width, q, amplitude, offset):
    """Transmission-dip Fano profile on a flat baseline.

    offset - amplitude (q w/2 + (x-c))^2 / [(1+q^2) ((w/2)^2 + (x-c)^2)]

    The (1+q^2) normalization makes the dip depth exactly ``amplitude``
    (minimum value offset - amplitude, reached at x = c + w/(2q)); the
    baseline far from resonance is offset - amplitude/(1+q^2).
    """
    dx = np.asarray(x, dtype=float) - center
    u = q * width / 2.0 + dx
    return offset - amplitude * u ** 2 / ((1.0 + q ** 2) * ((width / 2.0) ** 2 + dx ** 2))


@dataclass
class FanoFit:
    center: float
    width: float
    q: float
    amplitude: float
    offset: float
    covariance: np.ndarray
    residual_norm: float = 0.0
    iterations: int = 0

    @property
    def params(self):
        return np.array([self.center, self.width, self.q, self.amplitude, self.offset])

    @property
    def center_stderr(self) -> float:
        return float(math.sqrt(max(self.covariance[0, 0], 0.0)))


def _fano_jacobian(x, p):
    c, w, q, a, off = p
    dx = x - c
    u = q * w / 2.0 + dx
    k = 1.0 + q ** 2
    d = (w / 2.0) ** 2 + dx ** 2
    jac = np.empty((x.size, 5))
    # runaway |q| (symmetric-dip limit) overflows k**2; the resulting zeros/infs
    # only make LM reject the step, so silence the transient warnings
    with np.errstate(over="ignore", invalid="ignore"):
        jac[:, 0] = 2.0 * a * u * (d - u * dx) / (k * d ** 2)          # d/d center
        jac[:, 1] = -a * (u * q * d - u ** 2 * w / 2.0) / (k * d ** 2)  # d/d width
        jac[:, 2] = -a * (u * w * k - 2.0 * q * u ** 2) / (k ** 2 * d)  # d/d q
        jac[:, 3] = -u ** 2 / (k * d)                                   # d/d amplitude
        jac[:, 4] = 1.0                                                 # d/d offset
    return jac


def _fano_initial_guess(x, y, q0):
    i_min = int(np.argmin(y))
    center = float(x[i_min])
    n_edge = max(2, x.size // 6)
    baseline = float(np.median(np.concatenate([y[:n_edge], y[-n_edge:]])))
    amplitude = max(baseline - float(y[i_min]), 1e-6)
    half = baseline - amplitude / 2.0
    below = np.nonzero(y < half)[0]
    if below.size >= 2:
        width = max(float(x[below[-1]] - x[below[0]]), float(x[1] - x[0]))
    else:
        width = float(x[-1] - x[0]) / 6.0
    offset = baseline + amplitude / (1.0 + q0 ** 2)
    return np.array([center, width, q0, amplitude, offset])


def fit_fano(spec: Spectrum, window=None, init: FanoFit | None = None,
             max_iter: int = 200) -> FanoFit:
    """Damped least-squares Fano fit over an axis window (the whole spectrum
    when window is None).  Needs >= 8 points; weighted by per-point sigma when
    all sigmas are positive.  Non-convergence raises ConvergenceError with the
    last iterate attached."""
    if window is not None:
        lo, hi = window
        if not lo < hi:
            raise DomainError("window must satisfy lo < hi")
        mask = (spec.x >= lo) & (spec.x <= hi)
    else:
        mask = np.ones(len(spec), dtype=bool)
    x = spec.x[mask]
    y = spec.y[mask]
    sig = spec.sigma[mask]
    if x.size < 8:
        raise DomainError(f"only {x.size} points in the fit window (need >= 8)")
    weights = 1.0 / sig if np.all(sig > 0) else np.ones_like(x)

    def residual(p):
        return (fano_profile(x, *p) - y) * weights

    def jacobian(p):
        return _fano_jacobian(x, p) * weights[:, None]

    if init is not None:
        starts = [init.params if isinstance(init, FanoFit) else np.asarray(init, float)]
    else:
        starts = [_fano_initial_guess(x, y, q0) for q0 in (2.5, -2.5, 1.0, -1.0)]
    best = None
    last_error = None
    for p0 in starts:
        try:
            result = levenberg_marquardt(residual, p0, jacobian, max_iter=max_iter)
        except ConvergenceError as exc:
            last_error = exc
            continue
        if best is None or result.residual_norm < best.residual_norm:
            best = result
    if best is None:
        raise last_error
    c, w, q, a, off = best.params
    if w < 0:   # width enters squared through w/2: sign is a gauge choice
        w = -w
        q = -q
    if a < 0 and q != 0.0:
        # (q, a, off) -> (-1/q, -a, off - a) is the same curve with a dip
        q, a, off = -1.0 / q, -a, off - a
    return FanoFit(center=float(c), width=float(w), q=float(q), amplitude=float(a),
                   offset=float(off), covariance=best.covariance,
                   residual_norm=best.residual_norm, iterations=best.iterations)


# ---------------------------------------------------------------------------
# Linear DC-shift compensation
# ---------------------------------------------------------------------------

def fit_linear_shift(points, sigma=None) -> LinearFit:
    """Compensate the intensity-linear resonance shift.

    points: sequence of (intensity W/cm^2, peak center Hz); needs at least 3
    points with at least two distinct intensities.  The intercept is the
    zero-intensity (compensated) resonance frequency; optional sigmas give a
    weighted fit.
    """
    pts = list(points)
    if len(pts) < 3:
        raise DomainError("need at least 3 (intensity, center) points")
    intensity = np.array([p[0] for p in pts], dtype=float)
    center = np.array([p[1] for p in pts], dtype=float)
    if np.unique(intensity).size < 2:
        raise DomainError("all intensities equal: shift slope is undetermined")
    return weighted_linear_fit(intensity, center, sigma)


# ---------------------------------------------------------------------------
# Landau-Zener crossing fit
# ---------------------------------------------------------------------------

@dataclass
class LandauZenerFit:
    """Avoided-crossing fit E+- = [Ei + Ej +- sqrt((Ei-Ej)^2 + V^2)]/2 with
    Ei, Ej linear in B around b_center."""

    v_ij: float            # Hz, coupling (gap = v_ij at the crossing)
    e_i0: float            # Hz, line i at b_center
    slope_i: float         # Hz/G
    e_j0: float            # Hz, line j at b_center
    slope_j: float         # Hz/G
    b_center: float        # G
    covariance: np.ndarray
    residual_norm: float
    iterations: int
    condition_warning: str | None = None

    def branch(self, B, sign: int):
        b = np.asarray(B, dtype=float) - self.b_center
        e_i = self.e_i0 + self.slope_i * b
        e_j = self.e_j0 + self.slope_j * b
        root = np.sqrt((e_i - e_j) ** 2 + self.v_ij ** 2)
        return 0.5 * (e_i + e_j + sign * root)


def _lz_model_and_jacobian(params, b, branch_sign):
    e_i0, s_i, e_j0, s_j, v = params
    e_i = e_i0 + s_i * b
    e_j = e_j0 + s_j * b
    diff = e_i - e_j
    root = np.sqrt(diff ** 2 + v ** 2)
    model = 0.5 * (e_i + e_j + branch_sign * root)
    safe = np.where(root > 0, root, 1.0)
    t = branch_sign * diff / safe
    jac = np.empty((b.size, 5))
    jac[:, 0] = 0.5 * (1.0 + t)
    jac[:, 1] = 0.5 * (1.0 + t) * b
    jac[:, 2] = 0.5 * (1.0 - t)
    jac[:, 3] = 0.5 * (1.0 - t) * b
    jac[:, 4] = 0.5 * branch_sign * v / safe
    return model, jac


def _lz_initial_guess(b, e, branch_sign):
    upper = branch_sign > 0
    lower = ~upper
    if upper.any() and lower.any():
        # crossing center: field of minimum branch separation (pair nearest B)
        bu, eu = b[upper], e[upper]
        bl, el = b[lower], e[lower]
        gaps = []
        for bb, ee in zip(bu, eu):
            i = int(np.argmin(np.abs(bl - bb)))
            gaps.append((float(ee - el[i]), float(bb)))
        v0, b_c = min(gaps, key=lambda g: (g[0], g[1]))
        v0 = max(v0, 1e-12)
        # bare lines swap branches at the crossing
        left = b < b_c
        line1_mask_u = upper & ~left
        line1_mask_l = lower & left
        line2_mask_u = upper & left
        line2_mask_l = lower & ~left
        def fit_line(mask_a, mask_b):
            bb = np.concatenate([b[mask_a], b[mask_b]])
            ee = np.concatenate([e[mask_a], e[mask_b]])
            if np.unique(bb).size < 2:
                return np.array([float(np.mean(ee)) if ee.size else 0.0, 0.0])
            return np.polyfit(bb, ee, 1)[::-1]   # (intercept, slope)
        l1 = fit_line(line1_mask_l, line1_mask_u)
        l2 = fit_line(line2_mask_l, line2_mask_u)
        return np.array([l1[0], l1[1], l2[0], l2[1], v0])
    # single branch: straight lines through the outer thirds
    n = b.size
    third = max(2, n // 3)
    l_lo = np.polyfit(b[:third], e[:third], 1)[::-1]
    l_hi = np.polyfit(b[-third:], e[-third:], 1)[::-1]
    return np.array([l_lo[0], l_lo[1], l_hi[0], l_hi[1],
                     max(abs(e[n // 2] - 0.5 * (l_lo[0] + l_hi[0])), 1e-9)])


def fit_landau_zener(branch_data, init=None, max_iter: int = 200) -> LandauZenerFit:
    """Fit an avoided crossing to (B, E, branch) samples; branch is +1 for the
    upper and -1 for the lower branch.  Returns |V_ij| with the two bare lines
    (referenced to the mean field for conditioning).  Data covering a single
    branch that does not span the crossing yields an ill-conditioned warning
    in the result rather than an error."""
    data = list(branch_data)
    if len(data) < 5:
        raise DomainError("need at least 5 samples to constrain 5 parameters")
    b_raw = np.array([d[0] for d in data], dtype=float)
    e = np.array([d[1] for d in data], dtype=float)
    sgn = np.array([1 if d[2] > 0 else -1 for d in data], dtype=float)
    # which group is called '+' is a naming convention; canonicalize so the
    # higher-energy group carries +1 (makes the fit label-swap invariant)
    if (sgn > 0).any() and (sgn < 0).any():
        if e[sgn > 0].mean() < e[sgn < 0].mean():
            sgn = -sgn
    b_center = float(np.mean(b_raw))
    b = b_raw - b_center

    def residual(p):
        model, _ = _lz_model_and_jacobian(p, b, sgn)
        return model - e

    def jacobian(p):
        _, jac = _lz_model_and_jacobian(p, b, sgn)
        return jac

    p0 = np.asarray(init, dtype=float) if init is not None else _lz_initial_guess(b, e, sgn)
    try:
        result = levenberg_marquardt(residual, p0, jacobian, max_iter=max_iter)
    except ConvergenceError as exc:
        # degenerate geometry (single branch away from the crossing) leaves the
        # fit crawling along a flat valley: return the iterate with a warning
        # rather than failing, per the ill-conditioned contract
        p_last = np.asarray(exc.last, dtype=float)
        jac = jacobian(p_last)
        jtj = jac.T @ jac
        if np.linalg.cond(jtj) <= 1e10:
            raise
        r_last = residual(p_last)
        dof = max(r_last.size - p_last.size, 1)
        cov = (float(r_last @ r_last) / dof) * np.linalg.pinv(jtj)
        e_i0, s_i, e_j0, s_j, v = p_last
        return LandauZenerFit(
            v_ij=abs(float(v)), e_i0=float(e_i0), slope_i=float(s_i),
            e_j0=float(e_j0), slope_j=float(s_j), b_center=b_center,
            covariance=cov, residual_norm=float(math.sqrt(r_last @ r_last)),
            iterations=max_iter,
            condition_warning=("ill-conditioned fit (did not converge; condition "
                               f"number {np.linalg.cond(jtj):.2e}); single-branch "
                               "data may not span the crossing"))
    e_i0, s_i, e_j0, s_j, v = result.params
    warning = None
    if result.condition > 1e10:
        warning = ("ill-conditioned fit (condition number "
                   f"{result.condition:.2e}); single-branch data may not span the crossing")
    return LandauZenerFit(v_ij=abs(float(v)), e_i0=float(e_i0), slope_i=float(s_i),
                          e_j0=float(e_j0), slope_j=float(s_j), b_center=b_center,
                          covariance=result.covariance,
                          residual_norm=result.residual_norm,
                          iterations=result.iterations,
                          condition_warning=warning)


# ---------------------------------------------------------------------------
# Energy-map assembly
# ---------------------------------------------------------------------------

@dataclass
class EnergyMapPoint:
    B: float               # G
    omega_res: float       # Hz, signed: negative for bound states (inverted axis)
    order_m: int           # signed drive order
    state_label: str
    bound: bool
    sigma: float           # Hz, 1-sigma uncertainty of the compensated center
    flagged: bool = False
    note: str = ""


def _cluster_centers(fits, window):
    """Group (intensity, center, stderr) triples into clusters by center."""
    fits = sorted(fits, key=lambda f: (f[1], f[0]))
    clusters = []
    for item in fits:
        if clusters and abs(item[1] - clusters[-1][-1][1]) <= window:
            clusters[-1].append(item)
        else:
            clusters.append([item])
    return clusters


def assemble_energy_map(scans, registry, *, min_depth: float = 0.05,
                        min_separation_hz: float = 8e3, m_max: int = 3,
                        ratio_tolerance: float = M_ORDER_RATIO_TOLERANCE,
                        fit_halfwidth_hz: float | None = None,
                        cluster_window_hz: float | None = None) -> list:
    """Peaks -> Fano centers -> linear shift compensation -> state association.

    scans: iterable of (B_gauss, Spectrum, intensity_W_cm2) with frequency-axis
    spectra; several intensities per field enable the DC-shift compensation.
    Peaks are associated with the registry state and drive order whose
    predicted |E(B)|/|m| lies within ratio_tolerance; two states within
    tolerance flag the point instead of guessing.
    """
    if fit_halfwidth_hz is None:
        fit_halfwidth_hz = 2.5 * min_separation_hz
    if cluster_window_hz is None:
        cluster_window_hz = 0.6 * min_separation_hz

    by_field = {}
    for b_field, spec, intensity in scans:
        if spec.axis != AXIS_FREQ:
            raise DomainError("energy-map scans must be frequency-axis spectra")
        by_field.setdefault(round(float(b_field), 6), []).append((float(intensity), spec))

    points = []
    for b_field in sorted(by_field):
        group = by_field[b_field]
        peak_fits = []
        for intensity, spec in sorted(group, key=lambda g: g[0]):
            for xc in find_peaks(spec, min_depth, min_separation_hz):
                window = (xc - fit_halfwidth_hz, xc + fit_halfwidth_hz)
                try:
                    fit = fit_fano(spec, window=window)
                except (DomainError, ConvergenceError):
                    continue
                peak_fits.append((intensity, fit.center, fit.center_stderr))
        if not peak_fits:
            continue
        intensities_present = sorted({pf[0] for pf in peak_fits})
        for cluster in _cluster_centers(peak_fits, cluster_window_hz):
            note = ""
            n_int = len({c[0] for c in cluster})
            if n_int >= 2:
                xs = [c[0] for c in cluster]
                ys = [c[1] for c in cluster]
                errs = [c[2] for c in cluster]
                sig = errs if all(e > 0 for e in errs) else None
                lin = weighted_linear_fit(xs, ys, sig)
                f0 = lin.intercept
                f0_err = lin.intercept_stderr
                if n_int == 2:
                    note = "shift compensation from only two intensities"
            else:
                f0 = cluster[0][1]
                f0_err = cluster[0][2]
                if len(intensities_present) > 1:
                    note = "peak seen at a single intensity; left uncompensated"
                else:
                    note = "single intensity; uncompensated center"
            points.append(_associate_peak(b_field, f0, f0_err, registry, m_max,
                                          ratio_tolerance, note))
    return points


def _associate_peak(b_field, f0, f0_err, registry, m_max, tolerance, note) -> EnergyMapPoint:
    candidates = []
    for state in registry:
        try:
            e_state = molecular_energy(state, b_field, registry)
        except DomainError:
            continue
        fb = abs(e_state)
        if fb == 0.0:
            continue
        for k in range(1, m_max + 1):
            predicted = fb / k
            rel = abs(f0 - predicted) / predicted
            if rel <= tolerance:
                candidates.append((rel, state.label, k, e_state < 0))
    if not candidates:
        return EnergyMapPoint(B=b_field, omega_res=f0, order_m=0, state_label="",
                              bound=False, sigma=f0_err, flagged=True,
                              note=(note + "; " if note else "") + "no registry state within tolerance")
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    rel, label, k, bound = candidates[0]
    flagged = False
    rivals = {c[1] for c in candidates[1:] if c[1] != label}
    if rivals:
        flagged = True
        note = (note + "; " if note else "") + f"ambiguous with {sorted(rivals)}"
    near_tie = len(candidates) > 1 and candidates[1][0] - rel < 1e-12 and candidates[1][1] != label
    if near_tie:
        flagged = True
    return EnergyMapPoint(B=b_field, omega_res=-f0 if bound else f0,
                          order_m=-k if bound else k, state_label=label,
                          bound=bound, sigma=f0_err, flagged=flagged, note=note)


# ---------------------------------------------------------------------------
# Spectrum I/O
# ---------------------------------------------------------------------------

_CSV_HEADER = "axis,value,relative_atoms,sigma"


def write_spectrum_csv(spec: Spectrum, path) -> None:
    """CSV with shortest-round-trip decimal fields (bit-exact reload)."""
    lines = [f"# schema_version={SCHEMA_VERSION}", _CSV_HEADER]
    for xi, yi, si in zip(spec.x, spec.y, spec.sigma):
        lines.append(f"{spec.axis},{float(xi)!r},{float(yi)!r},{float(si)!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_spectrum_csv(path, metadata: dict | None = None) -> Spectrum:
    axis = None
    xs, ys, ss = [], [], []
    with open(path, encoding="utf-8") as fh:
        header_seen = False
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line != _CSV_HEADER:
                    raise ConfigError(f"expected header {_CSV_HEADER!r}, got {line!r}",
                                      path, lineno)
                header_seen = True
                continue
            fields = line.split(",")
            if len(fields) != 4:
                raise ConfigError(f"expected 4 fields, got {len(fields)}", path, lineno)
            if axis is None:
                axis = fields[0]
            elif fields[0] != axis:
                raise ConfigError("inconsistent axis column", path, lineno)
            try:
                xs.append(float(fields[1]))
                ys.append(float(fields[2]))
                ss.append(float(fields[3]))
            except ValueError:
                raise ConfigError("cannot parse numeric fields", path, lineno) from None
    if not header_seen:
        raise ConfigError("missing header row", path)
    if not xs:
        raise ConfigError("no data rows", path)
    try:
        return Spectrum(axis, np.array(xs), np.array(ys), np.array(ss),
                        dict(metadata) if metadata else {})
    except DomainError as exc:
        raise ConfigError(str(exc), path) from None


def spectrum_to_json(spec: Spectrum) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "spectrum",
        "axis": spec.axis,
        "metadata": spec.metadata,
        "points": [[float(x), float(y), float(s)]
                   for x, y, s in zip(spec.x, spec.y, spec.sigma)],
    }


def spectrum_from_json(payload: dict) -> Spectrum:
    try:
        pts = payload["points"]
        axis = payload["axis"]
    except (KeyError, TypeError):
        raise ConfigError("JSON spectrum needs 'axis' and 'points'") from None
    arr = np.asarray(pts, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ConfigError("'points' must be an N x 3 array of [x, y, sigma]")
    return Spectrum(axis, arr[:, 0], arr[:, 1], arr[:, 2],
                    dict(payload.get("metadata", {})))


def write_spectrum_json(spec: Spectrum, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(spectrum_to_json(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_spectrum_json(path) -> Spectrum:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", path) from None
    return spectrum_from_json(payload)


def write_energy_map_csv(points, path) -> None:
    lines = [f"# schema_version={SCHEMA_VERSION}",
             "B_Gauss,omega_res_Hz,order_m,state,bound,sigma_Hz,flagged,note"]
    for p in points:
        note = p.note.replace(",", ";")
        lines.append(f"{p.B!r},{p.omega_res!r},{p.order_m},{p.state_label},"
                     f"{int(p.bound)},{p.sigma!r},{int(p.flagged)},{note}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
