"""Spectral reporting, frequency-ratio curves, and every bound in the suite.

Bounds are *reported* (both sides stored, slack signed) rather than
asserted; the test suite owns the assertions.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NoBoundForKind, NonPositiveEigenvalue, NonUniformMesh
from .linalg import MatrixPair, generalized_eig, gershgorin_max, sym_eig

__all__ = [
    "BoundRecord",
    "BoundSet",
    "SpectralReport",
    "critical_dt",
    "frequencies",
    "frequency_ratio_curve",
    "sandwich_bounds",
    "corollary_bound",
    "condition_report",
    "asymptotic_cond_rate",
    "fit_cond_slope",
    "element_rayleigh_report",
    "spectral_report",
    "report_to_json",
    "write_curve_csv",
]

RIGID_BODY_RTOL = 1e-8


@dataclass(frozen=True)
class BoundRecord:
    """One inequality: lower <= value <= upper (either side may be None)."""

    source: str
    value: float
    lower: float | None = None
    upper: float | None = None

    @property
    def slack_lower(self):
        return None if self.lower is None else self.value - self.lower

    @property
    def slack_upper(self):
        return None if self.upper is None else self.upper - self.value

    def holds(self, rtol=1e-9):
        scale = max(abs(self.value), 1.0)
        if self.lower is not None and self.value < self.lower - rtol * scale:
            return False
        if self.upper is not None and self.value > self.upper + rtol * scale:
            return False
        return True


@dataclass
class BoundSet:
    """Bound records keyed by source name."""

    records: dict = field(default_factory=dict)

    def add(self, record):
        self.records[record.source] = record

    def __getitem__(self, source):
        return self.records[source]

    def all_hold(self, rtol=1e-9):
        return all(rec.holds(rtol) for rec in self.records.values())


def critical_dt(lambda_max):
    """Critical step of the central difference method: 2 / sqrt(lambda_max)."""
    if lambda_max <= 0:
        raise NonPositiveEigenvalue(f"lambda_max = {lambda_max:g}")
    return 2.0 / np.sqrt(lambda_max)


def frequencies(eigenvalues):
    """omega = sqrt(lambda), clamping tiny negative round-off to zero."""
    return np.sqrt(np.maximum(np.asarray(eigenvalues, dtype=float), 0.0))


def flexible_slice(eigenvalues, rtol=RIGID_BODY_RTOL):
    """Index of the first flexible mode (rigid-body values excluded)."""
    vals = np.asarray(eigenvalues, dtype=float)
    cutoff = rtol * vals[-1]
    return int(np.searchsorted(vals, cutoff, side="right"))


def frequency_ratio_curve(original, scaled, rtol=RIGID_BODY_RTOL):
    """Ratios omega_i / omegabar_i over the flexible modes, ascending index."""
    original = np.asarray(original, dtype=float)
    scaled = np.asarray(scaled, dtype=float)
    start = max(flexible_slice(original, rtol), flexible_slice(scaled, rtol))
    return frequencies(original[start:]) / frequencies(scaled[start:])


def sandwich_bounds(k, m, mbar, pair_km=None, pair_kmbar=None):
    """Check lambda_1(Mbar,M) <= lambda_k(K,M)/lambda_k(K,Mbar) <= lambda_n(Mbar,M).

    Full decompositions may be passed in to avoid recomputation. Returns a
    BoundSet with one record for the min and max observed ratio.
    """
    dec_mm = generalized_eig(MatrixPair(mbar, m))
    lo, hi = dec_mm.values[0], dec_mm.values[-1]
    if pair_km is None:
        pair_km = generalized_eig(MatrixPair(k, m))
    if pair_kmbar is None:
        pair_kmbar = generalized_eig(MatrixPair(k, mbar))
    start = max(flexible_slice(pair_km.values), flexible_slice(pair_kmbar.values))
    ratios = pair_km.values[start:] / pair_kmbar.values[start:]
    out = BoundSet()
    out.add(BoundRecord("eig_pert_bounds_mass:min_ratio", float(ratios.min()), lower=float(lo)))
    out.add(BoundRecord("eig_pert_bounds_mass:max_ratio", float(ratios.max()), upper=float(hi)))
    out.add(BoundRecord("pair_extremes", float(hi), lower=float(lo)))
    return out


def corollary_bound(spec, blocks=None):
    """Upper bound on omega_i / omegabar_i for the given strategy.

    CMS: sqrt(alpha); local deflation S1: sqrt(1 + alpha); S2 needs the
    element blocks: max_e omega_{m,e} / omega_{m-r,e}; Olovsson:
    sqrt(1 + 8 beta / 7); Hoffmann: sqrt(1 + 9 beta / 2).
    """
    kind = spec.kind
    if kind == "none":
        return 1.0
    if kind == "cms":
        return float(np.sqrt(spec.alpha))
    if kind == "local_deflation_s1":
        return float(np.sqrt(1.0 + spec.alpha))
    if kind == "local_deflation_s2":
        if blocks is None:
            raise ValueError("S2 bound needs the element blocks")
        worst = 1.0
        for block in blocks:
            dec = generalized_eig(MatrixPair(block.stiffness, np.diag(block.lumped_mass)))
            top = dec.values[-1]
            anchor = dec.values[len(dec.values) - spec.rank - 1]
            worst = max(worst, float(np.sqrt(top / anchor)))
        return worst
    if kind == "olovsson":
        return float(np.sqrt(1.0 + 8.0 * spec.beta / 7.0))
    if kind == "hoffmann":
        return float(np.sqrt(1.0 + 9.0 * spec.beta / 2.0))
    raise NoBoundForKind(f"no corollary bound for kind {kind!r}")


def kappa_ratio_bound(spec):
    """Per-method upper bound on kappa(Mbar) / kappa(M), where available."""
    if spec.kind == "olovsson":
        return 1.0 + 8.0 * spec.beta / 7.0
    if spec.kind == "hoffmann":
        return 1.0 + 9.0 * spec.beta / 2.0
    if spec.kind == "cms":
        return float(spec.alpha)
    if spec.kind == "local_deflation_s1":
        return 1.0 + float(spec.alpha)
    raise NoBoundForKind(f"no condition-ratio bound for kind {spec.kind!r}")


def condition_report(m, mbar, p_max, element_masses, spec=None, element_mbar=None):
    """Condition numbers of M, Mbar and (Mbar, M) with their upper bounds."""
    dec_m = sym_eig(m)
    dec_mbar = sym_eig(mbar)
    kappa_m = float(dec_m.values[-1] / dec_m.values[0])
    kappa_mbar = float(dec_mbar.values[-1] / dec_mbar.values[0])
    dec_pair = generalized_eig(MatrixPair(mbar, m))
    kappa_pair = float(dec_pair.values[-1] / dec_pair.values[0])

    out = BoundSet()
    out.add(BoundRecord("kappa_M", kappa_m))
    out.add(BoundRecord("kappa_Mbar", kappa_mbar))
    out.add(BoundRecord("kappa_pair", kappa_pair))
    # Corollary: kappa(Mbar)/kappa(M) <= kappa(Mbar, M)
    out.add(BoundRecord("conditioning_bound", kappa_mbar / kappa_m, upper=kappa_pair))
    masses = np.asarray(element_masses, dtype=float)
    if element_mbar is not None:
        lams = [np.linalg.eigvalsh(me) for me in element_mbar]
        fried = p_max * max(l[-1] for l in lams) / min(l[0] for l in lams)
        out.add(BoundRecord("fried_upper_cond", kappa_mbar, upper=float(fried)))
    out.add(
        BoundRecord(
            "mass_ratio_upper_cond",
            kappa_m,
            upper=float(p_max * masses.max() / masses.min()),
        )
    )
    if spec is not None:
        try:
            ratio_bound = kappa_ratio_bound(spec)
        except NoBoundForKind:
            ratio_bound = None
        if ratio_bound is not None:
            out.add(BoundRecord("kappa_ratio", kappa_mbar / kappa_m, upper=ratio_bound))
    return out


def asymptotic_cond_rate(mesh, dofs_per_element=24):
    """Refined large-beta rate 8 n / (7 m N) for the Olovsson condition growth."""
    if not mesh.is_uniform():
        raise NonUniformMesh("rate is only claimed for uniform structured meshes")
    n = mesh.dof_count
    return 8.0 * n / (7.0 * dofs_per_element * mesh.element_count)


def fit_cond_slope(betas, kappa_ratios, samples=5):
    """Least-squares slope of kappa(Mbar)/kappa(M) vs beta, largest samples."""
    betas = np.asarray(betas, dtype=float)
    ratios = np.asarray(kappa_ratios, dtype=float)
    order = np.argsort(betas)[-samples:]
    a = np.vstack([betas[order], np.ones(order.size)]).T
    slope, _ = np.linalg.lstsq(a, ratios[order], rcond=None)[0]
    return float(slope)


@dataclass
class ElementRayleighRow:
    """Rayleigh factor and scaled eigenvalue for one flexible element mode."""

    mode: int  # index k into the original element spectrum (0-based)
    original: float  # lambda_k(K_e, M_e)
    rayleigh: float  # Q_e(u_k) = u^T Mbar_e u / u^T M_e u
    scaled: float  # lambda_k / Q_e(u_k)


def element_rayleigh_report(block, mbar_e, rigid_rtol=RIGID_BODY_RTOL):
    """Rayleigh table Q_e(u_k) for the flexible modes of one element.

    Also reports whether the scaling permutes the eigenvalue ordering
    (``ordering_preserved``) by comparing the sorted scaled spectrum with
    the per-mode transformed values.
    """
    me = np.diag(block.lumped_mass)
    dec = generalized_eig(MatrixPair(block.stiffness, me))
    start = flexible_slice(dec.values, rigid_rtol)
    rows = []
    for k in range(start, len(dec.values)):
        u = dec.vectors[:, k]
        q = float(u @ mbar_e @ u) / float(u @ me @ u)
        rows.append(ElementRayleighRow(k, float(dec.values[k]), q, float(dec.values[k] / q)))
    transformed = np.array([row.scaled for row in rows])
    ordering_preserved = bool(np.all(np.diff(transformed) >= -1e-9 * transformed.max()))
    return rows, ordering_preserved


@dataclass
class SpectralReport:
    """Original and scaled spectra with derived step/condition quantities."""

    kind: str
    original_values: np.ndarray
    scaled_values: np.ndarray
    ratio_curve: np.ndarray
    dt_original: float
    dt_scaled: float
    corollary: float | None
    kappa_m: float | None = None
    kappa_mbar: float | None = None
    kappa_pair: float | None = None
    gershgorin_scaled: float | None = None


def spectral_report(pair, scaled, blocks=None, condition=False):
    """Build a SpectralReport for one scaled system against the original pair."""
    if not isinstance(pair, MatrixPair):
        pair = MatrixPair(*pair)
    dec = generalized_eig(pair)
    mbar = scaled.mbar_dense()
    dec_s = generalized_eig(MatrixPair(scaled.kbar, mbar))
    ratios = frequency_ratio_curve(dec.values, dec_s.values)
    try:
        bound = corollary_bound(scaled.spec, blocks)
    except (NoBoundForKind, ValueError):
        bound = None
    report = SpectralReport(
        kind=scaled.spec.kind,
        original_values=dec.values,
        scaled_values=dec_s.values,
        ratio_curve=ratios,
        dt_original=critical_dt(dec.values[-1]),
        dt_scaled=critical_dt(dec_s.values[-1]),
        corollary=bound,
    )
    if condition:
        dec_m = sym_eig(pair.b)
        dec_mb = sym_eig(mbar)
        dec_p = generalized_eig(MatrixPair(mbar, pair.b))
        report.kappa_m = float(dec_m.values[-1] / dec_m.values[0])
        report.kappa_mbar = float(dec_mb.values[-1] / dec_mb.values[0])
        report.kappa_pair = float(dec_p.values[-1] / dec_p.values[0])
        s = 1.0 / np.sqrt(np.diag(pair.b)) if _diagonalish(pair.b) else None
        if s is not None:
            report.gershgorin_scaled = gershgorin_max(
                scaled.kbar * s[:, None] * s[None, :]
            )
    return report


def _diagonalish(a):
    off = a - np.diag(np.diag(a))
    return np.abs(off).max() <= 1e-14 * (np.abs(a).max() or 1.0)


def report_to_json(report, path=None):
    """Serialize a SpectralReport to JSON (arrays become lists)."""
    payload = {
        "kind": report.kind,
        "original_values": report.original_values.tolist(),
        "scaled_values": report.scaled_values.tolist(),
        "ratio_curve": report.ratio_curve.tolist(),
        "dt_original": report.dt_original,
        "dt_scaled": report.dt_scaled,
        "corollary_bound": report.corollary,
        "kappa_m": report.kappa_m,
        "kappa_mbar": report.kappa_mbar,
        "kappa_pair": report.kappa_pair,
        "gershgorin_scaled": report.gershgorin_scaled,
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def write_curve_csv(path, columns):
    """Write named columns (dict of name -> sequence) as CSV, 17 sig digits."""
    names = list(columns)
    rows = zip(*(columns[n] for n in names))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in rows:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
