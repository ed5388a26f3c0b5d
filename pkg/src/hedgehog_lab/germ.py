"""Indifferent germs ``f(z) = e^{2 pi i alpha} z + sum_{k>=2} c_k z^k`` and a
grid stand-in for the local hedgehog of ``D_{r_0}``.

The hedgehog approximation keeps the grid points whose forward and backward
orbits stay in the closed disk for ``N`` iterates and takes the grid component
of 0.  Everything downstream is phrased on that approximation, with ``N`` and
the resolution reported alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .arithmetic import RotationNumber, binary64_horizon, parse_alpha
from .errors import DomainError, InconsistencyError, InverseError

NEWTON_TOL = 1e-13
NEWTON_MAXIT = 50
ESCAPE_SLACK = 1e-12


@numba.njit(cache=True)
def _f(z, lam, c):
    acc = 0j
    for k in range(c.size - 1, -1, -1):
        acc = acc * z + c[k]
    return z * (lam + z * acc)


@numba.njit(cache=True)
def _df(z, lam, c):
    acc = 0j
    for k in range(c.size - 1, -1, -1):
        acc = acc * z + (k + 2) * c[k]
    return lam + z * acc


@numba.njit(cache=True)
def _finv(z, lam, c):
    """Newton solution of ``f(w) = z`` seeded at ``z / lam``; ``ok`` flags success."""
    w = z / lam
    if c.size == 0:
        return w, True
    scale = max(abs(z), 1e-300)
    for _ in range(NEWTON_MAXIT):
        r = _f(w, lam, c) - z
        if abs(r) <= NEWTON_TOL * scale:
            return w, True
        w = w - r / _df(w, lam, c)
    return w, abs(_f(w, lam, c) - z) <= NEWTON_TOL * scale


@numba.njit(cache=True)
def _abs2(z):
    return z.real * z.real + z.imag * z.imag


@numba.njit(cache=True)
def _step(z, lam, c, direction):
    if direction > 0:
        return _f(z, lam, c), True
    return _finv(z, lam, c)


@numba.njit(cache=True)
def _orbit_ends(z0, N, lam, c, radius, direction):
    """Iterate each point up to ``N`` times; stop at the first ``|z| > radius``.

    Returns the last point, the escape index (-1 if none) and a Newton flag.
    """
    n = z0.size
    out = np.empty(n, dtype=np.complex128)
    esc = np.full(n, -1, dtype=np.int64)
    ok = np.ones(n, dtype=np.bool_)
    r2 = radius * radius
    for i in range(n):
        z = z0[i]
        for j in range(1, N + 1):
            z, good = _step(z, lam, c, direction)
            if not good:
                ok[i] = False
                break
            if _abs2(z) > r2:
                esc[i] = j
                break
        out[i] = z
    return out, esc, ok


@numba.njit(cache=True)
def _orbit_cloud(z0, N, lam, c, radius, direction):
    """Full orbit ``z_1 .. z_N`` of one point (truncated at escape)."""
    pts = np.empty(N, dtype=np.complex128)
    z = z0
    m = 0
    r2 = radius * radius
    for j in range(N):
        z, good = _step(z, lam, c, direction)
        if not good or _abs2(z) > r2:
            break
        pts[m] = z
        m += 1
    return pts[:m]


@numba.njit(cache=True)
def _probe(z0, N, lam, c, inner, outer, radius, direction):
    """Enter/exit bookkeeping for the convergence probe (one seed).

    Returns (entered_at, exited_at, escaped_at, min_modulus, min_step, ok).
    After the first entry into ``|z| < inner`` the orbit gets ``N`` further
    steps to reach ``|z| >= outer``.
    """
    # squared moduli throughout
    z = z0
    entered = -1
    exited = -1
    escaped = -1
    inner, outer, radius = inner * inner, outer * outer, radius * radius
    mn = _abs2(z)
    mstep = 0
    if mn < inner:
        entered = 0
    limit = N
    j = 0
    while j < limit:
        j += 1
        z, good = _step(z, lam, c, direction)
        if not good:
            return entered, exited, escaped, math.sqrt(mn), mstep, False
        a = _abs2(z)
        if a < mn:
            mn = a
            mstep = j
        if a > radius:
            escaped = j
            if entered >= 0 and exited < 0:
                exited = j
            break
        if entered < 0:
            if a < inner:
                entered = j
                limit = j + N
        elif exited < 0 and a >= outer:
            exited = j
            break
    return entered, exited, escaped, math.sqrt(mn), mstep, True


class Germ:
    """``f(z) = lambda z + c_2 z^2 + ... + c_K z^K`` with ``lambda = e^{2 pi i alpha}``."""

    def __init__(self, alpha, coeffs=(1.0,), r0=0.1, check=True):
        if not isinstance(alpha, RotationNumber):
            alpha = parse_alpha(alpha)
        self.alpha = alpha
        self.lam = complex(np.exp(2j * math.pi * float(alpha)))
        c = np.asarray(coeffs, dtype=complex).ravel()
        nz = np.nonzero(c)[0]
        self.coeffs = c[: nz[-1] + 1] if nz.size else np.zeros(0, dtype=complex)
        self.r0 = float(r0)
        if not self.r0 > 0:
            raise DomainError("r0 must be positive")
        if check and self.coeffs.size:
            defect = self.derivative_defect()
            if defect >= 1.0:
                raise DomainError(
                    f"sup |f' - lambda| = {defect:.4g} >= 1 on D_r0: not invertible there")

    @property
    def is_linear(self):
        return self.coeffs.size == 0

    def derivative_defect(self, samples=4096):
        """``sup_{|z| <= r0} |f'(z) - lambda|`` (attained on the circle)."""
        if self.is_linear:
            return 0.0
        z = self.r0 * np.exp(2j * math.pi * np.arange(samples) / samples)
        return float(np.max(np.abs(self.derivative(z) - self.lam)))

    def sup_derivative(self):
        return abs(self.lam) + self.derivative_defect()

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        acc = np.zeros_like(z)
        for ck in self.coeffs[::-1]:
            acc = acc * z + ck
        return z * (self.lam + z * acc)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        acc = np.zeros_like(z)
        for k in range(self.coeffs.size - 1, -1, -1):
            acc = acc * z + (k + 2) * self.coeffs[k]
        return self.lam + z * acc

    def inverse(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out, _, ok = _orbit_ends(z.ravel(), 1, self.lam, self.coeffs, np.inf, -1)
        if not ok.all():
            raise InverseError("Newton inversion did not reach residual 1e-13")
        return out.reshape(z.shape)

    def __repr__(self):
        return f"Germ(alpha={self.alpha.label}, coeffs={self.coeffs.tolist()}, r0={self.r0})"


def iterate_germ(f: Germ, z, j, direction=1, radius=None):
    """``f^{j}(z)`` (``direction=-1``: ``f^{-j}``).

    Returns ``(points, escape_index)`` with escape index ``-1`` where the orbit
    stayed in the closed disk of ``radius`` (default ``r0``).
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if radius is None:
        radius = f.r0 * (1.0 + ESCAPE_SLACK)
    if np.any(np.abs(z) > radius):
        raise DomainError("starting point outside the working disk")
    out, esc, ok = _orbit_ends(z.ravel(), int(j), f.lam, f.coeffs, float(radius),
                               1 if direction > 0 else -1)
    if not ok.all():
        raise InverseError("Newton inversion failed along the orbit")
    return out.reshape(z.shape), esc.reshape(z.shape)


@dataclass
class HedgehogApprox:
    r0: float
    h: float
    N: int
    axis: np.ndarray
    retained: np.ndarray       # bool grid (rows: imaginary part, cols: real part)
    component: np.ndarray
    points: np.ndarray         # complex points of the component
    boundary: np.ndarray       # complex boundary sample of the component
    touches_boundary: bool
    retained_fraction: float
    inner_radius: float
    extra: dict = field(default_factory=dict)

    def report(self):
        return {
            "r0": self.r0, "h": self.h, "N": self.N, "grid": int(self.axis.size),
            "retained_fraction": self.retained_fraction,
            "component_size": int(self.points.size),
            "boundary_size": int(self.boundary.size),
            "touches_boundary": self.touches_boundary,
            "under_resolved": not self.touches_boundary,
            "inner_radius": self.inner_radius, **self.extra,
        }


def hedgehog_approx(f: Germ, N=1000, resolution=256, strict=True):
    """Grid approximation of the hedgehog of ``D_{r0}``.

    The grid has ``2R + 1`` points per diameter (``R = resolution // 2``), so
    0 and the four axis points of the circle are grid points.
    """
    if strict and (resolution < 256 or N < 1000):
        raise DomainError("need resolution >= 256 and N >= 1000 (strict mode)")
    R = resolution // 2
    h = f.r0 / R
    axis = np.arange(-R, R + 1) * h
    Z = axis[None, :] + 1j * axis[:, None]
    inside = np.hypot(Z.real, Z.imag) <= f.r0 * (1.0 + ESCAPE_SLACK)
    radius = f.r0 * (1.0 + ESCAPE_SLACK)
    pts = Z[inside]
    _, esc_f, ok_f = _orbit_ends(pts, N, f.lam, f.coeffs, radius, 1)
    alive = esc_f < 0
    sub = pts[alive]
    _, esc_b, ok_b = _orbit_ends(sub, N, f.lam, f.coeffs, radius, -1)
    if not ok_b[esc_b < 0].all():
        raise InverseError("Newton inversion failed on a retained orbit")
    keep = np.zeros(pts.size, dtype=bool)
    keep[np.nonzero(alive)[0][esc_b < 0]] = True
    retained = np.zeros(Z.shape, dtype=bool)
    retained[inside] = keep
    labels, _ = ndimage.label(retained)
    lab0 = labels[R, R]
    if lab0 == 0:
        raise InconsistencyError("the fixed point 0 is not in the retained set")
    comp = labels == lab0
    eroded = ndimage.binary_erosion(comp, border_value=0)
    bnd = comp & ~eroded
    cpts = Z[comp]
    touches = bool(np.any(np.abs(cpts) >= f.r0 - 2 * h))
    outside = inside & ~comp
    inner = float(np.min(np.abs(Z[outside]))) if outside.any() else f.r0
    approx = HedgehogApprox(
        r0=f.r0, h=h, N=N, axis=axis, retained=retained, component=comp,
        points=cpts, boundary=Z[bnd], touches_boundary=touches,
        retained_fraction=float(keep.mean()), inner_radius=inner,
    )
    approx.extra.update(invariance_defect(f, approx))
    return approx


def invariance_defect(f: Germ, K: HedgehogApprox, max_points=20000):
    """Distance from ``f(K)`` and ``f^{-1}(K)`` to the retained set, in units of
    ``h (1 + sup|f'|)``; values <= 1 mean approximate invariance holds."""
    Z = K.axis[None, :] + 1j * K.axis[:, None]
    ret = Z[K.retained]
    tree = cKDTree(np.column_stack([ret.real, ret.imag]))
    pts = K.points[:: max(1, K.points.size // max_points)]
    unit = K.h * (1.0 + f.sup_derivative())
    out = {}
    for name, img in (("forward", f(pts)), ("backward", f.inverse(pts))):
        d, _ = tree.query(np.column_stack([img.real, img.imag]))
        out[f"invariance_{name}"] = float(d.max() / unit)
    out["invariance_ok"] = max(out["invariance_forward"], out["invariance_backward"]) <= 1.0
    return out


def recurrence_profile(f: Germ, K: HedgehogApprox, alpha, n_range, shadow=1e-12,
                       shadow_cap=1e-6, max_points=None):
    """``sup_{z in K} |f^{+-q_n}(z) - z|`` per ``n``.

    Points whose orbit leaves the disk before ``q_n`` steps are dropped and
    counted.  A shadow run at ``z + shadow`` estimates the rounding drift;
    levels where it exceeds ``shadow_cap`` are flagged ``unreliable``.
    """
    pts = K.points
    if max_points is not None and pts.size > max_points:
        pts = pts[:: pts.size // max_points]
    radius = f.r0 * (1.0 + ESCAPE_SLACK)
    rows = []
    for n in n_range:
        _, q = alpha.convergent(n)
        row = {"n": n, "q": q}
        for name, direction in (("forward", 1), ("backward", -1)):
            end, esc, ok = _orbit_ends(pts, q, f.lam, f.coeffs, radius, direction)
            good = (esc < 0) & ok
            disp = np.abs(end[good] - pts[good])
            i = int(np.argmax(disp)) if disp.size else 0
            sh_end, sh_esc, _ = _orbit_ends(pts[good] + shadow, q, f.lam, f.coeffs,
                                            np.inf, direction)
            drift = float(np.max(np.abs(sh_end - end[good]) - shadow)) if disp.size else 0.0
            row[name] = float(disp.max()) if disp.size else math.nan
            row[f"{name}_witness"] = [float(pts[good][i].real), float(pts[good][i].imag)] \
                if disp.size else None
            row[f"{name}_excluded"] = int((~good).sum())
            row[f"{name}_shadow"] = max(drift, 0.0)
        row["sup"] = max(row["forward"], row["backward"])
        row["unreliable"] = max(row["forward_shadow"], row["backward_shadow"]) > shadow_cap
        rows.append(row)
    return rows


def linear_profile_value(alpha, n, r0):
    """Closed form ``2 r0 |sin(pi (q_n alpha - p_n))|`` for rotations."""
    from .arithmetic import signed_error
    return 2.0 * r0 * abs(math.sin(math.pi * signed_error(alpha, n)))


def profile_trend(rows, slack=0.10):
    """Decrease check: each level's sup is at most ``(1 + slack)`` times the
    previous one (and the level two back), per direction."""
    viol = []
    for key in ("forward", "backward"):
        vals = [r[key] for r in rows]
        for i in range(1, len(vals)):
            if vals[i] > (1.0 + slack) * vals[i - 1]:
                viol.append({"direction": key, "n": rows[i]["n"], "value": vals[i],
                             "previous": vals[i - 1]})
    return {"decreasing": not viol, "violations": viol}


def circle_targets(radius, count):
    """Equally spaced sample of the circle ``|z| = radius``."""
    return radius * np.exp(2j * math.pi * np.arange(count) / count)


def accumulation_scan(f: Germ, K: HedgehogApprox, seeds, N, delta=None, eps=None,
                      targets=None, escape_radius=None, direction=1):
    """Coverage of the targets (default the component's boundary sample) by
    seed orbit clouds.

    A seed is tracked when its orbit comes within ``delta`` of the component.
    For each tracked seed the coverage is the fraction of target points with
    an orbit point within ``eps``.  ``targets`` may be a dict keyed by seed.  The report gives per-seed coverage and its
    minimum over tracked seeds.
    """
    # 2h misses diagonal neighbours of the grid sample; 4h gave stable
    # coverage on rotations
    if delta is None:
        delta = 4.0 * K.h
    if eps is None:
        eps = 4.0 * K.h
    if escape_radius is None:
        escape_radius = 10.0 * f.r0
    comp_tree = cKDTree(np.column_stack([K.points.real, K.points.imag]))
    per_seed = []
    for s in np.atleast_1d(np.asarray(seeds, dtype=complex)):
        cloud = _orbit_cloud(complex(s), int(N), f.lam, f.coeffs, float(escape_radius),
                             1 if direction > 0 else -1)
        entry = {"seed": [float(s.real), float(s.imag)], "orbit_length": int(cloud.size)}
        if cloud.size == 0:
            entry.update(tracked=False, coverage=None)
            per_seed.append(entry)
            continue
        xy = np.column_stack([cloud.real, cloud.imag])
        dmin = float(comp_tree.query(xy)[0].min())
        if targets is None:
            tgt = K.boundary
        elif isinstance(targets, dict):
            tgt = np.asarray(targets[complex(s)], dtype=complex)
        else:
            tgt = np.asarray(targets, dtype=complex)
        tracked = dmin <= delta
        entry.update(tracked=bool(tracked), approach=dmin)
        if tracked:
            d, _ = cKDTree(xy).query(np.column_stack([tgt.real, tgt.imag]))
            entry["coverage"] = float(np.mean(d <= eps))
        else:
            entry["coverage"] = None
        per_seed.append(entry)
    cov = [e["coverage"] for e in per_seed if e.get("tracked")]
    return {
        "N": int(N), "delta": delta, "eps": eps, "tracked": len(cov),
        "excluded": len(per_seed) - len(cov),
        "min_coverage": min(cov) if cov else None, "per_seed": per_seed,
    }


def outside_seeds(K: HedgehogApprox, count, offset=1.5, seed=0):
    """Seeds just outside the component: boundary points pushed out by
    ``offset * h`` radially (kept inside ``D_{r0}``)."""
    b = K.boundary
    b = b[(np.abs(b) > 0) & (np.abs(b) + offset * K.h < K.r0)]
    if b.size == 0:
        return np.zeros(0, dtype=complex)
    rng = np.random.default_rng(seed)
    pick = b[rng.choice(b.size, size=min(count, b.size), replace=False)]
    return pick * (1.0 + offset * K.h / np.abs(pick))


def random_seeds(r0, count, seed=0):
    """Uniform seeds in ``D_{r0}`` minus 0 (by area)."""
    rng = np.random.default_rng(seed)
    r = r0 * np.sqrt(rng.uniform(1e-6, 1.0, count))
    return r * np.exp(2j * math.pi * rng.random(count))


def convergence_probe(f: Germ, seeds, N, inner=None, outer=None, escape_radius=None):
    """Look for orbits that enter ``D_inner`` and do not come back out.

    The exit level for a seed is ``min(outer, 0.9 |seed|)`` so seeds starting
    below ``outer`` are judged against their own modulus.  Each direction gets
    ``N`` steps to enter and then ``N`` more to exit.

    If ``float(alpha)`` is itself a convergent, the binary64 germ is
    parabolic and the probe says nothing about ``alpha``; the report then
    carries ``status = "warn"``.
    """

    inner = 0.1 * f.r0 if inner is None else inner
    outer = 0.5 * f.r0 if outer is None else outer
    if escape_radius is None:
        escape_radius = 10.0 * f.r0
    seeds = np.atleast_1d(np.asarray(seeds, dtype=complex))
    if np.any(seeds == 0):
        raise DomainError("seeds must be nonzero")
    suspects = []
    stats = {"forward": {"entered": 0, "escaped": 0}, "backward": {"entered": 0, "escaped": 0}}
    for s in seeds:
        level = min(outer, 0.9 * abs(s))
        for name, direction in (("forward", 1), ("backward", -1)):
            ent, ex, esc, mn, mstep, ok = _probe(complex(s), int(N), f.lam, f.coeffs,
                                                 float(inner), float(level),
                                                 float(escape_radius), direction)
            if not ok:
                raise InverseError(f"Newton inversion failed on the orbit of {s}")
            if esc >= 0:
                stats[name]["escaped"] += 1
            if ent >= 0:
                stats[name]["entered"] += 1
                if ex < 0:
                    suspects.append({"seed": [float(s.real), float(s.imag)],
                                     "direction": name, "entered_at": int(ent),
                                     "min_modulus": float(mn), "min_step": int(mstep)})
    horizon, exact = binary64_horizon(f.alpha)
    status = "warn" if exact else ("fail" if suspects else "pass")
    return {"N": int(N), "inner": inner, "outer": outer, "seeds": int(seeds.size),
            "binary64_horizon_q": horizon, "binary64_rational": exact, "status": status,
            **{f"{k}_{m}": v for k, d in stats.items() for m, v in d.items()},
            "suspects": suspects, "suspect_count": len(suspects)}
