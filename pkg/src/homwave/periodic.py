"""Periodic media: lattices, cell coefficients, and first-order symbols.

The medium is a Hermitian positive-definite m-by-m matrix field g, periodic
with respect to a lattice, sampled on a uniform grid over the centered unit
cell (reference coordinates tau_j in (-1/2, 1/2)).  The first-order operator
is described by d constant m-by-n matrices b_1..b_d acting on gradients:
beta(grad)u = sum_j b_j du/dx_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Lattice",
    "CoefficientField",
    "CoefficientSpec",
    "SymbolFamily",
    "build_lattice",
    "sample_coefficient",
    "symbol_bounds",
    "make_symbol",
    "scale_to_domain",
    "gradient_symbol",
]

HERMITIAN_RTOL = 1e-12
RANK_FAILURE_RTOL = 1e-10


@dataclass(frozen=True)
class Lattice:
    """Lattice basis and its centered elementary cell."""

    basis: np.ndarray          # (d, d), columns are the generating vectors
    cell_volume: float

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def is_diagonal(self):
        off = self.basis - np.diag(np.diag(self.basis))
        return not np.any(off)


def build_lattice(basis) -> Lattice:
    """Validate a lattice basis; the cell volume is |det(basis)|."""
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    if basis.shape[0] != basis.shape[1]:
        raise ValueError(f"lattice basis must be square, got shape {basis.shape}")
    det = np.linalg.det(basis)
    if abs(det) < 1e-14 * max(1.0, np.abs(basis).max() ** basis.shape[0]):
        raise ValueError("singular lattice basis")
    return Lattice(basis=basis, cell_volume=abs(det))


def _reduce_to_cell(tau):
    """Map reference coordinates into the centered cell [-1/2, 1/2)."""
    return tau - np.round(tau)


class CoefficientSpec:
    """Closed-form or tabulated description of the periodic coefficient.

    Kinds:
      constant     -- value: scalar or (m, m) matrix
      sinusoidal   -- scalar base + amplitude * sin(2*pi*frequency*tau_axis + phase)
      two-phase    -- scalar, value inner where |tau_axis| < 1/4, outer elsewhere
      tabulated    -- nodal samples, interpolated per `interpolation`
      custom       -- arbitrary callable tau -> (m, m) samples
    """

    KINDS = ("constant", "sinusoidal", "two-phase", "tabulated", "custom")

    def __init__(self, kind, **params):
        if kind not in self.KINDS:
            raise ValueError(f"unknown coefficient kind {kind!r}")
        self.kind = kind
        self.params = params

    @classmethod
    def constant(cls, value):
        return cls("constant", value=np.atleast_2d(np.asarray(value)))

    @classmethod
    def sinusoidal(cls, base, amplitude, frequency=1, axis=0, phase=0.0):
        return cls("sinusoidal", base=float(base), amplitude=float(amplitude),
                   frequency=int(frequency), axis=int(axis), phase=float(phase))

    @classmethod
    def two_phase(cls, inner, outer, axis=0):
        return cls("two-phase", inner=float(inner), outer=float(outer), axis=int(axis))

    @classmethod
    def tabulated(cls, values, interpolation="linear"):
        return cls("tabulated", values=np.asarray(values), interpolation=interpolation)

    @classmethod
    def custom(cls, fn, m=1):
        return cls("custom", fn=fn, m=int(m))

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind")
        if kind == "constant":
            return cls.constant(d["value"])
        if kind == "sinusoidal":
            return cls.sinusoidal(d["base"], d["amplitude"], d.get("frequency", 1),
                                  d.get("axis", 0), d.get("phase", 0.0))
        if kind == "two-phase":
            v = d["values"]
            return cls.two_phase(v[0], v[1], d.get("axis", 0))
        if kind == "custom-tabulated":
            return cls.tabulated(np.asarray(d["values"]), d.get("interpolation", "linear"))
        raise ValueError(f"unknown coefficient kind {kind!r}")

    def matrix_size(self):
        if self.kind == "constant":
            return self.params["value"].shape[0]
        if self.kind in ("sinusoidal", "two-phase"):
            return 1
        if self.kind == "tabulated":
            return self.params["values"].shape[-1]
        return self.params["m"]

    def evaluate(self, tau):
        """Sample g at reference cell coordinates tau, shape (..., d) -> (..., m, m)."""
        tau = _reduce_to_cell(np.asarray(tau, dtype=float))
        if tau.ndim == 1:
            tau = tau[:, None]
        pts = tau.shape[:-1]
        if self.kind == "constant":
            g = self.params["value"]
            return np.broadcast_to(g, pts + g.shape).copy()
        if self.kind == "sinusoidal":
            p = self.params
            s = p["base"] + p["amplitude"] * np.sin(
                2 * np.pi * p["frequency"] * tau[..., p["axis"]] + p["phase"])
            return s[..., None, None]
        if self.kind == "two-phase":
            p = self.params
            s = np.where(np.abs(tau[..., p["axis"]]) < 0.25, p["inner"], p["outer"])
            return s[..., None, None]
        if self.kind == "tabulated":
            return _interp_periodic(self.params["values"], tau,
                                    self.params["interpolation"])
        out = self.params["fn"](tau)
        out = np.asarray(out)
        if out.shape == pts:
            out = out[..., None, None]
        return out


def _interp_periodic(values, tau, interpolation):
    """Periodic interpolation of nodal cell samples at reference points."""
    grid = values.shape[:-2]
    d = len(grid)
    pos = [(tau[..., j] + 0.5) % 1.0 * grid[j] for j in range(d)]
    if interpolation == "pconst":
        idx = tuple(np.floor(p).astype(int) % grid[j] for j, p in enumerate(pos))
        return values[idx]
    if interpolation != "linear":
        raise ValueError(f"unknown interpolation {interpolation!r}")
    i0 = [np.floor(p).astype(int) % grid[j] for j, p in enumerate(pos)]
    fr = [p - np.floor(p) for p in pos]
    out = 0
    for corner in range(1 << d):
        idx, w = [], 1.0
        for j in range(d):
            if corner >> j & 1:
                idx.append((i0[j] + 1) % grid[j])
                w = w * fr[j]
            else:
                idx.append(i0[j])
                w = w * (1.0 - fr[j])
        out = out + np.asarray(w)[..., None, None] * values[tuple(idx)]
    return out


@dataclass
class CoefficientField:
    """Periodic coefficient: nodal samples on the cell plus its point evaluator."""

    spec: CoefficientSpec
    grid: tuple                 # per-axis sample counts on the cell
    values: np.ndarray          # grid + (m, m) nodal samples
    norm_g: float               # ess-sup of the per-node operator norm of g
    norm_g_inv: float           # ess-sup of the per-node operator norm of g^-1
    lattice: Lattice = field(default=None)

    @property
    def m(self):
        return self.values.shape[-1]

    @property
    def dim(self):
        return len(self.grid)

    def node_coordinates(self):
        axes = [-0.5 + np.arange(n) / n for n in self.grid]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def evaluate(self, tau):
        return self.spec.evaluate(tau)

    def element_values(self, resolution=None):
        """g at element midpoints of a uniform cell mesh (assembly samples)."""
        res = tuple(resolution) if resolution is not None else self.grid
        axes = [-0.5 + (np.arange(n) + 0.5) / n for n in res]
        mids = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return self.evaluate(mids)

    def is_real(self):
        return not np.iscomplexobj(self.values) or not np.any(self.values.imag)


def sample_coefficient(spec, grid, lattice=None) -> CoefficientField:
    """Sample a coefficient spec on a uniform cell grid and certify it.

    Every nodal sample must be Hermitian (relative tolerance 1e-12) and
    positive definite; violations raise with the offending node index.
    """
    if isinstance(spec, dict):
        spec = CoefficientSpec.from_dict(spec)
    grid = tuple(int(n) for n in np.atleast_1d(grid))
    if lattice is None:
        lattice = build_lattice(np.eye(len(grid)))
    axes = [-0.5 + np.arange(n) / n for n in grid]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    values = spec.evaluate(pts)
    m = values.shape[-1]
    flat = values.reshape(-1, m, m)
    herm_err = np.abs(flat - np.conj(np.swapaxes(flat, -1, -2))).max(axis=(-1, -2))
    scale = np.abs(flat).max(axis=(-1, -2))
    bad = np.nonzero(herm_err > HERMITIAN_RTOL * np.maximum(scale, 1e-300))[0]
    if bad.size:
        node = np.unravel_index(bad[0], grid)
        raise ValueError(f"coefficient sample at node {node} is not Hermitian")
    eigs = np.linalg.eigvalsh((flat + np.conj(np.swapaxes(flat, -1, -2))) / 2)
    bad = np.nonzero(eigs[:, 0] <= 0)[0]
    if bad.size:
        node = np.unravel_index(bad[0], grid)
        raise ValueError(f"coefficient sample at node {node} is not positive definite")
    norm_g = float(eigs[:, -1].max())
    norm_g_inv = float((1.0 / eigs[:, 0]).max())
    if np.iscomplexobj(values) and not np.any(values.imag):
        values = values.real
    return CoefficientField(spec=spec, grid=grid, values=values,
                            norm_g=norm_g, norm_g_inv=norm_g_inv, lattice=lattice)


@dataclass(frozen=True)
class SymbolFamily:
    """Constant matrices of the first-order symbol with its ellipticity bounds."""

    matrices: tuple             # d matrices, each (m, n)
    alpha0: float
    alpha1: float

    @property
    def dim(self):
        return len(self.matrices)

    @property
    def m(self):
        return self.matrices[0].shape[0]

    @property
    def n(self):
        return self.matrices[0].shape[1]

    def symbol(self, theta):
        """b(theta) = sum_j b_j theta_j for a direction theta."""
        theta = np.asarray(theta, dtype=float)
        return sum(bj * t for bj, t in zip(self.matrices, theta))

    def is_real(self):
        return all(not np.iscomplexobj(b) or not np.any(b.imag) for b in self.matrices)


def gradient_symbol(dim) -> SymbolFamily:
    """The gradient: b_j = e_j, so beta(grad) = grad (m = dim, n = 1)."""
    mats = [np.eye(dim)[:, j:j + 1] for j in range(dim)]
    return make_symbol(mats)


def _sphere_eig_range(matrices, theta):
    b = sum(bj * t for bj, t in zip(matrices, theta))
    w = np.linalg.eigvalsh(np.conj(b.T) @ b)
    return w[0], w[-1]


def symbol_bounds(matrices, sphere_samples=720):
    """Extremal eigenvalues of b(theta)* b(theta) over the unit sphere.

    d = 1 needs only theta = 1; d = 2 scans `sphere_samples` angles and
    refines around the minimizer and maximizer.  Raises when the minimum
    signals a rank defect (alpha0 below 1e-10 * alpha1).
    """
    matrices = [np.atleast_2d(np.asarray(b)) for b in matrices]
    d = len(matrices)
    m, n = matrices[0].shape
    if m < n:
        raise ValueError(f"symbol must have m >= n, got {m} x {n}")
    for b in matrices:
        if b.shape != (m, n):
            raise ValueError("all symbol matrices must share the same shape")
    if d == 1:
        lo, hi = _sphere_eig_range(matrices, (1.0,))
    elif d == 2:
        if sphere_samples < 16:
            raise ValueError("need at least 16 sphere samples in d=2")
        angles = np.linspace(0, 2 * np.pi, sphere_samples, endpoint=False)
        los, his = np.empty(len(angles)), np.empty(len(angles))
        for i, a in enumerate(angles):
            los[i], his[i] = _sphere_eig_range(matrices, (np.cos(a), np.sin(a)))
        lo, hi = los.min(), his.max()
        # refinement pass around both extremizers
        for target, pick in ((0, np.argmin(los)), (1, np.argmax(his))):
            a0 = angles[pick]
            fine = a0 + np.linspace(-1, 1, 201) * (2 * np.pi / sphere_samples)
            for a in fine:
                l, h = _sphere_eig_range(matrices, (np.cos(a), np.sin(a)))
                lo, hi = min(lo, l), max(hi, h)
    else:
        raise NotImplementedError("symbol bounds implemented for d <= 2")
    if lo < RANK_FAILURE_RTOL * hi:
        raise ValueError("symbol rank condition violated")
    return float(lo), float(hi)


def make_symbol(matrices, sphere_samples=720) -> SymbolFamily:
    """Build a SymbolFamily, computing the ellipticity constants."""
    matrices = tuple(np.atleast_2d(np.asarray(b)) for b in matrices)
    alpha0, alpha1 = symbol_bounds(matrices, sphere_samples)
    return SymbolFamily(matrices=matrices, alpha0=alpha0, alpha1=alpha1)


def scale_to_domain(field: CoefficientField, epsilon, points):
    """Values of g(x / epsilon) at physical points, reduced to the cell.

    `points` has shape (..., d) in physical coordinates.  The epsilon-scaled
    medium repeats with period epsilon * lattice; points are mapped through
    the lattice basis into the centered reference cell.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    inv = np.linalg.inv(field.lattice.basis)
    tau = points / epsilon @ inv.T
    return field.evaluate(tau)
