"""Independent ground truth for the closed-form limits.

Two routes that never touch the closed forms:

* 1-D quadrature against the marginal density of one coordinate of a
  uniform point on the unit sphere of R^d (or against the standard normal
  density), for the cases that reduce to one dimension;
* Monte Carlo over weight directions Z ~ N(0, I_d) of the law-of-large-numbers
  limit E[relu(x^T Z) phi(Z)], where phi is the per-unit map that builds
  each eigenvector family.

Tolerance policy: closed form vs quadrature at 1e-8 absolute, anything vs
Monte Carlo at 4 standard errors.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import tanhsinh
from scipy.special import ndtr

from . import limits
from .errors import DomainError, IntegrandError, InvalidDimensionError
from .fim_metric import GramSummary, InnerProductEstimate
from .limits import SpecialConstants, beta_fn
from .streams import PairwiseAccumulator, Stream, check_seed, chunk_bounds, default_chunk, gaussian_rows, normals

MC_SIGMA = 4.0
QUAD_ATOL = 1e-8
SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    n_points: int


def _std_normal_pdf(z):
    return np.exp(-0.5 * np.asarray(z) ** 2) / SQRT_2PI


def _integrate(f: Callable, a: float, b: float, atol: float, rtol: float) -> tuple[float, float, int]:
    res = tanhsinh(f, a, b, atol=atol, rtol=rtol)
    if int(res.status) == -3 or not np.isfinite(res.integral):
        raise IntegrandError(f"integrand is not finite on [{a}, {b}]")
    return float(res.integral), float(abs(res.error)), int(res.nfev)


def _piecewise(f: Callable, lo: float, hi: float, breakpoints: Sequence[float], atol: float, rtol: float) -> QuadratureResult:
    knots = [lo] + sorted(p for p in breakpoints if lo < p < hi) + [hi]
    total, err, npts = 0.0, 0.0, 0
    for a, b in zip(knots[:-1], knots[1:]):
        v, e, n = _integrate(f, a, b, atol, rtol)
        total, err, npts = total + v, err + e, npts + n
    return QuadratureResult(total, err, npts)


def sphere_marginal_density(u, d: int):
    """Density of one coordinate of a uniform point on the unit sphere in R^d."""
    u = np.asarray(u, dtype=np.float64)
    return (1.0 - u * u) ** ((d - 3) / 2.0) / beta_fn((d - 1) / 2.0, 0.5)


def sphere_marginal_moment(
    d: int,
    g: Callable,
    breakpoints: Sequence[float] = (0.0,),
    atol: float = 1e-14,
    rtol: float = 1e-13,
) -> QuadratureResult:
    """Tanh-sinh quadrature of the integral of g(u) f(u) over [-1, 1].

    ``g`` must accept numpy arrays.  The double-exponential nodes cluster at
    +-1, which absorbs the unbounded derivative of the density for d = 3, 4.
    Splitting at ``breakpoints`` keeps kinks (the ReLU at 0) off the interior.
    """
    if d < 3:
        raise DomainError("the sphere marginal density needs d >= 3")
    return _piecewise(lambda u: g(u) * sphere_marginal_density(u, d), -1.0, 1.0, breakpoints, atol, rtol)


def gaussian_moment(g: Callable, breakpoints: Sequence[float] = (), atol: float = 1e-14, rtol: float = 1e-13) -> QuadratureResult:
    """Integral of g(z) phi(z) over the real line."""
    return _piecewise(lambda z: g(z) * _std_normal_pdf(z), -np.inf, np.inf, breakpoints, atol, rtol)


# --- E[relu(a + b Z)] for Z ~ N(0, 1) ---------------------------------------


def lemma_b1_closed(a, b):
    """a Phi(a/|b|) + |b| phi(a/|b|)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.abs(np.asarray(b, dtype=np.float64))
    t = a / b
    return a * ndtr(t) + b * _std_normal_pdf(t)


@dataclass(frozen=True)
class LemmaB1Check:
    a: float
    b: float
    closed: float
    mc: float
    mc_se: float
    quad: float
    quad_error: float

    @property
    def passed(self) -> bool:
        return abs(self.closed - self.mc) < MC_SIGMA * self.mc_se and abs(self.closed - self.quad) < QUAD_ATOL


def lemma_b1_check(a: float, b: float, n_samples: int = 10**7, seed: int = 0) -> LemmaB1Check:
    if b == 0:
        raise DomainError("E[relu(a + b Z)] check requires b != 0")
    closed = float(lemma_b1_closed(a, b))
    s1, s2 = PairwiseAccumulator(), PairwiseAccumulator()
    for lo, hi in chunk_bounds(n_samples, 1 << 20):
        vals = np.maximum(a + b * normals(seed, Stream.ORACLE, lo, hi - lo), 0.0)
        s1.add(vals.sum())
        s2.add((vals * vals).sum())
    mean, mean_sq = s1.total() / n_samples, s2.total() / n_samples
    se = math.sqrt(max(mean_sq - mean * mean, 0.0) / (n_samples - 1))
    quad = gaussian_moment(lambda z: np.maximum(a + b * z, 0.0), breakpoints=(-a / b,))
    return LemmaB1Check(float(a), float(b), closed, float(mean), se, quad.value, quad.abs_error_estimate)


# --- Monte Carlo over weight directions --------------------------------------

MC_GROUPS = ("G1", "G2", "G3_square", "G3_diag_tilde", "G3_diag", "G3_offdiag")


def _integrand(group: str, index: tuple[int, ...], x: np.ndarray) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Per-sample value of relu(x^T Z) phi(Z) for one family.

    Derivation: W = Z / sqrt(m) and every phi is 1-homogeneous, so
    X^T v = (1/m) sum_i relu(x^T Z_i) phi(Z_i) -> E[relu(x^T Z) phi(Z)].
    """
    d = x.shape[0]
    sd2 = math.sqrt(d + 2)

    def tilde(g: int, s, Z, nz):
        return (sd2 * s * Z[:, g - 1] ** 2 / nz - math.sqrt((d + 2) / d) * s * nz / math.sqrt(d)) / math.sqrt(2.0)

    if group == "G1":
        return lambda s, Z, nz: s * nz / math.sqrt(d)
    if group == "G2":
        (l,) = index
        return lambda s, Z, nz: s * Z[:, l - 1]
    if group in ("G3_square", "G3_offdiag"):
        a, b = index
        return lambda s, Z, nz: sd2 * s * Z[:, a - 1] * Z[:, b - 1] / nz
    if group == "G3_diag_tilde":
        (g,) = index
        return lambda s, Z, nz: tilde(g, s, Z, nz)
    if group == "G3_diag":
        (g,) = index
        return lambda s, Z, nz: tilde(g, s, Z, nz) - tilde(d, s, Z, nz) / (math.sqrt(d) + 1.0)
    raise ValueError(f"unknown group {group!r}; expected one of {MC_GROUPS}")


def mc_expectations(
    specs: Sequence[tuple[str, tuple[int, ...], np.ndarray]],
    n_samples: int,
    seed: int,
) -> list[InnerProductEstimate]:
    """Estimate several E[relu(x^T Z) phi(Z)] on one shared stream of Z."""
    if not specs:
        return []
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    seed = check_seed(seed)
    xs = [np.asarray(x, dtype=np.float64) for _, _, x in specs]
    d = xs[0].shape[0]
    fns = [_integrand(g, tuple(idx), x) for (g, idx, _), x in zip(specs, xs)]
    X = np.column_stack(xs)
    acc = PairwiseAccumulator()
    for lo, hi in chunk_bounds(n_samples, default_chunk(d)):
        Z = gaussian_rows(seed, Stream.ORACLE, lo, hi - lo, d)
        nz = np.linalg.norm(Z, axis=1)
        S = np.maximum(Z @ X, 0.0)
        vals = np.column_stack([fn(S[:, k], Z, nz) for k, fn in enumerate(fns)])
        acc.add(np.concatenate([vals.sum(axis=0), (vals * vals).sum(axis=0)]))
    tot = acc.total()
    k = len(fns)
    mean, mean_sq = tot[:k] / n_samples, tot[k:] / n_samples
    se = np.sqrt(np.maximum(mean_sq - mean * mean, 0.0) / (n_samples - 1))
    return [InnerProductEstimate(float(m), float(s), int(n_samples), seed) for m, s in zip(mean, se)]


def group_expectation_mc(group: str, x, d: int, n_samples: int, seed: int, index: tuple[int, ...] = ()) -> InnerProductEstimate:
    """Monte Carlo value of the population limit of X^T v for one family."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (d,) or not np.all(np.isfinite(x)):
        raise InvalidDimensionError(f"x must be a finite vector of length {d}")
    if n_samples < 10**4:
        raise ValueError("use at least 1e4 samples for an oracle estimate")
    return mc_expectations([(group, tuple(index), x)], n_samples, seed)[0]


# --- exact special cases -----------------------------------------------------


@dataclass(frozen=True)
class OracleRow:
    name: str
    d: int
    closed: float
    mc: float
    mc_se: float
    quad: float | None
    mc_sigma: float = MC_SIGMA
    quad_atol: float = QUAD_ATOL

    @property
    def z(self) -> float:
        diff = abs(self.closed - self.mc)
        return diff / self.mc_se if self.mc_se > 0 else (0.0 if diff == 0 else math.inf)

    @property
    def quad_diff(self) -> float | None:
        return None if self.quad is None else abs(self.closed - self.quad)

    @property
    def passed(self) -> bool:
        ok = self.z < self.mc_sigma
        if self.quad is not None:
            ok = ok and self.quad_diff < self.quad_atol
        return ok

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(z=self.z, quad_diff=self.quad_diff, passed=self.passed)
        return out


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def _relu(u):
    return np.maximum(u, 0.0)


def _quad_radial(d: int, x: np.ndarray) -> float:
    """sqrt(d) E[relu(x^T Zhat)] ||x||-scaled via the first-coordinate marginal."""
    return math.sqrt(d) * np.linalg.norm(x) * sphere_marginal_moment(d, _relu).value


def _quad_linear(x: np.ndarray, l: int) -> float:
    """E[Z_l relu(x^T Z)] reduced to one Gaussian dimension via the closed form for E[relu(a + b Z)]."""
    a_coef = x[l - 1]
    b = float(np.linalg.norm(np.delete(x, l - 1)))
    if b == 0.0:
        return gaussian_moment(lambda z: z * _relu(a_coef * z), breakpoints=(0.0,)).value
    return gaussian_moment(lambda z: z * lemma_b1_closed(a_coef * z, b)).value


def _quad_tilde_axis(d: int, norm: float) -> float:
    """x = ||x|| e_gamma: (d sqrt(d+2) E[relu(u) u^2] - sqrt(d+2) E[relu(u)]) ||x|| / sqrt(2)."""
    m3 = sphere_marginal_moment(d, lambda u: _relu(u) * u * u).value
    m1 = sphere_marginal_moment(d, _relu).value
    return (d * math.sqrt(d + 2) * m3 - math.sqrt(d + 2) * m1) * norm / math.sqrt(2.0)


def _quad_tilde_orth(d: int, norm: float) -> float:
    """x_gamma = 0: the remaining coordinates are a (d-1)-sphere of radius sqrt(1-u^2)."""
    inner = 1.0 / ((d - 2) * beta_fn((d - 2) / 2.0, 0.5))
    square = d * math.sqrt(d + 2) * inner * sphere_marginal_moment(d, lambda u: u * u * np.sqrt(np.clip(1 - u * u, 0, None)), breakpoints=()).value
    m1 = sphere_marginal_moment(d, _relu).value
    return (square - math.sqrt(d + 2) * m1) * norm / math.sqrt(2.0)


def _quad_pair(d: int, xa: float, xb: float) -> float:
    """x supported on (alpha, beta): radial and angular integrals over the disc."""
    radial = _piecewise(lambda r: r**4 * (1 - r * r) ** ((d - 4) / 2.0), 0.0, 1.0, (), 1e-15, 1e-13).value
    phi0 = math.atan2(xb, xa)
    angular = _piecewise(
        lambda t: _relu(xa * np.cos(t) + xb * np.sin(t)) * np.cos(t) * np.sin(t),
        -math.pi, math.pi,
        sorted({((phi0 + s * math.pi / 2 + math.pi) % (2 * math.pi)) - math.pi for s in (-1, 1)}),
        1e-15, 1e-13,
    ).value
    return d * math.sqrt(d + 2) * (d - 2) / (2 * math.pi) * radial * angular


def special_case_table(
    d: int,
    n_samples: int = 10**7,
    seed: int = 0,
    mc_sigma: float = MC_SIGMA,
    quad_atol: float = QUAD_ATOL,
) -> list[OracleRow]:
    """Closed form vs Monte Carlo (and quadrature where one-dimensional) for each exact case."""
    if d < 6:
        raise DomainError("the quadratic-family special cases need d >= 6")
    c = SpecialConstants(d)
    e = np.eye(d)
    general = _unit(np.arange(1, d + 1, dtype=np.float64)) * 2.0
    orth = e[1:].sum(axis=0) / math.sqrt(d - 1)  # x_1 = 0, ||x|| = 1
    cases = [
        # name, MC group, index, x, closed form, quadrature
        ("G1_axis", "G1", (), e[0], limits.limit_F0(e[0]), _quad_radial(d, e[0])),
        ("G1_general", "G1", (), general, limits.limit_F0(general), _quad_radial(d, general)),
        ("G2_axis", "G2", (1,), e[0], limits.limit_Fl(e[0], 1), _quad_linear(e[0], 1)),
        ("G2_general", "G2", (2,), general, limits.limit_Fl(general, 2), _quad_linear(general, 2)),
        ("G3diag_axis", "G3_diag_tilde", (1,), e[0],
         (d - 1) * math.sqrt(d + 2) / (2 * math.pi * (d + 1) * math.sqrt(2)) * c.beta_half, _quad_tilde_axis(d, 1.0)),
        ("G3diag_orth", "G3_diag_tilde", (1,), orth,
         -math.sqrt(d + 2) / (2 * math.pi * (d + 1) * math.sqrt(2)) * c.beta_half, _quad_tilde_orth(d, 1.0)),
        ("G3offdiag_zero", "G3_offdiag", (1, 2), orth, 0.0, None),
        ("G3offdiag_pair", "G3_offdiag", (1, 2), _unit(e[0] + e[1]),
         d * math.sqrt(d + 2) / (2 * math.pi * (d + 1)) * c.beta_half * 0.5, _quad_pair(d, *_unit([1.0, 1.0]))),
        ("G3offdiag_pair_asym", "G3_offdiag", (1, 2), _unit(e[0] + 2 * e[1]),
         d * math.sqrt(d + 2) / (2 * math.pi * (d + 1)) * c.beta_half * 0.4, _quad_pair(d, *_unit([1.0, 2.0]))),
    ]
    estimates = mc_expectations([(g, idx, x) for _, g, idx, x, _, _ in cases], n_samples, seed)
    return [
        OracleRow(name, d, float(closed), est.value, est.std_error, None if quad is None else float(quad), mc_sigma, quad_atol)
        for (name, _, _, _, closed, quad), est in zip(cases, estimates)
    ]


# --- remainder sweep ---------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    r: float
    truth: float
    truth_se: float
    leading: float
    envelope: float

    @property
    def ratio(self) -> float:
        return abs(self.truth - self.leading) / self.envelope if self.envelope > 0 else math.nan

    @property
    def ratio_se(self) -> float:
        return self.truth_se / self.envelope if self.envelope > 0 else math.nan

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(ratio=self.ratio, ratio_se=self.ratio_se)
        return out


def sweep_path(group: str, d: int, r: float) -> np.ndarray:
    """Unit-norm input whose direction statistic (r_gamma or r_ab, on coordinate 1 / pair (1,2)) equals r."""
    if group == "G3diag":
        head = np.zeros(d)
        head[0] = 1.0
        tail = np.r_[0.0, np.ones(d - 1)] / math.sqrt(d - 1)
    elif group == "G3offdiag":
        head = np.r_[1.0, 1.0, np.zeros(d - 2)] / math.sqrt(2.0)
        tail = np.r_[0.0, 0.0, np.ones(d - 2)] / math.sqrt(d - 2)
    else:
        raise ValueError("remainder sweeps exist for 'G3diag' and 'G3offdiag'")
    return math.sqrt(r) * head + math.sqrt(1.0 - r) * tail


def remainder_sweep(group: str, d: int, r_values: Sequence[float], n_samples: int = 10**6, seed: int = 0) -> list[SweepRow]:
    """|MC truth - leading term| / remainder envelope along a fixed-norm path."""
    if d < 6:
        raise DomainError("remainder sweeps need d >= 6")
    if not r_values:
        return []
    if any(not 0.0 < r <= 1.0 for r in r_values):
        raise DomainError("r values must lie in (0, 1]")
    xs = [sweep_path(group, d, r) for r in r_values]
    if group == "G3diag":
        specs = [("G3_diag_tilde", (1,), x) for x in xs]
        leading = [limits.limit_Ftilde(x, 1) for x in xs]
        env = [limits.remainder_bound_probe("diag", x, gamma=1) for x in xs]
    else:
        specs = [("G3_offdiag", (1, 2), x) for x in xs]
        leading = [limits.limit_Foffdiag(x, 1, 2) for x in xs]
        env = [limits.remainder_bound_probe("offdiag", x, alpha=1, beta=2) for x in xs]
    ests = mc_expectations(specs, n_samples, seed)
    return [SweepRow(float(r), e.value, e.std_error, float(lead), float(en)) for r, e, lead, en in zip(r_values, ests, leading, env)]


def sweep_is_bounded(rows: Sequence[SweepRow], growth: float = 4.0, mc_sigma: float = MC_SIGMA) -> bool:
    """No blow-up as r -> 0.

    Rows are ordered by decreasing r; every later ratio, less its Monte Carlo
    allowance, must stay within ``growth`` times the largest ratio seen at the
    two largest r values.  An O(r^2) remainder keeps the ratio roughly
    constant; an O(r) remainder would double it at every halving of r.
    """
    rows = sorted(rows, key=lambda row: -row.r)
    if len(rows) < 2:
        return True
    ref = max(max(row.ratio + mc_sigma * row.ratio_se for row in rows[:2]), 1e-12)
    return all(row.ratio - mc_sigma * row.ratio_se <= growth * ref for row in rows[2:])


# --- function-space moments of the limit functions ---------------------------


FULL_FAMILY_MAX_D = 12


def limit_family(d: int, full: bool | None = None) -> list[limits.LimitFn]:
    """Limit functions in canonical order.

    The full family has d + d(d+1)/2 members; above ``FULL_FAMILY_MAX_D``
    a fixed subset (F0, three linear, three diagonal, four pairs covering
    shared and disjoint indices) keeps the Gram computation cheap.
    """
    if full is None:
        full = d <= FULL_FAMILY_MAX_D
    if full:
        fns = [limits.LimitFn("F0", d)]
        fns += [limits.LimitFn("Fl", d, (l,)) for l in range(1, d + 1)]
        fns += [limits.LimitFn("Fdiag", d, (g,)) for g in range(1, d)]
        fns += [limits.LimitFn("Foffdiag", d, (a, b)) for a in range(1, d + 1) for b in range(a + 1, d + 1)]
        return fns
    fns = [limits.LimitFn("F0", d)]
    fns += [limits.LimitFn("Fl", d, (l,)) for l in (1, 2, d)]
    fns += [limits.LimitFn("Fdiag", d, (g,)) for g in (1, 2, d - 1)]
    fns += [limits.LimitFn("Foffdiag", d, ab) for ab in ((1, 2), (1, 3), (2, 3), (3, 4))]
    return fns


def limit_gram(fns: Sequence[limits.LimitFn], n_samples: int, seed: int) -> GramSummary:
    """Monte Carlo <F_i, F_j> over x ~ N(0, I_d) for the given limit functions."""
    d = fns[0].d
    s1, s2 = PairwiseAccumulator(), PairwiseAccumulator()
    for lo, hi in chunk_bounds(n_samples, default_chunk(max(d, len(fns)))):
        x = gaussian_rows(check_seed(seed), Stream.INPUTS, lo, hi - lo, d)
        F = np.column_stack([fn(x) for fn in fns])
        F2 = F * F
        s1.add(F.T @ F)
        s2.add(F2.T @ F2)
    mean, mean_sq = s1.total() / n_samples, s2.total() / n_samples
    se = np.sqrt(np.maximum(mean_sq - mean * mean, 0.0) / (n_samples - 1))
    nominal = {"F0": (2 * d + 1) / (4 * math.pi), "Fl": 0.25}
    return GramSummary(
        labels=[fn.label for fn in fns],
        gram=mean,
        std_error=se,
        nominal=np.array([nominal.get(fn.kind, 1.0 / (2 * math.pi * (d + 2))) for fn in fns]),
        n_samples=int(n_samples),
        seed=check_seed(seed),
    )


@dataclass(frozen=True)
class MomentRow:
    """E[F^2] against its cluster eigenvalue."""

    label: str
    value: float
    std_error: float
    nominal: float
    rel_tol: float | None  # None: exact identity, judged at ``mc_sigma`` standard errors
    mc_sigma: float = MC_SIGMA

    @property
    def rel_dev(self) -> float:
        return self.value / self.nominal - 1.0

    @property
    def passed(self) -> bool:
        if self.rel_tol is None:
            return abs(self.value - self.nominal) < self.mc_sigma * self.std_error
        return abs(self.rel_dev) <= self.rel_tol

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(rel_dev=self.rel_dev, passed=self.passed)
        return out


# relative tolerances for the second moments; the linear family is an exact identity
MOMENT_TOLERANCES = {"F0": 0.03, "Fl": None, "Fdiag": 0.05, "Foffdiag": 0.05}


def limit_moment_checks(d: int, n_samples: int = 10**6, seed: int = 0, mc_sigma: float = MC_SIGMA) -> tuple[list[MomentRow], GramSummary]:
    """Second moments of one representative per family, plus the Gram of the whole family."""
    gram = limit_gram(limit_family(d), n_samples, seed)
    rows = []
    for kind in ("F0", "Fl", "Fdiag", "Foffdiag"):
        k = next(i for i, lab in enumerate(gram.labels) if lab.split("[")[0] == kind)
        rows.append(MomentRow(gram.labels[k], float(gram.gram[k, k]), float(gram.std_error[k, k]),
                              float(gram.nominal[k]), MOMENT_TOLERANCES[kind], mc_sigma))
    return rows, gram
