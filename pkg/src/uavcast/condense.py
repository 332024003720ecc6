"""Monomial condensation of the trajectory subproblem's constraints.

Each non-GP-compatible expression is a posynomial ratio; the denominator is
replaced by its AM-GM monomial under-estimator anchored at the current
iterate, which makes every approximated constraint conservative (an inner
approximation) and exact at the expansion point.

Variable keys: ("x", n) / ("y", n) for breaking-point coordinates,
("dsq", g, n) for the epigraph on the group's max squared 3-D distance and
("ipn", g, n) for the epigraph on interference-plus-noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .convex import Key, Monomial, Posynomial

WEIGHT_CLAMP = 1e-9


class ExpansionError(ValueError):
    """The expansion point violates positivity requirements."""


def x_key(n: int) -> Key:
    return ("x", n)


def y_key(n: int) -> Key:
    return ("y", n)


def dist_key(g: int, n: int) -> Key:
    return ("dsq", g, n)


def ipn_key(g: int, n: int) -> Key:
    return ("ipn", g, n)


@dataclass
class GpExpansionPoint:
    """Iterate around which the next GP approximation is built.

    All entries must be strictly positive (coordinates are in the shifted
    frame); `p_fixed` is the power schedule held constant by the trajectory
    subproblem.
    """

    q: np.ndarray              # (N+1, 2)
    dist_sq_bound: np.ndarray  # (G, N)
    ipn_bound: np.ndarray      # (G, N)
    p_fixed: np.ndarray        # (G, N)

    def validate(self) -> None:
        if (self.q <= 0).any():
            raise ExpansionError("expansion coordinates must be strictly positive")
        if (self.dist_sq_bound <= 0).any() or (self.ipn_bound <= 0).any():
            raise ExpansionError("expansion epigraph values must be strictly positive")
        if (self.p_fixed <= 0).any():
            raise ExpansionError("fixed powers must be strictly positive")

    def point(self) -> dict[Key, float]:
        """Plain {key: value} mapping for condensation and warm starts."""
        out: dict[Key, float] = {}
        for n in range(self.q.shape[0]):
            out[x_key(n)] = float(self.q[n, 0])
            out[y_key(n)] = float(self.q[n, 1])
        g_count, n_count = self.dist_sq_bound.shape
        for g in range(g_count):
            for n in range(1, n_count + 1):
                out[dist_key(g, n)] = float(self.dist_sq_bound[g, n - 1])
                out[ipn_key(g, n)] = float(self.ipn_bound[g, n - 1])
        return out


# ---------------------------------------------------------------------------
# Posynomial families.  Each *_parts function returns (numerator, denominator)
# of a ratio constraint num/den <= 1; the denominator is what gets condensed.
# ---------------------------------------------------------------------------

def step_ratio_parts(key_a: tuple[Key, Key], key_b: tuple[Key, Key],
                     step_sq: float) -> tuple[Posynomial, Posynomial]:
    """|a - b|^2 <= step_sq rearranged so both sides are posynomials.

    Used for the per-slot speed budget (b = previous breaking point) and for
    the online remaining-distance budget (b = final point).
    """
    xa, ya = key_a
    xb, yb = key_b
    num = Posynomial.of([
        Monomial.of(1.0, {xa: 2.0}),
        Monomial.of(1.0, {xb: 2.0}),
        Monomial.of(1.0, {ya: 2.0}),
        Monomial.of(1.0, {yb: 2.0}),
    ])
    den = Posynomial.of([
        Monomial.of(2.0, {xa: 1.0, xb: 1.0}),
        Monomial.of(2.0, {ya: 1.0, yb: 1.0}),
        Monomial.of(step_sq),
    ])
    return num, den


def speed_ratio_parts(n: int, s_max: float) -> tuple[Posynomial, Posynomial]:
    return step_ratio_parts((x_key(n), y_key(n)), (x_key(n - 1), y_key(n - 1)),
                            s_max ** 2)


def distance_ratio_parts(g: int, n: int, user_xy: np.ndarray,
                         altitude: float) -> tuple[Posynomial, Posynomial]:
    """altitude^2 + |q[n] - r|^2 <= dist_sq_bound for one user of group g.

    The user-position and altitude squares are constants; they are merged
    into a single numerator term (the posynomial value is unchanged).
    """
    ux, uy = float(user_xy[0]), float(user_xy[1])
    num = Posynomial.of([
        Monomial.of(1.0, {x_key(n): 2.0}),
        Monomial.of(1.0, {y_key(n): 2.0}),
        Monomial.of(ux ** 2 + uy ** 2 + altitude ** 2),
    ])
    den = Posynomial.of([
        Monomial.of(2.0 * ux, {x_key(n): 1.0}),
        Monomial.of(2.0 * uy, {y_key(n): 1.0}),
        Monomial.of(1.0, {dist_key(g, n): 1.0}),
    ])
    return num, den


def objective_denominator(g: int, n: int, p_fixed_gn: float,
                          ref_gain: float) -> Posynomial:
    """dist_sq_bound * ipn_bound + p_fixed * mu0 — the capacity-ratio denominator."""
    return Posynomial.of([
        Monomial.of(1.0, {dist_key(g, n): 1.0, ipn_key(g, n): 1.0}),
        Monomial.of(p_fixed_gn * ref_gain),
    ])


def gamma_monomial(g: int, n: int, p_fixed_gn: float, ref_gain: float,
                   expansion_point: dict[Key, float]) -> Monomial:
    """Condensed value of (L*Psi) / (L*Psi + p*mu0) as a monomial in (L, Psi)."""
    den = objective_denominator(g, n, p_fixed_gn, ref_gain)
    lead = Monomial.of(1.0, {dist_key(g, n): 1.0, ipn_key(g, n): 1.0})
    return lead * den.condense(expansion_point) ** -1.0


def interference_posynomial(g: int, n: int, interferer_power: float,
                            ref_gain: float, noise_power: float) -> Posynomial:
    """(mu0 * sum_interferer_p / L + sigma^2) / Psi <= 1.

    The representative gain is substituted by ref_gain / dist_sq_bound,
    which matches it exactly when the distance epigraph is tight.
    """
    terms = []
    if interferer_power > 0.0:
        terms.append(Monomial.of(ref_gain * interferer_power,
                                 {dist_key(g, n): -1.0, ipn_key(g, n): -1.0}))
    terms.append(Monomial.of(noise_power, {ipn_key(g, n): -1.0}))
    return Posynomial.of(terms)


def min_rate_posynomial(gamma: Monomial, min_rate_nats: float) -> Posynomial:
    """gamma * exp(C_rsv) <= 1, i.e. the condensed rate meets the reservation."""
    return Posynomial.of([gamma.scaled(math.exp(min_rate_nats))])


# ---------------------------------------------------------------------------
# Weight accessors.  These expose the condensation shares in the shapes the
# update loop logs and the tests check; they are the same numbers produced
# inside Posynomial.condense.
# ---------------------------------------------------------------------------

def _require_positive(*arrays: np.ndarray) -> None:
    for a in arrays:
        if (np.asarray(a) <= 0).any():
            raise ExpansionError("condensation weights need strictly positive inputs")


def speed_weights(expansion: GpExpansionPoint, s_max: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-slot shares of (2 x x', 2 y y', s_max^2) in their sum; rows n=1..N."""
    q = expansion.q
    _require_positive(q)
    x, y = q[:, 0], q[:, 1]
    tx = 2.0 * x[1:] * x[:-1]
    ty = 2.0 * y[1:] * y[:-1]
    tot = tx + ty + s_max ** 2
    return tx / tot, ty / tot, (s_max ** 2) / tot


def distance_epigraph_weights(expansion: GpExpansionPoint, g: int, n: int,
                              user_xy: np.ndarray) -> tuple[float, float, float]:
    """Shares of (2 x_q x_u, 2 y_q y_u, dist_sq_bound) at the expansion point."""
    qx, qy = float(expansion.q[n, 0]), float(expansion.q[n, 1])
    ux, uy = float(user_xy[0]), float(user_xy[1])
    lb = float(expansion.dist_sq_bound[g, n - 1])
    _require_positive(np.array([qx, qy, ux, uy, lb]))
    tx, ty = 2.0 * qx * ux, 2.0 * qy * uy
    tot = tx + ty + lb
    return tx / tot, ty / tot, lb / tot


def objective_term_weights(expansion: GpExpansionPoint,
                           ref_gain: float) -> tuple[np.ndarray, np.ndarray]:
    """Shares (nu, xi) of (L*Psi, p*mu0) in their sum; shape (G, N) each."""
    lp = expansion.dist_sq_bound * expansion.ipn_bound
    pm = expansion.p_fixed * ref_gain
    _require_positive(lp, pm)
    tot = lp + pm
    return lp / tot, pm / tot


# ---------------------------------------------------------------------------
# Scalar evaluators for condensed ratio constraints.
# ---------------------------------------------------------------------------

def condensed_ratio_value(num: Posynomial, den: Posynomial,
                          expansion_point: dict[Key, float],
                          point: dict[Key, float]) -> float:
    """Value of num * condense(den)^-1 at `point`; <= 1 is the constraint."""
    condensed = den.condense(expansion_point)
    return num.value(point) / condensed.value(point)


def exact_ratio_value(num: Posynomial, den: Posynomial,
                      point: dict[Key, float]) -> float:
    return num.value(point) / den.value(point)
