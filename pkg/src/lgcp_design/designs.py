"""Survey design generators: random, quasi-random, inhibitory, space-filling,
and rejection-thinned variants driven by an inclusion probability.

All generators work internally in the unit cube and scale to the target
domain; distance thresholds are therefore always in unit-cube scale. Every
generator is a pure function of its parameters and seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .domain import Domain, from_unit_cube, is_admissible, to_unit_cube, unit_cube
from .exceptions import DegenerateFieldError, InfeasibleDesignError, LgcpDesignError
from .gp_gaussian import prior_marginal_var

__all__ = [
    "Design",
    "InclusionProbability",
    "random_design",
    "halton",
    "sobol",
    "fibonacci_lattice_3d",
    "simple_inhibitory",
    "inhibitory_close_pairs",
    "min_dist_discrete",
    "coffee_house",
    "rejection_wrap",
    "space_fill_rejection",
    "inclusion_probability",
    "default_delta",
    "save_design",
    "load_design",
    "BASE_GENERATORS",
]

_PHI = (1.0 + np.sqrt(5.0)) / 2.0
MAX_CONSECUTIVE_REJECTIONS = 10**6
INHIBITORY_FAIL_LIMIT = 10**5
INHIBITORY_MAX_RESTARTS = 20


@dataclass(frozen=True)
class Design:
    """An ordered set of sampling locations with generator provenance."""

    points: np.ndarray = field(repr=False)  # (n, 3), domain coordinates
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.points.shape[0]


def default_delta(n: int) -> float:
    """Inhibitory distance threshold for a design size, interpolated in 1/sqrt(n).

    Anchored at (50, 0.21), (100, 0.15), (150, 0.1).
    """
    xs = 1.0 / np.sqrt(np.array([150.0, 100.0, 50.0]))
    ys = np.array([0.10, 0.15, 0.21])
    return float(np.interp(1.0 / np.sqrt(n), xs, ys))


# ----------------------------------------------------------------------
# proposal streams (unit-cube points, lazily indexed)


def _van_der_corput(i: int, base: int) -> float:
    v, denom = 0.0, 1.0
    while i > 0:
        denom *= base
        i, rem = divmod(i, base)
        v += rem / denom
    return v


def _halton_point(i: int) -> np.ndarray:
    # index starts at 1: base-2 sequence begins 1/2, 1/4, 3/4, ...
    return np.array([_van_der_corput(i + 1, b) for b in (2, 3, 5)])


def _uniform_stream(seed, n_hint):
    rng = np.random.default_rng(seed)
    while True:
        yield rng.random(3)


def _halton_stream(offset, n_hint):
    i = offset
    while True:
        yield _halton_point(i)
        i += 1


def _sobol_stream(offset, n_hint):
    gen = qmc.Sobol(d=3, scramble=False)
    if offset:
        gen.fast_forward(offset)
    while True:
        for u in gen.random(256):
            yield u


def _fibonacci_stream(offset, n_hint):
    # rank-1 golden-ratio lattice; first axis strides 1/n_hint
    g = np.array([1.0 / max(n_hint, 1), 1.0 / _PHI, 1.0 / _PHI**2])
    i = offset
    while True:
        yield np.mod((i + 0.5) * g, 1.0)
        i += 1


def _admissible_stream(stream, domain):
    """Filter a unit-cube stream down to admissible domain points."""
    misses = 0
    for u in stream:
        p = from_unit_cube(u, domain)
        if is_admissible(p, domain):
            misses = 0
            yield p
        else:
            misses += 1
            if misses >= MAX_CONSECUTIVE_REJECTIONS:
                raise InfeasibleDesignError(
                    "mask rejected 10^6 consecutive proposals"
                )


def _make_stream(name, domain, seed, offset, n_hint):
    if name == "random":
        raw = _uniform_stream(seed, n_hint)
    elif name == "halton":
        raw = _halton_stream(offset, n_hint)
    elif name == "sobol":
        raw = _sobol_stream(offset, n_hint)
    elif name == "fibonacci":
        raw = _fibonacci_stream(offset, n_hint)
    else:
        raise LgcpDesignError(f"unknown base generator {name!r}")
    return _admissible_stream(raw, domain)


BASE_GENERATORS = ("random", "halton", "sobol", "fibonacci")


def _take(stream, n):
    return np.array([next(stream) for _ in range(n)])


# ----------------------------------------------------------------------
# plain generators


def random_design(n: int, domain: Domain | None = None, seed=0) -> Design:
    """n points uniform over the admissible region of the domain."""
    domain = domain or unit_cube()
    pts = _take(_make_stream("random", domain, seed, 0, n), n)
    return Design(pts, {"generator": "random", "n": n, "seed": seed})


def halton(n: int, offset: int = 0, domain: Domain | None = None) -> Design:
    """First n admissible points of the 3-D Halton sequence (bases 2, 3, 5)."""
    domain = domain or unit_cube()
    pts = _take(_make_stream("halton", domain, None, offset, n), n)
    return Design(pts, {"generator": "halton", "n": n, "offset": offset})


def sobol(n: int, offset: int = 0, domain: Domain | None = None) -> Design:
    """First n admissible points of the 3-D Sobol sequence."""
    domain = domain or unit_cube()
    pts = _take(_make_stream("sobol", domain, None, offset, n), n)
    return Design(pts, {"generator": "sobol", "n": n, "offset": offset})


def fibonacci_lattice_3d(n: int, domain: Domain | None = None) -> Design:
    """Deterministic golden-ratio rank-1 lattice of n points."""
    domain = domain or unit_cube()
    pts = _take(_make_stream("fibonacci", domain, None, 0, n), n)
    return Design(pts, {"generator": "fibonacci", "n": n})


def _unit_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1))


def simple_inhibitory(n: int, delta: float, domain: Domain | None = None, seed=0) -> Design:
    """Sequential random design with pairwise unit-cube distance >= delta."""
    domain = domain or unit_cube()
    if delta <= 0:
        raise LgcpDesignError("delta must be positive")
    rng = np.random.default_rng(seed)
    for _restart in range(INHIBITORY_MAX_RESTARTS):
        accepted: list[np.ndarray] = []
        failures = 0
        while len(accepted) < n:
            u = rng.random(3)
            p = from_unit_cube(u, domain)
            ok = is_admissible(p, domain)
            if ok and accepted:
                d = np.sqrt(np.sum((np.array(accepted) - u) ** 2, axis=1))
                ok = bool(np.min(d) >= delta)
            if ok:
                accepted.append(u)
                failures = 0
            else:
                failures += 1
                if failures >= INHIBITORY_FAIL_LIMIT:
                    break
        if len(accepted) == n:
            pts = from_unit_cube(np.array(accepted), domain)
            return Design(
                pts,
                {"generator": "min_dran", "n": n, "delta": delta, "seed": seed},
            )
    raise InfeasibleDesignError(
        f"could not pack {n} points at threshold {delta} after "
        f"{INHIBITORY_MAX_RESTARTS} restarts"
    )


def inhibitory_close_pairs(
    n: int, k: int, delta: float, domain: Domain | None = None, seed=0
) -> Design:
    """Inhibitory design of n-k parents plus k clustered close-pair points.

    Parents use the inflated threshold delta_k = delta * sqrt(n / (n - k));
    each close-pair point lies within delta_k / 2 of a random parent.
    """
    domain = domain or unit_cube()
    if not 0 < k < n:
        raise LgcpDesignError("need 0 < k < n")
    delta_k = delta * np.sqrt(n / (n - k))
    parents = simple_inhibitory(n - k, delta_k, domain, seed)
    parent_u = to_unit_cube(parents.points, domain)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    close: list[np.ndarray] = []
    failures = 0
    while len(close) < k:
        parent = parent_u[rng.integers(len(parent_u))]
        # uniform in the delta_k/2 ball around the parent
        v = rng.standard_normal(3)
        v *= (delta_k / 2.0) * rng.random() ** (1.0 / 3.0) / np.linalg.norm(v)
        u = parent + v
        p = from_unit_cube(u, domain)
        if np.all((u >= 0) & (u <= 1)) and is_admissible(p, domain):
            close.append(u)
            failures = 0
        else:
            failures += 1
            if failures >= MAX_CONSECUTIVE_REJECTIONS:
                raise InfeasibleDesignError("close-pair placement kept failing")
    pts = from_unit_cube(np.vstack([parent_u, np.array(close)]), domain)
    return Design(
        pts,
        {
            "generator": "close_pair",
            "n": n,
            "k": k,
            "delta": delta,
            "delta_k": delta_k,
            "seed": seed,
        },
    )


def min_dist_discrete(n: int, delta: float, grid, seed=0) -> Design:
    """Inhibitory design with proposals drawn from grid cell centers.

    Proposals are taken uniformly without replacement; a cell is accepted if
    its unit-cube distance to every accepted point is at least delta.
    """
    if grid.N < n:
        raise LgcpDesignError("grid has fewer cells than the design size")
    domain = grid.domain
    cells_u = to_unit_cube(grid.cells, domain)
    rng = np.random.default_rng(seed)
    for _restart in range(INHIBITORY_MAX_RESTARTS):
        order = rng.permutation(grid.N)
        accepted: list[int] = []
        for idx in order:
            u = cells_u[idx]
            if accepted:
                d = np.sqrt(np.sum((cells_u[accepted] - u) ** 2, axis=1))
                if np.min(d) < delta:
                    continue
            accepted.append(int(idx))
            if len(accepted) == n:
                pts = grid.cells[accepted]
                return Design(
                    pts,
                    {"generator": "min_dist", "n": n, "delta": delta, "seed": seed},
                )
    raise InfeasibleDesignError(
        f"no admissible cell packing of size {n} at threshold {delta}"
    )


def _maximin_order_start(candidates_u: np.ndarray, start_u: np.ndarray) -> np.ndarray:
    """Candidate indices ordered by distance to the start corner (ties: lowest index)."""
    d = np.sqrt(np.sum((candidates_u - start_u) ** 2, axis=1))
    return np.argsort(d, kind="stable")


def coffee_house(
    n: int,
    candidates: np.ndarray,
    start: np.ndarray | None = None,
    domain: Domain | None = None,
) -> Design:
    """Greedy deterministic maximin (coffee-house) selection from candidates.

    Starts at the candidate nearest ``start`` (default: domain lower corner),
    then repeatedly adds the candidate maximizing the minimum distance to the
    selected set. Ties break to the lowest candidate index.
    """
    domain = domain or unit_cube()
    cand = np.atleast_2d(np.asarray(candidates, dtype=float))
    if cand.shape[0] < n:
        raise LgcpDesignError("fewer candidates than requested design size")
    cand_u = to_unit_cube(cand, domain)
    start_u = to_unit_cube(start, domain) if start is not None else np.zeros(3)
    first = int(_maximin_order_start(cand_u, start_u)[0])
    selected = [first]
    mindist = np.sqrt(np.sum((cand_u - cand_u[first]) ** 2, axis=1))
    mindist[first] = -np.inf
    while len(selected) < n:
        nxt = int(np.argmax(mindist))
        selected.append(nxt)
        d = np.sqrt(np.sum((cand_u - cand_u[nxt]) ** 2, axis=1))
        mindist = np.minimum(mindist, d)
        mindist[nxt] = -np.inf
    return Design(cand[selected], {"generator": "space_fill", "n": n})


# ----------------------------------------------------------------------
# inclusion probabilities


@dataclass(frozen=True)
class InclusionProbability:
    """Per-location acceptance probability for rejection thinning.

    Variants:
      - "scaled_latent_mean": min-max normalized latent prior/posterior mean
      - "expected_intensity": exp(mu + 2 sigma^2), scaled so the grid max is 1
      - "truncated_expected_intensity": min(p_max, exp(mu + 2 sigma^2)) / grid max
      - "constant": fixed probability (testing and degenerate thinning)
    """

    variant: str
    mean_fn: object = None
    var_fn: object = None
    p_max: float | None = None
    lo: float = 0.0
    normalizer: float = 1.0

    @classmethod
    def build(cls, variant, model, grid, p_max=None) -> "InclusionProbability":
        """Construct from a model's mean/variance fields, normalized over a grid.

        ``model`` is anything exposing mean_at/cov_at (a prior model or a
        posterior-conditioned one).
        """
        mean_fn = model.mean_at
        var_fn = lambda pts: prior_marginal_var(model, pts)  # noqa: E731
        mu = np.asarray(mean_fn(grid.cells), dtype=float)
        if variant == "scaled_latent_mean":
            lo, hi = float(np.min(mu)), float(np.max(mu))
            if hi == lo:
                raise DegenerateFieldError(
                    "latent mean is constant over the grid; min-max scaling undefined"
                )
            return cls(variant, mean_fn, var_fn, None, lo, hi - lo)
        if variant in ("expected_intensity", "truncated_expected_intensity"):
            v = np.exp(mu + 2.0 * np.asarray(var_fn(grid.cells), dtype=float))
            normalizer = float(np.max(v))
            if variant == "expected_intensity":
                return cls(variant, mean_fn, var_fn, None, 0.0, normalizer)
            if p_max is None or not 0.0 < p_max <= 1.0:
                raise LgcpDesignError("truncated variant needs p_max in (0, 1]")
            return cls(variant, mean_fn, var_fn, float(p_max), 0.0, normalizer)
        raise LgcpDesignError(f"unknown inclusion-probability variant {variant!r}")

    @classmethod
    def constant(cls, p: float) -> "InclusionProbability":
        if not 0.0 <= p <= 1.0:
            raise LgcpDesignError("constant probability must lie in [0, 1]")
        return cls("constant", p_max=p)

    def at(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.variant == "constant":
            out = np.full(pts.shape[0], self.p_max)
        elif self.variant == "scaled_latent_mean":
            mu = np.asarray(self.mean_fn(pts), dtype=float)
            out = np.clip((mu - self.lo) / self.normalizer, 0.0, 1.0)
        else:
            mu = np.asarray(self.mean_fn(pts), dtype=float)
            s2 = np.asarray(self.var_fn(pts), dtype=float)
            v = np.exp(mu + 2.0 * s2)
            if self.variant == "truncated_expected_intensity":
                v = np.minimum(self.p_max, v)
            out = np.clip(v / self.normalizer, 0.0, 1.0)
        if np.asarray(points).ndim == 1:
            return out[0]
        return out


def inclusion_probability(point, incl: InclusionProbability):
    """Inclusion probability of a single point (or array of points)."""
    return incl.at(point)


# ----------------------------------------------------------------------
# rejection thinning


def rejection_wrap(
    base: str,
    incl: InclusionProbability,
    n: int,
    domain: Domain | None = None,
    seed=0,
    max_attempts: int | None = None,
    offset: int = 0,
) -> Design:
    """Thin a base proposal stream with an inclusion probability.

    Proposals come from one of the stream-based generators ("random",
    "halton", "sobol", "fibonacci"); each admissible proposal is accepted
    independently with its inclusion probability until n points are kept.
    With p = 1 everywhere, the output equals the plain base design.
    """
    domain = domain or unit_cube()
    if max_attempts is None:
        max_attempts = 1000 * n
    if max_attempts < n:
        raise LgcpDesignError("max_attempts must be at least n")
    stream = _make_stream(base, domain, seed, offset, n)
    accept_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    accepted: list[np.ndarray] = []
    accepted_idx: list[int] = []
    for j in range(max_attempts):
        p = next(stream)
        prob = float(incl.at(p))
        if accept_rng.random() < prob or prob >= 1.0:
            accepted.append(p)
            accepted_idx.append(j)
            if len(accepted) == n:
                return Design(
                    np.array(accepted),
                    {
                        "generator": f"{base}+rejection",
                        "base": base,
                        "n": n,
                        "seed": seed,
                        "offset": offset,
                        "incl_variant": incl.variant,
                        "accepted_proposals": accepted_idx,
                    },
                )
    raise InfeasibleDesignError(
        f"rejection budget of {max_attempts} proposals exhausted "
        f"({len(accepted)} of {n} accepted)"
    )


def space_fill_rejection(
    n: int,
    candidates: np.ndarray,
    incl: InclusionProbability,
    seed=0,
    start: np.ndarray | None = None,
    domain: Domain | None = None,
) -> Design:
    """Coffee-house selection with rejection thinning on discrete candidates.

    At each step the k-th-largest maximin candidate is proposed; rejection
    increments k, acceptance resets k to 1. The first point is proposed in
    order of distance from the start corner with the same rejection rule.
    With p = 1 everywhere this reproduces coffee_house exactly.
    """
    domain = domain or unit_cube()
    cand = np.atleast_2d(np.asarray(candidates, dtype=float))
    m = cand.shape[0]
    if m < n:
        raise LgcpDesignError("fewer candidates than requested design size")
    cand_u = to_unit_cube(cand, domain)
    start_u = to_unit_cube(start, domain) if start is not None else np.zeros(3)
    rng = np.random.default_rng(seed)

    selected: list[int] = []
    remaining = np.ones(m, dtype=bool)

    def try_order(order) -> int | None:
        for idx in order:
            if rng.random() < float(incl.at(cand[idx])):
                return int(idx)
        return None

    first = try_order(_maximin_order_start(cand_u, start_u))
    if first is None:
        raise InfeasibleDesignError("every candidate rejected for the first point")
    selected.append(first)
    remaining[first] = False
    mindist = np.sqrt(np.sum((cand_u - cand_u[first]) ** 2, axis=1))

    while len(selected) < n:
        pool = np.nonzero(remaining)[0]
        # k-th largest maximin value, ties to lowest candidate index
        order = pool[np.argsort(-mindist[pool], kind="stable")]
        nxt = try_order(order)
        if nxt is None:
            raise InfeasibleDesignError(
                "candidate pool exhausted by rejection before reaching n points"
            )
        selected.append(nxt)
        remaining[nxt] = False
        d = np.sqrt(np.sum((cand_u - cand_u[nxt]) ** 2, axis=1))
        mindist = np.minimum(mindist, d)
    return Design(
        cand[selected],
        {
            "generator": "space_fill+rejection",
            "n": n,
            "seed": seed,
            "incl_variant": incl.variant,
        },
    )


# ----------------------------------------------------------------------
# file formats


def save_design(design: Design, csv_path, provenance_path=None) -> None:
    """Write a design as CSV (header s1,s2,t) plus an optional provenance sidecar."""
    with open(csv_path, "w") as fh:
        fh.write("s1,s2,t\n")
        for p in design.points:
            fh.write(f"{p[0]:.17g},{p[1]:.17g},{p[2]:.17g}\n")
    if provenance_path is not None:
        with open(provenance_path, "w") as fh:
            for key, value in design.provenance.items():
                fh.write(f"{key} {json.dumps(value)}\n")


def load_design(csv_path, provenance_path=None) -> Design:
    """Read a design CSV written by save_design."""
    with open(csv_path) as fh:
        header = fh.readline().strip()
        if header != "s1,s2,t":
            raise LgcpDesignError(f"unexpected design CSV header: {header!r}")
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    provenance = {}
    if provenance_path is not None:
        with open(provenance_path) as fh:
            for line in fh:
                key, _, raw = line.partition(" ")
                provenance[key] = json.loads(raw)
    return Design(np.array(rows).reshape(-1, 3), provenance)
