"""Certified Lipschitz bounds by activation-pattern search.

The upper bound maximizes the pattern-Jacobian norm over patterns whose
closed region meets the domain; the lower bound restricts to patterns with
a nonempty open region; the eps-margin value further demands region depth
at least eps. A full enumeration oracle and a pruned depth-first
branch-and-bound compute the same values; the eps-curve is the decreasing
envelope of (region depth, norm) pairs and is exact, with breakpoints
taken from the region depths themselves.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainEmptyError, EnumerationGuardError
from .network import ActivationPattern, InputDomain, MlpNetwork, _jacobian_from_bits
from .norms import check_norm_kind, operator_norm
from .regions import TAU_CLOSED, TAU_STRICT, domain_nonempty, max_slack, witness_at_level

INF = math.inf

# A node is value-pruned only when it cannot even tie the incumbent.
_PRUNE_MARGIN = 1e-12

# Brute-force enumeration refuses beyond this many hidden bits.
ENUMERATION_GUARD_BITS = 24


@dataclass
class SearchStats:
    nodes_explored: int = 0
    lp_calls: int = 0
    patterns_feasible: int = 0
    wall_time: float = field(default=0.0, compare=False)

    def merge(self, other: "SearchStats") -> None:
        self.nodes_explored += other.nodes_explored
        self.lp_calls += other.lp_calls
        self.patterns_feasible += other.patterns_feasible
        self.wall_time += other.wall_time


@dataclass(frozen=True)
class CurveSegment:
    """One step of the eps-curve: value holds on (previous end, eps_end]."""

    eps_end: float
    value: float
    empty: bool = False


@dataclass(eq=False)
class BoundsReport:
    """Bounds, eps-curve, argmax patterns and search statistics."""

    p: float
    upper: Optional[float] = None
    lower: Optional[float] = None
    lower_empty: bool = False
    eps_values: dict[float, float] = field(default_factory=dict)
    eps_empty: set[float] = field(default_factory=set)
    curve: Optional[list[CurveSegment]] = None
    argmax_upper: Optional[ActivationPattern] = None
    argmax_lower: Optional[ActivationPattern] = None
    eps_argmax: dict[float, ActivationPattern] = field(default_factory=dict)
    witness_x_lower: Optional[np.ndarray] = None
    stats: SearchStats = field(default_factory=SearchStats)

    def validate(self) -> None:
        if self.upper is not None and self.lower is not None:
            if self.lower > self.upper + 1e-9:
                raise AssertionError(f"lower {self.lower} exceeds upper {self.upper}")
        if self.curve is not None:
            values = [seg.value for seg in self.curve]
            if any(b > a for a, b in zip(values, values[1:])):
                raise AssertionError("curve values must be non-increasing")


@dataclass(frozen=True)
class PartialAssignment:
    """A branch-and-bound node: a prefix of pattern bits in layer-major order."""

    fixed_bits: tuple[int, ...]

    @property
    def depth(self) -> int:
        return len(self.fixed_bits)

    def complete_layers(self, hidden_widths: Sequence[int]) -> int:
        """Number of fully assigned hidden layers; trailing partial layers do not count."""
        if self.depth > sum(hidden_widths):
            raise ValueError("prefix longer than the total number of hidden bits")
        done, used = 0, 0
        for w in hidden_widths:
            if used + w <= self.depth:
                done += 1
                used += w
            else:
                break
        return done

    def layer_bits(self, hidden_widths: Sequence[int]) -> list[tuple[int, ...]]:
        out, pos = [], 0
        for w in hidden_widths:
            if pos + w > self.depth:
                break
            out.append(tuple(self.fixed_bits[pos : pos + w]))
            pos += w
        return out


def _prefix_matrix(net: MlpNetwork, layer_bits: Sequence[Sequence[int]]) -> np.ndarray:
    """diag(sigma_j) M_j ... diag(sigma_1) M_1 for the fixed prefix."""
    gate = np.asarray(layer_bits[0], dtype=float)
    G = gate[:, None] * net.layers[0].weights
    for k in range(1, len(layer_bits)):
        gate = np.asarray(layer_bits[k], dtype=float)
        G = gate[:, None] * (net.layers[k].weights @ G)
    return G


def _layer_norm_suffix(net: MlpNetwork, p) -> list[float]:
    """suffix[j] = product of ||M_k||_p over layers j..L (0-based j)."""
    norms = [operator_norm(layer.weights, p) for layer in net.layers]
    suffix = [1.0] * (len(norms) + 1)
    for j in range(len(norms) - 1, -1, -1):
        suffix[j] = norms[j] * suffix[j + 1]
    return suffix


def node_upper_bound(net: MlpNetwork, partial: PartialAssignment, p) -> float:
    """Upper bound on the pattern norm over all completions of the prefix.

    Gating never increases an induced norm and norms are submultiplicative,
    so the free layers contribute at most the product of their plain layer
    norms. A fully fixed prefix folds the output layer in and returns the
    exact pattern norm.
    """
    p = check_norm_kind(p)
    widths = net.hidden_widths
    j = partial.complete_layers(widths)
    suffix = _layer_norm_suffix(net, p)
    if j == 0:
        return suffix[0]
    G = _prefix_matrix(net, partial.layer_bits(widths))
    if j == net.depth - 1:
        return operator_norm(net.layers[-1].weights @ G, p)
    return suffix[j] * operator_norm(G, p)


# --- shared aggregation ----------------------------------------------------


def _accept_for_target(target) -> Callable[[float], bool]:
    """Monotone slack predicate for a search target.

    target is "upper" (closed regions), "lower" (strict regions), or a
    nonnegative float eps (margin at least eps; eps=0 behaves like
    "upper" per the closure tolerance).
    """
    if target == "upper":
        return lambda s: s >= TAU_CLOSED
    if target == "lower":
        return lambda s: s > TAU_STRICT
    eps = float(target)
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    if eps == 0.0:
        return lambda s: s >= TAU_CLOSED
    return lambda s: s >= eps


class _Best:
    """Running maximum with lexicographic tie-break on the pattern bits."""

    __slots__ = ("value", "flat")

    def __init__(self):
        self.value: Optional[float] = None
        self.flat: Optional[tuple[int, ...]] = None

    def offer(self, value: float, flat: tuple[int, ...]) -> None:
        if self.value is None or value > self.value or (value == self.value and flat < self.flat):
            self.value = value
            self.flat = flat


def _curve_from_points(points: dict[float, float]) -> list[CurveSegment]:
    """Decreasing step envelope of {region depth -> best norm at that depth}.

    Thresholds are the distinct depths of strictly feasible patterns; the
    value on (previous, s] is the best norm among depths >= s. A trailing
    empty segment is appended when no region extends to infinity.
    """
    if not points:
        return [CurveSegment(INF, 0.0, empty=True)]
    slacks = sorted(points)
    values = [0.0] * len(slacks)
    running = -INF
    for j in range(len(slacks) - 1, -1, -1):
        running = max(running, points[slacks[j]])
        values[j] = running
    segments: list[CurveSegment] = []
    for j, (s, v) in enumerate(zip(slacks, values)):
        if segments and segments[-1].value == v:
            segments[-1] = CurveSegment(s, v)
        else:
            segments.append(CurveSegment(s, v))
    if slacks[-1] != INF:
        segments.append(CurveSegment(INF, 0.0, empty=True))
    return segments


def _lower_witness(net, flat, widths, domain) -> np.ndarray:
    sigma = ActivationPattern.from_flat(widths, flat)
    res = max_slack(net, sigma, domain)
    if res.status == "bounded":
        return np.array(res.witness)
    return witness_at_level(net, sigma, domain, 1.0)


# --- brute-force oracle ----------------------------------------------------


def brute_force_bounds(
    net: MlpNetwork,
    domain: InputDomain,
    p,
    eps_list: Sequence[float] = (),
    *,
    threads: int = 1,
) -> BoundsReport:
    """Enumerate every pattern, solve its slack LP, and aggregate all bounds.

    The oracle for the branch-and-bound. Refuses networks with more than
    ENUMERATION_GUARD_BITS hidden neurons.
    """
    p = check_norm_kind(p)
    eps_list = [float(e) for e in eps_list]
    if any(e < 0 for e in eps_list):
        raise ValueError("eps values must be nonnegative")
    nbits = net.total_hidden_bits
    if nbits > ENUMERATION_GUARD_BITS:
        raise EnumerationGuardError(
            f"{nbits} hidden bits exceed the enumeration guard ({ENUMERATION_GUARD_BITS})"
        )
    if not domain_nonempty(domain, net.input_dim):
        raise DomainEmptyError("input domain is empty")
    t0 = time.perf_counter()
    stats = SearchStats()
    widths = net.hidden_widths

    best_upper = _Best()
    best_lower = _Best()
    best_eps = {e: _Best() for e in eps_list}
    accept_upper = _accept_for_target("upper")
    accept_lower = _accept_for_target("lower")
    accept_eps = {e: _accept_for_target(e) for e in eps_list}
    strict_points: dict[float, float] = {}

    def evaluate(flat: tuple[int, ...]):
        sigma = ActivationPattern.from_flat(widths, flat)
        res = max_slack(net, sigma, domain)
        norm = operator_norm(_jacobian_from_bits(net, sigma.bits), p)
        return flat, res.status, res.slack, norm

    def consume(flat, status, slack, norm):
        stats.lp_calls += 1
        stats.nodes_explored += 1
        if status == "infeasible":
            return
        if accept_upper(slack):
            stats.patterns_feasible += 1
            best_upper.offer(norm, flat)
        if accept_lower(slack):
            best_lower.offer(norm, flat)
            prev = strict_points.get(slack)
            if prev is None or norm > prev:
                strict_points[slack] = norm
        for e in eps_list:
            if accept_eps[e](slack):
                best_eps[e].offer(norm, flat)

    patterns = itertools.product((0, 1), repeat=nbits)
    if threads > 1:
        chunk = 256
        with ThreadPoolExecutor(max_workers=threads) as pool:
            while True:
                batch = list(itertools.islice(patterns, chunk))
                if not batch:
                    break
                for row in pool.map(evaluate, batch):
                    consume(*row)
    else:
        for flat in patterns:
            consume(*evaluate(flat))

    report = BoundsReport(p=p, stats=stats)
    report.upper = best_upper.value
    report.argmax_upper = (
        ActivationPattern.from_flat(widths, best_upper.flat) if best_upper.flat is not None else None
    )
    if best_lower.value is None:
        report.lower = 0.0
        report.lower_empty = True
    else:
        report.lower = best_lower.value
        report.argmax_lower = ActivationPattern.from_flat(widths, best_lower.flat)
        report.witness_x_lower = _lower_witness(net, best_lower.flat, widths, domain)
        stats.lp_calls += 1
    for e in eps_list:
        b = best_eps[e]
        if b.value is None:
            report.eps_values[e] = 0.0
            report.eps_empty.add(e)
        else:
            report.eps_values[e] = b.value
            report.eps_argmax[e] = ActivationPattern.from_flat(widths, b.flat)
    report.curve = _curve_from_points(strict_points)
    stats.wall_time = time.perf_counter() - t0
    report.validate()
    return report


# --- branch and bound ------------------------------------------------------


def _layer_boundaries(hidden_widths: Sequence[int]) -> dict[int, int]:
    """depth -> number of complete layers at that depth."""
    out, pos = {}, 0
    for j, w in enumerate(hidden_widths, start=1):
        pos += w
        out[pos] = j
    return out


def _bnb_search(
    net: MlpNetwork,
    domain: Optional[InputDomain],
    p,
    accept: Callable[[float], bool],
    stats: SearchStats,
) -> _Best:
    """Depth-first search over patterns, branching bit 1 before bit 0.

    Prefix feasibility is checked with the slack LP of the completely
    fixed layers whenever a layer fills up; subtrees are value-pruned
    against the incumbent with node_upper_bound. domain=None skips all
    feasibility work (the unconstrained problem).
    """
    widths = net.hidden_widths
    nbits = sum(widths)
    boundaries = _layer_boundaries(widths)
    suffix = _layer_norm_suffix(net, p)
    L = net.depth
    best = _Best()
    bits: list[int] = []

    def recurse():
        stats.nodes_explored += 1
        depth = len(bits)
        j = boundaries.get(depth)
        if depth == nbits:
            flat = tuple(bits)
            sigma = ActivationPattern.from_flat(widths, flat)
            if domain is not None:
                stats.lp_calls += 1
                res = max_slack(net, sigma, domain)
                if res.status == "infeasible" or not accept(res.slack):
                    return
            stats.patterns_feasible += 1
            norm = operator_norm(net.layers[-1].weights @ _prefix_matrix(net, sigma.bits), p)
            best.offer(norm, flat)
            return
        if j is not None and j >= 1:
            partial = PartialAssignment(tuple(bits))
            layer_bits = partial.layer_bits(widths)
            G = _prefix_matrix(net, layer_bits)
            node_ub = suffix[j] * operator_norm(G, p)
            if best.value is not None and node_ub <= best.value - _PRUNE_MARGIN:
                return
            if domain is not None:
                stats.lp_calls += 1
                sigma = ActivationPattern.from_flat(widths, tuple(bits) + (0,) * (nbits - depth))
                res = max_slack(net, sigma, domain, layers=j)
                if res.status == "infeasible" or not accept(res.slack):
                    return
        for b in (1, 0):
            bits.append(b)
            recurse()
            bits.pop()

    recurse()
    return best


def branch_and_bound(net: MlpNetwork, domain: InputDomain, p, target) -> BoundsReport:
    """Single-target search; agrees with brute_force_bounds on its target.

    target: "upper", "lower", or a nonnegative eps value.
    """
    p = check_norm_kind(p)
    accept = _accept_for_target(target)
    if not domain_nonempty(domain, net.input_dim):
        raise DomainEmptyError("input domain is empty")
    t0 = time.perf_counter()
    stats = SearchStats(lp_calls=1)  # the nonemptiness probe
    best = _bnb_search(net, domain, p, accept, stats)
    widths = net.hidden_widths
    report = BoundsReport(p=p, stats=stats)
    if target == "upper":
        report.upper = best.value
        report.argmax_upper = (
            ActivationPattern.from_flat(widths, best.flat) if best.flat is not None else None
        )
    elif target == "lower":
        if best.value is None:
            report.lower = 0.0
            report.lower_empty = True
        else:
            report.lower = best.value
            report.argmax_lower = ActivationPattern.from_flat(widths, best.flat)
            report.witness_x_lower = _lower_witness(net, best.flat, widths, domain)
            stats.lp_calls += 1
    else:
        e = float(target)
        if best.value is None:
            report.eps_values[e] = 0.0
            report.eps_empty.add(e)
        else:
            report.eps_values[e] = best.value
            report.eps_argmax[e] = ActivationPattern.from_flat(widths, best.flat)
    stats.wall_time = time.perf_counter() - t0
    report.validate()
    return report


def unconstrained_bound(net: MlpNetwork, p) -> float:
    """max over all patterns of the pattern norm, ignoring region feasibility.

    This is the chain-rule relaxation bound: dropping the membership
    constraint makes every binary gate assignment admissible.
    """
    p = check_norm_kind(p)
    stats = SearchStats()
    best = _bnb_search(net, None, p, lambda s: True, stats)
    return float(best.value)


def _frontier_curve(
    net: MlpNetwork, domain: InputDomain, p, stats: SearchStats
) -> list[CurveSegment]:
    """Exact eps-curve by DFS over strictly feasible patterns.

    Collects (region depth, norm) points; a subtree is pruned when its
    norm bound cannot exceed the envelope value already achieved at its
    prefix depth (everything it could add is dominated).
    """
    widths = net.hidden_widths
    nbits = sum(widths)
    boundaries = _layer_boundaries(widths)
    suffix = _layer_norm_suffix(net, p)
    points: dict[float, float] = {}
    bits: list[int] = []

    def envelope(s: float) -> Optional[float]:
        vals = [n for sl, n in points.items() if sl >= s]
        return max(vals) if vals else None

    def recurse():
        stats.nodes_explored += 1
        depth = len(bits)
        if depth == nbits:
            flat = tuple(bits)
            sigma = ActivationPattern.from_flat(widths, flat)
            stats.lp_calls += 1
            res = max_slack(net, sigma, domain)
            if res.status == "infeasible" or not res.slack > TAU_STRICT:
                return
            norm = operator_norm(net.layers[-1].weights @ _prefix_matrix(net, sigma.bits), p)
            prev = points.get(res.slack)
            if prev is None or norm > prev:
                points[res.slack] = norm
            return
        j = boundaries.get(depth)
        if j is not None and j >= 1:
            partial = PartialAssignment(tuple(bits))
            stats.lp_calls += 1
            sigma = ActivationPattern.from_flat(widths, tuple(bits) + (0,) * (nbits - depth))
            res = max_slack(net, sigma, domain, layers=j)
            if res.status == "infeasible" or not res.slack > TAU_STRICT:
                return
            G = _prefix_matrix(net, partial.layer_bits(widths))
            node_ub = suffix[j] * operator_norm(G, p)
            env = envelope(res.slack)
            if env is not None and node_ub <= env:
                return
        for b in (1, 0):
            bits.append(b)
            recurse()
            bits.pop()

    recurse()
    return _curve_from_points(points)


def compute_report(
    net: MlpNetwork,
    domain: InputDomain,
    p,
    eps_list: Sequence[float] = (),
    mode: str = "bnb",
    threads: int = 1,
) -> BoundsReport:
    """Full report (upper, lower, requested eps values, exact curve).

    mode="oracle" uses one exhaustive enumeration; mode="bnb" runs one
    pruned search per target plus a frontier search for the curve. Both
    produce identical values; only the statistics differ.
    """
    if mode == "oracle":
        return brute_force_bounds(net, domain, p, eps_list, threads=threads)
    if mode != "bnb":
        raise ValueError(f"unknown mode {mode!r}")
    eps_list = [float(e) for e in eps_list]
    t0 = time.perf_counter()
    up = branch_and_bound(net, domain, p, "upper")
    lo = branch_and_bound(net, domain, p, "lower")
    report = BoundsReport(p=up.p)
    report.upper = up.upper
    report.argmax_upper = up.argmax_upper
    report.lower = lo.lower
    report.lower_empty = lo.lower_empty
    report.argmax_lower = lo.argmax_lower
    report.witness_x_lower = lo.witness_x_lower
    report.stats.merge(up.stats)
    report.stats.merge(lo.stats)
    for e in eps_list:
        r = branch_and_bound(net, domain, p, e)
        report.eps_values[e] = r.eps_values[e]
        if e in r.eps_empty:
            report.eps_empty.add(e)
        if e in r.eps_argmax:
            report.eps_argmax[e] = r.eps_argmax[e]
        report.stats.merge(r.stats)
    curve_stats = SearchStats()
    report.curve = _frontier_curve(net, domain, p, curve_stats)
    report.stats.merge(curve_stats)
    report.stats.wall_time = time.perf_counter() - t0
    report.validate()
    return report


# --- serialization ---------------------------------------------------------


def _eps_key(e: float) -> str:
    return repr(float(e))


def _json_num(v: float):
    return "inf" if v == INF else v


def report_to_dict(report: BoundsReport, version: str | None = None, config=None) -> dict:
    """JSON-ready dict; infinities become the string "inf", wall time is
    dropped so identical inputs serialize to identical bytes."""

    def pattern(sig):
        return [list(layer) for layer in sig.bits] if sig is not None else None

    d = {
        "p": _json_num(report.p),
        "upper": report.upper,
        "lower": report.lower,
        "lower_empty": report.lower_empty,
        "eps_values": {_eps_key(e): v for e, v in report.eps_values.items()},
        "eps_empty": sorted(_eps_key(e) for e in report.eps_empty),
        "curve": None
        if report.curve is None
        else [
            {"eps": _json_num(seg.eps_end), "value": seg.value, **({"empty": True} if seg.empty else {})}
            for seg in report.curve
        ],
        "argmax_upper": pattern(report.argmax_upper),
        "argmax_lower": pattern(report.argmax_lower),
        "argmax_eps": {_eps_key(e): pattern(s) for e, s in report.eps_argmax.items()},
        "witness_x": None
        if report.witness_x_lower is None
        else [float(v) for v in report.witness_x_lower],
        "stats": {
            "nodes_explored": report.stats.nodes_explored,
            "lp_calls": report.stats.lp_calls,
            "patterns_feasible": report.stats.patterns_feasible,
        },
    }
    if version is not None:
        d["version"] = version
    if config is not None:
        d["config"] = config
    return d
