"""Moving-window thresholds and rules-based pre-classification.

Positions are 1-based along a lightpath: component ``z_i`` sits between
readings ``x_{i-1}`` and ``x_i``; ``x_p`` is the reception flag.  Internally
arrays are 0-based, so ``arr[i - 1]`` holds the value for position ``i``.

The power change across an amplifier is its signed gain; for every other
component it is the absolute loss.  The source transponder is judged by the
distance of ``x_1`` from its launch set-point, like a loss element.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientHistory
from .monitoring import ALPHA, Deployment, MonitorSnapshot, add_jitter, assemble, masks, read_json, write_json
from .physical import FailureScenario, FailureType, PowerModel, ledger
from .provisioning import Lightpath
from .topology import ComponentGraph

DEFAULT_WINDOW = 50
RESOLUTION_DB = 0.01  # smallest margin; covers 4-decimal storage rounding


def _avg(values, keep):
    chosen = values[keep]
    return float(chosen.mean()) if chosen.size else float(values.mean())


def fit_change_thresholds(changes, normal, amplifier: bool) -> tuple[float, float]:
    """(delta, tau) from a window of power changes labeled normal/faulty.

    Raises InsufficientHistory (with unknown position) when either class is
    absent from the window.
    """
    changes = np.asarray(changes, dtype=float)
    normal = np.asarray(normal, dtype=bool)
    p, q = changes[normal], changes[~normal]
    if p.size == 0 or q.size == 0:
        raise InsufficientHistory(None, None)
    if amplifier:
        m_hat, m_bar = p.min(), q.max()
        delta = _avg(q, q < m_hat)
        tau = _avg(p, p > m_bar)
    else:
        m_hat, m_bar = p.max(), q.min()
        tau = _avg(q, q > m_hat)
        delta = _avg(p, p < m_bar)
    return min(delta, tau), tau


def fit_epsilon(powers, normal) -> float:
    powers = np.asarray(powers, dtype=float)
    normal = np.asarray(normal, dtype=bool)
    p, q = powers[normal], powers[~normal]
    if p.size == 0 or q.size == 0:
        raise InsufficientHistory(None, None)
    return _avg(p, p > q.max())


@dataclass
class History:
    """Last |T| labeled observations for every lightpath.

    Per lightpath, arrays have shape (T, p_l): ``powers`` are readings
    (ALPHA where no OPM), ``reading_ok`` is 1 when every component up to that
    reading was healthy, ``component_ok`` is 1 when the component itself was.
    """

    powers: list[np.ndarray]
    reading_ok: list[np.ndarray]
    component_ok: list[np.ndarray]

    @property
    def window(self) -> int:
        return self.powers[0].shape[0] if self.powers else 0


def affects(scenario: FailureScenario, lp: Lightpath) -> np.ndarray:
    """Boolean per position: the component at that position is failed for this lightpath."""
    failures = scenario.by_component()
    out = np.zeros(lp.length, dtype=bool)
    for pos, cid in enumerate(lp.components):
        f = failures.get(cid)
        if f is None:
            continue
        if f.type is FailureType.EXCESSIVE_FILTERING and f.wavelength != lp.wavelength:
            continue
        out[pos] = True
    return out


def collect_history(
    graph: ComponentGraph,
    lightpaths: list[Lightpath],
    deployment: Deployment,
    model: PowerModel,
    window: int = DEFAULT_WINDOW,
    rng=None,
    scenarios: list[FailureScenario] | None = None,
) -> History:
    """Simulate the last ``window`` observations of the network.

    Without ``scenarios`` every observation is failure-free operation.
    """
    rng = np.random.default_rng(rng)
    scenarios = scenarios if scenarios is not None else [FailureScenario()] * window
    lp_masks = masks(lightpaths, deployment)
    nominal = [ledger(lp, graph, None, model) for lp in lightpaths]
    powers = [np.empty((len(scenarios), lp.length)) for lp in lightpaths]
    reading_ok = [np.empty((len(scenarios), lp.length), dtype=bool) for lp in lightpaths]
    component_ok = [np.empty((len(scenarios), lp.length), dtype=bool) for lp in lightpaths]
    for t, scenario in enumerate(scenarios):
        raw, flags = [], []
        for l, lp in enumerate(lightpaths):
            hit = affects(scenario, lp)
            values, flag = ledger(lp, graph, scenario, model) if hit.any() else nominal[l]
            raw.append(values)
            flags.append(flag)
            component_ok[l][t] = ~hit
            reading_ok[l][t] = np.cumsum(hit) == 0
        snap = assemble(add_jitter(raw, model, rng), flags, lp_masks)
        for l in range(len(lightpaths)):
            powers[l][t] = snap.readings[l]
    return History(powers, reading_ok, component_ok)


@dataclass
class ThresholdTable:
    """Per-lightpath arrays of delta, tau and epsilon, indexed by position - 1."""

    lightpath_ids: list[int]
    delta: list[np.ndarray]
    tau: list[np.ndarray]
    epsilon: list[np.ndarray]
    fitted: list[np.ndarray]  # True where both classes were present in the window
    window: int = DEFAULT_WINDOW

    def to_dict(self) -> dict:
        def num(v):
            return None if not np.isfinite(v) else round(float(v), 6)

        entries = []
        for l, lid in enumerate(self.lightpath_ids):
            for i in range(len(self.delta[l])):
                entries.append(
                    {
                        "lightpath": lid,
                        "position": i + 1,
                        "delta": num(self.delta[l][i]),
                        "tau": num(self.tau[l][i]),
                        "epsilon": num(self.epsilon[l][i]),
                        "fitted": bool(self.fitted[l][i]),
                    }
                )
        return {"format": "roadm-rinn-thresholds/1", "window": self.window, "entries": entries}

    @classmethod
    def from_dict(cls, doc) -> "ThresholdTable":
        rows: dict[int, list] = {}
        for e in doc["entries"]:
            rows.setdefault(e["lightpath"], []).append(e)
        ids = list(rows)
        delta, tau, eps, fitted = [], [], [], []
        for lid in ids:
            entries = sorted(rows[lid], key=lambda e: e["position"])
            delta.append(np.array([_num(e["delta"], np.nan) for e in entries]))
            tau.append(np.array([_num(e["tau"], np.nan) for e in entries]))
            eps.append(np.array([_num(e["epsilon"], np.inf) for e in entries]))
            fitted.append(np.array([e["fitted"] for e in entries], dtype=bool))
        return cls(ids, delta, tau, eps, fitted, doc["window"])


def save_thresholds(table: ThresholdTable, path) -> None:
    write_json(path, table.to_dict())


def load_thresholds(path) -> ThresholdTable:
    return ThresholdTable.from_dict(read_json(path, "threshold table"))


def _num(v, default):
    return default if v is None else float(v)


def amplifier_mask(graph: ComponentGraph, lp: Lightpath) -> np.ndarray:
    """True at interior positions holding an amplifier."""
    comps = graph.components
    amp = np.array([comps[c].kind.is_amplifier for c in lp.components])
    amp[0] = amp[-1] = False
    return amp


def power_changes(powers: np.ndarray, launch: float, amp: np.ndarray) -> np.ndarray:
    """Power change across every component; NaN where a reading is missing.

    ``powers`` has shape (..., p); the result has the same shape with the
    receiver position left NaN.
    """
    p = amp.shape[0]
    out = np.full(powers.shape, np.nan)
    first = powers[..., 0]
    out[..., 0] = np.where(first != ALPHA, np.abs(first - launch), np.nan)
    prev, cur = powers[..., : p - 2], powers[..., 1 : p - 1]
    diff = cur - prev
    value = np.where(amp[1 : p - 1], diff, np.abs(diff))
    out[..., 1 : p - 1] = np.where((prev != ALPHA) & (cur != ALPHA), value, np.nan)
    return out


def fallback_thresholds(
    graph: ComponentGraph, lp: Lightpath, model: PowerModel
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thresholds from nominal component values and the jitter level."""
    comps = graph.components
    sigma = model.jitter_sigma_db
    a_change = max(3 * np.sqrt(2) * sigma, RESOLUTION_DB)
    a_launch = max(3 * sigma, RESOLUTION_DB)
    p = lp.length
    delta = np.full(p, np.nan)
    tau = np.full(p, np.nan)
    delta[0], tau[0] = a_launch, 2 * a_launch
    for pos in range(1, p - 1):
        comp = comps[lp.components[pos]]
        if comp.kind.is_amplifier:
            tau[pos] = comp.nominal - a_change
            delta[pos] = comp.nominal - 2 * a_change
        else:
            delta[pos] = comp.nominal + a_change
            tau[pos] = comp.nominal + 2 * a_change
    nominal, _ = ledger(lp, graph, None, model)
    eps = np.full(p, np.inf)  # the reception flag never clears upstream components
    eps[:-1] = nominal - max(3 * sigma, RESOLUTION_DB)
    return delta, tau, eps


def fit_thresholds(
    graph: ComponentGraph,
    lightpaths: list[Lightpath],
    history: History,
    model: PowerModel,
) -> ThresholdTable:
    """Fit every (lightpath, position); positions whose window lacks a class
    fall back to nominal-value thresholds."""
    out = ThresholdTable([lp.id for lp in lightpaths], [], [], [], [], history.window)
    comps = graph.components
    for l, lp in enumerate(lightpaths):
        delta, tau, eps = fallback_thresholds(graph, lp, model)
        fitted = np.zeros(lp.length, dtype=bool)
        powers = history.powers[l]
        amp = amplifier_mask(graph, lp)
        changes = power_changes(powers, comps[lp.components[0]].nominal, amp)
        for pos in range(lp.length - 1):
            seen = ~np.isnan(changes[:, pos])
            try:
                d, t = fit_change_thresholds(
                    changes[seen, pos],
                    history.component_ok[l][seen, pos],
                    bool(amp[pos]),
                )
            except InsufficientHistory:
                pass
            else:
                delta[pos], tau[pos] = d, t
                fitted[pos] = True
        for pos in range(lp.length - 1):
            seen = powers[:, pos] != ALPHA
            try:
                eps[pos] = fit_epsilon(powers[seen, pos], history.reading_ok[l][seen, pos])
            except InsufficientHistory:
                pass
        out.delta.append(delta)
        out.tau.append(tau)
        out.epsilon.append(eps)
        out.fitted.append(fitted)
    return out


@dataclass(frozen=True)
class SuspectPartition:
    all: frozenset[int]
    normal: frozenset[int]
    faulty: frozenset[int]
    suspect: frozenset[int]


class Reasoner:
    """Rules engine bound to one set of lightpaths and thresholds.

    Per-lightpath constants are precomputed so that :meth:`reason` is cheap
    enough to run once per sample.
    """

    def __init__(self, graph: ComponentGraph, lightpaths: list[Lightpath], thresholds: ThresholdTable):
        self.graph = graph
        self.lightpaths = lightpaths
        self.thresholds = thresholds
        comps = graph.components
        self._comp = [np.array(lp.components) for lp in lightpaths]
        self._amp = [amplifier_mask(graph, lp) for lp in lightpaths]
        self._launch = [comps[lp.components[0]].nominal for lp in lightpaths]
        self._all = frozenset(c for lp in lightpaths for c in lp.components)

    def reason(self, snapshot: MonitorSnapshot) -> SuspectPartition:
        normal: set[int] = set()
        faulty: set[int] = set()
        th = self.thresholds
        for l in range(len(self.lightpaths)):
            x = snapshot.readings[l]
            comp = self._comp[l]
            amp = self._amp[l]
            change = power_changes(x, self._launch[l], amp)
            seen = ~np.isnan(change)
            delta, tau = th.delta[l], th.tau[l]
            with np.errstate(invalid="ignore"):
                hi = seen & (change >= tau)
                lo = seen & (change < delta)
            normal.update(comp[(amp & hi) | (~amp & lo)].tolist())
            faulty.update(comp[(amp & lo) | (~amp & hi)].tolist())
            passing = np.flatnonzero(x >= th.epsilon[l])
            if passing.size:
                normal.update(comp[: passing[-1] + 1].tolist())
        faulty_f = frozenset(faulty)
        normal_f = frozenset(normal) - faulty_f
        return SuspectPartition(self._all, normal_f, faulty_f, self._all - normal_f - faulty_f)


def reason(
    graph: ComponentGraph,
    lightpaths: list[Lightpath],
    snapshot: MonitorSnapshot,
    thresholds: ThresholdTable,
) -> SuspectPartition:
    return Reasoner(graph, lightpaths, thresholds).reason(snapshot)
