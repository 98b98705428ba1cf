"""Iso-metric matching, hybrid composition, and energy-to-solution curves.

The questions answered here: how many clusters of one machine match a
reference machine's throughput (iso-performance), power draw (iso-power),
or aggregate last-level cache (iso-capacity); what a hybrid of one
reliable cluster plus n unreliable clusters delivers; and at what
convergence degradation the hybrid stops being cheaper in Joules.

The hybrid model is work-weighted: with a fraction ``alpha`` of the
iterations running on the reliable cluster and the rest spread over the
n unreliable clusters,

    G(n) = alpha * G_rel + (1 - alpha) * n * G_unrel
    P(n) = alpha * P_rel + (1 - alpha) * n * P_unrel

Both are affine in n, so every matching query inverts in closed form.
A time-weighted harmonic composition is available behind
``composition="harmonic"`` for sensitivity studies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import InfeasibleError, NoBreakEvenError
from .machine import PerfSample

__all__ = [
    "ISO_PERFORMANCE",
    "ISO_POWER",
    "ISO_CAPACITY",
    "HybridSystem",
    "IsoReport",
    "EtsPoint",
    "iso_performance_clusters",
    "iso_power_clusters",
    "iso_capacity_clusters",
    "hybrid_gflops",
    "hybrid_watts",
    "solve_hybrid_for_mode",
    "ets",
    "ets_curve",
    "breakeven_degradation",
]

ISO_PERFORMANCE = "iso_performance"
ISO_POWER = "iso_power"
ISO_CAPACITY = "iso_capacity"
_MODES = (ISO_PERFORMANCE, ISO_POWER, ISO_CAPACITY)

COMPOSITIONS = ("arithmetic", "harmonic")

# Stable column order for CSV emission of IsoReport rows.
ISO_REPORT_COLUMNS = [
    "mode",
    "cluster_count",
    "achieved_gflops",
    "achieved_watts",
    "perf_vs_ref",
    "power_vs_ref",
    "ref_perf_vs_target",
    "ref_power_vs_target",
    "efficiency_vs_ref",
]


def _positive(name: str, value: float) -> float:
    if value <= 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    return float(value)


def iso_performance_clusters(ref_gflops: float, target_cluster_gflops: float) -> float:
    """Cluster count matching the reference throughput."""
    return _positive("ref_gflops", ref_gflops) / _positive(
        "target_cluster_gflops", target_cluster_gflops
    )


def iso_power_clusters(ref_watts: float, target_cluster_watts: float) -> float:
    """Cluster count fitting the reference power budget."""
    return _positive("ref_watts", ref_watts) / _positive(
        "target_cluster_watts", target_cluster_watts
    )


def iso_capacity_clusters(ref_llc_bytes: float, target_llc_bytes: float) -> float:
    """Cluster count matching the reference last-level-cache capacity."""
    return _positive("ref_llc_bytes", ref_llc_bytes) / _positive(
        "target_llc_bytes", target_llc_bytes
    )


@dataclass
class HybridSystem:
    """One reliable cluster plus ``n_unreliable`` unreliable clusters.

    ``reliable``/``unreliable`` are per-cluster operating points; the
    reliable side executes the stabilizing fraction ``ss_fraction`` of the
    iterations.  Fractional cluster counts are first-class; rounding is an
    explicit, separate step.
    """

    reliable: PerfSample
    unreliable: PerfSample
    n_unreliable: float
    ss_fraction: float = 0.1
    composition: str = "arithmetic"

    def __post_init__(self) -> None:
        if not 0.0 < self.ss_fraction < 1.0:
            raise ValueError(f"ss_fraction must lie in (0, 1), got {self.ss_fraction}")
        if self.n_unreliable <= 0:
            raise ValueError(f"n_unreliable must be > 0, got {self.n_unreliable}")
        if self.composition not in COMPOSITIONS:
            raise ValueError(
                f"composition must be one of {COMPOSITIONS}, got {self.composition!r}"
            )

    def with_clusters(self, n_unreliable: float) -> "HybridSystem":
        return HybridSystem(
            self.reliable, self.unreliable, n_unreliable, self.ss_fraction, self.composition
        )


def hybrid_gflops(h: HybridSystem) -> float:
    alpha = h.ss_fraction
    g_rel = h.reliable.gflops
    g_unrel = h.n_unreliable * h.unreliable.gflops
    if h.composition == "arithmetic":
        return alpha * g_rel + (1.0 - alpha) * g_unrel
    return 1.0 / (alpha / g_rel + (1.0 - alpha) / g_unrel)


def hybrid_watts(h: HybridSystem) -> float:
    alpha = h.ss_fraction
    if h.composition == "arithmetic":
        return alpha * h.reliable.watts + (1.0 - alpha) * h.n_unreliable * h.unreliable.watts
    # Time-weighted average power: energy per unit work over time per unit work.
    g_rel = h.reliable.gflops
    g_unrel = h.n_unreliable * h.unreliable.gflops
    energy_per_work = alpha * h.reliable.watts / g_rel + (1.0 - alpha) * (
        h.n_unreliable * h.unreliable.watts
    ) / g_unrel
    time_per_work = alpha / g_rel + (1.0 - alpha) / g_unrel
    return energy_per_work / time_per_work


@dataclass
class IsoReport:
    """Outcome of one matching query, with the ratios the analyses quote."""

    mode: str
    cluster_count: float
    achieved_gflops: float | None = None
    achieved_watts: float | None = None
    ratios: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "cluster_count": self.cluster_count,
            "achieved_gflops": self.achieved_gflops,
            "achieved_watts": self.achieved_watts,
            "ratios": dict(self.ratios),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def csv_row(self) -> list[str]:
        flat = {
            "mode": self.mode,
            "cluster_count": self.cluster_count,
            "achieved_gflops": self.achieved_gflops,
            "achieved_watts": self.achieved_watts,
            **self.ratios,
        }
        return [
            "" if flat.get(col) is None else repr(flat[col]) if isinstance(flat.get(col), float) else str(flat[col])
            for col in ISO_REPORT_COLUMNS
        ]


def _ratios(g_hybrid: float, p_hybrid: float, ref: PerfSample) -> dict[str, float]:
    return {
        "perf_vs_ref": g_hybrid / ref.gflops,
        "power_vs_ref": p_hybrid / ref.watts,
        "ref_perf_vs_target": ref.gflops / g_hybrid,
        "ref_power_vs_target": ref.watts / p_hybrid,
        "efficiency_vs_ref": (g_hybrid / p_hybrid) / (ref.gflops / ref.watts),
    }


def hybrid_report(mode: str, h: HybridSystem, ref: PerfSample | None = None) -> IsoReport:
    """Evaluate a hybrid and package it with ratios against a reference.

    The reference defaults to the hybrid's own reliable cluster.
    """
    ref = ref if ref is not None else h.reliable
    g = hybrid_gflops(h)
    p = hybrid_watts(h)
    return IsoReport(
        mode=mode,
        cluster_count=h.n_unreliable,
        achieved_gflops=g,
        achieved_watts=p,
        ratios=_ratios(g, p, ref),
    )


def solve_hybrid_for_mode(
    mode: str,
    template: HybridSystem,
    ref: PerfSample | None = None,
    *,
    ref_llc_bytes: float | None = None,
    unreliable_llc_bytes: float | None = None,
) -> IsoReport:
    """Solve for the unreliable cluster count that meets a matching target.

    iso_performance and iso_power invert the affine (or harmonic) hybrid
    model against ``ref``'s GFLOPS or watts; iso_capacity divides the LLC
    byte counts.  ``template.n_unreliable`` is ignored.  Raises
    :class:`InfeasibleError` when the reliable share alone already exceeds
    the target.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    ref = ref if ref is not None else template.reliable
    alpha = template.ss_fraction
    g_rel, p_rel = template.reliable.gflops, template.reliable.watts
    g_unrel, p_unrel = template.unreliable.gflops, template.unreliable.watts

    if mode == ISO_CAPACITY:
        if ref_llc_bytes is None or unreliable_llc_bytes is None:
            raise ValueError("iso_capacity requires ref_llc_bytes and unreliable_llc_bytes")
        n = iso_capacity_clusters(ref_llc_bytes, unreliable_llc_bytes)
    elif template.composition == "arithmetic":
        if mode == ISO_PERFORMANCE:
            surplus = ref.gflops - alpha * g_rel
            if surplus <= 0:
                raise InfeasibleError(
                    f"reliable share alone delivers {alpha * g_rel} GFLOPS, "
                    f"already at or above the {ref.gflops} GFLOPS target"
                )
            n = surplus / ((1.0 - alpha) * g_unrel)
        else:
            surplus = ref.watts - alpha * p_rel
            if surplus <= 0:
                raise InfeasibleError(
                    f"reliable share alone draws {alpha * p_rel} W, "
                    f"already at or above the {ref.watts} W budget"
                )
            n = surplus / ((1.0 - alpha) * p_unrel)
    else:
        if mode == ISO_PERFORMANCE:
            slack = 1.0 / ref.gflops - alpha / g_rel
            if slack <= 0:
                raise InfeasibleError("reliable share alone meets the throughput target")
            n = (1.0 - alpha) / (g_unrel * slack)
        else:
            energy_per_work = alpha * p_rel / g_rel + (1.0 - alpha) * p_unrel / g_unrel
            slack = energy_per_work / ref.watts - alpha / g_rel
            if slack <= 0:
                raise InfeasibleError("reliable share alone exhausts the power budget")
            n = (1.0 - alpha) / (g_unrel * slack)

    return hybrid_report(mode, template.with_clusters(n), ref)


@dataclass(frozen=True)
class EtsPoint:
    """Energy to solution at one degradation level."""

    degradation: float  # fraction of extra iterations, >= 0
    ets_joules: float


def ets(flops_total: float, gflops: float, watts: float) -> float:
    """Joules to execute ``flops_total`` at the given rate and power."""
    _positive("flops_total", flops_total)
    _positive("gflops", gflops)
    _positive("watts", watts)
    return flops_total / (gflops * 1.0e9) * watts


def ets_curve(
    ref: PerfSample,
    h: HybridSystem,
    degradations,
    flops_total: float,
) -> list[tuple[EtsPoint, EtsPoint]]:
    """Reference and hybrid energy-to-solution at each degradation level.

    The reference runs fault-free, so its energy is flat in d; the hybrid
    pays (1 + d) times the iterations at unchanged per-iteration cost.
    """
    ref_ets = ets(flops_total, ref.gflops, ref.watts)
    base = ets(flops_total, hybrid_gflops(h), hybrid_watts(h))
    points = []
    for d in degradations:
        if d < 0:
            raise ValueError(f"degradation must be >= 0, got {d}")
        points.append((EtsPoint(d, ref_ets), EtsPoint(d, base * (1.0 + d))))
    return points


def breakeven_degradation(ref: PerfSample, h: HybridSystem) -> float:
    """Degradation at which the hybrid's energy equals the reference's.

    Solving ets_hybrid * (1 + d) = ets_ref gives
    d = (G_hybrid / G_ref) * (P_ref / P_hybrid) - 1.  Raises
    :class:`NoBreakEvenError` when the hybrid is never cheaper (d < 0).
    """
    g_h = hybrid_gflops(h)
    p_h = hybrid_watts(h)
    d = (g_h / ref.gflops) * (ref.watts / p_h) - 1.0
    if d < 0.0:
        # exact energy ties break even at zero; only a genuinely more
        # expensive hybrid has no break-even
        if d >= -1e-12:
            return 0.0
        raise NoBreakEvenError(
            f"hybrid energy ({ets(1e9, g_h, p_h):.4g} J/GFLOP) already exceeds "
            f"the reference ({ets(1e9, ref.gflops, ref.watts):.4g} J/GFLOP)"
        )
    return d
