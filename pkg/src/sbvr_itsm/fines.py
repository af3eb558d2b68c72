"""SLA fine computation from observed outages, and forecast-based SLA choice.

Periods have fixed lengths (Day 24h, Month 30d, Year 360d) and are aligned to
the Unix epoch. A horizon that only partly covers a period measures that
period over the covered part only, so every instant of the horizon falls in
exactly one measured segment.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from decimal import Decimal
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

from .tree import Period, SlaTerms

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
_MICRO = timedelta(microseconds=1)
_US_PER_SECOND = 1_000_000


def _ts(dt: datetime) -> int:
    """Microseconds since the epoch; naive datetimes are taken as UTC."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return (dt - EPOCH) // _MICRO


@dataclass(frozen=True)
class OutageEvent:
    start: datetime
    end: datetime

    def __post_init__(self):
        if not _ts(self.start) < _ts(self.end):
            raise ValueError("outage must start before it ends")


@dataclass(frozen=True)
class FineReport:
    first_failure_total: Decimal
    concurrent_failure_total: Decimal
    availability_total: Decimal

    @property
    def grand_total(self) -> Decimal:
        return self.first_failure_total + self.concurrent_failure_total + self.availability_total

    def as_tuple(self) -> Tuple[Decimal, Decimal, Decimal, Decimal]:
        return (self.first_failure_total, self.concurrent_failure_total,
                self.availability_total, self.grand_total)


def _clip(outages: Iterable[OutageEvent], lo: int, hi: int) -> List[Tuple[int, int]]:
    out = []
    for o in outages:
        s, e = max(_ts(o.start), lo), min(_ts(o.end), hi)
        if s < e:
            out.append((s, e))
    return out


def concurrent_count(intervals: Sequence[Tuple[int, int]]) -> int:
    """Outages that start while an earlier one is still open.

    Outages are ordered by (start, end); of two outages starting together the
    second counts as concurrent.
    """
    count = 0
    open_until = None
    for s, e in sorted(intervals):
        if open_until is not None and s < open_until:
            count += 1
        open_until = e if open_until is None else max(open_until, e)
    return count


def _union(intervals: Sequence[Tuple[int, int]]) -> List[Tuple[int, int]]:
    merged: List[List[int]] = []
    for s, e in sorted(intervals):
        if merged and s <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    return [(s, e) for s, e in merged]


def breached_periods(intervals: Sequence[Tuple[int, int]], lo: int, hi: int,
                     period: Period, min_percent: Decimal) -> int:
    length = period.seconds * _US_PER_SECOND
    downtime: Dict[int, int] = defaultdict(int)
    for s, e in _union(intervals):
        k = s // length
        while k * length < e:
            seg_lo, seg_hi = max(s, k * length), min(e, (k + 1) * length)
            downtime[k] += seg_hi - seg_lo
            k += 1
    threshold = Fraction(min_percent)
    breached = 0
    # a period without downtime is at 100% and can never be below min_percent
    for k, down in downtime.items():
        covered = min(hi, (k + 1) * length) - max(lo, k * length)
        percent = 100 * (1 - Fraction(down, covered))
        if percent < threshold:
            breached += 1
    return breached


def compute_fines(terms: SlaTerms, outages: Iterable[OutageEvent],
                  horizon: Tuple[datetime, datetime]) -> FineReport:
    lo, hi = _ts(horizon[0]), _ts(horizon[1])
    if lo >= hi:
        raise ValueError("horizon start must be before its end")
    intervals = _clip(outages, lo, hi)
    first = terms.first_failure_fine if intervals else Decimal(0)
    concurrent = terms.concurrent_failure_fine * concurrent_count(intervals)
    availability = Decimal(0)
    for clause in terms.availability_clauses:
        availability += clause.fine * breached_periods(intervals, lo, hi, clause.period, clause.min_percent)
    return FineReport(first, concurrent, availability)


# ---------------------------------------------------------------------------
# forecasting

@dataclass(frozen=True)
class AvailabilityForecast:
    expected_failures_per_year: float
    expected_availability_percent: Mapping[Period, float]

    def __post_init__(self):
        if self.expected_failures_per_year < 0:
            raise ValueError("expected_failures_per_year must be >= 0")
        for p, pct in self.expected_availability_percent.items():
            if not 0 <= pct <= 100:
                raise ValueError(f"availability for {p.label} outside 0..100")


def expected_cost(terms: SlaTerms, forecast: AvailabilityForecast, horizon_years: float) -> float:
    """Closed-form expected fines over ``horizon_years``.

    With ``lam`` expected failures, the first-failure fine is charged
    ``min(1, lam)`` times and the concurrent fine ``max(0, lam - 1)`` times;
    each availability clause is charged once per period whose forecast
    availability is below its minimum.
    """
    if horizon_years <= 0:
        raise ValueError("horizon_years must be > 0")
    lam = forecast.expected_failures_per_year * horizon_years
    cost = float(terms.first_failure_fine) * min(1.0, lam)
    cost += float(terms.concurrent_failure_fine) * max(0.0, lam - 1.0)
    for clause in terms.availability_clauses:
        try:
            pct = forecast.expected_availability_percent[clause.period]
        except KeyError:
            raise KeyError(f"forecast has no availability entry for {clause.period.label}") from None
        if pct < float(clause.min_percent):
            cost += float(clause.fine) * clause.period.per_year * horizon_years
    return cost


def optimal_sla(candidates: Sequence[Tuple[str, SlaTerms]], forecast: AvailabilityForecast,
                horizon_years: float) -> str:
    """Cheapest candidate by expected cost; ties go to lower total fines, then id."""
    if not candidates:
        raise ValueError("no candidates")
    ranked = min(
        candidates,
        key=lambda c: (expected_cost(c[1], forecast, horizon_years), c[1].total_fines, c[0]))
    return ranked[0]
