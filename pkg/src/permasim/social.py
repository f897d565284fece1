"""Reputation-based social trustworthiness layer.

Per-sensor feedback history combines a short-term (windowed) and a long-term
(lifetime) opinion with equal transaction weights.  Sensors start from a
neutral prior that decays as real evidence accumulates, so a single early
lost transaction cannot exile a healthy sensor; persistently misbehaving
sensors converge below the exclusion threshold and stay out.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

NEUTRAL = 0.5


class UnknownSensorError(KeyError):
    pass


@dataclass
class _History:
    window: deque
    win_sum: int = 0
    tot_sum: int = 0
    tot_cnt: int = 0


class ReputationTable:
    """Short/long-term opinion state for a set of sensors."""

    def __init__(self, window_w: int = 10, w_short: float = 0.5, w_long: float = 0.5,
                 theta: float = 0.4) -> None:
        if abs(w_short + w_long - 1.0) > 1e-12:
            raise ValueError("w_short + w_long must equal 1")
        if not 0.0 <= theta <= 1.0:
            raise ValueError("theta must be in [0, 1]")
        self.window_w = window_w
        self.w_short = w_short
        self.w_long = w_long
        self.theta = theta
        self._hist: dict[int, _History] = {}

    def register(self, sensor: int) -> None:
        if sensor not in self._hist:
            self._hist[sensor] = _History(deque(maxlen=self.window_w))

    def sensors(self) -> list[int]:
        return list(self._hist)

    def history_len(self, sensor: int) -> int:
        return self._h(sensor).tot_cnt

    def _h(self, sensor: int) -> _History:
        try:
            return self._hist[sensor]
        except KeyError:
            raise UnknownSensorError(f"sensor {sensor} is not registered") from None

    def record_feedback(self, sensor: int, outcome: int, now_us: int = 0) -> None:
        """Append one feedback bit (1 = positive).  Lost feedback messages must
        simply not reach this call; the table never sees them."""
        if outcome not in (0, 1):
            raise ValueError("outcome must be 0 or 1")
        h = self._h(sensor)
        if len(h.window) == h.window.maxlen:
            h.win_sum -= h.window[0]
        h.window.append(outcome)
        h.win_sum += outcome
        h.tot_sum += outcome
        h.tot_cnt += 1

    def reputation(self, sensor: int) -> float:
        """w_short * S + w_long * L, each backed by the neutral prior until the
        corresponding sample fills up."""
        h = self._h(sensor)
        w = self.window_w
        n_win = len(h.window)
        if n_win >= w:
            s = h.win_sum / w
        else:
            s = (h.win_sum + NEUTRAL * (w - n_win)) / w
        if h.tot_cnt >= w:
            lng = h.tot_sum / h.tot_cnt
        else:
            lng = (h.tot_sum + NEUTRAL * (w - h.tot_cnt)) / w
        return self.w_short * s + self.w_long * lng

    def trusted_set(self, cluster: Iterable[int], theta: Optional[float] = None) -> list[int]:
        """Sensors with reputation >= theta; never empty — if every sensor falls
        below the threshold, the single best one keeps the service alive."""
        members = list(cluster)
        if not members:
            raise ValueError("cluster must not be empty")
        th = self.theta if theta is None else theta
        reps = [(self.reputation(s), s) for s in members]
        kept = [s for r, s in reps if r >= th]
        if kept:
            return kept
        best = max(reps, key=lambda t: (t[0], -t[1]))
        return [best[1]]
