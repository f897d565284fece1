"""Configuration schema, grid construction, and sweep execution.

Config files are flat dotted-key text (``fault.pb0 = 0.01``); every violated
invariant is reported with the offending key, not just the first.  Sweeps are
a pure function of (configs, base seed): repetition r of a config runs with
master seed base_seed + r, and results are merged in grid order regardless of
how many worker processes executed them.
"""

from __future__ import annotations

import multiprocessing as mp
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

from . import metrics
from .metrics import GridSpec, RawRow, aggregate, export_mesh, export_raw
from .telemetry import MODE_LABELS, Layer, Mode, parse_mode, run_simulation

DEFAULT_BASE_SEED = 20260101


@dataclass(frozen=True)
class SimConfig:
    """One simulated run's full parameterisation (defaults are the shipped
    calibration; see README for the knob reference)."""

    mode: Mode = Mode(Layer.NONE, Layer.NONE)
    spots: int = 32
    redundancy: int = 3
    duration_days: float = 40.0
    period_s: float = 3600.0
    deadline_s: float = 86_400.0
    tolerance: float = 1.0

    pb0: float = 0.01
    degraded_fraction: float = 0.10
    degraded_rate: float = 0.65
    pb0_overrides: tuple = ()

    lora_capacity_bps: float = 180.0
    lora_base_loss: float = 0.05
    buffer_slots: int = 128
    report_bits: int = 800
    consensus_bits: int = 512
    feedback_bits: int = 512
    ack_bits: int = 256

    nvis_capacity_bps: float = 4800.0
    nvis_base_loss: float = 0.30
    nvis_availability: Optional[float] = None   # None: drawn per run in [0.7, 1.0]
    nvis_mean_down_s: float = 3600.0
    dtn_ttl_s: float = 86_400.0

    q_gen_rate: float = 10.0
    q_buffer_cap: int = 1000
    q_pairs_per_msg: int = 2
    q_p_channel: float = 0.8
    q_alpha: float = 1.2
    q_beta: float = 0.5
    q_rho: float = 0.25

    rep_window: int = 10
    rep_w_short: float = 0.5
    rep_w_long: float = 0.5
    rep_theta: float = 0.4

    consensus_timeout_s: float = 600.0
    consensus_max_retries: int = 2
    fqc_c: int = 4

    base_seed: int = DEFAULT_BASE_SEED
    reps: int = 10
    # sweep runs skip building per-transaction resolution objects and work
    # from the outcome counters; the arithmetic is identical
    keep_resolutions: bool = True


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


# dotted config key -> (attribute, parser)
def _float(v: str) -> float:
    return float(v)


def _int(v: str) -> int:
    return int(v)


def _opt_float(v: str) -> Optional[float]:
    return None if v.lower() in ("none", "draw") else float(v)


def _layer(v: str) -> Layer:
    try:
        return Layer(v.lower())
    except ValueError:
        raise ValueError(f"expected one of none/classical/quantum, got {v!r}")


KEY_MAP = {
    "mode.social": ("_social", _layer),
    "mode.consensus": ("_consensus", _layer),
    "topology.spots": ("spots", _int),
    "topology.redundancy": ("redundancy", _int),
    "duration.days": ("duration_days", _float),
    "duration.period_s": ("period_s", _float),
    "duration.deadline_s": ("deadline_s", _float),
    "fault.pb0": ("pb0", _float),
    "fault.degraded_fraction": ("degraded_fraction", _float),
    "fault.degraded_rate": ("degraded_rate", _float),
    "fault.tolerance": ("tolerance", _float),
    "net.lora.capacity_bps": ("lora_capacity_bps", _float),
    "net.lora.base_loss": ("lora_base_loss", _float),
    "net.buffer_slots": ("buffer_slots", _int),
    "net.sizes.report_bits": ("report_bits", _int),
    "net.sizes.consensus_bits": ("consensus_bits", _int),
    "net.sizes.feedback_bits": ("feedback_bits", _int),
    "net.sizes.ack_bits": ("ack_bits", _int),
    "net.nvis.capacity_bps": ("nvis_capacity_bps", _float),
    "net.nvis.base_loss": ("nvis_base_loss", _float),
    "net.nvis.availability": ("nvis_availability", _opt_float),
    "net.nvis.mean_down_s": ("nvis_mean_down_s", _float),
    "net.dtn.ttl_s": ("dtn_ttl_s", _float),
    "quantum.gen_rate": ("q_gen_rate", _float),
    "quantum.buffer_cap": ("q_buffer_cap", _int),
    "quantum.pairs_per_msg": ("q_pairs_per_msg", _int),
    "quantum.p_channel": ("q_p_channel", _float),
    "quantum.alpha": ("q_alpha", _float),
    "quantum.beta": ("q_beta", _float),
    "quantum.rho": ("q_rho", _float),
    "social.window": ("rep_window", _int),
    "social.w_short": ("rep_w_short", _float),
    "social.w_long": ("rep_w_long", _float),
    "social.theta": ("rep_theta", _float),
    "consensus.timeout_s": ("consensus_timeout_s", _float),
    "consensus.max_retries": ("consensus_max_retries", _int),
    "consensus.fqc_c": ("fqc_c", _int),
    "seed": ("base_seed", _int),
    "reps": ("reps", _int),
}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    kv: dict[str, str] = {}
    errors: list[str] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            errors.append(f"line {lineno}: expected 'key = value', got {body!r}")
            continue
        key, value = (part.strip() for part in body.split("=", 1))
        if key in kv:
            errors.append(f"line {lineno}: duplicate key {key!r}")
        kv[key] = value
    if errors:
        raise ConfigError(errors)
    return kv


def validate(kv: dict) -> SimConfig:
    """Apply dotted keys over the defaults, then check every invariant.

    All violations are reported together, each naming the offending key."""
    errors: list[str] = []
    fields: dict = {}
    social = Layer.NONE
    consensus = Layer.NONE
    for key, raw in kv.items():
        entry = KEY_MAP.get(key)
        if entry is None:
            errors.append(f"unknown key {key!r}")
            continue
        attr, parser = entry
        try:
            value = parser(str(raw))
        except ValueError as exc:
            errors.append(f"{key}: {exc}")
            continue
        if attr == "_social":
            social = value
        elif attr == "_consensus":
            consensus = value
        else:
            fields[attr] = value
    cfg = SimConfig(mode=Mode(social, consensus), **fields) if not errors else None
    if cfg is not None:
        errors.extend(check_invariants(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def check_invariants(cfg: SimConfig) -> list[str]:
    errors = []
    if not 0.0 <= cfg.pb0 <= 1.0:
        errors.append(f"fault.pb0: must be in [0, 1], got {cfg.pb0}")
    if not 0.0 <= cfg.degraded_fraction <= 1.0:
        errors.append("fault.degraded_fraction: must be in [0, 1]")
    if not 0.0 <= cfg.degraded_rate <= 1.0:
        errors.append("fault.degraded_rate: must be in [0, 1]")
    if cfg.spots < 1:
        errors.append("topology.spots: must be >= 1")
    if cfg.redundancy < 1:
        errors.append("topology.redundancy: must be >= 1")
    if cfg.duration_days <= 0:
        errors.append("duration.days: must be > 0")
    if cfg.period_s <= 0:
        errors.append("duration.period_s: must be > 0")
    if cfg.lora_capacity_bps <= 0:
        errors.append("net.lora.capacity_bps: must be > 0")
    if cfg.nvis_capacity_bps <= 0:
        errors.append("net.nvis.capacity_bps: must be > 0")
    if cfg.buffer_slots < 1:
        errors.append("net.buffer_slots: must be >= 1")
    if not 0.0 <= cfg.lora_base_loss <= 1.0:
        errors.append("net.lora.base_loss: must be in [0, 1]")
    if not 0.0 <= cfg.nvis_base_loss <= 1.0:
        errors.append("net.nvis.base_loss: must be in [0, 1]")
    if cfg.nvis_availability is not None and not 0.0 < cfg.nvis_availability <= 1.0:
        errors.append("net.nvis.availability: must be in (0, 1] or none")
    for name in ("report_bits", "consensus_bits", "feedback_bits", "ack_bits"):
        if getattr(cfg, name) <= 0:
            errors.append(f"net.sizes.{name}: must be > 0")
    if not 0.0 <= cfg.q_p_channel <= 1.0:
        errors.append("quantum.p_channel: must be in [0, 1]")
    if cfg.q_alpha < 1.0:
        errors.append("quantum.alpha: must be >= 1")
    if not 0.0 <= cfg.q_beta <= 1.0:
        errors.append("quantum.beta: must be in [0, 1]")
    if not 0.0 < cfg.q_rho <= 1.0:
        errors.append("quantum.rho: must be in (0, 1]")
    if abs(cfg.rep_w_short + cfg.rep_w_long - 1.0) > 1e-9:
        errors.append("social.w_short/social.w_long: must sum to 1")
    if not 0.0 <= cfg.rep_theta <= 1.0:
        errors.append("social.theta: must be in [0, 1]")
    if cfg.consensus_timeout_s <= 0:
        errors.append("consensus.timeout_s: must be > 0")
    if cfg.consensus_max_retries < 0:
        errors.append("consensus.max_retries: must be >= 0")
    if cfg.fqc_c < 1:
        errors.append("consensus.fqc_c: must be >= 1")
    if cfg.reps < 1:
        errors.append("reps: must be >= 1")
    return errors


def load_config(path: str) -> SimConfig:
    with open(path) as f:
        return validate(parse_config_text(f.read()))


PROFILES = {
    "desk": {"duration_days": 40.0, "reps": 10},
    "paper": {"duration_days": 400.0, "reps": 30},
}


def grid(kind: str, modes: Iterable[str] = MODE_LABELS, reps: Optional[int] = None,
         profile: str = "desk", base: Optional[SimConfig] = None,
         base_seed: Optional[int] = None) -> list[SimConfig]:
    """Config list for the use-case or extended parameter grid, in mesh order:
    mode, then pb0 from 1e-1 down to 1e-3, then 32xN before 64xN."""
    if kind == "usecase":
        y_points = metrics.USECASE_Y
    elif kind == "extended":
        y_points = metrics.EXTENDED_Y
    else:
        raise ValueError(f"unknown grid kind {kind!r}")
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    prof = PROFILES[profile]
    base = base if base is not None else SimConfig()
    base = replace(base, duration_days=prof["duration_days"],
                   reps=reps if reps is not None else prof["reps"],
                   base_seed=base_seed if base_seed is not None else base.base_seed)
    mode_objs = [parse_mode(m) for m in modes]
    configs = []
    for mode in mode_objs:
        for pb0 in metrics.USECASE_PB0:
            for spots, redundancy in y_points:
                configs.append(replace(base, mode=mode, pb0=pb0,
                                       spots=spots, redundancy=redundancy))
    return configs


OUTCOME_KEYS = ("success", "fail_wrong_value", "fail_deadline", "fail_no_delivery")


def run_one(cfg: SimConfig, rep: int) -> RawRow:
    seed = cfg.base_seed + rep
    stats = run_simulation(replace(cfg, keep_resolutions=False), seed)
    total = sum(stats.counters.get(k, 0) for k in OUTCOME_KEYS)
    if total == 0:
        raise metrics.MetricsError("run produced no transactions")
    str_value = stats.counters.get("success", 0) / total
    return RawRow(cfg.mode.label, cfg.pb0, cfg.spots, cfg.redundancy,
                  rep, seed, str_value)


def _worker(task: tuple[int, SimConfig, int]) -> tuple[int, int, RawRow]:
    idx, cfg, rep = task
    try:
        return idx, rep, run_one(cfg, rep)
    except Exception as exc:
        raise RuntimeError(
            f"run failed for mode={cfg.mode.label} pb0={cfg.pb0} "
            f"spots={cfg.spots} redundancy={cfg.redundancy} rep={rep} "
            f"seed={cfg.base_seed + rep}: {exc}") from exc


def sweep(configs: Sequence[SimConfig], jobs: int = 1,
          out_raw: Optional[str] = None, out_mesh: Optional[str] = None,
          grid_spec: Optional[GridSpec] = None,
          progress: Optional[callable] = None) -> tuple[list[RawRow], list]:
    """Execute every (config, rep) run and merge deterministically.

    The output is independent of `jobs`: results are placed by (config index,
    rep) and written in grid order, so parallel and serial sweeps produce
    byte-identical CSV files."""
    tasks = [(idx, cfg, rep)
             for idx, cfg in enumerate(configs)
             for rep in range(cfg.reps)]
    results: dict[tuple[int, int], RawRow] = {}
    if jobs <= 1:
        for task in tasks:
            idx, rep, row = _worker(task)
            results[(idx, rep)] = row
            if progress:
                progress(len(results), len(tasks))
    else:
        with mp.get_context("spawn").Pool(jobs) as pool:
            for idx, rep, row in pool.imap_unordered(_worker, tasks, chunksize=4):
                results[(idx, rep)] = row
                if progress:
                    progress(len(results), len(tasks))
    rows = [results[(idx, rep)]
            for idx, cfg in enumerate(configs)
            for rep in range(cfg.reps)]
    reports = aggregate(rows)
    if out_raw:
        export_raw(rows, out_raw)
    if out_mesh:
        if grid_spec is None:
            raise ValueError("out_mesh requires a grid_spec")
        export_mesh(reports, out_mesh, grid_spec)
    return rows, reports
