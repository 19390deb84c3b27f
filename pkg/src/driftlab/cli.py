"""Config-driven command line.

One YAML config file drives every run.  Common keys pick the drift
field, jump laws, seed, and output destination; a per-command section
holds the command's own parameters.  Commands:

* ``classify``    tail classification of the configured field (or the
                  closed-form critical-window family in mv_critical mode)
* ``simulate``    one trajectory, written as CSV or JSON
* ``bd-oracle``   discretize to a chain (or build a synthetic ratio
                  family) and run the ratio/series criteria
* ``experiment``  band-return recurrence ensemble, CSV rows or JSON report
* ``check``       diagnostics: martingale residuals, the second-moment
                  bound, or occupancy-vs-balance

Exit codes: 0 success, 1 strict-mode Inconclusive (or failed check),
2 usage/config errors, 3 I/O failures.  Outputs are written atomically
and are byte-identical for identical (config, seed) pairs.
"""

from __future__ import annotations

import argparse
import contextlib
import enum
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np
import yaml

from . import __version__
from .classifier import (
    Verdict,
    bd_series_criterion,
    classify_bd_bilateral,
    classify_mv_critical,
    classify_theorem1,
    discretize_to_bd,
    ratio_family_chain,
    ratio_test,
)
from .experiments import (
    RecurrenceExperiment,
    balance_residual,
    estimate_occupancy,
    experiment_csv,
    run_recurrence_experiment,
    solve_balance_window,
)
from .fields import (
    Constant1,
    CriticalLamperti,
    DriftField,
    ExponentialMean1,
    GammaMean1,
    JumpLaw,
    MeanReverting,
    PowerLaw,
    RateField,
    Tabulated,
    UniformMean1,
    Zero,
)
from .seeding import path_seed
from .simulator import (
    compensator_report,
    simulate_compound_poisson,
    simulate_walk,
    trajectory_csv,
    wald_second_moment_check,
)

__all__ = ["ConfigError", "RunConfig", "parse_config", "run", "main"]

_COMMANDS = ("classify", "simulate", "bd-oracle", "experiment", "check")

_DEFAULT_FORMAT = {
    "classify": "json",
    "simulate": "csv",
    "bd-oracle": "json",
    "experiment": "csv",
    "check": "json",
}


class ConfigError(ValueError):
    """Invalid config content; the message carries the dotted key path."""


_REQUIRED = object()


class _Sect:
    """One config mapping plus its dotted path, with typed extraction."""

    def __init__(self, data: Any, path: str):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path or 'config'}: expected a mapping")
        self.data = dict(data)
        self.path = path

    def _full(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def sub(self, key: str) -> "_Sect":
        return _Sect(self.data.pop(key, None), self._full(key))

    def take(
        self,
        key: str,
        kind: str,
        default: Any = _REQUIRED,
        choices: Optional[tuple] = None,
        lo: Any = None,
        allow_none: bool = False,
    ) -> Any:
        if key not in self.data:
            if default is _REQUIRED:
                raise ConfigError(f"{self._full(key)}: required key missing")
            return default
        v = self.data.pop(key)
        path = self._full(key)
        if v is None:
            if allow_none:
                return None
            raise ConfigError(f"{path}: must not be null")
        if kind == "bool":
            if not isinstance(v, bool):
                raise ConfigError(f"{path}: expected a boolean, got {v!r}")
        elif kind == "int":
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{path}: expected an integer, got {v!r}")
        elif kind == "float":
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{path}: expected a number, got {v!r}")
            v = float(v)
        elif kind == "str":
            if not isinstance(v, str):
                raise ConfigError(f"{path}: expected a string, got {v!r}")
        elif kind == "list":
            if not isinstance(v, list):
                raise ConfigError(f"{path}: expected a list")
        else:  # pragma: no cover - internal misuse
            raise AssertionError(f"unknown kind {kind}")
        if choices is not None and v not in choices:
            raise ConfigError(f"{path}: must be one of {sorted(choices)}, got {v!r}")
        if lo is not None and v < lo:
            raise ConfigError(f"{path}: must be >= {lo}")
        return v

    def done(self) -> None:
        if self.data:
            keys = ", ".join(sorted(map(str, self.data)))
            raise ConfigError(f"{self.path or 'config'}: unknown key(s): {keys}")


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description with every default resolved."""

    command: str
    seed: int
    strict: bool
    workers: int
    field: DriftField
    t_proxy: float
    up_law: JumpLaw
    down_law: JumpLaw
    output_path: Optional[str]
    output_format: str
    params: dict
    effective: dict


def _build_field(s: _Sect) -> DriftField:
    family = s.take(
        "family",
        "str",
        default="zero",
        choices=("zero", "critical_lamperti", "power_law", "mean_reverting", "tabulated"),
    )
    x_floor = s.take("x_floor", "float", default=1.0)
    try:
        if family == "zero":
            out: DriftField = Zero(x_floor=x_floor)
        elif family == "critical_lamperti":
            out = CriticalLamperti(c=s.take("c", "float"), x_floor=x_floor)
        elif family == "power_law":
            out = PowerLaw(
                rho=s.take("rho", "float"),
                alpha=s.take("alpha", "float"),
                beta=s.take("beta", "float"),
                x_floor=x_floor,
            )
        elif family == "mean_reverting":
            out = MeanReverting(kappa=s.take("kappa", "float"), x_floor=x_floor)
        else:
            out = Tabulated(
                x_grid=np.asarray(s.take("x_grid", "list"), float),
                t_grid=np.asarray(s.take("t_grid", "list"), float),
                values=np.asarray(s.take("values", "list"), float),
                x_floor=x_floor,
            )
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{s.path or 'field'}: {e}") from e
    s.done()
    return out


def _field_mapping(f: DriftField, t_proxy: float) -> dict:
    m: dict[str, Any] = {"x_floor": f.x_floor, "t_proxy": t_proxy}
    if isinstance(f, Zero):
        m["family"] = "zero"
    elif isinstance(f, CriticalLamperti):
        m.update(family="critical_lamperti", c=f.c)
    elif isinstance(f, PowerLaw):
        m.update(family="power_law", rho=f.rho, alpha=f.alpha, beta=f.beta)
    elif isinstance(f, MeanReverting):
        m.update(family="mean_reverting", kappa=f.kappa)
    elif isinstance(f, Tabulated):
        m.update(
            family="tabulated",
            x_grid=f.x_grid.tolist(),
            t_grid=f.t_grid.tolist(),
            values=f.values.tolist(),
        )
    else:  # pragma: no cover - new families must register here
        raise AssertionError(f"unmapped field type {type(f)!r}")
    return m


def _build_law(s: _Sect) -> JumpLaw:
    family = s.take(
        "family",
        "str",
        default="constant1",
        choices=("constant1", "exponential_mean1", "gamma_mean1", "uniform_mean1"),
    )
    try:
        if family == "constant1":
            out: JumpLaw = Constant1()
        elif family == "exponential_mean1":
            out = ExponentialMean1()
        elif family == "gamma_mean1":
            out = GammaMean1(k=s.take("k", "float"))
        else:
            out = UniformMean1(d=s.take("d", "float"))
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{s.path}: {e}") from e
    s.done()
    return out


def _law_mapping(law: JumpLaw) -> dict:
    if isinstance(law, Constant1):
        return {"family": "constant1"}
    if isinstance(law, ExponentialMean1):
        return {"family": "exponential_mean1"}
    if isinstance(law, GammaMean1):
        return {"family": "gamma_mean1", "k": law.k}
    if isinstance(law, UniformMean1):
        return {"family": "uniform_mean1", "d": law.d}
    raise AssertionError(f"unmapped law type {type(law)!r}")  # pragma: no cover


def _params_classify(s: _Sect) -> dict:
    mode = s.take("mode", "str", default="theorem1", choices=("theorem1", "mv_critical"))
    x0 = s.take("x0", "float", default=2.0)
    x_max = s.take("x_max", "float", default=1e4)
    grid = s.take("grid", "int", default=512, lo=100)
    rho = s.take("rho", "float", default=None, allow_none=True)
    beta = s.take("beta", "float", default=None, allow_none=True)
    s.done()
    if x0 <= 0:
        raise ConfigError("classify.x0: must be positive")
    if x_max <= x0:
        raise ConfigError("classify.x_max: must exceed x0")
    if mode == "mv_critical" and (rho is None or beta is None):
        raise ConfigError("classify: mode mv_critical requires rho and beta")
    p = {"mode": mode, "x0": x0, "x_max": x_max, "grid": grid}
    if rho is not None:
        p["rho"] = rho
    if beta is not None:
        p["beta"] = beta
    return p


def _params_simulate(s: _Sect) -> dict:
    horizon = s.take("horizon", "float", lo=0.0)
    z0 = s.take("z0", "float", default=0.0)
    s.done()
    return {"horizon": horizon, "z0": z0}


def _params_bd_oracle(s: _Sect) -> dict:
    source = s.take("source", "str", default="field", choices=("field", "ratio"))
    c = s.take("c", "float", default=None, allow_none=True)
    n_min = s.take("n_min", "int", default=2)
    n_max = s.take("n_max", "int", default=10000)
    n0 = s.take("n0", "int", default=None, allow_none=True)
    q = s.take("quadrature_points", "int", default=8, lo=1)
    tail = s.take("tail_extension", "int", default=0, lo=0)
    criterion = s.take("criterion", "str", default="both", choices=("ratio", "series", "both"))
    bilateral = s.take("bilateral", "bool", default=False)
    s.done()
    if n_min > n_max:
        raise ConfigError("bd-oracle.n_min: must not exceed n_max")
    if source == "ratio":
        if c is None:
            raise ConfigError("bd-oracle.c: required when source is 'ratio'")
        if n_min < 1:
            raise ConfigError("bd-oracle.n_min: ratio source needs n_min >= 1")
    if n0 is None:
        n0 = max(1, n_min)
    if not n_min <= n0 <= n_max:
        raise ConfigError("bd-oracle.n0: must lie within [n_min, n_max]")
    if bilateral and n_min > -n0:
        raise ConfigError("bd-oracle.bilateral: window must span both tails (n_min <= -n0)")
    p = {
        "source": source,
        "n_min": n_min,
        "n_max": n_max,
        "n0": n0,
        "quadrature_points": q,
        "tail_extension": tail,
        "criterion": criterion,
        "bilateral": bilateral,
    }
    if c is not None:
        p["c"] = c
    return p


def _params_experiment(s: _Sect) -> dict:
    p = {
        "n_paths": s.take("n_paths", "int", lo=1),
        "horizon": s.take("horizon", "float", lo=0.0),
        "level": s.take("level", "float"),
        "band": s.take("band", "float", default=1.0),
        "z0": s.take("z0", "float", default=0.0),
    }
    s.done()
    if not p["level"] > p["band"] > 0:
        raise ConfigError("experiment: need level > band > 0")
    return p


def _params_check(s: _Sect) -> dict:
    kind = s.take("kind", "str", choices=("martingale", "wald", "balance"))
    if kind == "martingale":
        p = {
            "kind": kind,
            "rate": s.take("rate", "float", default=0.5),
            "tau": s.take("tau", "float", default=8.0, lo=0.0),
            "horizon": s.take("horizon", "float", default=12.0, lo=0.0),
            "n_paths": s.take("n_paths", "int", default=10000, lo=100),
        }
        if p["rate"] <= 0:
            raise ConfigError("check.rate: must be positive")
        if p["horizon"] < p["tau"]:
            raise ConfigError("check.horizon: must be at least tau")
    elif kind == "wald":
        p = {
            "kind": kind,
            "sigma": s.take("sigma", "float", default=1.0, lo=0.0),
            "n_paths": s.take("n_paths", "int", default=10000, lo=100),
            "z0": s.take("z0", "float", default=0.0),
        }
    else:
        p = {
            "kind": kind,
            "total_time": s.take("total_time", "float", default=1e5, lo=0.0),
            "window_min": s.take("window_min", "int", default=-10),
            "window_max": s.take("window_max", "int", default=10),
            "quadrature_points": s.take("quadrature_points", "int", default=8, lo=1),
            "compare_exact": s.take("compare_exact", "bool", default=True),
        }
        if p["window_max"] - p["window_min"] < 2:
            raise ConfigError("check.window_max: window needs at least 3 cells")
    s.done()
    return p


_PARAM_VALIDATORS: dict[str, Callable[[_Sect], dict]] = {
    "classify": _params_classify,
    "simulate": _params_simulate,
    "bd-oracle": _params_bd_oracle,
    "experiment": _params_experiment,
    "check": _params_check,
}


def _validate(raw: Any) -> RunConfig:
    top = _Sect(raw, "")
    command = top.take("command", "str", choices=_COMMANDS)
    seed = top.take("seed", "int", default=None, allow_none=True)
    if seed is None:
        env = os.environ.get("DRIFTLAB_SEED")
        if env is None:
            seed = 0
        else:
            try:
                seed = int(env)
            except ValueError:
                raise ConfigError(f"DRIFTLAB_SEED must be an integer, got {env!r}") from None
    strict = top.take("strict", "bool", default=False)
    workers = top.take("workers", "int", default=0, lo=0)

    fsect = top.sub("field")
    t_proxy = fsect.take("t_proxy", "float", default=1e8)
    if t_proxy <= 0:
        raise ConfigError("field.t_proxy: must be positive")
    field = _build_field(fsect)

    jsect = top.sub("jumps")
    up_law = _build_law(jsect.sub("up"))
    down_law = _build_law(jsect.sub("down"))
    jsect.done()

    osect = top.sub("output")
    out_path = osect.take("path", "str", default=None, allow_none=True)
    fmt = osect.take("format", "str", default=None, choices=("json", "csv"), allow_none=True)
    osect.done()
    if fmt is None:
        fmt = _DEFAULT_FORMAT[command]
    if fmt == "csv" and command in ("classify", "check"):
        raise ConfigError(f"output.format: csv is not available for '{command}'")

    params = _PARAM_VALIDATORS[command](top.sub(command))
    for other in _COMMANDS:
        top.data.pop(other, None)  # sections for other commands are ignored
    top.done()

    effective = {
        "command": command,
        "seed": seed,
        "strict": strict,
        "workers": workers,
        "field": _field_mapping(field, t_proxy),
        "jumps": {"up": _law_mapping(up_law), "down": _law_mapping(down_law)},
        "output": {"path": out_path, "format": fmt},
        command: dict(params),
    }
    return RunConfig(
        command=command,
        seed=seed,
        strict=strict,
        workers=workers,
        field=field,
        t_proxy=t_proxy,
        up_law=up_law,
        down_law=down_law,
        output_path=out_path,
        output_format=fmt,
        params=params,
        effective=effective,
    )


def parse_config(text: str) -> RunConfig:
    """Parse and validate YAML config text.

    Raises ConfigError with a dotted key path (or the YAML parser's
    line/column) on any problem.  Defaults are resolved here;
    ``RunConfig.effective`` re-serializes to an equivalent config.
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML: {e}") from e
    return _validate(raw)


def _sanitize(v: Any) -> Any:
    if isinstance(v, dict):
        return {str(k): _sanitize(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_sanitize(x) for x in v]
    if isinstance(v, enum.Enum):
        return v.value
    if isinstance(v, np.ndarray):
        return [_sanitize(x) for x in v.tolist()]
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        v = float(v)
    if isinstance(v, float):
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
    return v


def _record_json(rc: RunConfig, result: dict) -> str:
    record = {
        "tool": "driftlab",
        "version": __version__,
        "command": rc.command,
        "seed": rc.seed,
        "config": rc.effective,
        "result": result,
    }
    return json.dumps(_sanitize(record), indent=2, sort_keys=True) + "\n"


def _fmt_num(v: float) -> str:
    return f"{v:.6g}"


def _fmt_c(v: float) -> str:
    return f"{v:.3f}" if math.isfinite(v) else str(v)


def _cmd_classify(rc: RunConfig) -> tuple[int, Optional[str], str]:
    p = rc.params
    if p["mode"] == "mv_critical":
        cls = classify_mv_critical(p["rho"], p["beta"], p["x0"], p["x_max"], p["grid"])
    else:
        cls = classify_theorem1(rc.field, p["x0"], p["x_max"], p["grid"])
    result = {**cls.to_record(), "evidence": cls.evidence}
    summary = (
        f"verdict={cls.verdict.value} c_estimate={_fmt_c(cls.c_estimate)} "
        f"method={cls.method} window=[{cls.window[0]:g},{cls.window[1]:g}]"
    )
    code = 1 if rc.strict and cls.verdict is Verdict.INCONCLUSIVE else 0
    return code, _record_json(rc, result), summary


def _cmd_simulate(rc: RunConfig) -> tuple[int, Optional[str], str]:
    p = rc.params
    rf = RateField(rc.field, rc.t_proxy)
    traj = simulate_walk(rf, rc.up_law, rc.down_law, p["horizon"], rc.seed, p["z0"])
    if rc.output_format == "csv":
        payload: Optional[str] = trajectory_csv(traj)
    else:
        payload = _record_json(
            rc,
            {
                "n_events": traj.n_events,
                "final_z": traj.final_z,
                "times": traj.times,
                "jumps": traj.jumps,
                "z": traj.z_after,
            },
        )
    summary = (
        f"events={traj.n_events} final_z={_fmt_num(traj.final_z)} "
        f"horizon={p['horizon']:g} seed={rc.seed}"
    )
    return 0, payload, summary


def _cmd_bd_oracle(rc: RunConfig) -> tuple[int, Optional[str], str]:
    p = rc.params
    if p["source"] == "ratio":
        chain = ratio_family_chain(p["c"], p["n_min"], p["n_max"])
    else:
        chain = discretize_to_bd(
            RateField(rc.field, rc.t_proxy), p["n_min"], p["n_max"], p["quadrature_points"]
        )

    wanted = ("ratio", "series") if p["criterion"] == "both" else (p["criterion"],)
    results: dict[str, Any] = {}
    for crit in wanted:
        if p["bilateral"]:
            cls = classify_bd_bilateral(chain, p["n0"], crit, p["tail_extension"])
        elif crit == "ratio":
            cls = ratio_test(chain, p["n0"])
        else:
            cls = bd_series_criterion(chain, p["n0"], p["tail_extension"])
        results[crit] = {**cls.to_record(), "evidence": cls.evidence}

    if rc.output_format == "csv":
        lines = ["n,lambda_star,mu_star"]
        for i, n in enumerate(range(chain.n_min, chain.n_max + 1)):
            lines.append(f"{n},{float(chain.lam[i])!r},{float(chain.mu[i])!r}")
        payload: Optional[str] = "\n".join(lines) + "\n"
    else:
        payload = _record_json(rc, {"chain_window": [chain.n_min, chain.n_max], **results})

    bits = [f"{k}={v['verdict']}({_fmt_c(v['c_estimate'])})" for k, v in results.items()]
    summary = " ".join(bits)
    inconclusive = any(v["verdict"] == Verdict.INCONCLUSIVE.value for v in results.values())
    return (1 if rc.strict and inconclusive else 0), payload, summary


def _cmd_experiment(rc: RunConfig) -> tuple[int, Optional[str], str]:
    p = rc.params
    exp = RecurrenceExperiment(
        rate_field=RateField(rc.field, rc.t_proxy),
        up_law=rc.up_law,
        down_law=rc.down_law,
        n_paths=p["n_paths"],
        horizon=p["horizon"],
        level=p["level"],
        band=p["band"],
        seed=rc.seed,
        z0=p["z0"],
        workers=rc.workers,
    )
    report = run_recurrence_experiment(exp)
    if rc.output_format == "csv":
        payload: Optional[str] = experiment_csv(report)
    else:
        # runtime is left out of the file so identical runs stay byte-identical
        rec = report.to_record()
        rec.pop("runtime_seconds", None)
        payload = _record_json(rc, rec)
    lo, hi = report.returned_ci
    summary = (
        f"paths={report.n_paths} reached={_fmt_num(report.reached_fraction)} "
        f"returned={_fmt_num(report.returned_fraction)} "
        f"ci=[{_fmt_num(lo)},{_fmt_num(hi)}] "
        f"runtime={report.runtime_seconds:.3g}s"
    )
    return 0, payload, summary


def _cmd_check(rc: RunConfig) -> tuple[int, Optional[str], str]:
    p = rc.params
    if p["kind"] == "martingale":
        return _check_martingale(rc)
    if p["kind"] == "wald":
        return _check_wald(rc)
    return _check_balance(rc)


def _check_martingale(rc: RunConfig) -> tuple[int, Optional[str], str]:
    p = rc.params
    r0 = p["rate"]
    rate = lambda t: r0  # noqa: E731 - constant intensity fixture
    lit = np.empty(p["n_paths"])
    ens = np.empty(p["n_paths"])
    for i in range(p["n_paths"]):
        times, marks = simulate_compound_poisson(
            rate, r0, rc.up_law, p["horizon"], path_seed(rc.seed, i)
        )
        rep = compensator_report(times, marks, rate, p["tau"])
        lit[i] = rep.residual_literal
        ens[i] = rep.residual_ensemble

    def stats(v: np.ndarray) -> tuple[float, float, bool]:
        mean = float(np.mean(v))
        se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        return mean, se, abs(mean) <= 3.0 * se if se > 0 else mean == 0.0

    m_lit, se_lit, ok_lit = stats(lit)
    m_ens, se_ens, ok_ens = stats(ens)
    result = {
        "kind": "martingale",
        "n_paths": p["n_paths"],
        "tau": p["tau"],
        "rate": r0,
        "literal": {"mean_residual": m_lit, "se": se_lit, "within_3se": ok_lit},
        "ensemble": {"mean_residual": m_ens, "se": se_ens, "within_3se": ok_ens},
    }
    summary = (
        f"martingale literal={_fmt_num(m_lit)}(se={_fmt_num(se_lit)},ok={ok_lit}) "
        f"ensemble={_fmt_num(m_ens)}(se={_fmt_num(se_ens)},ok={ok_ens})"
    )
    code = 1 if rc.strict and not (ok_lit and ok_ens) else 0
    return code, _record_json(rc, result), summary


def _check_wald(rc: RunConfig) -> tuple[int, Optional[str], str]:
    p = rc.params
    chk = wald_second_moment_check(
        RateField(rc.field, rc.t_proxy),
        rc.up_law,
        rc.down_law,
        p["sigma"],
        p["n_paths"],
        rc.seed,
        p["z0"],
    )
    result = {"kind": "wald", **chk.to_record()}
    summary = (
        f"wald empirical={_fmt_num(chk.empirical_second_moment)} "
        f"bound={_fmt_num(chk.bound)} passed={chk.passed}"
    )
    code = 1 if rc.strict and not chk.passed else 0
    return code, _record_json(rc, result), summary


def _check_balance(rc: RunConfig) -> tuple[int, Optional[str], str]:
    p = rc.params
    rf = RateField(rc.field, rc.t_proxy)
    w = (p["window_min"], p["window_max"])
    occ = estimate_occupancy(rf, rc.up_law, rc.down_law, p["total_time"], w, rc.seed)
    chain = discretize_to_bd(rf, w[0] - 1, w[1] + 1, p["quadrature_points"])
    br = balance_residual(occ, chain)
    result: dict[str, Any] = {
        "kind": "balance",
        "window": [w[0], w[1]],
        "total_time": p["total_time"],
        "l1": br.l1,
        "residual_cells": [br.n_lo, br.n_hi],
        "residuals": br.residuals,
        "occupancy": occ.p_star,
        "occupied_mass": float(np.sum(occ.p_star)),
    }
    summary = f"balance l1={_fmt_num(br.l1)} cells=[{br.n_lo},{br.n_hi}]"
    code = 0
    if p["compare_exact"]:
        exact = solve_balance_window(chain, w[0], w[1])
        brx = balance_residual(exact, chain)
        result["exact_l1"] = brx.l1
        summary += f" exact_l1={brx.l1:.3g}"
        if rc.strict and not brx.l1 < 1e-10:
            code = 1
    return code, _record_json(rc, result), summary


_DISPATCH = {
    "classify": _cmd_classify,
    "simulate": _cmd_simulate,
    "bd-oracle": _cmd_bd_oracle,
    "experiment": _cmd_experiment,
    "check": _cmd_check,
}


def _atomic_write(path: str, data: str) -> None:
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target), prefix=".driftlab-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, target)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def run(rc: RunConfig) -> int:
    """Execute a validated config: write the output file (if requested)
    atomically, print the one-line summary, return the exit code."""
    try:
        code, payload, summary = _DISPATCH[rc.command](rc)
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"{rc.command}: {e}") from e

    if rc.output_path is not None and payload is not None:
        try:
            _atomic_write(rc.output_path, payload)
        except OSError as e:
            print(f"driftlab: cannot write output: {rc.output_path}: {e}", file=sys.stderr)
            return 3
    print(summary)
    return code


def _assign(raw: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = raw
    for k in keys[:-1]:
        nxt = node.get(k)
        if nxt is None:
            nxt = {}
            node[k] = nxt
        if not isinstance(nxt, dict):
            raise ConfigError(f"--set {dotted}: {k} is not a mapping")
        node = nxt
    node[keys[-1]] = value


def main(argv: Optional[list[str]] = None) -> int:
    ap = argparse.ArgumentParser(
        prog="driftlab",
        description="Simulate and classify state/time-dependent random walks "
        "from a YAML config.",
    )
    ap.add_argument("config", help="path to the YAML config file")
    ap.add_argument("--seed", type=int, help="override the seed")
    ap.add_argument("--out", help="override output.path")
    ap.add_argument("--format", choices=("json", "csv"), help="override output.format")
    ap.add_argument("--strict", action="store_true", help="exit 1 on Inconclusive verdicts")
    ap.add_argument("--workers", type=int, help="override worker count (0 = auto)")
    ap.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        dest="sets",
        help="override any config key by dotted path (value parsed as YAML)",
    )
    ap.add_argument("--version", action="version", version=f"driftlab {__version__}")
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        print(f"driftlab: cannot read config: {args.config}: {e}", file=sys.stderr)
        return 3

    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        print(f"driftlab: invalid YAML in {args.config}: {e}", file=sys.stderr)
        return 2
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        print(f"driftlab: config root must be a mapping: {args.config}", file=sys.stderr)
        return 2

    try:
        for kv in args.sets:
            if "=" not in kv:
                raise ConfigError(f"--set expects KEY=VALUE, got {kv!r}")
            key, _, val = kv.partition("=")
            try:
                parsed = yaml.safe_load(val) if val != "" else None
            except yaml.YAMLError as e:
                raise ConfigError(f"--set {key}: invalid value: {e}") from e
            _assign(raw, key, parsed)
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.strict:
            raw["strict"] = True
        if args.workers is not None:
            raw["workers"] = args.workers
        if args.out is not None or args.format is not None:
            out = raw.get("output")
            if out is None:
                out = {}
                raw["output"] = out
            if not isinstance(out, dict):
                raise ConfigError("output: expected a mapping")
            if args.out is not None:
                out["path"] = args.out
            if args.format is not None:
                out["format"] = args.format
        rc = _validate(raw)
        return run(rc)
    except ConfigError as e:
        print(f"driftlab: config error: {e}", file=sys.stderr)
        return 2
