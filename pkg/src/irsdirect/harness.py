"""Experiment configuration, Monte-Carlo sweeps and CSV output.

Config files are INI-style (``key = value`` lines under ``[section]``
headers, ``#`` or ``;`` comments). Recognized sections and keys:

``[system]``
    Any `SystemConfig` field (``num_cells``, ``users_per_cell``, ``n_irs``,
    ``bts_antennas``, ``ue_antennas``, ``pilot_len``, ``n_fb``, ``n_alt``,
    ``rician_factor``, ``cross_gain``, ``tx_power``, ``noise_var``,
    ``rng_seed``, ``codebook``, ``pilot_kind``, ``joint_ls_csi``,
    ``noise_mismatch_db``). The power-like keys ``rician_factor``,
    ``cross_gain``, ``tx_power`` and ``noise_var`` also accept a ``_db``
    suffixed variant; giving both forms of one key is an error.
``[sweep]`` (required)
    ``variable`` is one of ``T``, ``noise_inv_db`` or ``N_IRS`` and
    ``values`` a comma-separated ascending list. ``noise_inv_db = x`` means
    ``noise_var = 10^(-x/10)``.
``[experiment]``
    ``schemes`` (comma list, default all), ``n_trials`` (default 100),
    ``metric`` (``dl_sum``, ``ul_sum`` or ``ul_per_cell``), ``output``
    (CSV path, default ``results.csv``).
``[optimizer]``
    Any `OptimizerSettings` field.
"""

import configparser
import csv
import dataclasses
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .phaseopt import OptimizerSettings
from .schemes import SCHEMES, TrialSeeds, prepare_trial, run_scheme
from .topology import SystemConfig, db2lin

__all__ = [
    "ConfigError",
    "ExperimentSpec",
    "ResultTable",
    "SWEEP_VARIABLES",
    "METRICS",
    "load_config",
    "parse_config",
    "run_experiment",
    "run_trial",
    "emit_csv",
    "read_csv",
    "self_check",
]

# sweep variable -> CSV column name
SWEEP_VARIABLES = {"T": "N_samples", "noise_inv_db": "one_over_sigma_n_sq", "N_IRS": "N_IRS"}
METRICS = ("dl_sum", "ul_sum", "ul_per_cell")
_DB_KEYS = ("rician_factor", "cross_gain", "tx_power", "noise_var")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentSpec:
    base: SystemConfig
    sweep_variable: str
    sweep_values: tuple
    schemes: tuple = SCHEMES
    n_trials: int = 100
    metric: str = "dl_sum"
    output_path: str = "results.csv"
    settings: OptimizerSettings = field(default_factory=OptimizerSettings)

    def __post_init__(self):
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ConfigError(
                f"sweep variable must be one of {sorted(SWEEP_VARIABLES)}, "
                f"got {self.sweep_variable!r}"
            )
        vals = tuple(self.sweep_values)
        if not vals:
            raise ConfigError("sweep values must be nonempty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError(f"sweep values must be strictly ascending, got {list(vals)}")
        if self.sweep_variable in ("T", "N_IRS") and any(v != int(v) for v in vals):
            raise ConfigError(f"{self.sweep_variable} values must be integers, got {list(vals)}")
        if self.n_trials < 1:
            raise ConfigError(f"n_trials must be >= 1, got {self.n_trials}")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown or not self.schemes:
            raise ConfigError(f"schemes must be a nonempty subset of {list(SCHEMES)}, "
                              f"got unknown {unknown}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigError(f"schemes contain duplicates: {list(self.schemes)}")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {list(METRICS)}, got {self.metric!r}")
        object.__setattr__(self, "sweep_values", vals)
        object.__setattr__(self, "schemes", tuple(self.schemes))
        # every point of the sweep must be a valid system
        for v in vals:
            self.config_at(v)

    def config_at(self, value):
        """System configuration at one sweep point."""
        try:
            if self.sweep_variable == "T":
                return self.base.replace(pilot_len=int(value))
            if self.sweep_variable == "N_IRS":
                return self.base.replace(n_irs=int(value))
            return self.base.replace(noise_var=float(db2lin(-value)))
        except ValueError as exc:
            raise ConfigError(f"sweep value {value}: {exc}") from exc

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


# --------------------------------------------------------------------------
# config parsing


def _coerce(key, raw, typ):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"key {key!r}: expected {typ.__name__}, got {raw!r}") from None


def _field_types(cls):
    types = {"int": int, "float": float, "str": str, "bool": bool}
    return {f.name: types.get(f.type if isinstance(f.type, str) else f.type.__name__, str)
            for f in dataclasses.fields(cls)}


def _key_lines(text):
    """Map (section, key) to its 1-based line number."""
    lines, section = {}, None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
            lines.setdefault((None, section), i)
            continue
        key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
        lines.setdefault((section, key), i)
    return lines


def _number_list(key, raw):
    parts = [p for p in re.split(r"[,\s]+", raw.strip()) if p]
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"key {key!r}: expected a list of numbers, got {raw!r}") from None
    return [int(v) if v.is_integer() else v for v in vals]


def parse_config(text, source="<string>"):
    """Parse config text into a validated `ExperimentSpec`."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    lines = _key_lines(text)

    sys_types = _field_types(SystemConfig)
    allowed = {
        "system": set(sys_types) | {k + "_db" for k in _DB_KEYS},
        "sweep": {"variable", "values"},
        "experiment": {"schemes", "n_trials", "metric", "output"},
        "optimizer": set(_field_types(OptimizerSettings)),
    }
    problems = []
    for sec in cp.sections():
        if sec not in allowed:
            problems.append(f"line {lines.get((None, sec), '?')}: unknown section [{sec}]")
            continue
        for key in cp[sec]:
            if key not in allowed[sec]:
                problems.append(f"line {lines.get((sec, key), '?')}: unknown key {key!r} "
                                f"in [{sec}]")
    if problems:
        raise ConfigError(f"{source}: " + "; ".join(problems))

    sysd = {}
    if cp.has_section("system"):
        sec = cp["system"]
        for key in sec:
            if key.endswith("_db") and key[:-3] in _DB_KEYS:
                base = key[:-3]
                if base in sec:
                    raise ConfigError(f"keys {base!r} and {key!r} are mutually exclusive")
                sysd[base] = float(db2lin(_coerce(key, sec[key], float)))
            else:
                sysd[key] = _coerce(key, sec[key], sys_types[key])
    try:
        base = SystemConfig(**sysd)
    except ValueError as exc:
        raise ConfigError(f"[system] {exc}") from None

    if not cp.has_section("sweep"):
        raise ConfigError("missing required section [sweep]")
    for key in ("variable", "values"):
        if key not in cp["sweep"]:
            raise ConfigError(f"missing required key {key!r} in [sweep]")
    variable = cp["sweep"]["variable"].strip()
    values = _number_list("values", cp["sweep"]["values"])
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"key 'values' in [sweep] must be strictly ascending, got {values}")

    exp = cp["experiment"] if cp.has_section("experiment") else {}
    kwargs = {}
    if "schemes" in exp:
        kwargs["schemes"] = tuple(s.strip() for s in exp["schemes"].split(",") if s.strip())
    if "n_trials" in exp:
        kwargs["n_trials"] = _coerce("n_trials", exp["n_trials"], int)
    if "metric" in exp:
        kwargs["metric"] = exp["metric"].strip()
    if "output" in exp:
        kwargs["output_path"] = exp["output"].strip()

    if cp.has_section("optimizer"):
        opt_types = _field_types(OptimizerSettings)
        optd = {k: _coerce(k, v, opt_types[k]) for k, v in cp["optimizer"].items()}
        try:
            kwargs["settings"] = OptimizerSettings(**optd)
        except ValueError as exc:
            raise ConfigError(f"[optimizer] {exc}") from None

    return ExperimentSpec(base, variable, tuple(values), **kwargs)


def load_config(path):
    """Read and validate an experiment config file.

    Raises
    ------
    ConfigError
        On unreadable files, unknown sections or keys (reported with their
        line numbers), missing required keys, type mismatches and invalid
        values; the message names the offending key.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, source=str(path))


# --------------------------------------------------------------------------
# experiments


@dataclass
class ResultTable:
    """Mean and standard error of one metric per sweep value and scheme.

    ``mean`` and ``se`` have shape (V, S); ``n_ok`` counts the trials that
    entered each mean and ``n_failed`` the excluded ones. The standard error
    is 0 for a single trial and NaN when no trial succeeded.
    """

    variable: str
    values: tuple
    schemes: tuple
    mean: np.ndarray
    se: np.ndarray
    n_ok: np.ndarray
    n_failed: np.ndarray
    metric: str = "dl_sum"

    def column(self, scheme):
        return self.mean[:, self.schemes.index(scheme)]

    def se_column(self, scheme):
        return self.se[:, self.schemes.index(scheme)]

    @property
    def total_failed(self):
        return int(self.n_failed.sum())


def run_trial(cfg, schemes, trial, settings=OptimizerSettings(), metric="dl_sum"):
    """All `schemes` on one shared trial.

    Returns ``{scheme: (value or None, error or None, seeds)}``; a scheme
    that raises or returns a non-finite value is reported as failed.
    """
    seeds = TrialSeeds.from_trial(cfg.rng_seed, trial)
    data = prepare_trial(cfg, seeds)
    out = {}
    for s in schemes:
        try:
            val = run_scheme(s, None, cfg, None, settings, data=data).metric(metric)
            err = None if np.isfinite(val) else "non-finite rate"
        except Exception as exc:  # noqa: BLE001 - failures are tallied, not fatal
            val, err = None, f"{type(exc).__name__}: {exc}"
        out[s] = (None if err else float(val), err, data.seeds)
    return out


def _task(args):
    cfg, schemes, trial, settings, metric = args
    return run_trial(cfg, schemes, trial, settings, metric)


def run_experiment(spec, threads=1, probe=None):
    """Monte-Carlo sweep; every scheme of a trial runs on shared data.

    Trial ``t`` draws its realization, pilots and noise from
    ``TrialSeeds.from_trial(spec.base.rng_seed, t)``, so the table does not
    depend on `threads`.

    Parameters
    ----------
    threads : int
        Worker processes; 1 runs in-process.
    probe : callable, optional
        Called as ``probe(value, trial, scheme, seeds)`` for every result.
    """
    tasks = [(spec.config_at(v), spec.schemes, t, spec.settings, spec.metric)
             for v in spec.sweep_values for t in range(spec.n_trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_task, tasks, chunksize=1))
    else:
        results = [_task(t) for t in tasks]

    V, S = len(spec.sweep_values), len(spec.schemes)
    vals = np.full((V, S, spec.n_trials), np.nan)
    for idx, res in enumerate(results):
        i, t = divmod(idx, spec.n_trials)
        for j, s in enumerate(spec.schemes):
            val, _, seeds = res[s]
            if probe is not None:
                probe(spec.sweep_values[i], t, s, seeds)
            if val is not None:
                vals[i, j, t] = val
    n_ok = np.isfinite(vals).sum(axis=2)
    mean = np.full((V, S), np.nan)
    se = np.full((V, S), np.nan)
    for i in range(V):
        for j in range(S):
            x = vals[i, j][np.isfinite(vals[i, j])]
            if x.size:
                mean[i, j] = x.mean()
                se[i, j] = x.std(ddof=1) / np.sqrt(x.size) if x.size > 1 else 0.0
    return ResultTable(spec.sweep_variable, spec.sweep_values, spec.schemes, mean, se,
                       n_ok, spec.n_trials - n_ok, spec.metric)


# --------------------------------------------------------------------------
# CSV


def emit_csv(table, path):
    """Write `table` as CSV: sweep column, scheme means, then ``_se`` columns."""
    if len(table.values) == 0:
        raise ValueError("cannot write an empty table")
    path = Path(path)
    header = [SWEEP_VARIABLES[table.variable], *table.schemes,
              *(s + "_se" for s in table.schemes)]
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i, v in enumerate(table.values):
                w.writerow([f"{v:.6g}", *(f"{x:.6g}" for x in table.mean[i]),
                            *(f"{x:.6g}" for x in table.se[i])])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path):
    """Read an emitted CSV back as ``(header, ndarray)``."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in r] for r in rows[1:]])


# --------------------------------------------------------------------------
# self-tests for the CLI


def self_check():
    """Quick invariant checks; returns a list of ``(name, passed, detail)``."""
    from .codebook import build_codebook, reconstruct_canonical
    from .airlink import gen_pilots, simulate_ul_training
    from .filters import ls_filter, mmse_error, mmse_filter
    from .objectives import ObjectiveContext, direct_objective, direct_objective_grad, true_sinr
    from .topology import draw_realization

    rng = np.random.default_rng(7)
    checks = []

    cfg = SystemConfig(n_irs=4, pilot_len=8)
    real = draw_realization(cfg, 1)
    pil = gen_pilots(cfg, 2)
    g0 = np.ones((cfg.num_users, 1), dtype=complex)
    cb = build_codebook(cfg.n_irs)
    rec = simulate_ul_training(real, cb, pil, g0, 0, 3, 0.0)
    y0, y_can = reconstruct_canonical(rec.epochs, cb)
    can = simulate_ul_training(real, build_codebook(cfg.n_irs, "canonical"), pil, g0, 0, 3, 0.0)
    ref = can.epochs
    err = max(np.max(np.abs(y0 - ref[-1])), np.max(np.abs(y_can - ref[:-1]))) / np.max(np.abs(ref))
    checks.append(("reconstruction exactness", err < 1e-9, f"rel err {err:.2e}"))

    h = (rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))) / np.sqrt(2)
    p = np.ones(4)
    lhs = sum(np.log2(1 + true_sinr(h, mmse_filter(h, p, 0.5, k), k, p, 0.5)) for k in range(4))
    rhs = -sum(np.log2(mmse_error(h, p, 0.5, k)) for k in range(4))
    checks.append(("MMSE-rate identity", abs(lhs - rhs) < 1e-9, f"diff {abs(lhs - rhs):.2e}"))

    y = rng.standard_normal((6, 32)) + 1j * rng.standard_normal((6, 32))
    b = np.sign(rng.standard_normal(32))
    v = ls_filter(y, b)
    ne = np.max(np.abs(y @ y.conj().T @ v - y @ b))
    checks.append(("LS normal equations", ne < 1e-9, f"residual {ne:.2e}"))

    rec = simulate_ul_training(real, cb, pil, g0, 0, 4, cfg.noise_var)
    y0, y_can = reconstruct_canonical(rec.epochs, cb)
    ctx = ObjectiveContext.from_training(y0, y_can, pil.scaled(cfg.cell_users(0)),
                                         noise_var=cfg.noise_var)
    w = np.exp(1j * rng.uniform(0, 2 * np.pi, cfg.n_irs))
    ga = direct_objective_grad(ctx, w)
    phi, hstep = np.angle(w), 1e-6
    fd = np.array([(direct_objective(ctx, np.exp(1j * (phi + hstep * e)))
                    - direct_objective(ctx, np.exp(1j * (phi - hstep * e)))) / (2 * hstep)
                   for e in np.eye(cfg.n_irs)])
    rel = np.max(np.abs(ga - fd)) / max(np.max(np.abs(fd)), 1e-12)
    checks.append(("direct objective gradient", rel < 1e-5, f"rel err {rel:.2e}"))

    small = SystemConfig(n_irs=2, pilot_len=8)
    res = run_scheme("direct_decentral", None, small, TrialSeeds.from_trial(0, 0))
    want = small.pilot_len * (small.n_irs + 1)
    checks.append(("training accounting", res.training_symbols_used == want,
                   f"{res.training_symbols_used} symbols"))
    return checks
