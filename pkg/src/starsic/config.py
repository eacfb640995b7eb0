"""Experiment configuration: YAML schema, presets and validation.

Validation collects every problem instead of stopping at the first one and
prefixes each message with the line of the offending key when it is known.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from .fiber import LinkConfig

SCHEMA_VERSION = 1

PRESETS = {
    "desk": {"n_train_seqs": 4, "n_test_seqs": 20, "seq_len": 8192},
    "paper": {"n_train_seqs": 24, "n_test_seqs": 120, "seq_len": 8192},
}

DEFAULTS = {
    "constellation": {"truncation": 3.2, "placement": "uniform"},
    "sic": {"leave_one_out": True, "memoryless_baseline": False},
    "output": {"directory": "results", "formats": ["tsv"], "save_datasets": False},
    "runtime": {"workers": 1},
}


class ConfigError(ValueError):
    def __init__(self, diagnostics: list[str]):
        self.diagnostics = diagnostics
        super().__init__("invalid config:\n  " + "\n  ".join(diagnostics))


def _line_map(text: str) -> dict[tuple, int]:
    """Map key paths such as ``("constellation", "n_phases", 0)`` to 1-based lines."""
    lines: dict[tuple, int] = {}

    def walk(node, path):
        lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = k.value
                walk(v, path + (key,))
                # a key path points at the key, not at its value
                lines[path + (key,)] = k.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines
    if root is not None:
        walk(root, ())
    return lines


class _Checker:
    def __init__(self, lines):
        self.lines = lines
        self.errors: list[str] = []

    def err(self, path: tuple, msg: str):
        p = path
        while p and p not in self.lines:
            p = p[:-1]
        where = f"line {self.lines[p]}: " if p in self.lines else ""
        name = ".".join(str(k) if not isinstance(k, int) else f"[{k}]" for k in path)
        name = name.replace(".[", "[")
        self.errors.append(f"{where}{name or '<root>'}: {msg}")

    def get(self, d, path, key, required=True):
        if not isinstance(d, dict):
            return None
        if key not in d:
            if required:
                self.err(path + (key,), "missing required field")
            return None
        return d[key]

    def posint(self, v, path, minimum=1):
        if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
            self.err(path, f"must be an integer >= {minimum}, got {v!r}")
            return False
        return True

    def number(self, v, path, positive=False, nonneg=False):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.err(path, f"must be a number, got {v!r}")
            return False
        if positive and not v > 0:
            self.err(path, f"must be positive, got {v!r}")
            return False
        if nonneg and v < 0:
            self.err(path, f"must be nonnegative, got {v!r}")
            return False
        return True

    def nonempty_list(self, v, path):
        if not isinstance(v, list) or not v:
            self.err(path, "must be a nonempty list")
            return False
        return True


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, preset-resolved experiment description."""

    raw: dict

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def constellation(self) -> dict:
        return self.raw["constellation"]

    @property
    def channel(self) -> dict:
        return self.raw["channel"]

    @property
    def training(self) -> dict:
        return self.raw["training"]

    @property
    def sic(self) -> dict:
        return self.raw["sic"]

    @property
    def output(self) -> dict:
        return self.raw["output"]

    @property
    def awgn(self) -> dict | None:
        return self.raw.get("awgn")

    @property
    def workers(self) -> int:
        return self.raw["runtime"]["workers"]

    def link_config(self) -> LinkConfig:
        return LinkConfig.from_dict(self.channel.get("fiber") or {})

    def config_hash(self) -> str:
        """Hash of everything that affects results (not output location or workers)."""
        d = copy.deepcopy(self.raw)
        d.pop("output", None)
        d.pop("runtime", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _merge_defaults(d: dict) -> dict:
    out = copy.deepcopy(d)
    for block, defaults in DEFAULTS.items():
        cur = out.get(block)
        if cur is None:
            out[block] = copy.deepcopy(defaults)
        elif isinstance(cur, dict):
            for k, v in defaults.items():
                cur.setdefault(k, copy.deepcopy(v))
    return out


def _validate(d, lines) -> list[str]:
    ck = _Checker(lines)
    if not isinstance(d, dict):
        ck.err((), "top level must be a mapping")
        return ck.errors

    v = ck.get(d, (), "schema_version")
    if v is not None and v != SCHEMA_VERSION:
        ck.err(("schema_version",), f"unsupported schema version {v!r} (expected {SCHEMA_VERSION})")
    seed = ck.get(d, (), "seed")
    if seed is not None:
        ck.posint(seed, ("seed",), minimum=0)

    p = ("constellation",)
    con = ck.get(d, (), "constellation")
    if isinstance(con, dict):
        nr = ck.get(con, p, "n_rings")
        if nr is not None:
            ck.posint(nr, p + ("n_rings",))
        nps = ck.get(con, p, "n_phases")
        if nps is not None and ck.nonempty_list(nps, p + ("n_phases",)):
            for i, x in enumerate(nps):
                ck.posint(x, p + ("n_phases", i))
        ptx = ck.get(con, p, "ptx_dbm")
        if ptx is not None and ck.nonempty_list(ptx, p + ("ptx_dbm",)):
            for i, x in enumerate(ptx):
                ck.number(x, p + ("ptx_dbm", i))
        ck.number(con.get("truncation", 3.2), p + ("truncation",), positive=True)
        if con.get("placement", "uniform") not in ("uniform", "quantile"):
            ck.err(p + ("placement",), "must be 'uniform' or 'quantile'")
    elif con is not None:
        ck.err(p, "must be a mapping")

    p = ("channel",)
    ch = ck.get(d, (), "channel")
    if isinstance(ch, dict):
        mode = ck.get(ch, p, "mode")
        if mode not in (None, "cpan", "fiber"):
            ck.err(p + ("mode",), f"must be 'cpan' or 'fiber', got {mode!r}")
        if mode == "cpan":
            cp = ck.get(ch, p, "cpan")
            q = p + ("cpan",)
            if isinstance(cp, dict):
                mu = ck.get(cp, q, "mu_delta")
                if mu is not None and ck.number(mu, q + ("mu_delta",)) and not 0 <= mu < 1:
                    ck.err(q + ("mu_delta",), "must lie in [0, 1)")
                st = ck.get(cp, q, "sigma_theta_sq")
                if st is not None:
                    ck.number(st, q + ("sigma_theta_sq",), nonneg=True)
                sn = ck.get(cp, q, "sigma_n_sq")
                if sn is not None:
                    ck.number(sn, q + ("sigma_n_sq",), positive=True)
                if "reference_dbm" in cp:
                    ck.number(cp["reference_dbm"], q + ("reference_dbm",))
                if "phase_noise_exponent" in cp:
                    ck.number(cp["phase_noise_exponent"], q + ("phase_noise_exponent",), nonneg=True)
            elif cp is not None:
                ck.err(q, "must be a mapping")
        if mode == "fiber" or "fiber" in ch:
            fb = ch.get("fiber") or {}
            if not isinstance(fb, dict):
                ck.err(p + ("fiber",), "must be a mapping")
            else:
                try:
                    LinkConfig.from_dict(fb)
                except (TypeError, ValueError) as e:
                    ck.err(p + ("fiber",), str(e))
    elif ch is not None:
        ck.err(p, "must be a mapping")

    p = ("training",)
    tr = ck.get(d, (), "training")
    if isinstance(tr, dict):
        for key, minimum in (("n_train_seqs", 1), ("n_test_seqs", 1), ("seq_len", 2)):
            x = ck.get(tr, p, key)
            if x is not None:
                ck.posint(x, p + (key,), minimum)

    p = ("sic",)
    sc = ck.get(d, (), "sic")
    if isinstance(sc, dict):
        st = ck.get(sc, p, "stages")
        if st is not None and ck.nonempty_list(st, p + ("stages",)):
            for i, x in enumerate(st):
                ck.posint(x, p + ("stages", i))
        if not isinstance(sc.get("leave_one_out", True), bool):
            ck.err(p + ("leave_one_out",), "must be true or false")

    aw = d.get("awgn")
    if aw is not None:
        p = ("awgn",)
        if not isinstance(aw, dict):
            ck.err(p, "must be a mapping")
        else:
            s = ck.get(aw, p, "snr_db")
            if s is not None and ck.nonempty_list(s, p + ("snr_db",)):
                for i, x in enumerate(s):
                    ck.number(x, p + ("snr_db", i))
            nps = aw.get("n_phases")
            if nps is not None and ck.nonempty_list(nps, p + ("n_phases",)):
                for i, x in enumerate(nps):
                    ck.posint(x, p + ("n_phases", i))
            n_mc = ck.get(aw, p, "n_mc")
            if n_mc is not None:
                ck.posint(n_mc, p + ("n_mc",), minimum=10_000)

    out = d.get("output")
    if isinstance(out, dict):
        if not isinstance(out.get("directory"), str):
            ck.err(("output", "directory"), "must be a string")
        fmts = out.get("formats", ["tsv"])
        if fmts != ["tsv"]:
            ck.err(("output", "formats"), "only ['tsv'] is supported")
    rt = d.get("runtime")
    if isinstance(rt, dict):
        ck.posint(rt.get("workers", 1), ("runtime", "workers"))
    return ck.errors


def load_config(path, preset: str | None = None) -> ExperimentConfig:
    """Parse and validate a config file; raise :class:`ConfigError` on any problem."""
    text = Path(path).read_text()
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError([f"YAML syntax error: {e}"]) from e
    lines = _line_map(text)
    if isinstance(d, dict):
        d = _merge_defaults(d)
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError([f"unknown preset {preset!r}; choose from {sorted(PRESETS)}"])
            d["training"] = {**(d.get("training") or {}), **PRESETS[preset]}
    errors = _validate(d, lines)
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(d)


def validate_config(path, preset: str | None = None) -> list[str]:
    """Return the list of diagnostics (empty when the config is valid)."""
    try:
        load_config(path, preset)
    except ConfigError as e:
        return e.diagnostics
    return []
