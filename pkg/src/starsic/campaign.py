"""Sweep campaigns: power x phase cardinality x SIC stage count, and AWGN baselines.

Each ``(ptx_dbm, n_phases)`` point generates its own training and test data
from seeds derived from the config seed, the power and the sequence number, so
a point's result does not depend on which other points run or in which order.
The phase cardinality is deliberately not part of the seed: points that differ
only in ``n_phases`` see the same ring draws, phase-index stream and channel
noise (common random numbers), which keeps AIR differences along the
``n_phases`` axis free of independent sampling noise. All stage counts of a
point share the same test data.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .air import awgn_air_gaussian, awgn_air_starqam, memoryless_baseline_air, sic_air
from .config import ExperimentConfig
from .constellation import SymbolSequence, build_star_qam, sample_sequence
from .cpan import CpanParams, fit_awgn_variance, fit_params, mean_phase_offset, simulate
from .fiber import LinkConfig, save_dataset, simulate_link
from .sic import SicSchedule

log = logging.getLogger(__name__)

AIR_COLUMNS = ["ptx_dbm", "n_phases", "stage", "air_bpcu", "stderr", "flags", "seed", "config_hash"]
STAGE_COLUMNS = ["ptx_dbm", "n_phases", "stage", "component", "bits", "seed", "config_hash"]
AWGN_COLUMNS = ["snr_db", "n_phases", "air_bpcu", "stderr", "gaussian_bpcu", "seed", "config_hash"]

TRAIN, TEST, AWGN = 0, 1, 2


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def _key(x: float) -> int:
    # SeedSequence spawn keys must be nonnegative integers
    return int(round((x + 1000.0) * 1000))


def _seed(cfg_seed: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(cfg_seed, spawn_key=tuple(int(k) for k in keys))


def cpan_params_at(cp: dict, ptx_dbm: float) -> CpanParams:
    """Surrogate parameters at one launch power.

    With ``reference_dbm`` set, the phase-noise variance scales as
    ``(P / P_ref) ** phase_noise_exponent`` (default exponent 2), a crude
    stand-in for XPM growing with interferer power; ``sigma_n_sq`` stays fixed.
    """
    sth = float(cp["sigma_theta_sq"])
    if cp.get("reference_dbm") is not None:
        expo = float(cp.get("phase_noise_exponent", 2.0))
        sth *= 10.0 ** ((ptx_dbm - float(cp["reference_dbm"])) / 10.0 * expo)
    return CpanParams.from_steady_state(float(cp["mu_delta"]), sth, float(cp["sigma_n_sq"]))


def _stage_label(s) -> str:
    return str(s)


def _generate(raw: dict, c, ptx_dbm: float, role: int, n_seqs: int):
    """Return ``(xs, ys)``: ``n_seqs`` sequences of one data role (train/test)."""
    ch = raw["channel"]
    seq_len = raw["training"]["seq_len"]
    pk = _key(ptx_dbm)
    xs, ys = [], []
    if ch["mode"] == "cpan":
        params = cpan_params_at(ch["cpan"], ptx_dbm)
        for j in range(n_seqs):
            sx, sy = _seed(raw["seed"], pk, role, j).spawn(2)
            x = sample_sequence(c, seq_len, sx)
            xs.append(x)
            ys.append(simulate(params, x, sy).y)
    else:
        link = LinkConfig.from_dict(ch.get("fiber") or {})
        for j in range(n_seqs):
            x, y = simulate_link(link, c, seq_len, _seed(raw["seed"], pk, role, j))
            xs.append(x)
            ys.append(y)
    return xs, ys


def _concat(xs: list[SymbolSequence]) -> SymbolSequence:
    return SymbolSequence(
        np.concatenate([x.radius_idx for x in xs]),
        np.concatenate([x.phase_idx for x in xs]),
        np.concatenate([x.values for x in xs]),
        xs[0].n_p,
    )


def run_point(raw: dict, config_hash: str, ptx_dbm: float, n_p: int, out_dir=None):
    """Evaluate every stage count at one ``(ptx_dbm, n_phases)`` point.

    Returns ``(air_rows, stage_rows)`` as lists of dicts.
    """
    con = raw["constellation"]
    tr = raw["training"]
    sic = raw["sic"]
    ch = raw["channel"]
    c = build_star_qam(
        con["n_rings"], n_p, dbm_to_watts(ptx_dbm), con["truncation"], con["placement"]
    )
    log.info("point ptx=%.2f dBm n_p=%d", ptx_dbm, n_p)

    need_training = ch["mode"] == "fiber" or sic["memoryless_baseline"] or ch.get("cpan", {}).get(
        "fit_from_training", False
    )
    train = _generate(raw, c, ptx_dbm, TRAIN, tr["n_train_seqs"]) if need_training else None
    test_x, test_y = _generate(raw, c, ptx_dbm, TEST, tr["n_test_seqs"])
    if out_dir is not None and raw["output"].get("save_datasets"):
        # raw channel outputs, before any common-phase removal
        stem = Path(out_dir) / f"data_ptx{ptx_dbm:+.2f}_np{n_p}"
        if train is not None:
            save_dataset(f"{stem}_train.npz", c, *train)
        save_dataset(f"{stem}_test.npz", c, test_x, test_y)

    if ch["mode"] == "fiber":
        pairs = list(zip(*train))
        offset = mean_phase_offset(pairs)
        rot = np.exp(-1j * offset)
        train = (train[0], [y * rot for y in train[1]])
        test_y = [y * rot for y in test_y]
        params = fit_params(list(zip(*train)))
        log.info("fitted %s (common phase %.4f rad removed)", params, offset)
    elif ch["cpan"].get("fit_from_training", False):
        params = fit_params(list(zip(*train)))
    else:
        params = cpan_params_at(ch["cpan"], ptx_dbm)

    common = {"ptx_dbm": ptx_dbm, "n_phases": n_p, "seed": raw["seed"], "config_hash": config_hash}
    air_rows, stage_rows = [], []
    for S in sorted(set(sic["stages"])):
        res = sic_air(test_y, test_x, SicSchedule(S), c, params, sic["leave_one_out"])
        air_rows.append(
            {**common, "stage": _stage_label(S), "air_bpcu": res.total_bits,
             "stderr": res.std_error, "flags": ";".join(res.flags) or "-"}
        )
        names = ["amplitude"] + [f"phase{s}" for s in range(1, S + 1)]
        for name, bits in zip(names, res.per_stage_bits):
            stage_rows.append({**common, "stage": _stage_label(S), "component": name, "bits": bits})

    if sic["memoryless_baseline"]:
        s2 = fit_awgn_variance(list(zip(*train)))
        seq_len = tr["seq_len"]
        groups = np.repeat(np.arange(len(test_y)), seq_len)
        res = memoryless_baseline_air(np.concatenate(test_y), _concat(test_x), c, s2, groups)
        air_rows.append(
            {**common, "stage": "memoryless", "air_bpcu": res.total_bits,
             "stderr": res.std_error, "flags": ";".join(res.flags) or "-"}
        )
    return air_rows, stage_rows


def _fmt(row: dict, columns: list[str]) -> list[str]:
    out = []
    for col in columns:
        v = row[col]
        if col in ("ptx_dbm", "snr_db"):
            out.append(f"{float(v):.2f}")
        elif col in ("air_bpcu", "stderr", "bits", "gaussian_bpcu"):
            out.append(f"{float(v):.6f}")
        else:
            out.append(str(v))
    return out


def _stage_sort(label: str):
    return (1, 0) if label == "memoryless" else (0, int(label))


def _component_sort(name: str) -> int:
    return 0 if name in ("", "amplitude") else int(name.removeprefix("phase"))


def _sort_key(row: dict):
    return (float(row["ptx_dbm"]), int(row["n_phases"]), _stage_sort(row["stage"]),
            _component_sort(row.get("component", "")))


def _write_tsv(path: Path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(_fmt(row, columns))


def _read_tsv(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


def _expected_labels(raw) -> set[str]:
    labels = {_stage_label(s) for s in raw["sic"]["stages"]}
    if raw["sic"]["memoryless_baseline"]:
        labels.add("memoryless")
    return labels


def run_campaign(cfg: ExperimentConfig, out_dir=None, workers: int | None = None) -> list[Path]:
    """Run all sweep points and write ``air.tsv`` and ``air_stages.tsv``.

    Rows already present in ``out_dir`` with the same config hash are kept and
    their points are not recomputed (resume). Output rows are sorted by
    ``(ptx_dbm, n_phases, stage)`` whatever the execution order.
    """
    raw = cfg.raw
    out = Path(out_dir if out_dir is not None else cfg.output["directory"])
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.config_hash()
    air_path, stage_path = out / "air.tsv", out / "air_stages.tsv"

    old_air = [r for r in _read_tsv(air_path) if r["config_hash"] == h]
    old_stage = [r for r in _read_tsv(stage_path) if r["config_hash"] == h]
    expected = _expected_labels(raw)
    done = set()
    for ptx in raw["constellation"]["ptx_dbm"]:
        for n_p in raw["constellation"]["n_phases"]:
            have = {r["stage"] for r in old_air
                    if math.isclose(float(r["ptx_dbm"]), ptx, abs_tol=5e-3)
                    and int(r["n_phases"]) == n_p}
            if expected <= have:
                done.add((ptx, n_p))
    todo = [(p, n) for p in raw["constellation"]["ptx_dbm"]
            for n in raw["constellation"]["n_phases"] if (p, n) not in done]
    if done:
        log.info("resuming: %d of %d points already complete", len(done), len(done) + len(todo))

    air_rows = [r for r in old_air if _match(r, done)]
    stage_rows = [r for r in old_stage if _match(r, done)]
    workers = workers or cfg.workers
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(run_point, raw, h, p, n, out) for p, n in todo]
            results = [f.result() for f in futs]
    else:
        results = [run_point(raw, h, p, n, out) for p, n in todo]
    for a, s in results:
        air_rows.extend(a)
        stage_rows.extend(s)

    air_rows.sort(key=_sort_key)
    stage_rows.sort(key=_sort_key)
    _write_tsv(air_path, air_rows, AIR_COLUMNS)
    _write_tsv(stage_path, stage_rows, STAGE_COLUMNS)
    return [air_path, stage_path]


def _match(row: dict, done: set) -> bool:
    return any(
        math.isclose(float(row["ptx_dbm"]), p, abs_tol=5e-3) and int(row["n_phases"]) == n
        for p, n in done
    )


def run_awgn(cfg: ExperimentConfig, out_dir=None) -> Path:
    """Memoryless AWGN sweep: star-QAM vs. Gaussian input, written to ``awgn.tsv``."""
    aw = cfg.awgn
    if aw is None:
        raise ValueError("config has no 'awgn' block")
    raw = cfg.raw
    con = raw["constellation"]
    out = Path(out_dir if out_dir is not None else cfg.output["directory"])
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.config_hash()
    rows = []
    for n_p in aw.get("n_phases") or con["n_phases"]:
        c = build_star_qam(con["n_rings"], n_p, 1.0, con["truncation"], con["placement"])
        for snr in aw["snr_db"]:
            res = awgn_air_starqam(c, snr, aw["n_mc"], _seed(raw["seed"], AWGN, _key(snr)))
            rows.append({"snr_db": snr, "n_phases": n_p, "air_bpcu": res.total_bits,
                         "stderr": res.std_error, "gaussian_bpcu": awgn_air_gaussian(snr),
                         "seed": raw["seed"], "config_hash": h})
    rows.sort(key=lambda r: (r["n_phases"], r["snr_db"]))
    path = out / "awgn.tsv"
    _write_tsv(path, rows, AWGN_COLUMNS)
    return path
