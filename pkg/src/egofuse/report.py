"""Result files: metrics CSVs, comparison table, confusion matrices,
and kernel/feature selection histograms."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .kernels import KernelSpec
from .metrics import render_confusion
from .mkboost import selection_histogram
from .pipeline import RunOutcome

METRIC_COLUMNS = ("A", "P", "R", "kappa", "SIC", "F")


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def metrics_csv(outcome: RunOutcome, classifiers: list[str]) -> str:
    lines = ["classifier,trial," + ",".join(METRIC_COLUMNS)]
    for name in classifiers:
        for r in outcome.for_classifier(name):
            row = r.report.as_row()
            lines.append(
                f"{name},{r.trial}," + ",".join(_fmt(row[c]) for c in METRIC_COLUMNS)
            )
    return "\n".join(lines) + "\n"


def comparison_csv(outcome: RunOutcome, classifiers: list[str]) -> str:
    lines = ["classifier," + ",".join(METRIC_COLUMNS)]
    for name in classifiers:
        agg = outcome.aggregate(name)
        lines.append(f"{name}," + ",".join(_fmt(agg[c]) for c in METRIC_COLUMNS))
    return "\n".join(lines) + "\n"


def selection_csvs(
    selections: list[list[int]], bank: list[KernelSpec]
) -> tuple[str, str]:
    """(kernel-kind CSV, channel CSV); every kind/channel in the bank
    appears even with a zero count."""
    kinds, channels = selection_histogram(selections, bank)
    all_kinds = sorted({spec.kind for spec in bank})
    all_channels = sorted({c for spec in bank for c in spec.channels})
    kind_lines = ["kernel_kind,count"]
    kind_lines += [f"{k},{kinds.get(k, 0)}" for k in all_kinds]
    chan_lines = ["channel,count"]
    chan_lines += [f"{c},{channels.get(c, 0)}" for c in all_channels]
    return "\n".join(kind_lines) + "\n", "\n".join(chan_lines) + "\n"


def outcome_to_json(outcome: RunOutcome, classifiers: list[str],
                    class_names: list[str]) -> str:
    payload = {
        "classifiers": classifiers,
        "class_names": class_names,
        "n_trials": outcome.n_trials,
        "failed_trials": outcome.failed_trials,
        "audit_violations": outcome.audit_violations,
        "bank": [
            {"kind": s.kind, "channels": list(s.channels),
             "gamma": s.gamma, "p": s.p, "l": s.l}
            for s in (outcome.bank_specs or [])
        ],
        "results": [
            {
                "trial": r.trial,
                "classifier": r.classifier,
                "metrics": r.report.as_row(),
                "confusion": r.cm.astype(int).tolist(),
                "selections": r.selections,
            }
            for r in outcome.results
            if r.error is None
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def load_outcome_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def render_payload(payload: dict, out_dir: str | Path) -> list[Path]:
    """Re-render report files from a saved results.json payload."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    classifiers = payload["classifiers"]
    class_names = payload["class_names"]
    results = payload["results"]
    written: list[Path] = []

    def emit(name: str, text: str) -> None:
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    lines = ["classifier,trial," + ",".join(METRIC_COLUMNS)]
    for name in classifiers:
        for r in results:
            if r["classifier"] != name:
                continue
            lines.append(
                f"{name},{r['trial']},"
                + ",".join(_fmt(r["metrics"][c]) for c in METRIC_COLUMNS)
            )
    emit("metrics.csv", "\n".join(lines) + "\n")

    lines = ["classifier," + ",".join(METRIC_COLUMNS)]
    for name in classifiers:
        rows = [r["metrics"] for r in results if r["classifier"] == name]
        if not rows:
            continue
        means = {c: float(np.mean([row[c] for row in rows])) for c in METRIC_COLUMNS}
        lines.append(f"{name}," + ",".join(_fmt(means[c]) for c in METRIC_COLUMNS))
    emit("comparison.csv", "\n".join(lines) + "\n")

    bank = [
        KernelSpec(kind=b["kind"], p=b["p"], l=b["l"], gamma=b["gamma"],
                   channels=tuple(b["channels"]))
        for b in payload.get("bank", [])
    ]
    for name in classifiers:
        mats = [np.asarray(r["confusion"]) for r in results if r["classifier"] == name]
        if not mats:
            continue
        emit(f"confusion_{name}.txt", render_confusion(np.sum(mats, axis=0), class_names))
        selections: list[list[int]] = []
        for r in results:
            if r["classifier"] == name and r["selections"]:
                selections.extend(r["selections"])
        if selections and bank:
            kind_text, chan_text = selection_csvs(selections, bank)
            emit(f"selection_kernels_{name}.csv", kind_text)
            emit(f"selection_channels_{name}.csv", chan_text)
    return written


def write_reports(
    outcome: RunOutcome,
    out_dir: str | Path,
    class_names: list[str],
    classifiers: list[str] | None = None,
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if classifiers is None:
        classifiers = sorted({r.classifier for r in outcome.results})
    written: list[Path] = []

    def emit(name: str, text: str) -> None:
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    emit("metrics.csv", metrics_csv(outcome, classifiers))
    emit("comparison.csv", comparison_csv(outcome, classifiers))
    for name in classifiers:
        cm = outcome.total_confusion(name)
        emit(f"confusion_{name}.txt", render_confusion(cm, class_names))
        selections = outcome.selections_for(name)
        if selections and outcome.bank_specs:
            kind_text, chan_text = selection_csvs(selections, outcome.bank_specs)
            emit(f"selection_kernels_{name}.csv", kind_text)
            emit(f"selection_channels_{name}.csv", chan_text)
    emit("results.json", outcome_to_json(outcome, classifiers, class_names))
    return written
