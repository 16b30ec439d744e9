"""Report emission: per-suite CSV/JSON and the consolidated report with
figures rendered next to the delimited output."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SCHEMA_VERSION = 1


def write_suite_report(report: dict, out_dir, seed: int) -> Path:
    """checks.csv, one CSV per table, and summary.json under <out>/<suite>/."""
    suite_dir = Path(out_dir) / report["suite"]
    suite_dir.mkdir(parents=True, exist_ok=True)
    with (suite_dir / "checks.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["name", "passed", "value",
                                                "cmp", "threshold", "note"])
        writer.writeheader()
        for c in report["checks"]:
            writer.writerow({k: c.get(k, "") for k in writer.fieldnames})
    for tname, rows in report.get("tables", {}).items():
        if not rows:
            continue
        fields = sorted({k for row in rows for k in row})
        with (suite_dir / f"{tname}.csv").open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "suite": report["suite"],
        "seed": seed,
        "n_checks": len(report["checks"]),
        "n_failed": sum(not c["passed"] for c in report["checks"]),
        "checks": report["checks"],
        "curves": report.get("curves", {}),
    }
    with (suite_dir / "summary.json").open("w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    return suite_dir


def failed_checks(report: dict) -> list:
    return [c for c in report["checks"] if not c["passed"]]


def _load_summaries(out_dir) -> dict:
    out = {}
    for path in sorted(Path(out_dir).glob("*/summary.json")):
        with path.open() as fh:
            data = json.load(fh)
        out[data["suite"]] = data
    return out


def _fig_decay(curves, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for key, style in (("decay_parabolic_full", "-"), ("decay_kolmogorov", "--")):
        if key in curves:
            ax.loglog(curves[key]["m"], curves[key]["max_coeff"], style,
                      label=key.replace("decay_", "").replace("_full", ""))
    ref_m = [4, 200]
    ax.loglog(ref_m, [0.3 * (m / 4.0) ** -2 for m in ref_m], ":", color="gray",
              label="slope -2")
    ax.set_xlabel("degree m")
    ax.set_ylabel("max |c^{km}|")
    ax.set_title("expansion coefficient decay")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def _fig_sweep(curves, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for key, data in curves.items():
        if not key.startswith("sweep_p"):
            continue
        label = f"{key[6:]}: exponent {data['exponent']:.2f}"
        ax.loglog(data["char"], data["ratio"], "o-", label=label)
    ax.set_xlabel("weight characteristic")
    ax.set_ylabel("sparse operator ratio")
    ax.set_title("weighted sparse-operator sweep")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def _fig_l2(curves, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for key, data in curves.items():
        if key.startswith("l2_"):
            ax.loglog(data["m"], data["ratio"], "o-", label=key[3:])
    ax.set_xlabel("degree m")
    ax.set_ylabel("max ||T f||_2 / ||f||_2")
    ax.set_title("singular-operator norms")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def _fig_representation(curves, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for key, data in curves.items():
        if key.startswith("representation_"):
            ax.semilogy(data["m"], data["error"], "o-", label=key[15:])
    ax.set_xlabel("truncation degree")
    ax.set_ylabel("relative L2 error")
    ax.set_title("Hessian reconstruction")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def write_consolidated(out_dir) -> Path:
    """Merge suite summaries into summary.json + theorems.csv + figures."""
    out_dir = Path(out_dir)
    summaries = _load_summaries(out_dir)
    if not summaries:
        raise FileNotFoundError(f"no suite outputs under {out_dir}")
    report_dir = out_dir / "report"
    report_dir.mkdir(exist_ok=True)
    merged = {"schema_version": SCHEMA_VERSION, "suites": {}}
    for name in ("geometry", "kernels", "harmonics", "dyadic", "operators",
                 "sparse", "weights", "orlicz", "estimates"):
        if name in summaries:
            s = summaries[name]
            merged["suites"][name] = {
                "status": "FAILED" if s["n_failed"] else "PASSED",
                "n_checks": s["n_checks"], "n_failed": s["n_failed"],
                "seed": s["seed"],
            }
        else:
            merged["suites"][name] = {"status": "SKIPPED"}
    with (report_dir / "summary.json").open("w") as fh:
        json.dump(merged, fh, indent=1, sort_keys=True)

    # one row per main estimate
    theorem_rows = []
    est_table = out_dir / "estimates" / "theorems.csv"
    if est_table.exists():
        with est_table.open() as fh:
            theorem_rows = list(csv.DictReader(fh))
    with (report_dir / "theorems.csv").open("w", newline="") as fh:
        fields = ["theorem", "ratio", "ratio_refined", "drift",
                  "fitted_exponent", "sparse_exponent", "status"]
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in theorem_rows:
            row = dict(row)
            drift = float(row.get("drift", "nan") or "nan")
            row["status"] = "pass" if drift <= 0.30 else "fail"
            writer.writerow({k: row.get(k, "") for k in fields})

    curves = {}
    for s in summaries.values():
        curves.update(s.get("curves", {}))
    if any(k.startswith("decay") for k in curves):
        _fig_decay(curves, report_dir / "fig_coefficient_decay.png")
    if any(k.startswith("sweep_p") for k in curves):
        _fig_sweep(curves, report_dir / "fig_weighted_sweep.png")
    if any(k.startswith("l2_") for k in curves):
        _fig_l2(curves, report_dir / "fig_operator_norms.png")
    if any(k.startswith("representation_") for k in curves):
        _fig_representation(curves, report_dir / "fig_representation.png")
    return report_dir


def human_summary(out_dir) -> str:
    summaries = _load_summaries(out_dir)
    lines = []
    for name, s in summaries.items():
        lines.append(f"{name}: {s['n_checks'] - s['n_failed']}/{s['n_checks']} checks passed")
        for c in s["checks"]:
            if not c["passed"]:
                lines.append(f"  FAILED {c['name']}: value {c['value']:.4g} "
                             f"vs threshold {c['threshold']:.4g} {c.get('note', '')}")
    return "\n".join(lines)
