"""Report serialization (JSON, CSV, text) and figure rendering.

All numeric values are rounded to 12 significant digits once, when the
report dictionary is built, so every output format encodes identical
numbers and JSON output round-trips exactly.
"""

import csv
import io
import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

CSV_COLUMNS = ("model", "property", "r", "kappa", "states", "transitions",
               "build_s", "analyze_s", "pmin", "pmax", "verdict")


def round_sig(x):
    """Round a float to 12 significant digits."""
    return float(f"{x:.12g}")


def fmt(x):
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def run_to_dict(model_ref, property_text, params, report):
    """Build the canonical report dictionary for one verification run."""
    iterations = []
    for rec in report.iterations:
        iterations.append({
            "r": rec.r,
            "kappa": round_sig(rec.kappa),
            "states": rec.bound.states,
            "transitions": rec.bound.transitions,
            "build_s": round_sig(rec.build_time),
            "analyze_s": round_sig(rec.analyze_time),
            "pmin": round_sig(rec.bound.pmin),
            "pmax": round_sig(rec.bound.pmax),
            "expansion_mode": rec.expansion_mode,
        })
    return {
        "model": str(model_ref),
        "property": property_text,
        "params": {
            "kappa0": round_sig(params.kappa0),
            "reduction_factor": round_sig(params.reduction_factor),
            "epsilon": round_sig(params.epsilon),
            "max_iterations": params.max_iterations,
            "state_cap": params.state_cap,
            "transient_tol": round_sig(params.transient_tol),
        },
        "iterations": iterations,
        "verdict": report.verdict.value,
        "final": {
            "pmin": round_sig(report.final_bound.pmin),
            "pmax": round_sig(report.final_bound.pmax),
        },
    }


def to_json(payload):
    return json.dumps(payload, indent=2) + "\n"


def csv_rows(payload):
    rows = []
    for it in payload["iterations"]:
        rows.append({
            "model": payload["model"],
            "property": payload["property"],
            "r": it["r"],
            "kappa": fmt(it["kappa"]),
            "states": it["states"],
            "transitions": it["transitions"],
            "build_s": fmt(it["build_s"]),
            "analyze_s": fmt(it["analyze_s"]),
            "pmin": fmt(it["pmin"]),
            "pmax": fmt(it["pmax"]),
            "verdict": payload["verdict"],
        })
    return rows


def to_csv(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def to_text(payload):
    lines = [
        f"model:    {payload['model']}",
        f"property: {payload['property']}",
    ]
    header = (f"  {'r':>2}  {'kappa':>10}  {'states':>9}  {'transitions':>11}"
              f"  {'build_s':>18}  {'analyze_s':>18}  {'pmin':>17}"
              f"  {'pmax':>17}  mode")
    lines.append(header)
    for it in payload["iterations"]:
        lines.append(
            f"  {it['r']:>2}  {fmt(it['kappa']):>10}  {it['states']:>9}"
            f"  {it['transitions']:>11}  {fmt(it['build_s']):>18}"
            f"  {fmt(it['analyze_s']):>18}  {fmt(it['pmin']):>17}"
            f"  {fmt(it['pmax']):>17}  {it['expansion_mode']}")
    if "oracle" in payload:
        orc = payload["oracle"]
        if "error" in orc:
            lines.append(f"oracle:   {orc['error']}")
        else:
            lines.append(f"oracle:   exact={fmt(orc['exact'])} "
                         f"within_bounds={orc['within_bounds']}")
    lines.append(f"verdict:  {payload['verdict']}")
    final = payload["final"]
    lines.append(f"final:    [{fmt(final['pmin'])}, {fmt(final['pmax'])}]")
    return "\n".join(lines) + "\n"


def render_refinement_figure(payload, path):
    """Two-panel convergence figure: bound interval per iteration on top,
    explored graph size per iteration below. Written to `path`."""
    its = payload["iterations"]
    rs = [it["r"] for it in its]
    pmins = [it["pmin"] for it in its]
    pmaxs = [it["pmax"] for it in its]
    states = [it["states"] for it in its]
    transitions = [it["transitions"] for it in its]

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.4, 6.0), sharex=True)
    ax1.fill_between(rs, pmins, pmaxs, alpha=0.25, color="tab:blue",
                     step="mid", label="bound interval")
    ax1.plot(rs, pmins, "o-", color="tab:blue", label="lower bound")
    ax1.plot(rs, pmaxs, "s-", color="tab:red", label="upper bound")
    for r, pmax, it in zip(rs, pmaxs, its):
        ax1.annotate(f"kappa={it['kappa']:g}", (r, pmax),
                     textcoords="offset points", xytext=(4, 6), fontsize=7)
    ax1.set_ylabel("probability")
    ax1.set_ylim(-0.05, 1.05)
    ax1.legend(loc="best", fontsize=8)
    ax1.set_title(payload["property"], fontsize=9)

    ax2.plot(rs, states, "o-", color="tab:green", label="states")
    ax2.plot(rs, transitions, "s--", color="tab:olive", label="transitions")
    ax2.set_yscale("log")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("graph size")
    ax2.set_xticks(rs)
    ax2.legend(loc="best", fontsize=8)

    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return path


def corpus_to_json(runs, errors):
    return json.dumps({"runs": runs, "errors": errors}, indent=2) + "\n"


def corpus_to_csv(runs, errors):
    rows = []
    for payload in runs:
        rows.extend(csv_rows(payload))
    for err in errors:
        rows.append({
            "model": err.get("model", ""),
            "property": err.get("property", ""),
            "r": 0, "kappa": "", "states": "", "transitions": "",
            "build_s": "", "analyze_s": "", "pmin": "", "pmax": "",
            "verdict": f"error: {err['error']}",
        })
    return to_csv(rows)


def corpus_to_text(runs, errors):
    parts = [to_text(payload) for payload in runs]
    for err in errors:
        parts.append(f"model:    {err.get('model', '')}\n"
                     f"error:    {err['error']}\n")
    return "\n".join(parts)
